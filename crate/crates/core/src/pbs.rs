//! Particle-based simulation of the same chain, one molecule at a time.
//!
//! Every particle draws one uniform number per step and moves through the
//! cumulative distribution of its current column in the fixed order stay,
//! upstream, downstream, bind/unbind, flow-out. Flowed-out particles are
//! retired immediately. Counts are integers and conserved exactly.
//!
//! Particles are split into a fixed number of partitions. Partition `p`
//! draws from the ChaCha8 stream `p` of `seed`, so a result depends only on
//! `(seed, partitions, model, schedule)` and not on thread scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernel::TransitionModel;
use crate::state_space::Trajectory;

pub const DEFAULT_PARTITIONS: usize = 8;

/// Added to the residual variance so empty steps do not divide by zero.
pub const RESIDUAL_EPS: f64 = 1e-12;

const FLOW_OUT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PbsError {
    #[error("no particles to simulate (particles must be at least 1)")]
    NoParticles,
    #[error("partition count must be at least 1")]
    ZeroPartitions,
    #[error("occupancy stride must be at least 1")]
    ZeroStride,
    #[error("initial occupancy has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("model has no single {0} state (b and h must be unit vectors)")]
    NotSiso(&'static str),
    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbsConfig {
    /// Particles released into the input state during step `k`; length `K`.
    pub schedule: Vec<u64>,
    /// Particles per transient state at `k = 0`; empty channel when `None`.
    pub initial: Option<Vec<u64>>,
    pub seed: u64,
    pub partitions: usize,
    /// Record the full occupancy vector every `stride` steps.
    pub occupancy_stride: Option<usize>,
}

impl PbsConfig {
    pub fn with_schedule(schedule: Vec<u64>, seed: u64) -> Self {
        Self {
            schedule,
            initial: None,
            seed,
            partitions: DEFAULT_PARTITIONS,
            occupancy_stride: None,
        }
    }

    /// `particles` released at step 0.
    pub fn pulse(particles: u64, steps: usize, seed: u64) -> Self {
        let mut schedule = vec![0; steps];
        if let Some(first) = schedule.first_mut() {
            *first = particles;
        }
        Self::with_schedule(schedule, seed)
    }

    /// `per_step` particles released at every step.
    pub fn continuous(per_step: u64, steps: usize, seed: u64) -> Self {
        Self::with_schedule(vec![per_step; steps], seed)
    }

    pub fn steps(&self) -> usize {
        self.schedule.len()
    }

    /// Initial particles plus everything the schedule releases.
    pub fn total_particles(&self) -> u64 {
        self.initial.iter().flatten().sum::<u64>() + self.schedule.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbsResult {
    /// Particles in the observed (bound) state at step `k`; length `K+1`.
    pub bound_count: Vec<u64>,
    /// Particles flowed out by step `k`; non-decreasing.
    pub out_count: Vec<u64>,
    /// Particles present or flowed out by step `k`: initial plus `Σ_{j<k} u[j]`.
    pub released: Vec<u64>,
    pub schedule: Vec<u64>,
    /// Occupancy vectors at `k = 0, stride, 2·stride, …` when requested.
    pub occupancy: Option<Vec<Vec<u64>>>,
    pub seed: u64,
    pub partitions: usize,
    pub particles: u64,
}

impl PbsResult {
    /// Particles still in transient states at step `k`.
    pub fn in_transit(&self, k: usize) -> u64 {
        self.released[k] - self.out_count[k]
    }
}

/// Per-state cumulative outcome tables.
struct Sampler {
    start: Vec<usize>,
    // (cumulative probability, target state or FLOW_OUT)
    outcomes: Vec<(f64, u32)>,
}

impl Sampler {
    fn new(model: &TransitionModel) -> Self {
        let n = model.dim();
        let mut start = Vec::with_capacity(n + 1);
        let mut outcomes = Vec::new();
        for j in 0..n {
            start.push(outcomes.len());
            let mut cum = 0.0;
            let column = model
                .q()
                .column(j)
                .map(|(i, p)| (i as u32, p))
                .chain(std::iter::once((FLOW_OUT, model.psi()[j])));
            for (target, p) in column {
                if p > 0.0 {
                    cum += p;
                    outcomes.push((cum, target));
                }
            }
            if outcomes.len() == start[j] {
                outcomes.push((1.0, j as u32));
            }
        }
        start.push(outcomes.len());
        Self { start, outcomes }
    }

    #[inline]
    fn next(&self, state: u32, u: f64) -> u32 {
        let s = state as usize;
        let slice = &self.outcomes[self.start[s]..self.start[s + 1]];
        for &(cum, target) in slice {
            if u < cum {
                return target;
            }
        }
        // rounding left the column total a hair below 1
        slice[slice.len() - 1].1
    }
}

struct PartitionRun {
    bound: Vec<u64>,
    out: Vec<u64>,
    occupancy: Vec<Vec<u64>>,
}

fn share(count: u64, part: usize, parts: usize) -> u64 {
    let parts = parts as u64;
    count / parts + u64::from((part as u64) < count % parts)
}

fn run_partition(
    model: &TransitionModel,
    sampler: &Sampler,
    cfg: &PbsConfig,
    part: usize,
    input: u32,
    observed: u32,
) -> PartitionRun {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(part as u64);

    let n = model.dim();
    let steps = cfg.steps();
    let mut particles: Vec<u32> = Vec::new();
    if let Some(initial) = &cfg.initial {
        for (state, &count) in initial.iter().enumerate() {
            let mine = share(count, part, cfg.partitions);
            particles.extend(std::iter::repeat_n(state as u32, mine as usize));
        }
    }
    let mut bound = particles.iter().filter(|&&s| s == observed).count() as u64;
    let mut out = 0u64;

    let mut run = PartitionRun {
        bound: Vec::with_capacity(steps + 1),
        out: Vec::with_capacity(steps + 1),
        occupancy: Vec::new(),
    };
    for k in 0..=steps {
        run.bound.push(bound);
        run.out.push(out);
        if let Some(stride) = cfg.occupancy_stride {
            if k % stride == 0 {
                let mut occ = vec![0u64; n];
                for &s in &particles {
                    occ[s as usize] += 1;
                }
                run.occupancy.push(occ);
            }
        }
        if k == steps {
            break;
        }

        let mut i = 0;
        while i < particles.len() {
            let from = particles[i];
            let to = sampler.next(from, rng.random::<f64>());
            if to == FLOW_OUT {
                bound -= u64::from(from == observed);
                out += 1;
                // the particle swapped into slot i has not moved yet this step
                particles.swap_remove(i);
                continue;
            }
            if to != from {
                bound -= u64::from(from == observed);
                bound += u64::from(to == observed);
                particles[i] = to;
            }
            i += 1;
        }

        let released = share(cfg.schedule[k], part, cfg.partitions);
        particles.extend(std::iter::repeat_n(input, released as usize));
        if input == observed {
            bound += released;
        }
    }
    run
}

/// Simulates every particle of `cfg` through `model`.
pub fn run_pbs(model: &TransitionModel, cfg: &PbsConfig) -> Result<PbsResult, PbsError> {
    if cfg.partitions == 0 {
        return Err(PbsError::ZeroPartitions);
    }
    if cfg.occupancy_stride == Some(0) {
        return Err(PbsError::ZeroStride);
    }
    if let Some(initial) = &cfg.initial {
        if initial.len() != model.dim() {
            return Err(PbsError::DimensionMismatch {
                got: initial.len(),
                expected: model.dim(),
            });
        }
    }
    if cfg.total_particles() == 0 {
        return Err(PbsError::NoParticles);
    }
    let input = model.input_state().ok_or(PbsError::NotSiso("input"))? as u32;
    let observed = model.observed_state().ok_or(PbsError::NotSiso("observed"))? as u32;

    let sampler = Sampler::new(model);
    let runs: Vec<PartitionRun> = (0..cfg.partitions)
        .into_par_iter()
        .map(|p| run_partition(model, &sampler, cfg, p, input, observed))
        .collect();

    let steps = cfg.steps();
    let mut bound_count = vec![0u64; steps + 1];
    let mut out_count = vec![0u64; steps + 1];
    let mut occupancy = cfg
        .occupancy_stride
        .map(|stride| vec![vec![0u64; model.dim()]; steps / stride + 1]);
    for run in &runs {
        for (acc, v) in bound_count.iter_mut().zip(&run.bound) {
            *acc += v;
        }
        for (acc, v) in out_count.iter_mut().zip(&run.out) {
            *acc += v;
        }
        if let Some(occ) = occupancy.as_mut() {
            for (acc, snap) in occ.iter_mut().zip(&run.occupancy) {
                for (a, v) in acc.iter_mut().zip(snap) {
                    *a += v;
                }
            }
        }
    }

    let mut released = Vec::with_capacity(steps + 1);
    let mut acc: u64 = cfg.initial.iter().flatten().sum();
    released.push(acc);
    for &u in &cfg.schedule {
        acc += u;
        released.push(acc);
    }

    Ok(PbsResult {
        bound_count,
        out_count,
        released,
        schedule: cfg.schedule.clone(),
        occupancy,
        seed: cfg.seed,
        partitions: cfg.partitions,
        particles: cfg.total_particles(),
    })
}

/// Standardized residuals of observed counts against expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `(observed − expected) / √(expected·(1 − expected/total) + ε)` per step.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    /// Fraction of steps with `|residual| ≤ 3`.
    pub within_3sigma: f64,
}

impl ComparisonReport {
    /// Fraction of steps with `|residual| ≤ bound`.
    pub fn fraction_within(&self, bound: f64) -> f64 {
        if self.residuals.is_empty() {
            return 1.0;
        }
        let hits = self.residuals.iter().filter(|r| r.abs() <= bound).count();
        hits as f64 / self.residuals.len() as f64
    }
}

/// Compares per-step counts with binomial expectations out of `totals[k]` trials.
pub fn compare_counts(
    observed: &[u64],
    expected: &[f64],
    totals: &[u64],
) -> Result<ComparisonReport, PbsError> {
    if observed.len() != expected.len() || observed.len() != totals.len() {
        return Err(PbsError::ScheduleMismatch(format!(
            "series lengths differ ({} observed, {} expected, {} totals)",
            observed.len(),
            expected.len(),
            totals.len()
        )));
    }
    let residuals: Vec<f64> = observed
        .iter()
        .zip(expected)
        .zip(totals)
        .map(|((&obs, &exp), &total)| {
            let p = if total > 0 { exp / total as f64 } else { 0.0 };
            let var = (exp * (1.0 - p)).max(0.0) + RESIDUAL_EPS;
            (obs as f64 - exp) / var.sqrt()
        })
        .collect();
    let max_abs_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let mut report = ComparisonReport {
        residuals,
        max_abs_residual,
        within_3sigma: 0.0,
    };
    report.within_3sigma = report.fraction_within(3.0);
    Ok(report)
}

/// Compares a particle run with the analytical trajectory of the same schedule.
pub fn compare_to_model(
    result: &PbsResult,
    traj: &Trajectory,
) -> Result<ComparisonReport, PbsError> {
    if result.schedule.len() != traj.inputs.len() {
        return Err(PbsError::ScheduleMismatch(format!(
            "{} particle steps vs {} model steps",
            result.schedule.len(),
            traj.inputs.len()
        )));
    }
    if let Some(k) = result
        .schedule
        .iter()
        .zip(&traj.inputs)
        .position(|(&a, &b)| a as f64 != b)
    {
        return Err(PbsError::ScheduleMismatch(format!(
            "step {k}: {} particles released vs input {}",
            result.schedule[k], traj.inputs[k]
        )));
    }
    let initial_model: f64 = traj.state(0).map_or(0.0, |x| x.iter().sum());
    if result.released[0] as f64 != initial_model {
        return Err(PbsError::ScheduleMismatch(format!(
            "initial particles {} vs initial model mass {}",
            result.released[0], initial_model
        )));
    }
    compare_counts(&result.bound_count, &traj.z_obs, &result.released)
}
