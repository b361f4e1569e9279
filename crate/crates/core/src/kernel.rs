//! Transition-model assembly.
//!
//! States are stored in the order `s₁ … s_{N-1}, s_N`: the free states form
//! a tridiagonal band and the bound state couples to the receiver free state
//! `s_r` through the two off-band entries `(N, r)` and `(r, N)`. The
//! flow-out state is never stored; its inflow is the vector ψ.
//!
//! Within each column, entries are stored in the fixed outcome order
//! stay, upstream, downstream, bind/unbind. The particle oracle relies on
//! this order for reproducible sampling.

use std::fmt::Write as _;

use thiserror::Error;

use crate::config::{elementary_probabilities, ElementaryProbabilities, ValidatedConfig};
use crate::sparse::SparseColumns;
use crate::text::fmt_real;

/// Absolute tolerance on `Σᵢ Q[i,j] + ψ[j] = 1`.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("entry {what} = {value} is outside [0, 1]")]
    EntryOutOfRange { what: String, value: f64 },
    #[error("column {column}: transient mass plus flow-out is {sum}, not 1")]
    NotStochastic { column: usize, sum: f64 },
    #[error("power iteration did not converge in {iterations} iterations (best estimate {estimate})")]
    NoConvergence { estimate: f64, iterations: usize },
}

/// Position of the receiver in a chain-shaped model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainLayout {
    /// `N`: free states plus the bound state.
    pub n_states: usize,
    /// 1-based receiver free-state index `r`.
    pub receiver: usize,
}

/// Transient-state dynamics `x ← Q·x + b·u`, observation `hᵀx`, flow-out `ψᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    q: SparseColumns,
    psi: Vec<f64>,
    b: Vec<f64>,
    h: Vec<f64>,
    dt: f64,
    layout: Option<ChainLayout>,
    probabilities: Option<ElementaryProbabilities>,
}

/// Assembles the chain for `cfg` from the given probabilities.
///
/// `ep` is normally [`elementary_probabilities`] of `cfg`; passing other
/// values (say, a perturbed `p_bind`) is allowed, but the result is only a
/// proper transition model if `ep.check()` passes.
pub fn build_transition_model(
    cfg: &ValidatedConfig,
    ep: &ElementaryProbabilities,
) -> TransitionModel {
    let n = cfg.n_states;
    let r = cfg.receiver - 1;
    let bound = n - 1;
    let last_free = n - 2;

    let down = ep.p_diff + ep.p_flow;
    let up = ep.p_diff;

    let mut columns = Vec::with_capacity(n);
    for j in 0..=last_free {
        let mut col = Vec::with_capacity(4);
        // slot 0 is the stay probability, filled in below
        col.push((j, 0.0));
        let mut stay = 1.0;
        if j > 0 {
            col.push((j - 1, up));
        }
        // the last free state's downstream hop leaves through ψ instead
        stay -= down;
        if j < last_free {
            col.push((j + 1, down));
        }
        if j > 0 {
            stay -= up;
        }
        if j == r {
            col.push((bound, ep.p_bind));
            stay -= ep.p_bind;
        }
        col[0].1 = stay;
        columns.push(col);
    }
    columns.push(vec![(bound, 1.0 - ep.p_unbind), (r, ep.p_unbind)]);

    let mut psi = vec![0.0; n];
    psi[last_free] = down;
    let mut b = vec![0.0; n];
    b[0] = 1.0;
    let mut h = vec![0.0; n];
    h[bound] = 1.0;

    TransitionModel {
        q: SparseColumns::from_columns(columns),
        psi,
        b,
        h,
        dt: cfg.dt,
        layout: Some(ChainLayout {
            n_states: n,
            receiver: cfg.receiver,
        }),
        probabilities: Some(*ep),
    }
}

impl TransitionModel {
    /// The chain model of `cfg` with its own elementary probabilities.
    pub fn from_config(cfg: &ValidatedConfig) -> Self {
        build_transition_model(cfg, &elementary_probabilities(cfg))
    }

    /// A model with arbitrary structure, checked for stochasticity.
    ///
    /// Entries of `q`, `psi` must lie in `[0, 1]`, each column of `q` plus the
    /// matching `psi` entry must sum to 1, and `b`, `h` must be nonnegative.
    pub fn from_parts(
        q: SparseColumns,
        psi: Vec<f64>,
        b: Vec<f64>,
        h: Vec<f64>,
        dt: f64,
    ) -> Result<Self, KernelError> {
        let n = q.dim();
        for (what, v) in [("psi", &psi), ("b", &b), ("h", &h)] {
            if v.len() != n {
                return Err(KernelError::DimensionMismatch {
                    what,
                    got: v.len(),
                    expected: n,
                });
            }
        }
        for (i, j, v) in q.entries() {
            if !(0.0..=1.0).contains(&v) {
                return Err(KernelError::EntryOutOfRange {
                    what: format!("Q[{},{}]", i + 1, j + 1),
                    value: v,
                });
            }
        }
        for (name, vec, upper) in [("psi", &psi, 1.0), ("b", &b, f64::INFINITY), ("h", &h, f64::INFINITY)] {
            if let Some((i, &v)) = vec
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v >= 0.0 && **v <= upper))
            {
                return Err(KernelError::EntryOutOfRange {
                    what: format!("{name}[{}]", i + 1),
                    value: v,
                });
            }
        }
        let model = Self {
            q,
            psi,
            b,
            h,
            dt,
            layout: None,
            probabilities: None,
        };
        for j in 0..n {
            let sum = model.column_total(j);
            if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(KernelError::NotStochastic {
                    column: j + 1,
                    sum,
                });
            }
        }
        Ok(model)
    }

    /// Number of transient states.
    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn q(&self) -> &SparseColumns {
        &self.q
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn layout(&self) -> Option<ChainLayout> {
        self.layout
    }

    pub fn probabilities(&self) -> Option<ElementaryProbabilities> {
        self.probabilities
    }

    /// `Σᵢ Q[i,j] + ψ[j]`, which is 1 for a proper model.
    pub fn column_total(&self, j: usize) -> f64 {
        self.q.column_sum(j) + self.psi[j]
    }

    /// Largest `|Σᵢ Q[i,j] + ψ[j] − 1|` over all columns.
    pub fn max_column_defect(&self) -> f64 {
        (0..self.dim())
            .map(|j| (self.column_total(j) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// The single state observed by `h`, when `h` is a unit basis vector.
    pub fn observed_state(&self) -> Option<usize> {
        unit_index(&self.h)
    }

    /// The single state fed by `b`, when `b` is a unit basis vector.
    pub fn input_state(&self) -> Option<usize> {
        unit_index(&self.b)
    }

    /// A state ordering under which `I − Q` is narrowly banded.
    ///
    /// For a chain this is `s₁ … s_r, s_N, s_{r+1} … s_{N-1}`, giving
    /// bandwidth 2; other models keep their natural order.
    pub(crate) fn elimination_order(&self) -> Vec<usize> {
        match self.layout {
            Some(ChainLayout { n_states, receiver }) => (0..receiver)
                .chain(std::iter::once(n_states - 1))
                .chain(receiver..n_states - 1)
                .collect(),
            None => (0..self.dim()).collect(),
        }
    }

    /// Matrix-market-style triplet listing of `Q`, `ψ`, `b` and `h`.
    ///
    /// Each object is its own `coordinate real general` block with 1-based
    /// indices; only stored entries of `Q` and nonzeros of the vectors are
    /// listed, column by column.
    pub fn to_triplets(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        let header = "%%MatrixMarket matrix coordinate real general";
        let _ = writeln!(out, "{header}\n% Q");
        let _ = writeln!(out, "{n} {n} {}", self.q.nnz());
        for (i, j, v) in self.q.entries() {
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, fmt_real(v));
        }
        for (name, vec) in [("psi", &self.psi), ("b", &self.b), ("h", &self.h)] {
            let nz: Vec<_> = vec.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
            let _ = writeln!(out, "{header}\n% {name}\n{n} 1 {}", nz.len());
            for (i, v) in nz {
                let _ = writeln!(out, "{} 1 {}", i + 1, fmt_real(*v));
            }
        }
        out
    }
}

fn unit_index(v: &[f64]) -> Option<usize> {
    let mut found = None;
    for (i, &x) in v.iter().enumerate() {
        if x == 1.0 && found.is_none() {
            found = Some(i);
        } else if x != 0.0 {
            return None;
        }
    }
    found
}

/// Outcome of [`power_iteration`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIteration {
    /// Rayleigh quotient `xᵀQx / xᵀx` of the last iterate.
    pub estimate: f64,
    /// Collatz–Wielandt bounds `min, max (Qx)ᵢ/xᵢ` over positive `xᵢ`.
    /// For nonnegative `Q` and a positive iterate, `lower ≤ ρ(Q) ≤ upper`.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `Q` from the uniform positive vector.
///
/// Converged once `upper − lower < tol`. Successive Rayleigh quotients alone
/// are not a safe stopping rule here: with a clustered, non-normal spectrum
/// they stall well away from ρ.
pub fn power_iteration(model: &TransitionModel, iters: usize, tol: f64) -> PowerIteration {
    let n = model.dim();
    let mut x = vec![1.0 / n as f64; n];
    let mut y = vec![0.0; n];
    let mut last = PowerIteration {
        estimate: f64::NAN,
        lower: 0.0,
        upper: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    for it in 1..=iters {
        model.q.mul_vec_into(&x, &mut y);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
        for (xi, yi) in x.iter().zip(&y) {
            if *xi > 0.0 {
                let ratio = yi / xi;
                lower = lower.min(ratio);
                upper = upper.max(ratio);
            } else if *yi > 0.0 {
                upper = f64::INFINITY;
            }
        }
        last = PowerIteration {
            estimate: xy / xx,
            lower,
            upper,
            iterations: it,
            converged: upper - lower < tol,
        };
        let norm: f64 = y.iter().sum();
        if norm == 0.0 {
            // Q is nilpotent on the start vector
            return PowerIteration {
                estimate: 0.0,
                lower: 0.0,
                upper: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if last.converged {
            return last;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    last
}

/// Power-iteration estimate of the spectral radius ρ(Q).
///
/// An unconverged run is an error carrying the last estimate.
pub fn spectral_radius_estimate(
    model: &TransitionModel,
    iters: usize,
    tol: f64,
) -> Result<f64, KernelError> {
    let run = power_iteration(model, iters, tol);
    if run.converged {
        Ok(run.estimate)
    } else {
        Err(KernelError::NoConvergence {
            estimate: run.estimate,
            iterations: run.iterations,
        })
    }
}
