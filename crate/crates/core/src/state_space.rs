//! Discrete-time linear system driven by a [`TransitionModel`].
//!
//! ```text
//! x[k]     = Q·x[k-1] + b·u[k-1]
//! z_obs[k] = hᵀ·x[k]
//! z_out[k] = z_out[k-1] + ψᵀ·x[k-1]
//! ```
//!
//! `x` holds expected molecule counts, so every quantity here is real-valued.
//! All recurrences are iterated sparse products; `Qᵏ` is never formed.

use thiserror::Error;

use crate::kernel::TransitionModel;
use crate::sparse::Banded;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateSpaceError {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("{what} must be finite and nonnegative (index {index}: {value})")]
    NegativeInput {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("snapshot stride must be at least 1")]
    ZeroStride,
    #[error("I - Q is singular (pivot {pivot} of the elimination); the chain does not leak, so the equilibrium gain is unbounded")]
    SingularSystem { pivot: usize },
}

/// Time series of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Input `u[k]` released during step `k`, length `K`.
    pub inputs: Vec<f64>,
    /// `hᵀx[k]`, length `K+1`.
    pub z_obs: Vec<f64>,
    /// Cumulative flow-out, length `K+1`, starting at 0.
    pub z_out: Vec<f64>,
    /// `k·Δt`, s.
    pub t: Vec<f64>,
    /// `x[k]` for every `k` divisible by `stride`.
    pub snapshots: Vec<Vec<f64>>,
    pub stride: usize,
    /// `x[K]`, always kept.
    pub final_state: Vec<f64>,
}

impl Trajectory {
    /// Number of steps `K`.
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    /// `x[k]`, if it was recorded.
    pub fn state(&self, k: usize) -> Option<&[f64]> {
        if k == self.steps() {
            return Some(&self.final_state);
        }
        if k % self.stride == 0 {
            self.snapshots.get(k / self.stride).map(Vec::as_slice)
        } else {
            None
        }
    }

    /// Index and value of the largest `z_obs`; the first one on ties.
    pub fn peak(&self) -> (usize, f64) {
        argmax(&self.z_obs)
    }
}

/// Channel impulse response `g[i] = hᵀQⁱb`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub g: Vec<f64>,
    pub dt: f64,
}

impl Cir {
    /// `Σ_{i<k} g[i]` for `k = 0..=len`, the unit step response.
    pub fn prefix_sums(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.g.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for &g in &self.g {
            acc += g;
            out.push(acc);
        }
        out
    }

    pub fn peak(&self) -> (usize, f64) {
        argmax(&self.g)
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_nonnegative(what: &'static str, v: &[f64]) -> Result<(), StateSpaceError> {
    match v.iter().position(|x| !(*x >= 0.0 && x.is_finite())) {
        Some(index) => Err(StateSpaceError::NegativeInput {
            what,
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

/// Runs the recurrence for `steps` steps from `x0` under inputs `u`.
///
/// `x[k]` is kept for every `k` divisible by `stride` (1 keeps everything).
pub fn propagate(
    model: &TransitionModel,
    x0: &[f64],
    u: &[f64],
    steps: usize,
    stride: usize,
) -> Result<Trajectory, StateSpaceError> {
    let n = model.dim();
    if x0.len() != n {
        return Err(StateSpaceError::DimensionMismatch {
            what: "x0",
            got: x0.len(),
            expected: n,
        });
    }
    if u.len() != steps {
        return Err(StateSpaceError::DimensionMismatch {
            what: "u",
            got: u.len(),
            expected: steps,
        });
    }
    if stride == 0 {
        return Err(StateSpaceError::ZeroStride);
    }
    check_nonnegative("x0", x0)?;
    check_nonnegative("u", u)?;

    let (b, h, psi) = (model.b(), model.h(), model.psi());
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut z_obs = Vec::with_capacity(steps + 1);
    let mut z_out = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::with_capacity(steps / stride + 1);
    z_obs.push(dot(h, &x));
    z_out.push(0.0);
    snapshots.push(x.clone());
    let mut out_acc = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        out_acc += dot(psi, &x);
        model.q().mul_vec_into(&x, &mut next);
        if uk != 0.0 {
            for (xi, bi) in next.iter_mut().zip(b) {
                *xi += bi * uk;
            }
        }
        std::mem::swap(&mut x, &mut next);
        z_obs.push(dot(h, &x));
        z_out.push(out_acc);
        if (k + 1) % stride == 0 {
            snapshots.push(x.clone());
        }
    }
    let dt = model.dt();
    Ok(Trajectory {
        inputs: u.to_vec(),
        z_obs,
        z_out,
        t: (0..=steps).map(|k| k as f64 * dt).collect(),
        snapshots,
        stride,
        final_state: x,
    })
}

/// `g[i] = hᵀQⁱb` for `i = 0..=steps`.
pub fn cir(model: &TransitionModel, steps: usize) -> Cir {
    let h = model.h();
    let mut w = model.b().to_vec();
    let mut next = vec![0.0; w.len()];
    let mut g = Vec::with_capacity(steps + 1);
    g.push(dot(h, &w));
    for _ in 0..steps {
        model.q().mul_vec_into(&w, &mut next);
        std::mem::swap(&mut w, &mut next);
        g.push(dot(h, &w));
    }
    Cir { g, dt: model.dt() }
}

/// Empty channel, `u0` molecules released at step 0, nothing afterwards.
///
/// `z_obs[k] = g[k-1]·u0` for `k ≥ 1` and `z_obs[0] = 0`.
pub fn pulse_response(
    model: &TransitionModel,
    u0: f64,
    steps: usize,
    stride: usize,
) -> Result<Trajectory, StateSpaceError> {
    let mut u = vec![0.0; steps];
    if let Some(first) = u.first_mut() {
        *first = u0;
    }
    check_nonnegative("u0", &[u0])?;
    propagate(model, &vec![0.0; model.dim()], &u, steps, stride)
}

/// Empty channel, `u0` molecules released at every step.
///
/// `z_obs[k] = u0·Σ_{i<k} g[i]`.
pub fn continuous_response(
    model: &TransitionModel,
    u0: f64,
    steps: usize,
    stride: usize,
) -> Result<Trajectory, StateSpaceError> {
    check_nonnegative("u0", &[u0])?;
    propagate(model, &vec![0.0; model.dim()], &vec![u0; steps], steps, stride)
}

/// Equilibrium gain `hᵀ(I−Q)⁻¹b`, the limit of the step response per unit input.
///
/// Solved directly with a banded LU of `I − Q` in the model's elimination
/// order. A pivot with magnitude `<= tol` means the chain has no leak on
/// some closed class and is reported as [`StateSpaceError::SingularSystem`].
pub fn equilibrium_gain(model: &TransitionModel, tol: f64) -> Result<f64, StateSpaceError> {
    let order = model.elimination_order();
    let n = order.len();
    let mut position = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }

    let (mut lower, mut upper) = (0, 0);
    for (i, j, v) in model.q().entries() {
        if v == 0.0 {
            continue;
        }
        let (pi, pj) = (position[i], position[j]);
        lower = lower.max(pi.saturating_sub(pj));
        upper = upper.max(pj.saturating_sub(pi));
    }
    let mut a = Banded::zeros(n, lower, upper);
    for k in 0..n {
        a.add(k, k, 1.0);
    }
    for (i, j, v) in model.q().entries() {
        if v != 0.0 {
            a.add(position[i], position[j], -v);
        }
    }

    let mut y: Vec<f64> = order.iter().map(|&old| model.b()[old]).collect();
    a.solve_in_place(&mut y, tol)
        .map_err(|pivot| StateSpaceError::SingularSystem { pivot })?;
    Ok(order
        .iter()
        .zip(&y)
        .map(|(&old, yi)| model.h()[old] * yi)
        .sum())
}
