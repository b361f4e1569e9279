#![allow(dead_code)]

use mfmc::config::{validate_config, ChannelConfig, ValidatedConfig};
use mfmc::kernel::TransitionModel;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Target probabilities for one random chain.
#[derive(Debug, Clone, Copy)]
pub struct Draw {
    pub n: usize,
    pub r: usize,
    pub p_diff: f64,
    pub p_flow: f64,
    pub p_bind: f64,
    pub p_unbind: f64,
}

impl Draw {
    /// Physical parameters that reproduce the drawn probabilities.
    pub fn config(&self) -> ValidatedConfig {
        let (dx, dt, c_p) = (1e-6, 1e-3, 1e-8);
        let cfg = ChannelConfig {
            diffusion: self.p_diff * dx * dx / dt,
            velocity: self.p_flow * dx / dt,
            k_on: self.p_bind / (c_p * dt),
            k_off: self.p_unbind / dt,
            receptor_conc: c_p,
            dx,
            dt,
            n_states: self.n,
            receiver: self.r,
        };
        validate_config(cfg).expect("drawn config validates")
    }

    pub fn model(&self) -> TransitionModel {
        TransitionModel::from_config(&self.config())
    }
}

/// Random valid chain; the 0.999 margin keeps rounding from pushing a stay below 0.
pub fn draw(rng: &mut impl Rng, n_range: std::ops::Range<usize>) -> Draw {
    let n = rng.random_range(n_range);
    let r = rng.random_range(2..=n - 2);
    let p_diff = rng.random_range(0.0..0.45);
    let p_flow = rng.random_range(0.0..(1.0 - 2.0 * p_diff) * 0.999);
    let p_bind = rng.random_range(0.0..(1.0 - 2.0 * p_diff - p_flow) * 0.999);
    let p_unbind = rng.random_range(0.0..1.0);
    Draw {
        n,
        r,
        p_diff,
        p_flow,
        p_bind,
        p_unbind,
    }
}

prop_compose! {
    pub fn arb_draw(max_n: usize)(seed in any::<u64>()) -> Draw {
        draw(&mut ChaCha8Rng::seed_from_u64(seed), 4..max_n + 1)
    }
}

pub fn dense_q(m: &TransitionModel) -> DMatrix<f64> {
    let rows = m.q().to_dense();
    DMatrix::from_fn(m.dim(), m.dim(), |i, j| rows[i][j])
}

/// `hᵀQⁱb` for `i = 0..=steps` by explicit dense powers.
pub fn dense_cir(m: &TransitionModel, steps: usize) -> Vec<f64> {
    let q = dense_q(m);
    let b = DVector::from_column_slice(m.b());
    let h = DVector::from_column_slice(m.h());
    let mut power = DMatrix::<f64>::identity(m.dim(), m.dim());
    let mut out = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        out.push(h.dot(&(&power * &b)));
        power = &power * &q;
    }
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
