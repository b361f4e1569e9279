//! Channel scenarios and the per-step transition probabilities derived from them.
//!
//! A [`ChannelConfig`] carries the physical and discretization parameters of
//! one channel in strict SI units. [`validate_config`] turns it into a
//! [`ValidatedConfig`], which is the only thing the rest of the crate accepts.
//! Validation rejects any configuration whose assembled transition matrix
//! would contain an entry outside `[0, 1]`; nothing is clamped.

use std::fmt;
use std::ops::Deref;

use thiserror::Error;

use crate::kvfile::{KvError, KvFile};

/// Config file keys, in the order they are written.
pub const CONFIG_KEYS: [&str; 9] = ["D", "v", "k_on", "k_off", "c_p", "dx", "dt", "N", "r"];

/// Physical and discretization parameters of one channel scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Diffusion coefficient `D`, m²/s.
    pub diffusion: f64,
    /// Mean axial flow velocity `v`, m/s.
    pub velocity: f64,
    /// Association rate constant, M⁻¹s⁻¹.
    pub k_on: f64,
    /// Dissociation rate constant, s⁻¹.
    pub k_off: f64,
    /// Receptor-site concentration `c_p`, M.
    pub receptor_conc: f64,
    /// Spatial step Δx, m.
    pub dx: f64,
    /// Time step Δt, s.
    pub dt: f64,
    /// Number of transient states: free states `1..N-1` plus the bound state `N`.
    pub n_states: usize,
    /// 1-based index of the free state adjacent to the receiver surface.
    pub receiver: usize,
}

impl ChannelConfig {
    /// Reference channel: D = 5e-11 m²/s, c_p = 10 nM, k_on = 6e8 M⁻¹s⁻¹,
    /// k_off = 3 s⁻¹, Δt = 0.8 ms, N = 301 and Δx = 1 μm.
    ///
    /// Δx = 1 μm makes the channel 300 μm long, so Pe = vL/D is 60 at 10 μm/s
    /// and 360 at 60 μm/s, and p_diff = 0.04. The often-quoted 10 nm step gives
    /// p_diff = 400 and Pe = 0.6, which is neither a probability nor the
    /// reported flow regime.
    pub fn reference(velocity: f64, receiver: usize) -> Self {
        Self {
            diffusion: 5e-11,
            velocity,
            k_on: 6e8,
            k_off: 3.0,
            receptor_conc: 1e-8,
            dx: 1e-6,
            dt: 8e-4,
            n_states: 301,
            receiver,
        }
    }

    /// Transmitter-receiver distance `d = r·Δx`, m.
    pub fn distance(&self) -> f64 {
        self.receiver as f64 * self.dx
    }

    /// Channel length `L = (N-1)·Δx`, m.
    pub fn length(&self) -> f64 {
        (self.n_states - 1) as f64 * self.dx
    }

    /// Péclet number `v·L/D`, evaluated as `(N-1)·(v·Δx/D)`.
    ///
    /// Infinite when `D = 0` and `v > 0`; NaN when both are zero.
    pub fn peclet(&self) -> f64 {
        (self.n_states - 1) as f64 * (self.velocity * self.dx / self.diffusion)
    }

    /// Parses the flat `key = value` format with exactly the keys in [`CONFIG_KEYS`].
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let kv = KvFile::parse(text)?;
        kv.check_keys(&CONFIG_KEYS)?;
        Self::from_kv(&kv)
    }

    pub(crate) fn from_kv(kv: &KvFile) -> Result<Self, ConfigError> {
        Ok(Self {
            diffusion: kv.f64("D")?,
            velocity: kv.f64("v")?,
            k_on: kv.f64("k_on")?,
            k_off: kv.f64("k_off")?,
            receptor_conc: kv.f64("c_p")?,
            dx: kv.f64("dx")?,
            dt: kv.f64("dt")?,
            n_states: kv.usize("N")?,
            receiver: kv.usize("r")?,
        })
    }

    /// Writes the config back in the file format; parsing the result gives `self`.
    pub fn to_text(&self) -> String {
        format!(
            "D = {:e}\nv = {:e}\nk_on = {:e}\nk_off = {:e}\nc_p = {:e}\ndx = {:e}\ndt = {:e}\nN = {}\nr = {}\n",
            self.diffusion,
            self.velocity,
            self.k_on,
            self.k_off,
            self.receptor_conc,
            self.dx,
            self.dt,
            self.n_states,
            self.receiver
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] KvError),
    #[error("`{key}` must be positive, got {value:e}")]
    NonPositiveStep { key: &'static str, value: f64 },
    #[error("`{key}` must be finite and nonnegative, got {value:e}")]
    InvalidParameter { key: &'static str, value: f64 },
    #[error("`N` must be at least 4, got {0}")]
    TooFewStates(usize),
    #[error("`r` must satisfy 2 <= r <= N-2 = {max}, got {r}")]
    IndexError { r: usize, max: usize },
    #[error("unstable discretization: {quantity} = {value} is outside [0, 1]")]
    StabilityViolation { quantity: &'static str, value: f64 },
}

impl ConfigError {
    /// The config key (or derived quantity) the error is about, if any.
    pub fn offending_key(&self) -> Option<&str> {
        match self {
            ConfigError::Parse(KvError::UnknownKey { key, .. })
            | ConfigError::Parse(KvError::Duplicate { key, .. })
            | ConfigError::Parse(KvError::MissingKey { key })
            | ConfigError::Parse(KvError::BadValue { key, .. }) => Some(key),
            ConfigError::Parse(KvError::Malformed { .. }) => None,
            ConfigError::NonPositiveStep { key, .. } | ConfigError::InvalidParameter { key, .. } => {
                Some(key)
            }
            ConfigError::TooFewStates(_) => Some("N"),
            ConfigError::IndexError { .. } => Some("r"),
            ConfigError::StabilityViolation { quantity, .. } => Some(quantity),
        }
    }
}

/// A [`ChannelConfig`] whose derived transition matrix is known to be stochastic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedConfig(ChannelConfig);

impl ValidatedConfig {
    pub fn get(&self) -> &ChannelConfig {
        &self.0
    }

    pub fn into_inner(self) -> ChannelConfig {
        self.0
    }
}

#[cfg(test)]
impl ValidatedConfig {
    /// Skips validation, for assembling deliberately invalid chains in tests.
    pub(crate) fn unchecked(cfg: ChannelConfig) -> Self {
        Self(cfg)
    }
}

impl Deref for ValidatedConfig {
    type Target = ChannelConfig;

    fn deref(&self) -> &ChannelConfig {
        &self.0
    }
}

impl TryFrom<ChannelConfig> for ValidatedConfig {
    type Error = ConfigError;

    fn try_from(cfg: ChannelConfig) -> Result<Self, ConfigError> {
        validate_config(cfg)
    }
}

pub fn validate_config(cfg: ChannelConfig) -> Result<ValidatedConfig, ConfigError> {
    for (key, value) in [("dx", cfg.dx), ("dt", cfg.dt)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ConfigError::NonPositiveStep { key, value });
        }
    }
    for (key, value) in [
        ("D", cfg.diffusion),
        ("v", cfg.velocity),
        ("k_on", cfg.k_on),
        ("k_off", cfg.k_off),
        ("c_p", cfg.receptor_conc),
    ] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(ConfigError::InvalidParameter { key, value });
        }
    }
    if cfg.n_states < 4 {
        return Err(ConfigError::TooFewStates(cfg.n_states));
    }
    let max = cfg.n_states - 2;
    if cfg.receiver < 2 || cfg.receiver > max {
        return Err(ConfigError::IndexError {
            r: cfg.receiver,
            max,
        });
    }
    ElementaryProbabilities::from_rates(&cfg).check()?;
    Ok(ValidatedConfig(cfg))
}

/// The four per-step transition probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryProbabilities {
    /// Hop to one neighbouring free state by diffusion.
    pub p_diff: f64,
    /// Free state at the receiver to bound state.
    pub p_bind: f64,
    /// Bound state back to the receiver free state.
    pub p_unbind: f64,
    /// Extra downstream hop from advection.
    pub p_flow: f64,
}

impl ElementaryProbabilities {
    pub const ZERO: Self = Self {
        p_diff: 0.0,
        p_bind: 0.0,
        p_unbind: 0.0,
        p_flow: 0.0,
    };

    fn from_rates(cfg: &ChannelConfig) -> Self {
        // products are ordered so scaling dt by a power of two scales each result exactly
        Self {
            p_diff: cfg.diffusion * cfg.dt / (cfg.dx * cfg.dx),
            p_bind: cfg.k_on * cfg.receptor_conc * cfg.dt,
            p_unbind: cfg.k_off * cfg.dt,
            p_flow: cfg.velocity * cfg.dt / cfg.dx,
        }
    }

    /// Self-transition probability of a free state that is neither the receiver nor s₁.
    pub fn interior_stay(&self) -> f64 {
        1.0 - (self.p_diff + self.p_flow) - self.p_diff
    }

    /// Self-transition probability of the receiver free state.
    pub fn receiver_stay(&self) -> f64 {
        1.0 - (self.p_diff + self.p_flow) - self.p_diff - self.p_bind
    }

    /// Checks that every matrix entry built from these probabilities lies in `[0, 1]`.
    pub fn check(&self) -> Result<(), ConfigError> {
        let named = [
            ("p_diff", self.p_diff),
            ("p_bind", self.p_bind),
            ("p_unbind", self.p_unbind),
            ("p_flow", self.p_flow),
        ];
        for (quantity, value) in named {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::StabilityViolation { quantity, value });
            }
        }
        let stays = [
            ("interior self-transition 1 - 2 p_diff - p_flow", self.interior_stay()),
            (
                "receiver self-transition 1 - 2 p_diff - p_flow - p_bind",
                self.receiver_stay(),
            ),
        ];
        for (quantity, value) in stays {
            if value < 0.0 {
                return Err(ConfigError::StabilityViolation { quantity, value });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ElementaryProbabilities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p_diff = {}, p_bind = {}, p_unbind = {}, p_flow = {}",
            self.p_diff, self.p_bind, self.p_unbind, self.p_flow
        )
    }
}

pub fn elementary_probabilities(cfg: &ValidatedConfig) -> ElementaryProbabilities {
    ElementaryProbabilities::from_rates(cfg.get())
}
