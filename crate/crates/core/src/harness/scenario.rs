//! Scenario and sweep files.
//!
//! Both use the channel config format plus run keys:
//!
//! ```text
//! # Péclet 60, receiver 100 μm downstream
//! name = pulse_v10_d100
//! D = 5e-11
//! v_um_s = 10          # or: v = 1e-5
//! k_on = 6e8
//! k_off = 3
//! c_p = 1e-8
//! dx_um = 1            # or: dx = 1e-6
//! dt = 8e-4
//! N = 301
//! r = 100
//! mode = pulse         # pulse | continuous
//! u0 = 1e5
//! K = 100000
//! seed = 7             # particle runs only
//! particles = 1e5      # particle runs only
//! ```
//!
//! A sweep file adds `axis` (one of `v`, `v_um_s`, `r`, `N`, `k_on`, `k_off`,
//! `u0`) and `values`, a comma-separated list.

use std::fmt;
use std::path::Path;

use crate::config::{validate_config, ChannelConfig, ValidatedConfig, CONFIG_KEYS};
use crate::kvfile::{KvError, KvFile};

use super::HarnessError;

const RUN_KEYS: [&str; 8] = ["name", "mode", "u0", "K", "seed", "particles", "v_um_s", "dx_um"];
const SWEEP_KEYS: [&str; 2] = ["axis", "values"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Pulse,
    Continuous,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pulse => "pulse",
            Mode::Continuous => "continuous",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub cfg: ValidatedConfig,
    pub mode: Mode,
    /// Pulse size, or release per step in continuous mode.
    pub u0: f64,
    pub steps: usize,
    pub seed: u64,
    pub particles: Option<u64>,
}

impl Scenario {
    pub fn parse(text: &str, default_name: &str) -> Result<Self, HarnessError> {
        let kv = KvFile::parse(text)?;
        check_keys(&kv, false)?;
        let raw = RawScenario::from_kv(&kv, default_name)?;
        raw.validate()
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = super::read_file(path)?;
        Self::parse(&text, &stem(path))
    }
}

/// A scenario before its channel config is validated.
#[derive(Debug, Clone, PartialEq)]
struct RawScenario {
    name: String,
    cfg: ChannelConfig,
    mode: Mode,
    u0: f64,
    steps: usize,
    seed: u64,
    particles: Option<u64>,
}

impl RawScenario {
    fn from_kv(kv: &KvFile, default_name: &str) -> Result<Self, HarnessError> {
        let name = kv.raw("name").unwrap_or(default_name).to_string();
        if name.is_empty() {
            return Err(HarnessError::Invalid("scenario name is empty".into()));
        }
        let mode = match kv.raw("mode") {
            Some("pulse") => Mode::Pulse,
            Some("continuous") => Mode::Continuous,
            Some(other) => {
                return Err(KvError::BadValue {
                    key: "mode".into(),
                    value: other.into(),
                    expected: "`pulse` or `continuous`",
                }
                .into())
            }
            None => return Err(KvError::MissingKey { key: "mode".into() }.into()),
        };
        let u0 = kv.f64("u0")?;
        if !(u0 >= 0.0 && u0.is_finite()) {
            return Err(HarnessError::Invalid(format!(
                "`u0` must be finite and nonnegative, got {u0}"
            )));
        }
        let cfg = ChannelConfig {
            diffusion: kv.f64("D")?,
            velocity: si_or_micro(kv, "v", "v_um_s")?,
            k_on: kv.f64("k_on")?,
            k_off: kv.f64("k_off")?,
            receptor_conc: kv.f64("c_p")?,
            dx: si_or_micro(kv, "dx", "dx_um")?,
            dt: kv.f64("dt")?,
            n_states: kv.usize("N")?,
            receiver: kv.usize("r")?,
        };
        Ok(Self {
            name,
            cfg,
            mode,
            u0,
            steps: kv.usize("K")?,
            seed: kv.opt_u64("seed")?.unwrap_or(0),
            particles: kv.opt_u64("particles")?,
        })
    }

    fn validate(self) -> Result<Scenario, HarnessError> {
        Ok(Scenario {
            name: self.name,
            cfg: validate_config(self.cfg)?,
            mode: self.mode,
            u0: self.u0,
            steps: self.steps,
            seed: self.seed,
            particles: self.particles,
        })
    }
}

/// Reads `si_key` in SI units or `micro_key` in micro-units, but not both.
fn si_or_micro(kv: &KvFile, si_key: &str, micro_key: &str) -> Result<f64, HarnessError> {
    match (kv.opt_f64(si_key)?, kv.opt_f64(micro_key)?) {
        (Some(_), Some(_)) => Err(HarnessError::Invalid(format!(
            "`{si_key}` and `{micro_key}` both given; use one"
        ))),
        (Some(v), None) => Ok(v),
        // dividing by the exact 1e6 rounds to the same double as the SI literal
        (None, Some(v)) => Ok(v / 1e6),
        (None, None) => Err(KvError::MissingKey {
            key: si_key.into(),
        }
        .into()),
    }
}

fn check_keys(kv: &KvFile, sweep: bool) -> Result<(), HarnessError> {
    let mut allowed: Vec<&str> = CONFIG_KEYS.iter().chain(&RUN_KEYS).copied().collect();
    if sweep {
        allowed.extend(SWEEP_KEYS);
    }
    kv.check_keys(&allowed)?;
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Velocity,
    VelocityMicro,
    Receiver,
    States,
    KOn,
    KOff,
    U0,
}

impl SweepAxis {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "v" => Self::Velocity,
            "v_um_s" => Self::VelocityMicro,
            "r" => Self::Receiver,
            "N" => Self::States,
            "k_on" => Self::KOn,
            "k_off" => Self::KOff,
            "u0" => Self::U0,
            _ => return None,
        })
    }

    pub fn key(&self) -> &'static str {
        match self {
            Self::Velocity => "v",
            Self::VelocityMicro => "v_um_s",
            Self::Receiver => "r",
            Self::States => "N",
            Self::KOn => "k_on",
            Self::KOff => "k_off",
            Self::U0 => "u0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base_name: String,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// One validated scenario per value, in input order.
    pub points: Vec<Scenario>,
}

impl SweepSpec {
    /// Parses and validates every point; any invalid point fails the whole sweep.
    pub fn parse(text: &str, default_name: &str) -> Result<Self, HarnessError> {
        let kv = KvFile::parse(text)?;
        check_keys(&kv, true)?;
        let axis_raw = kv.raw("axis").ok_or_else(|| KvError::MissingKey {
            key: "axis".into(),
        })?;
        let axis = SweepAxis::parse(axis_raw).ok_or_else(|| KvError::BadValue {
            key: "axis".into(),
            value: axis_raw.into(),
            expected: "one of v, v_um_s, r, N, k_on, k_off, u0",
        })?;
        let values_raw = kv.raw("values").ok_or_else(|| KvError::MissingKey {
            key: "values".into(),
        })?;
        let values = values_raw
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| KvError::BadValue {
                    key: "values".into(),
                    value: s.trim().into(),
                    expected: "a comma-separated list of numbers",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(HarnessError::Invalid("sweep has no values".into()));
        }

        let base = RawScenario::from_kv(&kv, default_name)?;
        let points = values
            .iter()
            .enumerate()
            .map(|(idx, &value)| {
                let mut point = apply(&base, axis, value).map_err(|e| {
                    HarnessError::Invalid(format!("sweep point {idx} ({} = {value}): {e}", axis.key()))
                })?;
                point.name = format!("{}_{idx:03}", base.name);
                point.validate().map_err(|e| match e {
                    HarnessError::Config(c) => HarnessError::SweepPoint {
                        index: idx,
                        value,
                        source: c,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            base_name: base.name,
            axis,
            values,
            points,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = super::read_file(path)?;
        Self::parse(&text, &stem(path))
    }
}

fn apply(base: &RawScenario, axis: SweepAxis, value: f64) -> Result<RawScenario, String> {
    let integral = |v: f64| -> Result<usize, String> {
        if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(format!("{v} is not a nonnegative integer"))
        }
    };
    let mut p = base.clone();
    match axis {
        SweepAxis::Velocity => p.cfg.velocity = value,
        SweepAxis::VelocityMicro => p.cfg.velocity = value / 1e6,
        SweepAxis::Receiver => p.cfg.receiver = integral(value)?,
        SweepAxis::States => p.cfg.n_states = integral(value)?,
        SweepAxis::KOn => p.cfg.k_on = value,
        SweepAxis::KOff => p.cfg.k_off = value,
        SweepAxis::U0 => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(format!("u0 = {value} must be finite and nonnegative"));
            }
            p.u0 = value
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigError;

    const BASE: &str = "D = 5e-11\nk_on = 6e8\nk_off = 3\nc_p = 1e-8\ndt = 8e-4\nN = 301\nr = 100\nmode = pulse\nu0 = 1e5\nK = 1000\n";

    #[test]
    fn micro_unit_aliases() {
        let sc = Scenario::parse(&format!("{BASE}v_um_s = 10\ndx_um = 1\n"), "x").unwrap();
        assert_eq!(sc.cfg.velocity, 10e-6);
        assert_eq!(sc.cfg.dx, 1e-6);
        assert_eq!(sc.name, "x");
        assert_eq!(sc.mode, Mode::Pulse);
        assert_eq!(sc.seed, 0);
        assert_eq!(sc.particles, None);

        let si = Scenario::parse(&format!("{BASE}v = 1e-5\ndx = 1e-6\n"), "x").unwrap();
        assert_eq!(si.cfg, sc.cfg);

        let both = Scenario::parse(&format!("{BASE}v = 1e-5\nv_um_s = 10\ndx = 1e-6\n"), "x");
        assert!(matches!(both, Err(HarnessError::Invalid(_))));
    }

    #[test]
    fn errors_name_the_key() {
        let err = Scenario::parse(&format!("{BASE}v = 1e-5\ndx = 1e-8\n"), "x").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("p_diff"), "{err}");

        let err = Scenario::parse(&format!("{BASE}v = 1e-5\ndx = 1e-6\nspeed = 3\n"), "x").unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");

        let text = format!("{BASE}v = 1e-5\ndx = 1e-6\n").replace("mode = pulse", "mode = burst");
        let err = Scenario::parse(&text, "x").unwrap_err();
        assert!(err.to_string().contains("mode"), "{err}");
    }

    #[test]
    fn sweep_points_follow_input_order() {
        let text = format!("{BASE}dx = 1e-6\nv = 1e-5\naxis = v_um_s\nvalues = 60, 10\n");
        let sweep = SweepSpec::parse(&text, "pe").unwrap();
        assert_eq!(sweep.points.len(), 2);
        assert_eq!(sweep.points[0].cfg.velocity, 60e-6);
        assert_eq!(sweep.points[1].cfg.velocity, 10e-6);
        assert_eq!(sweep.points[1].name, "pe_001");
    }

    #[test]
    fn one_bad_point_fails_the_sweep() {
        let text = format!("{BASE}dx = 1e-6\nv = 1e-5\naxis = r\nvalues = 100, 300\n");
        match SweepSpec::parse(&text, "s") {
            Err(HarnessError::SweepPoint { index: 1, source: ConfigError::IndexError { .. }, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = format!("{BASE}dx = 1e-6\nv = 1e-5\naxis = r\nvalues = 100.5\n");
        assert!(matches!(SweepSpec::parse(&text, "s"), Err(HarnessError::Invalid(_))));
        let text = format!("{BASE}dx = 1e-6\nv = 1e-5\naxis = D\nvalues = 1\n");
        assert_eq!(SweepSpec::parse(&text, "s").unwrap_err().exit_code(), 2);
    }
}
