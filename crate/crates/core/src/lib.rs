//! Discrete-time Markov model of a microfluidic molecular-communication channel.
//!
//! A one-dimensional channel is cut into free states `s₁ … s_{N-1}`, a bound
//! state `s_N` at the receiver surface and an absorbing flow-out state.
//! Molecules released at `s₁` diffuse between neighbours, drift downstream,
//! bind and unbind at the receiver state `s_r`, and leave through the outlet.
//!
//! - [`config`]: channel parameters, validation, elementary probabilities
//! - [`kernel`]: the transient transition matrix `Q` and the vectors ψ, b, h
//! - [`state_space`]: propagation, impulse/pulse/step responses, equilibrium gain
//! - [`pbs`]: particle-based Monte Carlo of the same chain
//! - [`harness`]: scenario files, CSV output and the `mfmc` command line
//!
//! ```
//! use mfmc::config::{validate_config, ChannelConfig};
//! use mfmc::kernel::TransitionModel;
//! use mfmc::state_space::{cir, equilibrium_gain};
//!
//! let cfg = validate_config(ChannelConfig::reference(60e-6, 100)).unwrap();
//! let model = TransitionModel::from_config(&cfg);
//! let g = cir(&model, 20_000);
//! let gain = equilibrium_gain(&model, 1e-12).unwrap();
//! assert!(g.g.iter().sum::<f64>() <= gain * (1.0 + 1e-10));
//! ```

pub mod config;
pub mod harness;
pub mod kernel;
pub mod kvfile;
pub mod pbs;
pub mod sparse;
pub mod state_space;
pub mod text;

pub use config::{
    elementary_probabilities, validate_config, ChannelConfig, ConfigError,
    ElementaryProbabilities, ValidatedConfig,
};
pub use kernel::{
    build_transition_model, power_iteration, spectral_radius_estimate, KernelError, PowerIteration,
    TransitionModel,
};
pub use pbs::{compare_to_model, run_pbs, ComparisonReport, PbsConfig, PbsError, PbsResult};
pub use state_space::{
    cir, continuous_response, equilibrium_gain, propagate, pulse_response, Cir, StateSpaceError,
    Trajectory,
};
