//! Bouncer-walker model of a quantum "particle".
//!
//! A driven, damped oscillator (the *bouncer*) and a Langevin random walker
//! (the *walker*) both exchange energy with a stochastic zero-point-field
//! bath. Matching their energy throughput fixes the coupling at
//! `γ = ζ = 2ω₀`, from which the action `ħ = m r² ω₀`, the total energy
//! `ħω₀` and the diffusion constant `D = ħ/2m` follow. The [`ensemble`]
//! module carries the picture over to a Gaussian beam of such particles and
//! its ballistic spreading.
//!
//! Every relation is checked numerically against closed forms by
//! [`verify::run_all`], which produces a JSON [`verify::Report`].

// Negated float comparisons reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bouncer;
pub mod cli;
pub mod constants;
pub mod ensemble;
pub mod output;
pub mod rng;
pub mod stats;
pub mod verify;
pub mod walker;

pub use constants::{
    canonical_params, derive_constants, validate_params, DerivedConstants, ParamError, ParamInput,
    PhysicalParams,
};
pub use stats::EstimateWithError;
