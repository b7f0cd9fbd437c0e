//! Markov chain samplers for the square-well and δ-pinning measures, chain
//! management across replicas, and autocorrelation-aware error bars.

mod chain;
mod conditional;
mod moves;
mod rng;
mod stats;

pub use chain::{run_chain, Algorithm, ChainConfig, ChainResult, Probe, ProbeFn, ProbeState, Schedule};
pub use conditional::{conditional_expectations, SiteFunction};
pub use moves::{
    adaptive_gk15, auxiliary_pin_sweep, delta_site_update, metropolis_sweep, metropolis_sweep_walls,
    overrelax_sweep, DeltaUpdate, LocalModel,
};
pub use rng::{sweep_rng, SweepRng};
pub use stats::{
    autocorrelation, autocorrelation_function, lenient_estimate, merge_replicas, Estimate, SOKAL_WINDOW,
};
