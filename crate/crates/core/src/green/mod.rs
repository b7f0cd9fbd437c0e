//! Random-walk representation: exact Green's functions of the symmetric walk
//! killed on the boundary and the pinned set, path simulation, and a joint
//! field–walk estimator for non-Gaussian two-point functions.

mod joint;
mod simulate;
mod walk;

pub use joint::{hs_joint_estimate, JointConfig, JointEstimate, MAX_RELATIVE_DRIFT};
pub use simulate::{simulate_walk, WalkSimulation};
pub use walk::{
    expected_exit_times, green_column, log_divergence_profile, occupation_green, DivergencePoint,
    GreenMatrix, WalkSpec, GREEN_CG_TOLERANCE, MAX_DENSE_GREEN_SITES,
};
