//! Exact partition functions, moments and pinned-set laws on small lattices:
//! tensor-product quadrature, Gaussian determinants, δ-pinning enumeration
//! and chain transfer operators.

mod delta;
mod gaussian;
mod pinned_set;
mod quadrature;
mod result;
mod transfer;

pub use delta::{
    enumerate_delta_pinning, normal_abs, normal_exceeds, DeltaQuery, MAX_GAUSSIAN_ENUMERATION_SITES,
    MAX_GENERAL_ENUMERATION_SITES,
};
pub use gaussian::{
    gaussian_covariance, gaussian_covariance_column, gaussian_precision, GaussianCovariance,
    GaussianPrecision,
};
pub use pinned_set::PinnedSet;
pub use quadrature::{
    gauss_legendre, pinned_set_measure, quadrature_moment, quadrature_partition, ExactMeasure,
    Observable, QuadratureRule, QuadratureScheme, SiteConstraint, EDGE_MASS_LIMIT,
    MAX_QUADRATURE_SITES,
};
pub use result::{ExactResult, ExactValue, NamedValue, OracleRecord, PinnedSetProbability};
pub use transfer::transfer_chain;
