//! Experiment drivers and fits: each driver runs chains or oracles, fits the
//! surrogate law and returns a [`Report`] of checks with three-valued verdicts.

mod avoidance;
mod estimators;
mod fit;
mod green_profile;
mod lemmas;
mod localization;
mod oracle_grid;
mod report;
mod sgap;
mod tail;
mod twopoint;

pub use avoidance::{
    avoid_set, avoidance_lower_bound, avoidance_probability, exact_avoidance, AvoidPoint, AvoidanceStudy,
    ExactAvoidance, Shape, MAX_FIT_SEGMENT,
};
pub use estimators::{
    conditional_probe, conditional_product_probe, pinned_bilinears, pinned_gaussian_probe, translated_pairs,
    translated_product_probe, Bilinear, PROBE_CG_TOLERANCE,
};
pub use fit::{fit_decay, DecayFit, DecayModel, FitParameter};
pub use green_profile::{
    exit_spread, exit_time_profile, gaussian_identity, green_profile, standard_identity_checks, ExitPoint,
    GreenProfile, IdentityCheck, IDENTITY_TOLERANCE, MAX_EXIT_SPREAD, MIN_LOG_R_SQUARED,
};
pub use lemmas::{lemma_suite, standard_instances, LemmaCheck, LemmaGrid, LemmaInstance, LemmaSuite, LEMMA_SLACK};
pub use localization::{mean_square_vs_l, LadderPoint, LocalizationStudy};
pub use oracle_grid::{
    cross_variant, exact_moments, oracle_report, oracle_validate, standard_grid, Comparison, CrossVariant,
    GridInstance, InstanceResult, AGREEMENT_SIGMAS, CROSS_VARIANT_RTOL, MAX_GRID_FAILURES,
};
pub use report::{Cell, Check, Report, Table, Verdict};
pub use sgap::{linear_variance_ratio, standard_profiles, Profile, ProfileRatio, SgapLevel, SgapStudy};
pub use tail::{synthetic_tail_recovery, tail_curve, tail_threshold, TailPoint, TailStudy, MIN_TAIL_PROBABILITY};
pub use twopoint::{mass_separation, two_point_decay, two_point_decay_averaged, DistancePoint, TwoPointStudy};
