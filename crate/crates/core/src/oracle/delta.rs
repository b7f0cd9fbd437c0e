//! Exact enumeration of the δ-pinning measure over all pinned sets.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::gaussian::gaussian_covariance;
use super::pinned_set::PinnedSet;
use super::quadrature::{ExactMeasure, Observable, QuadratureScheme, SiteConstraint};
use super::result::{ExactResult, ExactValue, NamedValue, PinnedSetProbability};
use crate::error::{Error, Result};
use crate::model::{InteractionSpec, Lattice};

pub const MAX_GAUSSIAN_ENUMERATION_SITES: usize = 12;
pub const MAX_GENERAL_ENUMERATION_SITES: usize = 4;

/// What to compute alongside the pinned-set law.
#[derive(Clone, Debug, Default)]
pub struct DeltaQuery {
    pub observables: Vec<Observable>,
    /// Sets `B` for which `Prob[A ∩ B = ∅]` is reported.
    pub avoid: Vec<PinnedSet>,
}

struct SetTerm {
    log_weight: f64,
    log_z_err: f64,
    moments: Vec<ExactValue>,
}

/// Sums `e^{J|A|} Z⁰_{A^c}` over every subset `A` of the interior.
///
/// Gaussian interactions use log-determinants (up to 12 sites); other
/// interactions integrate the free sites by quadrature with pinned sites held
/// at zero (up to 4 sites).
pub fn enumerate_delta_pinning(
    lattice: &Lattice,
    spec: &InteractionSpec,
    log_weight: f64,
    query: &DeltaQuery,
    scheme: QuadratureScheme,
) -> Result<ExactResult> {
    let n = lattice.len();
    let limit = if spec.is_gaussian() {
        MAX_GAUSSIAN_ENUMERATION_SITES
    } else {
        MAX_GENERAL_ENUMERATION_SITES
    };
    if n > limit {
        return Err(Error::TooLarge {
            what: "interior sites for δ enumeration",
            size: n,
            limit,
        });
    }
    if log_weight.is_nan() || log_weight == f64::INFINITY {
        return Err(Error::param("J", format!("must be real or -inf, got {log_weight}")));
    }
    for b in &query.avoid {
        if b.n_sites() != n {
            return Err(Error::param("B", "avoid set does not match the lattice"));
        }
    }

    let terms: Vec<SetTerm> = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| {
            let a = PinnedSet::from_mask(n, mask);
            let k = a.len();
            let atom = if k == 0 { 0.0 } else { log_weight * k as f64 };
            if spec.is_gaussian() {
                gaussian_term(lattice, spec, &a, &query.observables, atom)
            } else {
                quadrature_term(lattice, spec, &a, &query.observables, atom, scheme)
            }
        })
        .collect::<Result<_>>()?;

    let max_lw = terms
        .iter()
        .map(|t| t.log_weight)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = terms.iter().map(|t| (t.log_weight - max_lw).exp()).collect();
    let total: f64 = weights.iter().sum();
    let log_z = max_lw + total.ln();
    let law: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let z_err: f64 = terms
        .iter()
        .zip(&weights)
        .map(|(t, w)| w * t.log_z_err)
        .sum::<f64>()
        / total;

    let moments = query
        .observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let mut v = 0.0;
            let mut err = 0.0;
            for (t, p) in terms.iter().zip(&law) {
                v += p * t.moments[k].value;
                err += p * (t.moments[k].error_estimate + t.moments[k].value.abs() * t.log_z_err);
            }
            NamedValue {
                name: o.label(),
                value: ExactValue {
                    value: v,
                    error_estimate: err,
                },
            }
        })
        .collect();

    let avoidance = query
        .avoid
        .iter()
        .map(|b| {
            let mut p = 0.0;
            let mut err = 0.0;
            for (mask, (q, t)) in law.iter().zip(&terms).enumerate() {
                if PinnedSet::from_mask(n, mask as u64).is_disjoint(b) {
                    p += q;
                    err += q * t.log_z_err;
                }
            }
            NamedValue {
                name: format!("P(A∩B=∅), B={:?}", b.iter().collect::<Vec<_>>()),
                value: ExactValue {
                    value: p,
                    error_estimate: err,
                },
            }
        })
        .collect();

    let z = log_z.exp();
    Ok(ExactResult {
        method: if spec.is_gaussian() {
            "delta-enumeration-determinant".into()
        } else {
            "delta-enumeration-quadrature".into()
        },
        params: serde_json::json!({
            "sites": n,
            "J": log_weight,
            "boundary_value": lattice.boundary_value(),
            "interaction": spec.kind_name(),
        }),
        partition: ExactValue {
            value: z,
            error_estimate: z * z_err,
        },
        log_partition: log_z,
        moments,
        pinned_law: Some(
            law.iter()
                .enumerate()
                .map(|(mask, &p)| PinnedSetProbability {
                    set: PinnedSet::from_mask(n, mask as u64),
                    probability: p,
                })
                .collect(),
        ),
        avoidance,
    })
}

fn gaussian_term(
    lattice: &Lattice,
    spec: &InteractionSpec,
    a: &PinnedSet,
    observables: &[Observable],
    atom: f64,
) -> Result<SetTerm> {
    let cov = gaussian_covariance(lattice, spec, a)?;
    let moments = observables
        .iter()
        .map(|o| {
            let v = match *o {
                Observable::Mean(i) => cov.mean_of(i),
                Observable::Product(i, j) => cov.second_moment(i, j),
                Observable::Abs(i) => normal_abs(cov.mean_of(i), cov.cov(i, i)),
                Observable::Exceeds(i, t) => normal_exceeds(cov.mean_of(i), cov.cov(i, i), t),
                Observable::Within(i, w) => {
                    let (m, v) = (cov.mean_of(i), cov.cov(i, i));
                    1.0 - normal_exceeds(m, v, w) - normal_exceeds(-m, v, w)
                }
                Observable::Custom { .. } => {
                    return Err(Error::WrongVariant {
                        expected: "closed-form gaussian observable",
                        found: "custom",
                    })
                }
            };
            Ok(ExactValue::exact(v))
        })
        .collect::<Result<_>>()?;
    Ok(SetTerm {
        log_weight: atom + cov.log_partition,
        log_z_err: 0.0,
        moments,
    })
}

fn quadrature_term(
    lattice: &Lattice,
    spec: &InteractionSpec,
    a: &PinnedSet,
    observables: &[Observable],
    atom: f64,
    scheme: QuadratureScheme,
) -> Result<SetTerm> {
    let r = ExactMeasure::new(lattice, spec, scheme)?
        .constrain_set(a, SiteConstraint::Fixed(0.0))
        .evaluate(observables)?;
    Ok(SetTerm {
        log_weight: atom + r.log_partition,
        log_z_err: r.partition.error_estimate / r.partition.value,
        moments: r.moments.iter().map(|m| m.value).collect(),
    })
}

/// `E|X|` for `X ~ N(m, v)`; `|m|` when `v = 0`.
pub fn normal_abs(m: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return m.abs();
    }
    let s = v.sqrt();
    s * (2.0 / std::f64::consts::PI).sqrt() * (-m * m / (2.0 * v)).exp()
        + m * (1.0 - erfc(m / (s * std::f64::consts::SQRT_2)))
}

/// `P(X > t)` for `X ~ N(m, v)`; a step when `v = 0`.
pub fn normal_exceeds(m: f64, v: f64, t: f64) -> f64 {
    if v <= 0.0 {
        return f64::from(u8::from(m > t));
    }
    0.5 * erfc((t - m) / (2.0 * v).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, CustomPotential, InteractionKind};
    use std::f64::consts::PI;

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    #[test]
    fn single_site_closed_form() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let s = (PI / 2.0).sqrt();
        let q = DeltaQuery {
            observables: vec![Observable::second_moment(0)],
            avoid: vec![PinnedSet::from_indices(1, &[0])],
        };
        let r = enumerate_delta_pinning(&lat, &unit(), 0.0, &q, QuadratureScheme::default()).unwrap();
        let pinned = r.law_of(&PinnedSet::from_indices(1, &[0])).unwrap();
        assert!((pinned - 1.0 / (1.0 + s)).abs() < 1e-14);
        assert!((r.moment_at(0).value - 0.25 * s / (1.0 + s)).abs() < 1e-14);
        assert!((r.avoidance_at(0).value - s / (1.0 + s)).abs() < 1e-14);
        assert!(r.avoidance_at(0).value >= 0.5);
    }

    #[test]
    fn vanishing_atom_is_free() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let q = DeltaQuery {
            observables: vec![Observable::second_moment(0)],
            avoid: vec![],
        };
        let r = enumerate_delta_pinning(&lat, &unit(), f64::NEG_INFINITY, &q, QuadratureScheme::default()).unwrap();
        assert!((r.moment_at(0).value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quadrature_path_agrees_with_determinant() {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        let q = DeltaQuery {
            observables: vec![Observable::second_moment(1), Observable::Within(0, 0.3)],
            avoid: vec![PinnedSet::from_indices(3, &[0, 2])],
        };
        let det = enumerate_delta_pinning(&lat, &unit(), 0.4, &q, QuadratureScheme::default()).unwrap();
        // a custom interaction equal to the gaussian forces the quadrature path
        let custom = make_interaction(InteractionKind::Custom {
            terms: crate::model::Offset::nearest_neighbors()
                .into_iter()
                .map(|k| (k, CustomPotential::new(|x| 0.5 * x * x, |x| x, |_| 1.0)))
                .collect(),
            floor: 1.0,
            ceiling: Some(1.0),
        })
        .unwrap();
        assert!(!custom.is_gaussian());
        let quad = enumerate_delta_pinning(&lat, &custom, 0.4, &q, QuadratureScheme::default()).unwrap();
        assert!(
            (det.log_partition - quad.log_partition).abs()
                <= quad.partition.error_estimate / quad.partition.value,
            "{} vs {}",
            det.log_partition,
            quad.log_partition
        );
        for k in 0..2 {
            let (a, b) = (det.moment_at(k), quad.moment_at(k));
            assert!((a.value - b.value).abs() < 1e-5 + b.error_estimate, "{k}: {a:?} {b:?}");
        }
        assert!((det.avoidance_at(0).value - quad.avoidance_at(0).value).abs() < 1e-6);
    }

    #[test]
    fn size_limits() {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let r = enumerate_delta_pinning(&lat, &unit(), 0.0, &DeltaQuery::default(), QuadratureScheme::default());
        assert!(matches!(r, Err(Error::TooLarge { .. })));
    }

    #[test]
    fn normal_helpers() {
        assert!((normal_abs(0.0, 1.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert!((normal_exceeds(0.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((normal_abs(3.0, 0.0) - 3.0).abs() < 1e-15);
    }
}
