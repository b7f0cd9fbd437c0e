use serde::{Deserialize, Serialize};

use super::fit::{fit_decay, DecayFit, DecayModel};
use super::report::{Check, Report, Table, Verdict};
use crate::error::{Error, Result};
use crate::model::{build_lattice, InteractionSpec, Lattice, PinningSpec, Site};
use crate::oracle::{
    enumerate_delta_pinning, pinned_set_measure, DeltaQuery, Observable, PinnedSet, QuadratureScheme,
};
use crate::sampler::{run_chain, ChainConfig, Estimate, Probe, Schedule};

/// Largest segment entering the fit of `exp(−K|B|)`.
pub const MAX_FIT_SEGMENT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Segment,
    Box,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Segment => "segment",
            Shape::Box => "box",
        }
    }
}

/// `k` sites of a centred horizontal segment or of a `⌈√k⌉`-box filled in
/// row-major order; both are nearest-neighbour connected.
pub fn avoid_set(lattice: &Lattice, shape: Shape, k: usize) -> Result<PinnedSet> {
    let Site(cx, cy) = lattice.site(lattice.center());
    let x0 = cx - (k as i32) / 2;
    let side = (k as f64).sqrt().ceil() as i32;
    let mut idx = Vec::with_capacity(k);
    for n in 0..k as i32 {
        let s = match shape {
            Shape::Segment => Site(x0 + n, cy),
            Shape::Box => Site(cx - side / 2 + n % side, cy - side / 2 + n / side),
        };
        idx.push(
            lattice
                .index_of(s)
                .ok_or_else(|| Error::param("B", format!("{} of size {k} leaves the lattice", shape.name())))?,
        );
    }
    Ok(PinnedSet::from_indices(lattice.len(), &idx))
}

/// Lower bound on `Prob[A ∩ B = ∅]`: `e^{−ε|B|}` for the square well and
/// `(1 + e^J)^{−|B|}` for δ-pinning.
pub fn avoidance_lower_bound(pinning: &PinningSpec, size: usize) -> Result<f64> {
    let per_site = match *pinning {
        PinningSpec::SquareWell { strength, .. } => -strength,
        PinningSpec::Delta { log_weight } => -log_weight.exp().ln_1p(),
        PinningSpec::Free => return Err(Error::param("pinning", "avoidance needs a pinning potential")),
    };
    Ok((per_site * size as f64).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidPoint {
    pub shape: Shape,
    pub size: usize,
    pub estimate: Estimate,
    pub lower_bound: f64,
    /// No sample reached a pinned-free `B`; the estimate is an upper bound.
    pub censored: bool,
}

impl AvoidPoint {
    pub fn bound_holds(&self) -> bool {
        self.estimate.mean + 2.0 * self.estimate.std_error >= self.lower_bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceStudy {
    pub pinning: PinningSpec,
    pub l: i32,
    pub points: Vec<AvoidPoint>,
    /// `exp(−K|B|)` over the resolved segments with `|B| ≤ 12`.
    pub fit: Option<DecayFit>,
}

/// `Prob[A ∩ B = ∅]` on `Λ_L` with zero boundary for segments and boxes of
/// every size in `sizes`. Each sample contributes the conditional avoidance
/// probability given its state.
pub fn avoidance_probability(
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    l: i32,
    sizes: &[usize],
    schedule: &Schedule,
) -> Result<AvoidanceStudy> {
    avoidance_lower_bound(pinning, 0)?;
    let lattice = build_lattice(l, spec.range(), 0.0)?;
    let mut keys = Vec::new();
    let mut probes = Vec::new();
    for shape in [Shape::Segment, Shape::Box] {
        for &k in sizes {
            probes.push(Probe::Avoids(avoid_set(&lattice, shape, k)?));
            keys.push((shape, k));
        }
    }
    let r = run_chain(&ChainConfig::new(lattice, spec.clone(), *pinning, schedule.clone()), &probes)?;
    let points = keys
        .iter()
        .zip(&r.estimates)
        .map(|(&(shape, size), &estimate)| {
            Ok(AvoidPoint {
                shape,
                size,
                estimate,
                lower_bound: avoidance_lower_bound(pinning, size)?,
                censored: estimate.mean <= 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<&AvoidPoint> = points
        .iter()
        .filter(|p| {
            p.shape == Shape::Segment
                && (1..=MAX_FIT_SEGMENT).contains(&p.size)
                && p.estimate.mean > 2.0 * p.estimate.std_error
        })
        .collect();
    let fit = (used.len() >= 4)
        .then(|| {
            let xs: Vec<f64> = used.iter().map(|p| p.size as f64).collect();
            let ys: Vec<f64> = used.iter().map(|p| p.estimate.mean).collect();
            let ses: Vec<f64> = used.iter().map(|p| p.estimate.std_error).collect();
            let weighted = ses.iter().all(|&s| s > 0.0);
            fit_decay(&xs, &ys, weighted.then_some(ses.as_slice()), DecayModel::PureExponential)
        })
        .transpose()?;
    Ok(AvoidanceStudy {
        pinning: *pinning,
        l,
        points,
        fit,
    })
}

/// One oracle-exact avoidance probability against its lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactAvoidance {
    pub lattice: String,
    pub spec: String,
    pub pinning: PinningSpec,
    pub set: Vec<usize>,
    pub value: f64,
    pub error_estimate: f64,
    pub lower_bound: f64,
}

impl ExactAvoidance {
    pub fn bound_holds(&self) -> bool {
        self.value + self.error_estimate + 1e-12 >= self.lower_bound
    }
}

/// Every nonempty subset of the interior, as avoid sets.
fn all_subsets(n: usize) -> Vec<PinnedSet> {
    (1u64..1 << n).map(|m| PinnedSet::from_mask(n, m)).collect()
}

/// `Prob[A ∩ B = ∅]` for every nonempty `B ⊆ Λ` from the δ enumeration, or
/// for the square well as `E^V[∏_{j∈B} (1 − (1 − e^{−ε})·1{|h_j| ≤ a})]`.
pub fn exact_avoidance(
    lattice: &Lattice,
    label: &str,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    scheme: QuadratureScheme,
) -> Result<Vec<ExactAvoidance>> {
    let sets = all_subsets(lattice.len());
    let values: Vec<(f64, f64)> = match *pinning {
        PinningSpec::Delta { log_weight } => {
            let q = DeltaQuery {
                observables: vec![],
                avoid: sets.clone(),
            };
            let r = enumerate_delta_pinning(lattice, spec, log_weight, &q, scheme)?;
            (0..sets.len())
                .map(|k| (r.avoidance_at(k).value, r.avoidance_at(k).error_estimate))
                .collect()
        }
        PinningSpec::SquareWell {
            strength,
            half_width,
        } => {
            let p = -(-strength).exp_m1();
            let obs: Vec<Observable> = sets
                .iter()
                .map(|b| {
                    let members: Vec<usize> = b.iter().collect();
                    Observable::custom(format!("avoid{members:?}"), move |h: &[f64]| {
                        members
                            .iter()
                            .map(|&j| if h[j].abs() <= half_width { 1.0 - p } else { 1.0 })
                            .product()
                    })
                })
                .collect();
            let m = pinned_set_measure(lattice, spec, pinning, &PinnedSet::empty(lattice.len()), scheme)?;
            let r = m.evaluate(&obs)?;
            (0..sets.len())
                .map(|k| (r.moment_at(k).value, r.moment_at(k).error_estimate))
                .collect()
        }
        PinningSpec::Free => return Err(Error::param("pinning", "avoidance needs a pinning potential")),
    };
    sets.iter()
        .zip(values)
        .map(|(b, (value, error_estimate))| {
            Ok(ExactAvoidance {
                lattice: label.to_string(),
                spec: spec.kind_name().to_string(),
                pinning: *pinning,
                set: b.iter().collect(),
                value,
                error_estimate,
                lower_bound: avoidance_lower_bound(pinning, b.len())?,
            })
        })
        .collect()
}

impl AvoidanceStudy {
    pub fn bound_verdict(&self) -> Verdict {
        Verdict::from_bool(self.points.iter().all(AvoidPoint::bound_holds))
    }

    pub fn decay_verdict(&self) -> Verdict {
        match &self.fit {
            Some(f) => Verdict::from_bool(f.rate().value > 0.0 && f.rate().ci_excludes_zero()),
            None => Verdict::Underpowered,
        }
    }

    pub fn report(&self, exact: &[ExactAvoidance]) -> Report {
        let mut table = Table::new(&["source", "shape", "size", "probability", "std_error", "lower_bound", "censored"]);
        for p in &self.points {
            table.push(vec![
                "sampled".into(),
                p.shape.name().into(),
                p.size.into(),
                p.estimate.mean.into(),
                p.estimate.std_error.into(),
                p.lower_bound.into(),
                usize::from(p.censored).into(),
            ]);
        }
        for e in exact {
            table.push(vec![
                format!("exact:{}:{}", e.lattice, e.spec).into(),
                format!("{:?}", e.set).into(),
                e.set.len().into(),
                e.value.into(),
                e.error_estimate.into(),
                e.lower_bound.into(),
                0usize.into(),
            ]);
        }
        let violations = self.points.iter().filter(|p| !p.bound_holds()).count();
        let exact_violations = exact.iter().filter(|e| !e.bound_holds()).count();
        let mut checks = vec![
            Check::new(
                "sampled probabilities above the lower bound within 2 SE",
                self.bound_verdict(),
                format!("{violations} of {} below", self.points.len()),
            ),
            Check::new(
                "segment decay rate K > 0 with CI excluding 0",
                self.decay_verdict(),
                self.fit.as_ref().map_or("fewer than 4 resolved segments".into(), |f| {
                    format!("K = {:.4} CI [{:.4}, {:.4}]", f.rate().value, f.rate().ci[0], f.rate().ci[1])
                }),
            ),
        ];
        if !exact.is_empty() {
            checks.push(Check::new(
                "exact probabilities above the lower bound",
                Verdict::from_bool(exact_violations == 0),
                format!("{exact_violations} of {} violate", exact.len()),
            ));
        }
        Report::new("avoidance", checks, serde_json::json!({ "fit": self.fit }), table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_interaction, InteractionKind};

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    #[test]
    fn single_site_delta_matches_closed_form() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let r = exact_avoidance(&lat, "1", &unit(), &PinningSpec::delta(0.0).unwrap(), QuadratureScheme::default())
            .unwrap();
        let z = (std::f64::consts::PI / 2.0).sqrt();
        assert!((r[0].value - z / (1.0 + z)).abs() < 1e-12);
        assert!(r[0].value > 0.5 && r[0].bound_holds());
    }

    #[test]
    fn shapes_have_requested_size() {
        let lat = build_lattice(4, 1, 0.0).unwrap();
        for k in [1, 2, 5, 9] {
            assert_eq!(avoid_set(&lat, Shape::Segment, k).unwrap().len(), k);
            assert_eq!(avoid_set(&lat, Shape::Box, k).unwrap().len(), k);
        }
        assert!(avoid_set(&lat, Shape::Segment, 10).is_err());
    }

    #[test]
    fn square_well_chain_respects_bound() {
        let lat = Lattice::chain(4, 1, 0.0).unwrap();
        let pin = PinningSpec::square_well(1.0, 0.5).unwrap();
        let r = exact_avoidance(&lat, "chain4", &unit(), &pin, QuadratureScheme::with_points(32)).unwrap();
        assert_eq!(r.len(), 15);
        assert!(r.iter().all(ExactAvoidance::bound_holds));
    }

    #[test]
    fn empty_set_bound_is_one() {
        assert_eq!(avoidance_lower_bound(&PinningSpec::delta(0.0).unwrap(), 0).unwrap(), 1.0);
        assert!(avoidance_lower_bound(&PinningSpec::Free, 1).is_err());
    }
}
