use serde::{Deserialize, Serialize};

use super::report::{Check, Report, Table, Verdict};
use crate::error::Result;
use crate::model::{make_interaction, InteractionKind, InteractionSpec, Lattice, PinningSpec, Site};
use crate::oracle::{
    enumerate_delta_pinning, pinned_set_measure, DeltaQuery, ExactValue, Observable, PinnedSet, QuadratureScheme,
};
use crate::sampler::{run_chain, ChainConfig, Estimate, Probe, Schedule};

/// Grid instances allowed to disagree somewhere before the grid fails.
pub const MAX_GRID_FAILURES: usize = 2;
/// Agreement threshold in combined standard errors.
pub const AGREEMENT_SIGMAS: f64 = 3.0;
/// Relative gap allowed between a narrow deep well and its δ limit.
pub const CROSS_VARIANT_RTOL: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct GridInstance {
    pub label: String,
    pub lattice: Lattice,
    pub spec_name: String,
    pub spec: InteractionSpec,
    pub pinning: PinningSpec,
}

/// Three-site chain and 2×2 plaquette, Gaussian and quartic, under two
/// square wells, two δ weights and two boundary heights without pinning.
pub fn standard_grid() -> Result<Vec<GridInstance>> {
    let lattices = [
        ("chain3", Lattice::chain(3, 1, 0.0)?),
        (
            "square2",
            Lattice::from_sites(vec![Site(0, 0), Site(1, 0), Site(0, 1), Site(1, 1)], 1, 0.0)?,
        ),
    ];
    let specs = [
        ("gaussian", make_interaction(InteractionKind::gaussian_nn(0.5))?),
        ("quartic", make_interaction(InteractionKind::quartic_nn(1.0, 1.0))?),
    ];
    let mut out = Vec::new();
    for (lname, lat) in &lattices {
        for (sname, spec) in &specs {
            let mut push = |tag: String, lattice: Lattice, pinning: PinningSpec| {
                out.push(GridInstance {
                    label: format!("{lname}/{sname}/{tag}"),
                    lattice,
                    spec_name: sname.to_string(),
                    spec: spec.clone(),
                    pinning,
                })
            };
            for (eps, a) in [(1.0, 0.5), (2.0, 0.25)] {
                push(format!("well({eps},{a})"), lat.clone(), PinningSpec::square_well(eps, a)?);
            }
            for j in [0.0, 1.0] {
                push(format!("delta({j})"), lat.clone(), PinningSpec::delta(j)?);
            }
            for b in [0.0, 0.5] {
                push(format!("free(b={b})"), lat.with_boundary_value(b), PinningSpec::Free);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub observable: String,
    pub sampled: Estimate,
    pub exact: ExactValue,
}

impl Comparison {
    pub fn z(&self) -> f64 {
        let se = self.sampled.std_error.hypot(self.exact.error_estimate);
        (self.sampled.mean - self.exact.value).abs() / se
    }

    pub fn agrees(&self) -> bool {
        self.z() <= AGREEMENT_SIGMAS
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub label: String,
    pub comparisons: Vec<Comparison>,
}

impl InstanceResult {
    pub fn agrees(&self) -> bool {
        self.comparisons.iter().all(Comparison::agrees)
    }
}

fn observables(lattice: &Lattice) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..lattice.len()).map(|i| (i, i)).collect();
    for i in 0..lattice.len() {
        for j in i + 1..lattice.len() {
            if lattice.site(i).l1_dist(lattice.site(j)) == 1 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Exact second moments of an instance.
pub fn exact_moments(inst: &GridInstance, pairs: &[(usize, usize)], scheme: QuadratureScheme) -> Result<Vec<ExactValue>> {
    let obs: Vec<Observable> = pairs.iter().map(|&(i, j)| Observable::Product(i, j)).collect();
    let r = match inst.pinning {
        PinningSpec::Delta { log_weight } => enumerate_delta_pinning(
            &inst.lattice,
            &inst.spec,
            log_weight,
            &DeltaQuery {
                observables: obs,
                avoid: vec![],
            },
            scheme,
        )?,
        _ => pinned_set_measure(
            &inst.lattice,
            &inst.spec,
            &inst.pinning,
            &PinnedSet::empty(inst.lattice.len()),
            scheme,
        )?
        .evaluate(&obs)?,
    };
    Ok((0..pairs.len()).map(|k| r.moment_at(k)).collect())
}

/// Samples every instance and compares each `⟨h_i²⟩` and nearest-neighbour
/// `⟨h_ih_j⟩` with its oracle value.
pub fn oracle_validate(instances: &[GridInstance], schedule: &Schedule, scheme: QuadratureScheme) -> Result<Vec<InstanceResult>> {
    instances
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let pairs = observables(&inst.lattice);
            let exact = exact_moments(inst, &pairs, scheme)?;
            let probes: Vec<Probe> = pairs
                .iter()
                .map(|&(i, j)| if i == j { Probe::Square(i) } else { Probe::Product(i, j) })
                .collect();
            let sched = Schedule {
                seed: schedule.seed.wrapping_add(k as u64),
                ..schedule.clone()
            };
            let r = run_chain(
                &ChainConfig::new(inst.lattice.clone(), inst.spec.clone(), inst.pinning, sched),
                &probes,
            )?;
            Ok(InstanceResult {
                label: inst.label.clone(),
                comparisons: pairs
                    .iter()
                    .zip(r.estimates)
                    .zip(exact)
                    .map(|((&(i, j), sampled), exact)| Comparison {
                        observable: format!("h{i}*h{j}"),
                        sampled,
                        exact,
                    })
                    .collect(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossVariant {
    pub label: String,
    pub strength: f64,
    pub half_width: f64,
    pub log_weight: f64,
    pub well: ExactValue,
    pub delta: ExactValue,
}

impl CrossVariant {
    pub fn relative_gap(&self) -> f64 {
        (self.well.value - self.delta.value).abs() / self.delta.value.abs()
    }

    pub fn agrees(&self) -> bool {
        self.relative_gap() <= CROSS_VARIANT_RTOL
    }
}

/// Exact `⟨h₀²⟩` under a deep narrow well `(ε, a)` against δ-pinning with
/// `e^J = 2(e^ε − 1)a`, for each `(ε, a)`.
pub fn cross_variant(
    lattice: &Lattice,
    label: &str,
    spec: &InteractionSpec,
    wells: &[(f64, f64)],
    scheme: QuadratureScheme,
) -> Result<Vec<CrossVariant>> {
    wells
        .iter()
        .map(|&(eps, a)| {
            let log_weight = (2.0 * eps.exp_m1() * a).ln();
            let mk = |pinning: PinningSpec| GridInstance {
                label: label.into(),
                lattice: lattice.clone(),
                spec_name: spec.kind_name().into(),
                spec: spec.clone(),
                pinning,
            };
            let well = exact_moments(&mk(PinningSpec::square_well(eps, a)?), &[(0, 0)], scheme)?[0];
            let delta = exact_moments(&mk(PinningSpec::delta(log_weight)?), &[(0, 0)], scheme)?[0];
            Ok(CrossVariant {
                label: label.into(),
                strength: eps,
                half_width: a,
                log_weight,
                well,
                delta,
            })
        })
        .collect()
}

pub fn oracle_report(results: &[InstanceResult], cross: &[CrossVariant]) -> Report {
    let mut table = Table::new(&["instance", "observable", "sampled", "std_error", "exact", "exact_error", "z"]);
    for r in results {
        for c in &r.comparisons {
            table.push(vec![
                r.label.clone().into(),
                c.observable.clone().into(),
                c.sampled.mean.into(),
                c.sampled.std_error.into(),
                c.exact.value.into(),
                c.exact.error_estimate.into(),
                c.z().into(),
            ]);
        }
    }
    for c in cross {
        table.push(vec![
            format!("cross:{}:eps={}:a={}", c.label, c.strength, c.half_width).into(),
            "h0*h0".into(),
            c.well.value.into(),
            c.well.error_estimate.into(),
            c.delta.value.into(),
            c.delta.error_estimate.into(),
            c.relative_gap().into(),
        ]);
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.agrees()).map(|r| r.label.as_str()).collect();
    let worst = results
        .iter()
        .flat_map(|r| &r.comparisons)
        .map(Comparison::z)
        .fold(0.0, f64::max);
    let mut checks = vec![
        Check::new(
            "grid has at least 24 instances",
            Verdict::from_bool(results.len() >= 24),
            format!("{} instances", results.len()),
        ),
        Check::new(
            "sampled moments agree with the oracle within 3 SE",
            Verdict::from_bool(failed.len() <= MAX_GRID_FAILURES),
            format!("{} instances disagree {:?}, largest z = {worst:.2}", failed.len(), failed),
        ),
    ];
    if !cross.is_empty() {
        let worst = cross.iter().map(CrossVariant::relative_gap).fold(0.0, f64::max);
        checks.push(Check::new(
            "deep narrow well matches its delta limit",
            Verdict::from_bool(cross.iter().all(CrossVariant::agrees)),
            format!("largest relative gap {worst:.3e}"),
        ));
    }
    Report::new(
        "oracle-validate",
        checks,
        serde_json::json!({ "failed": failed, "cross_variant": cross }),
        table,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_all_variants() {
        let g = standard_grid().unwrap();
        assert_eq!(g.len(), 24);
        assert_eq!(g.iter().filter(|i| matches!(i.pinning, PinningSpec::Delta { .. })).count(), 8);
    }

    #[test]
    fn narrow_well_approaches_delta() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let c = cross_variant(&lat, "chain2", &spec, &[(6.0, 0.01)], QuadratureScheme::with_points(64)).unwrap();
        assert!(c[0].agrees(), "{c:?}");
    }
}
