//! Exact checks of the comparison inequalities between the conditioned field
//! `μ⁰(· | |h_j| ≤ a ∀ j ∈ A)` and the field `μ⁰_{Λ∖A}` with `A` held at zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Check, Report, Table, Verdict};
use crate::error::Result;
use crate::model::{make_interaction, InteractionKind, InteractionSpec, Lattice, Offset, Site};
use crate::oracle::{ExactMeasure, ExactValue, Observable, PinnedSet, QuadratureScheme, SiteConstraint};

/// Absolute slack added to the combined quadrature error estimates.
pub const LEMMA_SLACK: f64 = 1e-9;

/// A small lattice, a conditioning set `A` and the observed site `i ∉ A`.
#[derive(Clone, Debug)]
pub struct LemmaInstance {
    pub label: String,
    pub lattice: Lattice,
    pub a_set: PinnedSet,
    pub site: usize,
}

/// Three-site chain with `A ⊆ {0, 2}` observed at the middle, and the 2×2
/// plaquette with `A ∈ {∅, {1}, {1, 2}}` observed at site 0.
pub fn standard_instances() -> Result<Vec<LemmaInstance>> {
    let chain = Lattice::chain(3, 1, 0.0)?;
    let square = Lattice::from_sites(vec![Site(0, 0), Site(1, 0), Site(0, 1), Site(1, 1)], 1, 0.0)?;
    let mut out = Vec::new();
    for a in [&[][..], &[0], &[2], &[0, 2]] {
        out.push(LemmaInstance {
            label: format!("chain3 A={a:?}"),
            a_set: PinnedSet::from_indices(3, a),
            lattice: chain.clone(),
            site: 1,
        });
    }
    for a in [&[][..], &[1], &[1, 2]] {
        out.push(LemmaInstance {
            label: format!("square2 A={a:?}"),
            a_set: PinnedSet::from_indices(4, a),
            lattice: square.clone(),
            site: 0,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LemmaGrid {
    pub specs: Vec<(String, InteractionSpec)>,
    pub widths: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub scheme: QuadratureScheme,
}

impl LemmaGrid {
    /// Gaussian, quartic and cosh nearest-neighbour interactions with
    /// `a ∈ {0.25, 0.5, 1}` and `T ∈ {0.5, 1, 1.5, 2.5}`.
    pub fn standard() -> Result<Self> {
        Ok(LemmaGrid {
            specs: vec![
                ("gaussian".into(), make_interaction(InteractionKind::gaussian_nn(0.5))?),
                ("quartic".into(), make_interaction(InteractionKind::quartic_nn(1.0, 1.0))?),
                (
                    "cosh".into(),
                    make_interaction(InteractionKind::Cosh {
                        kappa: 1.0,
                        offsets: Offset::nearest_neighbors(),
                    })?,
                ),
            ],
            widths: vec![0.25, 0.5, 1.0],
            thresholds: vec![0.5, 1.0, 1.5, 2.5],
            scheme: QuadratureScheme::with_points(64),
        })
    }

    pub fn n_points(&self) -> usize {
        self.specs.len() * self.widths.len() * self.thresholds.len() * 7
    }
}

/// One inequality `lhs ≤ rhs` evaluated exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: String,
    pub instance: String,
    pub spec: String,
    pub a: f64,
    pub t: Option<f64>,
    pub lhs: ExactValue,
    pub rhs: ExactValue,
}

impl LemmaCheck {
    pub fn margin(&self) -> f64 {
        self.rhs.value - self.lhs.value
    }

    pub fn holds(&self) -> bool {
        self.margin() + self.lhs.error_estimate + self.rhs.error_estimate + LEMMA_SLACK >= 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSuite {
    pub points: usize,
    pub checks: Vec<LemmaCheck>,
}

fn scaled(v: ExactValue, s: f64, shift: f64) -> ExactValue {
    ExactValue {
        value: s * v.value + shift,
        error_estimate: s.abs() * v.error_estimate,
    }
}

fn case(
    inst: &LemmaInstance,
    spec_name: &str,
    spec: &InteractionSpec,
    a: f64,
    thresholds: &[f64],
    scheme: QuadratureScheme,
) -> Result<Vec<LemmaCheck>> {
    let i = inst.site;
    let conditioned = ExactMeasure::new(&inst.lattice, spec, scheme)?.constrain_set(&inst.a_set, SiteConstraint::Window(a));
    let removed = ExactMeasure::new(&inst.lattice, spec, scheme)?.constrain_set(&inst.a_set, SiteConstraint::Fixed(0.0));
    let shifted = removed.clone().constrain(i, SiteConstraint::AtLeast(-a));

    let mut obs = vec![Observable::second_moment(i), Observable::Within(i, a)];
    obs.extend(thresholds.iter().map(|&t| Observable::Exceeds(i, t)));
    let m1 = conditioned.evaluate(&obs)?;

    let mut obs = vec![Observable::second_moment(i), Observable::Within(i, a), Observable::Abs(i)];
    for &t in thresholds {
        obs.push(Observable::Exceeds(i, t + a));
        obs.push(Observable::Exceeds(i, t - a));
    }
    let m2 = removed.evaluate(&obs)?;

    let mut obs = vec![
        Observable::custom("(h+a)^2", move |h: &[f64]| (h[i] + a).powi(2)),
        Observable::Exceeds(i, 0.0),
    ];
    obs.extend(thresholds.iter().map(|&t| Observable::Exceeds(i, t - a)));
    let m3 = shifted.evaluate(&obs)?;

    let check = |lemma: &str, t: Option<f64>, lhs: ExactValue, rhs: ExactValue| LemmaCheck {
        lemma: lemma.into(),
        instance: inst.label.clone(),
        spec: spec_name.into(),
        a,
        t,
        lhs,
        rhs,
    };
    let abs = m2.moment_at(2);
    let lower = ExactValue {
        value: (a / (4.0 * abs.value)).min(0.5),
        error_estimate: a / (4.0 * abs.value * abs.value) * abs.error_estimate,
    };
    let mut out = vec![
        check("truezero", None, m1.moment_at(0), scaled(m2.moment_at(0), 4.0, 4.0 * a * a)),
        check("probtozero", None, scaled(m2.moment_at(1), 0.5, 0.0), m1.moment_at(1)),
        check("lowerbd", None, lower, m2.moment_at(1)),
        check("tech x^2", None, m1.moment_at(0), m3.moment_at(0)),
        // g = 1{|x| > a}: ⟨g(h_i + a) | h_i ≥ −a⟩ = P(h_i > 0 | h_i ≥ −a)
        check("tech 1{|x|>a}", None, scaled(m1.moment_at(1), -1.0, 1.0), m3.moment_at(1)),
    ];
    for (k, &t) in thresholds.iter().enumerate() {
        let p1 = m1.moment_at(2 + k);
        out.push(check("probtruezero lower", Some(t), m2.moment_at(3 + 2 * k), p1));
        out.push(check("probtruezero upper", Some(t), p1, m2.moment_at(4 + 2 * k)));
        // g = 1{|x| > T}: the conditioned field is symmetric, so ⟨g(h_i)⟩ = 2 P(h_i > T)
        out.push(check("tech 1{|x|>T}", Some(t), scaled(p1, 2.0, 0.0), m3.moment_at(2 + k)));
    }
    Ok(out)
}

/// Evaluates every inequality on every grid point.
pub fn lemma_suite(grid: &LemmaGrid) -> Result<LemmaSuite> {
    let instances = standard_instances()?;
    let mut jobs = Vec::new();
    for inst in &instances {
        for (name, spec) in &grid.specs {
            for &a in &grid.widths {
                jobs.push((inst, name, spec, a));
            }
        }
    }
    let parts = jobs
        .par_iter()
        .map(|&(inst, name, spec, a)| case(inst, name, spec, a, &grid.thresholds, grid.scheme))
        .collect::<Result<Vec<_>>>()?;
    Ok(LemmaSuite {
        points: jobs.len() * grid.thresholds.len(),
        checks: parts.into_iter().flatten().collect(),
    })
}

impl LemmaSuite {
    pub fn violations(&self) -> Vec<&LemmaCheck> {
        self.checks.iter().filter(|c| !c.holds()).collect()
    }

    pub fn report(&self) -> Report {
        let mut table = Table::new(&["lemma", "instance", "spec", "a", "T", "lhs", "rhs", "lhs_err", "rhs_err", "holds"]);
        for c in &self.checks {
            table.push(vec![
                c.lemma.clone().into(),
                c.instance.clone().into(),
                c.spec.clone().into(),
                c.a.into(),
                c.t.unwrap_or(f64::NAN).into(),
                c.lhs.value.into(),
                c.rhs.value.into(),
                c.lhs.error_estimate.into(),
                c.rhs.error_estimate.into(),
                usize::from(c.holds()).into(),
            ]);
        }
        let mut lemmas: Vec<&str> = self.checks.iter().map(|c| c.lemma.as_str()).collect();
        lemmas.sort_unstable();
        lemmas.dedup();
        let mut checks: Vec<Check> = lemmas
            .iter()
            .map(|&l| {
                let of: Vec<&LemmaCheck> = self.checks.iter().filter(|c| c.lemma == l).collect();
                let bad = of.iter().filter(|c| !c.holds()).count();
                let tightest = of.iter().map(|c| c.margin()).fold(f64::INFINITY, f64::min);
                Check::new(
                    l,
                    Verdict::from_bool(bad == 0),
                    format!("{bad} of {} violated, smallest margin {tightest:.3e}", of.len()),
                )
            })
            .collect();
        checks.push(Check::new(
            "grid has at least 200 points",
            Verdict::from_bool(self.points >= 200),
            format!("{} points", self.points),
        ));
        Report::new(
            "lemma-suite",
            checks,
            serde_json::json!({ "points": self.points, "checks": self.checks.len(), "violations": self.violations().len() }),
            table,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_gaussian_case_holds() {
        let grid = LemmaGrid::standard().unwrap();
        let inst = &standard_instances().unwrap()[3];
        let checks = case(inst, "gaussian", &grid.specs[0].1, 0.5, &[1.0], QuadratureScheme::with_points(48)).unwrap();
        assert_eq!(checks.len(), 8);
        for c in &checks {
            assert!(c.holds(), "{c:?}");
        }
    }

    #[test]
    fn standard_grid_size() {
        assert_eq!(LemmaGrid::standard().unwrap().n_points(), 252);
        assert_eq!(standard_instances().unwrap().len(), 7);
    }
}
