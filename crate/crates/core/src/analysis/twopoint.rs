use serde::{Deserialize, Serialize};

use super::estimators::{
    conditional_product_probe, pinned_gaussian_probe, translated_pairs, translated_product_probe, Bilinear,
};
use super::fit::{fit_decay, DecayFit, DecayModel};
use super::report::{Check, Report, Table, Verdict};
use crate::error::{Error, Result};
use crate::model::{build_lattice, InteractionSpec, Lattice, PinningSpec, Site};
use crate::oracle::{gaussian_covariance_column, PinnedSet};
use crate::sampler::{run_chain, ChainConfig, Estimate, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub d: i32,
    pub estimate: Estimate,
    pub exact: bool,
    /// Entered the fit (resolved from zero by more than two standard errors).
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointStudy {
    pub pinning: PinningSpec,
    pub l: i32,
    pub points: Vec<DistancePoint>,
    /// `None` when fewer than four distances are resolved.
    pub fit: Option<DecayFit>,
}

fn partner(lattice: &Lattice, d: i32) -> Result<usize> {
    let Site(x, y) = lattice.site(lattice.center());
    lattice
        .index_of(Site(x + d, y))
        .ok_or_else(|| Error::param("distances", format!("distance {d} leaves the box")))
}

/// `⟨h₀h_d⟩` along a lattice axis on `Λ_L` with zero boundary, and an
/// exponential fit of its decay. Gaussian fields are exact when unpinned and
/// conditioned on the pinned set under δ-pinning; other cases use products of
/// single-site conditional means.
pub fn two_point_decay(
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    l: i32,
    distances: &[i32],
    schedule: &Schedule,
) -> Result<TwoPointStudy> {
    two_point_study(spec, pinning, l, distances, schedule, false)
}

/// Like [`two_point_decay`], but in the sampled non-Gaussian case each
/// distance averages the product estimator over every axis-aligned pair whose
/// ends lie within `L − max(distances)` of the centre. The result estimates
/// the translation-averaged correlation of the core region, which is far less
/// noisy than the single centred pair.
pub fn two_point_decay_averaged(
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    l: i32,
    distances: &[i32],
    schedule: &Schedule,
) -> Result<TwoPointStudy> {
    two_point_study(spec, pinning, l, distances, schedule, true)
}

fn two_point_study(
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    l: i32,
    distances: &[i32],
    schedule: &Schedule,
    averaged: bool,
) -> Result<TwoPointStudy> {
    if let Some(&d) = distances.iter().find(|&&d| d < 1 || 2 * d > l) {
        return Err(Error::param("distances", format!("distance {d} outside 1..=L/2 for L = {l}")));
    }
    let lattice = build_lattice(l, spec.range(), 0.0)?;
    let c = lattice.center();
    let partners = distances.iter().map(|&d| partner(&lattice, d)).collect::<Result<Vec<_>>>()?;
    let (estimates, exact): (Vec<Estimate>, bool) = match (*pinning, spec.is_gaussian()) {
        (PinningSpec::Free, true) => {
            let g = gaussian_covariance_column(&lattice, spec, &PinnedSet::empty(lattice.len()), c, 1e-12)?;
            (partners.iter().map(|&j| Estimate::exact(g[j], 1)).collect(), true)
        }
        (PinningSpec::Delta { .. }, true) => {
            let q = distances
                .iter()
                .zip(&partners)
                .map(|(d, &j)| Bilinear::pair(format!("h0*h{d}"), c, j))
                .collect();
            let probe = pinned_gaussian_probe(&lattice, spec, q);
            let r = run_chain(&ChainConfig::new(lattice.clone(), spec.clone(), *pinning, schedule.clone()), &[probe])?;
            (r.estimates, false)
        }
        _ if averaged => {
            let margin = distances.iter().copied().max().unwrap_or(0);
            let names = distances.iter().map(|d| format!("h0*h{d}")).collect();
            let sets = distances.iter().map(|&d| translated_pairs(&lattice, d, margin)).collect();
            let probe = translated_product_probe(&lattice, spec, pinning, names, sets);
            let r = run_chain(&ChainConfig::new(lattice.clone(), spec.clone(), *pinning, schedule.clone()), &[probe])?;
            (r.estimates, false)
        }
        _ => {
            let pairs = distances
                .iter()
                .zip(&partners)
                .map(|(d, &j)| (format!("h0*h{d}"), c, j))
                .collect();
            let probe = conditional_product_probe(&lattice, spec, pinning, pairs);
            let r = run_chain(&ChainConfig::new(lattice.clone(), spec.clone(), *pinning, schedule.clone()), &[probe])?;
            (r.estimates, false)
        }
    };
    if let Some(e) = estimates.iter().find(|e| !e.mean.is_finite()) {
        return Err(Error::Fit(format!("non-finite two-point estimate {e:?}")));
    }
    let points: Vec<DistancePoint> = distances
        .iter()
        .zip(&estimates)
        .map(|(&d, &estimate)| DistancePoint {
            d,
            estimate,
            exact,
            used: estimate.mean > 0.0 && (exact || estimate.mean > 2.0 * estimate.std_error),
        })
        .collect();
    let used: Vec<&DistancePoint> = points.iter().filter(|p| p.used).collect();
    let fit = if used.len() >= 4 {
        let xs: Vec<f64> = used.iter().map(|p| f64::from(p.d)).collect();
        let ys: Vec<f64> = used.iter().map(|p| p.estimate.mean).collect();
        let ses: Vec<f64> = used.iter().map(|p| p.estimate.std_error).collect();
        Some(fit_decay(&xs, &ys, (!exact).then_some(ses.as_slice()), DecayModel::PureExponential)?)
    } else {
        None
    };
    Ok(TwoPointStudy {
        pinning: *pinning,
        l,
        points,
        fit,
    })
}

/// `(K_b − K_a) / combined SE` of two fitted masses.
pub fn mass_separation(a: &DecayFit, b: &DecayFit) -> f64 {
    (b.rate().value - a.rate().value) / a.rate().std_error.hypot(b.rate().std_error)
}

impl TwoPointStudy {
    pub fn mass_excludes_zero(&self) -> Verdict {
        match &self.fit {
            Some(f) => Verdict::from_bool(f.rate().value > 0.0 && f.rate().ci_excludes_zero()),
            None => Verdict::Underpowered,
        }
    }

    pub fn mass_contains_zero(&self) -> Verdict {
        match &self.fit {
            Some(f) => Verdict::from_bool(f.rate().ci_contains(0.0)),
            None => Verdict::Underpowered,
        }
    }

    pub fn table(&self, label: &str) -> Table {
        let mut t = Table::new(&["variant", "d", "mean", "std_error", "tau_int", "exact", "used"]);
        for p in &self.points {
            t.push(vec![
                label.into(),
                p.d.into(),
                p.estimate.mean.into(),
                p.estimate.std_error.into(),
                p.estimate.tau_int.into(),
                usize::from(p.exact).into(),
                usize::from(p.used).into(),
            ]);
        }
        t
    }

    pub fn check(&self, name: &str, expect_mass: bool) -> Check {
        let detail = match &self.fit {
            Some(f) => format!("K = {:.4} CI [{:.4}, {:.4}]", f.rate().value, f.rate().ci[0], f.rate().ci[1]),
            None => "fewer than 4 resolved distances".into(),
        };
        let verdict = if expect_mass {
            self.mass_excludes_zero()
        } else {
            self.mass_contains_zero()
        };
        Check::new(name, verdict, detail)
    }

    pub fn report(&self, contrast: Option<&TwoPointStudy>) -> Report {
        let mut table = self.table("pinned");
        let mut checks = vec![self.check("mass CI excludes 0", true)];
        if let Some(u) = contrast {
            table.extend(u.table("unpinned"));
            checks.push(u.check("unpinned mass CI contains 0", false));
        }
        Report::new(
            "twopoint",
            checks,
            serde_json::json!({ "fit": self.fit, "contrast_fit": contrast.map(|u| &u.fit) }),
            table,
        )
    }
}
