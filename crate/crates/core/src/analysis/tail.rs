use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::estimators::conditional_probe;
use super::fit::{fit_decay, DecayFit, DecayModel};
use super::report::{Check, Report, Table, Verdict};
use crate::error::{Error, Result};
use crate::model::{build_lattice, InteractionSpec, PinningSpec};
use crate::sampler::{run_chain, ChainConfig, Estimate, Schedule, SiteFunction};

/// Smallest probability resolved by direct estimation at desk scale.
pub const MIN_TAIL_PROBABILITY: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub estimate: Estimate,
    /// Excluded from the fits: below the threshold, unresolved, or `T` too small.
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailStudy {
    pub pinning: PinningSpec,
    pub l: i32,
    /// Fits use `T ≥ min_t`.
    pub min_t: f64,
    pub points: Vec<TailPoint>,
    pub gaussian_over_log: Option<DecayFit>,
    pub pure_exponential: Option<DecayFit>,
    /// Lower-bound form, fitted when `Ψ''` is bounded above.
    pub pure_gaussian: Option<DecayFit>,
}

/// Fits start at `T = 2` (the scaled form is singular at `T = 1`) and, for the
/// square well, at no less than ten well widths.
pub fn tail_threshold(pinning: &PinningSpec) -> f64 {
    match *pinning {
        PinningSpec::SquareWell { half_width, .. } => 2.0f64.max(10.0 * half_width),
        _ => 2.0,
    }
}

/// `P(h₀ > T)` on `Λ_L` for every `T` in the grid, estimated through the
/// conditional tail of the centre site, then fitted by the competing laws.
pub fn tail_curve(
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    l: i32,
    boundary: f64,
    t_grid: &[f64],
    schedule: &Schedule,
) -> Result<TailStudy> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::param("t_grid", "need finite thresholds"));
    }
    let lattice = build_lattice(l, spec.range(), boundary)?;
    let c = lattice.center();
    let fs = t_grid
        .iter()
        .map(|&t| (format!("P(h0>{t})"), SiteFunction::Exceeds(t)))
        .collect();
    let probe = conditional_probe(&lattice, spec, pinning, c, fs);
    let r = run_chain(&ChainConfig::new(lattice, spec.clone(), *pinning, schedule.clone()), &[probe])?;
    let min_t = tail_threshold(pinning);
    let points: Vec<TailPoint> = t_grid
        .iter()
        .zip(&r.estimates)
        .map(|(&t, &estimate)| TailPoint {
            t,
            estimate,
            censored: t < min_t
                || !(estimate.mean >= MIN_TAIL_PROBABILITY)
                || !(estimate.mean > 2.0 * estimate.std_error),
        })
        .collect();
    let used: Vec<&TailPoint> = points.iter().filter(|p| !p.censored).collect();
    let fit = |model| -> Option<DecayFit> {
        if used.len() < 4 {
            return None;
        }
        let xs: Vec<f64> = used.iter().map(|p| p.t).collect();
        let ys: Vec<f64> = used.iter().map(|p| p.estimate.mean).collect();
        let ses: Vec<f64> = used.iter().map(|p| p.estimate.std_error.max(1e-300)).collect();
        fit_decay(&xs, &ys, Some(&ses), model).ok()
    };
    Ok(TailStudy {
        pinning: *pinning,
        l,
        min_t,
        gaussian_over_log: fit(DecayModel::GaussianOverLog),
        pure_exponential: fit(DecayModel::PureExponential),
        pure_gaussian: spec.ceiling().and_then(|_| fit(DecayModel::PureGaussian)),
        points,
    })
}

/// Fit of `exp(−c T²/log T)` data with relative noise `noise` on the grid.
pub fn synthetic_tail_recovery(c: f64, t_grid: &[f64], noise: f64, seed: u64) -> Result<DecayFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ys: Vec<f64> = t_grid
        .iter()
        .map(|&t| (-c * t * t / t.ln()).exp() * (1.0 + noise * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let ses: Vec<f64> = ys.iter().map(|y| noise * y.abs()).collect();
    fit_decay(t_grid, &ys, (noise > 0.0).then_some(ses.as_slice()), DecayModel::GaussianOverLog)
}

impl TailStudy {
    pub fn shape_verdict(&self) -> Verdict {
        match (&self.gaussian_over_log, &self.pure_exponential) {
            (Some(g), Some(e)) => Verdict::from_bool(g.weighted_rss <= e.weighted_rss),
            _ => Verdict::Underpowered,
        }
    }

    pub fn report(&self, synthetic: Option<&DecayFit>) -> Report {
        let mut table = Table::new(&["T", "probability", "std_error", "tau_int", "censored"]);
        for p in &self.points {
            table.push(vec![
                p.t.into(),
                p.estimate.mean.into(),
                p.estimate.std_error.into(),
                p.estimate.tau_int.into(),
                usize::from(p.censored).into(),
            ]);
        }
        let rss = |f: &Option<DecayFit>| f.as_ref().map_or(f64::NAN, |f| f.weighted_rss);
        let mut checks = vec![Check::new(
            "gaussian_over_log residual <= pure_exponential residual",
            self.shape_verdict(),
            format!(
                "weighted RSS {:.4e} vs {:.4e} over {} points",
                rss(&self.gaussian_over_log),
                rss(&self.pure_exponential),
                self.points.iter().filter(|p| !p.censored).count()
            ),
        )];
        if let Some(s) = synthetic {
            checks.push(Check::new(
                "synthetic c = 1 recovered within CI",
                Verdict::from_bool(s.rate().ci_contains(1.0)),
                format!("c = {:.4} CI [{:.4}, {:.4}]", s.rate().value, s.rate().ci[0], s.rate().ci[1]),
            ));
        }
        Report::new(
            "tail",
            checks,
            serde_json::json!({
                "gaussian_over_log": self.gaussian_over_log,
                "pure_exponential": self.pure_exponential,
                "pure_gaussian": self.pure_gaussian,
                "min_t": self.min_t,
            }),
            table,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_recovery_contains_truth() {
        let grid: Vec<f64> = (0..10).map(|k| 2.0 + 0.25 * k as f64).collect();
        let f = synthetic_tail_recovery(1.0, &grid, 0.05, 3).unwrap();
        assert!(f.rate().ci_contains(1.0), "{:?}", f.rate());
        let exact = synthetic_tail_recovery(1.0, &grid, 0.0, 0).unwrap();
        assert!((exact.rate().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn threshold_respects_well_width() {
        assert_eq!(tail_threshold(&PinningSpec::delta(0.0).unwrap()), 2.0);
        assert_eq!(tail_threshold(&PinningSpec::square_well(1.0, 0.5).unwrap()), 5.0);
    }
}
