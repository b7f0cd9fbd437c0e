use serde::{Deserialize, Serialize};

use super::fit::{fit_decay, DecayFit, DecayModel};
use super::report::{Check, Report, Table, Verdict};
use crate::error::Result;
use crate::green::{expected_exit_times, log_divergence_profile, occupation_green, simulate_walk, DivergencePoint, WalkSpec};
use crate::model::{build_lattice, InteractionSpec, Lattice};
use crate::oracle::{gaussian_covariance, PinnedSet};
use crate::sampler::Estimate;

/// Largest entrywise gap allowed between the walk Green function and the
/// Gaussian covariance.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const MIN_LOG_R_SQUARED: f64 = 0.99;
/// Largest `(max − min)/mean` of `E[τ]/N²` over the exit-time ladder.
pub const MAX_EXIT_SPREAD: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub label: String,
    pub sites: usize,
    pub max_abs_diff: f64,
}

/// `max |G(i,j) − Cov(h_i, h_j)|` for the walk built from a Gaussian
/// interaction, optionally killed on `absorbing`.
pub fn gaussian_identity(
    lattice: &Lattice,
    label: &str,
    spec: &InteractionSpec,
    absorbing: Option<PinnedSet>,
) -> Result<IdentityCheck> {
    let pinned = absorbing.clone().unwrap_or_else(|| PinnedSet::empty(lattice.len()));
    let mut walk = WalkSpec::from_gaussian(spec)?;
    if let Some(a) = absorbing {
        walk = walk.with_absorbing(a);
    }
    let g = occupation_green(&lattice.with_boundary_value(0.0), &walk)?;
    let c = gaussian_covariance(&lattice.with_boundary_value(0.0), spec, &pinned)?;
    let mut worst: f64 = 0.0;
    for i in 0..lattice.len() {
        for j in 0..lattice.len() {
            worst = worst.max((g.get(i, j) - c.cov(i, j)).abs());
        }
    }
    Ok(IdentityCheck {
        label: label.into(),
        sites: lattice.len(),
        max_abs_diff: worst,
    })
}

/// The 2-site chain, the 3×3 box and the 11×11 box.
pub fn standard_identity_checks(spec: &InteractionSpec) -> Result<Vec<IdentityCheck>> {
    let r = spec.range();
    Ok(vec![
        gaussian_identity(&Lattice::chain(2, r, 0.0)?, "chain2", spec, None)?,
        gaussian_identity(&build_lattice(1, r, 0.0)?, "box3", spec, None)?,
        gaussian_identity(&build_lattice(5, r, 0.0)?, "box11", spec, None)?,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitPoint {
    pub n: i32,
    pub simulated: Estimate,
    pub exact: f64,
}

impl ExitPoint {
    pub fn ratio(&self) -> f64 {
        self.simulated.mean / f64::from(self.n * self.n)
    }
}

/// Simulated and exact mean exit time from the centre of `[-N, N]²`.
pub fn exit_time_profile(walk: &WalkSpec, n_list: &[i32], n_paths: usize, seed: u64) -> Result<Vec<ExitPoint>> {
    n_list
        .iter()
        .map(|&n| {
            let lattice = build_lattice(n, walk.range(), 0.0)?;
            let c = lattice.center();
            let sim = simulate_walk(&lattice, walk, c, &[], n_paths, seed ^ n as u64)?;
            let exact = expected_exit_times(&lattice, walk)?[c];
            Ok(ExitPoint {
                n,
                simulated: sim.exit_time,
                exact,
            })
        })
        .collect()
}

/// `(max − min)/mean` of the ratios.
pub fn exit_spread(points: &[ExitPoint]) -> f64 {
    let r: Vec<f64> = points.iter().map(ExitPoint::ratio).collect();
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = r.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / (r.iter().sum::<f64>() / r.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenProfile {
    pub identity: Vec<IdentityCheck>,
    pub divergence: Vec<DivergencePoint>,
    pub divergence_fit: DecayFit,
    pub exit: Vec<ExitPoint>,
}

pub fn green_profile(
    spec: &InteractionSpec,
    n_divergence: &[i32],
    n_exit: &[i32],
    n_paths: usize,
    seed: u64,
) -> Result<GreenProfile> {
    let walk = WalkSpec::from_gaussian(spec)?;
    let identity = standard_identity_checks(spec)?;
    let divergence = log_divergence_profile(&walk, n_divergence)?;
    let xs: Vec<f64> = divergence.iter().map(|p| f64::from(p.n)).collect();
    let ys: Vec<f64> = divergence.iter().map(|p| p.g00).collect();
    let divergence_fit = fit_decay(&xs, &ys, None, DecayModel::AffineInLog)?;
    let exit = exit_time_profile(&walk, n_exit, n_paths, seed)?;
    Ok(GreenProfile {
        identity,
        divergence,
        divergence_fit,
        exit,
    })
}

impl GreenProfile {
    pub fn report(&self) -> Report {
        let mut table = Table::new(&["quantity", "label", "value", "std_error", "exact"]);
        for c in &self.identity {
            table.push(vec!["identity".into(), c.label.clone().into(), c.max_abs_diff.into(), 0.0.into(), 0.0.into()]);
        }
        for p in &self.divergence {
            table.push(vec!["g00".into(), p.n.into(), p.g00.into(), 0.0.into(), p.g00.into()]);
        }
        for p in &self.exit {
            table.push(vec![
                "exit_time".into(),
                p.n.into(),
                p.simulated.mean.into(),
                p.simulated.std_error.into(),
                p.exact.into(),
            ]);
        }
        let worst = self.identity.iter().map(|c| c.max_abs_diff).fold(0.0, f64::max);
        let f = &self.divergence_fit;
        let spread = exit_spread(&self.exit);
        let exit_agree = self.exit.iter().all(|p| p.simulated.agrees_with(p.exact, 3.0));
        let checks = vec![
            Check::new(
                "walk Green function equals Gaussian covariance",
                Verdict::from_bool(worst <= IDENTITY_TOLERANCE),
                format!("max abs diff {worst:.3e}"),
            ),
            Check::new(
                "G(0,0) grows like a log N + b",
                Verdict::from_bool(f.r_squared >= MIN_LOG_R_SQUARED && f.rate().value > 0.0),
                format!("a = {:.5}, R^2 = {:.6}", f.rate().value, f.r_squared),
            ),
            Check::new(
                "exit time / N^2 spread below 25%",
                Verdict::from_bool(spread < MAX_EXIT_SPREAD),
                format!("spread {:.4}", spread),
            ),
            Check::new(
                "simulated exit times match the exact value within 3 SE",
                Verdict::from_bool(exit_agree),
                self.exit
                    .iter()
                    .map(|p| format!("N={}: {:.2}±{:.2} vs {:.2}", p.n, p.simulated.mean, p.simulated.std_error, p.exact))
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
        ];
        Report::new(
            "green-profile",
            checks,
            serde_json::json!({ "divergence_fit": self.divergence_fit, "exit_spread": spread }),
            table,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_interaction, InteractionKind};

    #[test]
    fn identity_holds_with_absorbing_set() {
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let c = gaussian_identity(&lat, "box5", &spec, Some(PinnedSet::from_indices(25, &[3, 12, 20]))).unwrap();
        assert!(c.max_abs_diff < IDENTITY_TOLERANCE, "{c:?}");
    }

    #[test]
    fn spread_of_equal_ratios_is_zero() {
        let p = |n: i32| ExitPoint {
            n,
            simulated: Estimate::exact(0.5 * f64::from(n * n), 1),
            exact: 0.5 * f64::from(n * n),
        };
        assert_eq!(exit_spread(&[p(2), p(4), p(8)]), 0.0);
    }
}
