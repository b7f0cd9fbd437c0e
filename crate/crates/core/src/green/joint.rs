//! Experimental joint field–walk estimator of two-point functions.
//!
//! The field follows the overdamped Langevin dynamics `dh = −∇H dt + √2 dW`,
//! whose stationary law is the interface measure, while a walk started at `i`
//! jumps across each bond at rate `Ψ''` of the current height difference and is
//! killed on the boundary or on pinned sites. The expected time the walk spends
//! at `j` is `⟨h_i; h_j⟩`. Time is discretised by Euler steps; every estimate
//! is repeated at half the step and the drift between the two is reported.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Couplings, InteractionSpec, Lattice, PinningSpec};
use crate::sampler::{delta_site_update, lenient_estimate, sweep_rng, Estimate, LocalModel, SweepRng};

/// Largest tolerated relative drift between the `dt` and `dt/2` runs.
pub const MAX_RELATIVE_DRIFT: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    /// Euler step; by default `0.01 / (largest total jump rate)`.
    pub dt: Option<f64>,
    pub walks: usize,
    pub seed: u64,
    /// Langevin time (or heat-bath sweeps under δ-pinning) spent equilibrating.
    pub burn_in: f64,
}

impl Default for JointConfig {
    fn default() -> Self {
        JointConfig {
            dt: None,
            walks: 20_000,
            seed: 0,
            burn_in: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    /// Run at `dt/2`.
    pub estimate: Estimate,
    /// Run at `dt`.
    pub coarse: Estimate,
    pub dt: f64,
    pub relative_drift: f64,
}

struct Dynamics<'a> {
    couplings: &'a Couplings,
    model: &'a LocalModel,
    log_weight: Option<f64>,
    heights: Vec<f64>,
    pinned: Vec<bool>,
    force: Vec<f64>,
}

impl Dynamics<'_> {
    fn langevin_step(&mut self, dt: f64, rng: &mut SweepRng) {
        let n = self.heights.len();
        for i in 0..n {
            self.force[i] = if self.pinned[i] {
                0.0
            } else {
                self.couplings.local_force(&self.heights, i)
            };
        }
        let noise = (2.0 * dt).sqrt();
        for i in 0..n {
            if !self.pinned[i] {
                let z: f64 = rng.sample(StandardNormal);
                self.heights[i] += -self.force[i] * dt + noise * z;
            }
        }
    }

    fn heat_bath_sweep(&mut self, rng: &mut SweepRng) -> Result<()> {
        if let Some(j) = self.log_weight {
            for i in 0..self.heights.len() {
                self.pinned[i] = delta_site_update(&mut self.heights, self.model, j, i, rng)?.pinned;
            }
        }
        Ok(())
    }

    /// Total jump rate out of `x` and the per-bond rates.
    fn rates(&self, x: usize, out: &mut Vec<f64>) -> f64 {
        out.clear();
        let hx = self.heights[x];
        let mut total = 0.0;
        for e in self.couplings.bond_range(x) {
            let c = self
                .couplings
                .bond_potential(e)
                .second(hx - self.couplings.partner_height(&self.heights, e));
            total += c;
            out.push(c);
        }
        total
    }

    fn max_total_rate(&self) -> f64 {
        let mut buf = Vec::new();
        (0..self.heights.len()).map(|i| self.rates(i, &mut buf)).fold(0.0, f64::max)
    }
}

/// Joint estimate of `⟨h_i h_j⟩ − ⟨h_i⟩⟨h_j⟩` under the free or δ-pinned
/// measure. Under δ-pinning the pinned set is refreshed by one heat-bath sweep
/// before each walk and pinned sites stay at zero while the walk runs.
pub fn hs_joint_estimate(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    pair: (usize, usize),
    config: &JointConfig,
) -> Result<JointEstimate> {
    pinning.validate()?;
    let log_weight = match *pinning {
        PinningSpec::Free => None,
        PinningSpec::Delta { log_weight } => Some(log_weight),
        PinningSpec::SquareWell { .. } => {
            return Err(Error::WrongVariant {
                expected: "free or δ-pinning",
                found: "square well",
            })
        }
    };
    let n = lattice.len();
    if pair.0 >= n || pair.1 >= n {
        return Err(Error::param("pair", format!("{pair:?} outside lattice of {n} sites")));
    }
    if config.walks < 2 {
        return Err(Error::param("walks", "need at least two walks"));
    }
    if let Some(dt) = config.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
    }
    let couplings = Couplings::new(lattice, spec);
    let model = LocalModel::new(lattice, spec);
    let mut dyns = Dynamics {
        couplings: &couplings,
        model: &model,
        log_weight,
        heights: vec![0.0; n],
        pinned: vec![false; n],
        force: vec![0.0; n],
    };
    let mut dt = config.dt.unwrap_or(0.01 / dyns.max_total_rate());
    equilibrate(&mut dyns, dt, config, 0)?;
    if config.dt.is_none() {
        dt = 0.01 / dyns.max_total_rate();
    }
    let start = (dyns.heights.clone(), dyns.pinned.clone());

    let coarse = run(&mut dyns, pair, dt, config, 1)?;
    dyns.heights.clone_from(&start.0);
    dyns.pinned.clone_from(&start.1);
    let fine = run(&mut dyns, pair, 0.5 * dt, config, 2)?;

    let relative_drift = (coarse.mean - fine.mean).abs() / fine.mean.abs().max(f64::MIN_POSITIVE);
    if relative_drift > MAX_RELATIVE_DRIFT && coarse.z_score(&fine) > 3.0 {
        return Err(Error::TimeStepTooLarge { relative_drift });
    }
    Ok(JointEstimate {
        estimate: fine,
        coarse,
        dt,
        relative_drift,
    })
}

fn equilibrate(dyns: &mut Dynamics<'_>, dt: f64, config: &JointConfig, stream: u64) -> Result<()> {
    if dyns.log_weight.is_some() {
        for s in 0..config.burn_in.ceil() as u64 {
            dyns.heat_bath_sweep(&mut sweep_rng(config.seed, stream, s))?;
        }
    } else {
        let steps = (config.burn_in / dt).ceil() as u64;
        let mut rng = sweep_rng(config.seed, stream, 0);
        for _ in 0..steps {
            dyns.langevin_step(dt, &mut rng);
        }
    }
    Ok(())
}

fn run(dyns: &mut Dynamics<'_>, (i, j): (usize, usize), dt: f64, config: &JointConfig, stream: u64) -> Result<Estimate> {
    let mut series = Vec::with_capacity(config.walks);
    let mut rates = Vec::new();
    for w in 0..config.walks {
        let mut rng = sweep_rng(config.seed, stream, w as u64);
        dyns.heat_bath_sweep(&mut rng)?;
        let mut occ = 0.0;
        let mut x = i;
        while !dyns.pinned[x] {
            if x == j {
                occ += dt;
            }
            let total = dyns.rates(x, &mut rates);
            let jump = rng.random::<f64>() < -(-total * dt).exp_m1();
            let u = rng.random::<f64>() * total;
            dyns.langevin_step(dt, &mut rng);
            if jump {
                let mut acc = 0.0;
                let bonds = dyns.couplings.bond_range(x);
                let mut chosen = bonds.end - 1;
                for (e, c) in bonds.zip(&rates) {
                    acc += c;
                    if u < acc {
                        chosen = e;
                        break;
                    }
                }
                match dyns.couplings.bond_partner(chosen) {
                    Some(y) => x = y,
                    None => break,
                }
            }
            if !occ.is_finite() {
                return Err(Error::NonFiniteEnergy { site: x, sweep: w });
            }
        }
        series.push(occ);
    }
    lenient_estimate(&series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, InteractionKind};
    use crate::oracle::{enumerate_delta_pinning, DeltaQuery, ExactMeasure, Observable, QuadratureScheme};

    #[test]
    fn single_site_gaussian_variance() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let cfg = JointConfig {
            walks: 10_000,
            seed: 4,
            ..JointConfig::default()
        };
        let r = hs_joint_estimate(&lat, &spec, &PinningSpec::Free, (0, 0), &cfg).unwrap();
        assert!(r.estimate.agrees_with(0.25, 3.0), "{:?}", r.estimate);
    }

    #[test]
    fn quartic_pair_matches_quadrature() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::quartic_nn(1.0, 1.0)).unwrap();
        let exact = ExactMeasure::new(&lat, &spec, QuadratureScheme::default())
            .unwrap()
            .evaluate(&[Observable::Product(0, 1)])
            .unwrap()
            .moment_at(0);
        let cfg = JointConfig {
            walks: 10_000,
            seed: 9,
            ..JointConfig::default()
        };
        let r = hs_joint_estimate(&lat, &spec, &PinningSpec::Free, (0, 1), &cfg).unwrap();
        assert!(r.estimate.agrees_with(exact.value, 3.0), "{:?} vs {}", r.estimate, exact.value);
    }

    #[test]
    fn delta_pinned_pair_matches_enumeration() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let query = DeltaQuery {
            observables: vec![Observable::Product(0, 0)],
            avoid: vec![],
        };
        let exact = enumerate_delta_pinning(&lat, &spec, 0.0, &query, QuadratureScheme::default())
            .unwrap()
            .moment_at(0)
            .value;
        let cfg = JointConfig {
            walks: 10_000,
            seed: 2,
            ..JointConfig::default()
        };
        let r = hs_joint_estimate(&lat, &spec, &PinningSpec::delta(0.0).unwrap(), (0, 0), &cfg).unwrap();
        assert!(r.estimate.agrees_with(exact, 3.0), "{:?} vs {exact}", r.estimate);
    }

    #[test]
    fn square_well_rejected() {
        let lat = Lattice::chain(1, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let pin = PinningSpec::square_well(1.0, 1.0).unwrap();
        assert!(hs_joint_estimate(&lat, &spec, &pin, (0, 0), &JointConfig::default()).is_err());
    }
}
