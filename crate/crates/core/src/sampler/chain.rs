use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moves::{
    auxiliary_pin_sweep, delta_site_update, metropolis_sweep, overrelax_sweep, LocalModel,
};
use super::rng::sweep_rng;
use super::stats::{lenient_estimate, merge_replicas, Estimate};
use crate::error::{Error, Result};
use crate::model::{InteractionSpec, Lattice, PinningSpec};
use crate::oracle::PinnedSet;

/// Update used for the square-well and free measures. δ-pinning always uses
/// the exact single-site heat bath.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Metropolis,
    /// Alternates the pinned set `A | h` and the walled field `h | A`.
    Auxiliary,
}

/// Sweep counts, proposal width, seed and replica count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub burn_in: usize,
    pub sweeps: usize,
    #[serde(default = "one")]
    pub thin: usize,
    /// Fixed proposal width; `None` tunes it during burn-in.
    #[serde(default)]
    pub proposal_width: Option<f64>,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    /// Over-relaxation passes after every main sweep.
    #[serde(default)]
    pub overrelax: usize,
    #[serde(default)]
    pub algorithm: Algorithm,
}

fn one() -> usize {
    1
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            burn_in: 1_000,
            sweeps: 10_000,
            thin: 1,
            proposal_width: None,
            seed: 1,
            replicas: 2,
            overrelax: 0,
            algorithm: Algorithm::Metropolis,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub lattice: Lattice,
    pub spec: InteractionSpec,
    pub pinning: PinningSpec,
    pub schedule: Schedule,
}

impl ChainConfig {
    pub fn new(lattice: Lattice, spec: InteractionSpec, pinning: PinningSpec, schedule: Schedule) -> Self {
        ChainConfig {
            lattice,
            spec,
            pinning,
            schedule,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pinning.validate()?;
        let s = &self.schedule;
        if s.sweeps == 0 {
            return Err(Error::param("sweeps", "must be > 0"));
        }
        if s.thin == 0 {
            return Err(Error::param("thin", "must be > 0"));
        }
        if s.replicas == 0 {
            return Err(Error::param("replicas", "must be > 0"));
        }
        if let Some(w) = s.proposal_width {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::param("proposal_width", format!("must be > 0, got {w}")));
            }
        }
        if s.algorithm == Algorithm::Auxiliary
            && !matches!(self.pinning, PinningSpec::SquareWell { .. })
        {
            return Err(Error::WrongVariant {
                expected: "square-well pinning for the auxiliary sampler",
                found: self.pinning.variant_name(),
            });
        }
        Ok(())
    }
}

/// What an observable sees at measurement time.
pub struct ProbeState<'a> {
    pub heights: &'a [f64],
    /// Pinned set of the auxiliary sampler; `None` for the other samplers.
    pub pinned: Option<&'a PinnedSet>,
    pub pinning: &'a PinningSpec,
}

impl ProbeState<'_> {
    /// Probability that site `j` belongs to the pinned set given the current
    /// state: an exact indicator for δ-pinning and the auxiliary sampler, the
    /// conditional probability `(1 − e^{−ε})·1{|h_j| ≤ a}` for plain Metropolis.
    pub fn pin_probability(&self, j: usize) -> f64 {
        if let Some(a) = self.pinned {
            return f64::from(u8::from(a.contains(j)));
        }
        match *self.pinning {
            PinningSpec::Delta { .. } => f64::from(u8::from(self.heights[j] == 0.0)),
            PinningSpec::SquareWell {
                strength,
                half_width,
            } if self.heights[j].abs() <= half_width => -(-strength).exp_m1(),
            _ => 0.0,
        }
    }

    /// `Prob[A ∩ B = ∅ | state]`.
    pub fn avoid_probability(&self, b: &PinnedSet) -> f64 {
        b.iter().map(|j| 1.0 - self.pin_probability(j)).product()
    }
}

pub type ProbeFn = Arc<dyn Fn(&ProbeState<'_>, &mut [f64]) + Send + Sync>;

/// A measured quantity; `Vector` probes emit several series at once.
#[derive(Clone)]
pub enum Probe {
    Height(usize),
    Square(usize),
    Product(usize, usize),
    Abs(usize),
    Exceeds(usize, f64),
    Within(usize, f64),
    Pinned(usize),
    /// Indicator (or conditional probability) that the pinned set misses `B`.
    Avoids(PinnedSet),
    /// `(Σ α_i h_i)²`.
    LinearSquare(Vec<(usize, f64)>),
    Vector { names: Vec<String>, f: ProbeFn },
}

impl Probe {
    pub fn vector(names: Vec<String>, f: impl Fn(&ProbeState<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        Probe::Vector {
            names,
            f: Arc::new(f),
        }
    }

    pub fn scalar(name: impl Into<String>, f: impl Fn(&ProbeState<'_>) -> f64 + Send + Sync + 'static) -> Self {
        Probe::Vector {
            names: vec![name.into()],
            f: Arc::new(move |s, out| out[0] = f(s)),
        }
    }

    pub fn names(&self) -> Vec<String> {
        match self {
            Probe::Height(i) => vec![format!("h[{i}]")],
            Probe::Square(i) => vec![format!("h[{i}]^2")],
            Probe::Product(i, j) => vec![format!("h[{i}]*h[{j}]")],
            Probe::Abs(i) => vec![format!("|h[{i}]|")],
            Probe::Exceeds(i, t) => vec![format!("1{{h[{i}]>{t}}}")],
            Probe::Within(i, a) => vec![format!("1{{|h[{i}]|<={a}}}")],
            Probe::Pinned(i) => vec![format!("pinned[{i}]")],
            Probe::Avoids(b) => vec![format!("avoid{:?}", b.iter().collect::<Vec<_>>())],
            Probe::LinearSquare(a) => vec![format!("<alpha,h>^2[{}]", a.len())],
            Probe::Vector { names, .. } => names.clone(),
        }
    }

    fn width(&self) -> usize {
        match self {
            Probe::Vector { names, .. } => names.len(),
            _ => 1,
        }
    }

    fn measure(&self, s: &ProbeState<'_>, out: &mut [f64]) {
        let h = s.heights;
        let ind = |b: bool| f64::from(u8::from(b));
        match self {
            Probe::Height(i) => out[0] = h[*i],
            Probe::Square(i) => out[0] = h[*i] * h[*i],
            Probe::Product(i, j) => out[0] = h[*i] * h[*j],
            Probe::Abs(i) => out[0] = h[*i].abs(),
            Probe::Exceeds(i, t) => out[0] = ind(h[*i] > *t),
            Probe::Within(i, a) => out[0] = ind(h[*i].abs() <= *a),
            Probe::Pinned(i) => out[0] = s.pin_probability(*i),
            Probe::Avoids(b) => out[0] = s.avoid_probability(b),
            Probe::LinearSquare(a) => {
                let v: f64 = a.iter().map(|&(i, w)| w * h[i]).sum();
                out[0] = v * v;
            }
            Probe::Vector { f, .. } => f(s, out),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainResult {
    pub names: Vec<String>,
    pub estimates: Vec<Estimate>,
    pub replica_estimates: Vec<Vec<Estimate>>,
    pub acceptance: f64,
    pub proposal_width: Vec<f64>,
    #[serde(skip)]
    pub series: Vec<Vec<Vec<f64>>>,
    #[serde(skip)]
    pub final_states: Vec<Vec<f64>>,
}

impl ChainResult {
    pub fn estimate(&self, name: &str) -> Option<Estimate> {
        self.names.iter().position(|n| n == name).map(|k| self.estimates[k])
    }

    /// Writes the raw series as `sweep,observable,value` rows. With several
    /// replicas the observable name carries a `#r<k>` suffix.
    pub fn write_series_csv<W: Write>(&self, mut w: W, thin: usize) -> Result<()> {
        writeln!(w, "sweep,observable,value")?;
        let tag = self.series.len() > 1;
        for (r, rep) in self.series.iter().enumerate() {
            for (k, s) in rep.iter().enumerate() {
                let name = if tag {
                    format!("{}#r{r}", self.names[k])
                } else {
                    self.names[k].clone()
                };
                for (t, v) in s.iter().enumerate() {
                    writeln!(w, "{},{},{}", t * thin, csv_field(&name), v)?;
                }
            }
        }
        Ok(())
    }

    pub fn estimates_json(&self) -> Result<String> {
        let rows: Vec<_> = self
            .names
            .iter()
            .zip(&self.estimates)
            .map(|(n, e)| serde_json::json!({ "observable": n, "estimate": e }))
            .collect();
        Ok(serde_json::to_string_pretty(&rows)?)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

struct ReplicaRun {
    series: Vec<Vec<f64>>,
    acceptance: f64,
    sigma: f64,
    state: Vec<f64>,
}

/// Runs all replicas (concurrently) and pools their estimates.
pub fn run_chain(config: &ChainConfig, probes: &[Probe]) -> Result<ChainResult> {
    config.validate()?;
    let model = LocalModel::new(&config.lattice, &config.spec);
    let names: Vec<String> = probes.iter().flat_map(Probe::names).collect();
    let runs: Vec<ReplicaRun> = (0..config.schedule.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, &model, probes, r as u64))
        .collect::<Result<_>>()?;

    let n_obs = names.len();
    let mut replica_estimates = Vec::with_capacity(runs.len());
    for run in &runs {
        replica_estimates.push(
            run.series
                .iter()
                .map(|s| lenient_estimate(s))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let estimates = (0..n_obs)
        .map(|k| {
            let parts: Vec<Estimate> = replica_estimates.iter().map(|r| r[k]).collect();
            let all: Vec<f64> = runs.iter().flat_map(|r| r.series[k].iter().copied()).collect();
            let m = all.iter().sum::<f64>() / all.len() as f64;
            let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len().max(2) - 1) as f64;
            merge_replicas(&parts, var)
        })
        .collect();
    Ok(ChainResult {
        names,
        estimates,
        replica_estimates,
        acceptance: runs.iter().map(|r| r.acceptance).sum::<f64>() / runs.len() as f64,
        proposal_width: runs.iter().map(|r| r.sigma).collect(),
        series: runs.iter().map(|r| r.series.clone()).collect(),
        final_states: runs.into_iter().map(|r| r.state).collect(),
    })
}

fn run_replica(config: &ChainConfig, model: &LocalModel, probes: &[Probe], replica: u64) -> Result<ReplicaRun> {
    let s = &config.schedule;
    let n = config.lattice.len();
    let mut h = vec![0.0; n];
    let mut pinned = PinnedSet::empty(n);
    let width: usize = probes.iter().map(Probe::width).sum();
    let mut series = vec![Vec::with_capacity(s.sweeps / s.thin + 1); width];
    let mut buf = vec![0.0; width];
    let mean_floor = if n == 0 {
        1.0
    } else {
        (0..n).map(|i| local_scale(model, i)).sum::<f64>() / n as f64
    };
    let mut sigma = s.proposal_width.unwrap_or(2.0 / mean_floor.sqrt());
    let tune = s.proposal_width.is_none();
    let (mut acc_sum, mut acc_count) = (0.0, 0usize);
    let (mut window_acc, mut window_n) = (0.0, 0usize);

    for sweep in 0..s.burn_in + s.sweeps {
        let mut rng = sweep_rng(s.seed, replica, sweep as u64);
        let acc = match (&config.pinning, s.algorithm) {
            (PinningSpec::Delta { log_weight }, _) => {
                for i in 0..n {
                    delta_site_update(&mut h, model, *log_weight, i, &mut rng)?;
                }
                1.0
            }
            (
                PinningSpec::SquareWell {
                    strength,
                    half_width,
                },
                Algorithm::Auxiliary,
            ) => auxiliary_pin_sweep(&mut h, &mut pinned, model, *strength, *half_width, sigma, &mut rng, sweep)?,
            (p, _) => metropolis_sweep(&mut h, model, p, sigma, &mut rng, sweep)?,
        };
        for _ in 0..s.overrelax {
            let walls = match (&config.pinning, s.algorithm) {
                (PinningSpec::SquareWell { half_width, .. }, Algorithm::Auxiliary) => Some((&pinned, *half_width)),
                _ => None,
            };
            let pin = if walls.is_some() {
                PinningSpec::Free
            } else {
                config.pinning
            };
            overrelax_sweep(&mut h, model, &pin, walls, &mut rng, sweep)?;
        }
        if sweep < s.burn_in {
            window_acc += acc;
            window_n += 1;
            if tune && window_n == 50 {
                let rate = window_acc / window_n as f64;
                if rate > 0.5 {
                    sigma *= 1.25;
                } else if rate < 0.3 {
                    sigma /= 1.25;
                }
                window_acc = 0.0;
                window_n = 0;
            }
            continue;
        }
        acc_sum += acc;
        acc_count += 1;
        if (sweep - s.burn_in) % s.thin == 0 {
            let state = ProbeState {
                heights: &h,
                pinned: (s.algorithm == Algorithm::Auxiliary).then_some(&pinned),
                pinning: &config.pinning,
            };
            let mut off = 0;
            for p in probes {
                let w = p.width();
                p.measure(&state, &mut buf[off..off + w]);
                off += w;
            }
            for (ser, v) in series.iter_mut().zip(&buf) {
                ser.push(*v);
            }
        }
    }
    Ok(ReplicaRun {
        series,
        acceptance: if acc_count == 0 { 1.0 } else { acc_sum / acc_count as f64 },
        sigma,
        state: h,
    })
}

fn local_scale(model: &LocalModel, site: usize) -> f64 {
    let h = vec![0.0; model.n_sites()];
    let e1 = model.local_energy(&h, site, 1.0);
    let e0 = model.local_energy(&h, site, 0.0);
    (2.0 * (e1 - e0)).max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, InteractionKind};

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    fn config(pinning: PinningSpec, seed: u64) -> ChainConfig {
        ChainConfig::new(
            build_lattice(1, 1, 0.0).unwrap(),
            unit(),
            pinning,
            Schedule {
                burn_in: 200,
                sweeps: 2_000,
                seed,
                ..Schedule::default()
            },
        )
    }

    #[test]
    fn same_seed_same_stream() {
        let probes = [Probe::Square(4), Probe::Product(3, 4)];
        let a = run_chain(&config(PinningSpec::Free, 5), &probes).unwrap();
        let b = run_chain(&config(PinningSpec::Free, 5), &probes).unwrap();
        assert_eq!(a.series, b.series);
        let c = run_chain(&config(PinningSpec::Free, 6), &probes).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn tuning_reaches_target_band() {
        let r = run_chain(&config(PinningSpec::Free, 1), &[Probe::Square(4)]).unwrap();
        assert!(r.acceptance > 0.25 && r.acceptance < 0.55, "{}", r.acceptance);
    }

    #[test]
    fn auxiliary_needs_square_well() {
        let mut c = config(PinningSpec::Free, 1);
        c.schedule.algorithm = Algorithm::Auxiliary;
        assert!(run_chain(&c, &[]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut c = config(PinningSpec::Free, 1);
        c.schedule.replicas = 1;
        c.schedule.sweeps = 3;
        let r = run_chain(&c, &[Probe::Height(0)]).unwrap();
        let mut out = Vec::new();
        r.write_series_csv(&mut out, 1).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("sweep,observable,value\n0,h[0],"));
    }
}
