//! Single-site updates: Metropolis with symmetric uniform proposals, metropolized
//! over-relaxation, the exact δ-pinning heat bath, and the auxiliary pinned-set
//! sweep for the square well.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Couplings, InteractionSpec, Lattice, PinningSpec};
use crate::oracle::PinnedSet;

/// Per-lattice tables shared by every move.
#[derive(Clone, Debug)]
pub struct LocalModel {
    couplings: Couplings,
    /// `Ψ_b(x) = coef_b x²` per bond when the interaction is Gaussian.
    pub(crate) quad_coef: Option<Vec<f64>>,
    /// Guaranteed lower bound on the curvature of the local energy of each site.
    pub(crate) curvature_floor: Vec<f64>,
    /// Weights defining the reflection centre of over-relaxation.
    relax_weight: Vec<f64>,
}

impl LocalModel {
    pub fn new(lattice: &Lattice, spec: &InteractionSpec) -> Self {
        let couplings = Couplings::new(lattice, spec);
        let floors: Vec<f64> = spec.potentials().iter().map(|p| p.curvature_floor()).collect();
        let n_bonds = (0..lattice.len())
            .map(|i| couplings.bond_range(i).end)
            .max()
            .unwrap_or(0);
        let mut relax_weight = vec![0.0; n_bonds];
        let mut curvature_floor = vec![0.0; lattice.len()];
        for i in 0..lattice.len() {
            for e in couplings.bond_range(i) {
                let f = floors[couplings.bond_potential_index(e)];
                curvature_floor[i] += f;
                relax_weight[e] = couplings.bond_potential(e).second(0.0);
            }
        }
        let quad_coef = spec.is_gaussian().then(|| {
            (0..n_bonds)
                .map(|e| 0.5 * couplings.bond_potential(e).second(0.0))
                .collect()
        });
        LocalModel {
            couplings,
            quad_coef,
            curvature_floor,
            relax_weight,
        }
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn n_sites(&self) -> usize {
        self.couplings.n_sites()
    }

    pub fn is_gaussian(&self) -> bool {
        self.quad_coef.is_some()
    }

    #[inline]
    pub fn local_energy(&self, heights: &[f64], site: usize, x: f64) -> f64 {
        self.couplings.local_energy(heights, site, x)
    }

    #[inline]
    fn local_slope(&self, heights: &[f64], site: usize, x: f64) -> f64 {
        let mut g = 0.0;
        for e in self.couplings.bond_range(site) {
            g += self
                .couplings
                .bond_potential(e)
                .first(x - self.couplings.partner_height(heights, e));
        }
        g
    }

    #[inline]
    fn local_curvature(&self, heights: &[f64], site: usize, x: f64) -> f64 {
        let mut g = 0.0;
        for e in self.couplings.bond_range(site) {
            g += self
                .couplings
                .bond_potential(e)
                .second(x - self.couplings.partner_height(heights, e));
        }
        g
    }

    /// Weighted neighbour mean used as the reflection centre; independent of `h_site`.
    #[inline]
    fn relax_centre(&self, heights: &[f64], site: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for e in self.couplings.bond_range(site) {
            let w = self.relax_weight[e];
            num += w * self.couplings.partner_height(heights, e);
            den += w;
        }
        num / den
    }
}

#[inline]
fn accept<R: Rng>(rng: &mut R, delta: f64) -> bool {
    delta <= 0.0 || rng.random::<f64>() < (-delta).exp()
}

fn check_finite(delta: f64, site: usize, sweep: usize) -> Result<()> {
    if delta.is_nan() || delta == f64::NEG_INFINITY {
        Err(Error::NonFiniteEnergy { site, sweep })
    } else {
        Ok(())
    }
}

/// One raster-order pass of Metropolis with proposals `h + σ·U(−1, 1)`,
/// targeting `exp(−H − Σ V)`. Returns the acceptance rate.
pub fn metropolis_sweep<R: Rng>(
    heights: &mut [f64],
    model: &LocalModel,
    pinning: &PinningSpec,
    sigma: f64,
    rng: &mut R,
    sweep: usize,
) -> Result<f64> {
    if let PinningSpec::Delta { .. } = pinning {
        return Err(Error::WrongVariant {
            expected: "free or square-well pinning",
            found: "delta",
        });
    }
    let n = heights.len();
    let mut accepted = 0usize;
    for i in 0..n {
        let x = heights[i];
        let y = x + sigma * (2.0 * rng.random::<f64>() - 1.0);
        let delta = model.local_energy(heights, i, y) - model.local_energy(heights, i, x)
            + pinning.potential(y)
            - pinning.potential(x);
        check_finite(delta, i, sweep)?;
        if accept(rng, delta) {
            heights[i] = y;
            accepted += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { accepted as f64 / n as f64 })
}

/// Metropolis for the free measure with hard walls `|h_j| ≤ a` on `walls`;
/// proposals crossing a wall are rejected.
pub fn metropolis_sweep_walls<R: Rng>(
    heights: &mut [f64],
    model: &LocalModel,
    walls: &PinnedSet,
    half_width: f64,
    sigma: f64,
    rng: &mut R,
    sweep: usize,
) -> Result<f64> {
    let n = heights.len();
    let mut accepted = 0usize;
    for i in 0..n {
        let x = heights[i];
        let y = x + sigma * (2.0 * rng.random::<f64>() - 1.0);
        let u: f64 = rng.random();
        if walls.contains(i) && y.abs() > half_width {
            continue;
        }
        let delta = model.local_energy(heights, i, y) - model.local_energy(heights, i, x);
        check_finite(delta, i, sweep)?;
        if delta <= 0.0 || u < (-delta).exp() {
            heights[i] = y;
            accepted += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { accepted as f64 / n as f64 })
}

/// Reflection `h → 2m − h` about the weighted neighbour mean, accepted with the
/// Metropolis ratio of the full local weight. Sites held exactly at zero under
/// δ-pinning and proposals crossing a wall are left alone.
pub fn overrelax_sweep<R: Rng>(
    heights: &mut [f64],
    model: &LocalModel,
    pinning: &PinningSpec,
    walls: Option<(&PinnedSet, f64)>,
    rng: &mut R,
    sweep: usize,
) -> Result<f64> {
    let delta_pinning = matches!(pinning, PinningSpec::Delta { .. });
    let n = heights.len();
    let mut accepted = 0usize;
    for i in 0..n {
        let x = heights[i];
        let u: f64 = rng.random();
        if delta_pinning && x == 0.0 {
            continue;
        }
        let y = 2.0 * model.relax_centre(heights, i) - x;
        if let Some((w, a)) = walls {
            if w.contains(i) && y.abs() > a {
                continue;
            }
        }
        let mut delta = model.local_energy(heights, i, y) - model.local_energy(heights, i, x);
        if !delta_pinning {
            delta += pinning.potential(y) - pinning.potential(x);
        }
        check_finite(delta, i, sweep)?;
        if delta <= 0.0 || u < (-delta).exp() {
            heights[i] = y;
            accepted += 1;
        }
    }
    Ok(if n == 0 { 1.0 } else { accepted as f64 / n as f64 })
}

/// Outcome of one exact single-site δ-pinning update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaUpdate {
    pub height: f64,
    pub pinned: bool,
    pub pin_probability: f64,
}

/// Samples `h_site` from its exact conditional law under the δ-pinning measure:
/// an atom at zero with weight `e^J e^{−E(0)}` and a continuous part with weight
/// `∫ e^{−E(h)} dh`. Writes the new height into `heights`.
pub fn delta_site_update<R: Rng>(
    heights: &mut [f64],
    model: &LocalModel,
    log_weight: f64,
    site: usize,
    rng: &mut R,
) -> Result<DeltaUpdate> {
    let c = &model.couplings;
    let (log_cont, sampler) = if let Some(coef) = &model.quad_coef {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for e in c.bond_range(site) {
            let hb = c.partner_height(heights, e);
            s0 += coef[e];
            s1 += coef[e] * hb;
            s2 += coef[e] * hb * hb;
        }
        let m = s1 / s0;
        let e_min = s2 - s1 * s1 / s0;
        let log_cont = -e_min + 0.5 * (std::f64::consts::PI / s0).ln();
        let log_atom = log_weight - s2;
        let p = pin_probability(log_atom, log_cont);
        let pinned = rng.random::<f64>() < p;
        let h = if pinned {
            0.0
        } else {
            let z: f64 = rng.sample(StandardNormal);
            m + z / (2.0 * s0).sqrt()
        };
        heights[site] = h;
        return Ok(DeltaUpdate {
            height: h,
            pinned,
            pin_probability: p,
        });
    } else {
        let cfloor = model.curvature_floor[site];
        if !(cfloor > 0.0) {
            return Err(Error::Envelope {
                site,
                reason: format!("local curvature floor {cfloor} is not positive"),
            });
        }
        let mode = local_mode(heights, model, site)?;
        let e_mode = model.local_energy(heights, site, mode);
        let radius = (80.0 / cfloor).sqrt();
        let integral = adaptive_gk15(
            &|x| (-(model.local_energy(heights, site, x) - e_mode)).exp(),
            mode - radius,
            mode + radius,
            1e-8,
        );
        (-e_mode + integral.ln(), (mode, e_mode, cfloor))
    };
    let log_atom = log_weight - model.local_energy(heights, site, 0.0);
    let p = pin_probability(log_atom, log_cont);
    let pinned = rng.random::<f64>() < p;
    let h = if pinned {
        0.0
    } else {
        let (mode, e_mode, cfloor) = sampler;
        let sd = 1.0 / cfloor.sqrt();
        let mut tries = 0;
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = mode + sd * z;
            let excess = model.local_energy(heights, site, x) - e_mode - 0.5 * cfloor * (x - mode).powi(2);
            if excess < -1e-9 * (1.0 + e_mode.abs()) {
                return Err(Error::Envelope {
                    site,
                    reason: format!("local energy below the curvature envelope by {:e}", -excess),
                });
            }
            if rng.random::<f64>() < (-excess.max(0.0)).exp() {
                break x;
            }
            tries += 1;
            if tries > 100_000 {
                return Err(Error::Envelope {
                    site,
                    reason: "rejection sampler made no progress".into(),
                });
            }
        }
    };
    heights[site] = h;
    Ok(DeltaUpdate {
        height: h,
        pinned,
        pin_probability: p,
    })
}

pub(crate) fn pin_probability(log_atom: f64, log_cont: f64) -> f64 {
    if log_atom == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 / (1.0 + (log_cont - log_atom).exp())
}

/// Minimiser of the (convex) local energy by safeguarded Newton.
pub(crate) fn local_mode(heights: &[f64], model: &LocalModel, site: usize) -> Result<f64> {
    let c = &model.couplings;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for e in c.bond_range(site) {
        let hb = c.partner_height(heights, e);
        lo = lo.min(hb);
        hi = hi.max(hb);
    }
    if lo > hi {
        return Err(Error::Envelope {
            site,
            reason: "site has no bonds".into(),
        });
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = model.local_slope(heights, site, x);
        let h2 = model.local_curvature(heights, site, x);
        if g.abs() <= 1e-13 * (1.0 + h2 * (1.0 + x.abs())) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - g / h2;
        x = if h2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS_K: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const GK_WEIGHTS_G: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS_K[7] * fc;
    let mut g = GK_WEIGHTS_G[3] * fc;
    for j in 0..7 {
        let x = h * GK_NODES[j];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS_K[j] * s;
        if j % 2 == 1 {
            g += GK_WEIGHTS_G[j / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss–Kronrod (7/15) integration to relative tolerance `rel_tol`.
pub fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut intervals = vec![(a, b, gk15(f, a, b))];
    for _ in 0..500 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= rel_tol * total.abs() {
            break;
        }
        let (k, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(f, lo, mid)));
        intervals.push((mid, hi, gk15(f, mid, hi)));
    }
    intervals.iter().map(|iv| iv.2 .0).sum()
}

/// Auxiliary pinned-set sweep for the square well: resample `A | h` site by
/// site, then one Metropolis pass of `h | A` under hard walls on `A`.
#[allow(clippy::too_many_arguments)]
pub fn auxiliary_pin_sweep<R: Rng>(
    heights: &mut [f64],
    pinned: &mut PinnedSet,
    model: &LocalModel,
    strength: f64,
    half_width: f64,
    sigma: f64,
    rng: &mut R,
    sweep: usize,
) -> Result<f64> {
    let p_in = -(-strength).exp_m1();
    for (j, &h) in heights.iter().enumerate() {
        let u: f64 = rng.random();
        if h.abs() <= half_width && u < p_in {
            pinned.insert(j);
        } else {
            pinned.remove(j);
        }
    }
    metropolis_sweep_walls(heights, model, pinned, half_width, sigma, rng, sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, InteractionKind};
    use crate::sampler::sweep_rng;

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    #[test]
    fn zero_width_proposals_change_nothing() {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let model = LocalModel::new(&lat, &unit());
        let mut h: Vec<f64> = (0..lat.len()).map(|i| (i as f64).sin()).collect();
        let before = h.clone();
        let mut rng = sweep_rng(1, 0, 0);
        let acc = metropolis_sweep(&mut h, &model, &PinningSpec::Free, 0.0, &mut rng, 0).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(h, before);
    }

    #[test]
    fn gaussian_pin_probability_single_site() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let model = LocalModel::new(&lat, &unit());
        let mut h = vec![0.3];
        let mut rng = sweep_rng(1, 0, 0);
        let u = delta_site_update(&mut h, &model, 0.0, 0, &mut rng).unwrap();
        let s = (std::f64::consts::PI / 2.0).sqrt();
        assert!((u.pin_probability - 1.0 / (1.0 + s)).abs() < 1e-14);
        let u = delta_site_update(&mut h, &model, f64::NEG_INFINITY, 0, &mut rng).unwrap();
        assert_eq!(u.pin_probability, 0.0);
        assert!(!u.pinned);
    }

    #[test]
    fn general_path_matches_gaussian_path() {
        use crate::model::{CustomPotential, Offset};
        let lat = build_lattice(1, 1, 0.4).unwrap();
        let custom = make_interaction(InteractionKind::Custom {
            terms: Offset::nearest_neighbors()
                .into_iter()
                .map(|k| (k, CustomPotential::new(|x| 0.5 * x * x, |x| x, |_| 1.0)))
                .collect(),
            floor: 1.0,
            ceiling: Some(1.0),
        })
        .unwrap();
        let g = LocalModel::new(&lat, &unit());
        let q = LocalModel::new(&lat, &custom);
        assert!(!q.is_gaussian());
        let h: Vec<f64> = (0..lat.len()).map(|i| 0.3 * (i as f64).cos()).collect();
        for site in 0..lat.len() {
            let mut rng = sweep_rng(2, 0, site as u64);
            let a = delta_site_update(&mut h.clone(), &g, 0.7, site, &mut rng).unwrap();
            let b = delta_site_update(&mut h.clone(), &q, 0.7, site, &mut rng).unwrap();
            assert!((a.pin_probability - b.pin_probability).abs() < 1e-8);
        }
    }

    #[test]
    fn gk15_integrates_gaussian() {
        let v = adaptive_gk15(&|x: f64| (-x * x).exp(), -10.0, 10.0, 1e-12);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn auxiliary_membership_rules() {
        let lat = build_lattice(1, 1, 0.0).unwrap();
        let model = LocalModel::new(&lat, &unit());
        let mut rng = sweep_rng(3, 0, 0);
        let mut a = PinnedSet::empty(lat.len());
        let mut h = vec![5.0; lat.len()];
        auxiliary_pin_sweep(&mut h, &mut a, &model, 1.0, 0.5, 0.0, &mut rng, 0).unwrap();
        assert!(a.is_empty());
        let mut hits = 0usize;
        let trials = 20_000;
        for t in 0..trials {
            let mut rng = sweep_rng(3, 1, t);
            let mut h = vec![0.0; lat.len()];
            auxiliary_pin_sweep(&mut h, &mut a, &model, 2f64.ln(), 0.5, 0.0, &mut rng, 0).unwrap();
            hits += a.len();
        }
        let frac = hits as f64 / (trials as f64 * lat.len() as f64);
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }
}
