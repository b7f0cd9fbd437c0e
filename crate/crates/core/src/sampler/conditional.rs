//! Single-site conditional expectations given all other heights, used as
//! Rao–Blackwellised estimators.

use statrs::function::erf::erfc;

use super::moves::{adaptive_gk15, local_mode, pin_probability, LocalModel};
use crate::error::{Error, Result};
use crate::model::PinningSpec;

/// A function of one height whose conditional expectation can be computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SiteFunction {
    Mean,
    Square,
    Abs,
    /// `1{h > T}`
    Exceeds(f64),
    /// `1{|h| ≤ a}`
    Within(f64),
}

impl SiteFunction {
    fn eval(self, x: f64) -> f64 {
        let ind = |b: bool| f64::from(u8::from(b));
        match self {
            SiteFunction::Mean => x,
            SiteFunction::Square => x * x,
            SiteFunction::Abs => x.abs(),
            SiteFunction::Exceeds(t) => ind(x > t),
            SiteFunction::Within(a) => ind(x.abs() <= a),
        }
    }
}

/// `E[f(h_site) | h_j, j ≠ site]` for each `f`, under the measure with
/// interaction `model` and the given pinning. The current value of
/// `heights[site]` is ignored.
pub fn conditional_expectations(
    model: &LocalModel,
    pinning: &PinningSpec,
    heights: &[f64],
    site: usize,
    fs: &[SiteFunction],
) -> Result<Vec<f64>> {
    if let Some(coef) = &model.quad_coef {
        let c = model.couplings();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for e in c.bond_range(site) {
            let hb = c.partner_height(heights, e);
            s0 += coef[e];
            s1 += coef[e] * hb;
            s2 += coef[e] * hb * hb;
        }
        if !(s0 > 0.0) {
            return Err(Error::Envelope {
                site,
                reason: "site has no bonds".into(),
            });
        }
        return Ok(gaussian_conditional(pinning, s0, s1, s2, fs));
    }
    numeric_conditional(model, pinning, heights, site, fs)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `(∫ φ, ∫ x φ, ∫ x² φ)` of `N(m, s²)` over `[l, u]`.
fn interval_moments(m: f64, s: f64, l: f64, u: f64) -> (f64, f64, f64) {
    if u <= l {
        return (0.0, 0.0, 0.0);
    }
    let (a, b) = ((l - m) / s, (u - m) / s);
    let p = if a > 0.0 {
        normal_sf(a) - normal_sf(b)
    } else {
        normal_sf(-b) - normal_sf(-a)
    };
    let (pa, pb) = (normal_pdf(a), normal_pdf(b));
    let za = if a.is_finite() { a * pa } else { 0.0 };
    let zb = if b.is_finite() { b * pb } else { 0.0 };
    let z1 = pa - pb;
    let z2 = p + za - zb;
    (p, m * p + s * z1, m * m * p + 2.0 * m * s * z1 + s * s * z2)
}

/// `∫_I f φ` for the normal `N(m, s²)` restricted to `[l, u]`.
fn interval_expectation(f: SiteFunction, m: f64, s: f64, l: f64, u: f64) -> f64 {
    match f {
        SiteFunction::Mean => interval_moments(m, s, l, u).1,
        SiteFunction::Square => interval_moments(m, s, l, u).2,
        SiteFunction::Abs => {
            interval_moments(m, s, l.max(0.0), u).1 - interval_moments(m, s, l, u.min(0.0)).1
        }
        SiteFunction::Exceeds(t) => interval_moments(m, s, l.max(t), u).0,
        SiteFunction::Within(a) => interval_moments(m, s, l.max(-a), u.min(a)).0,
    }
}

fn gaussian_conditional(pinning: &PinningSpec, s0: f64, s1: f64, s2: f64, fs: &[SiteFunction]) -> Vec<f64> {
    let m = s1 / s0;
    let s = (0.5 / s0).sqrt();
    let inf = f64::INFINITY;
    match *pinning {
        PinningSpec::Free => fs.iter().map(|&f| interval_expectation(f, m, s, -inf, inf)).collect(),
        PinningSpec::SquareWell {
            strength,
            half_width: a,
        } => {
            let boost = strength.exp_m1();
            let z = 1.0 + boost * interval_moments(m, s, -a, a).0;
            fs.iter()
                .map(|&f| (interval_expectation(f, m, s, -inf, inf) + boost * interval_expectation(f, m, s, -a, a)) / z)
                .collect()
        }
        PinningSpec::Delta { log_weight } => {
            let e_min = s2 - s1 * s1 / s0;
            let log_cont = -e_min + 0.5 * (std::f64::consts::PI / s0).ln();
            let p = pin_probability(log_weight - s2, log_cont);
            fs.iter()
                .map(|&f| p * f.eval(0.0) + (1.0 - p) * interval_expectation(f, m, s, -inf, inf))
                .collect()
        }
    }
}

fn numeric_conditional(
    model: &LocalModel,
    pinning: &PinningSpec,
    heights: &[f64],
    site: usize,
    fs: &[SiteFunction],
) -> Result<Vec<f64>> {
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
    let (lo, hi) = (mode - radius, mode + radius);
    let (boost, well) = match *pinning {
        PinningSpec::SquareWell {
            strength,
            half_width,
        } => (strength.exp(), half_width),
        _ => (1.0, -1.0),
    };
    let weight = |x: f64| {
        let w = (-(model.local_energy(heights, site, x) - e_mode)).exp();
        if x.abs() <= well {
            w * boost
        } else {
            w
        }
    };
    let mut cuts = vec![lo, hi];
    if well >= 0.0 {
        cuts.extend([-well, well]);
    }
    for f in fs {
        match *f {
            SiteFunction::Abs => cuts.push(0.0),
            SiteFunction::Exceeds(t) => cuts.push(t),
            SiteFunction::Within(a) => cuts.extend([-a, a]),
            _ => {}
        }
    }
    cuts.retain(|&x| x >= lo && x <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let integrate = |g: &dyn Fn(f64) -> f64| -> f64 {
        pieces
            .iter()
            .map(|&(a, b)| adaptive_gk15(&|x| g(x) * weight(x), a, b, 1e-10))
            .sum()
    };
    let z = integrate(&|_| 1.0);
    let p = match *pinning {
        PinningSpec::Delta { log_weight } => {
            let log_atom = log_weight - (model.local_energy(heights, site, 0.0) - e_mode);
            pin_probability(log_atom, z.ln())
        }
        _ => 0.0,
    };
    Ok(fs
        .iter()
        .map(|&f| p * f.eval(0.0) + (1.0 - p) * integrate(&|x| f.eval(x)) / z)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_interaction, CustomPotential, InteractionKind, Lattice, Offset};

    fn models() -> (LocalModel, LocalModel) {
        let lat = Lattice::chain(3, 1, 0.3).unwrap();
        let g = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let c = make_interaction(InteractionKind::Custom {
            terms: Offset::nearest_neighbors()
                .into_iter()
                .map(|k| (k, CustomPotential::new(|x| 0.5 * x * x, |x| x, |_| 1.0)))
                .collect(),
            floor: 1.0,
            ceiling: Some(1.0),
        })
        .unwrap();
        (LocalModel::new(&lat, &g), LocalModel::new(&lat, &c))
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let (g, c) = models();
        let h = [0.4, -0.2, 1.1];
        let fs = [
            SiteFunction::Mean,
            SiteFunction::Square,
            SiteFunction::Abs,
            SiteFunction::Exceeds(0.9),
            SiteFunction::Within(0.25),
        ];
        for pin in [
            PinningSpec::Free,
            PinningSpec::square_well(1.5, 0.3).unwrap(),
            PinningSpec::delta(0.7).unwrap(),
        ] {
            let a = conditional_expectations(&g, &pin, &h, 1, &fs).unwrap();
            let b = conditional_expectations(&c, &pin, &h, 1, &fs).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{pin:?}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn free_gaussian_moments() {
        let (g, _) = models();
        let h = [0.0, 0.0, 0.0];
        // two bonds of x²/2 around neighbours at 0: N(0, 1/2)
        let r = conditional_expectations(&g, &PinningSpec::Free, &h, 1, &[SiteFunction::Mean, SiteFunction::Square])
            .unwrap();
        assert!(r[0].abs() < 1e-15);
        assert!((r[1] - 0.5).abs() < 1e-14);
    }
}
