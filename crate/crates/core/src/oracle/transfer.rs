//! Transfer-operator marginals for nearest-neighbour chains.

use super::quadrature::{gauss_legendre, Observable, QuadratureRule, QuadratureScheme};
use super::result::{ExactResult, ExactValue, NamedValue};
use crate::error::{Error, Result};
use crate::model::{InteractionSpec, Offset, PinningSpec, Potential};

struct ChainGrid {
    nodes: Vec<f64>,
    /// quadrature weight times the pinning factor
    weights: Vec<f64>,
}

/// Exact single-site marginals on the chain of `n` interior sites with both
/// ends attached to the boundary height.
///
/// The kernel `e^{−Ψ(x−y)}` is discretised on one grid shared by every site;
/// δ-pinning adds an atom node at zero with weight `e^J`.
pub fn transfer_chain(
    n: usize,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    boundary_value: f64,
    observables: &[Observable],
    scheme: QuadratureScheme,
) -> Result<ExactResult> {
    scheme.validate()?;
    pinning.validate()?;
    if spec.range() != 1 {
        return Err(Error::WrongVariant {
            expected: "nearest-neighbour interaction",
            found: "longer-range interaction",
        });
    }
    let pot = spec
        .potential(Offset(1, 0))
        .ok_or_else(|| Error::InvalidInteraction("chain needs the (1, 0) offset".into()))?
        .clone();
    for o in observables {
        match o {
            Observable::Product(i, j) if i != j => {
                return Err(Error::WrongVariant {
                    expected: "single-site observable",
                    found: "two-site product",
                })
            }
            Observable::Custom { .. } => {
                return Err(Error::WrongVariant {
                    expected: "single-site observable",
                    found: "custom",
                })
            }
            _ => {}
        }
    }
    let half_width = match scheme.half_width {
        Some(h) => h,
        None => {
            // the midpoint variance of the comparison chain is (n+1)/4 / Ψ''_min
            let var = (n as f64 + 1.0) / 4.0 / spec.floor();
            (12.0 / (2.0 * spec.floor()).sqrt()).max(8.0 * var.sqrt())
        }
    };
    let fine = sweep(n, &pot, pinning, boundary_value, observables, scheme.points_per_dim, half_width, scheme.rule)?;
    let coarse = sweep(n, &pot, pinning, boundary_value, observables, scheme.points_per_dim / 2, half_width, scheme.rule)?;

    let moments = observables
        .iter()
        .enumerate()
        .map(|(k, o)| NamedValue {
            name: o.label(),
            value: ExactValue {
                value: fine.values[k],
                error_estimate: (fine.values[k] - coarse.values[k]).abs(),
            },
        })
        .collect();
    let z = fine.log_z.exp();
    Ok(ExactResult {
        method: "transfer-operator".into(),
        params: serde_json::json!({
            "chain_length": n,
            "points_per_dim": scheme.points_per_dim,
            "half_width": half_width,
            "boundary_value": boundary_value,
            "pinning": pinning,
            "interaction": spec.kind_name(),
        }),
        partition: ExactValue {
            value: z,
            error_estimate: z * (fine.log_z - coarse.log_z).abs(),
        },
        log_partition: fine.log_z,
        moments,
        pinned_law: None,
        avoidance: Vec::new(),
    })
}

struct Sweep {
    log_z: f64,
    values: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    n: usize,
    pot: &Potential,
    pinning: &PinningSpec,
    b: f64,
    observables: &[Observable],
    points: usize,
    half_width: f64,
    rule: QuadratureRule,
) -> Result<Sweep> {
    if n == 0 {
        return Ok(Sweep {
            log_z: 0.0,
            values: vec![0.0; observables.len()],
        });
    }
    let grid = chain_grid(pinning, b, points, half_width, rule, observables);
    let m = grid.nodes.len();
    let mut kernel = vec![0.0; m * m];
    for (x, &hx) in grid.nodes.iter().enumerate() {
        for (y, &hy) in grid.nodes.iter().enumerate() {
            kernel[x * m + y] = (-pot.value(hx - hy)).exp();
        }
    }
    let end: Vec<f64> = grid.nodes.iter().map(|&x| (-pot.value(x - b)).exp()).collect();

    // left[k](x): weight of sites 0..=k with h_k = x, normalised; log scale kept apart
    let mut left = vec![vec![0.0; m]; n];
    let mut left_log = vec![0.0; n];
    for x in 0..m {
        left[0][x] = grid.weights[x] * end[x];
    }
    left_log[0] = normalise(&mut left[0]);
    for k in 1..n {
        let (prev, cur) = left.split_at_mut(k);
        let prev = &prev[k - 1];
        for y in 0..m {
            let mut s = 0.0;
            for x in 0..m {
                s += prev[x] * kernel[x * m + y];
            }
            cur[0][y] = s * grid.weights[y];
        }
        left_log[k] = left_log[k - 1] + normalise(&mut cur[0]);
    }
    // right[k](x): weight of sites k+1..n given h_k = x
    let mut right = vec![vec![0.0; m]; n];
    let mut right_log = vec![0.0; n];
    right[n - 1].copy_from_slice(&end);
    right_log[n - 1] = normalise(&mut right[n - 1]);
    for k in (0..n - 1).rev() {
        let (cur, next) = right.split_at_mut(k + 1);
        let next = &next[0];
        for x in 0..m {
            let mut s = 0.0;
            for y in 0..m {
                s += kernel[x * m + y] * grid.weights[y] * next[y];
            }
            cur[k][x] = s;
        }
        right_log[k] = right_log[k + 1] + normalise(&mut cur[k]);
    }
    let z_last: f64 = (0..m).map(|x| left[n - 1][x] * right[n - 1][x]).sum();
    let log_z = z_last.ln() + left_log[n - 1] + right_log[n - 1];

    let mut values = Vec::with_capacity(observables.len());
    for o in observables {
        let (site, f): (usize, Box<dyn Fn(f64) -> f64>) = match *o {
            Observable::Mean(i) => (i, Box::new(|x| x)),
            Observable::Product(i, _) => (i, Box::new(|x| x * x)),
            Observable::Abs(i) => (i, Box::new(f64::abs)),
            Observable::Exceeds(i, t) => (i, Box::new(move |x| f64::from(u8::from(x > t)))),
            Observable::Within(i, a) => (i, Box::new(move |x| f64::from(u8::from(x.abs() <= a)))),
            Observable::Custom { .. } => unreachable!(),
        };
        if site >= n {
            return Err(Error::param("site", format!("{site} outside chain of length {n}")));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for x in 0..m {
            let w = left[site][x] * right[site][x];
            num += w * f(grid.nodes[x]);
            den += w;
        }
        values.push(num / den);
    }
    Ok(Sweep { log_z, values })
}

fn normalise(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
    s.ln()
}

fn chain_grid(
    pinning: &PinningSpec,
    b: f64,
    points: usize,
    half_width: f64,
    rule: QuadratureRule,
    observables: &[Observable],
) -> ChainGrid {
    let (lo, hi) = (b.min(0.0) - half_width, b.max(0.0) + half_width);
    let mut cuts = vec![lo, hi, 0.0];
    if let PinningSpec::SquareWell { half_width: a, .. } = *pinning {
        cuts.extend([-a, a]);
    }
    for o in observables {
        match *o {
            Observable::Exceeds(_, t) => cuts.push(t),
            Observable::Within(_, a) => cuts.extend([-a, a]),
            _ => {}
        }
    }
    cuts.retain(|&x| x >= lo && x <= hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        let k = ((points as f64 * len / (hi - lo)).round() as usize).max(2);
        match rule {
            QuadratureRule::Midpoint => {
                let h = len / k as f64;
                for j in 0..k {
                    nodes.push(w[0] + (j as f64 + 0.5) * h);
                    weights.push(h);
                }
            }
            QuadratureRule::GaussLegendre => {
                for (x, wt) in gauss_legendre(k) {
                    nodes.push(w[0] + 0.5 * len * (x + 1.0));
                    weights.push(0.5 * len * wt);
                }
            }
        }
    }
    match *pinning {
        PinningSpec::SquareWell {
            strength,
            half_width: a,
        } => {
            let ew = strength.exp();
            for (x, w) in nodes.iter().zip(weights.iter_mut()) {
                if x.abs() <= a {
                    *w *= ew;
                }
            }
        }
        PinningSpec::Delta { log_weight } => {
            nodes.push(0.0);
            weights.push(log_weight.exp());
        }
        PinningSpec::Free => {}
    }
    ChainGrid { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_interaction, InteractionKind, Lattice};
    use crate::oracle::{gaussian_covariance, ExactMeasure, PinnedSet};
    use std::f64::consts::PI;

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    #[test]
    fn single_site_matches_quadrature() {
        let lat = Lattice::chain(1, 1, 0.0).unwrap();
        let obs = [Observable::second_moment(0)];
        let t = transfer_chain(1, &unit(), &PinningSpec::Free, 0.0, &obs, QuadratureScheme::default()).unwrap();
        let q = ExactMeasure::new(&lat, &unit(), QuadratureScheme::default())
            .unwrap()
            .evaluate(&obs)
            .unwrap();
        assert!((t.moment_at(0).value - q.moment_at(0).value).abs() < 1e-10);
        // two bonds of x²/2: var 1/2
        assert!((t.moment_at(0).value - 0.5).abs() < 1e-10);
        assert!((t.partition.value - PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn two_sites() {
        let t = transfer_chain(2, &unit(), &PinningSpec::Free, 0.0, &[Observable::second_moment(0)], QuadratureScheme::default())
            .unwrap();
        assert!((t.moment_at(0).value - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn long_free_chain_variance_is_linear() {
        let n = 64;
        let lat = Lattice::chain(n, 1, 0.0).unwrap();
        let cov = gaussian_covariance(&lat, &unit(), &PinnedSet::empty(n)).unwrap();
        let scheme = QuadratureScheme::with_points(600);
        let t = transfer_chain(n, &unit(), &PinningSpec::Free, 0.0, &[Observable::second_moment(32)], scheme).unwrap();
        let exact = cov.cov(32, 32);
        assert!((exact - 33.0 * 32.0 / 65.0).abs() < 1e-9);
        assert!((t.moment_at(0).value - exact).abs() < 1e-3 * exact, "{} vs {exact}", t.moment_at(0).value);
    }

    #[test]
    fn delta_atom_single_site() {
        let t = transfer_chain(1, &unit(), &PinningSpec::delta(0.0).unwrap(), 0.0, &[Observable::second_moment(0)], QuadratureScheme::default())
            .unwrap();
        let s = PI.sqrt();
        assert!((t.moment_at(0).value - 0.5 * s / (1.0 + s)).abs() < 1e-9);
    }

    #[test]
    fn rejects_long_range() {
        let spec = make_interaction(InteractionKind::Gaussian {
            couplings: Offset::square(2).into_iter().map(|k| (k, 0.5)).collect(),
        })
        .unwrap();
        assert!(transfer_chain(4, &spec, &PinningSpec::Free, 0.0, &[], QuadratureScheme::default()).is_err());
    }
}
