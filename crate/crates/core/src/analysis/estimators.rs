//! Rao–Blackwellised probes: conditional expectations replace raw indicators
//! and products wherever the conditional law is available in closed form or
//! by one-dimensional quadrature.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::SparseSym;
use crate::model::{InteractionSpec, Lattice, Partner, PinningSpec};
use crate::oracle::{gaussian_precision, PinnedSet};
use crate::sampler::{conditional_expectations, LocalModel, Probe, ProbeState, SiteFunction};

/// Relative residual of the conditional covariance solves.
pub const PROBE_CG_TOLERANCE: f64 = 1e-10;

/// `E[f(h_site) | all other heights]` for each `f`; emits NaN if the
/// conditional law cannot be formed, which later fails the estimate.
pub fn conditional_probe(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    site: usize,
    fs: Vec<(String, SiteFunction)>,
) -> Probe {
    let model = Arc::new(LocalModel::new(lattice, spec));
    let pinning = *pinning;
    let (names, fs): (Vec<String>, Vec<SiteFunction>) = fs.into_iter().unzip();
    Probe::vector(names, move |s: &ProbeState<'_>, out: &mut [f64]| {
        match conditional_expectations(&model, &pinning, s.heights, site, &fs) {
            Ok(v) => out.copy_from_slice(&v),
            Err(_) => out.fill(f64::NAN),
        }
    })
}

/// Sites reachable from `start` through unpinned sites along coupled bonds,
/// with `start` itself treated as unpinned.
fn open_cluster(adjacency: &[Vec<usize>], heights: &[f64], start: usize, seen: &mut Vec<bool>) {
    seen.clear();
    seen.resize(heights.len(), false);
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(k) = stack.pop() {
        for &m in &adjacency[k] {
            if !seen[m] && heights[m] != 0.0 {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
}

/// `E[h_i h_j | rest] = E[h_i | rest]·E[h_j | rest]` for pairs that share no bond,
/// and `E[h_i | rest]·h_j` for pairs within interaction range.
///
/// Under δ-pinning the clusters of unpinned sites are independent and
/// symmetric given the pinned set, so a pair contributes only when `j` touches
/// the open cluster of `i` (both endpoints counted as open).
pub fn conditional_product_probe(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    pairs: Vec<(String, usize, usize)>,
) -> Probe {
    let model = Arc::new(LocalModel::new(lattice, spec));
    let pinning = *pinning;
    let range = spec.range();
    let separated: Vec<bool> = pairs
        .iter()
        .map(|&(_, i, j)| i != j && lattice.site(i).sup_dist(lattice.site(j)) > range)
        .collect();
    let adjacency = coupled_adjacency(lattice, spec);
    let clustered = matches!(pinning, PinningSpec::Delta { .. }) && lattice.boundary_value() == 0.0;
    let names = pairs.iter().map(|p| p.0.clone()).collect();
    let pairs: Vec<(usize, usize)> = pairs.into_iter().map(|p| (p.1, p.2)).collect();
    Probe::vector(names, move |s: &ProbeState<'_>, out: &mut [f64]| {
        let mean = |i: usize| {
            conditional_expectations(&model, &pinning, s.heights, i, &[SiteFunction::Mean]).map_or(f64::NAN, |v| v[0])
        };
        let mut seen = Vec::new();
        let mut root = usize::MAX;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            if clustered {
                if root != i {
                    open_cluster(&adjacency, s.heights, i, &mut seen);
                    root = i;
                }
                if !seen[j] && !adjacency[j].iter().any(|&m| seen[m]) {
                    out[k] = 0.0;
                    continue;
                }
            }
            out[k] = if separated[k] {
                mean(i) * mean(j)
            } else if i != j {
                mean(i) * s.heights[j]
            } else {
                s.heights[i] * s.heights[j]
            };
        }
    })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Labels of the open clusters (sites with nonzero height) along coupled
/// bonds; pinned sites keep their own label.
fn cluster_labels(adjacency: &[Vec<usize>], heights: &[f64]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..heights.len()).collect();
    for (k, row) in adjacency.iter().enumerate() {
        if heights[k] == 0.0 {
            continue;
        }
        for &m in row {
            if m > k && heights[m] != 0.0 {
                let (a, b) = (find(&mut parent, k), find(&mut parent, m));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..heights.len()).map(|k| find(&mut parent, k)).collect()
}

fn coupled_adjacency(lattice: &Lattice, spec: &InteractionSpec) -> Vec<Vec<usize>> {
    (0..lattice.len())
        .map(|i| {
            lattice
                .neighbors(i)
                .iter()
                .filter(|n| spec.potential(n.offset).is_some())
                .filter_map(|n| match n.partner {
                    Partner::Interior(j) => Some(j),
                    Partner::Boundary => None,
                })
                .collect()
        })
        .collect()
}

/// Pairs `(i, i + d·e)` for both lattice axes `e` with both ends at
/// sup-distance at most `L − margin` from the centre.
pub fn translated_pairs(lattice: &Lattice, d: i32, margin: i32) -> Vec<(usize, usize)> {
    let l = lattice.half_width().unwrap_or(0);
    let core = l - margin;
    let inside = |x: i32, y: i32| x.abs() <= core && y.abs() <= core;
    let mut out = Vec::new();
    for (i, s) in lattice.sites().iter().enumerate() {
        for (dx, dy) in [(d, 0), (0, d)] {
            if inside(s.0, s.1) && inside(s.0 + dx, s.1 + dy) {
                if let Some(j) = lattice.index_of(crate::model::Site(s.0 + dx, s.1 + dy)) {
                    out.push((i, j));
                }
            }
        }
    }
    out
}

/// Average over translated pairs of the estimator of
/// [`conditional_product_probe`], one output per entry of `pair_sets`.
/// Conditional means and cluster labels are computed once per sample.
pub fn translated_product_probe(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinning: &PinningSpec,
    names: Vec<String>,
    pair_sets: Vec<Vec<(usize, usize)>>,
) -> Probe {
    let model = Arc::new(LocalModel::new(lattice, spec));
    let pinning = *pinning;
    let range = spec.range();
    let adjacency = coupled_adjacency(lattice, spec);
    let clustered = matches!(pinning, PinningSpec::Delta { .. }) && lattice.boundary_value() == 0.0;
    let separated: Vec<Vec<bool>> = pair_sets
        .iter()
        .map(|ps| {
            ps.iter()
                .map(|&(i, j)| lattice.site(i).sup_dist(lattice.site(j)) > range)
                .collect()
        })
        .collect();
    let mut used = vec![false; lattice.len()];
    for &(i, j) in pair_sets.iter().flatten() {
        used[i] = true;
        used[j] = true;
    }
    Probe::vector(names, move |s: &ProbeState<'_>, out: &mut [f64]| {
        let means: Vec<f64> = (0..s.heights.len())
            .map(|k| {
                if used[k] {
                    conditional_expectations(&model, &pinning, s.heights, k, &[SiteFunction::Mean])
                        .map_or(f64::NAN, |v| v[0])
                } else {
                    0.0
                }
            })
            .collect();
        let labels = clustered.then(|| cluster_labels(&adjacency, s.heights));
        for (k, ps) in pair_sets.iter().enumerate() {
            let mut acc = 0.0;
            for (p, &(i, j)) in ps.iter().enumerate() {
                if let Some(lab) = &labels {
                    let mut reach: Vec<usize> = adjacency[i]
                        .iter()
                        .filter(|&&m| s.heights[m] != 0.0)
                        .map(|&m| lab[m])
                        .collect();
                    if s.heights[i] != 0.0 {
                        reach.push(lab[i]);
                    }
                    let touches = adjacency[j]
                        .iter()
                        .any(|&m| m == i || (s.heights[m] != 0.0 && reach.contains(&lab[m])));
                    if !touches {
                        continue;
                    }
                }
                acc += if separated[k][p] {
                    means[i] * means[j]
                } else {
                    means[i] * s.heights[j]
                };
            }
            out[k] = acc / ps.len() as f64;
        }
    })
}

/// A bilinear observable `(αᵀh)(βᵀh)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bilinear {
    pub name: String,
    pub left: Vec<(usize, f64)>,
    pub right: Vec<(usize, f64)>,
}

impl Bilinear {
    pub fn pair(name: impl Into<String>, i: usize, j: usize) -> Self {
        Bilinear {
            name: name.into(),
            left: vec![(i, 1.0)],
            right: vec![(j, 1.0)],
        }
    }

    pub fn square(name: impl Into<String>, alpha: Vec<(usize, f64)>) -> Self {
        Bilinear {
            name: name.into(),
            left: alpha.clone(),
            right: alpha,
        }
    }
}

/// For a Gaussian interaction under δ-pinning: the exact conditional value
/// `E[(αᵀh)(βᵀh) | A] = αᵀG_Aβ + (αᵀμ_A)(βᵀμ_A)` where `A` is the current
/// pinned set (the sites sitting exactly at zero). One conjugate-gradient
/// solve per distinct `α`, plus one for the mean when the boundary is not zero.
pub fn pinned_gaussian_probe(lattice: &Lattice, spec: &InteractionSpec, queries: Vec<Bilinear>) -> Probe {
    let lattice = lattice.clone();
    let spec = spec.clone();
    let names = queries.iter().map(|q| q.name.clone()).collect();
    Probe::vector(names, move |s: &ProbeState<'_>, out: &mut [f64]| {
        let pinned = PinnedSet::from_bools(s.heights.iter().map(|&h| h == 0.0).collect());
        match pinned_bilinears(&lattice, &spec, &pinned, &queries) {
            Ok(v) => out.copy_from_slice(&v),
            Err(_) => out.fill(f64::NAN),
        }
    })
}

fn restrict(alpha: &[(usize, f64)], position: &[Option<usize>], n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(i, a) in alpha {
        if let Some(p) = position[i] {
            v[p] += a;
        }
    }
    v
}

fn solve(q: &SparseSym, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.iter().all(|&x| x == 0.0) {
        return Ok(vec![0.0; rhs.len()]);
    }
    q.solve_cg(rhs, PROBE_CG_TOLERANCE)
}

/// Exact `E[(αᵀh)(βᵀh)]` of the Gaussian field with `pinned` held at zero.
pub fn pinned_bilinears(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinned: &PinnedSet,
    queries: &[Bilinear],
) -> Result<Vec<f64>> {
    let prec = gaussian_precision(lattice, spec, pinned)?;
    let m = prec.free.len();
    let mean = solve(&prec.precision, &prec.linear)?;
    let mut cache: Vec<(&[(usize, f64)], Vec<f64>)> = Vec::new();
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let idx = match cache.iter().position(|(l, _)| *l == q.left.as_slice()) {
            Some(k) => k,
            None => {
                let x = solve(&prec.precision, &restrict(&q.left, &prec.position, m))?;
                cache.push((q.left.as_slice(), x));
                cache.len() - 1
            }
        };
        let x = &cache[idx].1;
        let b = restrict(&q.right, &prec.position, m);
        let a = restrict(&q.left, &prec.position, m);
        let cov: f64 = b.iter().zip(x).map(|(u, v)| u * v).sum();
        let ma: f64 = a.iter().zip(&mean).map(|(u, v)| u * v).sum();
        let mb: f64 = b.iter().zip(&mean).map(|(u, v)| u * v).sum();
        out.push(cov + ma * mb);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, InteractionKind, Site};
    use crate::oracle::gaussian_covariance;

    #[test]
    fn bilinears_match_dense_covariance() {
        let lat = build_lattice(3, 1, 0.4).unwrap();
        let spec = make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap();
        let a = PinnedSet::from_indices(lat.len(), &[5, 24, 30]);
        let alpha: Vec<(usize, f64)> = (0..lat.len()).step_by(3).map(|i| (i, 1.0 + i as f64 * 0.1)).collect();
        let q = [
            Bilinear::pair("p", 24, 10),
            Bilinear::pair("q", 0, 48),
            Bilinear::square("s", alpha.clone()),
        ];
        let v = pinned_bilinears(&lat, &spec, &a, &q).unwrap();
        let c = gaussian_covariance(&lat, &spec, &a).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - c.second_moment(0, 48)).abs() < 1e-8);
        let mut s = c.linear_variance(&alpha);
        let m: f64 = alpha.iter().map(|&(i, w)| w * c.mean_of(i)).sum();
        s += m * m;
        assert!((v[2] - s).abs() < 1e-7 * s);
    }

    #[test]
    fn clustered_products_match_enumeration() {
        use crate::oracle::{enumerate_delta_pinning, DeltaQuery, Observable, QuadratureScheme};
        use crate::sampler::{run_chain, ChainConfig, Schedule};
        let lat = Lattice::chain(4, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::quartic_nn(1.0, 1.0)).unwrap();
        let pin = PinningSpec::delta(0.5).unwrap();
        let pairs = [(0, 1), (0, 2), (0, 3)];
        let probe = conditional_product_probe(
            &lat,
            &spec,
            &pin,
            pairs.iter().map(|&(i, j)| (format!("{i}{j}"), i, j)).collect(),
        );
        let sched = Schedule {
            sweeps: 40_000,
            seed: 5,
            ..Schedule::default()
        };
        let r = run_chain(&ChainConfig::new(lat.clone(), spec.clone(), pin, sched), &[probe]).unwrap();
        let q = DeltaQuery {
            observables: pairs.iter().map(|&(i, j)| Observable::Product(i, j)).collect(),
            avoid: vec![],
        };
        let exact = enumerate_delta_pinning(&lat, &spec, 0.5, &q, QuadratureScheme::with_points(48)).unwrap();
        for (k, e) in r.estimates.iter().enumerate() {
            let x = exact.moment_at(k);
            assert!((e.mean - x.value).abs() <= 4.0 * e.std_error.hypot(x.error_estimate), "{k}: {e:?} vs {x:?}");
        }
    }

    #[test]
    fn translated_pairs_stay_in_core() {
        let lat = build_lattice(4, 1, 0.0).unwrap();
        let p = translated_pairs(&lat, 2, 2);
        assert_eq!(p.len(), 2 * 5 * 3);
        for (i, j) in p {
            assert_eq!(lat.site(i).l1_dist(lat.site(j)), 2);
            assert!(lat.site(i).sup_dist(Site(0, 0)) <= 2 && lat.site(j).sup_dist(Site(0, 0)) <= 2);
        }
    }

    #[test]
    fn translated_products_match_enumeration() {
        use crate::oracle::{enumerate_delta_pinning, DeltaQuery, Observable, QuadratureScheme};
        use crate::sampler::{run_chain, ChainConfig, Schedule};
        let lat = Lattice::chain(4, 1, 0.0).unwrap();
        let spec = make_interaction(InteractionKind::quartic_nn(1.0, 1.0)).unwrap();
        let pin = PinningSpec::delta(0.5).unwrap();
        let sets = vec![vec![(0, 1), (1, 2), (2, 3)], vec![(0, 2), (1, 3)], vec![(0, 3)]];
        let probe = translated_product_probe(&lat, &spec, &pin, vec!["d1".into(), "d2".into(), "d3".into()], sets.clone());
        let sched = Schedule {
            sweeps: 40_000,
            seed: 9,
            ..Schedule::default()
        };
        let r = run_chain(&ChainConfig::new(lat.clone(), spec.clone(), pin, sched), &[probe]).unwrap();
        let flat: Vec<(usize, usize)> = sets.iter().flatten().copied().collect();
        let q = DeltaQuery {
            observables: flat.iter().map(|&(i, j)| Observable::Product(i, j)).collect(),
            avoid: vec![],
        };
        let exact = enumerate_delta_pinning(&lat, &spec, 0.5, &q, QuadratureScheme::with_points(48)).unwrap();
        let mut k = 0;
        for (set, e) in sets.iter().zip(&r.estimates) {
            let mut x = 0.0;
            let mut err = 0.0;
            for _ in set {
                let m = exact.moment_at(k);
                x += m.value / set.len() as f64;
                err += m.error_estimate / set.len() as f64;
                k += 1;
            }
            assert!((e.mean - x).abs() <= 4.0 * e.std_error.hypot(err), "{e:?} vs {x}");
        }
    }
}
