use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, SparseSym};
use crate::model::{build_lattice, InteractionSpec, Lattice, Offset, Partner};
use crate::oracle::PinnedSet;

/// Largest number of free sites for which [`occupation_green`] forms the dense matrix.
pub const MAX_DENSE_GREEN_SITES: usize = 4000;

/// Residual tolerance of the iterative solves.
pub const GREEN_CG_TOLERANCE: f64 = 1e-12;

/// A continuous-time symmetric walk: jump rate per offset plus an interior
/// absorbing set. Sites outside the lattice always absorb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    rates: BTreeMap<Offset, f64>,
    absorbing: Option<PinnedSet>,
}

impl WalkSpec {
    pub fn new(rates: impl IntoIterator<Item = (Offset, f64)>) -> Result<Self> {
        let rates: BTreeMap<Offset, f64> = rates.into_iter().filter(|&(k, _)| k != Offset(0, 0)).collect();
        if rates.is_empty() {
            return Err(Error::param("rates", "no jump rates given"));
        }
        for (&k, &c) in &rates {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::param("rates", format!("rate {c} for offset {k} must be positive")));
            }
            match rates.get(&k.neg()) {
                Some(&back) if (back - c).abs() <= 1e-14 * c => {}
                _ => return Err(Error::param("rates", format!("rate for offset {k} has no matching reverse rate"))),
            }
        }
        Ok(WalkSpec { rates, absorbing: None })
    }

    /// Rate `rate` on each of the four nearest-neighbour offsets.
    pub fn nearest_neighbor(rate: f64) -> Result<Self> {
        Self::new(Offset::nearest_neighbors().into_iter().map(|k| (k, rate)))
    }

    /// Rates `Ψ_k''` of a Gaussian interaction.
    pub fn from_gaussian(spec: &InteractionSpec) -> Result<Self> {
        let curv = spec.gaussian_curvatures().ok_or(Error::WrongVariant {
            expected: "gaussian interaction",
            found: spec.kind_name(),
        })?;
        Self::new(curv.into_iter().filter(|&(_, c)| c > 0.0))
    }

    /// The comparison walk: unit rates on the irreducible offsets.
    pub fn comparison(spec: &InteractionSpec) -> Result<Self> {
        Self::from_gaussian(&spec.comparison_gaussian())
    }

    pub fn with_absorbing(mut self, set: PinnedSet) -> Self {
        self.absorbing = (!set.is_empty()).then_some(set);
        self
    }

    /// All rates multiplied by `lambda`; time runs `1/lambda` times slower.
    pub fn scaled(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive"));
        }
        for c in self.rates.values_mut() {
            *c *= lambda;
        }
        Ok(self)
    }

    pub fn rate(&self, k: Offset) -> Option<f64> {
        self.rates.get(&k).copied()
    }

    pub fn rates(&self) -> impl Iterator<Item = (Offset, f64)> + '_ {
        self.rates.iter().map(|(&k, &c)| (k, c))
    }

    pub fn range(&self) -> i32 {
        self.rates.keys().map(|k| k.sup_norm()).max().unwrap_or(1)
    }

    pub fn is_absorbing(&self, site: usize) -> bool {
        self.absorbing.as_ref().is_some_and(|a| site < a.n_sites() && a.contains(site))
    }

    pub fn absorbing(&self) -> Option<&PinnedSet> {
        self.absorbing.as_ref()
    }

    pub(crate) fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if let Some(a) = &self.absorbing {
            if a.n_sites() != lattice.len() {
                return Err(Error::param(
                    "absorbing",
                    format!("set on {} sites, lattice has {}", a.n_sites(), lattice.len()),
                ));
            }
        }
        Ok(())
    }

    /// Jump destinations of an interior site: `(destination, rate)` where
    /// `None` means absorption.
    pub(crate) fn jumps(&self, lattice: &Lattice, i: usize) -> Vec<(Option<usize>, f64)> {
        lattice
            .neighbors(i)
            .iter()
            .filter_map(|n| {
                let c = self.rate(n.offset)?;
                let dest = match n.partner {
                    Partner::Interior(j) if !self.is_absorbing(j) => Some(j),
                    _ => None,
                };
                Some((dest, c))
            })
            .collect()
    }
}

/// Sparse `−L` restricted to the free sites, with the free-site numbering.
pub(crate) struct Generator {
    pub free: Vec<usize>,
    pub position: Vec<Option<usize>>,
    pub matrix: SparseSym,
}

pub(crate) fn generator(lattice: &Lattice, walk: &WalkSpec) -> Result<Generator> {
    walk.check_lattice(lattice)?;
    let free: Vec<usize> = (0..lattice.len()).filter(|&i| !walk.is_absorbing(i)).collect();
    let mut position = vec![None; lattice.len()];
    for (k, &i) in free.iter().enumerate() {
        position[i] = Some(k);
    }
    let mut rows = Vec::with_capacity(free.len());
    for &i in &free {
        let mut total = 0.0;
        let mut row = Vec::new();
        for (dest, c) in walk.jumps(lattice, i) {
            total += c;
            if let Some(j) = dest {
                row.push((position[j].expect("free destination"), -c));
            }
        }
        if total <= 0.0 {
            return Err(Error::Solver(format!("site {i} has no outgoing jumps")));
        }
        row.push((position[i].unwrap(), total));
        rows.push(row);
    }
    Ok(Generator {
        free,
        position,
        matrix: SparseSym::from_rows(rows),
    })
}

/// Expected occupation times `G(i, j)` of the walk killed on leaving the
/// lattice or entering the absorbing set.
#[derive(Clone, Debug)]
pub struct GreenMatrix {
    free: Vec<usize>,
    position: Vec<Option<usize>>,
    matrix: DMatrix<f64>,
}

impl GreenMatrix {
    pub fn n_sites(&self) -> usize {
        self.position.len()
    }

    pub fn free_sites(&self) -> &[usize] {
        &self.free
    }

    /// Zero whenever either site absorbs.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (self.position[i], self.position[j]) {
            (Some(a), Some(b)) => self.matrix[(a, b)],
            _ => 0.0,
        }
    }

    /// Expected absorption time from `i`: the row sum.
    pub fn exit_time(&self, i: usize) -> f64 {
        self.position[i].map_or(0.0, |a| self.matrix.row(a).sum())
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dense CSV over all interior sites, header `site,0,1,…`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.n_sites();
        write!(w, "site")?;
        for j in 0..n {
            write!(w, ",{j}")?;
        }
        writeln!(w)?;
        for i in 0..n {
            write!(w, "{i}")?;
            for j in 0..n {
                write!(w, ",{:e}", self.get(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Solves `(−L) G = I` on the free sites by dense Cholesky.
pub fn occupation_green(lattice: &Lattice, walk: &WalkSpec) -> Result<GreenMatrix> {
    let gen = generator(lattice, walk)?;
    let n = gen.free.len();
    if n > MAX_DENSE_GREEN_SITES {
        return Err(Error::TooLarge {
            what: "dense Green matrix",
            size: n,
            limit: MAX_DENSE_GREEN_SITES,
        });
    }
    let (inv, _) = spd_inverse(gen.matrix.to_dense())?;
    let matrix = DMatrix::from_fn(n, n, |a, b| 0.5 * (inv[(a, b)] + inv[(b, a)]));
    Ok(GreenMatrix {
        free: gen.free,
        position: gen.position,
        matrix,
    })
}

/// The column `G(·, site)` by conjugate gradients, indexed by interior site.
pub fn green_column(lattice: &Lattice, walk: &WalkSpec, site: usize) -> Result<Vec<f64>> {
    let gen = generator(lattice, walk)?;
    let mut out = vec![0.0; lattice.len()];
    let Some(p) = gen.position[site] else {
        return Ok(out);
    };
    let mut rhs = vec![0.0; gen.free.len()];
    rhs[p] = 1.0;
    let x = gen.matrix.solve_cg(&rhs, GREEN_CG_TOLERANCE)?;
    for (k, &i) in gen.free.iter().enumerate() {
        out[i] = x[k];
    }
    Ok(out)
}

/// Expected absorption times from every interior site, by conjugate gradients.
pub fn expected_exit_times(lattice: &Lattice, walk: &WalkSpec) -> Result<Vec<f64>> {
    let gen = generator(lattice, walk)?;
    let x = gen.matrix.solve_cg(&vec![1.0; gen.free.len()], GREEN_CG_TOLERANCE)?;
    let mut out = vec![0.0; lattice.len()];
    for (k, &i) in gen.free.iter().enumerate() {
        out[i] = x[k];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergencePoint {
    pub n: i32,
    pub g00: f64,
}

/// `G(0,0)` for the walk killed outside the box `[-N, N]²`, for each `N`.
pub fn log_divergence_profile(walk: &WalkSpec, n_list: &[i32]) -> Result<Vec<DivergencePoint>> {
    if walk.absorbing.is_some() {
        return Err(Error::param("absorbing", "the profile uses the box boundary only"));
    }
    n_list
        .iter()
        .map(|&n| {
            let lattice = build_lattice(n, walk.range(), 0.0)?;
            let centre = lattice.center();
            let g00 = if n <= 20 {
                occupation_green(&lattice, walk)?.get(centre, centre)
            } else {
                green_column(&lattice, walk, centre)?[centre]
            };
            Ok(DivergencePoint { n, g00 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_interaction, InteractionKind};
    use crate::oracle::gaussian_covariance;

    fn chain_walk() -> WalkSpec {
        WalkSpec::new([(Offset(1, 0), 1.0), (Offset(-1, 0), 1.0)]).unwrap()
    }

    #[test]
    fn two_site_chain() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let g = occupation_green(&lat, &chain_walk()).unwrap();
        assert!((g.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.exit_time(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn surrounded_site_holds_for_inverse_total_rate() {
        let lat = build_lattice(1, 1, 0.0).unwrap();
        let mut a = PinnedSet::empty(lat.len());
        for i in 0..lat.len() {
            if i != lat.center() {
                a.insert(i);
            }
        }
        let walk = WalkSpec::nearest_neighbor(1.5).unwrap().with_absorbing(a);
        let g = occupation_green(&lat, &walk).unwrap();
        assert!((g.get(lat.center(), lat.center()) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn single_box_site() {
        let p = log_divergence_profile(&WalkSpec::nearest_neighbor(1.0).unwrap(), &[0]).unwrap();
        assert!((p[0].g00 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matches_gaussian_covariance_on_mixed_range() {
        let spec = make_interaction(InteractionKind::Gaussian {
            couplings: Offset::square(2)
                .into_iter()
                .map(|k| (k, if k.sup_norm() == 1 { 0.5 } else { 0.1 }))
                .collect(),
        })
        .unwrap();
        let lat = build_lattice(3, 2, 0.0).unwrap();
        let a = PinnedSet::from_indices(lat.len(), &[3, 20]);
        let g = occupation_green(&lat, &WalkSpec::from_gaussian(&spec).unwrap().with_absorbing(a.clone())).unwrap();
        let c = gaussian_covariance(&lat, &spec, &a).unwrap();
        for i in 0..lat.len() {
            for j in 0..lat.len() {
                assert!((g.get(i, j) - c.cov(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn column_and_exit_times_agree_with_dense() {
        let lat = build_lattice(4, 1, 0.0).unwrap();
        let walk = WalkSpec::nearest_neighbor(1.0).unwrap();
        let g = occupation_green(&lat, &walk).unwrap();
        let col = green_column(&lat, &walk, 7).unwrap();
        let exits = expected_exit_times(&lat, &walk).unwrap();
        for i in 0..lat.len() {
            assert!((col[i] - g.get(i, 7)).abs() < 1e-10);
            assert!((exits[i] - g.exit_time(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_rates_rejected() {
        assert!(WalkSpec::new([(Offset(1, 0), 1.0), (Offset(-1, 0), 2.0)]).is_err());
        assert!(WalkSpec::new([(Offset(1, 0), 1.0)]).is_err());
    }

    #[test]
    fn csv_has_square_shape() {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        let g = occupation_green(&lat, &chain_walk()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().all(|l| l.split(',').count() == 4));
    }
}
