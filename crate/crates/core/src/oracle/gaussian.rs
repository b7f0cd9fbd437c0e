//! Exact Gaussian computations: precision assembly from the energy, covariance,
//! mean and log-partition function of the field conditioned on exact zeros.

use nalgebra::DMatrix;

use super::pinned_set::PinnedSet;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, SparseSym};
use crate::model::{Couplings, InteractionSpec, Lattice};

/// Quadratic form of the energy restricted to free sites:
/// `H(h) = E0 − gᵀh + ½ hᵀ Q h` with pinned sites held at zero.
#[derive(Clone, Debug)]
pub struct GaussianPrecision {
    pub free: Vec<usize>,
    pub position: Vec<Option<usize>>,
    pub precision: SparseSym,
    pub linear: Vec<f64>,
    pub constant: f64,
}

/// Assembles the precision by polarising local energies, so it depends on the
/// potentials only through `Ψ_k` values (not through any stored curvature).
pub fn gaussian_precision(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinned: &PinnedSet,
) -> Result<GaussianPrecision> {
    if !spec.is_gaussian() {
        return Err(Error::WrongVariant {
            expected: "gaussian interaction",
            found: spec.kind_name(),
        });
    }
    let couplings = Couplings::new(lattice, spec);
    let n = lattice.len();
    let free: Vec<usize> = (0..n).filter(|&i| !pinned.contains(i)).collect();
    let mut position = vec![None; n];
    for (p, &i) in free.iter().enumerate() {
        position[i] = Some(p);
    }
    let mut h = vec![0.0; n];
    let mut rows = Vec::with_capacity(free.len());
    let mut linear = Vec::with_capacity(free.len());
    for &i in &free {
        let e00 = couplings.local_energy(&h, i, 0.0);
        let e10 = couplings.local_energy(&h, i, 1.0);
        let em10 = couplings.local_energy(&h, i, -1.0);
        // E(t) = e00 − g t + ½ q t² along the i-th axis
        let q_ii = e10 + em10 - 2.0 * e00;
        linear.push(0.5 * (em10 - e10));
        let mut row = vec![(p_of(&position, i), q_ii)];
        for b in couplings.bond_range(i) {
            let Some(j) = couplings.bond_partner(b) else {
                continue;
            };
            let Some(pj) = position[j] else { continue };
            h[j] = 1.0;
            let e11 = couplings.local_energy(&h, i, 1.0);
            let e01 = couplings.local_energy(&h, i, 0.0);
            h[j] = 0.0;
            row.push((pj, e11 - e10 - e01 + e00));
        }
        rows.push(row);
    }
    let constant = couplings.total_energy(&h);
    Ok(GaussianPrecision {
        free,
        position,
        precision: SparseSym::from_rows(rows),
        linear,
        constant,
    })
}

fn p_of(position: &[Option<usize>], i: usize) -> usize {
    position[i].expect("free site")
}

/// Covariance, mean and partition function of a Gaussian field on the free sites.
#[derive(Clone, Debug)]
pub struct GaussianCovariance {
    pub free: Vec<usize>,
    position: Vec<Option<usize>>,
    pub covariance: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub log_partition: f64,
}

impl GaussianCovariance {
    /// Covariance of two interior sites; zero when either is pinned.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        match (self.position[i], self.position[j]) {
            (Some(a), Some(b)) => self.covariance[(a, b)],
            _ => 0.0,
        }
    }

    pub fn mean_of(&self, i: usize) -> f64 {
        self.position[i].map_or(0.0, |p| self.mean[p])
    }

    /// `⟨h_i h_j⟩` including the mean.
    pub fn second_moment(&self, i: usize, j: usize) -> f64 {
        self.cov(i, j) + self.mean_of(i) * self.mean_of(j)
    }

    /// `var(Σ α_i h_i)`.
    pub fn linear_variance(&self, alpha: &[(usize, f64)]) -> f64 {
        let mut v = 0.0;
        for &(i, a) in alpha {
            for &(j, b) in alpha {
                v += a * b * self.cov(i, j);
            }
        }
        v
    }
}

/// Exact covariance of the Gaussian field with sites in `pinned` fixed at zero.
pub fn gaussian_covariance(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinned: &PinnedSet,
) -> Result<GaussianCovariance> {
    let prec = gaussian_precision(lattice, spec, pinned)?;
    if prec.free.len() > 4000 {
        return Err(Error::TooLarge {
            what: "free sites for dense covariance",
            size: prec.free.len(),
            limit: 4000,
        });
    }
    let q = prec.precision.to_dense();
    let m = q.nrows();
    let (cov, logdet) = spd_inverse(q).map_err(|e| {
        Error::Solver(format!(
            "singular precision on {m} free sites (internal error): {e}"
        ))
    })?;
    let g = nalgebra::DVector::from_column_slice(&prec.linear);
    let mean_v = &cov * &g;
    let quad = g.dot(&mean_v);
    let log_partition = 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * logdet
        + 0.5 * quad
        - prec.constant;
    Ok(GaussianCovariance {
        free: prec.free,
        position: prec.position,
        covariance: cov,
        mean: mean_v.iter().copied().collect(),
        log_partition,
    })
}

/// One column `G(i, ·)` of the covariance via conjugate gradients; suitable for
/// lattices far beyond dense limits. Returns values indexed by interior site.
pub fn gaussian_covariance_column(
    lattice: &Lattice,
    spec: &InteractionSpec,
    pinned: &PinnedSet,
    site: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let prec = gaussian_precision(lattice, spec, pinned)?;
    let mut out = vec![0.0; lattice.len()];
    let Some(p) = prec.position[site] else {
        return Ok(out);
    };
    let mut rhs = vec![0.0; prec.free.len()];
    rhs[p] = 1.0;
    let x = prec.precision.solve_cg(&rhs, tol)?;
    for (k, &i) in prec.free.iter().enumerate() {
        out[i] = x[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_lattice, make_interaction, InteractionKind};

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    #[test]
    fn two_site_chain() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let c = gaussian_covariance(&lat, &unit(), &PinnedSet::empty(2)).unwrap();
        assert!((c.cov(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.cov(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        let pinned = gaussian_covariance(&lat, &unit(), &PinnedSet::from_indices(2, &[0])).unwrap();
        assert!((pinned.cov(1, 1) - 0.5).abs() < 1e-15);
        assert_eq!(pinned.cov(0, 0), 0.0);
    }

    #[test]
    fn single_plane_site() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let c = gaussian_covariance(&lat, &unit(), &PinnedSet::empty(1)).unwrap();
        assert!((c.cov(0, 0) - 0.25).abs() < 1e-15);
        // Z = ∫ e^{-2h²} dh = √(π/2)
        assert!((c.log_partition - (std::f64::consts::PI / 2.0).sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn boundary_shift_gives_constant_mean() {
        let lat = build_lattice(2, 1, 1.5).unwrap();
        let c = gaussian_covariance(&lat, &unit(), &PinnedSet::empty(lat.len())).unwrap();
        for i in 0..lat.len() {
            assert!((c.mean_of(i) - 1.5).abs() < 1e-12);
        }
        // shifting the whole field leaves Z unchanged
        let c0 = gaussian_covariance(&lat.with_boundary_value(0.0), &unit(), &PinnedSet::empty(lat.len())).unwrap();
        assert!((c.log_partition - c0.log_partition).abs() < 1e-10);
    }

    #[test]
    fn cg_column_matches_dense() {
        let lat = build_lattice(4, 1, 0.0).unwrap();
        let a = PinnedSet::from_indices(lat.len(), &[3, 17, 40]);
        let dense = gaussian_covariance(&lat, &unit(), &a).unwrap();
        let col = gaussian_covariance_column(&lat, &unit(), &a, lat.center(), 1e-13).unwrap();
        for j in 0..lat.len() {
            assert!((col[j] - dense.cov(lat.center(), j)).abs() < 1e-10);
        }
    }

    #[test]
    fn non_gaussian_rejected() {
        let spec = make_interaction(InteractionKind::quartic_nn(1.0, 1.0)).unwrap();
        let lat = build_lattice(0, 1, 0.0).unwrap();
        assert!(gaussian_covariance(&lat, &spec, &PinnedSet::empty(1)).is_err());
    }
}
