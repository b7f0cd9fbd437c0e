use super::interaction::{InteractionSpec, Potential};
use super::lattice::{Lattice, Partner};
use crate::error::{Error, Result};

/// Interior heights; the boundary ring is fixed at the lattice's boundary value.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    heights: Vec<f64>,
    boundary_value: f64,
}

impl FieldState {
    pub fn zeros(lattice: &Lattice) -> Self {
        FieldState {
            heights: vec![0.0; lattice.len()],
            boundary_value: lattice.boundary_value(),
        }
    }

    pub fn from_heights(lattice: &Lattice, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != lattice.len() {
            return Err(Error::param(
                "heights",
                format!("expected {} values, got {}", lattice.len(), heights.len()),
            ));
        }
        if let Some(i) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::param("heights", format!("non-finite height at site {i}")));
        }
        Ok(FieldState {
            heights,
            boundary_value: lattice.boundary_value(),
        })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn heights_mut(&mut self) -> &mut [f64] {
        &mut self.heights
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary_value
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.heights[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, h: f64) {
        self.heights[i] = h;
    }
}

const BOUNDARY: u32 = u32::MAX;

/// Flattened bond table for a (lattice, interaction) pair. Offsets the
/// interaction does not carry are dropped.
#[derive(Clone, Debug)]
pub struct Couplings {
    start: Vec<u32>,
    partner: Vec<u32>,
    potential: Vec<u16>,
    forward: Vec<bool>,
    potentials: Vec<Potential>,
    boundary_value: f64,
}

impl Couplings {
    pub fn new(lattice: &Lattice, spec: &InteractionSpec) -> Self {
        let mut start = Vec::with_capacity(lattice.len() + 1);
        let mut partner = Vec::new();
        let mut potential = Vec::new();
        let mut forward = Vec::new();
        start.push(0);
        for i in 0..lattice.len() {
            for n in lattice.neighbors(i) {
                if let Some(p) = spec.offsets().iter().position(|k| *k == n.offset) {
                    partner.push(match n.partner {
                        Partner::Interior(j) => j as u32,
                        Partner::Boundary => BOUNDARY,
                    });
                    potential.push(p as u16);
                    forward.push(n.offset.is_forward());
                }
            }
            start.push(partner.len() as u32);
        }
        Couplings {
            start,
            partner,
            potential,
            forward,
            potentials: spec.potentials().to_vec(),
            boundary_value: lattice.boundary_value(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.start.len() - 1
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary_value
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    /// Bonds of site `i` as `(partner, potential index)`; `None` is the boundary.
    pub fn bonds(&self, i: usize) -> impl Iterator<Item = (Option<usize>, &Potential)> + '_ {
        let (a, b) = (self.start[i] as usize, self.start[i + 1] as usize);
        (a..b).map(move |e| {
            let p = self.partner[e];
            (
                (p != BOUNDARY).then_some(p as usize),
                &self.potentials[self.potential[e] as usize],
            )
        })
    }

    #[inline]
    pub fn partner_height(&self, heights: &[f64], e: usize) -> f64 {
        let p = self.partner[e];
        if p == BOUNDARY {
            self.boundary_value
        } else {
            heights[p as usize]
        }
    }

    #[inline]
    pub fn bond_range(&self, i: usize) -> std::ops::Range<usize> {
        self.start[i] as usize..self.start[i + 1] as usize
    }

    #[inline]
    pub fn bond_potential(&self, e: usize) -> &Potential {
        &self.potentials[self.potential[e] as usize]
    }

    /// Index of the bond's potential in [`Couplings::potentials`].
    #[inline]
    pub fn bond_potential_index(&self, e: usize) -> usize {
        self.potential[e] as usize
    }

    #[inline]
    pub fn bond_partner(&self, e: usize) -> Option<usize> {
        let p = self.partner[e];
        (p != BOUNDARY).then_some(p as usize)
    }

    /// Energy of all bonds touching `site` with its height replaced by `candidate`.
    #[inline]
    pub fn local_energy(&self, heights: &[f64], site: usize, candidate: f64) -> f64 {
        let mut e = 0.0;
        for b in self.bond_range(site) {
            let hj = self.partner_height(heights, b);
            e += self.bond_potential(b).value(candidate - hj);
        }
        e
    }

    /// Gradient of the total energy with respect to `h_site`.
    #[inline]
    pub fn local_force(&self, heights: &[f64], site: usize) -> f64 {
        let hi = heights[site];
        let mut g = 0.0;
        for b in self.bond_range(site) {
            let hj = self.partner_height(heights, b);
            g += self.bond_potential(b).first(hi - hj);
        }
        g
    }

    /// Sum over unordered bonds with at least one interior endpoint, each counted once.
    pub fn total_energy(&self, heights: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.n_sites() {
            let hi = heights[i];
            for b in self.bond_range(i) {
                if self.partner[b] == BOUNDARY || self.forward[b] {
                    let hj = self.partner_height(heights, b);
                    e += self.bond_potential(b).value(hi - hj);
                }
            }
        }
        e
    }
}

pub fn total_energy(lattice: &Lattice, spec: &InteractionSpec, field: &FieldState) -> f64 {
    let mut c = Couplings::new(lattice, spec);
    c.boundary_value = field.boundary_value();
    c.total_energy(field.heights())
}

pub fn local_energy(
    lattice: &Lattice,
    spec: &InteractionSpec,
    field: &FieldState,
    site: usize,
    candidate_height: f64,
) -> f64 {
    let mut c = Couplings::new(lattice, spec);
    c.boundary_value = field.boundary_value();
    c.local_energy(field.heights(), site, candidate_height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::interaction::{make_interaction, InteractionKind, Offset};
    use crate::model::lattice::build_lattice;
    use proptest::prelude::*;

    fn unit() -> InteractionSpec {
        make_interaction(InteractionKind::gaussian_nn(0.5)).unwrap()
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let lat = build_lattice(2, 1, 0.0).unwrap();
        let f = FieldState::zeros(&lat);
        assert_eq!(total_energy(&lat, &unit(), &f), 0.0);
    }

    #[test]
    fn single_site_four_bonds() {
        let lat = build_lattice(0, 1, 0.0).unwrap();
        let f = FieldState::from_heights(&lat, vec![1.0]).unwrap();
        assert_eq!(total_energy(&lat, &unit(), &f), 2.0);
        let z = FieldState::zeros(&lat);
        assert_eq!(local_energy(&lat, &unit(), &z, 0, 1.0) - local_energy(&lat, &unit(), &z, 0, 0.0), 2.0);
    }

    #[test]
    fn chain_pair_counted_once() {
        let lat = Lattice::chain(2, 1, 0.0).unwrap();
        let f = FieldState::from_heights(&lat, vec![1.0, 1.0]).unwrap();
        assert_eq!(total_energy(&lat, &unit(), &f), 1.0);
    }

    #[test]
    fn unchanged_candidate_gives_zero_difference() {
        let lat = build_lattice(1, 1, 0.3).unwrap();
        let f = FieldState::from_heights(&lat, (0..9).map(|i| i as f64 * 0.1).collect()).unwrap();
        let e = local_energy(&lat, &unit(), &f, 4, f.get(4));
        assert_eq!(e - local_energy(&lat, &unit(), &f, 4, f.get(4)), 0.0);
    }

    #[test]
    fn gaussian_hessian_by_polarisation() {
        // Ψ_k = c_k x² with distinct horizontal / vertical / diagonal coefficients.
        let mut couplings = Vec::new();
        for k in Offset::square(1) {
            let c = if k.1 == 0 { 0.5 } else if k.0 == 0 { 0.3 } else { 0.1 };
            couplings.push((k, c));
        }
        let spec = make_interaction(InteractionKind::Gaussian { couplings }).unwrap();
        let lat = build_lattice(1, 1, 0.0).unwrap();
        let n = lat.len();
        let energy = |h: &[f64]| total_energy(&lat, &spec, &FieldState::from_heights(&lat, h.to_vec()).unwrap());
        for i in 0..n {
            for j in 0..n {
                let mut ei = vec![0.0; n];
                ei[i] = 1.0;
                let mut ej = vec![0.0; n];
                ej[j] = 1.0;
                let mut eij = ei.clone();
                eij[j] += 1.0;
                let q = if i == j { 2.0 * energy(&ei) } else { energy(&eij) - energy(&ei) - energy(&ej) };
                // assembly: diagonal = Σ_k 2c_k, off-diagonal = -2c_{j-i}
                let expected = if i == j {
                    2.0 * (2.0 * 0.5 + 2.0 * 0.3 + 4.0 * 0.1)
                } else {
                    let d = Offset(lat.site(j).0 - lat.site(i).0, lat.site(j).1 - lat.site(i).1);
                    spec.potential(d).map_or(0.0, |p| -p.second(0.0))
                };
                assert!((q - expected).abs() < 1e-12, "({i},{j}) {q} vs {expected}");
            }
        }
    }

    proptest! {
        #[test]
        fn local_difference_matches_total(
            heights in proptest::collection::vec(-3.0f64..3.0, 25),
            site in 0usize..25,
            candidate in -3.0f64..3.0,
            b in -1.0f64..1.0,
        ) {
            let spec = make_interaction(InteractionKind::quartic_nn(1.0, 1.0)).unwrap();
            let lat = build_lattice(2, 1, b).unwrap();
            let f = FieldState::from_heights(&lat, heights.clone()).unwrap();
            let mut g = f.clone();
            g.set(site, candidate);
            let direct = total_energy(&lat, &spec, &g) - total_energy(&lat, &spec, &f);
            let local = local_energy(&lat, &spec, &f, site, candidate) - local_energy(&lat, &spec, &f, site, f.get(site));
            prop_assert!((direct - local).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn global_flip_invariance(heights in proptest::collection::vec(-3.0f64..3.0, 9), b in -2.0f64..2.0) {
            let spec = make_interaction(InteractionKind::Cosh { kappa: 0.7, offsets: Offset::square(1) }).unwrap();
            let lat = build_lattice(1, 1, b).unwrap();
            let lat_neg = lat.with_boundary_value(-b);
            let f = FieldState::from_heights(&lat, heights.clone()).unwrap();
            let g = FieldState::from_heights(&lat_neg, heights.iter().map(|h| -h).collect()).unwrap();
            let e1 = total_energy(&lat, &spec, &f);
            let e2 = total_energy(&lat_neg, &spec, &g);
            prop_assert!((e1 - e2).abs() <= 1e-12 * (1.0 + e1.abs()));
        }

        #[test]
        fn rotation_invariance(heights in proptest::collection::vec(-2.0f64..2.0, 25)) {
            let spec = make_interaction(InteractionKind::quartic_nn(1.0, 0.5)).unwrap();
            let lat = build_lattice(2, 1, 0.0).unwrap();
            let f = FieldState::from_heights(&lat, heights.clone()).unwrap();
            // rotate by 90°: (x, y) -> (-y, x); also reflect x -> -x
            let rot: Vec<f64> = (0..25).map(|i| {
                let s = lat.site(i);
                heights[lat.index_of(crate::model::Site(s.1, -s.0)).unwrap()]
            }).collect();
            let refl: Vec<f64> = (0..25).map(|i| {
                let s = lat.site(i);
                heights[lat.index_of(crate::model::Site(-s.0, s.1)).unwrap()]
            }).collect();
            let e = total_energy(&lat, &spec, &f);
            let er = total_energy(&lat, &spec, &FieldState::from_heights(&lat, rot).unwrap());
            let ef = total_energy(&lat, &spec, &FieldState::from_heights(&lat, refl).unwrap());
            prop_assert!((e - er).abs() < 1e-10 * (1.0 + e));
            prop_assert!((e - ef).abs() < 1e-10 * (1.0 + e));
        }
    }
}
