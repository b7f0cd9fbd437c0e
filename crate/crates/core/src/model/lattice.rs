use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::interaction::Offset;
use crate::error::{Error, Result};

/// Integer lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub i32, pub i32);

impl Site {
    pub fn shift(self, k: Offset) -> Site {
        Site(self.0 + k.0, self.1 + k.1)
    }

    pub fn sup_dist(self, other: Site) -> i32 {
        (self.0 - other.0).abs().max((self.1 - other.1).abs())
    }

    pub fn l1_dist(self, other: Site) -> i32 {
        (self.0 - other.0).abs() + (self.1 - other.1).abs()
    }
}

/// `Plane` is the genuine ℤ² setting; `Line` is the one-dimensional strip used by
/// transfer-operator oracles, where only horizontal offsets couple sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    Plane,
    Line,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partner {
    Interior(usize),
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub offset: Offset,
    pub partner: Partner,
}

/// A finite set of interior sites together with the boundary ring of width `r`
/// (held at a common height `b`) and resolved neighbour tables.
#[derive(Clone, Debug)]
pub struct Lattice {
    geometry: Geometry,
    range: i32,
    boundary_value: f64,
    half_width: Option<i32>,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    boundary: Vec<Site>,
    neighbors: Vec<Vec<Neighbor>>,
}

/// The box `Λ_L = [-L, L]² ∩ ℤ²`, sites in row-major order.
pub fn build_lattice(half_width: i32, range: i32, boundary_value: f64) -> Result<Lattice> {
    if half_width < 0 {
        return Err(Error::param("L", format!("must be >= 0, got {half_width}")));
    }
    let mut sites = Vec::with_capacity(((2 * half_width + 1) as usize).pow(2));
    for y in -half_width..=half_width {
        for x in -half_width..=half_width {
            sites.push(Site(x, y));
        }
    }
    let mut lat = Lattice::from_sites(sites, range, boundary_value)?;
    lat.half_width = Some(half_width);
    Ok(lat)
}

impl Lattice {
    /// Arbitrary finite interior set in the plane.
    pub fn from_sites(sites: Vec<Site>, range: i32, boundary_value: f64) -> Result<Lattice> {
        Self::with_geometry(sites, range, boundary_value, Geometry::Plane)
    }

    /// One-dimensional chain of `n` sites at `(0,0) … (n-1,0)`.
    pub fn chain(n: usize, range: i32, boundary_value: f64) -> Result<Lattice> {
        let sites = (0..n as i32).map(|x| Site(x, 0)).collect();
        Self::with_geometry(sites, range, boundary_value, Geometry::Line)
    }

    fn with_geometry(
        sites: Vec<Site>,
        range: i32,
        boundary_value: f64,
        geometry: Geometry,
    ) -> Result<Lattice> {
        if range < 1 {
            return Err(Error::param("r", format!("must be >= 1, got {range}")));
        }
        if !boundary_value.is_finite() {
            return Err(Error::param("b", "boundary value must be finite"));
        }
        let mut index = HashMap::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            if index.insert(*s, i).is_some() {
                return Err(Error::param("sites", format!("duplicate site {s:?}")));
            }
        }
        let stencil: Vec<Offset> = match geometry {
            Geometry::Plane => Offset::square(range),
            Geometry::Line => (-range..=range)
                .filter(|&d| d != 0)
                .map(|d| Offset(d, 0))
                .collect(),
        };
        let mut boundary_index: HashMap<Site, usize> = HashMap::new();
        let mut boundary = Vec::new();
        let mut neighbors = Vec::with_capacity(sites.len());
        for s in &sites {
            let mut row = Vec::with_capacity(stencil.len());
            for &k in &stencil {
                let t = s.shift(k);
                let partner = match index.get(&t) {
                    Some(&j) => Partner::Interior(j),
                    None => {
                        boundary_index.entry(t).or_insert_with(|| {
                            boundary.push(t);
                            boundary.len() - 1
                        });
                        Partner::Boundary
                    }
                };
                row.push(Neighbor { offset: k, partner });
            }
            neighbors.push(row);
        }
        boundary.sort();
        Ok(Lattice {
            geometry,
            range,
            boundary_value,
            half_width: None,
            sites,
            index,
            boundary,
            neighbors,
        })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn range(&self) -> i32 {
        self.range
    }

    pub fn boundary_value(&self) -> f64 {
        self.boundary_value
    }

    /// `Some(L)` for boxes built with [`build_lattice`].
    pub fn half_width(&self) -> Option<i32> {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> Site {
        self.sites[i]
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        self.index.get(&s).copied()
    }

    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    /// Index of the site closest to the origin (the origin itself for boxes).
    pub fn center(&self) -> usize {
        self.index_of(Site(0, 0)).unwrap_or_else(|| {
            (0..self.len())
                .min_by_key(|&i| {
                    let s = self.sites[i];
                    (s.0.abs().max(s.1.abs()), s.0.abs() + s.1.abs())
                })
                .unwrap_or(0)
        })
    }

    /// Same interior with a different boundary height.
    pub fn with_boundary_value(&self, b: f64) -> Lattice {
        let mut out = self.clone();
        out.boundary_value = b;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_counts() {
        for (l, r, interior, ring) in [(0, 1, 1, 8), (1, 1, 9, 16), (2, 2, 25, 56), (3, 1, 49, 32)] {
            let lat = build_lattice(l, r, 0.0).unwrap();
            assert_eq!(lat.len(), interior);
            assert_eq!(lat.boundary().len(), ring, "L={l} r={r}");
            let expected = ((2 * l + 2 * r + 1) * (2 * l + 2 * r + 1) - (2 * l + 1) * (2 * l + 1)) as usize;
            assert_eq!(lat.boundary().len(), expected);
        }
    }

    #[test]
    fn boundary_disjoint_and_stencil_complete() {
        let lat = build_lattice(2, 2, 0.5).unwrap();
        for b in lat.boundary() {
            assert!(lat.index_of(*b).is_none());
        }
        for i in 0..lat.len() {
            assert_eq!(lat.neighbors(i).len(), 24);
            for n in lat.neighbors(i) {
                let t = lat.site(i).shift(n.offset);
                match n.partner {
                    Partner::Interior(j) => assert_eq!(lat.site(j), t),
                    Partner::Boundary => assert!(lat.boundary().contains(&t)),
                }
            }
        }
    }

    #[test]
    fn chain_has_horizontal_stencil_only() {
        let lat = Lattice::chain(3, 1, 0.0).unwrap();
        assert_eq!(lat.geometry(), Geometry::Line);
        assert_eq!(lat.boundary().len(), 2);
        assert!(lat.neighbors(1).iter().all(|n| n.offset.1 == 0));
        assert_eq!(lat.neighbors(0).len(), 2);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_lattice(-1, 1, 0.0).is_err());
        assert!(build_lattice(1, 0, 0.0).is_err());
    }

    #[test]
    fn center_of_box_is_origin() {
        let lat = build_lattice(3, 1, 0.0).unwrap();
        assert_eq!(lat.site(lat.center()), Site(0, 0));
    }
}
