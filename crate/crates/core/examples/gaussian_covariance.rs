// Exact Gaussian covariance on a box, with and without a pinned set.

use interface_pinning::model::{build_lattice, make_interaction, InteractionKind};
use interface_pinning::oracle::{gaussian_covariance, PinnedSet};
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let lattice = build_lattice(4, 1, 0.0)?;
    let spec = make_interaction(InteractionKind::gaussian_nn(0.5))?;
    let c = lattice.center();
    let free = gaussian_covariance(&lattice, &spec, &PinnedSet::empty(lattice.len()))?;
    let ring: Vec<usize> = lattice
        .neighbors(c)
        .iter()
        .filter_map(|n| match n.partner {
            interface_pinning::model::Partner::Interior(j) => Some(j),
            interface_pinning::model::Partner::Boundary => None,
        })
        .collect();
    let pinned = gaussian_covariance(&lattice, &spec, &PinnedSet::from_indices(lattice.len(), &ring))?;
    println!("Var(h0) free {:.4}, with the four neighbours pinned {:.4}", free.cov(c, c), pinned.cov(c, c));
    let box_sites: Vec<(usize, f64)> = ring.iter().map(|&j| (j, 1.0)).collect();
    println!("Var of the neighbour sum, free: {:.4}", free.linear_variance(&box_sites));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
