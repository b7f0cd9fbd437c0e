//! Interaction kernels, lattices, height configurations, pinning potentials
//! and energy evaluation.

mod energy;
mod interaction;
mod lattice;
mod pinning;

pub use energy::{local_energy, total_energy, Couplings, FieldState};
pub use interaction::{
    generates_z2, make_interaction, CustomPotential, InteractionKind, InteractionSpec, Offset,
    Potential, VALIDATION_HALF_WIDTH, VALIDATION_STEP,
};
pub use lattice::{build_lattice, Geometry, Lattice, Neighbor, Partner, Site};
pub use pinning::{pin_weight, PinningSpec};
