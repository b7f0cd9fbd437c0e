// Exact probabilities that the pinned set avoids a region, against their
// lower bounds.

use interface_pinning::analysis::exact_avoidance;
use interface_pinning::model::{make_interaction, InteractionKind, Lattice, PinningSpec};
use interface_pinning::oracle::QuadratureScheme;
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let lattice = Lattice::chain(4, 1, 0.0)?;
    let spec = make_interaction(InteractionKind::gaussian_nn(0.5))?;
    for pinning in [PinningSpec::delta(1.0)?, PinningSpec::square_well(1.0, 0.5)?] {
        let exact = exact_avoidance(&lattice, "chain4", &spec, &pinning, QuadratureScheme::with_points(32))?;
        let worst = exact
            .iter()
            .map(|e| e.value - e.lower_bound)
            .fold(f64::INFINITY, f64::min);
        println!(
            "{}: {} sets, all above bound: {}, smallest margin {worst:.4}",
            pinning.variant_name(),
            exact.len(),
            exact.iter().all(|e| e.bound_holds())
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
