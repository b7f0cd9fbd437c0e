// Building interaction families and inspecting their curvature bounds.

use interface_pinning::model::{make_interaction, InteractionKind, Offset};
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let families = [
        ("gaussian", InteractionKind::gaussian_nn(0.5)),
        ("quartic", InteractionKind::quartic_nn(1.0, 1.0)),
        (
            "cosh",
            InteractionKind::Cosh {
                kappa: 1.0,
                offsets: Offset::nearest_neighbors(),
            },
        ),
    ];
    for (name, kind) in families {
        let spec = make_interaction(kind)?;
        let psi = spec.potential(Offset(1, 0)).expect("nearest-neighbour bond");
        println!(
            "{name:<9} range {}  floor {:.3}  ceiling {:?}  Ψ(1) = {:.4}  Ψ''(2) = {:.4}",
            spec.range(),
            spec.floor(),
            spec.ceiling(),
            psi.value(1.0),
            psi.second(2.0),
        );
        assert!(psi.second(2.0) >= spec.floor());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
