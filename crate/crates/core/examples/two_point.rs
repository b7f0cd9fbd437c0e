// Exponential decay of the two-point function under δ-pinning.

use interface_pinning::analysis::two_point_decay;
use interface_pinning::model::{make_interaction, InteractionKind, PinningSpec};
use interface_pinning::sampler::Schedule;
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let spec = make_interaction(InteractionKind::gaussian_nn(0.5))?;
    let schedule = Schedule {
        burn_in: 200,
        sweeps: 1_500,
        ..Schedule::default()
    };
    let study = two_point_decay(&spec, &PinningSpec::delta(0.0)?, 10, &[1, 2, 3, 4, 5], &schedule)?;
    for p in &study.points {
        println!("d = {}: <h0 hd> = {:.3e} ± {:.1e}", p.d, p.estimate.mean, p.estimate.std_error);
    }
    if let Some(f) = &study.fit {
        println!("mass K = {:.3} CI [{:.3}, {:.3}]", f.rate().value, f.rate().ci[0], f.rate().ci[1]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
