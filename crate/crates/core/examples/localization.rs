// Mean square height against box size, pinned and unpinned.

use interface_pinning::analysis::mean_square_vs_l;
use interface_pinning::model::{make_interaction, InteractionKind, PinningSpec};
use interface_pinning::sampler::Schedule;
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let spec = make_interaction(InteractionKind::gaussian_nn(0.5))?;
    let schedule = Schedule {
        burn_in: 200,
        sweeps: 1_000,
        ..Schedule::default()
    };
    let study = mean_square_vs_l(&spec, &PinningSpec::delta(0.0)?, &[4, 6, 8, 12], 0.0, &schedule)?;
    let report = study.report();
    for c in &report.checks {
        println!("{:?}: {} ({})", c.verdict, c.name, c.detail);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
