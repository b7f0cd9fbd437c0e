// The random walk behind the Gaussian covariance: Green function, exit
// times and a Monte Carlo check of both.

use interface_pinning::green::{expected_exit_times, log_divergence_profile, occupation_green, simulate_walk, WalkSpec};
use interface_pinning::model::{build_lattice, make_interaction, InteractionKind};
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let spec = make_interaction(InteractionKind::gaussian_nn(0.5))?;
    let walk = WalkSpec::from_gaussian(&spec)?;
    let lattice = build_lattice(4, 1, 0.0)?;
    let c = lattice.center();
    let g = occupation_green(&lattice, &walk)?;
    let exit = expected_exit_times(&lattice, &walk)?;
    let sim = simulate_walk(&lattice, &walk, c, &[c], 2_000, 7)?;
    println!(
        "G(0,0) = {:.4}, simulated {:.4} ± {:.4}",
        g.get(c, c),
        sim.occupation[0].mean,
        sim.occupation[0].std_error
    );
    println!(
        "E[exit] = {:.3}, simulated {:.3} ± {:.3}",
        exit[c], sim.exit_time.mean, sim.exit_time.std_error
    );
    for p in log_divergence_profile(&walk, &[4, 8, 16, 32])? {
        println!("N = {:>3}: G(0,0) = {:.4}", p.n, p.g00);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
