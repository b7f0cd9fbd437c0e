// Weighted fits of the competing decay laws on synthetic data.

use interface_pinning::analysis::{fit_decay, DecayModel};
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let xs: Vec<f64> = (2..12).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
    let ses: Vec<f64> = ys.iter().map(|y| 0.01 * y).collect();
    for model in [DecayModel::PureExponential, DecayModel::GaussianOverLog, DecayModel::PureGaussian] {
        let f = fit_decay(&xs, &ys, Some(&ses), model)?;
        let r = f.rate();
        println!(
            "{:<18} rate {:.4} CI [{:.4}, {:.4}]  weighted RSS {:.3e}",
            model.name(),
            r.value,
            r.ci[0],
            r.ci[1],
            f.weighted_rss
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
