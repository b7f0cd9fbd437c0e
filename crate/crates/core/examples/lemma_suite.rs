// The comparison inequalities checked exactly on a reduced grid.

use interface_pinning::analysis::{lemma_suite, LemmaGrid};
use interface_pinning::model::{make_interaction, InteractionKind};
use interface_pinning::oracle::QuadratureScheme;
use interface_pinning::Result;

pub fn run_example() -> Result<()> {
    let grid = LemmaGrid {
        specs: vec![("gaussian".into(), make_interaction(InteractionKind::gaussian_nn(0.5))?)],
        widths: vec![0.5],
        thresholds: vec![1.0, 2.0],
        scheme: QuadratureScheme::with_points(32),
    };
    let suite = lemma_suite(&grid)?;
    println!("{} checks, {} violations", suite.checks.len(), suite.violations().len());
    for c in suite.checks.iter().take(6) {
        println!("{:<24} {:<10} lhs {:.4} rhs {:.4}", c.lemma, c.instance, c.lhs.value, c.rhs.value);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
