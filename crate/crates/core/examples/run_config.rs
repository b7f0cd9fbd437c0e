// Loading an experiment config with overrides and writing its artifacts.

use interface_pinning::cli::{run, RunConfig};
use interface_pinning::Result;

const CONFIG: &str = r#"
experiment = "green-profile"

[model]
interaction = "gaussian"

[params]
n_divergence = [4, 8, 16, 32]
n_exit = [4, 8]
"#;

pub fn run_example() -> Result<()> {
    let out = std::env::temp_dir().join("interface-pinning-example");
    let overrides = [
        "params.n_paths=500".to_string(),
        format!("output.dir=\"{}\"", out.display()),
    ];
    let cfg = RunConfig::from_toml_str(CONFIG, &overrides)?;
    let outcome = run(&cfg, Some(1))?;
    for c in &outcome.report.checks {
        println!("{:?}: {}", c.verdict, c.name);
    }
    println!("artifacts in {}", outcome.dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
