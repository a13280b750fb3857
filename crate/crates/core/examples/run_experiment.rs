//! Drive the harness from code: load a config, run it, inspect the checks.
//!
//! `cargo run --example run_experiment -- [out_dir]`

use icarl::harness::{run, Experiment, PeSweepConfig, RunConfig};

fn main() -> icarl::Result<()> {
    let json = r#"{
        "experiment": {"name": "pe-sweep", "t_max": 20, "n": 1024},
        "seed": 3
    }"#;
    let mut cfg = RunConfig::from_json(json)?;
    cfg.out_dir = std::env::args().nth(1).map(Into::into);
    let result = run(&cfg)?;
    for c in &result.checks {
        println!(
            "[{}] {} ({})",
            if c.passed { "pass" } else { "fail" },
            c.name,
            c.detail
        );
    }
    println!("artifacts: {}", result.artifacts.join(", "));

    let other = RunConfig::new(Experiment::PeSweep(PeSweepConfig {
        mus: vec![50.0, 300.0],
        ..Default::default()
    }));
    println!("{}", other.to_json()?);
    Ok(())
}
