//! Seeded experiment drivers. Each experiment is a pure function of its
//! [`RunConfig`]; results carry a config echo, metrics, named checks and the
//! list of CSV/SVG/JSON artifacts written to the output directory.

mod analysis;
pub mod config;
mod grad;
mod optima;
mod result;
pub mod svg;
mod sweeps;

use std::time::Instant;

pub use analysis::admissible_inits;
pub use config::*;
pub use grad::{draw_check, inject_sign_flip};
pub use optima::singular_values;
pub use result::{num, validate_result, Check, ExperimentResult, Outputs, Report, SCHEMA_VERSION};
pub use svg::{emit_heatmap, emit_svg, render_heatmap, render_lines, Series};
pub use sweeps::row_concentration;

use crate::Result;

/// Run one experiment body without touching the result file.
pub fn run_experiment(experiment: &Experiment, seed: u64, out: &mut Outputs) -> Result<Report> {
    match experiment {
        Experiment::GradCheck(c) => grad::run(c, seed, out),
        Experiment::VerifyOptima(c) => optima::run(c, seed, out),
        Experiment::DepthSweep(c) => sweeps::depth(c, seed, out),
        Experiment::HeadsSweep(c) => sweeps::heads(c, seed, out),
        Experiment::HeadOrthogonality(c) => sweeps::head_orthogonality(c, seed, out),
        Experiment::PeSweep(c) => analysis::pe_sweep(c, seed, out),
        Experiment::Hessian(c) => analysis::hessian(c, seed, out),
        Experiment::GradientFlow(c) => analysis::gradient_flow(c, seed, out),
    }
}

/// Run `cfg` and, when it names an output directory, write every artifact
/// plus `result.json` there.
pub fn run(cfg: &RunConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let experiment = cfg.effective();
    let mut out = Outputs::new(cfg.out_dir.as_deref())?;
    let report = run_experiment(&experiment, cfg.seed, &mut out)?;
    out.json(
        "config.json",
        &RunConfig {
            experiment: experiment.clone(),
            ..cfg.clone()
        },
    )?;
    let mut artifacts = out.artifacts().to_vec();
    artifacts.push("result.json".into());
    let result = ExperimentResult {
        schema_version: SCHEMA_VERSION.to_string(),
        experiment: experiment.name().to_string(),
        config: RunConfig {
            experiment,
            ..cfg.clone()
        },
        passed: report.checks.iter().all(|c| c.passed),
        metrics: report.metrics,
        checks: report.checks,
        artifacts,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = cfg.out_dir.as_deref() {
        let path = dir.join("result.json");
        std::fs::write(&path, result.to_json()?).map_err(|e| crate::Error::io(&path, e))?;
    }
    Ok(result)
}
