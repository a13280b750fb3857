use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icarl::harness::{run, Experiment, RunConfig};

/// Desk-scale experiments on linear attention and in-context AR(1) learning.
#[derive(Parser)]
#[command(name = "icarl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic vs finite-difference gradients for every model family.
    GradCheck(Flags),
    /// Train each family and compare with its closed-form optimum.
    VerifyOptima(Flags),
    /// Stacked augmented models vs inner gradient descent over depth.
    DepthSweep(Flags),
    /// Test MSE against the number of heads, plain and duplicated tokens.
    HeadsSweep(Flags),
    /// Σ_h B_hᵀB_h at initialization and after training.
    HeadOrthogonality(Flags),
    /// Early-stopped positional encodings over the arc width μ.
    PeSweep(Flags),
    /// Spectrum of the positional-encoding Hessian over (T, μ).
    Hessian(Flags),
    /// Scalar gradient flow from random admissible initializations.
    GradientFlow(Flags),
    /// Run whatever experiment the config file names.
    Run(Flags),
    /// Print the default config of an experiment as JSON.
    Defaults {
        name: String,
        #[arg(long)]
        paper_scale: bool,
    },
}

#[derive(Args)]
struct Flags {
    /// Run config (JSON); unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for result.json, CSV and SVG files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the published sizes instead of the desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
}

fn build(name: Option<&str>, flags: &Flags) -> icarl::Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => match name {
            Some(n) => RunConfig::new(Experiment::default_for(n)?),
            None => return Err(icarl::Error::InvalidArgument("`run` needs --config".into())),
        },
    };
    if let Some(n) = name {
        if cfg.experiment.name() != n {
            return Err(icarl::Error::InvalidArgument(format!(
                "config describes `{}`, not `{n}`",
                cfg.experiment.name()
            )));
        }
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(o) = &flags.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.paper_scale |= flags.paper_scale;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match &cli.command {
        Command::GradCheck(f) => (Some("grad-check"), f),
        Command::VerifyOptima(f) => (Some("verify-optima"), f),
        Command::DepthSweep(f) => (Some("depth-sweep"), f),
        Command::HeadsSweep(f) => (Some("heads-sweep"), f),
        Command::HeadOrthogonality(f) => (Some("head-orthogonality"), f),
        Command::PeSweep(f) => (Some("pe-sweep"), f),
        Command::Hessian(f) => (Some("hessian"), f),
        Command::GradientFlow(f) => (Some("gradient-flow"), f),
        Command::Run(f) => (None, f),
        Command::Defaults { name, paper_scale } => {
            let out = Experiment::default_for(name).and_then(|e| {
                let mut cfg = RunConfig::new(e);
                cfg.paper_scale = *paper_scale;
                cfg.experiment = cfg.effective();
                cfg.to_json()
            });
            return match out {
                Ok(text) => {
                    println!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };
    let result = build(name, flags).and_then(|cfg| run(&cfg).map(|r| (cfg, r)));
    match result {
        Ok((cfg, r)) => {
            for c in &r.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                eprintln!("{mark}  {}  ({})", c.name, c.detail);
            }
            eprintln!("{} in {:.1}s", r.experiment, r.wall_clock_seconds);
            match &cfg.out_dir {
                Some(dir) => eprintln!("wrote {}", dir.join("result.json").display()),
                None => match r.to_json() {
                    Ok(j) => println!("{j}"),
                    Err(e) => eprintln!("error: {e}"),
                },
            }
            if r.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
