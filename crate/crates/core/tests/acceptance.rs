//! Acceptance criteria, run in order with one status line each. Built with
//! `harness = false` so the lines show up under a plain `cargo test`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use icarl::ar_process::{
    encode, generate_sequence, grid_dataset, sample_context, ContextSpec, Encoding,
};
use icarl::baselines::inner_gd;
use icarl::closed_form::{
    augmented_reduced_loss, eta_star, pe_hessian, pe_loss_and_grad, quadratic_loss,
    structured_aug_coefficients,
};
use icarl::harness::{
    self, Check, DepthSweepConfig, Experiment, GradCheckConfig, GradientFlowConfig,
    HeadOrthogonalityConfig, HeadsSweepConfig, HessianConfig, OrthogonalRunConfig, Outputs,
    PeSweepConfig, Report, RunConfig, UnitaryRunConfig, VerifyOptimaConfig,
};
use icarl::models::{augmented_forward, DiagHeadParams, StructuredAugParams};
use icarl::numerics::{finite_diff_hessian, sym_eig};
use icarl::training::{model_loss, TrainConfig};
use icarl::{Mat, Result, Rng};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn from_checks(checks: &[&Check]) -> Self {
        let failed: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        Outcome {
            passed: !checks.is_empty() && failed.is_empty(),
            detail: if checks.is_empty() {
                "no checks produced".into()
            } else if failed.is_empty() {
                format!("{} checks passed", checks.len())
            } else {
                failed.join("; ")
            },
        }
    }
}

fn experiment(e: Experiment) -> Result<Report> {
    harness::run_experiment(&e, 0, &mut Outputs::new(None)?)
}

fn select(report: &Report, keep: impl Fn(&str) -> bool) -> Vec<&Check> {
    report.checks.iter().filter(|c| keep(&c.name)).collect()
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut rng = Rng::new(1);
    let mut worst: f64 = 0.0;
    for draw in 0..50 {
        let d = 1 + draw % 2;
        let t_max = 2 + draw % 4;
        let heads = 1 + (draw / 2) % 2;

        let params = DiagHeadParams::random(heads, d, t_max, 0.7, &mut rng);
        let data = grid_dataset(
            &ContextSpec::UnitaryDiagonal { d },
            16,
            t_max,
            Encoding::Plain,
        )?;
        let literal = model_loss(&params, &data)?;
        let c = params.coupling();
        let mut analytic = 0.0;
        for t in 2..=t_max {
            analytic += quadratic_loss(&c, params.p_row(t), t, d)?;
        }
        worst = worst.max((literal - analytic).abs() / analytic.abs().max(1.0));

        let aug = grid_dataset(
            &ContextSpec::UnitaryDiagonal { d },
            16,
            t_max,
            Encoding::Augmented,
        )?;
        let eta = rng.uniform() * 2.0 - 0.5;
        let literal = model_loss(&StructuredAugParams::gd_step(eta), &aug)?;
        let reduced = augmented_reduced_loss(eta, t_max, d);
        worst = worst.max((literal - reduced).abs() / reduced.abs().max(1.0));

        let structured = StructuredAugParams::random(&mut rng, 0.5);
        let literal = model_loss(&structured, &aug)?;
        let population = structured_aug_coefficients(&structured).population_loss(t_max, d);
        worst = worst.max((literal - population).abs() / population.abs().max(1.0));
    }
    Ok(Outcome {
        passed: worst < 1e-10,
        detail: format!("max relative gap {worst:e} over 50 draws"),
    })
}

fn eta_formula() -> Result<Outcome> {
    let small = eta_star(2, 1)?;
    let scaled = 200.0 * eta_star(200, 1)?;
    Ok(Outcome {
        passed: small == 0.5 && (1.425..=1.575).contains(&scaled),
        detail: format!("eta*(2,1) = {small}, 200 eta*(200,1) = {scaled}"),
    })
}

fn optima_only(cfg: VerifyOptimaConfig) -> Result<Outcome> {
    let report = experiment(Experiment::VerifyOptima(cfg))?;
    Ok(Outcome::from_checks(&select(&report, |_| true)))
}

fn augmented_training() -> Result<Outcome> {
    optima_only(VerifyOptimaConfig {
        unitary: None,
        orthogonal: None,
        ..Default::default()
    })
}

fn unitary_recovery() -> Result<Outcome> {
    optima_only(VerifyOptimaConfig {
        unitary: Some(UnitaryRunConfig::default()),
        orthogonal: None,
        augmented: None,
        ..Default::default()
    })
}

fn orthogonal_recovery() -> Result<Outcome> {
    optima_only(VerifyOptimaConfig {
        unitary: None,
        orthogonal: Some(OrthogonalRunConfig {
            delta: 4,
            heads: vec![4],
            ..Default::default()
        }),
        augmented: None,
        ..Default::default()
    })
}

fn one_step_gd() -> Result<Outcome> {
    let mut rng = Rng::new(6);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let d = 1 + i % 4;
        let t_max = 2 + i % 9;
        let eta = eta_star(t_max, d)?;
        let spec = if i % 2 == 0 {
            ContextSpec::UnitaryDiagonal { d }
        } else {
            ContextSpec::GeneralOrthogonal { d }
        };
        let w = sample_context(&spec, &mut rng)?;
        let seq = generate_sequence(&w, t_max)?;
        let out = augmented_forward(
            &StructuredAugParams::gd_step(eta),
            &encode(&seq, Encoding::Augmented),
        )?;
        let visible = seq.with_predecessor();
        let gd = inner_gd(&visible, 1, eta)?;
        worst = worst.max(out.max_abs_diff(&gd.predict(&visible)));
    }
    Ok(Outcome {
        passed: worst < 1e-10,
        detail: format!("max deviation {worst:e} over 100 sequences"),
    })
}

fn descending_eigenvalues(h: &Mat) -> Result<Vec<f64>> {
    let mut v = sym_eig(h)?.values;
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

fn pe_hessian_spectrum() -> Result<Outcome> {
    let t = 10;
    let mut rng = Rng::new(7);
    let mut fd_err: f64 = 0.0;
    let mut ratio = Vec::new();
    let mut identity_err = f64::INFINITY;
    let mut top = 0.0;
    for mu in [4.0, 50.0, 300.0] {
        let h = pe_hessian(t, mu)?;
        let x = rng.normal_vec(t, 1.0);
        let fd = finite_diff_hessian(|p| pe_loss_and_grad(p, t, mu).unwrap().0, &x, 1e-3)?;
        for i in 0..t {
            for j in 0..t {
                fd_err = fd_err.max((fd[i * t + j] - 2.0 * h[(i, j)]).abs());
            }
        }
        let v = descending_eigenvalues(&h)?;
        ratio.push(v[1] / v[0]);
        if mu == 4.0 {
            identity_err = h.sub(&Mat::identity(t)).max_abs();
        }
        if mu == 300.0 {
            top = v[0] / t as f64;
        }
    }
    let passed =
        fd_err < 1e-6 && identity_err < 1e-12 && (0.95..=1.0).contains(&top) && ratio[2] < ratio[1];
    Ok(Outcome {
        passed,
        detail: format!(
            "fd {fd_err:e}, identity {identity_err:e}, sigma1(300)/10 = {top:.4}, \
             sigma2/sigma1 at 50 and 300 = {:.3e}, {:.3e}",
            ratio[1], ratio[2]
        ),
    })
}

fn gradient_flow() -> Result<Outcome> {
    let report = experiment(Experiment::GradientFlow(GradientFlowConfig::default()))?;
    Ok(Outcome::from_checks(&select(&report, |n| {
        !n.contains("half-step")
    })))
}

fn depth_ordering() -> Result<Outcome> {
    let report = experiment(Experiment::DepthSweep(DepthSweepConfig::default()))?;
    let mut out = Outcome::from_checks(&select(&report, |n| !n.starts_with("L=1")));
    for c in select(&report, |n| n.starts_with("L=1")) {
        out.detail
            .push_str(&format!(" (also {}: {})", c.name, c.detail));
    }
    Ok(out)
}

fn gradient_correctness() -> Result<Outcome> {
    let report = experiment(Experiment::GradCheck(GradCheckConfig {
        draws: 100,
        ..Default::default()
    }))?;
    let mut out = Outcome::from_checks(&select(&report, |_| true));
    out.detail = format!("{} (max {})", out.detail, report.metrics["max_rel_error"]);
    Ok(out)
}

fn pe_sweep() -> Result<Outcome> {
    let report = experiment(Experiment::PeSweep(PeSweepConfig::default()))?;
    Ok(Outcome::from_checks(&select(&report, |n| {
        n.contains("diagonal invariance") || n.contains("off-target mass")
    })))
}

fn short(epochs: usize) -> TrainConfig {
    TrainConfig::adam(1e-2, epochs)
}

fn reduced_experiments() -> Vec<Experiment> {
    vec![
        Experiment::GradCheck(GradCheckConfig {
            draws: 10,
            ..Default::default()
        }),
        Experiment::VerifyOptima(VerifyOptimaConfig {
            unitary: Some(UnitaryRunConfig {
                seeds: 2,
                n_train: 32,
                train: short(20),
                ..Default::default()
            }),
            orthogonal: Some(OrthogonalRunConfig {
                heads: vec![4],
                restarts: 1,
                n_train: 32,
                train: short(20),
                ..Default::default()
            }),
            augmented: None,
            ..Default::default()
        }),
        Experiment::DepthSweep(DepthSweepConfig {
            n_train: 64,
            n_test: 32,
            depths: vec![1, 2],
            eta_points: 5,
            train: TrainConfig {
                epochs: 10,
                test_every: 5,
                ..DepthSweepConfig::default().train
            },
            ..Default::default()
        }),
        Experiment::HeadsSweep(HeadsSweepConfig {
            n_train: 64,
            n_test: 32,
            heads: vec![1, 2],
            train: TrainConfig {
                epochs: 3,
                ..HeadsSweepConfig::default().train
            },
            ..Default::default()
        }),
        Experiment::HeadOrthogonality(HeadOrthogonalityConfig {
            n_train: 64,
            train: TrainConfig {
                epochs: 3,
                ..HeadOrthogonalityConfig::default().train
            },
            ..Default::default()
        }),
        Experiment::PeSweep(PeSweepConfig {
            mus: vec![50.0, 100.0],
            n: 512,
            ..Default::default()
        }),
        Experiment::Hessian(HessianConfig::default()),
        Experiment::GradientFlow(GradientFlowConfig {
            inits: 5,
            ..Default::default()
        }),
    ]
}

fn determinism() -> Result<Outcome> {
    let mut differing = Vec::new();
    let experiments = reduced_experiments();
    for e in &experiments {
        let run = || -> Result<String> {
            let mut cfg = RunConfig::new(e.clone());
            cfg.seed = 12;
            let r = harness::run(&cfg)?;
            Ok(serde_json::to_string(&(&r.metrics, &r.checks))?)
        };
        if run()? != run()? {
            differing.push(e.name());
        }
    }
    Ok(Outcome {
        passed: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{} subcommands reproduce their metrics", experiments.len())
        } else {
            format!("metrics differ for {differing:?}")
        },
    })
}

type Criterion = (&'static str, u64, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("oracle equivalence", 10, oracle_equivalence),
        ("eta* formula", 1, eta_formula),
        ("augmented training", 120, augmented_training),
        ("unitary optimum recovery", 120, unitary_recovery),
        ("orthogonal optimum recovery", 120, orthogonal_recovery),
        ("one-step GD equivalence", 5, one_step_gd),
        ("PE Hessian", 10, pe_hessian_spectrum),
        ("gradient flow", 10, gradient_flow),
        ("depth sweep ordering", 480, depth_ordering),
        ("gradient correctness", 30, gradient_correctness),
        ("PE mu-sweep", 180, pe_sweep),
        ("determinism", 0, determinism),
    ];
    let mut failures = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome {
            passed: false,
            detail: format!("error: {e}"),
        });
        let elapsed = start.elapsed();
        let in_time = *limit == 0 || elapsed <= Duration::from_secs(*limit);
        let passed = outcome.passed && in_time;
        let budget = if *limit == 0 {
            String::new()
        } else {
            format!(" / {limit} s")
        };
        println!(
            "criterion {:>2} {}: {} ({:.2} s{budget}) {}",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail,
        );
        if !passed {
            failures += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
