use serde_json::{json, Value};

use super::config::{
    AugmentedRunConfig, OrthogonalRunConfig, UnitaryRunConfig, VerifyOptimaConfig,
};
use super::result::{num, Check, Outputs, Report};
use crate::ar_process::{grid_dataset, make_dataset, ContextSpec, Encoding};
use crate::closed_form::{check_optimum, j_block_distance, OptimumFamily, OptimumParams};
use crate::models::{DiagHeadParams, StructuredAugParams};
use crate::numerics::sym_eig;
use crate::training::fit;
use crate::{Mat, Result, Rng};

/// Singular values of `m`, descending.
pub fn singular_values(m: &Mat) -> Result<Vec<f64>> {
    let g = m.transpose().matmul(m)?;
    let mut s: Vec<f64> = sym_eig(&g)?
        .values
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn pass_fraction(passes: &[bool]) -> f64 {
    passes.iter().filter(|&&p| p).count() as f64 / passes.len().max(1) as f64
}

fn emit_diag(out: &mut Outputs, stem: &str, m: &DiagHeadParams) -> Result<()> {
    for (name, mat) in [
        ("A", m.a.clone()),
        ("B", m.b.clone()),
        ("C", m.coupling()),
        ("P", m.p.clone()),
    ] {
        out.matrix_csv(&format!("{stem}_{name}.csv"), &mat)?;
        out.heatmap(&format!("{stem}_{name}.svg"), &mat)?;
    }
    Ok(())
}

fn unitary(
    cfg: &UnitaryRunConfig,
    root: &Rng,
    min_pass: f64,
    out: &mut Outputs,
) -> Result<(Value, Vec<Check>)> {
    let spec = ContextSpec::UnitaryDiagonal { d: cfg.d };
    let data = make_dataset(
        &spec,
        cfg.n_train,
        cfg.t_max,
        Encoding::Plain,
        &root.split("data"),
    )?;
    let mut rows = Vec::new();
    let mut passes = Vec::new();
    let mut runs = Vec::new();
    for s in 0..cfg.seeds {
        let mut m = DiagHeadParams::random(
            cfg.heads,
            cfg.d,
            cfg.t_max,
            cfg.init_scale,
            &mut root.split(&format!("seed/{s}")),
        );
        let trace = fit(&mut m, &data, None, &cfg.train)?;
        let r = check_optimum(OptimumParams::Diag(&m), OptimumFamily::Unitary)?;
        let diag = r.residuals["p_T*C_ii-1"];
        let off = r.residuals["C_offdiag"];
        let ok = trace.final_train_loss < cfg.loss_threshold
            && diag < cfg.tolerance
            && off < cfg.tolerance;
        passes.push(ok);
        rows.push(vec![
            s.to_string(),
            num(trace.final_train_loss),
            num(diag),
            num(off),
            num(r.residuals["P_offtarget"]),
        ]);
        runs.push(json!({"seed": s, "loss": trace.final_train_loss, "residuals": r.residuals}));
        if s == 0 {
            emit_diag(out, "unitary_seed0", &m)?;
        }
    }
    out.csv(
        "unitary.csv",
        &["seed", "loss", "p_T*C_ii-1", "C_offdiag", "P_offtarget"],
        &rows,
    )?;
    let frac = pass_fraction(&passes);
    let check = Check::new(
        "unitary optimum recovered",
        frac >= min_pass,
        format!(
            "{frac} of seeds reach loss < {:e} with residuals < {}",
            cfg.loss_threshold, cfg.tolerance
        ),
    );
    Ok((json!({"pass_fraction": frac, "runs": runs}), vec![check]))
}

fn orthogonal(
    cfg: &OrthogonalRunConfig,
    root: &Rng,
    out: &mut Outputs,
) -> Result<(Value, Vec<Check>)> {
    let spec = ContextSpec::OrthogonalConjugate { delta: cfg.delta };
    let d = 2 * cfg.delta;
    let data = make_dataset(
        &spec,
        cfg.n_train,
        cfg.t_max,
        Encoding::Plain,
        &root.split("data"),
    )?;
    let mut metrics = Vec::new();
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for &h in &cfg.heads {
        let mut best: Option<(f64, usize, DiagHeadParams)> = None;
        let mut tried = 0;
        for r in 0..cfg.restarts.max(1) {
            tried += 1;
            let mut m = DiagHeadParams::random(
                h,
                d,
                cfg.t_max,
                cfg.init_scale,
                &mut root.split(&format!("H{h}/restart/{r}")),
            );
            let loss = fit(&mut m, &data, None, &cfg.train)?.final_train_loss;
            rows.push(vec![h.to_string(), r.to_string(), num(loss)]);
            if best.as_ref().is_none_or(|(l, _, _)| loss < *l) {
                best = Some((loss, r, m));
            }
            if loss < cfg.target_loss {
                break;
            }
        }
        let (loss, restart, m) = best.expect("at least one restart");
        let (b, gap) = j_block_distance(&m)?;
        let sv = singular_values(&m.coupling())?;
        let rank_ratio = if sv[0] > 0.0 && cfg.delta < sv.len() {
            sv[cfg.delta] / sv[0]
        } else {
            0.0
        };
        let r = check_optimum(OptimumParams::Diag(&m), OptimumFamily::Orthogonal)?;
        emit_diag(out, &format!("orthogonal_H{h}"), &m)?;
        checks.push(Check::below(
            format!("orthogonal H={h} loss"),
            loss,
            cfg.target_loss,
        ));
        checks.push(Check::below(
            format!("orthogonal H={h} J-block distance"),
            gap,
            cfg.tolerance,
        ));
        if h == cfg.delta {
            checks.push(Check::below(
                format!("orthogonal H={h} rank {}", cfg.delta),
                rank_ratio,
                cfg.rank_ratio,
            ));
        }
        metrics.push(json!({
            "heads": h,
            "restarts_tried": tried,
            "best_restart": restart,
            "loss": loss,
            "b": b,
            "j_block_gap": gap,
            "singular_values": sv,
            "rank_ratio": rank_ratio,
            "residuals": r.residuals,
        }));
    }
    out.csv(
        "orthogonal_restarts.csv",
        &["heads", "restart", "loss"],
        &rows,
    )?;
    Ok((Value::Array(metrics), checks))
}

fn augmented(
    cfg: &AugmentedRunConfig,
    root: &Rng,
    min_pass: f64,
    out: &mut Outputs,
) -> Result<(Value, Vec<Check>)> {
    let spec = ContextSpec::UnitaryDiagonal { d: cfg.d };
    let data = grid_dataset(&spec, cfg.grid_m, cfg.t_max, Encoding::Augmented)?;
    let mut passes = Vec::new();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for s in 0..cfg.seeds {
        let mut m =
            StructuredAugParams::random(&mut root.split(&format!("seed/{s}")), cfg.init_scale);
        let trace = fit(&mut m, &data, None, &cfg.train)?;
        let r = check_optimum(
            OptimumParams::Structured {
                params: &m,
                t_max: cfg.t_max,
                d: cfg.d,
            },
            OptimumFamily::Augmented,
        )?;
        let prod = (m.a3 * m.b1).abs();
        let ratios = [
            (m.a1 + m.a4).abs() / prod,
            m.a2.abs() / prod,
            m.b2.abs() / prod,
        ];
        let eta_gap = r.residuals["a3*b1-eta*"];
        let ok = eta_gap < cfg.tolerance && ratios.iter().all(|&x| x < cfg.ratio_tolerance);
        passes.push(ok);
        rows.push(vec![
            s.to_string(),
            num(trace.final_train_loss),
            num(m.a3 * m.b1),
            num(eta_gap),
            num(ratios[0]),
            num(ratios[1]),
            num(ratios[2]),
        ]);
        runs.push(json!({
            "seed": s,
            "loss": trace.final_train_loss,
            "params": m,
            "a3b1": m.a3 * m.b1,
            "eta_gap": eta_gap,
            "ratios": ratios,
        }));
    }
    out.csv(
        "augmented.csv",
        &["seed", "loss", "a3b1", "eta_gap", "a1+a4", "a2", "b2"],
        &rows,
    )?;
    let frac = pass_fraction(&passes);
    let check = Check::new(
        "augmented optimum recovered",
        frac >= min_pass,
        format!(
            "{frac} of seeds with |a3b1 - eta*|/eta* < {} and coefficient ratios < {}",
            cfg.tolerance, cfg.ratio_tolerance
        ),
    );
    Ok((json!({"pass_fraction": frac, "runs": runs}), vec![check]))
}

pub fn run(cfg: &VerifyOptimaConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let root = Rng::new(seed).split("verify-optima");
    let mut metrics = serde_json::Map::new();
    let mut checks = Vec::new();
    if let Some(c) = &cfg.unitary {
        let (m, mut k) = unitary(c, &root.split("unitary"), cfg.min_pass_fraction, out)?;
        metrics.insert("unitary".into(), m);
        checks.append(&mut k);
    }
    if let Some(c) = &cfg.orthogonal {
        let (m, mut k) = orthogonal(c, &root.split("orthogonal"), out)?;
        metrics.insert("orthogonal".into(), m);
        checks.append(&mut k);
    }
    if let Some(c) = &cfg.augmented {
        let (m, mut k) = augmented(c, &root.split("augmented"), cfg.min_pass_fraction, out)?;
        metrics.insert("augmented".into(), m);
        checks.append(&mut k);
    }
    Ok(Report {
        metrics: Value::Object(metrics),
        checks,
    })
}
