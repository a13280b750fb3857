use serde_json::json;

use super::config::{GradientFlowConfig, HessianConfig, PeSweepConfig};
use super::result::{num, Check, Outputs, Report};
use super::svg::Series;
use crate::closed_form::{pe_hessian, pe_loss_and_grad};
use crate::models::sinusoidal_encoding;
use crate::numerics::{finite_diff_hessian, sym_eig};
use crate::training::{
    diagonal_invariance, early_stopped_pe_fit, gradient_flow_scalar, off_target_mass,
};
use crate::{Error, Mat, Result, Rng};

/// `row[T−2] > row[T−3] > row[T−4]`: the three most recent off-target
/// positions ranked in recency order.
fn recency_ordered(row: &[f64]) -> bool {
    let t = row.len();
    t >= 4 && row[t - 2] > row[t - 3] && row[t - 3] > row[t - 4]
}

pub fn pe_sweep(cfg: &PeSweepConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let root = Rng::new(seed).split("pe-sweep");
    let t = cfg.t_max;
    let first_row = cfg.first_row.unwrap_or(t / 2);
    let pe = sinusoidal_encoding(t, cfg.cosine_dim);
    let gram = pe.matmul(&pe.transpose())?;
    let mut cos_row = gram.row(t - 1).to_vec();
    cos_row[t - 1] = 0.0;
    let cos_ordered = recency_ordered(&cos_row);

    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let mut checks = Vec::new();
    let mut masses = Vec::new();
    for &mu in &cfg.mus {
        let f = early_stopped_pe_fit(
            t,
            mu,
            cfg.n,
            cfg.threshold,
            &root.split(&format!("mu/{mu}")),
        )?;
        let mut shown = f.params.p.clone();
        for tt in 2..=t {
            shown[(tt - 2, tt - 1)] = 0.0;
        }
        let shown = Mat::from_fn(t - 1, t, |r, c| shown[(r, c)]);
        let last = shown.row(t - 2).to_vec();
        let mass = off_target_mass(&f.params);
        let inv = diagonal_invariance(&f.params, first_row);
        let ordered = recency_ordered(&last);
        masses.push(mass);
        out.matrix_csv(&format!("pe_mu{mu}.csv"), &shown)?;
        out.heatmap(&format!("pe_mu{mu}.svg"), &shown)?;
        for (k, x) in last.iter().enumerate() {
            rows.push(vec![num(mu), (k + 1).to_string(), num(*x)]);
        }
        profiles.push(Series::new(
            format!("mu={mu}"),
            last.iter()
                .enumerate()
                .map(|(k, &x)| ((k + 1) as f64, x))
                .collect(),
        ));
        checks.push(Check::below(
            format!("mu={mu} diagonal invariance"),
            inv,
            0.1,
        ));
        checks.push(Check::new(
            format!("mu={mu} recency ordering matches cosine encoding"),
            ordered && cos_ordered,
            format!("trained {ordered}, cosine {cos_ordered}"),
        ));
        runs.push(json!({
            "mu": mu,
            "iterations": f.iterations,
            "final_loss": f.final_loss,
            "reached_threshold": f.reached_threshold,
            "off_target_mass": mass,
            "diagonal_invariance": inv,
            "last_row_masked": last,
        }));
    }
    let increasing = masses.windows(2).all(|w| w[1] > w[0]);
    checks.push(Check::new(
        "off-target mass strictly increasing over the mu grid",
        increasing,
        format!("{masses:?}"),
    ));
    out.csv("pe_last_rows.csv", &["mu", "t", "p"], &rows)?;
    out.matrix_csv("cosine_gram.csv", &gram)?;
    out.heatmap("cosine_gram.svg", &gram)?;
    if !profiles.is_empty() {
        profiles.push(Series::new(
            "cosine Gram / dim",
            cos_row
                .iter()
                .enumerate()
                .map(|(k, &x)| ((k + 1) as f64, x / cfg.cosine_dim as f64))
                .collect(),
        ));
        out.lines("pe_last_rows.svg", &profiles, false)?;
    }
    Ok(Report {
        metrics: json!({
            "first_row": first_row,
            "cosine_last_row_masked": cos_row,
            "runs": runs,
        }),
        checks,
    })
}

pub fn hessian(cfg: &HessianConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let root = Rng::new(seed).split("hessian");
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut checks = Vec::new();
    let mut worst_fd: f64 = 0.0;
    for &t in &cfg.ts {
        let mut ratios = Vec::new();
        for &mu in &cfg.mus {
            let h = pe_hessian(t, mu)?;
            let eig = sym_eig(&h)?;
            let mut values = eig.values.clone();
            values.sort_by(|a, b| b.total_cmp(a));
            for (k, v) in values.iter().enumerate() {
                rows.push(vec![t.to_string(), num(mu), (k + 1).to_string(), num(*v)]);
            }
            let x = root.split(&format!("T{t}/mu{mu}")).normal_vec(t, 1.0);
            let fd = finite_diff_hessian(
                |p| pe_loss_and_grad(p, t, mu).map(|r| r.0).unwrap_or(f64::NAN),
                &x,
                cfg.fd_step,
            )?;
            let fd_err = fd
                .iter()
                .zip(h.as_slice())
                .map(|(a, b)| (a - 2.0 * b).abs())
                .fold(0.0, f64::max);
            worst_fd = worst_fd.max(fd_err);
            let identity_err = h.sub(&Mat::identity(t)).max_abs();
            let ratio = if values.len() > 1 {
                values[1] / values[0]
            } else {
                0.0
            };
            ratios.push(ratio);
            if mu == 4.0 {
                checks.push(Check::below(
                    format!("T={t} mu=4 is the identity"),
                    identity_err,
                    1e-12,
                ));
            }
            if t == 10 && mu == 300.0 {
                let r = values[0] / t as f64;
                checks.push(Check::new(
                    "sigma1(300)/10 in [0.95, 1]",
                    (0.95..=1.0).contains(&r),
                    format!("{r}"),
                ));
            }
            runs.push(json!({
                "T": t,
                "mu": mu,
                "eigenvalues": values,
                "fd_max_error": fd_err,
                "identity_distance": identity_err,
                "sigma2_over_sigma1": ratio,
            }));
        }
        if t >= 2 {
            let mut order: Vec<usize> = (0..cfg.mus.len()).collect();
            order.sort_by(|&a, &b| cfg.mus[a].total_cmp(&cfg.mus[b]));
            let collapsing = order
                .windows(2)
                .all(|w| ratios[w[1]] < ratios[w[0]] || cfg.mus[w[1]] == cfg.mus[w[0]]);
            checks.push(Check::new(
                format!("T={t} sigma2/sigma1 decreasing in mu"),
                collapsing,
                format!("{ratios:?}"),
            ));
        }
    }
    checks.insert(
        0,
        Check::below("analytic vs finite-difference Hessian", worst_fd, 1e-6),
    );
    out.csv(
        "hessian_spectrum.csv",
        &["T", "mu", "k", "eigenvalue"],
        &rows,
    )?;
    Ok(Report {
        metrics: json!({"fd_max_error": worst_fd, "runs": runs}),
        checks,
    })
}

/// Random initializations in `(0.1, 2)³` with `|abp − 1| < 1`.
pub fn admissible_inits(n: usize, rng: &Rng) -> Vec<[f64; 3]> {
    let mut r = rng.clone();
    let mut inits = Vec::with_capacity(n);
    while inits.len() < n {
        let x = [
            r.uniform_in(0.1, 2.0),
            r.uniform_in(0.1, 2.0),
            r.uniform_in(0.1, 2.0),
        ];
        if (x[0] * x[1] * x[2] - 1.0).abs() < 1.0 {
            inits.push(x);
        }
    }
    inits
}

pub fn gradient_flow(cfg: &GradientFlowConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let mut inits = admissible_inits(cfg.inits, &Rng::new(seed).split("gradient-flow"));
    inits.extend(cfg.explicit.iter().copied());
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let (mut worst_gap, mut worst_energy, mut worst_rich): (f64, f64, f64) =
        (0.0, f64::NEG_INFINITY, 0.0);
    for (i, &[a, b, p]) in inits.iter().enumerate() {
        let r = gradient_flow_scalar(a, b, p, cfg.step, cfg.tol, cfg.max_time).map_err(
            |e| match e {
                Error::Precondition(m) => {
                    Error::Precondition(format!("init {i} ({a}, {b}, {p}): {m}"))
                }
                other => other,
            },
        )?;
        let gap = (r.a * r.b * r.p - 1.0).abs();
        worst_gap = worst_gap.max(gap);
        worst_energy = worst_energy.max(r.max_energy_increase);
        worst_rich = worst_rich.max(r.richardson_gap);
        for pt in &r.trajectory {
            rows.push(vec![
                i.to_string(),
                num(pt.time),
                num(pt.a),
                num(pt.b),
                num(pt.p),
                num(pt.loss),
            ]);
        }
        runs.push(json!({
            "init": [a, b, p],
            "final": [r.a, r.b, r.p],
            "final_gap": gap,
            "time": r.time,
            "steps": r.steps,
            "max_energy_increase": r.max_energy_increase,
            "richardson_gap": r.richardson_gap,
            "balance_drift": ((r.a * r.a - r.b * r.b) - (a * a - b * b)).abs(),
        }));
    }
    out.csv(
        "gradient_flow.csv",
        &["init", "time", "a", "b", "p", "loss"],
        &rows,
    )?;
    let series: Vec<Series> = (0..inits.len().min(6))
        .map(|i| {
            let pts = rows
                .iter()
                .filter(|r| r[0] == i.to_string())
                .map(|r| {
                    (
                        r[1].parse().unwrap_or(0.0),
                        r[5].parse::<f64>().unwrap_or(0.0).max(1e-30),
                    )
                })
                .collect();
            Series::new(format!("init {i}"), pts)
        })
        .collect();
    if !series.is_empty() {
        out.lines("gradient_flow.svg", &series, true)?;
    }
    if inits.is_empty() {
        worst_energy = 0.0;
    }
    Ok(Report {
        metrics: json!({
            "runs": runs,
            "max_final_gap": worst_gap,
            "max_energy_increase": worst_energy,
            "max_richardson_gap": worst_rich,
        }),
        checks: vec![
            Check::below("all runs reach |abp - 1| < tol", worst_gap, cfg.tol),
            Check::new(
                "loss non-increasing along every trajectory",
                worst_energy <= 1e-9,
                format!("largest step increase {worst_energy:e}"),
            ),
            Check::below("half-step rerun agrees", worst_rich, 1e-2),
        ],
    })
}
