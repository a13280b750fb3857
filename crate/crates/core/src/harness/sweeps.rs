use serde_json::json;

use super::config::{DepthSweepConfig, HeadOrthogonalityConfig, HeadsSweepConfig};
use super::result::{num, Check, Outputs, Report};
use super::svg::Series;
use crate::ar_process::{make_dataset, ContextSpec, Dataset, Encoding, Example};
use crate::baselines::{inner_gd_loss, log_grid, tune_inner_gd, StepRule};
use crate::models::{AugStack, FullHeadParams};
use crate::training::{fit, head_orthogonality_matrix, off_diagonal_ratio, ValueHeads};
use crate::{Error, Mat, Result, Rng};

fn refs(d: &Dataset) -> Vec<&Example> {
    d.examples.iter().collect()
}

/// Loss of the all-zero predictor: `Σ_T ‖s_{T+1}‖²` averaged over sequences.
fn zero_predictor_loss(d: &Dataset) -> f64 {
    let total: f64 = d
        .examples
        .iter()
        .map(|ex| {
            (2..=ex.t_max())
                .map(|t| ex.target(t).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    total / d.len().max(1) as f64
}

pub fn depth(cfg: &DepthSweepConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let root = Rng::new(seed).split("depth-sweep");
    let spec = ContextSpec::GeneralOrthogonal { d: cfg.d };
    let train = make_dataset(
        &spec,
        cfg.n_train,
        cfg.t_max,
        Encoding::Augmented,
        &root.split("train"),
    )?;
    let test = make_dataset(
        &spec,
        cfg.n_test,
        cfg.t_max,
        Encoding::Augmented,
        &root.split("test"),
    )?;
    let test_refs = refs(&test);
    let etas = log_grid(cfg.eta_range.0, cfg.eta_range.1, cfg.eta_points);

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let (mut tf, mut gd, mut grid) = (Vec::new(), Vec::new(), Vec::new());
    for &l in &cfg.depths {
        let mut model = AugStack::random(
            cfg.d,
            l,
            cfg.init_scale,
            cfg.layer_norm,
            &mut root.split(&format!("L{l}")),
        );
        let (transformer, diverged) = match fit(&mut model, &train, Some(&test), &cfg.train) {
            Ok(trace) => {
                out.trace(&format!("depth_L{l}_trace.csv"), &trace)?;
                (trace.final_test_loss.unwrap_or(f64::NAN), None)
            }
            Err(e @ Error::Diverged { .. }) => (f64::NAN, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        let (eta, grid_loss) = tune_inner_gd(&test_refs, l, &etas)?;
        let ls_loss = inner_gd_loss(&test_refs, l, StepRule::LineSearch)?;
        let best = grid_loss.min(ls_loss);
        rows.push(vec![
            l.to_string(),
            num(transformer),
            num(best),
            num(grid_loss),
            num(eta),
            num(ls_loss),
        ]);
        runs.push(json!({
            "depth": l,
            "transformer_mse": transformer,
            "diverged": diverged,
            "gd_mse": best,
            "gd_grid_mse": grid_loss,
            "gd_grid_eta": eta,
            "gd_linesearch_mse": ls_loss,
        }));
        tf.push((l as f64, transformer));
        gd.push((l as f64, best));
        grid.push((l as f64, grid_loss));
    }
    out.csv(
        "depth_sweep.csv",
        &[
            "L",
            "transformer_mse",
            "gd_mse",
            "gd_grid_mse",
            "gd_grid_eta",
            "gd_linesearch_mse",
        ],
        &rows,
    )?;
    let finite = |v: &[(f64, f64)]| {
        v.iter()
            .copied()
            .filter(|p| p.1.is_finite() && p.1 > 0.0)
            .collect::<Vec<_>>()
    };
    let series = vec![
        Series::new("transformer", finite(&tf)),
        Series::new("inner GD (best rule)", finite(&gd)),
        Series::new("inner GD (fixed step)", finite(&grid)),
    ];
    if series.iter().all(|s| !s.points.is_empty()) {
        out.lines("depth_sweep.svg", &series, true)?;
    }

    let mut checks = Vec::new();
    if let Some(i) = cfg.depths.iter().position(|&l| l == 1) {
        let ratio = tf[i].1 / grid[i].1;
        checks.push(Check::new(
            "L=1 within 2x of one tuned GD step",
            (0.5..=2.0).contains(&ratio),
            format!("transformer / fixed-step GD = {ratio}"),
        ));
    }
    let decreasing = gd.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 < w[0].1);
    checks.push(Check::new(
        "GD MSE strictly decreasing in L",
        decreasing,
        format!("{:?}", gd.iter().map(|p| p.1).collect::<Vec<_>>()),
    ));
    for (i, &l) in cfg.depths.iter().enumerate() {
        if l >= 3 {
            checks.push(Check::new(
                format!("GD beats transformer at L={l}"),
                gd[i].1 < tf[i].1,
                format!("gd {} vs transformer {}", gd[i].1, tf[i].1),
            ));
        }
    }
    Ok(Report {
        metrics: json!({"zero_predictor_mse": zero_predictor_loss(&test), "runs": runs}),
        checks,
    })
}

pub fn heads(cfg: &HeadsSweepConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let root = Rng::new(seed).split("heads-sweep");
    let spec = ContextSpec::GeneralOrthogonal { d: cfg.d };
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut series = Vec::new();
    let mut gains = Vec::new();
    for &enc in &cfg.encodings {
        let train = make_dataset(&spec, cfg.n_train, cfg.t_max, enc, &root.split("train"))?;
        let test = make_dataset(&spec, cfg.n_test, cfg.t_max, enc, &root.split("test"))?;
        let zero = zero_predictor_loss(&test);
        let mut pts = Vec::new();
        for &h in &cfg.heads {
            let mut model = FullHeadParams::random(
                h,
                enc.token_dim(cfg.d),
                cfg.t_max,
                cfg.pos_rank,
                cfg.init_scale,
                cfg.pos_scale,
                &mut root.split(&format!("{}/H{h}", enc.name())),
            );
            let trace = fit(&mut model, &train, Some(&test), &cfg.train)?;
            let mse = trace.final_test_loss.unwrap_or(f64::NAN);
            rows.push(vec![
                enc.name().to_string(),
                h.to_string(),
                num(mse),
                num(mse / zero),
            ]);
            runs.push(json!({
                "encoding": enc.name(),
                "heads": h,
                "test_mse": mse,
                "relative_mse": mse / zero,
                "train_mse": trace.final_train_loss,
            }));
            pts.push((h as f64, mse / zero));
        }
        if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
            gains.push((enc, first.1 / last.1));
        }
        series.push(Series::new(enc.name(), pts));
    }
    out.csv(
        "heads_sweep.csv",
        &["encoding", "H", "test_mse", "relative_mse"],
        &rows,
    )?;
    if !series.is_empty() && series.iter().all(|s| !s.points.is_empty()) {
        out.lines("heads_sweep.svg", &series, false)?;
    }
    let gain = |e: Encoding| gains.iter().find(|g| g.0 == e).map(|g| g.1);
    let mut checks = Vec::new();
    if let Some(g) = gain(Encoding::Duplicated) {
        checks.push(Check::new(
            "duplicated: most heads improve MSE by >= 2x over fewest",
            g >= 2.0,
            format!("MSE ratio {g}"),
        ));
        if let Some(p) = gain(Encoding::Plain) {
            checks.push(Check::new(
                "plain encoding gains less from heads than duplicated",
                p < g,
                format!("plain {p} vs duplicated {g}"),
            ));
        }
    }
    let gains_json: serde_json::Map<String, serde_json::Value> = gains
        .iter()
        .map(|(e, g)| (e.name().to_string(), json!(g)))
        .collect();
    Ok(Report {
        metrics: json!({"runs": runs, "gain_first_to_last": gains_json}),
        checks,
    })
}

/// Mean over heads of the share of `‖B_h‖_F²` carried by its
/// `⌈d_e / H⌉` largest rows. Heads that write evenly to every coordinate
/// score about `1/H`; heads that write only to their own block score 1.
pub fn row_concentration(params: &impl ValueHeads) -> f64 {
    let maps = params.value_maps();
    let h = maps.len().max(1);
    let mut total = 0.0;
    for b in &maps {
        let mut rows: Vec<f64> = (0..b.rows())
            .map(|i| b.row(i).iter().map(|x| x * x).sum())
            .collect();
        let all: f64 = rows.iter().sum();
        if all == 0.0 {
            continue;
        }
        rows.sort_by(|a, b| b.total_cmp(a));
        let k = b.rows().div_ceil(h);
        total += rows[..k].iter().sum::<f64>() / all;
    }
    total / h as f64
}

pub fn head_orthogonality(
    cfg: &HeadOrthogonalityConfig,
    seed: u64,
    out: &mut Outputs,
) -> Result<Report> {
    let root = Rng::new(seed).split("head-orthogonality");
    let spec = ContextSpec::GeneralOrthogonal { d: cfg.d };
    let enc = Encoding::Duplicated;
    let train = make_dataset(&spec, cfg.n_train, cfg.t_max, enc, &root.split("train"))?;
    let mut model = FullHeadParams::equal_init(
        cfg.heads,
        enc.token_dim(cfg.d),
        cfg.t_max,
        cfg.pos_rank,
        cfg.init_scale,
        cfg.noise,
        &mut root.split("init"),
    );
    let m0 = head_orthogonality_matrix(&model);
    let (r0, c0) = (off_diagonal_ratio(&m0), row_concentration(&model));
    let trace = fit(&mut model, &train, None, &cfg.train)?;
    let m1 = head_orthogonality_matrix(&model);
    let (r1, c1) = (off_diagonal_ratio(&m1), row_concentration(&model));
    for (name, m) in [("init", &m0), ("trained", &m1)] {
        out.matrix_csv(&format!("head_gram_{name}.csv"), m)?;
        out.heatmap(&format!("head_gram_{name}.svg"), m)?;
    }
    for (h, b) in model.value_maps().iter().enumerate() {
        out.matrix_csv(&format!("head_B{h}_trained.csv"), b)?;
    }
    let as_rows = |m: &Mat| (0..m.rows()).map(|i| m.row(i).to_vec()).collect::<Vec<_>>();
    Ok(Report {
        metrics: json!({
            "off_diagonal_ratio_init": r0,
            "off_diagonal_ratio_trained": r1,
            "row_concentration_init": c0,
            "row_concentration_trained": c1,
            "train_mse": trace.final_train_loss,
            "gram_init": as_rows(&m0),
            "gram_trained": as_rows(&m1),
        }),
        checks: vec![
            Check::new(
                "off-diagonal ratio reduced >= 2x",
                r1 <= r0 / 2.0,
                format!("{r0} -> {r1}"),
            ),
            Check::new(
                "heads concentrate on fewer output rows",
                c1 > c0,
                format!("{c0} -> {c1}"),
            ),
        ],
    })
}
