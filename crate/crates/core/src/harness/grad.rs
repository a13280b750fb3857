use serde_json::json;

use super::config::{Family, GradCheckConfig};
use super::result::{num, Check, Outputs, Report};
use crate::ar_process::{make_dataset, ContextSpec, Dataset, Encoding, Example};
use crate::models::{AugStack, DiagHeadParams, FullHeadParams, PeOnlyParams, StructuredAugParams};
use crate::training::{grad_check, GradCheck, Model};
use crate::{Result, Rng};

fn check_on<M: Model>(model: &M, data: &Dataset, h: f64) -> Result<GradCheck> {
    model.check_data(data)?;
    let ex: Vec<&Example> = data.examples.iter().collect();
    grad_check(model, &ex, h)
}

/// A random small (model, batch) pair of `family`, checked at step `h`.
pub fn draw_check(family: Family, rng: &Rng, h: f64) -> Result<GradCheck> {
    let mut init = rng.split("model");
    let data_rng = rng.split("data");
    let variant = rng.split("variant").below(2);
    let n = 2 + rng.split("batch").below(3);
    match family {
        Family::StructuredAug => {
            let spec = ContextSpec::UnitaryDiagonal { d: 1 + variant };
            let data = make_dataset(&spec, n, 6, Encoding::Augmented, &data_rng)?;
            check_on(&StructuredAugParams::random(&mut init, 0.5), &data, h)
        }
        Family::AugStack => {
            let spec = ContextSpec::GeneralOrthogonal { d: 2 };
            let data = make_dataset(&spec, n, 5, Encoding::Augmented, &data_rng)?;
            let model = AugStack::random(2, 2, 0.3, variant == 1, &mut init);
            check_on(&model, &data, h)
        }
        Family::DiagMultihead => {
            let spec = ContextSpec::UnitaryDiagonal { d: 3 };
            let data = make_dataset(&spec, n, 6, Encoding::Plain, &data_rng)?;
            check_on(&DiagHeadParams::random(2, 3, 6, 0.5, &mut init), &data, h)
        }
        Family::FullMultihead => {
            let enc = [Encoding::Plain, Encoding::Duplicated][variant];
            let spec = ContextSpec::GeneralOrthogonal { d: 2 };
            let data = make_dataset(&spec, n, 5, enc, &data_rng)?;
            let model = FullHeadParams::random(2, enc.token_dim(2), 5, 2, 1.0, 0.5, &mut init);
            check_on(&model, &data, h)
        }
        Family::PeOnly => {
            let spec = ContextSpec::RestrictedArc { mu: 20.0 };
            let data = make_dataset(&spec, n, 6, Encoding::Plain, &data_rng)?;
            let mut model = PeOnlyParams::zeros(6);
            model.p = crate::Mat::from_vec(6, 6, init.normal_vec(36, 0.5))?;
            check_on(&model, &data, h)
        }
    }
}

/// Flip the sign of the largest-magnitude analytic coordinate.
pub fn inject_sign_flip(gc: &GradCheck) -> GradCheck {
    let mut analytic = gc.analytic.clone();
    if let Some(i) =
        (0..analytic.len()).max_by(|&a, &b| analytic[a].abs().total_cmp(&analytic[b].abs()))
    {
        analytic[i] = -analytic[i];
    }
    GradCheck::compare(analytic, gc.numeric.clone())
}

pub fn run(cfg: &GradCheckConfig, seed: u64, out: &mut Outputs) -> Result<Report> {
    let root = Rng::new(seed).split("grad-check");
    let mut worst = vec![0.0f64; cfg.families.len()];
    let mut counts = vec![0usize; cfg.families.len()];
    let mut rows = Vec::new();
    if !cfg.families.is_empty() {
        for i in 0..cfg.draws {
            let k = i % cfg.families.len();
            let family = cfg.families[k];
            let mut gc = draw_check(family, &root.split(&format!("draw/{i}")), cfg.fd_step)?;
            if cfg.inject_sign_flip {
                gc = inject_sign_flip(&gc);
            }
            worst[k] = worst[k].max(gc.rel_error);
            counts[k] += 1;
            rows.push(vec![
                i.to_string(),
                family.name().to_string(),
                gc.analytic.len().to_string(),
                num(gc.rel_error),
                num(gc.max_abs_error),
            ]);
        }
    }
    out.csv(
        "grad_check.csv",
        &["draw", "family", "params", "rel_error", "max_abs_error"],
        &rows,
    )?;
    let mut checks = Vec::new();
    let mut per_family = serde_json::Map::new();
    for (k, f) in cfg.families.iter().enumerate() {
        if counts[k] == 0 {
            continue;
        }
        per_family.insert(
            f.name().to_string(),
            json!({"draws": counts[k], "max_rel_error": worst[k]}),
        );
        checks.push(Check::below(
            format!("{} gradient", f.name()),
            worst[k],
            cfg.tolerance,
        ));
    }
    let overall = worst.iter().copied().fold(0.0, f64::max);
    Ok(Report {
        metrics: json!({
            "draws": rows.len(),
            "max_rel_error": overall,
            "families": per_family,
        }),
        checks,
    })
}
