use serde::{Deserialize, Serialize};

use super::{loss_and_grad, Model};
use crate::ar_process::Example;
use crate::numerics::finite_diff_grad;
use crate::Result;

/// Analytic versus central-difference gradient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `‖analytic − numeric‖_∞ / max(‖numeric‖_∞, 1e-12)`.
    pub rel_error: f64,
    pub max_abs_error: f64,
}

impl GradCheck {
    pub fn compare(analytic: Vec<f64>, numeric: Vec<f64>) -> GradCheck {
        let max_abs_error = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, f)| (a - f).abs())
            .fold(0.0, f64::max);
        let scale = numeric
            .iter()
            .map(|f| f.abs())
            .fold(0.0, f64::max)
            .max(1e-12);
        GradCheck {
            rel_error: max_abs_error / scale,
            max_abs_error,
            analytic,
            numeric,
        }
    }
}

/// Compare the analytic gradient of the mean loss over `examples` with
/// central differences of step `h`.
pub fn grad_check<M: Model>(model: &M, examples: &[&Example], h: f64) -> Result<GradCheck> {
    let (_, analytic) = loss_and_grad(model, examples);
    let n = examples.len().max(1) as f64;
    let numeric = finite_diff_grad(
        |x| {
            let mut m = model.clone();
            m.set_from(x).expect("same layout");
            m.loss_sum(examples, None) / n
        },
        &model.to_vec(),
        h,
    )?;
    Ok(GradCheck::compare(analytic, numeric))
}
