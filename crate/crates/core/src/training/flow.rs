use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default Euler step.
pub const FLOW_STEP: f64 = 1e-3;

/// `(pab − 1)²`.
pub fn scalar_loss(a: f64, b: f64, p: f64) -> f64 {
    (p * a * b - 1.0).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub time: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub time: f64,
    pub steps: usize,
    /// Largest single-step loss increase (≤ 0 when the loss is monotone).
    pub max_energy_increase: f64,
    /// Max coordinate gap between this run and a half-step rerun to the
    /// same time.
    pub richardson_gap: f64,
    /// Every 100th state plus the last one.
    pub trajectory: Vec<FlowPoint>,
}

fn euler(state: [f64; 3], step: f64) -> [f64; 3] {
    let [a, b, p] = state;
    let r = 2.0 * (p * a * b - 1.0);
    [
        a - step * r * p * b,
        b - step * r * p * a,
        p - step * r * a * b,
    ]
}

/// Explicit-Euler gradient flow on `(pab − 1)²` from an initialization with
/// `|a₀b₀p₀ − 1| < 1`, stopped once `|abp − 1| < tol`.
pub fn gradient_flow_scalar(
    a0: f64,
    b0: f64,
    p0: f64,
    step: f64,
    tol: f64,
    max_time: f64,
) -> Result<FlowResult> {
    let gap0 = (a0 * b0 * p0 - 1.0).abs();
    if !(gap0 < 1.0) {
        return Err(Error::Precondition(format!(
            "|a·b·p − 1| = {gap0} is not < 1"
        )));
    }
    if !(step > 0.0 && tol > 0.0 && max_time > 0.0) {
        return Err(Error::InvalidArgument(
            "step, tol and max_time must be > 0".into(),
        ));
    }
    let mut s = [a0, b0, p0];
    let mut loss = scalar_loss(a0, b0, p0);
    let point = |s: [f64; 3], steps: usize, loss: f64| FlowPoint {
        time: steps as f64 * step,
        a: s[0],
        b: s[1],
        p: s[2],
        loss,
    };
    let mut trajectory = vec![point(s, 0, loss)];
    let mut steps = 0;
    let mut max_inc = f64::NEG_INFINITY;
    while (s[0] * s[1] * s[2] - 1.0).abs() >= tol {
        if steps as f64 * step > max_time {
            return Err(Error::NotConverged(format!(
                "|abp − 1| = {:e} after time {max_time}",
                (s[0] * s[1] * s[2] - 1.0).abs()
            )));
        }
        s = euler(s, step);
        steps += 1;
        let next = scalar_loss(s[0], s[1], s[2]);
        max_inc = max_inc.max(next - loss);
        loss = next;
        if steps % 100 == 0 {
            trajectory.push(point(s, steps, loss));
        }
    }
    if trajectory.last().map(|p| p.time) != Some(steps as f64 * step) {
        trajectory.push(point(s, steps, loss));
    }
    let mut half = [a0, b0, p0];
    for _ in 0..2 * steps {
        half = euler(half, step / 2.0);
    }
    let richardson_gap = (0..3).map(|i| (s[i] - half[i]).abs()).fold(0.0, f64::max);
    Ok(FlowResult {
        a: s[0],
        b: s[1],
        p: s[2],
        time: steps as f64 * step,
        steps,
        max_energy_increase: if steps == 0 { 0.0 } else { max_inc },
        richardson_gap,
        trajectory,
    })
}
