use std::f64::consts::PI;

use crate::{Error, Mat, Result};

/// `E[Re λ^{2k}]` for `λ = e^{iθ/μ}`, `θ ~ U(0, 2π)`: `sin(4πk/μ) / (4πk/μ)`.
fn arc_moment(k: i64, mu: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let x = 4.0 * PI * k as f64 / mu;
    x.sin() / x
}

/// Kernel of the quadratic part of the positional-encoding-only loss,
/// `H_{t,t'} = μ/(4π(t'−t)) · sin(4π(t'−t)/μ)`, unit diagonal. The literal
/// second derivative of the loss is `2H`.
pub fn pe_hessian(t: usize, mu: f64) -> Result<Mat> {
    if t == 0 || !(mu >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need T ≥ 1 and μ ≥ 1 (T={t}, μ={mu})"
        )));
    }
    Ok(Mat::from_fn(t, t, |r, c| {
        arc_moment(c as i64 - r as i64, mu)
    }))
}

/// Linear coefficients `E[Re λ^{2t−T} conj(λ^T)] = H_{t,T}`.
pub fn pe_cross_term(t: usize, mu: f64) -> Result<Vec<f64>> {
    let h = pe_hessian(t, mu)?;
    Ok(h.col(t - 1))
}

/// Arc-averaged loss `pᵀHp − 2⟨h, p⟩ + 1` and its gradient `2(Hp − h)`.
pub fn pe_loss_and_grad(p: &[f64], t: usize, mu: f64) -> Result<(f64, Vec<f64>)> {
    if p.len() != t {
        return Err(Error::Dimension(format!(
            "p has length {}, expected {t}",
            p.len()
        )));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite positional weights".into(),
        ));
    }
    let h = pe_hessian(t, mu)?;
    let hp = h.matvec(p);
    let cross = h.col(t - 1);
    let loss = p.iter().zip(&hp).map(|(a, b)| a * b).sum::<f64>()
        - 2.0 * p.iter().zip(&cross).map(|(a, b)| a * b).sum::<f64>()
        + 1.0;
    let grad = hp.iter().zip(&cross).map(|(a, b)| 2.0 * (a - b)).collect();
    Ok((loss, grad))
}
