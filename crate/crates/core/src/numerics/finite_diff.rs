//! Central finite differences, used as the independent oracle for every
//! analytic gradient and Hessian in the crate.

use crate::{Error, Result};

/// Default step for parameters of magnitude O(1). Callers override it per
/// call; Hessians of exact quadratics are better served by ~1e-3.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

fn eval(f: &impl Fn(&[f64]) -> f64, x: &[f64], coord: usize, offset: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { coord, offset })
    }
}

/// Central-difference gradient, O(h²) accurate.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let mut p = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let fp = eval(&f, &p, i, h)?;
        p[i] = x[i] - h;
        let fm = eval(&f, &p, i, -h)?;
        p[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Central-difference Hessian (row-major `n×n`), symmetrized.
pub fn finite_diff_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let n = x.len();
    let mut p = x.to_vec();
    let f0 = eval(&f, &p, 0, 0.0)?;
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        p[i] = x[i] + h;
        let fp = eval(&f, &p, i, h)?;
        p[i] = x[i] - h;
        let fm = eval(&f, &p, i, -h)?;
        p[i] = x[i];
        hess[i * n + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                p[i] = x[i] + si * h;
                p[j] = x[j] + sj * h;
                let v = eval(&f, &p, i, si * h);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * h * h);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    Ok(hess)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square() {
        let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], DEFAULT_FD_STEP).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 0.5], DEFAULT_FD_STEP).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn norm_squared_hessian() {
        let x = [0.3, -1.2, 2.0];
        let h = finite_diff_hessian(|x| x.iter().map(|v| v * v).sum(), &x, 1e-3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 } else { 0.0 };
                assert!((h[i * 3 + j] - e).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn non_finite_names_coordinate() {
        let err = finite_diff_grad(
            |x| if x[1] > 1.0 { f64::NAN } else { 0.0 },
            &[0.0, 1.0],
            1e-3,
        )
        .unwrap_err();
        match err {
            Error::NonFinite { coord, .. } => assert_eq!(coord, 1),
            other => panic!("unexpected {other}"),
        }
    }
}
