use std::f64::consts::TAU;

use super::complex::{unit_complex, Complex};
use super::matrix::Mat;
use super::rng::Rng;
use crate::{Error, Result};

/// Uniform draw from the unit circle.
pub fn sample_unit_complex(rng: &mut Rng) -> Complex {
    unit_complex(TAU * rng.uniform())
}

/// The `M`-th roots of unity `exp(2πi m/M)`, `m = 0..M`.
///
/// Averaging `λ^k` over this grid returns exactly `δ_{k≡0 mod M}`, so any
/// Laurent polynomial whose exponents satisfy `|k| < M` has its circle average
/// reproduced exactly.
pub fn roots_of_unity_grid(m: usize) -> Result<Vec<Complex>> {
    if m == 0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    Ok((0..m)
        .map(|k| match (4 * k) % m {
            // exact values at the quarter points
            0 if (4 * k) / m == 0 => Complex::new(1.0, 0.0),
            0 if (4 * k) / m == 1 => Complex::new(0.0, 1.0),
            0 if (4 * k) / m == 2 => Complex::new(-1.0, 0.0),
            0 if (4 * k) / m == 3 => Complex::new(0.0, -1.0),
            _ => unit_complex(TAU * k as f64 / m as f64),
        })
        .collect())
}

/// Householder QR of a square or tall matrix; returns `(Q, R)` with `Q`
/// square orthogonal.
pub fn householder_qr(a: &Mat) -> (Mat, Mat) {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut q = Mat::identity(m);
    for k in 0..n.min(m.saturating_sub(1)) {
        let norm: f64 = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for j in 0..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                r[(i, j)] -= f * v[i - k];
            }
        }
        // Q ← Q H
        for i in 0..m {
            let dot: f64 = (k..m).map(|j| q[(i, j)] * v[j - k]).sum();
            let f = 2.0 * dot / vnorm2;
            for j in k..m {
                q[(i, j)] -= f * v[j - k];
            }
        }
    }
    (q, r)
}

/// Haar-distributed orthogonal `d×d` matrix.
///
/// QR of a standard Gaussian matrix, with each column of `Q` multiplied by
/// the sign of the matching diagonal entry of `R`. Without that correction the
/// result is orthogonal but not Haar.
pub fn haar_orthogonal(d: usize, rng: &mut Rng) -> Result<Mat> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let g = Mat::from_fn(d, d, |_, _| rng.normal());
    let (mut q, r) = householder_qr(&g);
    for c in 0..d {
        if r[(c, c)] < 0.0 {
            for i in 0..d {
                q[(i, c)] = -q[(i, c)];
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_draws_have_unit_modulus() {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            assert!((sample_unit_complex(&mut rng).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_draws_average_to_zero() {
        let mut rng = Rng::new(2);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_unit_complex(&mut rng))
            .sum::<Complex>()
            / n as f64;
        assert!(mean.norm() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn small_grids() {
        assert_eq!(
            roots_of_unity_grid(1).unwrap(),
            vec![Complex::new(1.0, 0.0)]
        );
        assert_eq!(
            roots_of_unity_grid(2).unwrap(),
            vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]
        );
        assert_eq!(
            roots_of_unity_grid(4).unwrap(),
            vec![
                Complex::new(1.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(-1.0, 0.0),
                Complex::new(0.0, -1.0)
            ]
        );
        assert!(roots_of_unity_grid(0).is_err());
    }

    #[test]
    fn grid_quadrature_is_exact_below_grid_size() {
        let m = 8;
        let grid = roots_of_unity_grid(m).unwrap();
        for k in -(m as i64 - 1)..(m as i64) {
            let avg = grid
                .iter()
                .map(|z| super::super::cpow(*z, k))
                .sum::<Complex>()
                / m as f64;
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert!((avg - expect).norm() < 1e-14, "k={k}: {avg}");
        }
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = Rng::new(3);
        let a = Mat::from_fn(5, 5, |_, _| rng.normal());
        let (q, r) = householder_qr(&a);
        assert!(q.orthogonality_defect() < 1e-12);
        assert!(q.matmul(&r).unwrap().sub(&a).max_abs() < 1e-12);
        for i in 0..5 {
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = Rng::new(4);
        let one = haar_orthogonal(1, &mut rng).unwrap();
        assert_eq!(one[(0, 0)].abs(), 1.0);
        for d in 1..8 {
            let r = haar_orthogonal(d, &mut rng).unwrap();
            assert!(r.orthogonality_defect() < 1e-10);
        }
    }

    #[test]
    fn haar_second_moment() {
        // E[R_11²] = 1/d for the Haar measure.
        let mut rng = Rng::new(5);
        let d = 4;
        let n = 10_000;
        let m: f64 = (0..n)
            .map(|_| haar_orthogonal(d, &mut rng).unwrap()[(0, 0)].powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((m - 1.0 / d as f64).abs() < 5e-2);
    }

    #[test]
    fn haar_first_row_sign_is_balanced() {
        // Without the sign correction, R_11 would be biased toward one sign.
        let mut rng = Rng::new(6);
        let n = 4000;
        let mean: f64 = (0..n)
            .map(|_| haar_orthogonal(3, &mut rng).unwrap()[(0, 0)])
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }
}
