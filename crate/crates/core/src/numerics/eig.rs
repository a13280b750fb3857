//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::complex::Complex;
use super::matrix::{CMatrix, Mat};
use crate::{Error, Result};

/// Off-diagonal Frobenius norm (relative to `‖S‖_F`) at which sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition with eigenvalues sorted descending; column `k` of
/// `vectors` pairs with `values[k]`.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEig {
    /// `V diag(σ) Vᵀ`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.values.len();
        Mat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                .sum()
        })
    }
}

fn off_norm(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a symmetric
/// matrix. Inputs asymmetric beyond `1e-10` (relative to the largest entry,
/// floored at one) are rejected.
pub fn sym_eig(s: &Mat) -> Result<SymEig> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::Dimension(format!(
            "{}x{} is not square",
            n,
            s.cols()
        )));
    }
    let scale = s.max_abs().max(1.0);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }

    let mut a = Mat::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = Mat::identity(n);
    let target = JACOBI_TOL * a.frob_norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

/// Moore–Penrose pseudo-inverse of a Hermitian matrix.
///
/// Uses the real symmetric embedding `[[Re, −Im], [Im, Re]]`, whose spectrum
/// is that of `G` with every eigenvalue doubled. Eigenvalues below
/// `rtol · σ_max` are treated as zero.
pub fn pinv_hermitian(g: &CMatrix, rtol: f64) -> Result<CMatrix> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::Dimension(
            "pseudo-inverse needs a square matrix".into(),
        ));
    }
    let emb = Mat::from_fn(2 * n, 2 * n, |r, c| {
        let z = g[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = sym_eig(&emb)?;
    let smax = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = rtol * smax;
    let m = 2 * n;
    let mut inv = Mat::zeros(m, m);
    for k in 0..m {
        let s = eig.values[k];
        if s.abs() <= cutoff || s == 0.0 {
            continue;
        }
        for i in 0..m {
            let vi = eig.vectors[(i, k)] / s;
            for j in 0..m {
                inv[(i, j)] += vi * eig.vectors[(j, k)];
            }
        }
    }
    Ok(CMatrix::from_fn(n, n, |r, c| {
        Complex::new(inv[(r, c)], inv[(r + n, c)])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn random_sym(n: usize, rng: &mut Rng) -> Mat {
        let a = Mat::from_fn(n, n, |_, _| rng.normal());
        a.add(&a.transpose())
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eig(&Mat::identity(5)).unwrap();
        assert!(e.values.iter().all(|v| (*v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn all_ones_is_rank_one() {
        let t = 6;
        let e = sym_eig(&Mat::from_fn(t, t, |_, _| 1.0)).unwrap();
        assert!((e.values[0] - t as f64).abs() < 1e-12);
        assert!(e.values[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn residuals_and_reconstruction() {
        let mut rng = Rng::new(11);
        for n in [1, 2, 5, 12, 30] {
            let s = random_sym(n, &mut rng);
            let e = sym_eig(&s).unwrap();
            let norm = s.frob_norm();
            for k in 0..n {
                let v = e.vectors.col(k);
                let sv = s.matvec(&v);
                let r: f64 = sv
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - e.values[k] * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(r < 1e-8 * norm);
            }
            assert!(e.reconstruct().sub(&s).frob_norm() < 1e-7 * norm);
            assert!(e.vectors.orthogonality_defect() < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn pinv_of_rank_deficient_hermitian() {
        let x = crate::CVector(vec![Complex::new(1.0, 1.0), Complex::new(0.0, 2.0)]);
        let g = CMatrix::outer(&x, &x);
        let p = pinv_hermitian(&g, 1e-10).unwrap();
        // G P G = G
        let gpg = g.matmul(&p).unwrap().matmul(&g).unwrap();
        assert!(gpg.max_abs_diff(&g) < 1e-12);
    }
}
