use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::models::StructuredAugParams;
use crate::numerics::{cpow, CVector, Complex, Mat};
use crate::{Error, Result};

/// Population loss of the diagonal multi-head model at one prefix length `T`
/// on the unitary diagonal ensemble, as a function of `C = BᵀA` and the row
/// `p = (P_{T−1,1}, …, P_{T−1,T})`:
///
/// `‖p‖² ‖C‖_F² + p_{T−1}² (S(CᵀC) − ‖C‖_F²) − 2 Tr(C) p_T + d`,
///
/// where `S` sums all entries. The `−‖C‖_F²` correction removes the `j = k`
/// terms, which are already counted in the first summand.
pub fn quadratic_loss(c: &Mat, p: &[f64], t: usize, d: usize) -> Result<f64> {
    if c.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "C is {:?}, expected {d}×{d}",
            c.shape()
        )));
    }
    if t < 2 || p.len() < t {
        return Err(Error::InvalidArgument(format!(
            "need T ≥ 2 and |p| ≥ T (T={t}, |p|={})",
            p.len()
        )));
    }
    let p = &p[..t];
    let pn: f64 = p.iter().map(|x| x * x).sum();
    let frob = c.frob_norm_sqr();
    let ctc = c.transpose().matmul(c)?;
    let s = ctc.sum();
    let prev = p[t - 2];
    Ok(pn * frob + prev * prev * (s - frob) - 2.0 * c.trace() * p[t - 1] + d as f64)
}

/// `(T_max − 1) ‖BᵀA − I‖_F²`: the loss with every positional row fixed at
/// `δ_{t=T}`.
pub fn restricted_optimum_loss(a: &Mat, b: &Mat, t_max: usize) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension("A and B must have equal shapes".into()));
    }
    let c = b.transpose().matmul(a)?;
    let d = c.rows();
    Ok((t_max as f64 - 1.0) * c.sub(&Mat::identity(d)).frob_norm_sqr())
}

fn k_t(t: usize, d: usize) -> f64 {
    let t = t as f64;
    t * t + (d as f64 - 1.0) * t
}

/// Optimal one-step size `Σ_{T=2}^{T_max} T / Σ_{T=2}^{T_max} (T² + (d−1)T)`.
pub fn eta_star(t_max: usize, d: usize) -> Result<f64> {
    if t_max < 2 || d == 0 {
        return Err(Error::InvalidArgument("need T_max ≥ 2 and d ≥ 1".into()));
    }
    let num: f64 = (2..=t_max).map(|t| t as f64).sum();
    let den: f64 = (2..=t_max).map(|t| k_t(t, d)).sum();
    Ok(num / den)
}

/// Augmented-model loss along the one-step line `c_{−1,0} = η`, all other
/// coefficients zero: `d Σ_T (η² (T² + (d−1)T) − 2ηT + 1)`.
pub fn augmented_reduced_loss(eta: f64, t_max: usize, d: usize) -> f64 {
    d as f64
        * (2..=t_max)
            .map(|t| eta * eta * k_t(t, d) - 2.0 * eta * t as f64 + 1.0)
            .sum::<f64>()
}

/// Products `c_{α,β} = u_α v_β` with `α ∈ {−1,0,1}`, `β ∈ {−1,0}`, where
/// `u_0 = a1 + a4`, `u_1 = a2`, `u_{−1} = a3`, `v_0 = b1`, `v_{−1} = b2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugCoefficients {
    /// `c[α + 1][β + 1]`.
    pub c: [[f64; 2]; 3],
}

pub fn structured_aug_coefficients(params: &StructuredAugParams) -> AugCoefficients {
    let u = [params.a3, params.a1 + params.a4, params.a2];
    let v = [params.b2, params.b1];
    let mut c = [[0.0; 2]; 3];
    for (ci, ui) in c.iter_mut().zip(u) {
        for (cij, vj) in ci.iter_mut().zip(v) {
            *cij = ui * vj;
        }
    }
    AugCoefficients { c }
}

impl AugCoefficients {
    pub fn get(&self, alpha: i64, beta: i64) -> f64 {
        self.c[(alpha + 1) as usize][(beta + 1) as usize]
    }

    fn terms(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        (-1..=1).flat_map(move |a| (-1..=0).map(move |b| (a, b, self.get(a, b))))
    }

    /// Model output on a spectral context, written in coefficient form:
    /// `out_i = Σ_{t,j,α,β} c_{α,β} λ_j^{T−t−α} λ_i^{t−1+β}`.
    pub fn forward(&self, lambda: &CVector, t: usize) -> CVector {
        let t = t as i64;
        let d = lambda.len();
        CVector(
            (0..d)
                .map(|i| {
                    let mut acc = Complex::new(0.0, 0.0);
                    for s in 1..=t {
                        for (a, b, c) in self.terms() {
                            let sj: Complex = (0..d).map(|j| cpow(lambda[j], t - s - a)).sum();
                            acc += c * sj * cpow(lambda[i], s - 1 + b);
                        }
                    }
                    acc
                })
                .collect(),
        )
    }

    /// Exact expectation of `Σ_{T=2}^{T_max} ‖out − λ^T‖²` over the unitary
    /// diagonal ensemble, obtained by collecting monomials: distinct Laurent
    /// monomials are orthonormal on the torus.
    pub fn population_loss(&self, t_max: usize, d: usize) -> f64 {
        let mut total = 0.0;
        for t in 2..=t_max as i64 {
            // monomials in λ_i alone, and in (λ_j, λ_i) for one fixed j ≠ i
            let mut own: HashMap<i64, f64> = HashMap::new();
            let mut mixed: HashMap<(i64, i64), f64> = HashMap::new();
            for s in 1..=t {
                for (a, b, c) in self.terms() {
                    if c == 0.0 {
                        continue;
                    }
                    let (ej, ei) = (t - s - a, s - 1 + b);
                    *own.entry(ej + ei).or_default() += c;
                    if d > 1 {
                        if ej == 0 {
                            *own.entry(ei).or_default() += (d as f64 - 1.0) * c;
                        } else {
                            *mixed.entry((ej, ei)).or_default() += c;
                        }
                    }
                }
            }
            *own.entry(t).or_default() -= 1.0;
            let own_sq: f64 = own.values().map(|x| x * x).sum();
            let mixed_sq: f64 = mixed.values().map(|x| x * x).sum();
            total += own_sq + (d as f64 - 1.0) * mixed_sq;
        }
        d as f64 * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{roots_of_unity_grid, Rng};

    #[test]
    fn quadratic_loss_examples() {
        let p = [0.0, 1.0];
        assert!(quadratic_loss(&Mat::identity(2), &p, 2, 2).unwrap().abs() < 1e-15);
        assert!(
            (quadratic_loss(&Mat::identity(2).scale(2.0), &p, 2, 2).unwrap() - 2.0).abs() < 1e-14
        );
    }

    #[test]
    fn restricted_examples() {
        let i3 = Mat::identity(3);
        assert_eq!(restricted_optimum_loss(&i3, &i3, 4).unwrap(), 0.0);
        assert_eq!(
            restricted_optimum_loss(&Mat::zeros(3, 3), &i3, 4).unwrap(),
            9.0
        );
        let mut rng = Rng::new(1);
        let a = Mat::from_vec(4, 3, rng.normal_vec(12, 1.0)).unwrap();
        let b = Mat::from_vec(4, 3, rng.normal_vec(12, 1.0)).unwrap();
        let c = b.transpose().matmul(&a).unwrap();
        let summed: f64 = (2..=6)
            .map(|t| {
                let mut p = vec![0.0; t];
                p[t - 1] = 1.0;
                quadratic_loss(&c, &p, t, 3).unwrap()
            })
            .sum();
        assert!((summed - restricted_optimum_loss(&a, &b, 6).unwrap()).abs() < 1e-12 * summed);
    }

    #[test]
    fn eta_star_values() {
        assert_eq!(eta_star(2, 1).unwrap(), 0.5);
        assert!((eta_star(3, 2).unwrap() - 5.0 / 18.0).abs() < 1e-16);
        let asym = eta_star(200, 1).unwrap() * 200.0;
        assert!((asym - 1.5).abs() < 0.075);
        assert!(eta_star(1, 1).is_err());
    }

    #[test]
    fn reduced_loss_vertex() {
        assert_eq!(augmented_reduced_loss(0.0, 7, 3), 18.0);
        assert_eq!(augmented_reduced_loss(0.5, 2, 1), 0.0);
        let e = eta_star(10, 3).unwrap();
        let f = augmented_reduced_loss(e, 10, 3);
        assert!(augmented_reduced_loss(e + 1e-3, 10, 3) > f);
        assert!(augmented_reduced_loss(e - 1e-3, 10, 3) > f);
        let grid_best = (0..=1000)
            .map(|k| k as f64 * 1e-3)
            .min_by(|x, y| {
                augmented_reduced_loss(*x, 10, 3).total_cmp(&augmented_reduced_loss(*y, 10, 3))
            })
            .unwrap();
        assert!((grid_best - e).abs() <= 5e-4);
    }

    #[test]
    fn coefficient_structure() {
        let c = structured_aug_coefficients(&StructuredAugParams::gd_step(1.0));
        for a in -1..=1 {
            for b in -1..=0 {
                assert_eq!(c.get(a, b), if (a, b) == (-1, 0) { 1.0 } else { 0.0 });
            }
        }
        let c = structured_aug_coefficients(&StructuredAugParams {
            a1: 1.0,
            a4: -1.0,
            b1: 2.0,
            b2: 3.0,
            ..Default::default()
        });
        assert_eq!(c.c[1], [0.0, 0.0]);
    }

    #[test]
    fn coefficient_loss_matches_reduced_line() {
        for d in 1..=3 {
            let eta = 0.17 * d as f64;
            let c = structured_aug_coefficients(&StructuredAugParams::gd_step(eta));
            let a = c.population_loss(6, d);
            let b = augmented_reduced_loss(eta, 6, d);
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn coefficient_loss_matches_grid() {
        let mut rng = Rng::new(2);
        let grid = roots_of_unity_grid(16).unwrap();
        for _ in 0..5 {
            let c = structured_aug_coefficients(&StructuredAugParams::random(&mut rng, 0.5));
            let mut avg = 0.0;
            for &l1 in &grid {
                for &l2 in &grid {
                    let lam = CVector(vec![l1, l2]);
                    for t in 2..=4 {
                        let target = CVector(vec![cpow(l1, t as i64), cpow(l2, t as i64)]);
                        avg += c.forward(&lam, t).sub(&target).norm_sqr();
                    }
                }
            }
            avg /= 256.0;
            assert!((avg - c.population_loss(4, 2)).abs() < 1e-10 * avg.max(1.0));
        }
    }
}
