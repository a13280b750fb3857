use serde::{Deserialize, Serialize};

use super::{scatter, ParamGroup, Parametrized};
use crate::numerics::{cpow, Complex};
use crate::Result;

/// Positional-encoding-only model on scalar contexts. Row `T−2` of `p` holds
/// the weights used for prefix length `T`, matching the layout of the
/// diagonal model's `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeOnlyParams {
    pub p: crate::Mat,
}

impl PeOnlyParams {
    pub fn zeros(t_max: usize) -> Self {
        PeOnlyParams {
            p: crate::Mat::zeros(t_max, t_max),
        }
    }

    pub fn t_max(&self) -> usize {
        self.p.rows()
    }

    /// Weights `p_1..p_T` for prefix length `T`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.p.row(t - 2)[..t]
    }

    pub fn forward(&self, lambda: Complex, t: usize) -> Complex {
        pe_only_forward(self.row(t), lambda, t)
    }
}

/// `Σ_{t=1}^T p_t λ^{2t−T}`.
pub fn pe_only_forward(p: &[f64], lambda: Complex, t: usize) -> Complex {
    p[..t]
        .iter()
        .enumerate()
        .map(|(i, &w)| w * cpow(lambda, 2 * (i as i64 + 1) - t as i64))
        .sum()
}

/// Sinusoidal absolute encoding: row `t−1` is `p_t` with
/// `p_t[2i] = sin(t ω_i)`, `p_t[2i+1] = cos(t ω_i)`, `ω_i = 10000^{−2i/dim}`.
pub fn sinusoidal_encoding(t_max: usize, dim: usize) -> crate::Mat {
    crate::Mat::from_fn(t_max, dim, |r, c| {
        let omega = 10000f64.powf(-((c / 2 * 2) as f64) / dim as f64);
        let x = (r + 1) as f64 * omega;
        if c % 2 == 0 {
            x.sin()
        } else {
            x.cos()
        }
    })
}

impl Parametrized for PeOnlyParams {
    fn family(&self) -> &'static str {
        "pe-only"
    }

    fn layout(&self) -> Vec<ParamGroup> {
        vec![ParamGroup::new("P", &[self.p.rows(), self.p.cols()])]
    }

    fn to_vec(&self) -> Vec<f64> {
        self.p.as_slice().to_vec()
    }

    fn set_from(&mut self, v: &[f64]) -> Result<()> {
        scatter(v, &mut [self.p.as_mut_slice()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{roots_of_unity_grid, unit_complex};

    #[test]
    fn one_hot_returns_power() {
        let lam = unit_complex(0.7);
        let mut p = vec![0.0; 6];
        p[5] = 1.0;
        assert!((pe_only_forward(&p, lam, 6) - cpow(lam, 6)).norm() < 1e-14);
        assert_eq!(pe_only_forward(&[0.0; 6], lam, 6).norm(), 0.0);
    }

    #[test]
    fn circle_average_of_loss() {
        let p = [0.3, -1.2, 0.5, 0.9];
        let t = 4;
        let grid = roots_of_unity_grid(64).unwrap();
        let avg: f64 = grid
            .iter()
            .map(|&l| (pe_only_forward(&p, l, t) - cpow(l, t as i64)).norm_sqr())
            .sum::<f64>()
            / 64.0;
        let norm: f64 = p.iter().map(|x| x * x).sum();
        assert!((avg - (norm - 2.0 * p[3] + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_gram_depends_on_lag() {
        let pe = sinusoidal_encoding(12, 8);
        let g = pe.matmul(&pe.transpose()).unwrap();
        for r in 0..12 {
            assert!((g[(r, r)] - 4.0).abs() < 1e-12);
        }
        for k in 1..6 {
            assert!((g[(3, 3 + k)] - g[(6, 6 + k)]).abs() < 1e-12);
            if k <= 3 {
                assert!(g[(5, 5 + k)] < g[(5, 4 + k)]);
            }
        }
    }
}
