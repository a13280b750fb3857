use serde::{Deserialize, Serialize};

use super::{require, Model};
use crate::ar_process::{sample_context, ContextSpec, Dataset, Encoding, Example};
use crate::models::PeOnlyParams;
use crate::numerics::{cpow, sym_eig, Complex, Rng};
use crate::{Error, Mat, Result};

impl Model for PeOnlyParams {
    fn check_data(&self, data: &Dataset) -> Result<()> {
        require(data, Encoding::Plain, Some(1), Some(self.t_max()), None)
    }

    /// On scalar tokens `e_t = λ^{t−1}` the output `Σ_t p_t e_t² conj(e_{T−1})`
    /// equals `Σ_t p_t λ^{2t−T}`.
    fn loss_sum(&self, examples: &[&Example], mut grad: Option<&mut [f64]>) -> f64 {
        let tm = self.t_max();
        let mut total = 0.0;
        for ex in examples {
            let e: Vec<Complex> = ex.tokens.tokens.iter().map(|v| v[0]).collect();
            for t in 2..=e.len() {
                let q = e[t - 2].conj();
                let feats: Vec<Complex> = e[..t].iter().map(|z| z * z * q).collect();
                let out: Complex = feats.iter().zip(self.row(t)).map(|(f, p)| p * f).sum();
                let r = out - ex.target(t)[0];
                total += r.norm_sqr();
                if let Some(g) = grad.as_deref_mut() {
                    for (s, f) in feats.iter().enumerate() {
                        g[(t - 2) * tm + s] += 2.0 * (r.conj() * f).re;
                    }
                }
            }
        }
        total
    }
}

/// Result of [`early_stopped_pe_fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeFit {
    pub params: PeOnlyParams,
    pub iterations: usize,
    /// Mean over rows of the empirical loss at the returned weights.
    pub final_loss: f64,
    pub reached_threshold: bool,
}

/// Iteration cap of [`early_stopped_pe_fit`].
pub const PE_FIT_MAX_ITERS: usize = 200_000;

/// Empirical moments `m_k = mean_i Re λ_i^{2k}`, `k = 0..n`.
fn empirical_moments(lams: &[Complex], n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lams.iter().map(|&l| cpow(l, 2 * k as i64).re).sum::<f64>() / lams.len() as f64)
        .collect()
}

/// Full-batch gradient descent on the empirical positional-encoding-only
/// loss, from `P = 0`, stopped once the loss averaged over rows drops below
/// `threshold`. Contexts are drawn as in [`crate::ar_process::make_dataset`]
/// with `s_1 = 1`, so the per-row loss is `(p − e_T)ᵀ Ĥ_T (p − e_T)` with the
/// Toeplitz matrix of empirical moments. The step is `1/(2 λ_max(Ĥ))`.
pub fn early_stopped_pe_fit(
    t_max: usize,
    mu: f64,
    dataset_size: usize,
    threshold: f64,
    rng: &Rng,
) -> Result<PeFit> {
    let spec = ContextSpec::RestrictedArc { mu };
    spec.validate()?;
    if t_max < 2 || dataset_size == 0 || !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need T_max ≥ 2, n ≥ 1, threshold > 0 (got {t_max}, {dataset_size}, {threshold})"
        )));
    }
    let lams = (0..dataset_size)
        .map(|i| {
            let w = sample_context(&spec, &mut rng.split(&format!("seq/{i}")))?;
            Ok(w.spectrum().expect("spectral")[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let m = empirical_moments(&lams, t_max);
    let h = Mat::from_fn(t_max, t_max, |r, c| m[r.abs_diff(c)]);
    let lr = 0.5 / sym_eig(&h)?.values.iter().cloned().fold(0.0, f64::max);

    let mut p = PeOnlyParams::zeros(t_max);
    let rows = t_max - 1;
    let mut iterations = 0;
    loop {
        // residual δ = p − e_T for every row; loss δᵀĤδ; gradient 2Ĥδ
        let mut loss = 0.0;
        let mut grads = Vec::with_capacity(rows);
        for t in 2..=t_max {
            let mut delta = p.row(t).to_vec();
            delta[t - 1] -= 1.0;
            let hd: Vec<f64> = (0..t)
                .map(|i| (0..t).map(|j| m[i.abs_diff(j)] * delta[j]).sum())
                .collect();
            loss += delta.iter().zip(&hd).map(|(a, b)| a * b).sum::<f64>();
            grads.push(hd);
        }
        loss /= rows as f64;
        if loss < threshold || iterations >= PE_FIT_MAX_ITERS {
            return Ok(PeFit {
                params: p,
                iterations,
                final_loss: loss,
                reached_threshold: loss < threshold,
            });
        }
        for (k, hd) in grads.iter().enumerate() {
            for (x, g) in p.p.row_mut(k)[..k + 2].iter_mut().zip(hd) {
                *x -= lr * 2.0 * g;
            }
        }
        iterations += 1;
    }
}

/// Share of each row's absolute weight that falls off the target,
/// `Σ_{t<T} |P_{T−1,t}| / Σ_{t≤T} |P_{T−1,t}|`, averaged over rows. All-zero
/// rows count as zero.
pub fn off_target_mass(p: &PeOnlyParams) -> f64 {
    let tm = p.t_max();
    (2..=tm)
        .map(|t| {
            let row = p.row(t);
            let off: f64 = row[..t - 1].iter().map(|x| x.abs()).sum();
            let total = off + row[t - 1].abs();
            if total == 0.0 {
                0.0
            } else {
                off / total
            }
        })
        .sum::<f64>()
        / (tm - 1) as f64
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Mean variance along the diagonals `P_{T−1,T−k}`, `k ≥ 1`, divided by the
/// mean within-row variance of the same entries, over rows `T ≥ first_row`.
/// The target entries `P_{T−1,T}` are masked; diagonals and rows with fewer
/// than two entries are skipped.
pub fn diagonal_invariance(p: &PeOnlyParams, first_row: usize) -> f64 {
    let tm = p.t_max();
    let lo = first_row.max(3);
    let diag: Vec<f64> = (1..tm)
        .map(|k| {
            (lo.max(k + 1)..=tm)
                .map(|t| p.row(t)[t - 1 - k])
                .collect::<Vec<_>>()
        })
        .filter(|v| v.len() >= 2)
        .map(|v| variance(&v))
        .collect();
    let row: Vec<f64> = (lo..=tm).map(|t| variance(&p.row(t)[..t - 1])).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let r = mean(&row);
    if r == 0.0 {
        return 0.0;
    }
    mean(&diag) / r
}
