use super::{require, Model};
use crate::ar_process::{Dataset, Encoding, Example};
use crate::models::{AugStack, LN_EPS};
use crate::Result;

/// Cached forward quantities of one layer for a single sequence.
struct LayerCache {
    /// Normalized (or raw) inputs `z_τ`, row-major `T × n`.
    z: Vec<f64>,
    /// `1/σ_τ` of the layer norm.
    inv_sigma: Vec<f64>,
    /// `q_τ = A z_τ`.
    q: Vec<f64>,
    /// Prefix sums `S_τ = Σ_{t≤τ} z_t z_tᵀ`, `T × n × n`.
    s: Vec<f64>,
    /// `h_τ = S_τ q_τ`.
    h: Vec<f64>,
}

fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i * n..(i + 1) * n]
            .iter()
            .zip(x)
            .map(|(a, b)| a * b)
            .sum();
    }
}

fn matvec_t(m: &[f64], x: &[f64], out: &mut [f64]) {
    let n = out.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &xi) in x.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(&m[i * n..(i + 1) * n]) {
            *o += a * xi;
        }
    }
}

impl AugStack {
    /// Forward pass on real tokens; returns the final residual stream and the
    /// per-layer caches.
    fn real_forward(&self, tokens: &[f64], t_len: usize, n: usize) -> (Vec<f64>, Vec<LayerCache>) {
        let mut x = tokens.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (a, b) = (layer.a.as_slice(), layer.b.as_slice());
            let mut z = x.clone();
            let mut inv_sigma = vec![1.0; t_len];
            if self.normalize {
                for tau in 0..t_len {
                    let row = &mut z[tau * n..(tau + 1) * n];
                    let mean = row.iter().sum::<f64>() / n as f64;
                    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                    let inv = 1.0 / (var + LN_EPS).sqrt();
                    row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
                    inv_sigma[tau] = inv;
                }
            }
            let mut q = vec![0.0; t_len * n];
            let mut s = vec![0.0; t_len * n * n];
            let mut h = vec![0.0; t_len * n];
            let mut acc = vec![0.0; n * n];
            let mut bh = vec![0.0; n];
            for tau in 0..t_len {
                let zt = &z[tau * n..(tau + 1) * n];
                for i in 0..n {
                    for j in 0..n {
                        acc[i * n + j] += zt[i] * zt[j];
                    }
                }
                s[tau * n * n..(tau + 1) * n * n].copy_from_slice(&acc);
                matvec(a, zt, &mut q[tau * n..(tau + 1) * n]);
                let (qt, ht) = (&q[tau * n..(tau + 1) * n], &mut h[tau * n..(tau + 1) * n]);
                matvec(&acc, qt, ht);
                matvec(b, ht, &mut bh);
                for (xi, v) in x[tau * n..(tau + 1) * n].iter_mut().zip(&bh) {
                    *xi += v;
                }
            }
            caches.push(LayerCache {
                z,
                inv_sigma,
                q,
                s,
                h,
            });
        }
        (x, caches)
    }
}

impl Model for AugStack {
    fn check_data(&self, data: &Dataset) -> Result<()> {
        if self.layers.is_empty() {
            return Err(crate::Error::InvalidArgument(
                "stack needs at least one layer".into(),
            ));
        }
        require(
            data,
            Encoding::Augmented,
            Some(3 * self.dim()),
            None,
            Some("aug-stack"),
        )
    }

    fn loss_sum(&self, examples: &[&Example], mut grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        for ex in examples {
            let n = ex.tokens.token_dim;
            let d = n / 3;
            let t_len = ex.tokens.len();
            let tokens: Vec<f64> = ex.tokens.tokens.iter().flat_map(|e| e.re()).collect();
            let (x, caches) = self.real_forward(&tokens, t_len, n);
            // Gradient of the loss with respect to the final residual stream.
            let mut dx = vec![0.0; t_len * n];
            for tau in 1..t_len {
                let target = ex.target(tau + 1);
                for i in 0..d {
                    let r = x[tau * n + i] - target[i].re;
                    total += r * r;
                    dx[tau * n + i] = 2.0 * r;
                }
            }
            let Some(g) = grad.as_deref_mut() else {
                continue;
            };
            for (l, (layer, c)) in self.layers.iter().zip(&caches).enumerate().rev() {
                let (a, b) = (layer.a.as_slice(), layer.b.as_slice());
                let (ga, gb) = g[2 * l * n * n..(2 * l + 2) * n * n].split_at_mut(n * n);
                let mut gh = vec![0.0; t_len * n];
                let mut dq = vec![0.0; t_len * n];
                let mut dz = vec![0.0; t_len * n];
                let mut tmp = vec![0.0; n];
                for tau in 0..t_len {
                    let gt = &dx[tau * n..(tau + 1) * n];
                    let ht = &c.h[tau * n..(tau + 1) * n];
                    for i in 0..n {
                        if gt[i] != 0.0 {
                            for j in 0..n {
                                gb[i * n + j] += gt[i] * ht[j];
                            }
                        }
                    }
                    matvec_t(b, gt, &mut gh[tau * n..(tau + 1) * n]);
                    matvec(
                        &c.s[tau * n * n..(tau + 1) * n * n],
                        &gh[tau * n..(tau + 1) * n],
                        &mut dq[tau * n..(tau + 1) * n],
                    );
                    let (dqt, zt) = (&dq[tau * n..(tau + 1) * n], &c.z[tau * n..(tau + 1) * n]);
                    for i in 0..n {
                        for j in 0..n {
                            ga[i * n + j] += dqt[i] * zt[j];
                        }
                    }
                    matvec_t(a, dqt, &mut tmp);
                    dz[tau * n..(tau + 1) * n].copy_from_slice(&tmp);
                }
                // R_t = Σ_{τ≥t} (g_h qᵀ + q g_hᵀ); dz_t += R_t z_t.
                let mut r = vec![0.0; n * n];
                for tau in (0..t_len).rev() {
                    let (ght, qt) = (&gh[tau * n..(tau + 1) * n], &c.q[tau * n..(tau + 1) * n]);
                    for i in 0..n {
                        for j in 0..n {
                            r[i * n + j] += ght[i] * qt[j] + qt[i] * ght[j];
                        }
                    }
                    matvec(&r, &c.z[tau * n..(tau + 1) * n], &mut tmp);
                    for (o, v) in dz[tau * n..(tau + 1) * n].iter_mut().zip(&tmp) {
                        *o += v;
                    }
                }
                for tau in 0..t_len {
                    let dzt = &dz[tau * n..(tau + 1) * n];
                    let dxt = &mut dx[tau * n..(tau + 1) * n];
                    if self.normalize {
                        let y = &c.z[tau * n..(tau + 1) * n];
                        let mean_g = dzt.iter().sum::<f64>() / n as f64;
                        let mean_gy = dzt.iter().zip(y).map(|(g, y)| g * y).sum::<f64>() / n as f64;
                        for i in 0..n {
                            dxt[i] += c.inv_sigma[tau] * (dzt[i] - mean_g - y[i] * mean_gy);
                        }
                    } else {
                        for i in 0..n {
                            dxt[i] += dzt[i];
                        }
                    }
                }
            }
        }
        total
    }
}
