use super::{require, Model};
use crate::ar_process::{Dataset, Encoding, Example};
use crate::models::DiagHeadParams;
use crate::numerics::Complex;
use crate::Result;

const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

impl Model for DiagHeadParams {
    fn check_data(&self, data: &Dataset) -> Result<()> {
        require(
            data,
            Encoding::Plain,
            Some(self.dim()),
            Some(self.t_max()),
            None,
        )
    }

    /// Uses the pooled form; the coupling gradient `G = ∂L/∂C` is
    /// accumulated over the batch and pulled back through `C = BᵀA` at the end.
    fn loss_sum(&self, examples: &[&Example], mut grad: Option<&mut [f64]>) -> f64 {
        let (h, d, tm) = (self.heads(), self.dim(), self.t_max());
        let c = self.coupling();
        let mut gc = vec![0.0; d * d];
        let mut gp = vec![0.0; tm * tm];
        let mut total = 0.0;
        let mut u = vec![ZERO; d];
        let mut cu_all = vec![ZERO; tm * d];
        let mut u_all = vec![ZERO; tm * d];
        for ex in examples {
            let e = &ex.tokens.tokens;
            for t in 2..=e.len() {
                let q = &e[t - 2].0;
                let w = self.p_row(t);
                let mut out = vec![ZERO; d];
                for s in 0..t {
                    let es = &e[s].0;
                    for j in 0..d {
                        u[j] = es[j] * q[j].conj();
                    }
                    for i in 0..d {
                        let cu: Complex = (0..d).map(|j| c[(i, j)] * u[j]).sum();
                        cu_all[s * d + i] = cu;
                        out[i] += w[s] * cu * es[i];
                    }
                    u_all[s * d..(s + 1) * d].copy_from_slice(&u);
                }
                let target = ex.target(t);
                let r: Vec<Complex> = (0..d).map(|i| out[i] - target[i]).collect();
                total += r.iter().map(|z| z.norm_sqr()).sum::<f64>();
                if grad.is_none() {
                    continue;
                }
                for s in 0..t {
                    let es = &e[s].0;
                    let mut dp = 0.0;
                    for i in 0..d {
                        let alpha = r[i].conj() * es[i];
                        dp += 2.0 * (alpha * cu_all[s * d + i]).re;
                        let aw = 2.0 * w[s] * alpha;
                        for j in 0..d {
                            gc[i * d + j] += (aw * u_all[s * d + j]).re;
                        }
                    }
                    gp[(t - 2) * tm + s] += dp;
                }
            }
        }
        if let Some(g) = grad.as_deref_mut() {
            let (ga, rest) = g.split_at_mut(h * d);
            let (gb, gpp) = rest.split_at_mut(h * d);
            // C_ij = Σ_h B_hi A_hj.
            for k in 0..h {
                for i in 0..d {
                    for j in 0..d {
                        ga[k * d + j] += self.b[(k, i)] * gc[i * d + j];
                        gb[k * d + i] += self.a[(k, j)] * gc[i * d + j];
                    }
                }
            }
            for (o, v) in gpp.iter_mut().zip(&gp) {
                *o += v;
            }
        }
        total
    }
}
