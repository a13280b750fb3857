use super::{require, Model};
use crate::ar_process::{Dataset, Encoding, Example};
use crate::models::StructuredAugParams;
use crate::numerics::Complex;
use crate::Result;

const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

impl Model for StructuredAugParams {
    fn check_data(&self, data: &Dataset) -> Result<()> {
        require(data, Encoding::Augmented, None, None, None)
    }

    fn loss_sum(&self, examples: &[&Example], mut grad: Option<&mut [f64]>) -> f64 {
        let a = [self.a1, self.a2, self.a3, self.a4];
        let b = [self.b1, self.b2];
        let mut total = 0.0;
        for ex in examples {
            let d = ex.tokens.token_dim / 3;
            // m[key][val][(i, j)] = Σ_t val_{t,i} conj(key_{t,j}); 0 = current, 1 = previous.
            let mut m = vec![ZERO; 4 * d * d];
            for (tau, e) in ex.tokens.tokens.iter().enumerate() {
                let halves = [&e.0[d..2 * d], &e.0[2 * d..]];
                for key in 0..2 {
                    for val in 0..2 {
                        let blk = &mut m[(2 * key + val) * d * d..][..d * d];
                        for i in 0..d {
                            for j in 0..d {
                                blk[i * d + j] += halves[val][i] * halves[key][j].conj();
                            }
                        }
                    }
                }
                let t = tau + 1;
                if t < 2 {
                    continue;
                }
                // g[k][m] = M^{key(k), val(m)} q_k for the six blocks.
                let qs = [halves[0], halves[1], halves[0], halves[1]];
                let keys = [0, 0, 1, 1];
                let mut g = vec![ZERO; 8 * d];
                for k in 0..4 {
                    for val in 0..2 {
                        let blk = &m[(2 * keys[k] + val) * d * d..][..d * d];
                        for i in 0..d {
                            g[(2 * k + val) * d + i] =
                                (0..d).map(|j| blk[i * d + j] * qs[k][j]).sum();
                        }
                    }
                }
                let target = ex.target(t);
                let mut r = vec![ZERO; d];
                for i in 0..d {
                    let mut out = e.0[i];
                    for k in 0..4 {
                        for val in 0..2 {
                            out += a[k] * b[val] * g[(2 * k + val) * d + i];
                        }
                    }
                    r[i] = out - target[i];
                }
                total += r.iter().map(|z| z.norm_sqr()).sum::<f64>();
                if let Some(gr) = grad.as_deref_mut() {
                    for k in 0..4 {
                        for val in 0..2 {
                            let s: f64 = (0..d)
                                .map(|i| 2.0 * (r[i].conj() * g[(2 * k + val) * d + i]).re)
                                .sum();
                            gr[k] += b[val] * s;
                            gr[4 + val] += a[k] * s;
                        }
                    }
                }
            }
        }
        total
    }
}
