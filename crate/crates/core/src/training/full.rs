use super::{dot, require, Model};
use crate::ar_process::{Dataset, Encoding, Example};
use crate::models::{FullHeadParams, Positional};
use crate::{Error, Result};

/// `g += u vᵀ` on a row-major square block.
fn add_outer(g: &mut [f64], u: &[f64], v: &[f64]) {
    let n = v.len();
    for (i, &ui) in u.iter().enumerate() {
        if ui != 0.0 {
            for (o, &vj) in g[i * n..(i + 1) * n].iter_mut().zip(v) {
                *o += ui * vj;
            }
        }
    }
}

impl Model for FullHeadParams {
    fn check_data(&self, data: &Dataset) -> Result<()> {
        if self.heads.is_empty() {
            return Err(Error::InvalidArgument("model has no heads".into()));
        }
        if data.encoding() == Encoding::Augmented {
            return Err(Error::Encoding {
                expected: "plain or duplicated".into(),
                found: data.encoding().name().into(),
            });
        }
        require(
            data,
            data.encoding(),
            Some(self.token_dim()),
            Some(self.t_max()),
            Some("full-multihead"),
        )
    }

    /// Real-token path of [`FullHeadParams::forward`].
    fn loss_sum(&self, examples: &[&Example], mut grad: Option<&mut [f64]>) -> f64 {
        let de = self.token_dim();
        let tm = self.t_max();
        let p = self.positional.matrix(1);
        let mut gp = vec![0.0; tm * tm];
        let mut total = 0.0;
        let want = grad.is_some();
        for ex in examples {
            let e: Vec<Vec<f64>> = ex.tokens.tokens.iter().map(|v| v.re()).collect();
            let n = e.len();
            let proj =
                |m: &crate::Mat| -> Vec<Vec<f64>> { e.iter().map(|x| m.matvec(x)).collect() };
            let qs: Vec<_> = self.heads.iter().map(|h| proj(&h.w_q)).collect();
            let ks: Vec<_> = self.heads.iter().map(|h| proj(&h.w_k)).collect();
            let vs: Vec<_> = self.heads.iter().map(|h| proj(&h.w_v)).collect();
            let zero = || vec![vec![0.0; de]; n];
            let mut dq: Vec<_> = self.heads.iter().map(|_| zero()).collect();
            let mut dk: Vec<_> = self.heads.iter().map(|_| zero()).collect();
            let mut dv: Vec<_> = self.heads.iter().map(|_| zero()).collect();
            for t in 2..=n {
                let w = &p.row(t - 2)[..t];
                let mut accs = Vec::with_capacity(self.heads.len());
                let mut out = vec![0.0; de];
                for (hi, head) in self.heads.iter().enumerate() {
                    let q = &qs[hi][t - 2];
                    let mut acc = vec![0.0; de];
                    for s in 0..t {
                        let c = w[s] * dot(&ks[hi][s], q);
                        for (a, v) in acc.iter_mut().zip(&vs[hi][s]) {
                            *a += c * v;
                        }
                    }
                    for (o, v) in out.iter_mut().zip(head.w_o.matvec(&acc)) {
                        *o += v;
                    }
                    accs.push(acc);
                }
                let target = ex.target(t);
                let r2: Vec<f64> = (0..de).map(|i| 2.0 * (out[i] - target[i].re)).collect();
                total += r2.iter().map(|x| x * x / 4.0).sum::<f64>();
                let Some(g) = grad.as_deref_mut() else {
                    continue;
                };
                for (hi, head) in self.heads.iter().enumerate() {
                    let base = hi * 4 * de * de;
                    add_outer(
                        &mut g[base + 3 * de * de..base + 4 * de * de],
                        &r2,
                        &accs[hi],
                    );
                    let mut gacc = vec![0.0; de];
                    for (i, &ri) in r2.iter().enumerate() {
                        for (o, &wo) in gacc.iter_mut().zip(head.w_o.row(i)) {
                            *o += ri * wo;
                        }
                    }
                    let q = &qs[hi][t - 2];
                    let mut dqt = vec![0.0; de];
                    for s in 0..t {
                        let score = dot(&ks[hi][s], q);
                        let gv = dot(&gacc, &vs[hi][s]);
                        gp[(t - 2) * tm + s] += score * gv;
                        let ps = w[s] * score;
                        for (o, a) in dv[hi][s].iter_mut().zip(&gacc) {
                            *o += ps * a;
                        }
                        let ds = w[s] * gv;
                        for i in 0..de {
                            dk[hi][s][i] += ds * q[i];
                            dqt[i] += ds * ks[hi][s][i];
                        }
                    }
                    for (o, v) in dq[hi][t - 2].iter_mut().zip(&dqt) {
                        *o += v;
                    }
                }
            }
            if !want {
                continue;
            }
            let g = grad.as_deref_mut().expect("gradient requested");
            for hi in 0..self.heads.len() {
                let base = hi * 4 * de * de;
                for (slot, dm) in [&dq[hi], &dk[hi], &dv[hi]].into_iter().enumerate() {
                    let blk = &mut g[base + slot * de * de..base + (slot + 1) * de * de];
                    for s in 0..n {
                        add_outer(blk, &dm[s], &e[s]);
                    }
                }
            }
        }
        if let Some(g) = grad.as_deref_mut() {
            let off = self.heads.len() * 4 * de * de;
            match &self.positional {
                Positional::Fixed(_) => {
                    for (o, v) in g[off..].iter_mut().zip(&gp) {
                        *o += v;
                    }
                }
                Positional::Softmax { w_qpos, w_kpos } => {
                    // dS = P ⊙ (dP − Σ_c P dP) row by row.
                    let mut ds = vec![0.0; tm * tm];
                    for r in 0..tm {
                        let end = (r + 2).min(tm);
                        let pr = &p.row(r)[..end];
                        let gr = &gp[r * tm..r * tm + end];
                        let m = dot(pr, gr);
                        for c in 0..end {
                            ds[r * tm + c] = pr[c] * (gr[c] - m);
                        }
                    }
                    let k = w_qpos.rows();
                    let (gq, gk) = g[off..].split_at_mut(k * tm);
                    for kk in 0..k {
                        for r in 0..tm {
                            for c in 0..tm {
                                let s = ds[r * tm + c];
                                if s != 0.0 {
                                    gq[kk * tm + r] += w_kpos[(kk, c)] * s;
                                    gk[kk * tm + c] += w_qpos[(kk, r)] * s;
                                }
                            }
                        }
                    }
                }
            }
        }
        total
    }
}
