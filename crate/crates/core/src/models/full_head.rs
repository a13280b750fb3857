use serde::{Deserialize, Serialize};

use super::{scatter, ParamGroup, Parametrized};
use crate::ar_process::TokenSequence;
use crate::numerics::{hdot, CVector, Complex, Mat, Rng};
use crate::{Error, Result};

/// Dense per-head projections acting on `d_e`-dimensional tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
    pub w_o: Mat,
}

impl Head {
    pub fn zeros(de: usize) -> Self {
        Head {
            w_q: Mat::zeros(de, de),
            w_k: Mat::zeros(de, de),
            w_v: Mat::zeros(de, de),
            w_o: Mat::zeros(de, de),
        }
    }

    pub fn identity(de: usize) -> Self {
        Head {
            w_q: Mat::identity(de),
            w_k: Mat::identity(de),
            w_v: Mat::identity(de),
            w_o: Mat::identity(de),
        }
    }

    pub fn random(de: usize, scale: f64, rng: &mut Rng) -> Self {
        let mut m = || Mat::from_vec(de, de, rng.normal_vec(de * de, scale)).expect("shape");
        Head {
            w_q: m(),
            w_k: m(),
            w_v: m(),
            w_o: m(),
        }
    }

    /// Combined output-value map `W_O W_V`.
    pub fn value_map(&self) -> Mat {
        self.w_o.matmul(&self.w_v).expect("square")
    }

    fn mats(&self) -> [&Mat; 4] {
        [&self.w_q, &self.w_k, &self.w_v, &self.w_o]
    }

    fn mats_mut(&mut self) -> [&mut Mat; 4] {
        [&mut self.w_q, &mut self.w_k, &mut self.w_v, &mut self.w_o]
    }
}

/// Positional weighting `P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Positional {
    /// `P_{t,t'} = softmax_{t'}(⟨W_Qpos p_t, W_Kpos p_{t'}⟩)` with one-hot
    /// `p_t`; both factors are `k × T_max`.
    Softmax { w_qpos: Mat, w_kpos: Mat },
    /// A raw `T_max × T_max` matrix used as is.
    Fixed(Mat),
}

impl Positional {
    pub fn t_max(&self) -> usize {
        match self {
            Positional::Softmax { w_qpos, .. } => w_qpos.cols(),
            Positional::Fixed(p) => p.rows(),
        }
    }

    /// Raw scores `W_Qposᵀ W_Kpos`.
    pub fn scores(&self) -> Option<Mat> {
        match self {
            Positional::Softmax { w_qpos, w_kpos } => Some(
                w_qpos
                    .transpose()
                    .matmul(w_kpos)
                    .expect("factor shapes agree"),
            ),
            Positional::Fixed(_) => None,
        }
    }

    /// The positional matrix; row `r` may attend to keys `≤ r + lookahead`.
    pub fn matrix(&self, lookahead: usize) -> Mat {
        match self {
            Positional::Softmax { .. } => {
                softmax_positional(&self.scores().expect("softmax"), lookahead)
            }
            Positional::Fixed(p) => p.clone(),
        }
    }
}

/// Row-wise softmax of `scores` over the causal range: row `r` (0-based)
/// normalizes over columns `0..=min(r + lookahead, n−1)`; other entries are 0.
pub fn softmax_positional(scores: &Mat, lookahead: usize) -> Mat {
    let (rows, cols) = scores.shape();
    let mut out = Mat::zeros(rows, cols);
    for r in 0..rows {
        let end = (r + lookahead + 1).min(cols);
        let row = &scores.row(r)[..end];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        for (c, e) in exps.iter().enumerate() {
            out[(r, c)] = e / z;
        }
    }
    out
}

/// Multi-head linear attention with dense projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullHeadParams {
    pub heads: Vec<Head>,
    pub positional: Positional,
}

impl FullHeadParams {
    /// Gaussian projections (std `scale / √d_e`) and softmax positional
    /// factors of rank `k` (std `pos_scale`).
    pub fn random(
        heads: usize,
        de: usize,
        t_max: usize,
        k: usize,
        scale: f64,
        pos_scale: f64,
        rng: &mut Rng,
    ) -> Self {
        let s = scale / (de as f64).sqrt();
        FullHeadParams {
            heads: (0..heads).map(|_| Head::random(de, s, rng)).collect(),
            positional: Positional::Softmax {
                w_qpos: Mat::from_vec(k, t_max, rng.normal_vec(k * t_max, pos_scale))
                    .expect("shape"),
                w_kpos: Mat::from_vec(k, t_max, rng.normal_vec(k * t_max, pos_scale))
                    .expect("shape"),
            },
        }
    }

    /// Every head starts from the same random draw plus independent
    /// `noise · N(0,1)` perturbations.
    pub fn equal_init(
        heads: usize,
        de: usize,
        t_max: usize,
        k: usize,
        scale: f64,
        noise: f64,
        rng: &mut Rng,
    ) -> Self {
        let base = Head::random(de, scale / (de as f64).sqrt(), rng);
        let heads = (0..heads)
            .map(|_| {
                let mut h = base.clone();
                for m in h.mats_mut() {
                    for x in m.as_mut_slice() {
                        *x += noise * rng.normal();
                    }
                }
                h
            })
            .collect();
        FullHeadParams {
            heads,
            positional: Positional::Softmax {
                w_qpos: Mat::zeros(k, t_max),
                w_kpos: Mat::zeros(k, t_max),
            },
        }
    }

    pub fn token_dim(&self) -> usize {
        self.heads[0].w_q.rows()
    }

    pub fn t_max(&self) -> usize {
        self.positional.t_max()
    }

    fn check(&self, tokens: &TokenSequence, idx: usize, lo: usize) -> Result<()> {
        if self.heads.is_empty() {
            return Err(Error::InvalidArgument("model has no heads".into()));
        }
        if tokens.token_dim != self.token_dim() {
            return Err(Error::Dimension(format!(
                "model token dimension {}, tokens {}",
                self.token_dim(),
                tokens.token_dim
            )));
        }
        if idx < lo || idx > tokens.len() || idx > self.t_max() {
            return Err(Error::InvalidArgument(format!(
                "position {idx} outside {lo}..={}",
                tokens.len().min(self.t_max())
            )));
        }
        Ok(())
    }

    /// Second-to-last-token readout: `Σ_h W_O^h Σ_{t≤T} P_{T−1,t}
    /// ⟨W_K^h e_t | W_Q^h e_{T−1}⟩ W_V^h e_t`, no residual connection. Softmax
    /// rows are normalized over keys `t ≤ T`.
    pub fn forward(&self, tokens: &TokenSequence, t: usize) -> Result<CVector> {
        self.check(tokens, t, 2)?;
        let p = self.positional.matrix(1);
        let weights = &p.row(t - 2)[..t];
        let de = self.token_dim();
        let mut out = vec![Complex::new(0.0, 0.0); de];
        for h in &self.heads {
            let q = h.w_q.matvec_c(&tokens.tokens[t - 2].0);
            let mut acc = vec![Complex::new(0.0, 0.0); de];
            for (e, &w) in tokens.tokens[..t].iter().zip(weights) {
                let score = w * hdot(&h.w_k.matvec_c(&e.0), &q);
                for (a, v) in acc.iter_mut().zip(h.w_v.matvec_c(&e.0)) {
                    *a += score * v;
                }
            }
            for (o, v) in out.iter_mut().zip(h.w_o.matvec_c(&acc)) {
                *o += v;
            }
        }
        Ok(CVector(out))
    }
}

/// Causal multi-head linear attention at output index `τ` (1-based):
/// `Σ_h W_O^h Σ_{t'≤τ} P_{τ,t'} ⟨W_Q^h e_τ | W_K^h e_{t'}⟩ W_V^h e_{t'}`.
pub fn mhsa_linear_forward(
    params: &FullHeadParams,
    tokens: &TokenSequence,
    tau: usize,
) -> Result<CVector> {
    params.check(tokens, tau, 1)?;
    let p = params.positional.matrix(0);
    let de = params.token_dim();
    let mut out = vec![Complex::new(0.0, 0.0); de];
    for h in &params.heads {
        let q = h.w_q.matvec_c(&tokens.tokens[tau - 1].0);
        let mut acc = vec![Complex::new(0.0, 0.0); de];
        for (t, e) in tokens.tokens[..tau].iter().enumerate() {
            let score = p[(tau - 1, t)] * hdot(&q, &h.w_k.matvec_c(&e.0));
            for (a, v) in acc.iter_mut().zip(h.w_v.matvec_c(&e.0)) {
                *a += score * v;
            }
        }
        for (o, v) in out.iter_mut().zip(h.w_o.matvec_c(&acc)) {
            *o += v;
        }
    }
    Ok(CVector(out))
}

impl Parametrized for FullHeadParams {
    fn family(&self) -> &'static str {
        "full-multihead"
    }

    fn layout(&self) -> Vec<ParamGroup> {
        let de = self.token_dim();
        let mut groups = Vec::new();
        for h in 0..self.heads.len() {
            for name in ["W_Q", "W_K", "W_V", "W_O"] {
                groups.push(ParamGroup::new(format!("head{h}.{name}"), &[de, de]));
            }
        }
        match &self.positional {
            Positional::Softmax { w_qpos, w_kpos } => {
                groups.push(ParamGroup::new("W_Qpos", &[w_qpos.rows(), w_qpos.cols()]));
                groups.push(ParamGroup::new("W_Kpos", &[w_kpos.rows(), w_kpos.cols()]));
            }
            Positional::Fixed(p) => groups.push(ParamGroup::new("P", &[p.rows(), p.cols()])),
        }
        groups
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for h in &self.heads {
            for m in h.mats() {
                v.extend_from_slice(m.as_slice());
            }
        }
        match &self.positional {
            Positional::Softmax { w_qpos, w_kpos } => {
                v.extend_from_slice(w_qpos.as_slice());
                v.extend_from_slice(w_kpos.as_slice());
            }
            Positional::Fixed(p) => v.extend_from_slice(p.as_slice()),
        }
        v
    }

    fn set_from(&mut self, v: &[f64]) -> Result<()> {
        let mut dst: Vec<&mut [f64]> = Vec::new();
        for h in &mut self.heads {
            for m in h.mats_mut() {
                dst.push(m.as_mut_slice());
            }
        }
        match &mut self.positional {
            Positional::Softmax { w_qpos, w_kpos } => {
                dst.push(w_qpos.as_mut_slice());
                dst.push(w_kpos.as_mut_slice());
            }
            Positional::Fixed(p) => dst.push(p.as_mut_slice()),
        }
        scatter(v, &mut dst)
    }
}

/// Two softmax heads that rebuild augmented tokens from plain ones: head 1
/// attends to the current position, head 2 to the previous one.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftHeads {
    pub current: Positional,
    pub previous: Positional,
}

/// Positional factors with scores `scale·δ_{t'=t}` and `scale·δ_{t'=t−1}`.
pub fn build_shift_heads(scale: f64, t_max: usize) -> Result<ShiftHeads> {
    if !(scale > 0.0) || t_max == 0 {
        return Err(Error::InvalidArgument(
            "need scale > 0 and T_max ≥ 1".into(),
        ));
    }
    let root = scale.sqrt();
    let id = Mat::identity(t_max).scale(root);
    let shift = Mat::from_fn(t_max, t_max, |r, c| if r == c + 1 { root } else { 0.0 });
    Ok(ShiftHeads {
        current: Positional::Softmax {
            w_qpos: id.clone(),
            w_kpos: id.clone(),
        },
        previous: Positional::Softmax {
            w_qpos: id,
            w_kpos: shift,
        },
    })
}

impl ShiftHeads {
    pub fn matrices(&self) -> (Mat, Mat) {
        (self.current.matrix(0), self.previous.matrix(0))
    }

    /// Approximate `(0, s_t, s_{t−1})` for every position; at `t = 1` the
    /// previous-token head can only see `s_1`.
    pub fn apply(&self, states: &[CVector]) -> Result<Vec<CVector>> {
        let (p1, p2) = self.matrices();
        if states.len() > p1.rows() {
            return Err(Error::Dimension(format!(
                "{} states exceed T_max = {}",
                states.len(),
                p1.rows()
            )));
        }
        let d = states.first().map_or(0, CVector::len);
        Ok((0..states.len())
            .map(|t| {
                let mut e = vec![Complex::new(0.0, 0.0); 3 * d];
                for (tp, s) in states[..=t].iter().enumerate() {
                    for i in 0..d {
                        e[d + i] += p1[(t, tp)] * s[i];
                        e[2 * d + i] += p2[(t, tp)] * s[i];
                    }
                }
                CVector(e)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar_process::{encode, generate_sequence, sample_context, ContextSpec, Encoding};
    use crate::models::{diag_multihead_forward, DiagHeadParams};

    fn plain(spec: ContextSpec, t: usize, seed: u64) -> TokenSequence {
        let mut rng = Rng::new(seed);
        let w = sample_context(&spec, &mut rng).unwrap();
        encode(&generate_sequence(&w, t).unwrap(), Encoding::Plain)
    }

    #[test]
    fn zero_weights_give_zero() {
        let e = plain(ContextSpec::GeneralOrthogonal { d: 3 }, 5, 1);
        let params = FullHeadParams {
            heads: vec![Head::zeros(3)],
            positional: Positional::Fixed(Mat::identity(5)),
        };
        assert_eq!(mhsa_linear_forward(&params, &e, 4).unwrap().norm(), 0.0);
    }

    #[test]
    fn identity_head_on_orthonormal_tokens() {
        let tokens: Vec<CVector> = (0..4)
            .map(|i| CVector::from_real(&Mat::identity(4).col(i)))
            .collect();
        let e = TokenSequence {
            encoding: Encoding::Plain,
            token_dim: 4,
            tokens,
        };
        let params = FullHeadParams {
            heads: vec![Head::identity(4)],
            positional: Positional::Fixed(Mat::from_fn(4, 4, |_, _| 1.0)),
        };
        for tau in 1..=4 {
            let out = mhsa_linear_forward(&params, &e, tau).unwrap();
            assert!(out.max_abs_diff(&e.tokens[tau - 1]) < 1e-15);
        }
    }

    #[test]
    fn diagonal_weights_match_diag_model() {
        let mut rng = Rng::new(2);
        let diag = DiagHeadParams::random(3, 4, 7, 1.0, &mut rng);
        let heads = (0..3)
            .map(|h| Head {
                w_q: Mat::diag(diag.a.row(h)),
                w_k: Mat::identity(4),
                w_v: Mat::diag(diag.b.row(h)),
                w_o: Mat::identity(4),
            })
            .collect();
        let full = FullHeadParams {
            heads,
            positional: Positional::Fixed(diag.p.clone()),
        };
        let e = plain(ContextSpec::UnitaryDiagonal { d: 4 }, 7, 3);
        for t in 2..=7 {
            let a = full.forward(&e, t).unwrap();
            let b = diag_multihead_forward(&diag, &e, t).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn mhsa_is_causal() {
        let mut rng = Rng::new(4);
        let params = FullHeadParams::random(2, 3, 6, 2, 1.0, 1.0, &mut rng);
        let e = plain(ContextSpec::GeneralOrthogonal { d: 3 }, 6, 5);
        let base = mhsa_linear_forward(&params, &e, 3).unwrap();
        let mut tampered = e.clone();
        tampered.tokens[3] = CVector::ones(3);
        tampered.tokens[5] = CVector::zeros(3);
        assert_eq!(base, mhsa_linear_forward(&params, &tampered, 3).unwrap());
    }

    #[test]
    fn softmax_rows() {
        let p = softmax_positional(&Mat::zeros(5, 5), 0);
        for r in 0..5 {
            let row = p.row(r);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(row[..=r]
                .iter()
                .all(|x| (x - 1.0 / (r + 1) as f64).abs() < 1e-15));
            assert!(row[r + 1..].iter().all(|x| *x == 0.0));
        }
        let q = softmax_positional(&Mat::zeros(4, 4), 1);
        assert!((q[(0, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(q[(3, 3)], 0.25);
    }

    #[test]
    fn softmax_saturates() {
        for kappa in [10.0, 1e3] {
            let scores = Mat::from_fn(50, 50, |r, c| if r == c { kappa } else { 0.0 });
            let p = softmax_positional(&scores, 0);
            for r in 0..50 {
                let tail = 1.0 - p[(r, r)];
                let exact = r as f64 / (kappa.exp() + r as f64);
                assert!((tail - exact).abs() < 1e-14);
                let off = (0..r).map(|c| p[(r, c)]).fold(0.0, f64::max);
                assert!(off < 1e-4);
            }
        }
    }

    #[test]
    fn shift_heads_rebuild_augmented_tokens() {
        let mut rng = Rng::new(6);
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d: 2 }, &mut rng).unwrap();
        let s = generate_sequence(&w, 10).unwrap();
        let exact = encode(&s, Encoding::Augmented);
        let mut last = f64::INFINITY;
        for scale in [5.0, 20.0, 50.0] {
            let approx = build_shift_heads(scale, 10)
                .unwrap()
                .apply(&s.states)
                .unwrap();
            let err = (1..10)
                .map(|t| approx[t].max_abs_diff(&exact.tokens[t]))
                .fold(0.0, f64::max);
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-3);
        let approx = build_shift_heads(50.0, 10)
            .unwrap()
            .apply(&s.states)
            .unwrap();
        assert!(approx[0].0[4..]
            .iter()
            .zip(&s.states[0].0)
            .all(|(a, b)| (a - b).norm() < 1e-15));
    }
}
