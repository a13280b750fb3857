use serde::{Deserialize, Serialize};

use super::{scatter, ParamGroup, Parametrized};
use crate::ar_process::{Encoding, TokenSequence};
use crate::numerics::{hdot, CVector, Complex, Mat, Rng};
use crate::{Error, Result};

/// Multi-head attention with diagonal key-query and output-value maps.
///
/// Row `h` of `a` (resp. `b`) is the diagonal of `A^h` (resp. `B^h`). The
/// positional matrix is stored 0-based: `p[(T−2, t−1)]` is `P_{T−1,t}`, the
/// weight that query position `T−1` gives to key `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagHeadParams {
    pub a: Mat,
    pub b: Mat,
    pub p: Mat,
}

impl DiagHeadParams {
    pub fn zeros(heads: usize, d: usize, t_max: usize) -> Self {
        DiagHeadParams {
            a: Mat::zeros(heads, d),
            b: Mat::zeros(heads, d),
            p: Mat::zeros(t_max, t_max),
        }
    }

    /// Gaussian `A`, `B` and `P` with standard deviation `scale`.
    pub fn random(heads: usize, d: usize, t_max: usize, scale: f64, rng: &mut Rng) -> Self {
        DiagHeadParams {
            a: Mat::from_vec(heads, d, rng.normal_vec(heads * d, scale)).expect("shape"),
            b: Mat::from_vec(heads, d, rng.normal_vec(heads * d, scale)).expect("shape"),
            p: Mat::from_vec(t_max, t_max, rng.normal_vec(t_max * t_max, scale)).expect("shape"),
        }
    }

    pub fn heads(&self) -> usize {
        self.a.rows()
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn t_max(&self) -> usize {
        self.p.rows()
    }

    /// `P_{T−1,t}` for `t = 1..T`.
    pub fn p_row(&self, t: usize) -> &[f64] {
        &self.p.row(t - 2)[..t]
    }

    /// Effective coupling `C = BᵀA`, `C_ij = Σ_h B_hi A_hj`.
    pub fn coupling(&self) -> Mat {
        self.b.transpose().matmul(&self.a).expect("shapes agree")
    }
}

impl Parametrized for DiagHeadParams {
    fn family(&self) -> &'static str {
        "diag-multihead"
    }

    fn layout(&self) -> Vec<ParamGroup> {
        let (h, d, t) = (self.heads(), self.dim(), self.t_max());
        vec![
            ParamGroup::new("A", &[h, d]),
            ParamGroup::new("B", &[h, d]),
            ParamGroup::new("P", &[t, t]),
        ]
    }

    fn to_vec(&self) -> Vec<f64> {
        [self.a.as_slice(), self.b.as_slice(), self.p.as_slice()].concat()
    }

    fn set_from(&mut self, v: &[f64]) -> Result<()> {
        scatter(
            v,
            &mut [
                self.a.as_mut_slice(),
                self.b.as_mut_slice(),
                self.p.as_mut_slice(),
            ],
        )
    }
}

fn check_plain(params: &DiagHeadParams, tokens: &TokenSequence, t: usize) -> Result<()> {
    tokens.expect(Encoding::Plain)?;
    if t < 2 || t > tokens.len() || t > params.t_max() {
        return Err(Error::InvalidArgument(format!(
            "prefix length {t} outside 2..={}",
            tokens.len().min(params.t_max())
        )));
    }
    if tokens.token_dim != params.dim() {
        return Err(Error::Dimension(format!(
            "model dimension {}, tokens {}",
            params.dim(),
            tokens.token_dim
        )));
    }
    Ok(())
}

/// Pooled form: `Σ_{t≤T} P_{T−1,t} (C u_t) ⊙ e_t` with `u_t = e_t ⊙ conj(e_{T−1})`.
pub fn diag_multihead_forward(
    params: &DiagHeadParams,
    tokens: &TokenSequence,
    t: usize,
) -> Result<CVector> {
    check_plain(params, tokens, t)?;
    let c = params.coupling();
    let d = params.dim();
    let query = tokens.tokens[t - 2].conj();
    let mut out = vec![Complex::new(0.0, 0.0); d];
    for (e, &w) in tokens.tokens[..t].iter().zip(params.p_row(t)) {
        if w == 0.0 {
            continue;
        }
        let u = e.hadamard(&query);
        for i in 0..d {
            let cu: Complex = (0..d).map(|j| c[(i, j)] * u[j]).sum();
            out[i] += w * cu * e[i];
        }
    }
    Ok(CVector(out))
}

/// Head-by-head form: `Σ_h Σ_{t≤T} P_{T−1,t} ⟨e_t | A^h e_{T−1}⟩ B^h e_t`.
pub fn diag_multihead_forward_heads(
    params: &DiagHeadParams,
    tokens: &TokenSequence,
    t: usize,
) -> Result<CVector> {
    check_plain(params, tokens, t)?;
    let d = params.dim();
    let query = &tokens.tokens[t - 2];
    let mut out = CVector::zeros(d);
    for h in 0..params.heads() {
        let aq: Vec<Complex> = (0..d).map(|i| params.a[(h, i)] * query[i]).collect();
        let bh = CVector::from_real(params.b.row(h));
        for (e, &w) in tokens.tokens[..t].iter().zip(params.p_row(t)) {
            let score = w * hdot(&e.0, &aq);
            out = out.add(&bh.hadamard(e).scale(score));
        }
    }
    Ok(out)
}

/// Which power of the context an in-context estimator targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimationMode {
    /// `γ = conj(e_{T−1}) ⊙ e_T`, equal to `λ` on exact data.
    Unitary,
    /// `γ = conj(e_{T−2}) ⊙ e_T`, equal to `λ²` on exact data.
    Orthogonal,
}

impl EstimationMode {
    fn lag(&self) -> usize {
        match self {
            EstimationMode::Unitary => 1,
            EstimationMode::Orthogonal => 2,
        }
    }
}

/// In-context estimate `γ` from the last tokens of a plain sequence.
pub fn estimate_context(tokens: &TokenSequence, mode: EstimationMode) -> Result<CVector> {
    tokens.expect(Encoding::Plain)?;
    let n = tokens.len();
    let lag = mode.lag();
    if n <= lag {
        return Err(Error::InvalidArgument(format!(
            "need more than {lag} tokens"
        )));
    }
    Ok(tokens.tokens[n - 1 - lag]
        .conj()
        .hadamard(&tokens.tokens[n - 1]))
}

/// Prediction `γ ⊙ e_τ` with `τ = T − lag + 1`, so that the result is `s_{T+1}`
/// on exact data.
pub fn predict_next(tokens: &TokenSequence, mode: EstimationMode) -> Result<CVector> {
    let gamma = estimate_context(tokens, mode)?;
    Ok(gamma.hadamard(&tokens.tokens[tokens.len() - mode.lag()]))
}
