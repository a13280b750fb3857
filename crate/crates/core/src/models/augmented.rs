use serde::{Deserialize, Serialize};

use super::{scatter, ParamGroup, Parametrized};
use crate::ar_process::{Encoding, TokenSequence};
use crate::numerics::{hdot, CVector, Complex, Mat, Rng};
use crate::{Error, Result};

/// Layer-norm stabilizer.
pub const LN_EPS: f64 = 1e-5;

/// Key-query map `A` and value map `B` of one augmented attention layer.
pub trait AugmentedLayer {
    fn apply_a(&self, e: &[Complex]) -> Vec<Complex>;
    fn apply_b(&self, e: &[Complex]) -> Vec<Complex>;
}

/// Block-scalar parametrization: `A = [[0,0,0],[0,a1,a2],[0,a3,a4]]`,
/// `B = [[0,b1,b2],[0,0,0],[0,0,0]]`, every block a multiple of `I_d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuredAugParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub b1: f64,
    pub b2: f64,
}

const STRUCTURED_NAMES: [&str; 6] = ["a1", "a2", "a3", "a4", "b1", "b2"];

impl StructuredAugParams {
    /// The one-step-GD point: only `a3 b1 = η` is nonzero.
    pub fn gd_step(eta: f64) -> Self {
        StructuredAugParams {
            a3: 1.0,
            b1: eta,
            ..Default::default()
        }
    }

    pub fn random(rng: &mut Rng, scale: f64) -> Self {
        let v = rng.normal_vec(6, scale);
        let mut p = Self::default();
        p.set_from(&v).expect("six coordinates");
        p
    }

    /// Dense `3d × 3d` matrices with the same action.
    pub fn to_full(&self, d: usize) -> FullAugParams {
        let mut f = FullAugParams::zeros(d);
        for i in 0..d {
            f.a[(d + i, d + i)] = self.a1;
            f.a[(d + i, 2 * d + i)] = self.a2;
            f.a[(2 * d + i, d + i)] = self.a3;
            f.a[(2 * d + i, 2 * d + i)] = self.a4;
            f.b[(i, d + i)] = self.b1;
            f.b[(i, 2 * d + i)] = self.b2;
        }
        f
    }
}

impl AugmentedLayer for StructuredAugParams {
    fn apply_a(&self, e: &[Complex]) -> Vec<Complex> {
        let d = e.len() / 3;
        let (cur, prev) = (&e[d..2 * d], &e[2 * d..]);
        let mut out = vec![Complex::new(0.0, 0.0); 3 * d];
        for i in 0..d {
            out[d + i] = self.a1 * cur[i] + self.a2 * prev[i];
            out[2 * d + i] = self.a3 * cur[i] + self.a4 * prev[i];
        }
        out
    }

    fn apply_b(&self, e: &[Complex]) -> Vec<Complex> {
        let d = e.len() / 3;
        let mut out = vec![Complex::new(0.0, 0.0); 3 * d];
        for i in 0..d {
            out[i] = self.b1 * e[d + i] + self.b2 * e[2 * d + i];
        }
        out
    }
}

impl Parametrized for StructuredAugParams {
    fn family(&self) -> &'static str {
        "structured-aug"
    }

    fn layout(&self) -> Vec<ParamGroup> {
        STRUCTURED_NAMES
            .iter()
            .map(|n| ParamGroup::new(*n, &[1]))
            .collect()
    }

    fn to_vec(&self) -> Vec<f64> {
        vec![self.a1, self.a2, self.a3, self.a4, self.b1, self.b2]
    }

    fn set_from(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != 6 {
            return Err(Error::Dimension(format!(
                "expected 6 coordinates, got {}",
                v.len()
            )));
        }
        [self.a1, self.a2, self.a3, self.a4, self.b1, self.b2] =
            [v[0], v[1], v[2], v[3], v[4], v[5]];
        Ok(())
    }
}

/// General `3d × 3d` real key-query and value matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullAugParams {
    pub a: Mat,
    pub b: Mat,
}

impl FullAugParams {
    pub fn zeros(d: usize) -> Self {
        FullAugParams {
            a: Mat::zeros(3 * d, 3 * d),
            b: Mat::zeros(3 * d, 3 * d),
        }
    }

    /// I.i.d. `N(0, scale²)` entries.
    pub fn random(d: usize, scale: f64, rng: &mut Rng) -> Self {
        let n = 3 * d;
        FullAugParams {
            a: Mat::from_vec(n, n, rng.normal_vec(n * n, scale)).expect("shape"),
            b: Mat::from_vec(n, n, rng.normal_vec(n * n, scale)).expect("shape"),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.rows() / 3
    }
}

impl AugmentedLayer for FullAugParams {
    fn apply_a(&self, e: &[Complex]) -> Vec<Complex> {
        self.a.matvec_c(e)
    }

    fn apply_b(&self, e: &[Complex]) -> Vec<Complex> {
        self.b.matvec_c(e)
    }
}

impl Parametrized for FullAugParams {
    fn family(&self) -> &'static str {
        "full-aug"
    }

    fn layout(&self) -> Vec<ParamGroup> {
        let n = self.a.rows();
        vec![ParamGroup::new("A", &[n, n]), ParamGroup::new("B", &[n, n])]
    }

    fn to_vec(&self) -> Vec<f64> {
        [self.a.as_slice(), self.b.as_slice()].concat()
    }

    fn set_from(&mut self, v: &[f64]) -> Result<()> {
        scatter(v, &mut [self.a.as_mut_slice(), self.b.as_mut_slice()])
    }
}

/// `L` stacked augmented layers with residual connections and optional
/// pre-attention layer normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugStack {
    pub layers: Vec<FullAugParams>,
    pub normalize: bool,
}

impl AugStack {
    pub fn random(d: usize, depth: usize, scale: f64, normalize: bool, rng: &mut Rng) -> Self {
        AugStack {
            layers: (0..depth)
                .map(|_| FullAugParams::random(d, scale, rng))
                .collect(),
            normalize,
        }
    }

    pub fn dim(&self) -> usize {
        self.layers[0].dim()
    }
}

impl Parametrized for AugStack {
    fn family(&self) -> &'static str {
        "aug-stack"
    }

    fn layout(&self) -> Vec<ParamGroup> {
        let n = self.layers.first().map_or(0, |l| l.a.rows());
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, _)| {
                [
                    ParamGroup::new(format!("layer{i}.A"), &[n, n]),
                    ParamGroup::new(format!("layer{i}.B"), &[n, n]),
                ]
            })
            .collect()
    }

    fn to_vec(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.to_vec()).collect()
    }

    fn set_from(&mut self, v: &[f64]) -> Result<()> {
        let mut dst: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            dst.push(l.a.as_mut_slice());
            dst.push(l.b.as_mut_slice());
        }
        scatter(v, &mut dst)
    }
}

fn check_augmented(tokens: &TokenSequence) -> Result<usize> {
    tokens.expect(Encoding::Augmented)?;
    if tokens.len() < 2 {
        return Err(Error::InvalidArgument("need at least two tokens".into()));
    }
    Ok(tokens.token_dim / 3)
}

/// `(e_T + Σ_{t≤T} ⟨A e_T | e_t⟩ B e_t)_{1:d}` with `⟨x|y⟩ = Σ x_i conj(y_i)`.
pub fn augmented_forward(params: &impl AugmentedLayer, tokens: &TokenSequence) -> Result<CVector> {
    let d = check_augmented(tokens)?;
    let e_t = tokens.tokens.last().expect("non-empty");
    let query = params.apply_a(&e_t.0);
    if query.len() != e_t.len() {
        return Err(Error::Dimension(format!(
            "layer acts on {} coordinates, tokens have {}",
            query.len(),
            e_t.len()
        )));
    }
    let mut out = e_t.0[..d].to_vec();
    for e in &tokens.tokens {
        let w = hdot(&query, &e.0);
        let v = params.apply_b(&e.0);
        for i in 0..d {
            out[i] += w * v[i];
        }
    }
    Ok(CVector(out))
}

/// Per-token normalization: subtract the complex mean, divide by the pooled
/// standard deviation of real and imaginary parts. Reduces to ordinary layer
/// norm on real tokens.
pub fn layer_norm(x: &[Complex]) -> Vec<Complex> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<Complex>() / n;
    let var = x.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    x.iter().map(|z| (z - mean) * inv).collect()
}

/// Apply every layer causally to all positions, then read the first `d`
/// coordinates of the last token.
pub fn augmented_stack_forward(
    layers: &[FullAugParams],
    tokens: &TokenSequence,
    normalize: bool,
) -> Result<CVector> {
    let d = tokens.token_dim / 3;
    let x = augmented_stack_states(layers, tokens, normalize)?;
    Ok(CVector(x.last().expect("non-empty")[..d].to_vec()))
}

/// Residual stream of every position after the last layer.
pub fn augmented_stack_states(
    layers: &[FullAugParams],
    tokens: &TokenSequence,
    normalize: bool,
) -> Result<Vec<Vec<Complex>>> {
    let d = check_augmented(tokens)?;
    if layers.is_empty() {
        return Err(Error::InvalidArgument(
            "stack needs at least one layer".into(),
        ));
    }
    if layers.iter().any(|l| l.dim() != d) {
        return Err(Error::Dimension("layer size does not match tokens".into()));
    }
    let mut x: Vec<Vec<Complex>> = tokens.tokens.iter().map(|e| e.0.clone()).collect();
    for layer in layers {
        let z: Vec<Vec<Complex>> = if normalize {
            x.iter().map(|v| layer_norm(v)).collect()
        } else {
            x.clone()
        };
        let az: Vec<_> = z.iter().map(|v| layer.apply_a(v)).collect();
        let bz: Vec<_> = z.iter().map(|v| layer.apply_b(v)).collect();
        for tau in 0..x.len() {
            for t in 0..=tau {
                let w = hdot(&az[tau], &z[t]);
                for (xi, bi) in x[tau].iter_mut().zip(&bz[t]) {
                    *xi += w * bi;
                }
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar_process::{
        encode, generate_sequence, sample_context, ContextMatrix, ContextSpec,
    };

    fn tokens(
        spec: ContextSpec,
        t: usize,
        seed: u64,
    ) -> (TokenSequence, crate::ar_process::Sequence) {
        let mut rng = Rng::new(seed);
        let w = sample_context(&spec, &mut rng).unwrap();
        let s = generate_sequence(&w, t + 1).unwrap();
        (encode(&s.prefix(t), Encoding::Augmented), s)
    }

    #[test]
    fn zero_params_return_zero() {
        let (e, _) = tokens(ContextSpec::UnitaryDiagonal { d: 3 }, 5, 1);
        let out = augmented_forward(&StructuredAugParams::default(), &e).unwrap();
        assert_eq!(out.norm(), 0.0);
        let out = augmented_stack_forward(
            &[FullAugParams::zeros(3), FullAugParams::zeros(3)],
            &e,
            true,
        )
        .unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn half_step_predicts_next_for_scalar_pairs() {
        for k in 0..7 {
            let lam = crate::numerics::unit_complex(0.3 + k as f64);
            let w = ContextMatrix::Spectral(CVector(vec![lam]));
            let s = generate_sequence(&w, 3).unwrap();
            let e = encode(&s.prefix(2), Encoding::Augmented);
            let out = augmented_forward(&StructuredAugParams::gd_step(0.5), &e).unwrap();
            assert!((out[0] - lam * lam).norm() < 1e-14);
        }
    }

    #[test]
    fn gd_step_matches_outer_product_sum() {
        let (e, s) = tokens(ContextSpec::UnitaryDiagonal { d: 3 }, 6, 2);
        let eta = 0.37;
        let out = augmented_forward(&StructuredAugParams::gd_step(eta).to_full(3), &e).unwrap();
        let full = s.with_predecessor();
        let st = &full.states[6];
        let mut expect = CVector::zeros(3);
        for t in 1..=6 {
            let w = hdot(&st.0, &full.states[t - 1].0);
            expect = expect.add(&full.states[t].scale(w * eta));
        }
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn structured_and_dense_agree() {
        let mut rng = Rng::new(3);
        let p = StructuredAugParams::random(&mut rng, 1.0);
        let (e, _) = tokens(ContextSpec::OrthogonalConjugate { delta: 2 }, 7, 4);
        let a = augmented_forward(&p, &e).unwrap();
        let b = augmented_forward(&p.to_full(4), &e).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
        let c = augmented_stack_forward(&[p.to_full(4)], &e, false).unwrap();
        assert!(a.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn wrong_encoding_is_rejected() {
        let mut rng = Rng::new(5);
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d: 2 }, &mut rng).unwrap();
        let e = encode(&generate_sequence(&w, 4).unwrap(), Encoding::Plain);
        assert!(matches!(
            augmented_forward(&StructuredAugParams::default(), &e),
            Err(Error::Encoding { .. })
        ));
    }

    #[test]
    fn layer_norm_real_case() {
        let x: Vec<Complex> = [1.0, 2.0, 3.0, 6.0]
            .iter()
            .map(|&r| Complex::new(r, 0.0))
            .collect();
        let y = layer_norm(&x);
        let mean: f64 = y.iter().map(|z| z.re).sum::<f64>() / 4.0;
        let var: f64 = y.iter().map(|z| z.re * z.re).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-14);
        assert!((var - 3.5 / (3.5 + LN_EPS)).abs() < 1e-12);
        assert!(y.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn causal_in_last_position() {
        let mut rng = Rng::new(6);
        let stack = AugStack::random(2, 2, 0.5, true, &mut rng);
        let (e, _) = tokens(ContextSpec::UnitaryDiagonal { d: 2 }, 6, 7);
        let base = augmented_stack_states(&stack.layers, &e, true).unwrap();
        let mut tampered = e.clone();
        tampered.tokens[4] = tampered.tokens[4].scale(Complex::new(3.0, -1.0));
        let again = augmented_stack_states(&stack.layers, &tampered, true).unwrap();
        assert_eq!(base[..4], again[..4]);
        assert_ne!(base[4], again[4]);
    }
}
