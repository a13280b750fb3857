//! Context ensembles, AR(1) sequence generation, token encodings and datasets.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::numerics::{
    cpow, haar_orthogonal, roots_of_unity_grid, sample_unit_complex, unit_complex, CVector,
    Complex, Mat, Rng,
};
use crate::{Error, Result};

/// Distribution family for the context matrix `W`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContextSpec {
    /// `diag(λ_1, …, λ_d)` with i.i.d. uniform unit-circle entries.
    UnitaryDiagonal { d: usize },
    /// Spectrum `(λ_1, λ̄_1, …, λ_δ, λ̄_δ)`, i.e. a real rotation in dimension `2δ`.
    OrthogonalConjugate { delta: usize },
    /// Dense Haar-distributed real orthogonal matrix (non-commuting ensemble).
    GeneralOrthogonal { d: usize },
    /// Scalar `λ = e^{iθ/μ}`, `θ ~ U(0, 2π)`.
    RestrictedArc { mu: f64 },
}

impl ContextSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ContextSpec::UnitaryDiagonal { d } | ContextSpec::GeneralOrthogonal { d } => d,
            ContextSpec::OrthogonalConjugate { delta } => 2 * delta,
            ContextSpec::RestrictedArc { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ContextSpec::UnitaryDiagonal { d } | ContextSpec::GeneralOrthogonal { d } if d == 0 => {
                Err(Error::InvalidArgument(
                    "context dimension must be ≥ 1".into(),
                ))
            }
            ContextSpec::OrthogonalConjugate { delta: 0 } => {
                Err(Error::InvalidArgument("δ must be ≥ 1".into()))
            }
            ContextSpec::RestrictedArc { mu } if !(mu >= 1.0 && mu.is_finite()) => {
                Err(Error::InvalidArgument(format!("μ must be ≥ 1, got {mu}")))
            }
            _ => Ok(()),
        }
    }

    /// True when contexts are diagonal in a fixed basis.
    pub fn is_spectral(&self) -> bool {
        !matches!(self, ContextSpec::GeneralOrthogonal { .. })
    }
}

/// A sampled context matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ContextMatrix {
    /// Diagonal matrix given by its unit-modulus spectrum.
    Spectral(CVector),
    /// Dense real orthogonal matrix.
    Dense(Mat),
}

impl ContextMatrix {
    pub fn dim(&self) -> usize {
        match self {
            ContextMatrix::Spectral(l) => l.len(),
            ContextMatrix::Dense(m) => m.rows(),
        }
    }

    /// `W s`.
    pub fn apply(&self, s: &CVector) -> CVector {
        match self {
            ContextMatrix::Spectral(l) => l.hadamard(s),
            ContextMatrix::Dense(m) => CVector(m.matvec_c(&s.0)),
        }
    }

    /// `W^{-1} s`; both variants are unitary so this is `W^⋆ s`.
    pub fn apply_inverse(&self, s: &CVector) -> CVector {
        match self {
            ContextMatrix::Spectral(l) => l.conj().hadamard(s),
            ContextMatrix::Dense(m) => CVector(m.transpose().matvec_c(&s.0)),
        }
    }

    pub fn spectrum(&self) -> Option<&CVector> {
        match self {
            ContextMatrix::Spectral(l) => Some(l),
            ContextMatrix::Dense(_) => None,
        }
    }

    /// Real orthogonal embedding of a spectral context: `diag(λ)` in `U(d)`
    /// maps to `[[Re, −Im], [Im, Re]]` in `O(2d)`. Dense contexts are returned
    /// unchanged.
    pub fn real_embedding(&self) -> Mat {
        match self {
            ContextMatrix::Dense(m) => m.clone(),
            ContextMatrix::Spectral(l) => {
                let n = l.len();
                Mat::from_fn(2 * n, 2 * n, |r, c| {
                    if r % n != c % n {
                        return 0.0;
                    }
                    let z = l[r % n];
                    match (r < n, c < n) {
                        (true, true) | (false, false) => z.re,
                        (true, false) => -z.im,
                        (false, true) => z.im,
                    }
                })
            }
        }
    }
}

/// Draw a context matrix from `spec`.
pub fn sample_context(spec: &ContextSpec, rng: &mut Rng) -> Result<ContextMatrix> {
    spec.validate()?;
    Ok(match *spec {
        ContextSpec::UnitaryDiagonal { d } => {
            ContextMatrix::Spectral(CVector((0..d).map(|_| sample_unit_complex(rng)).collect()))
        }
        ContextSpec::OrthogonalConjugate { delta } => {
            let mut l = Vec::with_capacity(2 * delta);
            for _ in 0..delta {
                let z = sample_unit_complex(rng);
                l.push(z);
                l.push(z.conj());
            }
            ContextMatrix::Spectral(CVector(l))
        }
        ContextSpec::GeneralOrthogonal { d } => ContextMatrix::Dense(haar_orthogonal(d, rng)?),
        ContextSpec::RestrictedArc { mu } => {
            ContextMatrix::Spectral(CVector(vec![unit_complex(TAU * rng.uniform() / mu)]))
        }
    })
}

/// States `s_1, …, s_T` of one AR(1) trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub context: ContextMatrix,
    pub states: Vec<CVector>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.context.dim()
    }

    /// `s_0 = W^{-1} s_1`, the state before the first token.
    pub fn predecessor(&self) -> CVector {
        self.context.apply_inverse(&self.states[0])
    }

    /// `s_t` for `t ≥ 0` (1-indexed, `s_0` is the predecessor).
    pub fn state(&self, t: usize) -> CVector {
        if t == 0 {
            self.predecessor()
        } else {
            self.states[t - 1].clone()
        }
    }

    /// The next state after the last one, `W s_T`.
    pub fn next_state(&self) -> CVector {
        self.context
            .apply(self.states.last().expect("non-empty sequence"))
    }

    /// The sequence prefixed by its predecessor: `s_0, s_1, …, s_T`.
    pub fn with_predecessor(&self) -> Sequence {
        let mut states = Vec::with_capacity(self.states.len() + 1);
        states.push(self.predecessor());
        states.extend(self.states.iter().cloned());
        Sequence {
            context: self.context.clone(),
            states,
        }
    }

    /// Truncate to the first `t` states.
    pub fn prefix(&self, t: usize) -> Sequence {
        Sequence {
            context: self.context.clone(),
            states: self.states[..t].to_vec(),
        }
    }
}

/// `s_1 = 1_d`, `s_{t+1} = W s_t`, for `t < T`.
pub fn generate_sequence(w: &ContextMatrix, t: usize) -> Result<Sequence> {
    generate_sequence_from(w, CVector::ones(w.dim()), t)
}

/// Same as [`generate_sequence`] with an arbitrary initial state.
pub fn generate_sequence_from(w: &ContextMatrix, s1: CVector, t: usize) -> Result<Sequence> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "sequence length must be ≥ 2, got {t}"
        )));
    }
    if s1.len() != w.dim() {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, context {}",
            s1.len(),
            w.dim()
        )));
    }
    let mut states = Vec::with_capacity(t);
    states.push(s1);
    for i in 1..t {
        let next = match w {
            // exact powers avoid drift over long sequences
            ContextMatrix::Spectral(l) => CVector(
                l.0.iter()
                    .zip(&states[0].0)
                    .map(|(z, s)| cpow(*z, i as i64) * s)
                    .collect(),
            ),
            ContextMatrix::Dense(_) => w.apply(&states[i - 1]),
        };
        states.push(next);
    }
    Ok(Sequence {
        context: w.clone(),
        states,
    })
}

/// Token encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// `e_t = s_t`.
    Plain,
    /// `e_t = (0_d, s_t, s_{t−1})`.
    Augmented,
    /// `e_t = (s_t, s_t)`.
    Duplicated,
}

impl Encoding {
    pub fn token_dim(&self, d: usize) -> usize {
        match self {
            Encoding::Plain => d,
            Encoding::Augmented => 3 * d,
            Encoding::Duplicated => 2 * d,
        }
    }

    /// Regression target for a next state: `s` itself, or `(s, s)` for
    /// duplicated tokens.
    pub fn target(&self, next: &CVector) -> CVector {
        match self {
            Encoding::Plain | Encoding::Augmented => next.clone(),
            Encoding::Duplicated => CVector([next.0.as_slice(), next.0.as_slice()].concat()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Encoding::Plain => "plain",
            Encoding::Augmented => "augmented",
            Encoding::Duplicated => "duplicated",
        }
    }
}

/// Encoded tokens `e_{1:T}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenSequence {
    pub encoding: Encoding,
    pub token_dim: usize,
    pub tokens: Vec<CVector>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn prefix(&self, t: usize) -> TokenSequence {
        TokenSequence {
            encoding: self.encoding,
            token_dim: self.token_dim,
            tokens: self.tokens[..t].to_vec(),
        }
    }

    pub fn expect(&self, encoding: Encoding) -> Result<()> {
        if self.encoding == encoding {
            Ok(())
        } else {
            Err(Error::Encoding {
                expected: encoding.name().into(),
                found: self.encoding.name().into(),
            })
        }
    }

    /// Largest imaginary component over all tokens.
    pub fn max_imag(&self) -> f64 {
        self.tokens.iter().fold(0.0, |m, e| m.max(e.max_imag()))
    }
}

/// Encode a state sequence. The augmented encoding uses `s_0 = W^{-1} s_1`.
pub fn encode(seq: &Sequence, encoding: Encoding) -> TokenSequence {
    let d = seq.dim();
    let tokens = match encoding {
        Encoding::Plain => seq.states.clone(),
        Encoding::Duplicated => seq.states.iter().map(|s| encoding.target(s)).collect(),
        Encoding::Augmented => {
            let s0 = seq.predecessor();
            (0..seq.len())
                .map(|i| {
                    let prev = if i == 0 { &s0 } else { &seq.states[i - 1] };
                    let mut e = vec![Complex::new(0.0, 0.0); d];
                    e.extend_from_slice(&seq.states[i].0);
                    e.extend_from_slice(&prev.0);
                    CVector(e)
                })
                .collect()
        }
    };
    TokenSequence {
        encoding,
        token_dim: encoding.token_dim(d),
        tokens,
    }
}

/// One training example: tokens `e_{1:T_max}` and states `s_1..s_{T_max+1}`,
/// so that every prefix `T ∈ {2..T_max}` has its target `s_{T+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub tokens: TokenSequence,
    pub sequence: Sequence,
}

impl Example {
    pub fn t_max(&self) -> usize {
        self.tokens.len()
    }

    /// Encoded target for prefix length `t` (1-indexed): the encoding of `s_{t+1}`.
    pub fn target(&self, t: usize) -> CVector {
        self.tokens.encoding.target(&self.sequence.states[t])
    }
}

/// How a dataset was produced; enough to regenerate it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Independent draws from the context distribution.
    Random { seed: u64, n: usize },
    /// Every point of the `m`-th-roots-of-unity product grid; averages over it
    /// equal population expectations for polynomials of per-variable degree `< m`.
    Grid { m: usize },
}

/// Regeneration metadata, also the JSON export format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub spec: ContextSpec,
    pub source: DatasetSource,
    pub t_max: usize,
    pub encoding: Encoding,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub examples: Vec<Example>,
}

fn build_example(w: ContextMatrix, t_max: usize, encoding: Encoding) -> Result<Example> {
    let sequence = generate_sequence(&w, t_max + 1)?;
    let tokens = encode(&sequence.prefix(t_max), encoding);
    Ok(Example { tokens, sequence })
}

/// `n` sequences with independent contexts. Each sequence draws from its own
/// substream of `rng`, so the result depends only on `(spec, seed, n, T_max,
/// encoding)`.
pub fn make_dataset(
    spec: &ContextSpec,
    n: usize,
    t_max: usize,
    encoding: Encoding,
    rng: &Rng,
) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 || t_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n ≥ 1 and T_max ≥ 2 (got n={n}, T_max={t_max})"
        )));
    }
    let examples = (0..n)
        .map(|i| {
            let mut sub = rng.split(&format!("seq/{i}"));
            build_example(sample_context(spec, &mut sub)?, t_max, encoding)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        meta: DatasetMeta {
            spec: *spec,
            source: DatasetSource::Random {
                seed: rng.seed(),
                n,
            },
            t_max,
            encoding,
        },
        examples,
    })
}

/// Exact-quadrature dataset over the roots-of-unity product grid. Only the
/// full-circle spectral ensembles qualify.
pub fn grid_dataset(
    spec: &ContextSpec,
    m: usize,
    t_max: usize,
    encoding: Encoding,
) -> Result<Dataset> {
    spec.validate()?;
    if t_max < 2 {
        return Err(Error::InvalidArgument("T_max must be ≥ 2".into()));
    }
    let grid = roots_of_unity_grid(m)?;
    let (free, conjugate) = match *spec {
        ContextSpec::UnitaryDiagonal { d } => (d, false),
        ContextSpec::OrthogonalConjugate { delta } => (delta, true),
        _ => {
            return Err(Error::InvalidArgument(
                "grid quadrature needs a full-circle spectral ensemble".into(),
            ))
        }
    };
    let total = m
        .checked_pow(free as u32)
        .filter(|n| *n <= 1 << 22)
        .ok_or_else(|| Error::InvalidArgument(format!("grid {m}^{free} too large")))?;
    let mut examples = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut l = Vec::with_capacity(spec.dim());
        for _ in 0..free {
            let z = grid[idx % m];
            idx /= m;
            l.push(z);
            if conjugate {
                l.push(z.conj());
            }
        }
        examples.push(build_example(
            ContextMatrix::Spectral(CVector(l)),
            t_max,
            encoding,
        )?);
    }
    Ok(Dataset {
        meta: DatasetMeta {
            spec: *spec,
            source: DatasetSource::Grid { m },
            t_max,
            encoding,
        },
        examples,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn t_max(&self) -> usize {
        self.meta.t_max
    }

    pub fn encoding(&self) -> Encoding {
        self.meta.encoding
    }

    /// Context dimension `d`.
    pub fn dim(&self) -> usize {
        self.meta.spec.dim()
    }

    pub fn token_dim(&self) -> usize {
        self.meta.encoding.token_dim(self.dim())
    }

    /// Rebuild from metadata alone.
    pub fn regenerate(meta: &DatasetMeta) -> Result<Dataset> {
        match meta.source {
            DatasetSource::Random { seed, n } => {
                make_dataset(&meta.spec, n, meta.t_max, meta.encoding, &Rng::new(seed))
            }
            DatasetSource::Grid { m } => grid_dataset(&meta.spec, m, meta.t_max, meta.encoding),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)?)
    }

    pub fn from_json(json: &str) -> Result<Dataset> {
        let meta: DatasetMeta = serde_json::from_str(json)?;
        Dataset::regenerate(&meta)
    }

    pub fn subset(&self, idx: &[usize]) -> Vec<&Example> {
        idx.iter().map(|&i| &self.examples[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_pairs() {
        let mut rng = Rng::new(1);
        let w = sample_context(&ContextSpec::OrthogonalConjugate { delta: 2 }, &mut rng).unwrap();
        let l = w.spectrum().unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l[1], l[0].conj());
        assert_eq!(l[3], l[2].conj());
        assert!(w.real_embedding().orthogonality_defect() < 1e-10);
    }

    #[test]
    fn unitary_entries_on_circle() {
        let mut rng = Rng::new(2);
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d: 3 }, &mut rng).unwrap();
        assert!(w
            .spectrum()
            .unwrap()
            .0
            .iter()
            .all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn arc_covers_full_circle_at_mu_one() {
        let mut rng = Rng::new(3);
        let max_arg = (0..10_000)
            .map(|_| {
                let w = sample_context(&ContextSpec::RestrictedArc { mu: 1.0 }, &mut rng).unwrap();
                w.spectrum().unwrap()[0].arg().rem_euclid(TAU)
            })
            .fold(0.0, f64::max);
        assert!(max_arg > TAU - 0.01);
        assert!(ContextSpec::RestrictedArc { mu: 0.5 }.validate().is_err());
    }

    #[test]
    fn identity_context_repeats_ones() {
        let w = ContextMatrix::Spectral(CVector::ones(2));
        let s = generate_sequence(&w, 4).unwrap();
        assert!(s.states.iter().all(|x| *x == CVector::ones(2)));
    }

    #[test]
    fn powers_of_i() {
        let w = ContextMatrix::Spectral(CVector(vec![Complex::new(0.0, 1.0)]));
        let s = generate_sequence(&w, 4).unwrap();
        let expect = [
            Complex::new(1.0, 0.0),
            Complex::new(0.0, 1.0),
            Complex::new(-1.0, 0.0),
            Complex::new(0.0, -1.0),
        ];
        for (x, e) in s.states.iter().zip(expect) {
            assert!((x[0] - e).norm() < 1e-15);
        }
    }

    #[test]
    fn norm_preserved_and_recursion_holds() {
        let mut rng = Rng::new(4);
        for spec in [
            ContextSpec::UnitaryDiagonal { d: 4 },
            ContextSpec::OrthogonalConjugate { delta: 2 },
            ContextSpec::GeneralOrthogonal { d: 5 },
        ] {
            let w = sample_context(&spec, &mut rng).unwrap();
            let s = generate_sequence(&w, 60).unwrap();
            let d = spec.dim() as f64;
            for t in 0..s.len() {
                assert!((s.states[t].norm() - d.sqrt()).abs() < 1e-10);
                if t + 1 < s.len() {
                    let err = s.states[t + 1].sub(&w.apply(&s.states[t])).norm();
                    assert!(err < 1e-10 * d.sqrt());
                }
            }
        }
    }

    #[test]
    fn encodings() {
        let mut rng = Rng::new(5);
        let w = sample_context(&ContextSpec::GeneralOrthogonal { d: 5 }, &mut rng).unwrap();
        let s = generate_sequence(&w, 6).unwrap();
        assert_eq!(encode(&s, Encoding::Plain).tokens, s.states);
        assert_eq!(encode(&s, Encoding::Duplicated).token_dim, 10);
        let aug = encode(&s, Encoding::Augmented);
        let e2 = &aug.tokens[1];
        assert!(e2.0[..5].iter().all(|z| z.norm() == 0.0));
        assert_eq!(&e2.0[5..10], s.states[1].as_slice());
        assert_eq!(&e2.0[10..15], s.states[0].as_slice());
        let s0 = &aug.tokens[0].0[10..15];
        let back = w.apply(&CVector(s0.to_vec()));
        assert!(back.max_abs_diff(&s.states[0]) < 1e-12);
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let spec = ContextSpec::UnitaryDiagonal { d: 3 };
        let one = make_dataset(&spec, 1, 7, Encoding::Plain, &Rng::new(9)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.examples[0].sequence.len(), 8);
        let a = make_dataset(&spec, 20, 7, Encoding::Augmented, &Rng::new(9)).unwrap();
        let b = Dataset::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_dataset_enumerates() {
        let g = grid_dataset(
            &ContextSpec::OrthogonalConjugate { delta: 2 },
            5,
            4,
            Encoding::Plain,
        )
        .unwrap();
        assert_eq!(g.len(), 25);
        assert!(grid_dataset(
            &ContextSpec::RestrictedArc { mu: 3.0 },
            5,
            4,
            Encoding::Plain
        )
        .is_err());
    }
}
