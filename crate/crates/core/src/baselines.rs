//! Non-attention references: gradient descent on the inner regression
//! objective, the least-squares AR fit and the linear RNN.

use crate::ar_process::{Example, Sequence};
use crate::numerics::{pinv_hermitian, CMatrix, CVector, Complex};
use crate::{Error, Result};

/// Relative singular-value cutoff for the least-squares fit.
pub const PINV_RTOL: f64 = 1e-10;

/// `½ Σ_{t<T} ‖s_{t+1} − W s_t‖²` over the states of `seq`.
pub fn inner_loss(w: &CMatrix, seq: &Sequence) -> f64 {
    0.5 * seq
        .states
        .windows(2)
        .map(|p| p[1].sub(&w.matvec(&p[0])).norm_sqr())
        .sum::<f64>()
}

/// Iterate of gradient descent on the inner objective.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerGdState {
    pub w: CMatrix,
    pub eta: f64,
    pub iterations: usize,
    /// Inner loss after each step.
    pub losses: Vec<f64>,
}

impl InnerGdState {
    /// `W s_T`, the prediction for the state after the last one.
    pub fn predict(&self, seq: &Sequence) -> CVector {
        self.w.matvec(seq.states.last().expect("non-empty"))
    }
}

/// `L` steps of `W ← W + η Σ_t (s_{t+1} − W s_t) s_t^⋆` from `W = 0`.
pub fn inner_gd(seq: &Sequence, steps: usize, eta: f64) -> Result<InnerGdState> {
    if steps == 0 || !(eta > 0.0) {
        return Err(Error::InvalidArgument("need L ≥ 1 and η > 0".into()));
    }
    if seq.len() < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let d = seq.dim();
    let mut w = CMatrix::zeros(d, d);
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut step = CMatrix::zeros(d, d);
        for p in seq.states.windows(2) {
            let r = p[1].sub(&w.matvec(&p[0]));
            step = step.add(&CMatrix::outer(&r, &p[0]));
        }
        w = w.add(&step.scale(Complex::new(eta, 0.0)));
        losses.push(inner_loss(&w, seq));
    }
    Ok(InnerGdState {
        w,
        eta,
        iterations: steps,
        losses,
    })
}

/// Steepest descent on the inner objective with the exact line-search step
/// `η_k = ‖R‖²_F / Σ_t ‖R s_t‖²`, `R = Σ_t (s_{t+1} − W s_t) s_t^⋆`, from
/// `W = 0`. Stops early once the residual direction vanishes; `eta` holds the
/// last step taken.
pub fn inner_gd_line_search(seq: &Sequence, steps: usize) -> Result<InnerGdState> {
    if steps == 0 {
        return Err(Error::InvalidArgument("need L ≥ 1".into()));
    }
    if seq.len() < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let d = seq.dim();
    let inputs = &seq.states[..seq.len() - 1];
    let mut w = CMatrix::zeros(d, d);
    let mut eta = 0.0;
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut dir = CMatrix::zeros(d, d);
        for p in seq.states.windows(2) {
            dir = dir.add(&CMatrix::outer(&p[1].sub(&w.matvec(&p[0])), &p[0]));
        }
        let num: f64 = dir.as_slice().iter().map(|z| z.norm_sqr()).sum();
        let den: f64 = inputs.iter().map(|s| dir.matvec(s).norm_sqr()).sum();
        if den == 0.0 {
            break;
        }
        eta = num / den;
        w = w.add(&dir.scale(Complex::new(eta, 0.0)));
        losses.push(inner_loss(&w, seq));
    }
    let iterations = losses.len();
    Ok(InnerGdState {
        w,
        eta,
        iterations,
        losses,
    })
}

/// How inner gradient descent picks its step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    LineSearch,
}

/// Exact minimizer of the inner objective through the normal equations,
/// `Ŵ = (Σ s_{t+1} s_t^⋆)(Σ s_t s_t^⋆)^+`, and the attained mean squared
/// one-step residual.
pub fn lstsq_ar_fit(seq: &Sequence) -> Result<(CMatrix, f64)> {
    if seq.len() < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let d = seq.dim();
    let mut cross = CMatrix::zeros(d, d);
    let mut gram = CMatrix::zeros(d, d);
    for p in seq.states.windows(2) {
        cross = cross.add(&CMatrix::outer(&p[1], &p[0]));
        gram = gram.add(&CMatrix::outer(&p[0], &p[0]));
    }
    let w = cross.matmul(&pinv_hermitian(&gram, PINV_RTOL)?)?;
    let mse = 2.0 * inner_loss(&w, seq) / (seq.len() - 1) as f64;
    Ok((w, mse))
}

/// Mean over `examples` of `Σ_{T=2}^{T_max} ‖W_L s_T − s_{T+1}‖²`, where
/// `W_L` is the `L`-step inner-GD iterate fitted on `s_0, …, s_T`.
pub fn inner_gd_loss(examples: &[&Example], steps: usize, rule: StepRule) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let full = ex.sequence.with_predecessor();
        for t in 2..=ex.t_max() {
            let prefix = full.prefix(t + 1);
            let g = match rule {
                StepRule::Fixed(eta) => inner_gd(&prefix, steps, eta)?,
                StepRule::LineSearch => inner_gd_line_search(&prefix, steps)?,
            };
            total += g.predict(&prefix).sub(&ex.sequence.states[t]).norm_sqr();
        }
    }
    Ok(total / examples.len().max(1) as f64)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Step size from `etas` minimizing [`inner_gd_loss`], with that loss. Ties
/// keep the smaller step; diverging steps are skipped.
pub fn tune_inner_gd(examples: &[&Example], steps: usize, etas: &[f64]) -> Result<(f64, f64)> {
    let mut best = (f64::NAN, f64::INFINITY);
    for &eta in etas {
        let loss = inner_gd_loss(examples, steps, StepRule::Fixed(eta))?;
        if loss.is_finite() && loss < best.1 {
            best = (eta, loss);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::InvalidArgument("every step size diverged".into()));
    }
    Ok(best)
}

/// `y_t = Σ_{k=1}^t A^{t−k} B s_k` with `s_k = W^{k−1} s_1` read from `seq`.
pub fn linear_rnn_forward(a: &CMatrix, b: &CMatrix, seq: &Sequence, t: usize) -> Result<CVector> {
    if t == 0 || t > seq.len() {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside 1..={}",
            seq.len()
        )));
    }
    if b.cols() != seq.dim() || a.rows() != a.cols() || a.cols() != b.rows() {
        return Err(Error::Dimension(
            "RNN matrices do not match the sequence".into(),
        ));
    }
    let mut y = CVector::zeros(a.rows());
    for s in &seq.states[..t] {
        y = a.matvec(&y).add(&b.matvec(s));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar_process::{generate_sequence, sample_context, ContextMatrix, ContextSpec};
    use crate::numerics::{roots_of_unity_grid, unit_complex, Rng};

    #[test]
    fn scalar_one_step() {
        let lam = unit_complex(0.8);
        let s = generate_sequence(&ContextMatrix::Spectral(CVector(vec![lam])), 6).unwrap();
        let g = inner_gd(&s, 1, 0.1).unwrap();
        assert!((g.w.as_slice()[0] - lam * 0.5).norm() < 1e-14);
        let g = inner_gd(&s, 1, 1.0 / 5.0).unwrap();
        assert!((g.w.as_slice()[0] - lam).norm() < 1e-14);
    }

    #[test]
    fn descent_in_steps() {
        let mut rng = Rng::new(1);
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d: 3 }, &mut rng).unwrap();
        let s = generate_sequence(&w, 10).unwrap();
        let g = inner_gd(&s, 30, 0.02).unwrap();
        assert!(g.losses.windows(2).all(|p| p[1] < p[0]));
        let (what, _) = lstsq_ar_fit(&s).unwrap();
        assert!(
            inner_loss(&what, &s) <= g.losses.iter().cloned().fold(f64::INFINITY, f64::min) + 1e-12
        );
    }

    #[test]
    fn line_search_one_step_is_exact_in_one_dimension() {
        let lam = unit_complex(0.3);
        let s = generate_sequence(&ContextMatrix::Spectral(CVector(vec![lam])), 7).unwrap();
        let g = inner_gd_line_search(&s, 1).unwrap();
        let (what, _) = lstsq_ar_fit(&s).unwrap();
        assert!((g.w.as_slice()[0] - what.as_slice()[0]).norm() < 1e-14);
        assert!((g.eta - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn line_search_beats_any_fixed_step_per_iteration() {
        let mut rng = Rng::new(5);
        let w = sample_context(&ContextSpec::GeneralOrthogonal { d: 3 }, &mut rng).unwrap();
        let s = generate_sequence(&w, 9).unwrap();
        let ls = inner_gd_line_search(&s, 1).unwrap();
        for eta in [0.01, 0.05, 0.1, 0.2, 0.5] {
            assert!(ls.losses[0] <= inner_gd(&s, 1, eta).unwrap().losses[0] + 1e-12);
        }
        let ls = inner_gd_line_search(&s, 5).unwrap();
        assert!(ls.losses.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn lstsq_recovers_exact_process() {
        let mut rng = Rng::new(2);
        let w = sample_context(&ContextSpec::GeneralOrthogonal { d: 4 }, &mut rng).unwrap();
        let s = generate_sequence(&w, 12).unwrap();
        let (what, mse) = lstsq_ar_fit(&s).unwrap();
        assert!(mse < 1e-20);
        for st in &s.states {
            assert!(what.matvec(st).max_abs_diff(&w.apply(st)) < 1e-9);
        }
        let lam = unit_complex(2.1);
        let s = generate_sequence(&ContextMatrix::Spectral(CVector(vec![lam])), 5).unwrap();
        assert!((lstsq_ar_fit(&s).unwrap().0.as_slice()[0] - lam).norm() < 1e-12);
    }

    #[test]
    fn conflicting_successors_leave_residual() {
        let one = CVector::ones(1);
        let s = Sequence {
            context: ContextMatrix::Spectral(CVector::ones(1)),
            states: vec![
                one.clone(),
                one.scale(Complex::new(2.0, 0.0)),
                one.clone(),
                one.scale(Complex::new(-1.0, 0.0)),
            ],
        };
        assert!(lstsq_ar_fit(&s).unwrap().1 > 0.1);
    }

    #[test]
    fn rnn_identity_returns_current_state() {
        let mut rng = Rng::new(3);
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d: 2 }, &mut rng).unwrap();
        let s = generate_sequence(&w, 6).unwrap();
        for t in 1..=6 {
            let y =
                linear_rnn_forward(&CMatrix::zeros(2, 2), &CMatrix::identity(2), &s, t).unwrap();
            assert!(y.max_abs_diff(&s.states[t - 1]) < 1e-15);
        }
        let doubled = Sequence {
            context: s.context.clone(),
            states: s
                .states
                .iter()
                .map(|x| x.scale(Complex::new(2.0, 0.0)))
                .collect(),
        };
        let a = CMatrix::from_fn(2, 2, |i, j| {
            Complex::new(0.3 * i as f64 - 0.2, j as f64 * 0.1)
        });
        let y1 = linear_rnn_forward(&a, &CMatrix::identity(2), &s, 5).unwrap();
        let y2 = linear_rnn_forward(&a, &CMatrix::identity(2), &doubled, 5).unwrap();
        assert!(y2.max_abs_diff(&y1.scale(Complex::new(2.0, 0.0))) < 1e-14);
    }

    #[test]
    fn copy_rnn_error_over_circle() {
        // E‖s_t − s_{t+1}‖² = 2d over the unitary ensemble
        let grid = roots_of_unity_grid(8).unwrap();
        let mut total = 0.0;
        for &l1 in &grid {
            for &l2 in &grid {
                let s =
                    generate_sequence(&ContextMatrix::Spectral(CVector(vec![l1, l2])), 5).unwrap();
                let y = linear_rnn_forward(&CMatrix::zeros(2, 2), &CMatrix::identity(2), &s, 4)
                    .unwrap();
                total += y.sub(&s.states[4]).norm_sqr();
            }
        }
        assert!((total / 64.0 - 4.0).abs() < 1e-12);
    }
}
