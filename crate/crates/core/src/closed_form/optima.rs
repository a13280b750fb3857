use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::eta_star;
use crate::models::{DiagHeadParams, StructuredAugParams};
use crate::{Error, Mat, Result};

/// Zero-loss parameter families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimumFamily {
    /// Diagonal model on unitary diagonal contexts: one-hot rows at `t = T`,
    /// `P_{T−1,T} C_ii = 1`, `C` diagonal.
    Unitary,
    /// Diagonal model on conjugate-paired contexts: rows supported on
    /// `{T−1, T}`, `C` block diagonal with `2 × 2` blocks.
    Orthogonal,
    /// Structured augmented model: only `c_{−1,0} = a3 b1` survives, equal to `η*`.
    Augmented,
}

/// Parameters to certify against a family.
#[derive(Clone, Copy, Debug)]
pub enum OptimumParams<'a> {
    Diag(&'a DiagHeadParams),
    Structured {
        params: &'a StructuredAugParams,
        t_max: usize,
        d: usize,
    },
}

/// Named constraint residuals (all ≥ 0) plus fitted family parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub family: OptimumFamily,
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
    /// Free parameters of the family estimated from the input, e.g. `b`.
    pub fitted: BTreeMap<String, f64>,
}

impl ConstraintResiduals {
    fn new(
        family: OptimumFamily,
        residuals: BTreeMap<String, f64>,
        fitted: BTreeMap<String, f64>,
    ) -> Self {
        let max_residual = residuals.values().cloned().fold(0.0, f64::max);
        ConstraintResiduals {
            family,
            residuals,
            max_residual,
            fitted,
        }
    }

    /// Name of the largest residual.
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.residuals
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, v)| (k.as_str(), *v))
    }
}

/// `A = B = I` rows (scaled so that `C = I / scale`), `P_{T−1,t} = scale·δ_{t=T}`.
/// Heads beyond `d` are zero.
pub fn unitary_optimum(heads: usize, d: usize, t_max: usize, scale: f64) -> Result<DiagHeadParams> {
    if heads < d {
        return Err(Error::Infeasible(format!(
            "{heads} heads cannot realize a rank-{d} coupling"
        )));
    }
    if scale == 0.0 || !scale.is_finite() || t_max < 2 {
        return Err(Error::InvalidArgument(
            "need a finite nonzero scale and T_max ≥ 2".into(),
        ));
    }
    let mut p = DiagHeadParams::zeros(heads, d, t_max);
    for i in 0..d {
        p.a[(i, i)] = 1.0;
        p.b[(i, i)] = 1.0 / scale;
    }
    for t in 2..=t_max {
        p.p[(t - 2, t - 1)] = scale;
    }
    Ok(p)
}

/// Off-diagonal value `b = −p_{T−1} / (1 + p_{T−1})` of the `J_b` blocks in the
/// gauge `p_T = 1`.
pub fn j_block_parameter(p_prev: f64) -> Result<f64> {
    if p_prev == -1.0 {
        return Err(Error::InvalidArgument(
            "p_{T−1} = −1 has no J_b member".into(),
        ));
    }
    Ok(-p_prev / (1.0 + p_prev))
}

/// A member of the conjugate-pair optimum family on `d = 2δ` coordinates.
///
/// With `H ≥ 2δ` heads: gauge `p_T = 1`, `P_{T−1,T−1} = p_prev`,
/// `C = diag(J_b, …, J_b)`, two heads per block. With `δ ≤ H < 2δ` only the
/// rank-δ member exists: `P_{T−1,T−1} = −1`, `P_{T−1,T} = 2`, `C = ½ diag(J, …, J)`,
/// one head per block, and `p_prev` is ignored.
pub fn orthogonal_optimum(
    delta: usize,
    heads: usize,
    t_max: usize,
    p_prev: f64,
) -> Result<DiagHeadParams> {
    if heads < delta {
        return Err(Error::Infeasible(format!(
            "{heads} heads cannot serve {delta} conjugate pairs"
        )));
    }
    if t_max < 2 || delta == 0 {
        return Err(Error::InvalidArgument("need δ ≥ 1 and T_max ≥ 2".into()));
    }
    let d = 2 * delta;
    let mut p = DiagHeadParams::zeros(heads, d, t_max);
    let (prev, last) = if heads >= 2 * delta {
        let b = j_block_parameter(p_prev)?;
        for k in 0..delta {
            let (i, j) = (2 * k, 2 * k + 1);
            let (h1, h2) = (2 * k, 2 * k + 1);
            p.a[(h1, i)] = 1.0;
            p.a[(h1, j)] = 1.0;
            p.b[(h1, i)] = 0.5 * (1.0 + b);
            p.b[(h1, j)] = 0.5 * (1.0 + b);
            p.a[(h2, i)] = 1.0;
            p.a[(h2, j)] = -1.0;
            p.b[(h2, i)] = 0.5 * (1.0 - b);
            p.b[(h2, j)] = -0.5 * (1.0 - b);
        }
        (p_prev, 1.0)
    } else {
        for k in 0..delta {
            for c in [2 * k, 2 * k + 1] {
                p.a[(k, c)] = 1.0;
                p.b[(k, c)] = 0.5;
            }
        }
        (-1.0, 2.0)
    };
    for t in 2..=t_max {
        p.p[(t - 2, t - 2)] = prev;
        p.p[(t - 2, t - 1)] = last;
    }
    Ok(p)
}

/// Distance from the gauge-fixed coupling `p̄ C` (with `p̄` the mean of
/// `P_{T−1,T}`) to the nearest block-diagonal `diag(J_b, …, J_b)`,
/// `J_b = [[1, b], [b, 1]]`. Returns the fitted `b` (mean of the in-block
/// off-diagonal entries) and the max entrywise gap.
pub fn j_block_distance(p: &DiagHeadParams) -> Result<(f64, f64)> {
    let c = p.coupling().scale(mean_last(p));
    let d = c.rows();
    if d % 2 != 0 {
        return Err(Error::Dimension(
            "conjugate-pair family needs even d".into(),
        ));
    }
    let b = (0..d / 2)
        .map(|k| c[(2 * k, 2 * k + 1)] + c[(2 * k + 1, 2 * k)])
        .sum::<f64>()
        / d as f64;
    let mut gap: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j {
                1.0
            } else if i / 2 == j / 2 {
                b
            } else {
                0.0
            };
            gap = gap.max((c[(i, j)] - want).abs());
        }
    }
    Ok((b, gap))
}

/// Residuals of every equality constraint of `family`, after fixing the scale
/// gauge so that the mean of `P_{T−1,T}` over rows is 1.
pub fn check_optimum(
    params: OptimumParams<'_>,
    family: OptimumFamily,
) -> Result<ConstraintResiduals> {
    match (params, family) {
        (OptimumParams::Diag(p), OptimumFamily::Unitary) => Ok(check_unitary(p)),
        (OptimumParams::Diag(p), OptimumFamily::Orthogonal) => check_orthogonal(p),
        (OptimumParams::Structured { params, t_max, d }, OptimumFamily::Augmented) => {
            check_augmented(params, t_max, d)
        }
        _ => Err(Error::InvalidArgument(format!(
            "parameters do not match the {family:?} family"
        ))),
    }
}

fn mean_last(p: &DiagHeadParams) -> f64 {
    let t_max = p.t_max();
    (2..=t_max).map(|t| p.p[(t - 2, t - 1)]).sum::<f64>() / (t_max - 1) as f64
}

fn diag_residual(p: &DiagHeadParams, c: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 2..=p.t_max() {
        for i in 0..c.rows() {
            worst = worst.max((p.p[(t - 2, t - 1)] * c[(i, i)] - 1.0).abs());
        }
    }
    worst
}

fn off_target(p: &DiagHeadParams, keep: usize, pbar: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 2..=p.t_max() {
        for s in 1..=t.saturating_sub(keep) {
            worst = worst.max(p.p[(t - 2, s - 1)].abs());
        }
    }
    worst / pbar.abs()
}

fn check_unitary(p: &DiagHeadParams) -> ConstraintResiduals {
    let c = p.coupling();
    let pbar = mean_last(p);
    let d = c.rows();
    let mut off: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off = off.max((pbar * c[(i, j)]).abs());
            }
        }
    }
    let residuals = BTreeMap::from([
        ("p_T*C_ii-1".to_string(), diag_residual(p, &c)),
        ("C_offdiag".to_string(), off),
        ("P_offtarget".to_string(), off_target(p, 1, pbar)),
    ]);
    let fitted = BTreeMap::from([("p_T".to_string(), pbar)]);
    ConstraintResiduals::new(OptimumFamily::Unitary, residuals, fitted)
}

fn check_orthogonal(p: &DiagHeadParams) -> Result<ConstraintResiduals> {
    let c = p.coupling();
    let d = c.rows();
    if d % 2 != 0 {
        return Err(Error::Dimension(
            "conjugate-pair family needs even d".into(),
        ));
    }
    let pbar = mean_last(p);
    let mut pair: f64 = 0.0;
    for t in 2..=p.t_max() {
        let last = p.p[(t - 2, t - 1)];
        let prev = p.p[(t - 2, t - 2)];
        for k in 0..d / 2 {
            let (i, j) = (2 * k, 2 * k + 1);
            pair = pair.max((last * c[(i, j)] + (c[(i, i)] + c[(i, j)]) * prev).abs());
            pair = pair.max((last * c[(j, i)] + (c[(j, j)] + c[(j, i)]) * prev).abs());
        }
    }
    let mut off: f64 = 0.0;
    let mut b_sum = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i / 2 != j / 2 {
                off = off.max((pbar * c[(i, j)]).abs());
            } else if i != j {
                b_sum += pbar * c[(i, j)];
            }
        }
    }
    let prev_ratio =
        (2..=p.t_max()).map(|t| p.p[(t - 2, t - 2)]).sum::<f64>() / (p.t_max() - 1) as f64 / pbar;
    let residuals = BTreeMap::from([
        ("p_T*C_ii-1".to_string(), diag_residual(p, &c)),
        ("pair".to_string(), pair),
        ("C_offblock".to_string(), off),
        ("P_offtarget".to_string(), off_target(p, 2, pbar)),
    ]);
    let fitted = BTreeMap::from([
        ("p_T".to_string(), pbar),
        ("p_prev".to_string(), prev_ratio),
        ("b".to_string(), b_sum / d as f64),
    ]);
    Ok(ConstraintResiduals::new(
        OptimumFamily::Orthogonal,
        residuals,
        fitted,
    ))
}

fn check_augmented(p: &StructuredAugParams, t_max: usize, d: usize) -> Result<ConstraintResiduals> {
    let eta = eta_star(t_max, d)?;
    let prod = p.a3 * p.b1;
    // each coefficient is compared with the factor it multiplies, which makes
    // the residuals invariant under (u, v) → (s u, v / s)
    let residuals = BTreeMap::from([
        ("a1+a4".to_string(), ((p.a1 + p.a4) / p.a3).abs()),
        ("a2".to_string(), (p.a2 / p.a3).abs()),
        ("b2".to_string(), (p.b2 / p.b1).abs()),
        ("a3*b1-eta*".to_string(), ((prod - eta) / eta).abs()),
    ]);
    let fitted = BTreeMap::from([("a3*b1".to_string(), prod), ("eta*".to_string(), eta)]);
    Ok(ConstraintResiduals::new(
        OptimumFamily::Augmented,
        residuals,
        fitted,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar_process::{encode, generate_sequence, sample_context, ContextSpec, Encoding};
    use crate::models::diag_multihead_forward;
    use crate::numerics::Rng;

    fn max_error(params: &DiagHeadParams, spec: ContextSpec) -> f64 {
        let mut rng = Rng::new(11);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let w = sample_context(&spec, &mut rng).unwrap();
            let s = generate_sequence(&w, params.t_max() + 1).unwrap();
            let e = encode(&s.prefix(params.t_max()), Encoding::Plain);
            for t in 2..=params.t_max() {
                let out = diag_multihead_forward(params, &e, t).unwrap();
                worst = worst.max(out.max_abs_diff(&s.states[t]));
            }
        }
        worst
    }

    #[test]
    fn unitary_members() {
        let p = unitary_optimum(3, 3, 6, 1.0).unwrap();
        assert_eq!(p.a, Mat::identity(3));
        let r = check_optimum(OptimumParams::Diag(&p), OptimumFamily::Unitary).unwrap();
        assert!(r.max_residual < 1e-12);
        assert!(max_error(&p, ContextSpec::UnitaryDiagonal { d: 3 }) < 1e-10);

        let p = unitary_optimum(5, 3, 6, 2.0).unwrap();
        assert_eq!(p.coupling(), Mat::identity(3).scale(0.5));
        assert!(p.a.row(3).iter().chain(p.a.row(4)).all(|x| *x == 0.0));
        assert!(max_error(&p, ContextSpec::UnitaryDiagonal { d: 3 }) < 1e-10);
        assert!(
            check_optimum(OptimumParams::Diag(&p), OptimumFamily::Unitary)
                .unwrap()
                .max_residual
                < 1e-12
        );

        assert!(matches!(
            unitary_optimum(2, 3, 6, 1.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn perturbation_shows_up() {
        let mut p = unitary_optimum(3, 3, 5, 1.0).unwrap();
        p.a[(0, 1)] += 0.1;
        let r = check_optimum(OptimumParams::Diag(&p), OptimumFamily::Unitary).unwrap();
        assert!((r.residuals["C_offdiag"] - 0.1).abs() < 1e-15);
        assert_eq!(r.worst().unwrap().0, "C_offdiag");
    }

    #[test]
    fn j_block_member_is_exact() {
        let p = orthogonal_optimum(1, 1, 6, 0.3).unwrap();
        assert_eq!(p.coupling(), Mat::from_fn(2, 2, |_, _| 0.5));
        assert_eq!(p.p_row(4), &[0.0, 0.0, -1.0, 2.0]);
        assert!(max_error(&p, ContextSpec::OrthogonalConjugate { delta: 1 }) < 1e-10);
        let r = check_optimum(OptimumParams::Diag(&p), OptimumFamily::Orthogonal).unwrap();
        assert!(r.max_residual < 1e-12);
        assert!((r.fitted["b"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn j_block_distance_of_members() {
        for (heads, prev) in [(2, 0.0), (4, 0.4), (4, -0.3)] {
            let p = orthogonal_optimum(2, heads, 5, prev).unwrap();
            let (b, gap) = j_block_distance(&p).unwrap();
            assert!(gap < 1e-12);
            let want = if heads < 4 {
                1.0
            } else {
                j_block_parameter(prev).unwrap()
            };
            assert!((b - want).abs() < 1e-12);
        }
        let mut p = orthogonal_optimum(2, 2, 5, 0.0).unwrap();
        p.a[(0, 2)] = 0.2;
        assert!((j_block_distance(&p).unwrap().1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn full_rank_members() {
        for prev in [0.0, 0.4, -0.3, 2.0] {
            let p = orthogonal_optimum(2, 4, 7, prev).unwrap();
            assert!(max_error(&p, ContextSpec::OrthogonalConjugate { delta: 2 }) < 1e-10);
            let r = check_optimum(OptimumParams::Diag(&p), OptimumFamily::Orthogonal).unwrap();
            assert!(r.max_residual < 1e-12, "{r:?}");
            assert!((r.fitted["b"] - j_block_parameter(prev).unwrap()).abs() < 1e-12);
        }
        let p = orthogonal_optimum(2, 4, 5, 0.0).unwrap();
        assert_eq!(p.coupling(), Mat::identity(4));
        assert!(orthogonal_optimum(2, 4, 5, -1.0).is_err());
        assert!(orthogonal_optimum(3, 2, 5, 0.0).is_err());
    }

    #[test]
    fn rotation_identity() {
        let rot = |th: f64| {
            Mat::from_rows(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]).unwrap()
        };
        for th in [std::f64::consts::FRAC_PI_2, 0.3, 2.0] {
            let lhs = rot(th).scale(2.0 * th.cos()).sub(&Mat::identity(2));
            assert!(lhs.sub(&rot(2.0 * th)).max_abs() < 1e-15);
        }
    }

    #[test]
    fn augmented_certificate() {
        let eta = eta_star(10, 3).unwrap();
        let p = StructuredAugParams {
            a3: 2.0,
            b1: eta / 2.0,
            ..Default::default()
        };
        let r = check_optimum(
            OptimumParams::Structured {
                params: &p,
                t_max: 10,
                d: 3,
            },
            OptimumFamily::Augmented,
        )
        .unwrap();
        assert!(r.max_residual < 1e-15);
        assert!(check_optimum(
            OptimumParams::Structured {
                params: &p,
                t_max: 10,
                d: 3
            },
            OptimumFamily::Unitary
        )
        .is_err());
    }
}
