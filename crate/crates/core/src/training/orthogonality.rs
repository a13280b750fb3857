use crate::models::{DiagHeadParams, FullHeadParams};
use crate::Mat;

/// Families with a per-head value-output map `B_h`.
pub trait ValueHeads {
    fn value_maps(&self) -> Vec<Mat>;
}

impl ValueHeads for FullHeadParams {
    /// `B_h = W_O^h W_V^h`.
    fn value_maps(&self) -> Vec<Mat> {
        self.heads.iter().map(|h| h.value_map()).collect()
    }
}

impl ValueHeads for DiagHeadParams {
    fn value_maps(&self) -> Vec<Mat> {
        (0..self.heads())
            .map(|h| Mat::diag(self.b.row(h)))
            .collect()
    }
}

/// `Σ_h B_hᵀ B_h`.
pub fn head_orthogonality_matrix(params: &impl ValueHeads) -> Mat {
    let maps = params.value_maps();
    let n = maps.first().map_or(0, |m| m.cols());
    maps.iter().fold(Mat::zeros(n, n), |acc, b| {
        acc.add(&b.transpose().matmul(b).expect("square"))
    })
}

/// `Σ_{i≠j} |M_ij| / Σ_i |M_ii|`.
pub fn off_diagonal_ratio(m: &Mat) -> f64 {
    let n = m.rows();
    let diag: f64 = (0..n).map(|i| m[(i, i)].abs()).sum();
    let off: f64 = m.as_slice().iter().map(|x| x.abs()).sum::<f64>() - diag;
    off / diag.max(f64::MIN_POSITIVE)
}
