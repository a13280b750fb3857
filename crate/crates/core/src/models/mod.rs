//! Linear-attention forward passes.
//!
//! Every family stores real parameters and acts on complex tokens. Each
//! family implements [`Parametrized`], which fixes a flat coordinate order
//! used by optimizers, freeze masks and checkpoints.

mod augmented;
mod checkpoint;
mod diag;
mod full_head;
mod pe_only;

pub use augmented::{
    augmented_forward, augmented_stack_forward, augmented_stack_states, layer_norm, AugStack,
    AugmentedLayer, FullAugParams, StructuredAugParams, LN_EPS,
};
pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_VERSION};
pub use diag::{
    diag_multihead_forward, diag_multihead_forward_heads, estimate_context, predict_next,
    DiagHeadParams, EstimationMode,
};
pub use full_head::{
    build_shift_heads, mhsa_linear_forward, softmax_positional, FullHeadParams, Head, Positional,
    ShiftHeads,
};
pub use pe_only::{pe_only_forward, sinusoidal_encoding, PeOnlyParams};

use crate::{Error, Result};

/// A named block of coordinates in a parameter record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>, shape: &[usize]) -> Self {
        ParamGroup {
            name: name.into(),
            shape: shape.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A parameter record with a fixed flat layout.
pub trait Parametrized {
    /// Family tag written into checkpoints.
    fn family(&self) -> &'static str;

    /// Groups in flattening order.
    fn layout(&self) -> Vec<ParamGroup>;

    fn to_vec(&self) -> Vec<f64>;

    /// Overwrite every coordinate from a flat vector in layout order.
    fn set_from(&mut self, v: &[f64]) -> Result<()>;

    fn num_params(&self) -> usize {
        self.layout().iter().map(ParamGroup::len).sum()
    }

    /// Flat index ranges of the named groups; unknown names are an error.
    fn group_ranges(&self, names: &[String]) -> Result<Vec<std::ops::Range<usize>>> {
        let layout = self.layout();
        names
            .iter()
            .map(|n| {
                let mut start = 0;
                for g in &layout {
                    if &g.name == n {
                        return Ok(start..start + g.len());
                    }
                    start += g.len();
                }
                Err(Error::UnknownParam(n.clone()))
            })
            .collect()
    }
}

/// Copy `v` into consecutive slices, checking the total length.
pub(crate) fn scatter(v: &[f64], dst: &mut [&mut [f64]]) -> Result<()> {
    let total: usize = dst.iter().map(|d| d.len()).sum();
    if v.len() != total {
        return Err(Error::Dimension(format!(
            "parameter vector has length {}, layout needs {total}",
            v.len()
        )));
    }
    let mut at = 0;
    for d in dst.iter_mut() {
        let n = d.len();
        d.copy_from_slice(&v[at..at + n]);
        at += n;
    }
    Ok(())
}
