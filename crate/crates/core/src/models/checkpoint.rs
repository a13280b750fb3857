use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Parametrized;
use crate::numerics::{CMatrix, Complex};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "icarl-ckpt-1";

/// One named array. Complex tensors store interleaved `re, im` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(default)]
    pub complex: bool,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn from_cmatrix(name: &str, m: &CMatrix) -> Self {
        Tensor {
            name: name.into(),
            shape: vec![m.rows(), m.cols()],
            complex: true,
            data: m.as_slice().iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn to_cmatrix(&self) -> Result<CMatrix> {
        if !self.complex || self.shape.len() != 2 {
            return Err(Error::Dimension(format!(
                "tensor `{}` is not a complex matrix",
                self.name
            )));
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        if self.data.len() != 2 * r * c {
            return Err(Error::Dimension(format!(
                "tensor `{}` has wrong length",
                self.name
            )));
        }
        Ok(CMatrix::from_fn(r, c, |i, j| {
            let k = 2 * (i * c + j);
            Complex::new(self.data[k], self.data[k + 1])
        }))
    }
}

/// Parameter checkpoint: a family tag plus row-major tensors in layout order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub family: String,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn from_params<P: Parametrized + ?Sized>(params: &P) -> Self {
        let flat = params.to_vec();
        let mut at = 0;
        let tensors = params
            .layout()
            .into_iter()
            .map(|g| {
                let n = g.len();
                let t = Tensor {
                    name: g.name,
                    shape: g.shape,
                    complex: false,
                    data: flat[at..at + n].to_vec(),
                };
                at += n;
                t
            })
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION.into(),
            family: params.family().into(),
            tensors,
        }
    }

    /// Load into a record of the same family and shapes.
    pub fn load_into<P: Parametrized + ?Sized>(&self, params: &mut P) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version `{}`",
                self.version
            )));
        }
        if self.family != params.family() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint holds `{}`, target is `{}`",
                self.family,
                params.family()
            )));
        }
        let layout = params.layout();
        if layout.len() != self.tensors.len() {
            return Err(Error::Dimension(
                "checkpoint tensor count differs from layout".into(),
            ));
        }
        let mut flat = Vec::with_capacity(params.num_params());
        for (g, t) in layout.iter().zip(&self.tensors) {
            if g.name != t.name || g.shape != t.shape || t.complex || t.data.len() != g.len() {
                return Err(Error::Dimension(format!(
                    "tensor `{}` {:?} does not match `{}` {:?}",
                    t.name, t.shape, g.name, g.shape
                )));
            }
            flat.extend_from_slice(&t.data);
        }
        params.set_from(&flat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
