//! Analytic gradients, optimizers and training loops.

mod aug;
mod check;
mod diag;
mod flow;
mod full;
mod orthogonality;
mod pe;
mod stack;

pub use check::{grad_check, GradCheck};
pub use flow::{gradient_flow_scalar, scalar_loss, FlowPoint, FlowResult, FLOW_STEP};
pub use orthogonality::{head_orthogonality_matrix, off_diagonal_ratio, ValueHeads};
pub use pe::{diagonal_invariance, early_stopped_pe_fit, off_target_mass, PeFit, PE_FIT_MAX_ITERS};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ar_process::{Dataset, Example};
use crate::models::Parametrized;
use crate::numerics::Rng;
use crate::{Error, Result};

/// Losses above this (or non-finite) abort training.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// A trainable model: per-sequence loss `Σ_{T=2}^{T_max} ‖output_T − target_T‖²`
/// with its analytic gradient.
pub trait Model: Parametrized + Clone {
    /// Reject datasets whose encoding, dimensions or number field this
    /// family cannot handle.
    fn check_data(&self, data: &Dataset) -> Result<()>;

    /// Sum of per-sequence losses over `examples`; when `grad` is given the
    /// gradient of that sum is added to it in layout order.
    fn loss_sum(&self, examples: &[&Example], grad: Option<&mut [f64]>) -> f64;
}

/// Mean loss over `examples` and its gradient.
pub fn loss_and_grad<M: Model>(model: &M, examples: &[&Example]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; model.num_params()];
    let n = examples.len().max(1) as f64;
    let loss = model.loss_sum(examples, Some(&mut g)) / n;
    g.iter_mut().for_each(|x| *x /= n);
    (loss, g)
}

/// Mean over sequences of `Σ_T ‖𝒯(e_{1:T}) − s_{T+1}‖²`.
pub fn model_loss<M: Model>(model: &M, data: &Dataset) -> Result<f64> {
    model.check_data(data)?;
    let all: Vec<&Example> = data.examples.iter().collect();
    Ok(model.loss_sum(&all, None) / all.len().max(1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Gd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains on the full dataset every step.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub early_stop_loss: Option<f64>,
    /// Parameter groups held fixed.
    #[serde(default)]
    pub freeze: Vec<String>,
    /// Evaluate the test set every this many epochs (0: only at the end).
    #[serde(default = "one")]
    pub test_every: usize,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    pub fn adam(learning_rate: f64, epochs: usize) -> Self {
        TrainConfig {
            optimizer: Optimizer::Adam,
            learning_rate,
            epochs,
            batch_size: None,
            seed: 0,
            early_stop_loss: None,
            freeze: Vec::new(),
            test_every: 1,
        }
    }

    pub fn gd(learning_rate: f64, epochs: usize) -> Self {
        TrainConfig {
            optimizer: Optimizer::Gd,
            ..Self::adam(learning_rate, epochs)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {}",
                self.learning_rate
            )));
        }
        if let Some(t) = self.early_stop_loss {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(
                    "early-stop threshold must be > 0".into(),
                ));
            }
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("batch size must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch record of a run. Entry `k` describes the parameters at the
/// start of epoch `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub train_loss: Vec<f64>,
    pub test_loss: Vec<Option<f64>>,
    /// Seconds since the start of `fit`; excluded from reproducibility checks.
    pub wall_clock: Vec<f64>,
    pub final_train_loss: f64,
    pub final_test_loss: Option<f64>,
    pub stopped_early: bool,
    pub final_params: Vec<f64>,
}

impl LossTrace {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }

    /// Trace without timing information, for bit-level comparisons.
    pub fn without_timing(&self) -> LossTrace {
        LossTrace {
            wall_clock: Vec::new(),
            ..self.clone()
        }
    }

    /// `epoch,train_loss,test_loss` with an empty field when no test loss was
    /// computed.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "test_loss"])?;
        for (k, (tr, te)) in self.train_loss.iter().zip(&self.test_loss).enumerate() {
            let te = te.map(|x| format!("{x:e}")).unwrap_or_default();
            w.write_record([k.to_string(), format!("{tr:e}"), te])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, frozen: &[bool]) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            if frozen[i] {
                continue;
            }
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

fn guard(epoch: usize, loss: f64) -> Result<()> {
    if !loss.is_finite() || loss > DIVERGENCE_THRESHOLD {
        return Err(Error::Diverged { epoch, loss });
    }
    Ok(())
}

/// Train `model` in place. Deterministic given the config: mini-batch order
/// is drawn from `Rng::new(seed)`, and all reductions run in a fixed order.
pub fn fit<M: Model>(
    model: &mut M,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<LossTrace> {
    cfg.validate()?;
    model.check_data(train)?;
    if let Some(t) = test {
        model.check_data(t)?;
    }
    let n_params = model.num_params();
    let mut frozen = vec![false; n_params];
    for r in model.group_ranges(&cfg.freeze)? {
        frozen[r].iter_mut().for_each(|f| *f = true);
    }
    let all: Vec<&Example> = train.examples.iter().collect();
    let test_all: Vec<&Example> = test
        .map(|t| t.examples.iter().collect())
        .unwrap_or_default();
    let test_loss = |m: &M| m.loss_sum(&test_all, None) / test_all.len().max(1) as f64;

    let start = Instant::now();
    let mut rng = Rng::new(cfg.seed).split("minibatch");
    let mut params = model.to_vec();
    let mut adam = Adam::new(n_params);
    let mut trace = LossTrace {
        train_loss: Vec::with_capacity(cfg.epochs),
        test_loss: Vec::with_capacity(cfg.epochs),
        wall_clock: Vec::with_capacity(cfg.epochs),
        final_train_loss: f64::NAN,
        final_test_loss: None,
        stopped_early: false,
        final_params: Vec::new(),
    };
    let batch = cfg.batch_size.unwrap_or(all.len()).min(all.len()).max(1);
    let mut order: Vec<usize> = (0..all.len()).collect();

    for epoch in 0..cfg.epochs {
        let full = batch >= all.len();
        let (loss, grad) = if full {
            loss_and_grad(model, &all)
        } else {
            (model.loss_sum(&all, None) / all.len() as f64, Vec::new())
        };
        guard(epoch, loss)?;
        trace.train_loss.push(loss);
        let due = test.is_some() && cfg.test_every > 0 && epoch % cfg.test_every == 0;
        trace.test_loss.push(due.then(|| test_loss(model)));
        trace.wall_clock.push(start.elapsed().as_secs_f64());
        if cfg.early_stop_loss.is_some_and(|thr| loss < thr) {
            trace.stopped_early = true;
            break;
        }
        let mut apply = |params: &mut Vec<f64>, model: &mut M, g: &[f64]| -> Result<()> {
            match cfg.optimizer {
                Optimizer::Gd => {
                    for i in 0..n_params {
                        if !frozen[i] {
                            params[i] -= cfg.learning_rate * g[i];
                        }
                    }
                }
                Optimizer::Adam => adam.step(params, g, cfg.learning_rate, &frozen),
            }
            model.set_from(params)
        };
        if full {
            apply(&mut params, model, &grad)?;
        } else {
            rng.shuffle(&mut order);
            for chunk in order.chunks(batch) {
                let ex: Vec<&Example> = chunk.iter().map(|&i| all[i]).collect();
                let (_, g) = loss_and_grad(model, &ex);
                apply(&mut params, model, &g)?;
            }
        }
    }
    trace.final_train_loss = model.loss_sum(&all, None) / all.len().max(1) as f64;
    guard(trace.epochs_run(), trace.final_train_loss)?;
    trace.final_test_loss = test.map(|_| test_loss(model));
    trace.final_params = params;
    Ok(trace)
}

/// Shared dataset checks: encoding, token width, sequence length and,
/// for real-only families, zero imaginary parts.
pub(crate) fn require(
    data: &Dataset,
    encoding: crate::ar_process::Encoding,
    token_dim: Option<usize>,
    t_max: Option<usize>,
    real_only: Option<&'static str>,
) -> Result<()> {
    if data.encoding() != encoding {
        return Err(Error::Encoding {
            expected: encoding.name().into(),
            found: data.encoding().name().into(),
        });
    }
    if let Some(n) = token_dim {
        if data.token_dim() != n {
            return Err(Error::Dimension(format!(
                "model token dimension {n}, data {}",
                data.token_dim()
            )));
        }
    }
    if let Some(t) = t_max {
        if data.t_max() > t {
            return Err(Error::Dimension(format!(
                "model supports T_max {t}, data has {}",
                data.t_max()
            )));
        }
    }
    if data.t_max() < 2 {
        return Err(Error::InvalidArgument(
            "sequences need at least two tokens".into(),
        ));
    }
    if let Some(family) = real_only {
        if data.examples.iter().any(|e| {
            e.tokens.max_imag() != 0.0 || e.sequence.states.iter().any(|s| s.max_imag() != 0.0)
        }) {
            return Err(Error::ComplexTokens { family });
        }
    }
    Ok(())
}

/// Dot product of equal-length slices.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
