use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ar_process::Encoding;
use crate::training::TrainConfig;
use crate::{Error, Result};

/// A complete, serializable description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Replace desk-scale sizes by the published ones.
    #[serde(default)]
    pub paper_scale: bool,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig {
            experiment,
            seed: 0,
            out_dir: None,
            paper_scale: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The experiment with paper-scale sizes applied when requested.
    pub fn effective(&self) -> Experiment {
        if self.paper_scale {
            self.experiment.paper_scale()
        } else {
            self.experiment.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Experiment {
    GradCheck(GradCheckConfig),
    VerifyOptima(VerifyOptimaConfig),
    DepthSweep(DepthSweepConfig),
    HeadsSweep(HeadsSweepConfig),
    HeadOrthogonality(HeadOrthogonalityConfig),
    PeSweep(PeSweepConfig),
    Hessian(HessianConfig),
    GradientFlow(GradientFlowConfig),
}

impl Experiment {
    pub const NAMES: [&'static str; 8] = [
        "grad-check",
        "verify-optima",
        "depth-sweep",
        "heads-sweep",
        "head-orthogonality",
        "pe-sweep",
        "hessian",
        "gradient-flow",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::GradCheck(_) => "grad-check",
            Experiment::VerifyOptima(_) => "verify-optima",
            Experiment::DepthSweep(_) => "depth-sweep",
            Experiment::HeadsSweep(_) => "heads-sweep",
            Experiment::HeadOrthogonality(_) => "head-orthogonality",
            Experiment::PeSweep(_) => "pe-sweep",
            Experiment::Hessian(_) => "hessian",
            Experiment::GradientFlow(_) => "gradient-flow",
        }
    }

    /// Desk-scale defaults for a named experiment.
    pub fn default_for(name: &str) -> Result<Experiment> {
        Ok(match name {
            "grad-check" => Experiment::GradCheck(Default::default()),
            "verify-optima" => Experiment::VerifyOptima(Default::default()),
            "depth-sweep" => Experiment::DepthSweep(Default::default()),
            "heads-sweep" => Experiment::HeadsSweep(Default::default()),
            "head-orthogonality" => Experiment::HeadOrthogonality(Default::default()),
            "pe-sweep" => Experiment::PeSweep(Default::default()),
            "hessian" => Experiment::Hessian(Default::default()),
            "gradient-flow" => Experiment::GradientFlow(Default::default()),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown experiment `{other}`"
                )))
            }
        })
    }

    pub fn paper_scale(&self) -> Experiment {
        let mut e = self.clone();
        match &mut e {
            Experiment::DepthSweep(c) => {
                c.d = 5;
                c.t_max = 50;
                c.n_train = 1 << 14;
                c.depths = (1..=6).collect();
                c.train.epochs = 2000;
            }
            Experiment::HeadsSweep(c) => {
                c.d = 10;
                c.t_max = 50;
                c.n_train = 1 << 14;
                c.n_test = 1 << 10;
                c.train.epochs = 200;
            }
            Experiment::HeadOrthogonality(c) => {
                c.t_max = 50;
                c.n_train = 1 << 14;
                c.train.epochs = 200;
            }
            Experiment::PeSweep(c) => {
                c.t_max = 50;
                c.n = 1 << 14;
            }
            _ => {}
        }
        e
    }
}

/// Which model family a gradient check exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    StructuredAug,
    AugStack,
    DiagMultihead,
    FullMultihead,
    PeOnly,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::StructuredAug,
        Family::AugStack,
        Family::DiagMultihead,
        Family::FullMultihead,
        Family::PeOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::StructuredAug => "structured-aug",
            Family::AugStack => "aug-stack",
            Family::DiagMultihead => "diag-multihead",
            Family::FullMultihead => "full-multihead",
            Family::PeOnly => "pe-only",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub families: Vec<Family>,
    /// Random (family, batch) draws, cycling through `families`.
    pub draws: usize,
    pub fd_step: f64,
    pub tolerance: f64,
    /// Flip the sign of the largest analytic coordinate before comparing.
    pub inject_sign_flip: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            families: Family::ALL.to_vec(),
            draws: 100,
            fd_step: 1e-6,
            tolerance: 1e-6,
            inject_sign_flip: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitaryRunConfig {
    pub d: usize,
    pub heads: usize,
    pub t_max: usize,
    pub n_train: usize,
    pub init_scale: f64,
    pub seeds: usize,
    pub tolerance: f64,
    pub loss_threshold: f64,
    pub train: TrainConfig,
}

impl Default for UnitaryRunConfig {
    fn default() -> Self {
        UnitaryRunConfig {
            d: 5,
            heads: 5,
            t_max: 10,
            n_train: 256,
            init_scale: 0.3,
            seeds: 10,
            tolerance: 0.05,
            loss_threshold: 1e-3,
            train: TrainConfig::adam(1e-2, 2000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrthogonalRunConfig {
    pub delta: usize,
    pub heads: Vec<usize>,
    pub t_max: usize,
    pub n_train: usize,
    pub init_scale: f64,
    /// Independent initializations tried in order until one reaches
    /// `target_loss`; the lowest-loss run is reported.
    pub restarts: usize,
    pub target_loss: f64,
    /// Entrywise distance to the nearest `J_b` block member.
    pub tolerance: f64,
    /// Bound on `σ_{δ+1} / σ_1` of `C` when `H = δ`.
    pub rank_ratio: f64,
    pub train: TrainConfig,
}

impl Default for OrthogonalRunConfig {
    fn default() -> Self {
        OrthogonalRunConfig {
            delta: 4,
            heads: vec![4, 8],
            t_max: 10,
            n_train: 256,
            init_scale: 0.05,
            restarts: 16,
            target_loss: 1e-3,
            tolerance: 0.05,
            rank_ratio: 0.05,
            train: TrainConfig::adam(1e-2, 2000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentedRunConfig {
    pub d: usize,
    pub t_max: usize,
    /// Roots-of-unity grid size per coordinate; must exceed `T_max` for
    /// exact population averages.
    pub grid_m: usize,
    pub init_scale: f64,
    pub seeds: usize,
    /// Bound on `|a3 b1 − η*| / η*`.
    pub tolerance: f64,
    /// Bound on `|a1 + a4|`, `|a2|`, `|b2|` relative to `|a3 b1|`.
    pub ratio_tolerance: f64,
    pub train: TrainConfig,
}

impl Default for AugmentedRunConfig {
    fn default() -> Self {
        AugmentedRunConfig {
            d: 3,
            t_max: 10,
            grid_m: 12,
            init_scale: 0.1,
            seeds: 10,
            tolerance: 0.02,
            ratio_tolerance: 1e-2,
            train: TrainConfig::adam(5e-3, 500),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptimaConfig {
    pub unitary: Option<UnitaryRunConfig>,
    pub orthogonal: Option<OrthogonalRunConfig>,
    pub augmented: Option<AugmentedRunConfig>,
    /// Fraction of seeds that must satisfy the tolerances.
    pub min_pass_fraction: f64,
}

impl Default for VerifyOptimaConfig {
    fn default() -> Self {
        VerifyOptimaConfig {
            unitary: Some(Default::default()),
            orthogonal: Some(Default::default()),
            augmented: Some(Default::default()),
            min_pass_fraction: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepthSweepConfig {
    pub d: usize,
    pub t_max: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub depths: Vec<usize>,
    pub layer_norm: bool,
    pub init_scale: f64,
    /// Log-spaced fixed-step grid `[lo, hi]` with `eta_points` values.
    pub eta_range: (f64, f64),
    pub eta_points: usize,
    pub train: TrainConfig,
}

impl Default for DepthSweepConfig {
    fn default() -> Self {
        let mut train = TrainConfig::adam(5e-3, 500);
        train.test_every = 50;
        DepthSweepConfig {
            d: 3,
            t_max: 20,
            n_train: 1 << 12,
            n_test: 1 << 10,
            depths: vec![1, 2, 3, 4],
            layer_norm: true,
            init_scale: 0.02,
            eta_range: (1e-3, 1.0),
            eta_points: 25,
            train,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadsSweepConfig {
    pub d: usize,
    pub t_max: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub heads: Vec<usize>,
    pub encodings: Vec<Encoding>,
    /// Rank of the softmax positional factors.
    pub pos_rank: usize,
    pub init_scale: f64,
    pub pos_scale: f64,
    pub train: TrainConfig,
}

impl Default for HeadsSweepConfig {
    fn default() -> Self {
        let mut train = TrainConfig::adam(1e-2, 60);
        train.batch_size = Some(32);
        train.test_every = 0;
        HeadsSweepConfig {
            d: 5,
            t_max: 20,
            n_train: 1 << 10,
            n_test: 1 << 8,
            heads: vec![1, 2, 4, 8],
            encodings: vec![Encoding::Plain, Encoding::Duplicated],
            pos_rank: 4,
            init_scale: 1.0,
            pos_scale: 0.1,
            train,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadOrthogonalityConfig {
    pub d: usize,
    pub heads: usize,
    pub t_max: usize,
    pub n_train: usize,
    pub pos_rank: usize,
    pub init_scale: f64,
    /// Per-head perturbation of the shared initialization.
    pub noise: f64,
    pub train: TrainConfig,
}

impl Default for HeadOrthogonalityConfig {
    fn default() -> Self {
        let mut train = TrainConfig::adam(1e-2, 60);
        train.batch_size = Some(32);
        train.test_every = 0;
        HeadOrthogonalityConfig {
            d: 5,
            heads: 4,
            t_max: 20,
            n_train: 1 << 10,
            pos_rank: 4,
            init_scale: 1.0,
            noise: 0.05,
            train,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeSweepConfig {
    pub t_max: usize,
    pub mus: Vec<f64>,
    pub n: usize,
    pub threshold: f64,
    /// Width of the sinusoidal encoding used for the recency comparison.
    pub cosine_dim: usize,
    /// First prefix length entering the diagonal-invariance metric;
    /// `None` means `T_max / 2`.
    pub first_row: Option<usize>,
}

impl Default for PeSweepConfig {
    fn default() -> Self {
        PeSweepConfig {
            t_max: 30,
            mus: vec![50.0, 100.0, 200.0, 300.0],
            n: 1 << 12,
            threshold: 1e-3,
            cosine_dim: 16,
            first_row: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HessianConfig {
    pub ts: Vec<usize>,
    pub mus: Vec<f64>,
    pub fd_step: f64,
}

impl Default for HessianConfig {
    fn default() -> Self {
        HessianConfig {
            ts: vec![2, 5, 10, 20],
            mus: vec![4.0, 50.0, 100.0, 300.0],
            fd_step: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradientFlowConfig {
    /// Random admissible initializations.
    pub inits: usize,
    /// Extra initializations run as given; inadmissible ones are an error.
    pub explicit: Vec<[f64; 3]>,
    pub step: f64,
    pub tol: f64,
    pub max_time: f64,
}

impl Default for GradientFlowConfig {
    fn default() -> Self {
        GradientFlowConfig {
            inits: 20,
            explicit: Vec::new(),
            step: crate::training::FLOW_STEP,
            tol: 1e-6,
            max_time: 1e3,
        }
    }
}
