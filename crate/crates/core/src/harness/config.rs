//! Declarative experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::pde::Equation;
use crate::solvers::Method;

/// The full-defaults template, shipped as `config/defaults.toml`.
pub const DEFAULTS_TEMPLATE: &str = include_str!("../../config/defaults.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PhaseRetrieval,
    SmoothingSweep,
    TunePoisson,
    TuneConvdiff,
    GridEval,
    MoreauCheck,
    Selftest,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::PhaseRetrieval => "phase_retrieval",
            ExperimentKind::SmoothingSweep => "smoothing_sweep",
            ExperimentKind::TunePoisson => "tune_poisson",
            ExperimentKind::TuneConvdiff => "tune_convdiff",
            ExperimentKind::GridEval => "grid_eval",
            ExperimentKind::MoreauCheck => "moreau_check",
            ExperimentKind::Selftest => "selftest",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        toml::Value::String(s.to_string())
            .try_into()
            .map_err(|_| invalid(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseRetrievalSection {
    /// `(d, m)` pairs.
    pub sizes: Vec<[usize; 2]>,
    /// `T = iterations_per_measurement * m`.
    pub iterations_per_measurement: usize,
    pub mu: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for PhaseRetrievalSection {
    fn default() -> Self {
        Self {
            sizes: vec![[10, 30]],
            iterations_per_measurement: 2000,
            mu: 5e-10,
            mu1: 5e-7,
            mu2: 5e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingSweepSection {
    pub size: [usize; 2],
    pub iterations_per_measurement: usize,
    /// `(mu1, mu2)` panels; Z-ProxSG runs with `mu = mu2`.
    pub pairs: Vec<[f64; 2]>,
}

impl Default for SmoothingSweepSection {
    fn default() -> Self {
        Self {
            size: [40, 60],
            iterations_per_measurement: 2000,
            pairs: vec![
                [1e-4, 1e-7],
                [1e-5, 1e-7],
                [1e-6, 1e-7],
                [1e-6, 1e-9],
                [1e-7, 1e-9],
                [1e-8, 1e-9],
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TunerSection {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub k: usize,
    /// `T`; `None` means `200 * |training set|`.
    pub iterations: Option<usize>,
    pub mu: f64,
    pub alpha: Option<f64>,
    pub sigma0: Option<f64>,
    /// Training grid sizes; `None` keeps `2^k + 1`, `k = 3..=7`.
    pub sizes: Option<Vec<usize>>,
    /// Fixed penalties compared against the tuned value.
    pub grid: Vec<f64>,
    pub holdout_draws: usize,
    /// Adds `N = 2^8 + 1` to the holdout sizes.
    pub include_largest: bool,
    pub holdout_sizes: Option<Vec<usize>>,
    /// Used by `grid_eval` when no tuning manifest is found.
    pub sigma_star: Option<f64>,
    pub equation: Option<String>,
}

impl Default for TunerSection {
    fn default() -> Self {
        Self {
            sigma_min: 1e-2,
            sigma_max: 1e2,
            k: 15,
            iterations: None,
            mu: 5e-10,
            alpha: None,
            sigma0: None,
            sizes: None,
            grid: crate::padmm::DEFAULT_SIGMA_GRID.to_vec(),
            holdout_draws: 40,
            include_largest: false,
            holdout_sizes: None,
            sigma_star: None,
            equation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoreauSection {
    pub dim: usize,
    pub l1_weight: f64,
    pub start: f64,
    pub short_run: usize,
    pub long_run: usize,
    pub mu: f64,
}

impl Default for MoreauSection {
    fn default() -> Self {
        Self {
            dim: 2,
            l1_weight: 0.1,
            start: 2.0,
            short_run: 1000,
            long_run: 4000,
            mu: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    pub solvers: Vec<String>,
    pub output_dir: PathBuf,
    pub svg: bool,
    pub phase_retrieval: PhaseRetrievalSection,
    pub smoothing_sweep: SmoothingSweepSection,
    pub tuner: TunerSection,
    pub moreau: MoreauSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::PhaseRetrieval,
            seed: 2024,
            replicates: 15,
            solvers: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            output_dir: PathBuf::from("results"),
            svg: false,
            phase_retrieval: PhaseRetrievalSection::default(),
            smoothing_sweep: SmoothingSweepSection::default(),
            tuner: TunerSection::default(),
            moreau: MoreauSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(kind: ExperimentKind) -> Self {
        let mut c = Self {
            experiment: kind,
            ..Self::default()
        };
        if kind == ExperimentKind::MoreauCheck {
            c.replicates = 20;
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let c = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        if self.solvers.is_empty() {
            return Err(invalid("solver list is empty"));
        }
        self.solvers.iter().map(|s| Method::parse(s)).collect()
    }

    pub fn equation(&self) -> Result<Equation> {
        match (self.experiment, &self.tuner.equation) {
            (_, Some(e)) => Equation::parse(e),
            (ExperimentKind::TuneConvdiff, None) => Ok(Equation::ConvectionDiffusion),
            _ => Ok(Equation::Poisson),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        self.methods()?;
        self.equation()?;
        if let Some([d, m]) = self.phase_retrieval.sizes.iter().find(|[d, m]| *d == 0 || *m == 0) {
            return Err(invalid(format!("size ({d}, {m}) must be positive")));
        }
        if self.phase_retrieval.sizes.is_empty() {
            return Err(invalid("phase retrieval needs at least one size"));
        }
        let t = &self.tuner;
        if !(t.sigma_min > 0.0 && t.sigma_min < t.sigma_max) {
            return Err(invalid("need 0 < sigma_min < sigma_max"));
        }
        if t.k == 0 || t.holdout_draws == 0 {
            return Err(invalid("k and holdout_draws must be at least 1"));
        }
        if self.moreau.short_run == 0 || self.moreau.long_run == 0 || self.moreau.dim == 0 {
            return Err(invalid("moreau run lengths and dimension must be positive"));
        }
        Ok(())
    }
}

/// Parses `10x30,20x45` into `(d, m)` pairs.
pub fn parse_sizes(s: &str) -> Result<Vec<[usize; 2]>> {
    s.split(',')
        .map(|p| {
            let (d, m) = p
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::Parse(format!("size '{p}' is not of the form DxM")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("size '{p}': {e}")))
            };
            Ok([parse(d)?, parse(m)?])
        })
        .collect()
}
