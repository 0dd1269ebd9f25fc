//! Versioned TOML run reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complexity::BoundReport;
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    /// Every configuration value used, including the seed.
    pub config: BTreeMap<String, String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub results: Results,
    pub timing: Timing,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Results {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality: Option<DualityResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResult {
    pub train_rows: usize,
    pub test_rows: usize,
    pub universum_rows: usize,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub objective: String,
    /// Averaged-form weights actually optimized.
    pub c: f64,
    pub c_u: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub final_objective: f64,
    pub final_l_t: f64,
    pub final_l_u: f64,
    pub final_regularizer: f64,
    pub frobenius_sq: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub sigma_inf_raw: f64,
    pub sigma_inf_features: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityResult {
    pub c: f64,
    pub n: usize,
    pub nu: f64,
    pub delta_scalar: f64,
    pub rho_mapped: f64,
    pub rho_nu_svm: f64,
    pub rho_flagged: bool,
    pub rho_compared: f64,
    pub verifiable: bool,
    pub hinge_gap: f64,
    pub nu_gap: f64,
    pub kkt_residual: f64,
    pub free_alphas: usize,
    pub sweeps: usize,
    pub probes: usize,
    pub near_boundary: usize,
    pub disagreements: usize,
    pub w: Vec<f64>,
    pub w_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub c_u: f64,
    pub delta: f64,
    pub runs_ok: usize,
    pub auc_mean: Option<f64>,
    pub auc_std: Option<f64>,
    /// Generalization bound averaged over successful runs.
    pub theorem1_rhs_mean: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub repeats: usize,
    pub points: Vec<SweepPoint>,
    /// Index into `points` with the largest mean AUC.
    pub best: Option<usize>,
}

impl Report {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            warnings: Vec::new(),
            results: Results::default(),
            timing: Timing::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let r: Self = toml::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Report(format!("unsupported schema_version {}", r.schema_version)));
        }
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
