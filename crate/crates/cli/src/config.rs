use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use watchlab_core::data::IngestOptions;
use watchlab_core::eval::GroundTruth;
use watchlab_core::{FeatureSchema, GmmOptions, Method, SynthConfig, TrainConfig};

use crate::error::ConfigError;

/// Everything a pipeline run reads from its TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; every stage derives its own seed from it by name.
    pub seed: u64,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub schema: FeatureSchema,
    pub ingest: IngestOptions,
    pub estimator: EstimatorConfig,
    pub correction: CorrectionConfig,
    pub trainer: TrainConfig,
    pub evaluation: EvaluationConfig,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Interaction CSV. Defaults to `dataset.csv` in the output directory.
    pub input: Option<PathBuf>,
    /// Ground-truth sidecar. Defaults to `truth.csv` in the output directory
    /// when that file exists.
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            input: None,
            truth: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub min_group_size: usize,
    pub tolerance: f64,
    pub max_iter: usize,
    pub variance_floor: f64,
    /// Half-width of the moving-average window.
    pub window: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let g = GmmOptions::default();
        EstimatorConfig {
            min_group_size: g.min_group_size,
            tolerance: g.tolerance,
            max_iter: g.max_iter,
            variance_floor: g.variance_floor,
            window: 3,
        }
    }
}

impl EstimatorConfig {
    pub fn gmm(&self) -> GmmOptions {
        GmmOptions {
            min_group_size: self.min_group_size,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            variance_floor: self.variance_floor,
        }
    }
}

/// One alpha or a grid to pick from on the validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    One(f64),
    Grid(Vec<f64>),
}

impl AlphaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaSpec::One(a) => vec![*a],
            AlphaSpec::Grid(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionConfig {
    pub methods: Vec<String>,
    pub alpha: Option<AlphaSpec>,
    /// Equal-frequency duration bins for d2q.
    pub bins: usize,
    pub denoise_threshold_s: f64,
    pub clip: bool,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            methods: [
                "watch_time",
                "pcr",
                "pcr_denoise",
                "wtg",
                "wtg_denoise",
                "d2q",
                "d2q_denoise",
                "d2co_a",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            alpha: None,
            bins: 60,
            denoise_threshold_s: 5.0,
            clip: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub ks: Vec<usize>,
    pub n_ranges: usize,
    /// Train, validation and test fractions of the chronological split.
    pub split: Vec<f64>,
    /// Training seeds; defaults to the global seed alone.
    pub seeds: Option<Vec<u64>>,
    pub ground_truth: GroundTruth,
    /// Write the reported model of every method and seed under `checkpoints/`.
    pub save_checkpoints: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            ks: vec![1, 3, 5],
            n_ranges: 3,
            split: vec![0.7, 0.1, 0.2],
            seeds: None,
            ground_truth: GroundTruth::Auto,
            save_checkpoints: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub windows: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl PipelineConfig {
    /// Parses TOML text; relative paths stay as written.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = config.paths.input.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.paths.truth.as_mut() {
            resolve(p);
        }
        resolve(&mut config.paths.out);
        Ok(config)
    }

    /// Parsed method list in config order, without duplicates.
    pub fn methods(&self) -> Result<Vec<Method>, ConfigError> {
        let mut out: Vec<Method> = Vec::new();
        for id in &self.correction.methods {
            let m: Method = id.parse().map_err(|_| ConfigError::UnknownMethod(id.clone()))?;
            if out.contains(&m) {
                return Err(ConfigError::Invalid(format!("method `{id}` listed twice")));
            }
            out.push(m);
        }
        Ok(out)
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.correction
            .alpha
            .as_ref()
            .map(AlphaSpec::values)
            .unwrap_or_default()
    }

    pub fn split(&self) -> (f64, f64, f64) {
        let s = &self.evaluation.split;
        (s[0], s[1], s[2])
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        self.evaluation.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }

    /// Checks everything that does not need the input files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let methods = self.methods()?;
        if methods.is_empty() {
            return Err(ConfigError::Invalid("correction.methods is empty".into()));
        }
        let alphas = self.alphas();
        if methods.contains(&Method::D2coS) && alphas.is_empty() {
            return Err(ConfigError::Invalid("d2co_s needs correction.alpha".into()));
        }
        if let Some(a) = alphas.iter().find(|a| **a == 0.0 || !a.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "alpha must be finite and non-zero, got {a}"
            )));
        }
        let c = &self.correction;
        if c.bins == 0 {
            return Err(ConfigError::Invalid("correction.bins must be positive".into()));
        }
        if !(c.denoise_threshold_s >= 0.0 && c.denoise_threshold_s.is_finite()) {
            return Err(ConfigError::Invalid(
                "correction.denoise_threshold_s must be >= 0".into(),
            ));
        }
        let e = &self.estimator;
        if e.min_group_size < 2 || e.max_iter == 0 || !(e.tolerance > 0.0) || !(e.variance_floor > 0.0) {
            return Err(ConfigError::Invalid(
                "estimator needs min_group_size >= 2, max_iter >= 1 and positive tolerance and variance floor".into(),
            ));
        }
        let ev = &self.evaluation;
        if ev.split.len() != 3 {
            return Err(ConfigError::Invalid("evaluation.split needs three fractions".into()));
        }
        if ev.split[1] <= 0.0 {
            return Err(ConfigError::Invalid("evaluation.split has no validation part".into()));
        }
        let total: f64 = ev.split.iter().sum();
        if ev.split.iter().any(|f| !(*f > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "evaluation.split must be three positive fractions summing to 1, got {:?}",
                ev.split
            )));
        }
        if ev.ks.is_empty() || ev.ks.contains(&0) {
            return Err(ConfigError::Invalid(
                "evaluation.ks must be non-empty and positive".into(),
            ));
        }
        if ev.n_ranges == 0 {
            return Err(ConfigError::Invalid("evaluation.n_ranges must be positive".into()));
        }
        if matches!(&ev.seeds, Some(s) if s.is_empty()) {
            return Err(ConfigError::Invalid("evaluation.seeds is empty".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.windows.is_empty() || sweep.alphas.is_empty() {
                return Err(ConfigError::Invalid("sweep needs windows and alphas".into()));
            }
            if sweep.alphas.iter().any(|a| *a == 0.0 || !a.is_finite()) {
                return Err(ConfigError::Invalid("sweep alphas must be finite and non-zero".into()));
            }
        }
        self.trainer
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
