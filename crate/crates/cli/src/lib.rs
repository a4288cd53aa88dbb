//! The `watchlab` pipeline: generate, correct, train-eval and report stages
//! that hand off through files in one output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod seeds;

use std::path::{Path, PathBuf};

use anyhow::Result;

pub use config::PipelineConfig;
pub use error::{exit_code, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    Correct,
    TrainEval,
    Report,
}

/// Loads and validates a config, applying command-line overrides.
pub fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<PipelineConfig, ConfigError> {
    let mut config = PipelineConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.paths.out = o;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(stage: Stage, config: &PipelineConfig) -> Result<()> {
    match stage {
        Stage::Generate => commands::generate(config),
        Stage::Correct => commands::correct(config),
        Stage::TrainEval => commands::train_eval(config),
        Stage::Report => commands::report(config),
    }
}

/// Caps the global thread pool from `WATCHLAB_THREADS` when it is set.
pub fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("WATCHLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError::Threads(raw.clone()))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
