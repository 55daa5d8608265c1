//! Flat `key = value` settings files merged under command-line flags.

use std::fs;
use std::path::Path;

use vid_core::distill::ExperimentConfig;

use crate::args::ModelFlags;
use crate::error::CliError;

pub const DEFAULT_VALID_FRACTION: f64 = 0.2;

/// Resolved settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub experiment: ExperimentConfig,
    pub valid_fraction: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            valid_fraction: DEFAULT_VALID_FRACTION,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str, origin: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{origin}: invalid value {value:?} for {key}")))
}

impl Settings {
    /// Applies one setting; `origin` names where it came from in errors.
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
        let e = &mut self.experiment;
        match key {
            "temperature" => e.temperature = parse(key, value, origin)?,
            "lambda" => e.lambda = parse(key, value, origin)?,
            "teacher_epochs" => e.teacher_epochs = parse(key, value, origin)?,
            "distill_epochs" => e.distill_epochs = parse(key, value, origin)?,
            "finetune_epochs" => e.finetune_epochs = parse(key, value, origin)?,
            "batch_size" => e.batch_size = parse(key, value, origin)?,
            "dropout" => e.dropout = parse(key, value, origin)?,
            "seed" => e.seed = parse(key, value, origin)?,
            "lr" => e.optimizer.lr = parse(key, value, origin)?,
            "beta1" => e.optimizer.beta1 = parse(key, value, origin)?,
            "beta2" => e.optimizer.beta2 = parse(key, value, origin)?,
            "eps" => e.optimizer.eps = parse(key, value, origin)?,
            "d_model" => e.encoder.d_model = parse(key, value, origin)?,
            "heads" => e.encoder.heads = parse(key, value, origin)?,
            "layers" => e.encoder.layers = parse(key, value, origin)?,
            "ff_dim" => e.encoder.ff_dim = parse(key, value, origin)?,
            "max_len" => e.encoder.max_len = parse(key, value, origin)?,
            "finetune_full_model" => e.finetune_full_model = parse(key, value, origin)?,
            "check_invariants" => e.check_invariants = parse(key, value, origin)?,
            "valid_fraction" => self.valid_fraction = parse(key, value, origin)?,
            _ => return Err(CliError::Usage(format!("{origin}: unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, name: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{name}:{}", i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}: expected key = value")))?;
            self.set(key.trim(), value.trim(), &origin)?;
        }
        Ok(())
    }

    /// Defaults, then the settings file, then explicit flags.
    pub fn resolve(flags: &ModelFlags, valid_fraction: Option<f64>) -> Result<Self, CliError> {
        let mut s = Settings::default();
        if let Some(path) = &flags.config {
            let text = read_config(path)?;
            s.apply_text(&text, &path.display().to_string())?;
        }
        let e = &mut s.experiment;
        if let Some(v) = flags.temperature {
            e.temperature = v;
        }
        if let Some(v) = flags.lambda {
            e.lambda = v;
        }
        if let Some(v) = flags.teacher_epochs {
            e.teacher_epochs = v;
        }
        if let Some(v) = flags.distill_epochs {
            e.distill_epochs = v;
        }
        if let Some(v) = flags.finetune_epochs {
            e.finetune_epochs = v;
        }
        if let Some(v) = flags.batch_size {
            e.batch_size = v;
        }
        if let Some(v) = flags.lr {
            e.optimizer.lr = v;
        }
        if let Some(v) = flags.dropout {
            e.dropout = v;
        }
        if let Some(v) = flags.seed {
            e.seed = v;
        }
        if flags.check_invariants {
            e.check_invariants = true;
        }
        if let Some(v) = valid_fraction {
            s.valid_fraction = v;
        }
        s.experiment
            .validate()
            .map_err(|err| CliError::Usage(err.to_string()))?;
        if !(0.0..1.0).contains(&s.valid_fraction) {
            return Err(CliError::Usage(format!(
                "valid_fraction must lie in [0, 1), got {}",
                s.valid_fraction
            )));
        }
        Ok(s)
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))
}
