//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::claims::{default_frequency_architectures, default_severity_architecture, CountMode};
use crate::hyperopt::Hyperparameters;
use crate::{Error, Result};

/// Every setting of a pipeline run. The seed determines all stochastic
/// behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub n_real: usize,
    pub n_synthetic: usize,
    pub tuning_budget: usize,
    /// Source portfolio CSV; the ground-truth bootstrap is used when absent.
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Run Bayesian tuning before training instead of using the fixed
    /// architectures.
    pub tune: bool,
    pub compare: bool,
    pub frequency_epochs: usize,
    pub severity_epochs: usize,
    pub tune_epochs: usize,
    pub validation_fraction: f64,
    pub u_shape_alpha: f64,
    pub write_neighbors: bool,
    pub count_mode: CountMode,
    pub threshold: f64,
    pub min_amount: f64,
    pub bins: usize,
    pub qq_points: usize,
    pub frequency_features: Vec<String>,
    pub severity_features: Vec<String>,
    pub frequency_archs: [Hyperparameters; 3],
    pub severity_arch: Hyperparameters,
}

impl Default for RunConfig {
    fn default() -> Self {
        let compare = crate::validate::CompareOptions::default();
        Self {
            seed: 42,
            n_real: 20_000,
            n_synthetic: 100_000,
            tuning_budget: 30,
            input: None,
            out_dir: PathBuf::from("out"),
            tune: false,
            compare: true,
            frequency_epochs: 20,
            severity_epochs: 60,
            tune_epochs: 5,
            validation_fraction: 0.2,
            u_shape_alpha: 0.5,
            write_neighbors: true,
            count_mode: CountMode::Threshold,
            threshold: 0.5,
            min_amount: 0.01,
            bins: compare.bins,
            qq_points: compare.qq_points,
            frequency_features: compare.frequency_features,
            severity_features: compare.severity_features,
            frequency_archs: default_frequency_architectures(),
            severity_arch: default_severity_architecture(),
        }
    }
}

const ARCH_PREFIXES: [&str; 4] = ["freq1", "freq2", "freq3", "severity"];
const ARCH_FIELDS: [&str; 6] = [
    "hidden_layers",
    "nodes_first",
    "nodes_rest",
    "activation",
    "batch_size",
    "learning_rate",
];

fn parsed<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidArgument(format!(
            "`{key}` expects true or false, got `{value}`"
        ))),
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::parse(i + 1, format!("expected `key = value`, found `{line}`"))
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply(&parse_kv(text)?)?;
        Ok(c)
    }

    /// Applies every entry of `kv`; unknown keys are errors.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            if let Some((prefix, field)) = k.split_once('.') {
                if ARCH_PREFIXES.contains(&prefix) && ARCH_FIELDS.contains(&field) {
                    continue;
                }
            }
            self.set(k, v)?;
        }
        for (i, prefix) in ARCH_PREFIXES.iter().enumerate() {
            let arch = if i < 3 {
                &mut self.frequency_archs[i]
            } else {
                &mut self.severity_arch
            };
            arch.apply_kv(prefix, kv)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parsed(key, value)?,
            "n_real" => self.n_real = parsed(key, value)?,
            "n_synthetic" => self.n_synthetic = parsed(key, value)?,
            "tuning_budget" => self.tuning_budget = parsed(key, value)?,
            "input" => self.input = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "tune" => self.tune = parse_bool(key, value)?,
            "compare" => self.compare = parse_bool(key, value)?,
            "epochs.frequency" => self.frequency_epochs = parsed(key, value)?,
            "epochs.severity" => self.severity_epochs = parsed(key, value)?,
            "epochs.tune" => self.tune_epochs = parsed(key, value)?,
            "tune.validation_fraction" => self.validation_fraction = parsed(key, value)?,
            "smote.alpha" => self.u_shape_alpha = parsed(key, value)?,
            "smote.write_neighbors" => self.write_neighbors = parse_bool(key, value)?,
            "claims.count_mode" => {
                self.count_mode = CountMode::parse(value).ok_or_else(|| {
                    Error::InvalidArgument(format!("`{key}`: unknown mode `{value}`"))
                })?
            }
            "claims.threshold" => self.threshold = parsed(key, value)?,
            "claims.min_amount" => self.min_amount = parsed(key, value)?,
            "compare.bins" => self.bins = parsed(key, value)?,
            "compare.qq_points" => self.qq_points = parsed(key, value)?,
            "compare.frequency_features" => self.frequency_features = list(value),
            "compare.severity_features" => self.severity_features = list(value),
            _ => {
                if let Some((prefix, field)) = key.split_once('.') {
                    if ARCH_PREFIXES.contains(&prefix) && ARCH_FIELDS.contains(&field) {
                        let mut kv = BTreeMap::new();
                        kv.insert(key.to_string(), value.to_string());
                        return self.apply(&kv);
                    }
                }
                return Err(Error::InvalidArgument(format!(
                    "unknown configuration key `{key}`"
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_synthetic == 0 {
            return bad("n_synthetic must be at least 1");
        }
        if !(self.u_shape_alpha > 0.0 && self.u_shape_alpha < 1.0) {
            return bad("smote.alpha must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.threshold) || self.threshold == 0.0 {
            return bad("claims.threshold must lie in (0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("tune.validation_fraction must lie in (0, 1)");
        }
        if !(self.min_amount > 0.0) {
            return bad("claims.min_amount must be positive");
        }
        if self.bins < 2 || self.qq_points < 2 {
            return bad("compare.bins and compare.qq_points must be at least 2");
        }
        for a in self.frequency_archs.iter().chain([&self.severity_arch]) {
            a.validate()?;
        }
        Ok(())
    }

    /// Every key with its current value, sorted by key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("seed", self.seed.to_string());
        line("n_real", self.n_real.to_string());
        line("n_synthetic", self.n_synthetic.to_string());
        line("tuning_budget", self.tuning_budget.to_string());
        line(
            "input",
            self.input
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        line("out_dir", self.out_dir.display().to_string());
        line("tune", self.tune.to_string());
        line("compare", self.compare.to_string());
        line("epochs.frequency", self.frequency_epochs.to_string());
        line("epochs.severity", self.severity_epochs.to_string());
        line("epochs.tune", self.tune_epochs.to_string());
        line(
            "tune.validation_fraction",
            format!("{:?}", self.validation_fraction),
        );
        line("smote.alpha", format!("{:?}", self.u_shape_alpha));
        line("smote.write_neighbors", self.write_neighbors.to_string());
        line("claims.count_mode", self.count_mode.as_str().to_string());
        line("claims.threshold", format!("{:?}", self.threshold));
        line("claims.min_amount", format!("{:?}", self.min_amount));
        line("compare.bins", self.bins.to_string());
        line("compare.qq_points", self.qq_points.to_string());
        line(
            "compare.frequency_features",
            self.frequency_features.join(","),
        );
        line(
            "compare.severity_features",
            self.severity_features.join(","),
        );
        for (i, a) in self.frequency_archs.iter().enumerate() {
            out.push_str(&a.to_kv(ARCH_PREFIXES[i]));
        }
        out.push_str(&self.severity_arch.to_kv("severity"));
        out
    }

    pub fn compare_options(&self) -> crate::validate::CompareOptions {
        crate::validate::CompareOptions {
            frequency_features: self.frequency_features.clone(),
            severity_features: self.severity_features.clone(),
            bins: self.bins,
            qq_points: self.qq_points,
        }
    }
}
