//! Experiment configuration: a flat `key = value` file with `#` comments.
//!
//! ```text
//! dataset_dir = data/manifest.csv
//! output_dir = results
//! master_seed = 7
//! paradigms = si1, sd
//! epochs = 20
//! ```
//!
//! Unknown keys are rejected. List keys default to every value.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::SignalSource;
use crate::eval::{Classifier, Paradigm, RunConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("missing required key {0:?}")]
    MissingRequired(&'static str),
    #[error("bad value {value:?} for {key}: {reason}")]
    TypeError {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("key {0:?} given twice")]
    Duplicate(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Dataset directory holding `manifest.csv`, or the manifest itself.
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub paradigms: Vec<Paradigm>,
    pub classifiers: Vec<Classifier>,
    pub sources: Vec<SignalSource>,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn master_seed(&self) -> u64 {
        self.run.master_seed
    }

    pub fn manifest_path(&self) -> PathBuf {
        if self.dataset_dir.is_dir() {
            self.dataset_dir.join("manifest.csv")
        } else {
            self.dataset_dir.clone()
        }
    }
}

const KEYS: &[&str] = &[
    "dataset_dir",
    "output_dir",
    "master_seed",
    "paradigms",
    "classifiers",
    "sources",
    "epochs",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "epsilon",
    "grad_clip_norm",
    "hidden_dim",
    "shrinkage",
];

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut cfg = parse_config_str(&text)?;
    for p in [&mut cfg.dataset_dir, &mut cfg.output_dir] {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Parse config text. Relative paths are returned as written.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if entries.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::Duplicate(key.to_string()));
        }
        entries.push((key.to_string(), value.to_string()));
    }
    let get = |key: &str| entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let required = |key: &'static str| get(key).ok_or(ConfigError::MissingRequired(key));

    let mut run = RunConfig {
        master_seed: parse_value("master_seed", required("master_seed")?)?,
        ..RunConfig::default()
    };
    if let Some(v) = get("hidden_dim") {
        run.hidden_dim = positive("hidden_dim", v)?;
    }
    if let Some(v) = get("shrinkage") {
        run.shrinkage = parse_value("shrinkage", v)?;
    }
    let t = &mut run.train;
    if let Some(v) = get("epochs") {
        t.epochs = positive("epochs", v)?;
    }
    if let Some(v) = get("batch_size") {
        t.batch_size = positive("batch_size", v)?;
    }
    for (key, slot) in [
        ("lr", &mut t.lr),
        ("beta1", &mut t.beta1),
        ("beta2", &mut t.beta2),
        ("epsilon", &mut t.epsilon),
        ("grad_clip_norm", &mut t.grad_clip_norm),
    ] {
        if let Some(v) = get(key) {
            *slot = parse_value(key, v)?;
        }
    }
    run.train
        .validate()
        .map_err(|e| type_error("training", "", &e.to_string()))?;
    if !(run.shrinkage >= 0.0 && run.shrinkage.is_finite()) {
        return Err(type_error("shrinkage", &run.shrinkage.to_string(), "must be finite and >= 0"));
    }

    Ok(ExperimentConfig {
        dataset_dir: PathBuf::from(required("dataset_dir")?),
        output_dir: PathBuf::from(required("output_dir")?),
        paradigms: parse_list("paradigms", get("paradigms"), Paradigm::ALL)?,
        classifiers: parse_list("classifiers", get("classifiers"), Classifier::ALL)?,
        sources: parse_list("sources", get("sources"), &SignalSource::ALL)?,
        run,
    })
}

fn type_error(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::TypeError {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| type_error(key, value, &format!("expected {}", std::any::type_name::<T>())))
}

fn positive(key: &str, value: &str) -> Result<usize, ConfigError> {
    match parse_value::<usize>(key, value)? {
        0 => Err(type_error(key, value, "must be at least 1")),
        n => Ok(n),
    }
}

/// Comma-separated selection, deduplicated and kept in canonical order.
fn parse_list<T>(key: &str, value: Option<&str>, all: &[T]) -> Result<Vec<T>, ConfigError>
where
    T: FromStr + Copy + PartialEq,
{
    let Some(value) = value else {
        return Ok(all.to_vec());
    };
    let mut picked = Vec::new();
    for item in value.split(',').map(str::trim) {
        let v: T = item
            .parse()
            .map_err(|_| type_error(key, item, "not a recognised name"))?;
        picked.push(v);
    }
    if picked.is_empty() {
        return Err(type_error(key, value, "empty selection"));
    }
    Ok(all.iter().copied().filter(|a| picked.contains(a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "dataset_dir = d\noutput_dir = o\nmaster_seed = 3\n";

    #[test]
    fn minimal_fills_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.paradigms, Paradigm::ALL);
        assert_eq!(c.classifiers, Classifier::ALL);
        assert_eq!(c.sources, SignalSource::ALL);
        assert_eq!(c.run.train.epochs, 70);
        assert_eq!(c.run.train.batch_size, 50);
        assert_eq!(c.run.train.lr, 1e-3);
        assert_eq!(c.run.shrinkage, 1e-6);
        assert_eq!(c.master_seed(), 3);
    }

    #[test]
    fn overrides_and_comments() {
        let text = format!(
            "{MINIMAL}# comment\nsources = forearms, feet  # trailing\nepochs = 4\nlr = 0.01\nclassifiers=lda\n"
        );
        let c = parse_config_str(&text).unwrap();
        assert_eq!(c.sources, [SignalSource::Feet, SignalSource::Forearms]);
        assert_eq!(c.classifiers, [Classifier::Lda]);
        assert_eq!(c.run.train.epochs, 4);
        assert_eq!(c.run.train.lr, 0.01);
    }

    #[test]
    fn unknown_key_is_echoed() {
        let err = parse_config_str(&format!("{MINIMAL}epochz = 3\n")).unwrap_err();
        assert!(matches!(&err, ConfigError::UnknownKey(k) if k == "epochz"));
        assert!(err.to_string().contains("epochz"));
    }

    #[test]
    fn rejects_bad_values() {
        for extra in ["epochs = 0", "epochs = many", "paradigms = si3", "lr = -1", "shrinkage = -0.5"] {
            let err = parse_config_str(&format!("{MINIMAL}{extra}\n")).unwrap_err();
            assert!(matches!(err, ConfigError::TypeError { .. }), "{extra}: {err}");
        }
        assert!(matches!(
            parse_config_str("dataset_dir = d\noutput_dir = o\n"),
            Err(ConfigError::MissingRequired("master_seed"))
        ));
        assert!(matches!(
            parse_config_str(&format!("{MINIMAL}epochs\n")),
            Err(ConfigError::Syntax { line: 4, .. })
        ));
        assert!(matches!(
            parse_config_str(&format!("{MINIMAL}master_seed = 4\n")),
            Err(ConfigError::Duplicate(_))
        ));
    }
}
