//! Training paradigms.
//!
//! - `si1`: one model trained on every healthy-cohort trial, tested on each
//!   PD subject separately.
//! - `si2`: leave-one-subject-out over the PD cohort.
//! - `sd`: within each PD subject, leave-one-trial-out; trial folds are
//!   summed per subject before scoring.
//!
//! The normalizer (and, for LDA, the features it feeds) is fit on the
//! training trials of each fold only.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::confusion::{f1_breakdown, ConfusionError, ConfusionMatrix, F1Breakdown, ROWS};
use crate::corpus::{
    self, Cohort, CorpusError, Dataset, LabeledWindow, Normalizer, SignalSource, TaskCategory,
    Trial,
};
use crate::features::{extract_features, FeatureError, FeatureVector};
use crate::lda::{LdaError, LdaModel, DEFAULT_SHRINKAGE};
use crate::lstm::{self, LstmError, LstmModel, TrainConfig, HIDDEN_UNITS, OUTPUT_DIM};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("paradigm {paradigm} needs at least {needed} {cohort} subjects, found {found}")]
    CohortTooSmall {
        paradigm: Paradigm,
        cohort: Cohort,
        needed: usize,
        found: usize,
    },
    #[error("subject {subject} has {found} trials; leave-one-trial-out needs at least 2")]
    TrialCountTooSmall { subject: String, found: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error(transparent)]
    Confusion(#[from] ConfusionError),
}

macro_rules! name_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$(Self::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s { $($text => Ok(Self::$variant),)+ _ => Err(s.to_string()) }
            }
        }
    };
}

name_enum!(Paradigm { Si1 => "si1", Si2 => "si2", Sd => "sd" });
name_enum!(Classifier { Lda => "lda", Lstm => "lstm" });

/// Hyperparameters shared by every fold of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub master_seed: u64,
    pub shrinkage: f64,
    pub hidden_dim: usize,
    /// `shuffle_seed` is replaced per fold by a seed derived from
    /// `master_seed`.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            shrinkage: DEFAULT_SHRINKAGE,
            hidden_dim: HIDDEN_UNITS,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum TrainedModel {
    Lda(LdaModel),
    Lstm {
        model: LstmModel,
        loss_history: Vec<f64>,
    },
}

impl TrainedModel {
    pub fn to_text(&self) -> String {
        match self {
            Self::Lda(m) => m.to_text(),
            Self::Lstm { model, .. } => model.to_text(),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            Self::Lda(_) => "lda",
            Self::Lstm { .. } => "lstm",
        }
    }
}

/// One train/test split.
#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold_id: String,
    /// Subject whose windows were tested.
    pub group_id: String,
    /// Key into [`ParadigmReport::models`].
    pub model_id: String,
    pub test_trials: Vec<String>,
    pub train_trials: Vec<String>,
    pub train_subjects: Vec<String>,
    pub train_windows: usize,
    pub train_pd_windows: usize,
    /// Scored test windows; platform walking is excluded.
    pub test_windows: usize,
    pub confusion: ConfusionMatrix,
}

/// Per-subject scores.
#[derive(Clone, Debug)]
pub struct GroupResult {
    pub group_id: String,
    pub confusion: ConfusionMatrix,
    pub f1: F1Breakdown,
}

#[derive(Clone, Debug)]
pub struct ParadigmReport {
    pub paradigm: Paradigm,
    pub classifier: Classifier,
    pub source: SignalSource,
    pub config: RunConfig,
    pub folds: Vec<FoldResult>,
    pub groups: Vec<GroupResult>,
    pub models: Vec<(String, TrainedModel)>,
    pub pooled: ConfusionMatrix,
}

impl ParadigmReport {
    /// Mean and sample standard deviation of each category's F1 across
    /// subjects.
    pub fn f1_summary(&self) -> ([f64; ROWS], [f64; ROWS]) {
        let per_group: Vec<[f64; ROWS]> = self.groups.iter().map(|g| g.f1.f1).collect();
        mean_std(&per_group)
    }

    /// Mean over categories of the cross-subject mean F1.
    pub fn macro_f1(&self) -> f64 {
        let (mean, _) = self.f1_summary();
        mean.iter().sum::<f64>() / ROWS as f64
    }

    /// F1 computed once from the pooled confusion matrix.
    pub fn pooled_f1(&self) -> F1Breakdown {
        f1_breakdown(&self.pooled)
    }
}

/// Column-wise mean and sample (n − 1) standard deviation; one row gives std 0.
pub fn mean_std(rows: &[[f64; ROWS]]) -> ([f64; ROWS], [f64; ROWS]) {
    let n = rows.len();
    let mut mean = [0.0; ROWS];
    let mut std = [0.0; ROWS];
    if n == 0 {
        return (mean, std);
    }
    for c in 0..ROWS {
        mean[c] = rows.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        if n > 1 {
            let ss: f64 = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum();
            std[c] = (ss / (n - 1) as f64).sqrt();
        }
    }
    (mean, std)
}

struct Split<'a> {
    fold_id: String,
    group_id: String,
    test: Vec<&'a Trial>,
}

pub fn run_paradigm(
    dataset: &Dataset,
    paradigm: Paradigm,
    classifier: Classifier,
    source: SignalSource,
    config: &RunConfig,
) -> Result<ParadigmReport, EvalError> {
    let healthy = dataset.subjects(Cohort::Healthy);
    let pd = dataset.subjects(Cohort::Pd);
    let too_small = |cohort, needed, found| EvalError::CohortTooSmall {
        paradigm,
        cohort,
        needed,
        found,
    };
    let mut ctx = FoldRunner {
        paradigm,
        classifier,
        source,
        config,
        folds: Vec::new(),
        models: Vec::new(),
    };

    match paradigm {
        Paradigm::Si1 | Paradigm::Si2 => {
            if healthy.is_empty() && paradigm == Paradigm::Si1 {
                return Err(too_small(Cohort::Healthy, 1, 0));
            }
            if pd.len() < 2 {
                return Err(too_small(Cohort::Pd, 2, pd.len()));
            }
        }
        Paradigm::Sd => {
            if pd.is_empty() {
                return Err(too_small(Cohort::Pd, 1, 0));
            }
            for s in &pd {
                let n = dataset.subject_trials(s).len();
                if n < 2 {
                    return Err(EvalError::TrialCountTooSmall {
                        subject: s.clone(),
                        found: n,
                    });
                }
            }
        }
    }

    match paradigm {
        Paradigm::Si1 => {
            let train: Vec<&Trial> = healthy
                .iter()
                .flat_map(|s| dataset.subject_trials(s))
                .collect();
            let splits = pd
                .iter()
                .map(|s| Split {
                    fold_id: s.clone(),
                    group_id: s.clone(),
                    test: dataset.subject_trials(s),
                })
                .collect();
            ctx.run("healthy", &train, splits)?;
        }
        Paradigm::Si2 => {
            for s in &pd {
                let train: Vec<&Trial> = pd
                    .iter()
                    .filter(|o| *o != s)
                    .flat_map(|o| dataset.subject_trials(o))
                    .collect();
                let split = Split {
                    fold_id: s.clone(),
                    group_id: s.clone(),
                    test: dataset.subject_trials(s),
                };
                ctx.run(s, &train, vec![split])?;
            }
        }
        Paradigm::Sd => {
            for s in &pd {
                let trials = dataset.subject_trials(s);
                for held in &trials {
                    let train: Vec<&Trial> = trials
                        .iter()
                        .filter(|t| t.meta.trial_id != held.meta.trial_id)
                        .copied()
                        .collect();
                    let split = Split {
                        fold_id: held.meta.trial_id.clone(),
                        group_id: s.clone(),
                        test: vec![*held],
                    };
                    ctx.run(&held.meta.trial_id, &train, vec![split])?;
                }
            }
        }
    }

    let FoldRunner { folds, models, .. } = ctx;
    let mut groups: Vec<GroupResult> = Vec::new();
    let mut pooled = ConfusionMatrix::default();
    for f in &folds {
        pooled += f.confusion;
        match groups.iter_mut().find(|g| g.group_id == f.group_id) {
            Some(g) => g.confusion += f.confusion,
            None => groups.push(GroupResult {
                group_id: f.group_id.clone(),
                confusion: f.confusion,
                f1: F1Breakdown::default(),
            }),
        }
    }
    for g in &mut groups {
        g.f1 = f1_breakdown(&g.confusion);
    }
    Ok(ParadigmReport {
        paradigm,
        classifier,
        source,
        config: config.clone(),
        folds,
        groups,
        models,
        pooled,
    })
}

struct FoldRunner<'c> {
    paradigm: Paradigm,
    classifier: Classifier,
    source: SignalSource,
    config: &'c RunConfig,
    folds: Vec<FoldResult>,
    models: Vec<(String, TrainedModel)>,
}

impl FoldRunner<'_> {
    fn scope(&self, model_id: &str, what: &str) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.paradigm, self.classifier, self.source, model_id, what
        )
    }

    /// Train one model on `train` and score it on each split.
    fn run(&mut self, model_id: &str, train: &[&Trial], splits: Vec<Split<'_>>) -> Result<(), EvalError> {
        let matrices: Vec<Matrix> = train
            .iter()
            .map(|t| corpus::select_source(t, self.source))
            .collect();
        let norm = Normalizer::fit(&matrices)?;
        let mut train_windows = Vec::new();
        for t in train {
            train_windows.extend(corpus::trial_windows(t, self.source, Some(&norm))?);
        }
        let train_pd_windows = train
            .iter()
            .filter(|t| t.meta.cohort == Cohort::Pd)
            .map(|t| corpus::window_count(t.frames()))
            .sum();
        let mut train_trials: Vec<String> = train.iter().map(|t| t.meta.trial_id.clone()).collect();
        train_trials.sort();
        let mut train_subjects: Vec<String> =
            train.iter().map(|t| t.meta.subject_id.clone()).collect();
        train_subjects.sort();
        train_subjects.dedup();

        let predictor = self.fit(model_id, &train_windows)?;

        for split in splits {
            let mut test_windows: Vec<LabeledWindow> = Vec::new();
            for t in &split.test {
                test_windows.extend(
                    corpus::trial_windows(t, self.source, Some(&norm))?
                        .into_iter()
                        .filter(|w| w.truth.row().is_some()),
                );
            }
            let preds = predictor.predict(&test_windows)?;
            let mut confusion = ConfusionMatrix::default();
            for (w, p) in test_windows.iter().zip(preds) {
                confusion.record(w.truth, p)?;
            }
            self.folds.push(FoldResult {
                fold_id: split.fold_id,
                group_id: split.group_id,
                model_id: model_id.to_string(),
                test_trials: split.test.iter().map(|t| t.meta.trial_id.clone()).collect(),
                train_trials: train_trials.clone(),
                train_subjects: train_subjects.clone(),
                train_windows: train_windows.len(),
                train_pd_windows,
                test_windows: test_windows.len(),
                confusion,
            });
        }
        self.models.push((model_id.to_string(), predictor.into_trained()));
        Ok(())
    }

    fn fit(&self, model_id: &str, windows: &[LabeledWindow]) -> Result<Predictor, EvalError> {
        let labels: Vec<TaskCategory> = windows.iter().map(|w| w.train_label).collect();
        match self.classifier {
            Classifier::Lda => {
                let features = windows
                    .iter()
                    .map(extract_features)
                    .collect::<Result<Vec<FeatureVector>, _>>()?;
                let model = LdaModel::fit(&features, &labels, self.config.shrinkage)?;
                Ok(Predictor::Lda(model))
            }
            Classifier::Lstm => {
                let input = self.source.channel_count();
                let mut model = LstmModel::init(
                    input,
                    self.config.hidden_dim,
                    OUTPUT_DIM,
                    seed::derive(self.config.master_seed, &self.scope(model_id, "init")),
                );
                let mut train_cfg = self.config.train.clone();
                train_cfg.shuffle_seed =
                    seed::derive(self.config.master_seed, &self.scope(model_id, "shuffle"));
                let samples: Vec<(&Matrix, TaskCategory)> =
                    windows.iter().map(|w| (&w.data, w.train_label)).collect();
                let history = lstm::train(&mut model, &samples, &train_cfg)?;
                Ok(Predictor::Lstm(model, history.epoch_loss))
            }
        }
    }
}

enum Predictor {
    Lda(LdaModel),
    Lstm(LstmModel, Vec<f64>),
}

impl Predictor {
    fn predict(&self, windows: &[LabeledWindow]) -> Result<Vec<TaskCategory>, EvalError> {
        match self {
            Self::Lda(m) => windows
                .iter()
                .map(|w| {
                    let f = extract_features(w)?;
                    Ok(m.predict(f.as_slice())?)
                })
                .collect(),
            Self::Lstm(m, _) => Ok(m.predict_many(windows.iter().map(|w| &w.data))?),
        }
    }

    fn into_trained(self) -> TrainedModel {
        match self {
            Self::Lda(m) => TrainedModel::Lda(m),
            Self::Lstm(model, loss_history) => TrainedModel::Lstm {
                model,
                loss_history,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_convention() {
        let rows = [[0.4; ROWS], [0.6; ROWS]];
        let (m, s) = mean_std(&rows);
        assert!((m[0] - 0.5).abs() < 1e-15);
        assert!((s[0] - 0.02f64.sqrt()).abs() < 1e-15);
        let (m1, s1) = mean_std(&rows[..1]);
        assert_eq!(m1[3], 0.4);
        assert_eq!(s1[3], 0.0);
    }

    #[test]
    fn names_parse() {
        for p in Paradigm::ALL {
            assert_eq!(p.as_str().parse::<Paradigm>().unwrap(), *p);
        }
        assert!("lstm".parse::<Classifier>().is_ok());
        assert!("svm".parse::<Classifier>().is_err());
    }
}
