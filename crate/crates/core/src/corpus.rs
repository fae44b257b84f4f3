//! Trial data model, CSV ingestion, signal-source selection, z-score
//! normalization and sliding-window segmentation.
//!
//! A trial is one circuit recording: 36 channels at 100 Hz (acceleration in
//! m/s², angular velocity in rad/s for six body segments), a per-frame mode
//! label and an optional LWp/LWf sub-label on level-walking frames.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::matrix::Matrix;

pub const SAMPLE_RATE_HZ: f64 = 100.0;
pub const FRAME_PERIOD_S: f64 = 0.01;
/// 500 ms at 100 Hz.
pub const WINDOW_FRAMES: usize = 50;
/// 250 ms at 100 Hz.
pub const WINDOW_STRIDE: usize = 25;
pub const CHANNEL_COUNT: usize = 36;
/// Smallest stored standard deviation in a [`Normalizer`].
pub const MIN_STD: f64 = 1e-8;

/// Canonical channel order: foot_l, foot_r, forearm_l, forearm_r, trunk,
/// pelvis; within a segment acc xyz then gyr xyz.
pub const CHANNEL_NAMES: [&str; CHANNEL_COUNT] = [
    "foot_l_acc_x", "foot_l_acc_y", "foot_l_acc_z", "foot_l_gyr_x", "foot_l_gyr_y", "foot_l_gyr_z",
    "foot_r_acc_x", "foot_r_acc_y", "foot_r_acc_z", "foot_r_gyr_x", "foot_r_gyr_y", "foot_r_gyr_z",
    "forearm_l_acc_x", "forearm_l_acc_y", "forearm_l_acc_z", "forearm_l_gyr_x", "forearm_l_gyr_y", "forearm_l_gyr_z",
    "forearm_r_acc_x", "forearm_r_acc_y", "forearm_r_acc_z", "forearm_r_gyr_x", "forearm_r_gyr_y", "forearm_r_gyr_z",
    "trunk_acc_x", "trunk_acc_y", "trunk_acc_z", "trunk_gyr_x", "trunk_gyr_y", "trunk_gyr_z",
    "pelvis_acc_x", "pelvis_acc_y", "pelvis_acc_z", "pelvis_gyr_x", "pelvis_gyr_y", "pelvis_gyr_z",
];

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing channel column {0:?}")]
    MissingChannel(String),
    #[error("unexpected column {0:?}")]
    UnknownColumn(String),
    #[error("row {row}: bad label {value:?}")]
    BadLabel { row: usize, value: String },
    #[error("row {row}: timestamps must increase by exactly {FRAME_PERIOD_S} s")]
    NonMonotonicTime { row: usize },
    #[error("row {row}, column {column:?}: non-finite sample")]
    NonFiniteSample { row: usize, column: String },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("{frames} frames is shorter than one {WINDOW_FRAMES}-frame window")]
    TooShort { frames: usize },
    #[error("no input frames")]
    EmptyInput,
    #[error("channel count mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The five modes classifiers train on and predict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskCategory {
    Ra,
    Rd,
    Sa,
    Sd,
    Lw,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 5] = [Self::Ra, Self::Rd, Self::Sa, Self::Sd, Self::Lw];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ra => "RA",
            Self::Rd => "RD",
            Self::Sa => "SA",
            Self::Sd => "SD",
            Self::Lw => "LW",
        }
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskCategory {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Ground-truth sub-label of level walking before (`Lwp`) or after (`Lwf`)
/// the inclines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubLabel {
    Lwp,
    Lwf,
}

impl SubLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lwp => "LWp",
            Self::Lwf => "LWf",
        }
    }

    fn parse(s: &str) -> Option<Option<Self>> {
        match s {
            "" => Some(None),
            "LWp" => Some(Some(Self::Lwp)),
            "LWf" => Some(Some(Self::Lwf)),
            _ => None,
        }
    }
}

/// Ground truth as reported: the four incline modes, the two walkway
/// sub-labels, and plain `Lw` for platform walking, which is trained on but
/// not scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReportCategory {
    Ra,
    Rd,
    Sa,
    Sd,
    Lw,
    Lwp,
    Lwf,
}

impl ReportCategory {
    /// Rows of a confusion matrix, in order.
    pub const SCORED: [ReportCategory; 6] =
        [Self::Ra, Self::Rd, Self::Sa, Self::Sd, Self::Lwp, Self::Lwf];

    pub fn from_labels(label: TaskCategory, sublabel: Option<SubLabel>) -> Self {
        match (label, sublabel) {
            (TaskCategory::Ra, _) => Self::Ra,
            (TaskCategory::Rd, _) => Self::Rd,
            (TaskCategory::Sa, _) => Self::Sa,
            (TaskCategory::Sd, _) => Self::Sd,
            (TaskCategory::Lw, None) => Self::Lw,
            (TaskCategory::Lw, Some(SubLabel::Lwp)) => Self::Lwp,
            (TaskCategory::Lw, Some(SubLabel::Lwf)) => Self::Lwf,
        }
    }

    /// Collapse to the trainable vocabulary.
    pub fn task(self) -> TaskCategory {
        match self {
            Self::Ra => TaskCategory::Ra,
            Self::Rd => TaskCategory::Rd,
            Self::Sa => TaskCategory::Sa,
            Self::Sd => TaskCategory::Sd,
            Self::Lw | Self::Lwp | Self::Lwf => TaskCategory::Lw,
        }
    }

    /// Confusion-matrix row, `None` for unscored platform walking.
    pub fn row(self) -> Option<usize> {
        Self::SCORED.iter().position(|&c| c == self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ra => "RA",
            Self::Rd => "RD",
            Self::Sa => "SA",
            Self::Sd => "SD",
            Self::Lw => "LW",
            Self::Lwp => "LWp",
            Self::Lwf => "LWf",
        }
    }
}

impl fmt::Display for ReportCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportCategory {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Self::Ra,
            Self::Rd,
            Self::Sa,
            Self::Sd,
            Self::Lw,
            Self::Lwp,
            Self::Lwf,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignalSource {
    Feet,
    TrunkPelvis,
    Forearms,
    Fusion,
}

impl SignalSource {
    pub const ALL: [SignalSource; 4] = [Self::Feet, Self::TrunkPelvis, Self::Forearms, Self::Fusion];

    /// Canonical channel indices for this source.
    pub fn channels(self) -> Vec<usize> {
        match self {
            Self::Feet => (0..12).collect(),
            Self::Forearms => (12..24).collect(),
            Self::TrunkPelvis => (24..36).collect(),
            Self::Fusion => (0..CHANNEL_COUNT).collect(),
        }
    }

    pub fn channel_count(self) -> usize {
        match self {
            Self::Fusion => CHANNEL_COUNT,
            _ => 12,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Feet => "feet",
            Self::TrunkPelvis => "trunk_pelvis",
            Self::Forearms => "forearms",
            Self::Fusion => "fusion",
        }
    }
}

impl fmt::Display for SignalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
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
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s { $($text => Ok(Self::$variant),)+ _ => Err(s.to_string()) }
            }
        }
    };
}

text_enum!(Cohort { Healthy => "healthy", Pd => "pd" });
text_enum!(Leg { Left => "left", Right => "right" });
text_enum!(CircuitOrder { SaFirst => "sa_first", RaFirst => "ra_first" });

/// Per-trial metadata carried by the manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialMeta {
    pub subject_id: String,
    pub cohort: Cohort,
    pub trial_id: String,
    pub leading_leg: Leg,
    pub circuit_order: CircuitOrder,
    pub handrail: bool,
}

impl TrialMeta {
    /// Placeholder metadata for a trial file read without a manifest.
    pub fn anonymous(trial_id: &str) -> Self {
        Self {
            subject_id: String::new(),
            cohort: Cohort::Healthy,
            trial_id: trial_id.to_string(),
            leading_leg: Leg::Left,
            circuit_order: CircuitOrder::SaFirst,
            handrail: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub meta: TrialMeta,
    signal: Matrix,
    labels: Vec<TaskCategory>,
    sublabels: Vec<Option<SubLabel>>,
}

impl Trial {
    /// Validates every trial invariant except time stamps, which are implicit.
    pub fn new(
        meta: TrialMeta,
        signal: Matrix,
        labels: Vec<TaskCategory>,
        sublabels: Vec<Option<SubLabel>>,
    ) -> Result<Self> {
        if signal.cols() != CHANNEL_COUNT {
            return Err(CorpusError::ChannelMismatch {
                expected: CHANNEL_COUNT,
                found: signal.cols(),
            });
        }
        if labels.len() != signal.rows() || sublabels.len() != signal.rows() {
            return Err(CorpusError::Malformed {
                row: labels.len().min(sublabels.len()),
                message: format!(
                    "{} frames but {} labels and {} sublabels",
                    signal.rows(),
                    labels.len(),
                    sublabels.len()
                ),
            });
        }
        for (row, (l, s)) in labels.iter().zip(&sublabels).enumerate() {
            if s.is_some() && *l != TaskCategory::Lw {
                return Err(CorpusError::BadLabel {
                    row,
                    value: format!("{}+{}", l, s.map_or("", SubLabel::as_str)),
                });
            }
        }
        for r in 0..signal.rows() {
            if let Some(c) = signal.row(r).iter().position(|v| !v.is_finite()) {
                return Err(CorpusError::NonFiniteSample {
                    row: r,
                    column: CHANNEL_NAMES[c].to_string(),
                });
            }
        }
        Ok(Self {
            meta,
            signal,
            labels,
            sublabels,
        })
    }

    pub fn frames(&self) -> usize {
        self.signal.rows()
    }

    pub fn signal(&self) -> &Matrix {
        &self.signal
    }

    pub fn labels(&self) -> &[TaskCategory] {
        &self.labels
    }

    pub fn sublabels(&self) -> &[Option<SubLabel>] {
        &self.sublabels
    }

    pub fn truth(&self, frame: usize) -> ReportCategory {
        ReportCategory::from_labels(self.labels[frame], self.sublabels[frame])
    }
}

/// Read a trial CSV. Metadata comes from the manifest, so the returned trial
/// carries [`TrialMeta::anonymous`] keyed by the file stem.
pub fn load_trial(path: &Path) -> Result<Trial> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    load_trial_with_meta(path, TrialMeta::anonymous(&stem))
}

pub fn load_trial_with_meta(path: &Path, meta: TrialMeta) -> Result<Trial> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_trial(BufReader::new(file), meta).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parse the trial CSV format from any reader. Row numbers in errors count
/// data rows from 0.
pub fn read_trial<R: BufRead>(reader: R, meta: TrialMeta) -> Result<Trial> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(io_err(Path::new("")))?,
        None => return Err(CorpusError::EmptyInput),
    };
    let columns: Vec<&str> = header.trim_end_matches('\r').split(',').collect();

    let position = |name: &str| columns.iter().position(|c| *c == name);
    let t_col = position("t").ok_or_else(|| CorpusError::MissingChannel("t".into()))?;
    let label_col = position("label").ok_or_else(|| CorpusError::MissingChannel("label".into()))?;
    let sub_col =
        position("sublabel").ok_or_else(|| CorpusError::MissingChannel("sublabel".into()))?;
    let mut channel_cols = [0usize; CHANNEL_COUNT];
    for (slot, name) in channel_cols.iter_mut().zip(CHANNEL_NAMES) {
        *slot = position(name).ok_or_else(|| CorpusError::MissingChannel(name.to_string()))?;
    }
    if let Some(extra) = columns
        .iter()
        .find(|c| !matches!(**c, "t" | "label" | "sublabel") && !CHANNEL_NAMES.contains(c))
    {
        return Err(CorpusError::UnknownColumn(extra.to_string()));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut sublabels = Vec::new();
    let mut prev_t: Option<f64> = None;
    for (row, line) in lines.enumerate() {
        let line = line.map_err(io_err(Path::new("")))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CorpusError::Malformed {
                row,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let parse = |col: usize| -> Result<f64> {
            let v: f64 = fields[col].parse().map_err(|_| CorpusError::Malformed {
                row,
                message: format!("column {:?}: not a number: {:?}", columns[col], fields[col]),
            })?;
            if !v.is_finite() {
                return Err(CorpusError::NonFiniteSample {
                    row,
                    column: columns[col].to_string(),
                });
            }
            Ok(v)
        };
        let t = parse(t_col)?;
        if let Some(p) = prev_t {
            if (t - p - FRAME_PERIOD_S).abs() > 1e-6 {
                return Err(CorpusError::NonMonotonicTime { row });
            }
        }
        prev_t = Some(t);
        for &c in &channel_cols {
            data.push(parse(c)?);
        }
        let label: TaskCategory =
            fields[label_col]
                .parse()
                .map_err(|value| CorpusError::BadLabel { row, value })?;
        let sub = SubLabel::parse(fields[sub_col]).ok_or_else(|| CorpusError::BadLabel {
            row,
            value: fields[sub_col].to_string(),
        })?;
        if sub.is_some() && label != TaskCategory::Lw {
            return Err(CorpusError::BadLabel {
                row,
                value: format!("{}+{}", fields[label_col], fields[sub_col]),
            });
        }
        labels.push(label);
        sublabels.push(sub);
    }
    let frames = labels.len();
    Trial::new(meta, Matrix::from_vec(frames, CHANNEL_COUNT, data), labels, sublabels)
}

/// Write a trial in canonical column order with `t` starting at 0. Samples use
/// the shortest decimal representation that parses back to the same `f64`.
pub fn write_trial<W: Write>(trial: &Trial, mut out: W) -> std::io::Result<()> {
    write!(out, "t")?;
    for name in CHANNEL_NAMES {
        write!(out, ",{name}")?;
    }
    writeln!(out, ",label,sublabel")?;
    for r in 0..trial.frames() {
        write!(out, "{:.2}", r as f64 * FRAME_PERIOD_S)?;
        for v in trial.signal.row(r) {
            write!(out, ",{v}")?;
        }
        writeln!(
            out,
            ",{},{}",
            trial.labels[r],
            trial.sublabels[r].map_or("", SubLabel::as_str)
        )?;
    }
    Ok(())
}

pub fn save_trial(trial: &Trial, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_trial(trial, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Columns of `trial` belonging to `source`, in canonical order.
pub fn select_source(trial: &Trial, source: SignalSource) -> Matrix {
    if source == SignalSource::Fusion {
        return trial.signal.clone();
    }
    trial.signal.select_columns(&source.channels())
}

/// Per-channel z-score statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Normalizer {
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), std.len());
        let std = std.into_iter().map(|s| s.max(MIN_STD)).collect();
        Self { mean, std }
    }

    pub fn channel_count(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Fit mean and population standard deviation over the concatenated
    /// frames of all matrices.
    pub fn fit<'a, I>(matrices: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Matrix>,
    {
        let matrices: Vec<&Matrix> = matrices.into_iter().collect();
        let channels = match matrices.first() {
            Some(m) => m.cols(),
            None => return Err(CorpusError::EmptyInput),
        };
        if let Some(m) = matrices.iter().find(|m| m.cols() != channels) {
            return Err(CorpusError::ChannelMismatch {
                expected: channels,
                found: m.cols(),
            });
        }
        let n: usize = matrices.iter().map(|m| m.rows()).sum();
        if n < 2 {
            return Err(CorpusError::EmptyInput);
        }
        let mut sum = vec![0.0; channels];
        for m in &matrices {
            for r in 0..m.rows() {
                for (s, v) in sum.iter_mut().zip(m.row(r)) {
                    *s += v;
                }
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; channels];
        for m in &matrices {
            for r in 0..m.rows() {
                for ((s, v), mu) in sq.iter_mut().zip(m.row(r)).zip(&mean) {
                    let d = v - mu;
                    *s += d * d;
                }
            }
        }
        let std = sq.iter().map(|s| (s / n as f64).sqrt()).collect();
        Ok(Self::from_parts(mean, std))
    }

    pub fn apply(&self, matrix: &Matrix) -> Result<Matrix> {
        if matrix.cols() != self.mean.len() {
            return Err(CorpusError::ChannelMismatch {
                expected: self.mean.len(),
                found: matrix.cols(),
            });
        }
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, matrix: &Matrix) -> Result<Matrix> {
        if matrix.cols() != self.mean.len() {
            return Err(CorpusError::ChannelMismatch {
                expected: self.mean.len(),
                found: matrix.cols(),
            });
        }
        let mut out = matrix.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * sd + mu;
            }
        }
        Ok(out)
    }
}

/// A 50-frame slice with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledWindow {
    pub data: Matrix,
    pub truth: ReportCategory,
    pub train_label: TaskCategory,
    pub trial_id: String,
    pub subject_id: String,
    pub start_frame: usize,
}

pub fn window_count(frames: usize) -> usize {
    if frames < WINDOW_FRAMES {
        0
    } else {
        (frames - WINDOW_FRAMES) / WINDOW_STRIDE + 1
    }
}

/// Cut `matrix` into 50-frame windows at a 25-frame stride. Each window takes
/// the ground truth of its last frame.
pub fn segment_windows(
    matrix: &Matrix,
    labels: &[TaskCategory],
    sublabels: &[Option<SubLabel>],
    trial_id: &str,
    subject_id: &str,
) -> Result<Vec<LabeledWindow>> {
    let n = matrix.rows();
    if labels.len() != n || sublabels.len() != n {
        return Err(CorpusError::Malformed {
            row: labels.len().min(sublabels.len()),
            message: format!("{n} frames but {} labels", labels.len()),
        });
    }
    if n < WINDOW_FRAMES {
        return Err(CorpusError::TooShort { frames: n });
    }
    Ok((0..window_count(n))
        .map(|k| {
            let start = k * WINDOW_STRIDE;
            let last = start + WINDOW_FRAMES - 1;
            let truth = ReportCategory::from_labels(labels[last], sublabels[last]);
            LabeledWindow {
                data: matrix.slice_rows(start, start + WINDOW_FRAMES),
                truth,
                train_label: truth.task(),
                trial_id: trial_id.to_string(),
                subject_id: subject_id.to_string(),
                start_frame: start,
            }
        })
        .collect())
}

/// Windows of a trial after source selection and (optional) normalization.
pub fn trial_windows(
    trial: &Trial,
    source: SignalSource,
    normalizer: Option<&Normalizer>,
) -> Result<Vec<LabeledWindow>> {
    let mut m = select_source(trial, source);
    if let Some(norm) = normalizer {
        m = norm.apply(&m)?;
    }
    segment_windows(
        &m,
        trial.labels(),
        trial.sublabels(),
        &trial.meta.trial_id,
        &trial.meta.subject_id,
    )
}

/// A set of trials plus the manifest that describes them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub trials: Vec<Trial>,
}

pub const MANIFEST_HEADER: &str = "subject_id,cohort,trial_id,path,leading_leg,circuit_order,handrail";

impl Dataset {
    pub fn new(trials: Vec<Trial>) -> Self {
        Self { trials }
    }

    /// Load `manifest.csv` and every trial it lists; relative paths resolve
    /// against the manifest's directory.
    pub fn load(manifest: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest).map_err(io_err(manifest))?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut trials = Vec::new();
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().trim_end_matches('\r');
        if header != MANIFEST_HEADER {
            return Err(CorpusError::Manifest {
                row: 0,
                message: format!("expected header {MANIFEST_HEADER:?}"),
            });
        }
        for (row, line) in lines.enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(CorpusError::Manifest {
                    row,
                    message: format!("expected 7 fields, found {}", f.len()),
                });
            }
            let bad = |what: &str, v: &str| CorpusError::Manifest {
                row,
                message: format!("bad {what} {v:?}"),
            };
            let meta = TrialMeta {
                subject_id: f[0].to_string(),
                cohort: f[1].parse().map_err(|v: String| bad("cohort", &v))?,
                trial_id: f[2].to_string(),
                leading_leg: f[4].parse().map_err(|v: String| bad("leading_leg", &v))?,
                circuit_order: f[5].parse().map_err(|v: String| bad("circuit_order", &v))?,
                handrail: f[6].parse().map_err(|_| bad("handrail", f[6]))?,
            };
            let path = base.join(f[3]);
            trials.push(load_trial_with_meta(&path, meta)?);
        }
        Ok(Self { trials })
    }

    /// Write trial files to `dir/trials/` and `dir/manifest.csv`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let trial_dir = dir.join("trials");
        fs::create_dir_all(&trial_dir).map_err(io_err(&trial_dir))?;
        let manifest = dir.join("manifest.csv");
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for t in &self.trials {
            let rel = format!("trials/{}.csv", t.meta.trial_id);
            save_trial(t, &dir.join(&rel))?;
            let m = &t.meta;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.subject_id, m.cohort, m.trial_id, rel, m.leading_leg, m.circuit_order, m.handrail
            ));
        }
        fs::write(&manifest, out).map_err(io_err(&manifest))?;
        Ok(manifest)
    }

    /// Subject ids of a cohort, sorted.
    pub fn subjects(&self, cohort: Cohort) -> Vec<String> {
        let mut ids: Vec<String> = self
            .trials
            .iter()
            .filter(|t| t.meta.cohort == cohort)
            .map(|t| t.meta.subject_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Trials of one subject, sorted by trial id.
    pub fn subject_trials(&self, subject_id: &str) -> Vec<&Trial> {
        let mut ts: Vec<&Trial> = self
            .trials
            .iter()
            .filter(|t| t.meta.subject_id == subject_id)
            .collect();
        ts.sort_by(|a, b| a.meta.trial_id.cmp(&b.meta.trial_id));
        ts
    }

    /// Per-subject trial counts, for inspection output.
    pub fn trial_counts(&self) -> HashMap<String, usize> {
        let mut counts = HashMap::new();
        for t in &self.trials {
            *counts.entry(t.meta.subject_id.clone()).or_insert(0) += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial_with(frames: usize, label_at: impl Fn(usize) -> (TaskCategory, Option<SubLabel>)) -> Trial {
        let data = (0..frames * CHANNEL_COUNT)
            .map(|i| ((i * 7919) % 1000) as f64 / 37.0 - 13.0)
            .collect();
        let (labels, subs) = (0..frames).map(label_at).unzip();
        Trial::new(
            TrialMeta::anonymous("t1"),
            Matrix::from_vec(frames, CHANNEL_COUNT, data),
            labels,
            subs,
        )
        .unwrap()
    }

    fn csv_of(trial: &Trial) -> String {
        let mut buf = Vec::new();
        write_trial(trial, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip_1200_frames() {
        let trial = trial_with(1200, |i| match i / 300 {
            0 => (TaskCategory::Lw, Some(SubLabel::Lwp)),
            1 => (TaskCategory::Sa, None),
            2 => (TaskCategory::Lw, None),
            _ => (TaskCategory::Lw, Some(SubLabel::Lwf)),
        });
        let text = csv_of(&trial);
        let back = read_trial(text.as_bytes(), TrialMeta::anonymous("t1")).unwrap();
        assert_eq!(back.frames(), 1200);
        assert_eq!(back, trial);
        assert_eq!(csv_of(&back), text);
    }

    #[test]
    fn columns_reordered_into_canonical_order() {
        let trial = trial_with(60, |_| (TaskCategory::Ra, None));
        let text = csv_of(&trial);
        // Reverse all columns.
        let shuffled: String = text
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.reverse();
                f.join(",") + "\n"
            })
            .collect();
        let back = read_trial(shuffled.as_bytes(), TrialMeta::anonymous("t1")).unwrap();
        assert_eq!(back, trial);
    }

    #[test]
    fn missing_channel_is_named() {
        let trial = trial_with(60, |_| (TaskCategory::Ra, None));
        let text = csv_of(&trial);
        let idx = 1 + CHANNEL_NAMES.iter().position(|c| *c == "foot_l_gyr_z").unwrap();
        let cut: String = text
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(idx);
                f.join(",") + "\n"
            })
            .collect();
        match read_trial(cut.as_bytes(), TrialMeta::anonymous("x")) {
            Err(CorpusError::MissingChannel(name)) => assert_eq!(name, "foot_l_gyr_z"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sublabel_on_non_lw_frame_is_bad_label() {
        let trial = trial_with(60, |_| (TaskCategory::Sa, None));
        let text = csv_of(&trial);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[8] = lines[8].replace(",SA,", ",SA,LWp");
        let text = lines.join("\n");
        match read_trial(text.as_bytes(), TrialMeta::anonymous("x")) {
            Err(CorpusError::BadLabel { row, .. }) => assert_eq!(row, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_and_time_and_nan_errors() {
        let trial = trial_with(60, |_| (TaskCategory::Sa, None));
        let text = csv_of(&trial);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let orig = lines.clone();

        lines[3] = lines[3].replace(",SA,", ",XX,");
        assert!(matches!(
            read_trial(lines.join("\n").as_bytes(), TrialMeta::anonymous("x")),
            Err(CorpusError::BadLabel { row: 2, .. })
        ));

        let mut lines = orig.clone();
        lines[5] = lines[5].replacen("0.04", "0.02", 1);
        assert!(matches!(
            read_trial(lines.join("\n").as_bytes(), TrialMeta::anonymous("x")),
            Err(CorpusError::NonMonotonicTime { row: 4 })
        ));

        let mut lines = orig;
        let mut f: Vec<String> = lines[10].split(',').map(String::from).collect();
        f[2] = "NaN".into();
        lines[10] = f.join(",");
        match read_trial(lines.join("\n").as_bytes(), TrialMeta::anonymous("x")) {
            Err(CorpusError::NonFiniteSample { row, column }) => {
                assert_eq!(row, 9);
                assert_eq!(column, "foot_l_acc_y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sources_partition_fusion() {
        let mut all: Vec<usize> = [SignalSource::Feet, SignalSource::TrunkPelvis, SignalSource::Forearms]
            .iter()
            .flat_map(|s| s.channels())
            .collect();
        all.sort();
        assert_eq!(all, SignalSource::Fusion.channels());
        let feet: Vec<&str> = SignalSource::Feet.channels().iter().map(|&c| CHANNEL_NAMES[c]).collect();
        assert_eq!(feet[0], "foot_l_acc_x");
        assert_eq!(feet[5], "foot_l_gyr_z");
        assert_eq!(feet[6], "foot_r_acc_x");
        assert_eq!(feet[11], "foot_r_gyr_z");
        let tp: Vec<&str> = SignalSource::TrunkPelvis.channels().iter().map(|&c| CHANNEL_NAMES[c]).collect();
        assert!(tp[..6].iter().all(|n| n.starts_with("trunk_")));
        assert!(tp[6..].iter().all(|n| n.starts_with("pelvis_")));
    }

    #[test]
    fn select_source_shapes() {
        let trial = trial_with(55, |_| (TaskCategory::Lw, None));
        for s in SignalSource::ALL {
            let m = select_source(&trial, s);
            assert_eq!(m.cols(), s.channel_count());
            assert_eq!(m.rows(), 55);
            for (k, &c) in s.channels().iter().enumerate() {
                assert_eq!(m[(3, k)], trial.signal()[(3, c)]);
            }
        }
    }

    #[test]
    fn normalizer_population_std() {
        let values = [2.0, 4.0, 4.0, 4.0, 6.0, 6.0, 8.0];
        let m = Matrix::from_vec(7, 1, values.to_vec());
        let n = Normalizer::fit([&m]).unwrap();
        let mean = values.iter().sum::<f64>() / 7.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 7.0;
        assert!((n.mean()[0] - 4.857142857142857).abs() < 1e-12);
        assert!((n.mean()[0] - mean).abs() < 1e-15);
        assert!((n.std()[0] - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normalizer_constant_channel_clamped() {
        let m = Matrix::from_vec(4, 1, vec![5.0; 4]);
        let n = Normalizer::fit([&m]).unwrap();
        assert_eq!(n.mean()[0], 5.0);
        assert_eq!(n.std()[0], MIN_STD);
        let z = n.apply(&m).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalizer_errors() {
        let a = Matrix::zeros(3, 12);
        let b = Matrix::zeros(3, 36);
        assert!(matches!(
            Normalizer::fit([&a, &b]),
            Err(CorpusError::ChannelMismatch { expected: 12, found: 36 })
        ));
        assert!(matches!(Normalizer::fit(std::iter::empty()), Err(CorpusError::EmptyInput)));
        let n = Normalizer::fit([&a]).unwrap();
        assert!(n.apply(&b).is_err());
    }

    #[test]
    fn apply_arithmetic() {
        let n = Normalizer::from_parts(vec![2.0], vec![2.0]);
        let z = n.apply(&Matrix::from_vec(1, 1, vec![4.0])).unwrap();
        assert_eq!(z[(0, 0)], 1.0);
    }

    #[test]
    fn last_frame_rule() {
        let labels: Vec<TaskCategory> = (0..50)
            .map(|i| if i < 49 { TaskCategory::Sa } else { TaskCategory::Lw })
            .collect();
        let mut subs = vec![None; 50];
        subs[49] = Some(SubLabel::Lwf);
        let w = segment_windows(&Matrix::zeros(50, 12), &labels, &subs, "t", "s").unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].start_frame, 0);
        assert_eq!(w[0].truth, ReportCategory::Lwf);
        assert_eq!(w[0].train_label, TaskCategory::Lw);
    }

    #[test]
    fn too_short() {
        let labels = vec![TaskCategory::Lw; 49];
        let subs = vec![None; 49];
        assert!(matches!(
            segment_windows(&Matrix::zeros(49, 12), &labels, &subs, "t", "s"),
            Err(CorpusError::TooShort { frames: 49 })
        ));
    }

    #[test]
    fn label_collapse_is_total() {
        for c in [
            ReportCategory::Ra,
            ReportCategory::Rd,
            ReportCategory::Sa,
            ReportCategory::Sd,
            ReportCategory::Lw,
            ReportCategory::Lwp,
            ReportCategory::Lwf,
        ] {
            let t = c.task();
            if matches!(c, ReportCategory::Lw | ReportCategory::Lwp | ReportCategory::Lwf) {
                assert_eq!(t, TaskCategory::Lw);
            } else {
                assert_eq!(t.as_str(), c.as_str());
            }
        }
    }

    proptest! {
        #[test]
        fn window_coverage(n in 50usize..800) {
            let labels = vec![TaskCategory::Lw; n];
            let subs = vec![None; n];
            let ws = segment_windows(&Matrix::zeros(n, 1), &labels, &subs, "t", "s").unwrap();
            prop_assert_eq!(ws.len(), (n - 50) / 25 + 1);
            let mut cover = vec![0usize; n];
            for w in &ws {
                prop_assert_eq!(w.data.rows(), WINDOW_FRAMES);
                for c in &mut cover[w.start_frame..w.start_frame + 50] {
                    *c += 1;
                }
            }
            prop_assert!(cover.iter().all(|&c| c <= 2));
        }

        #[test]
        fn normalizer_invert_recovers(values in proptest::collection::vec(-1e3f64..1e3, 6..60)) {
            let rows = values.len() / 3;
            let m = Matrix::from_vec(rows, 3, values[..rows * 3].to_vec());
            let n = Normalizer::fit([&m]).unwrap();
            let back = n.invert(&n.apply(&m).unwrap()).unwrap();
            for c in 0..3 {
                if n.std()[c] > MIN_STD {
                    for r in 0..rows {
                        let (a, b) = (m[(r, c)], back[(r, c)]);
                        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
                    }
                }
            }
        }
    }
}
