//! Experiment orchestration behind the `locomode` binary: running every
//! configured combination, writing artifacts, re-rendering stored reports
//! and summarising datasets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::corpus::{self, CorpusError, Dataset, ReportCategory, SignalSource};
use crate::eval::report::{
    parse_view, render_confusion_csv, render_csv, render_fold_confusions_csv, render_folds_csv,
    render_summary_grid, render_text, ParseError,
};
use crate::eval::{run_paradigm, Classifier, Paradigm, ParadigmReport, ReportView};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load dataset {path}: {source}")]
    Dataset { path: PathBuf, source: CorpusError },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("no reports found under {0}")]
    NoReports(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub type Combination = (Paradigm, Classifier, SignalSource);

pub fn combination_name((p, c, s): Combination) -> String {
    format!("{p}_{c}_{s}")
}

pub fn combinations(cfg: &ExperimentConfig) -> Vec<Combination> {
    let mut out = Vec::new();
    for &p in &cfg.paradigms {
        for &c in &cfg.classifiers {
            for &s in &cfg.sources {
                out.push((p, c, s));
            }
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes `report.csv`, `confusion.csv`, `fold_confusions.csv`, `folds.csv`,
/// `summary.txt` and `models/` into `dir`.
pub fn write_report(dir: &Path, report: &ParadigmReport) -> Result<(), CliError> {
    let models = dir.join("models");
    std::fs::create_dir_all(&models).map_err(io_err(&models))?;
    let view = ReportView::from_report(report);
    write_file(&dir.join("report.csv"), &render_csv(&view))?;
    write_file(&dir.join("confusion.csv"), &render_confusion_csv(&view))?;
    write_file(&dir.join("fold_confusions.csv"), &render_fold_confusions_csv(report))?;
    write_file(&dir.join("folds.csv"), &render_folds_csv(report))?;
    write_file(&dir.join("summary.txt"), &render_text(&view))?;
    for (id, model) in &report.models {
        let path = models.join(format!("{id}.{}", model.extension()));
        write_file(&path, &model.to_text())?;
    }
    Ok(())
}

#[derive(Debug)]
pub struct Outcome {
    /// Views of the combinations that succeeded, in configuration order.
    pub views: Vec<ReportView>,
    /// Failed combinations with their error messages.
    pub failures: Vec<(String, String)>,
    pub summary: String,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let path = cfg.manifest_path();
    Dataset::load(&path).map_err(|source| CliError::Dataset { path, source })
}

/// Runs every combination with at most `jobs` at a time. A failing
/// combination is recorded in the outcome and the rest still run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    jobs: usize,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<Outcome, CliError> {
    let dataset = load_dataset(cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let combos = combinations(cfg);
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, Result<ReportView, String>>> = Mutex::new(BTreeMap::new());

    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&combo) = combos.get(i) else { break };
        let name = combination_name(combo);
        let result = run_paradigm(&dataset, combo.0, combo.1, combo.2, &cfg.run)
            .map_err(|e| e.to_string())
            .and_then(|report| {
                write_report(&cfg.output_dir.join(&name), &report)
                    .map(|_| ReportView::from_report(&report))
                    .map_err(|e| e.to_string())
            });
        match &result {
            Ok(v) => progress(&format!("{name}: macro-F1 {:.4}", v.macro_f1())),
            Err(e) => progress(&format!("{name}: FAILED: {e}")),
        }
        results.lock().unwrap().insert(i, result);
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.clamp(1, combos.len().max(1)) {
            scope.spawn(worker);
        }
        worker();
    });

    let mut views = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_inner().unwrap() {
        match r {
            Ok(v) => views.push(v),
            Err(e) => failures.push((combination_name(combos[i]), e)),
        }
    }
    let summary = render_summary_grid(&views);
    write_file(&cfg.output_dir.join("summary.txt"), &summary)?;
    Ok(Outcome {
        views,
        failures,
        summary,
    })
}

/// Rebuilds every combination's view from the CSVs under `out`, in the same
/// order a run reports them.
pub fn load_views(out: &Path) -> Result<Vec<ReportView>, CliError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(io_err(out))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("report.csv").is_file() && p.join("confusion.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::NoReports(out.to_path_buf()));
    }
    let mut views = dirs
        .iter()
        .map(|d| {
            let read = |name: &str| {
                let p = d.join(name);
                std::fs::read_to_string(&p).map_err(io_err(&p))
            };
            parse_view(&read("report.csv")?, &read("confusion.csv")?).map_err(|source| {
                CliError::Parse {
                    path: d.clone(),
                    source,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    views.sort_by_key(|v| (v.paradigm, v.classifier, v.source));
    Ok(views)
}

/// Per-combination tables followed by the summary grid.
pub fn rerender(out: &Path) -> Result<String, CliError> {
    let views = load_views(out)?;
    let mut text = String::new();
    for v in &views {
        text.push_str(&render_text(v));
        text.push('\n');
    }
    text.push_str(&render_summary_grid(&views));
    Ok(text)
}

/// Validates every trial of a manifest and summarises the corpus.
pub fn inspect(manifest: &Path) -> Result<String, CliError> {
    let ds = Dataset::load(manifest).map_err(|source| CliError::Dataset {
        path: manifest.to_path_buf(),
        source,
    })?;
    let mut out = String::new();
    let mut windows: BTreeMap<&str, usize> = BTreeMap::new();
    let mut frames = 0;
    for t in &ds.trials {
        frames += t.frames();
        let w = corpus::trial_windows(t, SignalSource::Feet, None).map_err(|source| {
            CliError::Dataset {
                path: manifest.to_path_buf(),
                source,
            }
        })?;
        for lw in &w {
            *windows.entry(lw.truth.as_str()).or_default() += 1;
        }
    }
    for cohort in [corpus::Cohort::Healthy, corpus::Cohort::Pd] {
        let subjects = ds.subjects(cohort);
        let trials: usize = subjects.iter().map(|s| ds.subject_trials(s).len()).sum();
        writeln!(out, "{cohort}: {} subject(s), {trials} trial(s)", subjects.len()).unwrap();
    }
    writeln!(out, "frames: {frames}").unwrap();
    let order = ReportCategory::SCORED.iter().map(|c| c.as_str()).chain(["LW"]);
    let cells: Vec<String> = order
        .filter_map(|c| windows.get(c).map(|n| format!("{c}={n}")))
        .collect();
    writeln!(out, "windows: {}", cells.join(" ")).unwrap();
    Ok(out)
}
