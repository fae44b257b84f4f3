//! Rendering of paradigm reports as text tables and CSV, and re-reading the
//! CSV so reports can be re-rendered without retraining.

use std::fmt::Write as _;

use thiserror::Error;

use super::confusion::{f1_breakdown, ConfusionMatrix, F1Breakdown, COLS, ROWS};
use super::paradigm::{mean_std, Classifier, Paradigm, ParadigmReport};
use crate::corpus::{ReportCategory, SignalSource, TaskCategory};

pub const REPORT_HEADER: &str = "paradigm,classifier,source,category,fold_id,precision,recall,f1";
pub const CONFUSION_HEADER: &str =
    "paradigm,classifier,source,true_category,pred_RA,pred_RD,pred_SA,pred_SD,pred_LW";
pub const FOLD_CONFUSION_HEADER: &str =
    "paradigm,classifier,source,fold_id,true_category,pred_RA,pred_RD,pred_SA,pred_SD,pred_LW";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// What a rendered report needs: per-subject F1 and the pooled confusion.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportView {
    pub paradigm: Paradigm,
    pub classifier: Classifier,
    pub source: SignalSource,
    pub groups: Vec<(String, F1Breakdown)>,
    pub pooled: ConfusionMatrix,
}

impl ReportView {
    pub fn from_report(r: &ParadigmReport) -> Self {
        Self {
            paradigm: r.paradigm,
            classifier: r.classifier,
            source: r.source,
            groups: r.groups.iter().map(|g| (g.group_id.clone(), g.f1)).collect(),
            pooled: r.pooled,
        }
    }

    pub fn summary(&self) -> ([f64; ROWS], [f64; ROWS]) {
        let rows: Vec<[f64; ROWS]> = self.groups.iter().map(|g| g.1.f1).collect();
        mean_std(&rows)
    }

    pub fn macro_f1(&self) -> f64 {
        self.summary().0.iter().sum::<f64>() / ROWS as f64
    }

    fn key(&self) -> String {
        format!("{},{},{}", self.paradigm, self.classifier, self.source)
    }
}

pub fn render_report(report: &ParadigmReport, format: Format) -> String {
    let view = ReportView::from_report(report);
    match format {
        Format::Text => render_text(&view),
        Format::Csv => render_csv(&view),
    }
}

pub fn mean_std_cell(mean: f64, std: f64) -> String {
    format!("{mean:.2} ({std:.2})")
}

fn category_header() -> String {
    ReportCategory::SCORED
        .iter()
        .map(|c| format!("{:>13}", c.as_str()))
        .collect()
}

pub fn render_text(view: &ReportView) -> String {
    let mut out = String::new();
    let (mean, std) = view.summary();
    let pooled = f1_breakdown(&view.pooled);
    writeln!(
        out,
        "paradigm {} | classifier {} | source {} | {} subject(s)",
        view.paradigm,
        view.classifier,
        view.source,
        view.groups.len()
    )
    .unwrap();
    writeln!(out, "{:<18}{}", "F1", category_header()).unwrap();
    let cells: String = (0..ROWS)
        .map(|c| format!("{:>13}", mean_std_cell(mean[c], std[c])))
        .collect();
    writeln!(out, "{:<18}{cells}", "mean (std)").unwrap();
    for (id, f) in &view.groups {
        let cells: String = f.f1.iter().map(|v| format!("{v:>13.2}")).collect();
        writeln!(out, "{:<18}{cells}", format!("  {id}")).unwrap();
    }
    let cells: String = pooled.f1.iter().map(|v| format!("{v:>13.2}")).collect();
    writeln!(out, "{:<18}{cells}", "pooled").unwrap();
    writeln!(out, "macro-F1 {:.4}", view.macro_f1()).unwrap();
    writeln!(out).unwrap();
    out.push_str(&render_confusion(&view.pooled));
    out
}

/// Pooled confusion block: rows true category, columns predicted.
pub fn render_confusion(cm: &ConfusionMatrix) -> String {
    let mut out = String::new();
    let head: String = TaskCategory::ALL
        .iter()
        .map(|c| format!("{:>7}", c.as_str()))
        .collect();
    writeln!(out, "{:<6}{head}", "true").unwrap();
    for (r, cat) in ReportCategory::SCORED.iter().enumerate() {
        let cells: String = cm.counts[r].iter().map(|v| format!("{v:>7}")).collect();
        writeln!(out, "{:<6}{cells}", cat.as_str()).unwrap();
    }
    out
}

/// Per-fold rows, then `SUMMARY` rows (mean and sample std of F1 across
/// subjects), then `POOLED` rows (scores of the pooled confusion).
pub fn render_csv(view: &ReportView) -> String {
    let mut out = String::new();
    writeln!(out, "{REPORT_HEADER}").unwrap();
    let key = view.key();
    for (id, f) in &view.groups {
        for (r, cat) in ReportCategory::SCORED.iter().enumerate() {
            writeln!(
                out,
                "{key},{cat},{id},{:.6},{:.6},{:.6}",
                f.precision[r], f.recall[r], f.f1[r]
            )
            .unwrap();
        }
    }
    let (mean, std) = view.summary();
    for (r, cat) in ReportCategory::SCORED.iter().enumerate() {
        writeln!(out, "SUMMARY,{key},{cat},{:.6},{:.6}", mean[r], std[r]).unwrap();
    }
    let pooled = f1_breakdown(&view.pooled);
    for (r, cat) in ReportCategory::SCORED.iter().enumerate() {
        writeln!(
            out,
            "POOLED,{key},{cat},{:.6},{:.6},{:.6}",
            pooled.precision[r], pooled.recall[r], pooled.f1[r]
        )
        .unwrap();
    }
    out
}

pub fn render_confusion_csv(view: &ReportView) -> String {
    let mut out = String::new();
    writeln!(out, "{CONFUSION_HEADER}").unwrap();
    let key = view.key();
    for (r, cat) in ReportCategory::SCORED.iter().enumerate() {
        let cells: Vec<String> = view.pooled.counts[r].iter().map(u64::to_string).collect();
        writeln!(out, "{key},{cat},{}", cells.join(",")).unwrap();
    }
    out
}

/// Every fold's confusion counts, for auditing.
pub fn render_fold_confusions_csv(report: &ParadigmReport) -> String {
    let mut out = String::new();
    writeln!(out, "{FOLD_CONFUSION_HEADER}").unwrap();
    let key = format!("{},{},{}", report.paradigm, report.classifier, report.source);
    for f in &report.folds {
        for (r, cat) in ReportCategory::SCORED.iter().enumerate() {
            let cells: Vec<String> = f.confusion.counts[r].iter().map(u64::to_string).collect();
            writeln!(out, "{key},{},{cat},{}", f.fold_id, cells.join(",")).unwrap();
        }
    }
    out
}

/// Fold bookkeeping: which trials and subjects each fold trained and tested on.
pub fn render_folds_csv(report: &ParadigmReport) -> String {
    let mut out = String::from(
        "fold_id,group_id,model_id,test_trials,train_subjects,train_windows,train_pd_windows,test_windows\n",
    );
    for f in &report.folds {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.fold_id,
            f.group_id,
            f.model_id,
            f.test_trials.join(";"),
            f.train_subjects.join(";"),
            f.train_windows,
            f.train_pd_windows,
            f.test_windows
        )
        .unwrap();
    }
    out
}

fn parse_key(fields: &[&str], line: usize) -> Result<(Paradigm, Classifier, SignalSource), ParseError> {
    let err = |m: String| ParseError { line, message: m };
    Ok((
        fields[0].parse().map_err(|v| err(format!("bad paradigm {v:?}")))?,
        fields[1].parse().map_err(|v| err(format!("bad classifier {v:?}")))?,
        fields[2].parse().map_err(|v| err(format!("bad source {v:?}")))?,
    ))
}

/// Rebuild a view from a report CSV and a pooled confusion CSV.
pub fn parse_view(report_csv: &str, confusion_csv: &str) -> Result<ReportView, ParseError> {
    let mut key = None;
    let mut groups: Vec<(String, F1Breakdown)> = Vec::new();
    for (n, line) in report_csv.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if n == 0 {
            if line != REPORT_HEADER {
                return Err(ParseError {
                    line: 1,
                    message: "bad report header".into(),
                });
            }
            continue;
        }
        if line.is_empty() || line.starts_with("SUMMARY,") || line.starts_with("POOLED,") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let err = |m: &str| ParseError {
            line: n + 1,
            message: m.to_string(),
        };
        if f.len() != 8 {
            return Err(err("expected 8 fields"));
        }
        let k = parse_key(&f, n + 1)?;
        if *key.get_or_insert(k) != k {
            return Err(err("mixed paradigm/classifier/source"));
        }
        let cat: ReportCategory = f[3].parse().map_err(|_| err("bad category"))?;
        let row = cat.row().ok_or_else(|| err("unscored category"))?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        let (p, r, f1) = (num(f[5])?, num(f[6])?, num(f[7])?);
        let idx = match groups.iter().position(|g| g.0 == f[4]) {
            Some(i) => i,
            None => {
                groups.push((f[4].to_string(), F1Breakdown::default()));
                groups.len() - 1
            }
        };
        let g = &mut groups[idx].1;
        g.precision[row] = p;
        g.recall[row] = r;
        g.f1[row] = f1;
    }
    let (paradigm, classifier, source) = key.ok_or(ParseError {
        line: 0,
        message: "report has no fold rows".into(),
    })?;
    let pooled = parse_confusion_csv(confusion_csv)?;
    Ok(ReportView {
        paradigm,
        classifier,
        source,
        groups,
        pooled,
    })
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix, ParseError> {
    let mut cm = ConfusionMatrix::default();
    let mut seen = [false; ROWS];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let err = |m: &str| ParseError {
            line: n + 1,
            message: m.to_string(),
        };
        if n == 0 {
            if line != CONFUSION_HEADER {
                return Err(err("bad confusion header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 + COLS {
            return Err(err("expected 9 fields"));
        }
        let cat: ReportCategory = f[3].parse().map_err(|_| err("bad category"))?;
        let row = cat.row().ok_or_else(|| err("unscored category"))?;
        for c in 0..COLS {
            cm.counts[row][c] = f[4 + c].parse().map_err(|_| err("bad count"))?;
        }
        seen[row] = true;
    }
    if !seen.iter().all(|s| *s) {
        return Err(ParseError {
            line: 0,
            message: "confusion table is missing rows".into(),
        });
    }
    Ok(cm)
}

/// One-line-per-combination grid shaped like a published F1 table.
pub fn render_summary_grid(views: &[ReportView]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<6}{:<8}{:<14}{}{:>10}",
        "",
        "",
        "source",
        category_header(),
        "macro"
    )
    .unwrap();
    for v in views {
        let (mean, std) = v.summary();
        let cells: String = (0..ROWS)
            .map(|c| format!("{:>13}", mean_std_cell(mean[c], std[c])))
            .collect();
        writeln!(
            out,
            "{:<6}{:<8}{:<14}{cells}{:>10.4}",
            v.paradigm.as_str(),
            v.classifier.as_str(),
            v.source.as_str(),
            v.macro_f1()
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(groups: Vec<(String, F1Breakdown)>) -> ReportView {
        let mut pooled = ConfusionMatrix::default();
        for r in 0..ROWS {
            pooled.counts[r][r.min(4)] = 3 + r as u64;
            pooled.counts[r][0] += 1;
        }
        ReportView {
            paradigm: Paradigm::Si2,
            classifier: Classifier::Lda,
            source: SignalSource::Feet,
            groups,
            pooled,
        }
    }

    fn uniform(f1: f64) -> F1Breakdown {
        F1Breakdown {
            precision: [f1; ROWS],
            recall: [f1; ROWS],
            f1: [f1; ROWS],
        }
    }

    #[test]
    fn single_fold_std_is_zero() {
        let v = view(vec![("P01".into(), uniform(0.73))]);
        let text = render_text(&v);
        assert!(text.contains("0.73 (0.00)"), "{text}");
    }

    #[test]
    fn two_folds_use_sample_std() {
        let v = view(vec![("P01".into(), uniform(0.4)), ("P02".into(), uniform(0.6))]);
        let text = render_text(&v);
        assert!(text.contains("0.50 (0.14)"), "{text}");
        assert!(!text.contains("0.50 (0.10)"));
    }

    #[test]
    fn csv_round_trip() {
        let mut a = uniform(0.25);
        a.f1[2] = 0.123456;
        let v = view(vec![("P01".into(), a), ("P02".into(), uniform(0.875))]);
        let csv = render_csv(&v);
        let conf = render_confusion_csv(&v);
        let back = parse_view(&csv, &conf).unwrap();
        assert_eq!(back, v);
        assert_eq!(render_csv(&back), csv);
        assert!(csv.contains("\nSUMMARY,si2,lda,feet,RA,"));
        assert!(csv.contains("\nPOOLED,si2,lda,feet,LWf,"));
    }

    #[test]
    fn confusion_csv_rejects_missing_rows() {
        let v = view(vec![("P01".into(), uniform(0.5))]);
        let conf = render_confusion_csv(&v);
        let cut: String = conf.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(parse_confusion_csv(&cut).is_err());
    }
}
