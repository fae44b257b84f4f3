//! Evaluation: confusion accounting, per-category F1, the three training
//! paradigms and report rendering.

mod confusion;
mod paradigm;
pub mod report;

pub use confusion::{
    build_confusion, correct_column, f1_breakdown, ConfusionError, ConfusionMatrix, F1Breakdown,
    COLS, ROWS,
};
pub use paradigm::{
    mean_std, run_paradigm, Classifier, EvalError, FoldResult, GroupResult, Paradigm,
    ParadigmReport, RunConfig, TrainedModel,
};
pub use report::{render_report, Format, ReportView};
