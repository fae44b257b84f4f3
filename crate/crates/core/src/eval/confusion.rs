use std::ops::AddAssign;

use thiserror::Error;

use crate::corpus::{ReportCategory, TaskCategory};

pub const ROWS: usize = 6;
pub const COLS: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfusionError {
    #[error("{truths} truths but {preds} predictions")]
    LengthMismatch { truths: usize, preds: usize },
    #[error("nothing to tally")]
    EmptyInput,
    #[error("{0} is not a scored category")]
    UnscoredTruth(ReportCategory),
}

/// Counts of true report category (rows RA, RD, SA, SD, LWp, LWf) against
/// predicted task category (columns RA, RD, SA, SD, LW).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; COLS]; ROWS],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; COLS]; ROWS]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, truth: ReportCategory, pred: TaskCategory) -> Result<(), ConfusionError> {
        let row = truth.row().ok_or(ConfusionError::UnscoredTruth(truth))?;
        self.counts[row][pred.index()] += 1;
        Ok(())
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn col_sum(&self, col: usize) -> u64 {
        self.counts.iter().map(|r| r[col]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.counts.iter_mut().zip(rhs.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

pub fn build_confusion(
    truths: &[ReportCategory],
    preds: &[TaskCategory],
) -> Result<ConfusionMatrix, ConfusionError> {
    if truths.len() != preds.len() {
        return Err(ConfusionError::LengthMismatch {
            truths: truths.len(),
            preds: preds.len(),
        });
    }
    if truths.is_empty() {
        return Err(ConfusionError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truths.iter().zip(preds) {
        cm.record(*t, *p)?;
    }
    Ok(cm)
}

/// Precision, recall and F1 for the six scored categories.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct F1Breakdown {
    pub precision: [f64; ROWS],
    pub recall: [f64; ROWS],
    pub f1: [f64; ROWS],
}

/// Predicted column that counts as correct for a confusion row. LWp and LWf
/// are both correct when predicted LW, and share that column's total as the
/// precision denominator.
pub fn correct_column(row: usize) -> usize {
    row.min(COLS - 1)
}

pub fn f1_breakdown(cm: &ConfusionMatrix) -> F1Breakdown {
    let mut out = F1Breakdown::default();
    for row in 0..ROWS {
        let col = correct_column(row);
        let hit = cm.counts[row][col] as f64;
        let recall = ratio(hit, cm.row_sum(row) as f64);
        let precision = ratio(hit, cm.col_sum(col) as f64);
        out.recall[row] = recall;
        out.precision[row] = precision;
        out.f1[row] = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    out
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_cell() {
        let truths = vec![ReportCategory::Lwp; 10];
        let preds = vec![TaskCategory::Lw; 10];
        let cm = build_confusion(&truths, &preds).unwrap();
        assert_eq!(cm.counts[4][4], 10);
        assert_eq!(cm.total(), 10);
    }

    #[test]
    fn errors() {
        assert_eq!(
            build_confusion(&[ReportCategory::Ra], &[]),
            Err(ConfusionError::LengthMismatch { truths: 1, preds: 0 })
        );
        assert_eq!(build_confusion(&[], &[]), Err(ConfusionError::EmptyInput));
        assert_eq!(
            build_confusion(&[ReportCategory::Lw], &[TaskCategory::Lw]),
            Err(ConfusionError::UnscoredTruth(ReportCategory::Lw))
        );
    }

    #[test]
    fn perfect_and_empty() {
        let mut cm = ConfusionMatrix::default();
        cm.counts[0][0] = 4;
        let f = f1_breakdown(&cm);
        assert_eq!(f.f1[0], 1.0);
        assert_eq!(f.f1[1], 0.0);
        assert_eq!(f.precision[1], 0.0);
    }

    fn relabel(cm: &ConfusionMatrix, perm: &[usize; 4]) -> ConfusionMatrix {
        let map_row = |r: usize| if r < 4 { perm[r] } else { r };
        let map_col = |c: usize| if c < 4 { perm[c] } else { c };
        let mut out = ConfusionMatrix::default();
        for r in 0..ROWS {
            for c in 0..COLS {
                out.counts[map_row(r)][map_col(c)] = cm.counts[r][c];
            }
        }
        out
    }

    proptest! {
        #[test]
        fn tally_matches_brute_force(pairs in proptest::collection::vec((0usize..6, 0usize..5), 1..300)) {
            let truths: Vec<ReportCategory> = pairs.iter().map(|p| ReportCategory::SCORED[p.0]).collect();
            let preds: Vec<TaskCategory> = pairs.iter().map(|p| TaskCategory::ALL[p.1]).collect();
            let cm = build_confusion(&truths, &preds).unwrap();
            for r in 0..ROWS {
                for c in 0..COLS {
                    let n = pairs.iter().filter(|p| **p == (r, c)).count() as u64;
                    prop_assert_eq!(cm.counts[r][c], n);
                }
            }
            prop_assert_eq!(cm.total(), pairs.len() as u64);
        }

        #[test]
        fn f1_equivariant_under_relabeling(
            counts in proptest::collection::vec(0u64..50, 30),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let mut cm = ConfusionMatrix::default();
            for (i, v) in counts.iter().enumerate() {
                cm.counts[i / 5][i % 5] = *v;
            }
            let perm: [usize; 4] = perm.try_into().unwrap();
            let (a, b) = (f1_breakdown(&cm), f1_breakdown(&relabel(&cm, &perm)));
            for r in 0..4 {
                prop_assert!((a.f1[r] - b.f1[perm[r]]).abs() < 1e-12);
            }
            for r in 4..6 {
                prop_assert!((a.f1[r] - b.f1[r]).abs() < 1e-12);
            }
            for v in a.f1.iter().chain(&a.precision).chain(&a.recall) {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
