//! Linear discriminant analysis over feature vectors.
//!
//! Fit estimates per-category means, a pooled within-category covariance
//! with trace-scaled ridge shrinkage, and empirical priors. The covariance
//! is Cholesky-factored once; scores use the linear discriminant
//!
//! ```text
//! δ_k(x) = xᵀ Σ⁻¹ μ_k − ½ μ_kᵀ Σ⁻¹ μ_k + ln π_k
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::corpus::TaskCategory;
use crate::features::FeatureVector;

pub const DEFAULT_SHRINKAGE: f64 = 1e-6;
pub const HEADER: &str = "LOCOMODE-LDA v1";
const CATEGORIES: usize = 5;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("category {0} has fewer than 2 training samples")]
    InsufficientSamples(TaskCategory),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("no training samples")]
    Empty,
    #[error("shrinkage must be finite and non-negative, got {0}")]
    BadShrinkage(f64),
    #[error("pooled covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct LdaModel {
    feature_dim: usize,
    shrinkage: f64,
    priors: [f64; CATEGORIES],
    /// `None` for categories absent from training.
    means: [Option<Vec<f64>>; CATEGORIES],
    covariance: DMatrix<f64>,
    /// Σ⁻¹ μ_k.
    weights: [Option<Vec<f64>>; CATEGORIES],
    /// −½ μ_kᵀ Σ⁻¹ μ_k + ln π_k.
    offsets: [f64; CATEGORIES],
}

impl PartialEq for LdaModel {
    fn eq(&self, other: &Self) -> bool {
        self.feature_dim == other.feature_dim
            && self.shrinkage.to_bits() == other.shrinkage.to_bits()
            && self.priors == other.priors
            && self.means == other.means
            && self.covariance == other.covariance
    }
}

impl LdaModel {
    pub fn fit(
        features: &[FeatureVector],
        labels: &[TaskCategory],
        shrinkage: f64,
    ) -> Result<Self, LdaError> {
        let rows: Vec<&[f64]> = features.iter().map(FeatureVector::as_slice).collect();
        Self::fit_rows(&rows, labels, shrinkage)
    }

    pub fn fit_rows(
        rows: &[&[f64]],
        labels: &[TaskCategory],
        shrinkage: f64,
    ) -> Result<Self, LdaError> {
        if rows.len() != labels.len() {
            return Err(LdaError::LengthMismatch {
                features: rows.len(),
                labels: labels.len(),
            });
        }
        if !(shrinkage.is_finite() && shrinkage >= 0.0) {
            return Err(LdaError::BadShrinkage(shrinkage));
        }
        let dim = rows.first().ok_or(LdaError::Empty)?.len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(LdaError::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }

        let mut counts = [0usize; CATEGORIES];
        let mut sums = vec![vec![0.0; dim]; CATEGORIES];
        for (row, label) in rows.iter().zip(labels) {
            counts[label.index()] += 1;
            for (s, v) in sums[label.index()].iter_mut().zip(row.iter()) {
                *s += v;
            }
        }
        for cat in TaskCategory::ALL {
            if counts[cat.index()] == 1 {
                return Err(LdaError::InsufficientSamples(cat));
            }
        }
        let means: [Option<Vec<f64>>; CATEGORIES] = std::array::from_fn(|k| {
            (counts[k] > 0).then(|| sums[k].iter().map(|s| s / counts[k] as f64).collect())
        });

        // Lower triangle of the within-category scatter, mirrored afterwards.
        let mut scatter = vec![0.0; dim * dim];
        let mut centered = vec![0.0; dim];
        for (row, label) in rows.iter().zip(labels) {
            let mu = means[label.index()].as_ref().expect("category present");
            for ((c, v), m) in centered.iter_mut().zip(row.iter()).zip(mu) {
                *c = v - m;
            }
            for i in 0..dim {
                let ci = centered[i];
                if ci == 0.0 {
                    continue;
                }
                let dst = &mut scatter[i * dim..i * dim + i + 1];
                for (s, cj) in dst.iter_mut().zip(&centered[..=i]) {
                    *s += ci * cj;
                }
            }
        }
        let n = rows.len();
        let present = counts.iter().filter(|&&c| c > 0).count();
        let dof = (n - present) as f64;
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = scatter[i * dim + j] / dof;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let ridge = shrinkage * cov.trace() / dim as f64;
        for i in 0..dim {
            cov[(i, i)] += ridge;
        }

        let priors: [f64; CATEGORIES] = std::array::from_fn(|k| counts[k] as f64 / n as f64);
        Self::assemble(dim, shrinkage, priors, means, cov)
    }

    fn assemble(
        feature_dim: usize,
        shrinkage: f64,
        priors: [f64; CATEGORIES],
        means: [Option<Vec<f64>>; CATEGORIES],
        covariance: DMatrix<f64>,
    ) -> Result<Self, LdaError> {
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(LdaError::NotPositiveDefinite)?;
        let mut weights: [Option<Vec<f64>>; CATEGORIES] = Default::default();
        let mut offsets = [f64::NEG_INFINITY; CATEGORIES];
        for k in 0..CATEGORIES {
            if let Some(mu) = &means[k] {
                let w = chol.solve(&DVector::from_column_slice(mu));
                let quad: f64 = w.iter().zip(mu).map(|(a, b)| a * b).sum();
                offsets[k] = -0.5 * quad + priors[k].ln();
                weights[k] = Some(w.as_slice().to_vec());
            }
        }
        Ok(Self {
            feature_dim,
            shrinkage,
            priors,
            means,
            covariance,
            weights,
            offsets,
        })
    }

    /// Build a model from explicit parameters; `means[k] = None` marks an
    /// absent category. Priors are used as given.
    pub fn from_parameters(
        means: [Option<Vec<f64>>; CATEGORIES],
        covariance: DMatrix<f64>,
        priors: [f64; CATEGORIES],
    ) -> Result<Self, LdaError> {
        let dim = covariance.nrows();
        for mu in means.iter().flatten() {
            if mu.len() != dim {
                return Err(LdaError::DimensionMismatch {
                    expected: dim,
                    found: mu.len(),
                });
            }
        }
        Self::assemble(dim, 0.0, priors, means, covariance)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn priors(&self) -> &[f64; CATEGORIES] {
        &self.priors
    }

    pub fn mean(&self, category: TaskCategory) -> Option<&[f64]> {
        self.means[category.index()].as_deref()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Discriminant values in canonical category order; absent categories
    /// score `-inf`.
    pub fn scores(&self, x: &[f64]) -> Result<[f64; CATEGORIES], LdaError> {
        if x.len() != self.feature_dim {
            return Err(LdaError::DimensionMismatch {
                expected: self.feature_dim,
                found: x.len(),
            });
        }
        Ok(std::array::from_fn(|k| match &self.weights[k] {
            Some(w) => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.offsets[k],
            None => f64::NEG_INFINITY,
        }))
    }

    /// Argmax of [`scores`](Self::scores); exact ties go to the earlier
    /// category.
    pub fn predict(&self, x: &[f64]) -> Result<TaskCategory, LdaError> {
        let s = self.scores(x)?;
        let mut best = 0;
        for k in 1..CATEGORIES {
            if s[k] > s[best] {
                best = k;
            }
        }
        Ok(TaskCategory::ALL[best])
    }

    pub fn to_text(&self) -> String {
        let d = self.feature_dim;
        let mut out = String::new();
        writeln!(out, "{HEADER}").unwrap();
        writeln!(out, "{d}").unwrap();
        let cats: Vec<&str> = TaskCategory::ALL.iter().map(|c| c.as_str()).collect();
        writeln!(out, "{}", cats.join(",")).unwrap();
        writeln!(out, "{:e}", self.shrinkage).unwrap();
        writeln!(out, "{}", join(&self.priors)).unwrap();
        for mu in &self.means {
            match mu {
                Some(m) => writeln!(out, "{}", join(m)).unwrap(),
                None => writeln!(out, "absent").unwrap(),
            }
        }
        for i in 0..d {
            let row: Vec<f64> = (0..d).map(|j| self.covariance[(i, j)]).collect();
            writeln!(out, "{}", join(&row)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, LdaError> {
        let bad = |m: &str| LdaError::Format(m.to_string());
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(&format!("missing {what}")));
        if next("header")? != HEADER {
            return Err(bad("bad header"));
        }
        let d: usize = next("dimension")?.trim().parse().map_err(|_| bad("bad dimension"))?;
        let cats = next("categories")?;
        let expect: Vec<&str> = TaskCategory::ALL.iter().map(|c| c.as_str()).collect();
        if cats != expect.join(",") {
            return Err(bad("unexpected category list"));
        }
        let shrinkage: f64 = next("shrinkage")?.trim().parse().map_err(|_| bad("bad shrinkage"))?;
        let priors = parse_row(next("priors")?, CATEGORIES)?;
        let mut means: [Option<Vec<f64>>; CATEGORIES] = Default::default();
        for m in &mut means {
            let line = next("mean")?;
            if line != "absent" {
                *m = Some(parse_row(line, d)?);
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..d {
            let row = parse_row(next("covariance")?, d)?;
            for (j, v) in row.into_iter().enumerate() {
                cov[(i, j)] = v;
            }
        }
        Self::assemble(d, shrinkage, priors.try_into().unwrap(), means, cov)
    }

    pub fn save(&self, path: &Path) -> Result<(), LdaError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LdaError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

fn parse_row(line: &str, len: usize) -> Result<Vec<f64>, LdaError> {
    let values: Vec<f64> = line
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| LdaError::Format(format!("bad number in {line:.40}")))?;
    if values.len() != len {
        return Err(LdaError::Format(format!(
            "expected {len} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}
