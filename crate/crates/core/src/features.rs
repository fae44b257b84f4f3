//! Time-domain window features for the linear classifier.
//!
//! Layout is channel-major: for each channel the block
//! `(min, max, mean, std, first, last)`, with `std` the population standard
//! deviation.

use thiserror::Error;

use crate::corpus::LabeledWindow;
use crate::matrix::Matrix;

pub const FEATURES_PER_CHANNEL: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("window has {0} frames; at least 2 are required")]
    TooFewFrames(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The six-value block of one channel.
    pub fn block(&self, channel: usize) -> &[f64] {
        &self.0[channel * FEATURES_PER_CHANNEL..(channel + 1) * FEATURES_PER_CHANNEL]
    }
}

pub fn extract_features(window: &LabeledWindow) -> Result<FeatureVector, FeatureError> {
    extract_from_matrix(&window.data)
}

pub fn extract_from_matrix(data: &Matrix) -> Result<FeatureVector, FeatureError> {
    let frames = data.rows();
    if frames < 2 {
        return Err(FeatureError::TooFewFrames(frames));
    }
    let mut out = Vec::with_capacity(FEATURES_PER_CHANNEL * data.cols());
    let n = frames as f64;
    for c in 0..data.cols() {
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in data.column(c) {
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
        }
        let mean = (sum / n).clamp(lo, hi);
        let var = data.column(c).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        out.extend_from_slice(&[
            lo,
            hi,
            mean,
            var.sqrt(),
            data[(0, c)],
            data[(frames - 1, c)],
        ]);
    }
    Ok(FeatureVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_block() {
        let m = Matrix::from_vec(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let f = extract_from_matrix(&m).unwrap();
        let expect = [1.0, 4.0, 2.5, 1.25f64.sqrt(), 1.0, 4.0];
        for (a, b) in f.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        assert!((f.0[3] - 1.118033988749895).abs() < 1e-12);
    }

    #[test]
    fn constant_channel() {
        let m = Matrix::from_vec(5, 1, vec![-3.5; 5]);
        let f = extract_from_matrix(&m).unwrap();
        assert_eq!(f.as_slice(), &[-3.5, -3.5, -3.5, 0.0, -3.5, -3.5]);
    }

    #[test]
    fn dimension_for_sources() {
        assert_eq!(extract_from_matrix(&Matrix::zeros(50, 12)).unwrap().len(), 72);
        assert_eq!(extract_from_matrix(&Matrix::zeros(50, 36)).unwrap().len(), 216);
    }

    #[test]
    fn too_few_frames() {
        assert_eq!(
            extract_from_matrix(&Matrix::zeros(1, 3)),
            Err(FeatureError::TooFewFrames(1))
        );
    }

    fn window(frames: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-50.0f64..50.0, frames * cols)
            .prop_map(move |v| Matrix::from_vec(frames, cols, v))
    }

    proptest! {
        #[test]
        fn block_ordering_invariants(m in window(12, 3)) {
            let f = extract_from_matrix(&m).unwrap();
            for c in 0..3 {
                let b = f.block(c);
                prop_assert!(b[0] <= b[2] && b[2] <= b[1]);
                prop_assert!(b[3] >= 0.0);
                prop_assert!(b[0] <= b[4] && b[4] <= b[1]);
                prop_assert!(b[0] <= b[5] && b[5] <= b[1]);
            }
        }

        #[test]
        fn permutation_changes_only_endpoints(m in window(10, 2), rot in 1usize..9) {
            let rows: Vec<Vec<f64>> = (0..10).map(|r| m.row((r + rot) % 10).to_vec()).collect();
            let p = Matrix::from_rows(&rows);
            let (a, b) = (extract_from_matrix(&m).unwrap(), extract_from_matrix(&p).unwrap());
            for c in 0..2 {
                let (x, y) = (a.block(c), b.block(c));
                prop_assert_eq!(x[0], y[0]);
                prop_assert_eq!(x[1], y[1]);
                prop_assert!((x[2] - y[2]).abs() < 1e-12);
                prop_assert!((x[3] - y[3]).abs() < 1e-12);
                prop_assert_eq!(y[4], m[(rot, c)]);
            }
        }

        #[test]
        fn affine_map(m in window(8, 2), ai in 0usize..2, bi in 0usize..2) {
            let a = [-2.0, 0.5][ai];
            let b = [0.0, 3.0][bi];
            let mapped = Matrix::from_vec(8, 2, m.as_slice().iter().map(|v| a * v + b).collect());
            let (f, g) = (extract_from_matrix(&m).unwrap(), extract_from_matrix(&mapped).unwrap());
            for c in 0..2 {
                let (x, y) = (f.block(c), g.block(c));
                let (lo, hi) = if a > 0.0 { (x[0], x[1]) } else { (x[1], x[0]) };
                let close = |p: f64, q: f64| (p - q).abs() <= 1e-9 * (1.0 + q.abs());
                prop_assert!(close(y[0], a * lo + b));
                prop_assert!(close(y[1], a * hi + b));
                prop_assert!(close(y[2], a * x[2] + b));
                prop_assert!(close(y[3], a.abs() * x[3]));
                prop_assert!(close(y[4], a * x[4] + b));
                prop_assert!(close(y[5], a * x[5] + b));
            }
        }
    }
}
