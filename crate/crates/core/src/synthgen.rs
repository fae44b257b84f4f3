//! Deterministic synthetic terrain-park cohorts.
//!
//! Each channel is a subject-scaled sum of three stride harmonics whose
//! fundamental, harmonic weights, amplitudes and inter-axis phases depend on
//! the current locomotor mode. PD subjects add a 4–6 Hz tremor to foot and
//! forearm channels and walk with a slower cadence. Labels switch
//! [`constants::TOE_OFF_LEAD_S`] before the signal does.
//!
//! Subject heterogeneity (per-channel gains, cadence, phase offsets) is
//! fixed across a subject's trials, so held-out subjects are measurably
//! harder to classify than held-out trials.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use thiserror::Error;

use crate::corpus::{
    CircuitOrder, Cohort, CorpusError, Dataset, Leg, SubLabel, TaskCategory, Trial, TrialMeta,
    CHANNEL_COUNT, FRAME_PERIOD_S,
};
use crate::matrix::Matrix;
use crate::seed;

/// Shipped generator constants.
pub mod constants {
    pub const VERSION: &str = "synthgen-constants v1";

    pub const NOISE_SIGMA: f64 = 0.05;
    pub const GAIN_LOG_SIGMA: f64 = 0.15;
    /// Strides per second.
    pub const CADENCE_HEALTHY: f64 = 0.9;
    pub const CADENCE_PD: f64 = 0.75;
    /// Relative half-width of the per-subject cadence draw.
    pub const CADENCE_SPREAD: f64 = 0.10;
    /// Relative half-width of the per-trial cadence jitter.
    pub const TRIAL_CADENCE_JITTER: f64 = 0.04;
    /// Relative half-width of the per-trial amplitude jitter.
    pub const TRIAL_AMPLITUDE_JITTER: f64 = 0.03;
    /// m/s².
    pub const TREMOR_AMPLITUDE: (f64, f64) = (0.3, 0.8);
    /// Hz.
    pub const TREMOR_FREQUENCY: (f64, f64) = (4.0, 6.0);
    /// Half-width of per-subject, per-channel phase offsets, radians.
    pub const PHASE_OFFSET: f64 = 0.2;
    /// Labels lead the kinematic change by this much, seconds.
    pub const TOE_OFF_LEAD_S: f64 = 0.2;
    /// Forearm amplitude factor on stairs when the handrail is used.
    pub const HANDRAIL_FOREARM_FACTOR: f64 = 0.4;

    /// Segment duration ranges (s): walkway before, incline, platform,
    /// incline, walkway after.
    pub const SEGMENT_DURATION: [(f64, f64); 5] =
        [(6.0, 7.0), (10.0, 12.0), (2.5, 3.5), (10.0, 12.0), (5.5, 6.5)];

    // Tables below are indexed by mode in canonical order RA, RD, SA, SD, LW.

    /// Fundamental frequency relative to cadence.
    pub const MODE_FREQUENCY: [f64; 5] = [0.85, 1.15, 0.72, 0.90, 1.0];
    /// Weights of harmonics 1..3.
    pub const HARMONIC_WEIGHTS: [[f64; 3]; 5] = [
        [1.0, 0.40, 0.10],
        [1.0, 0.20, 0.30],
        [1.0, 0.60, 0.20],
        [1.0, 0.30, 0.50],
        [1.0, 0.50, 0.15],
    ];
    /// Phase of each axis (acc xyz, gyr xyz) within the stride, radians.
    pub const AXIS_PHASE: [[f64; 6]; 5] = [
        [0.0, 1.2, 2.4, 0.6, -1.0, 2.0],
        [0.0, -1.2, 2.0, 2.6, 1.0, -0.6],
        [0.0, 0.4, -2.4, -0.6, 2.2, 1.2],
        [0.0, -0.4, -1.6, 1.6, -2.2, -1.4],
        [0.0, 0.8, 3.0, 1.4, 0.0, 0.4],
    ];
    /// First-harmonic amplitude per axis for each body-segment group.
    pub const FOOT_AMPLITUDE: [[f64; 6]; 5] = [
        [4.17, 1.00, 4.00, 0.61, 5.30, 0.90],
        [3.00, 1.52, 2.96, 1.39, 4.00, 0.90],
        [1.96, 1.00, 5.82, 1.00, 4.00, 1.42],
        [3.00, 1.00, 6.86, 1.39, 2.96, 0.90],
        [3.00, 1.00, 4.00, 1.00, 4.00, 0.90],
    ];
    pub const FOREARM_AMPLITUDE: [[f64; 6]; 5] = [
        [1.0, 0.5, 0.8, 0.8, 0.3, 0.3],
        [1.1, 0.5, 0.7, 0.8, 0.3, 0.3],
        [0.9, 0.5, 0.8, 0.7, 0.3, 0.3],
        [1.0, 0.6, 0.8, 0.8, 0.3, 0.3],
        [1.0, 0.5, 0.8, 0.8, 0.3, 0.3],
    ];
    pub const TRUNK_AMPLITUDE: [[f64; 6]; 5] = [
        [1.2, 0.6, 1.5, 0.3, 0.2, 0.3],
        [1.0, 0.6, 1.8, 0.3, 0.3, 0.2],
        [0.9, 0.5, 2.0, 0.4, 0.2, 0.2],
        [1.1, 0.7, 2.4, 0.3, 0.3, 0.3],
        [1.0, 0.6, 1.6, 0.3, 0.2, 0.3],
    ];
    pub const PELVIS_AMPLITUDE: [[f64; 6]; 5] = [
        [1.4, 0.8, 1.8, 0.4, 0.3, 0.4],
        [1.2, 0.8, 2.1, 0.4, 0.4, 0.3],
        [1.1, 0.7, 2.4, 0.5, 0.3, 0.3],
        [1.3, 0.9, 2.8, 0.4, 0.4, 0.4],
        [1.2, 0.8, 1.9, 0.4, 0.3, 0.4],
    ];
}

use constants as k;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad circuit: {0}")]
    BadCircuit(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] CorpusError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub cohort: Cohort,
    pub gains: [f64; CHANNEL_COUNT],
    /// Strides per second.
    pub cadence: f64,
    pub tremor_amplitude: f64,
    pub tremor_frequency: f64,
    pub phase_offsets: [f64; CHANNEL_COUNT],
    pub rng_seed: u64,
}

pub fn subject_id(cohort: Cohort, index: usize) -> String {
    match cohort {
        Cohort::Healthy => format!("H{:02}", index + 1),
        Cohort::Pd => format!("P{:02}", index + 1),
    }
}

pub fn make_subject(cohort: Cohort, index: usize, master_seed: u64) -> SubjectProfile {
    let id = subject_id(cohort, index);
    let rng_seed = seed::derive(master_seed, &format!("subject/{id}"));
    let mut rng = seed::rng(rng_seed, "profile");
    let gain_dist = LogNormal::new(0.0, k::GAIN_LOG_SIGMA).expect("valid lognormal");
    let gains = std::array::from_fn(|_| gain_dist.sample(&mut rng));
    let base = match cohort {
        Cohort::Healthy => k::CADENCE_HEALTHY,
        Cohort::Pd => k::CADENCE_PD,
    };
    let cadence = base * (1.0 + rng.random_range(-k::CADENCE_SPREAD..=k::CADENCE_SPREAD));
    let phase_offsets = std::array::from_fn(|_| rng.random_range(-k::PHASE_OFFSET..=k::PHASE_OFFSET));
    let (tremor_amplitude, tremor_frequency) = match cohort {
        Cohort::Healthy => (0.0, 0.0),
        Cohort::Pd => (
            rng.random_range(k::TREMOR_AMPLITUDE.0..=k::TREMOR_AMPLITUDE.1),
            rng.random_range(k::TREMOR_FREQUENCY.0..=k::TREMOR_FREQUENCY.1),
        ),
    };
    SubjectProfile {
        subject_id: id,
        cohort,
        gains,
        cadence,
        tremor_amplitude,
        tremor_frequency,
        phase_offsets,
        rng_seed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    WalkwayBefore,
    Stair,
    Platform,
    Ramp,
    WalkwayAfter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// A to B: stair ascent then ramp descent.
    Forward,
    /// B to A: ramp ascent then stair descent.
    Reverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forward => "forward",
            Self::Reverse => "reverse",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    pub segments: Vec<(SegmentKind, f64)>,
    pub order: CircuitOrder,
    pub direction: Direction,
}

impl CircuitSpec {
    /// The five-segment circuit for `order` with the given durations.
    pub fn new(order: CircuitOrder, durations: [f64; 5]) -> Result<Self, SynthError> {
        use SegmentKind::*;
        let (first, second, direction) = match order {
            CircuitOrder::SaFirst => (Stair, Ramp, Direction::Forward),
            CircuitOrder::RaFirst => (Ramp, Stair, Direction::Reverse),
        };
        let kinds = [WalkwayBefore, first, Platform, second, WalkwayAfter];
        let spec = Self {
            segments: kinds.into_iter().zip(durations).collect(),
            order,
            direction,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sample<R: Rng>(order: CircuitOrder, rng: &mut R) -> Self {
        let durations = k::SEGMENT_DURATION.map(|(lo, hi)| rng.random_range(lo..=hi));
        Self::new(order, durations).expect("shipped durations are valid")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        use SegmentKind::*;
        let bad = |m: &str| Err(SynthError::BadCircuit(m.to_string()));
        let pos = |kind| self.segments.iter().position(|s| s.0 == kind);
        let count = |kind| self.segments.iter().filter(|s| s.0 == kind).count();
        if count(Stair) != 1 || count(Ramp) != 1 {
            return bad("exactly one stair and one ramp segment required");
        }
        if self.segments.first().map(|s| s.0) != Some(WalkwayBefore)
            || self.segments.last().map(|s| s.0) != Some(WalkwayAfter)
        {
            return bad("circuit must start and end on the walkway");
        }
        let (stair, ramp) = (pos(Stair).unwrap(), pos(Ramp).unwrap());
        let (lo, hi) = (stair.min(ramp), stair.max(ramp));
        if !self.segments[lo + 1..hi].iter().any(|s| s.0 == Platform) {
            return bad("platform walking must lie between the inclines");
        }
        let stair_first = stair < ramp;
        if stair_first != (self.order == CircuitOrder::SaFirst) {
            return bad("segment order disagrees with circuit order");
        }
        if let Some(s) = self.segments.iter().find(|s| !(s.1 >= 1.0)) {
            return Err(SynthError::BadCircuit(format!(
                "{:?} lasts {} s; minimum is 1.0 s",
                s.0, s.1
            )));
        }
        Ok(())
    }

    fn mode(&self, kind: SegmentKind) -> (TaskCategory, Option<SubLabel>) {
        let ascent_stair = self.order == CircuitOrder::SaFirst;
        match kind {
            SegmentKind::WalkwayBefore => (TaskCategory::Lw, Some(SubLabel::Lwp)),
            SegmentKind::WalkwayAfter => (TaskCategory::Lw, Some(SubLabel::Lwf)),
            SegmentKind::Platform => (TaskCategory::Lw, None),
            SegmentKind::Stair if ascent_stair => (TaskCategory::Sa, None),
            SegmentKind::Stair => (TaskCategory::Sd, None),
            SegmentKind::Ramp if ascent_stair => (TaskCategory::Rd, None),
            SegmentKind::Ramp => (TaskCategory::Ra, None),
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.1).sum()
    }

    /// Segment active at time `t`; times past the end map to the last segment.
    fn segment_at(&self, t: f64) -> SegmentKind {
        let mut end = 0.0;
        for &(kind, d) in &self.segments {
            end += d;
            if t < end {
                return kind;
            }
        }
        self.segments.last().expect("nonempty").0
    }
}

/// Per-trial settings carried into the manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialSettings {
    pub trial_id: String,
    pub leading_leg: Leg,
    pub handrail: bool,
}

fn amplitude_table(segment: usize) -> &'static [[f64; 6]; 5] {
    match segment {
        0 | 1 => &k::FOOT_AMPLITUDE,
        2 | 3 => &k::FOREARM_AMPLITUDE,
        4 => &k::TRUNK_AMPLITUDE,
        _ => &k::PELVIS_AMPLITUDE,
    }
}

/// Half-stride phase shift of each body segment: the leading foot is in
/// phase, the trailing foot opposite, each forearm swings with the
/// contralateral foot.
fn side_shift(segment: usize, leg: Leg) -> f64 {
    let lead_left = leg == Leg::Left;
    match segment {
        0 | 3 => if lead_left { 0.0 } else { PI },
        1 | 2 => if lead_left { PI } else { 0.0 },
        _ => 0.0,
    }
}

pub fn synth_trial(
    profile: &SubjectProfile,
    circuit: &CircuitSpec,
    settings: &TrialSettings,
    trial_seed: u64,
) -> Result<Trial, SynthError> {
    circuit.validate()?;
    let mut rng = seed::rng(trial_seed, "trial");
    let frames = (circuit.duration() / FRAME_PERIOD_S).round() as usize;
    let cadence =
        profile.cadence * (1.0 + rng.random_range(-k::TRIAL_CADENCE_JITTER..=k::TRIAL_CADENCE_JITTER));
    let amp_jitter =
        1.0 + rng.random_range(-k::TRIAL_AMPLITUDE_JITTER..=k::TRIAL_AMPLITUDE_JITTER);
    let tremor_phase = rng.random_range(0.0..2.0 * PI);
    let noise = Normal::new(0.0, k::NOISE_SIGMA).expect("valid normal");
    let mut stride_phase = rng.random_range(0.0..2.0 * PI);

    let mut data = Vec::with_capacity(frames * CHANNEL_COUNT);
    let mut labels = Vec::with_capacity(frames);
    let mut sublabels = Vec::with_capacity(frames);
    for i in 0..frames {
        let t = i as f64 * FRAME_PERIOD_S;
        let kind = circuit.segment_at(t);
        let (mode, _) = circuit.mode(kind);
        let m = mode.index();
        let (label, sub) = circuit.mode(circuit.segment_at(t + k::TOE_OFF_LEAD_S));
        labels.push(label);
        sublabels.push(sub);

        let tremor = profile.tremor_amplitude
            * (2.0 * PI * profile.tremor_frequency * t + tremor_phase).sin();
        for c in 0..CHANNEL_COUNT {
            let (segment, axis) = (c / 6, c % 6);
            let mut amp = amplitude_table(segment)[m][axis] * amp_jitter;
            if settings.handrail && (segment == 2 || segment == 3) && kind == SegmentKind::Stair {
                amp *= k::HANDRAIL_FOREARM_FACTOR;
            }
            let theta = stride_phase
                + k::AXIS_PHASE[m][axis]
                + side_shift(segment, settings.leading_leg)
                + profile.phase_offsets[c];
            let wave: f64 = k::HARMONIC_WEIGHTS[m]
                .iter()
                .enumerate()
                .map(|(h, w)| w * ((h + 1) as f64 * theta).sin())
                .sum();
            let mut v = profile.gains[c] * amp * wave;
            if segment <= 3 {
                v += tremor;
            }
            v += noise.sample(&mut rng);
            data.push(quantize(v));
        }
        stride_phase += 2.0 * PI * cadence * k::MODE_FREQUENCY[m] * FRAME_PERIOD_S;
    }

    let meta = TrialMeta {
        subject_id: profile.subject_id.clone(),
        cohort: profile.cohort,
        trial_id: settings.trial_id.clone(),
        leading_leg: settings.leading_leg,
        circuit_order: circuit.order,
        handrail: settings.handrail,
    };
    Trial::new(meta, Matrix::from_vec(frames, CHANNEL_COUNT, data), labels, sublabels)
        .map_err(SynthError::Io)
}

/// Samples are stored at micro-unit resolution so files stay compact and
/// reload bit-exactly.
fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub healthy_subjects: usize,
    pub pd_subjects: usize,
    pub trials_per_subject: usize,
    pub master_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            healthy_subjects: 5,
            pd_subjects: 5,
            trials_per_subject: 10,
            master_seed: 0,
        }
    }
}

/// Trial schedule of one subject. PD subjects split trials between leading
/// legs; healthy subjects split between handrail and no handrail. Circuit
/// orders alternate in both cohorts.
fn schedule(cohort: Cohort, subject: &str, n: usize) -> Vec<(TrialSettings, CircuitOrder)> {
    (0..n)
        .map(|i| {
            let order = if i % 2 == 0 {
                CircuitOrder::SaFirst
            } else {
                CircuitOrder::RaFirst
            };
            let (leading_leg, handrail) = match cohort {
                Cohort::Pd => (if i < n.div_ceil(2) { Leg::Left } else { Leg::Right }, false),
                Cohort::Healthy => (
                    if (i / 2) % 2 == 0 { Leg::Left } else { Leg::Right },
                    i < n.div_ceil(2),
                ),
            };
            let settings = TrialSettings {
                trial_id: format!("{subject}_T{:02}", i + 1),
                leading_leg,
                handrail,
            };
            (settings, order)
        })
        .collect()
}

pub fn synth_dataset(config: &SynthConfig) -> Result<Dataset, SynthError> {
    if config.healthy_subjects + config.pd_subjects == 0 || config.trials_per_subject == 0 {
        return Err(SynthError::BadConfig(
            "need at least one subject and one trial per subject".into(),
        ));
    }
    let mut trials = Vec::new();
    for (cohort, count) in [
        (Cohort::Healthy, config.healthy_subjects),
        (Cohort::Pd, config.pd_subjects),
    ] {
        for idx in 0..count {
            let profile = make_subject(cohort, idx, config.master_seed);
            for (settings, order) in schedule(cohort, &profile.subject_id, config.trials_per_subject) {
                let trial_seed = seed::derive(config.master_seed, &format!("trial/{}", settings.trial_id));
                let circuit = CircuitSpec::sample(order, &mut seed::rng(trial_seed, "circuit"));
                trials.push(synth_trial(&profile, &circuit, &settings, trial_seed)?);
            }
        }
    }
    Ok(Dataset::new(trials))
}

/// Generate and write `manifest.csv` plus `trials/*.csv` under `out`.
pub fn write_dataset(config: &SynthConfig, out: &Path) -> Result<PathBuf, SynthError> {
    Ok(synth_dataset(config)?.save(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(leg: Leg) -> TrialSettings {
        TrialSettings {
            trial_id: "X_T01".into(),
            leading_leg: leg,
            handrail: false,
        }
    }

    #[test]
    fn profiles_are_deterministic() {
        let a = make_subject(Cohort::Pd, 2, 11);
        assert_eq!(a, make_subject(Cohort::Pd, 2, 11));
        assert_ne!(a, make_subject(Cohort::Pd, 3, 11));
        assert!(a.tremor_amplitude > 0.0);
        let h = make_subject(Cohort::Healthy, 0, 11);
        assert_eq!(h.tremor_amplitude, 0.0);
        assert!(h.gains.iter().all(|g| *g > 0.0));
    }

    #[test]
    fn tremor_frequency_distribution() {
        let freqs: Vec<f64> = (0..1000)
            .map(|i| make_subject(Cohort::Pd, i, 5).tremor_frequency)
            .collect();
        assert!(freqs.iter().all(|f| (4.0..=6.0).contains(f)));
        let mean = freqs.iter().sum::<f64>() / 1000.0;
        assert!((4.8..=5.2).contains(&mean), "mean {mean}");
    }

    #[test]
    fn circuit_validation() {
        assert!(CircuitSpec::new(CircuitOrder::SaFirst, [3.0; 5]).is_ok());
        assert!(matches!(
            CircuitSpec::new(CircuitOrder::SaFirst, [3.0, 0.9, 3.0, 3.0, 3.0]),
            Err(SynthError::BadCircuit(_))
        ));
        let mut c = CircuitSpec::new(CircuitOrder::RaFirst, [3.0; 5]).unwrap();
        c.segments.swap(1, 3);
        assert!(c.validate().is_err());
        let mut c = CircuitSpec::new(CircuitOrder::RaFirst, [3.0; 5]).unwrap();
        c.segments.remove(2);
        assert!(c.validate().is_err());
    }

    fn label_runs(trial: &Trial) -> Vec<String> {
        let mut runs: Vec<String> = Vec::new();
        for (l, s) in trial.labels().iter().zip(trial.sublabels()) {
            let name = match s {
                Some(s) => format!("{l}+{}", s.as_str()),
                None => l.to_string(),
            };
            if runs.last() != Some(&name) {
                runs.push(name);
            }
        }
        runs
    }

    #[test]
    fn label_sequences_follow_circuit() {
        let p = make_subject(Cohort::Pd, 0, 1);
        let c = CircuitSpec::new(CircuitOrder::SaFirst, [3.0; 5]).unwrap();
        assert_eq!(c.direction, Direction::Forward);
        let t = synth_trial(&p, &c, &settings(Leg::Left), 9).unwrap();
        assert_eq!(label_runs(&t), ["LW+LWp", "SA", "LW", "RD", "LW+LWf"]);
        let c = CircuitSpec::new(CircuitOrder::RaFirst, [3.0; 5]).unwrap();
        let t = synth_trial(&p, &c, &settings(Leg::Right), 9).unwrap();
        assert_eq!(label_runs(&t), ["LW+LWp", "RA", "LW", "SD", "LW+LWf"]);
    }

    #[test]
    fn labels_lead_the_signal() {
        let p = make_subject(Cohort::Healthy, 0, 1);
        let c = CircuitSpec::new(CircuitOrder::SaFirst, [3.0; 5]).unwrap();
        let t = synth_trial(&p, &c, &settings(Leg::Left), 9).unwrap();
        let first_sa = t.labels().iter().position(|l| *l == TaskCategory::Sa).unwrap();
        assert_eq!(first_sa, 280);
        assert_eq!(t.frames(), 1500);
    }

    #[test]
    fn trials_are_deterministic() {
        let p = make_subject(Cohort::Pd, 1, 3);
        let c = CircuitSpec::new(CircuitOrder::RaFirst, [2.0, 3.0, 2.0, 3.0, 2.0]).unwrap();
        let a = synth_trial(&p, &c, &settings(Leg::Left), 77).unwrap();
        assert_eq!(a, synth_trial(&p, &c, &settings(Leg::Left), 77).unwrap());
        assert_ne!(a, synth_trial(&p, &c, &settings(Leg::Left), 78).unwrap());
    }

    #[test]
    fn default_schedule_counts() {
        let sched = schedule(Cohort::Pd, "P01", 10);
        assert_eq!(sched.iter().filter(|s| s.0.leading_leg == Leg::Left).count(), 5);
        assert_eq!(sched.iter().filter(|s| s.1 == CircuitOrder::SaFirst).count(), 5);
        let sched = schedule(Cohort::Healthy, "H01", 10);
        assert_eq!(sched.iter().filter(|s| s.0.handrail).count(), 5);
    }
}
