use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use locomode::corpus::{save_trial, select_source, CircuitOrder, Cohort, Leg, SignalSource};
use locomode::features::extract_from_matrix;
use locomode::synthgen::{make_subject, synth_trial, CircuitSpec, TrialSettings};
use locomode::{LdaModel, LstmModel, Matrix, TaskCategory};
use locomode_ffi::*;

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = lm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn ramp(frames: usize, channels: usize) -> Vec<f64> {
    (0..frames * channels)
        .map(|i| ((i * 37) % 101) as f64 / 10.0 - 5.0)
        .collect()
}

#[test]
fn version_and_window_count() {
    let v = unsafe { CStr::from_ptr(lm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert_eq!(lm_window_count(49), 0);
    assert_eq!(lm_window_count(50), 1);
    assert_eq!(lm_window_count(124), 3);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/locomode.h"))
        .expect("generated header");
    for name in [
        "lm_last_error",
        "lm_extract_features",
        "lm_f1_breakdown",
        "lm_lda_load",
        "lm_lda_predict",
        "lm_lda_scores",
        "lm_lda_free",
        "lm_lstm_load",
        "lm_lstm_probabilities",
        "lm_lstm_predict",
        "lm_lstm_free",
        "lm_trial_load",
        "lm_trial_signal",
        "lm_trial_labels",
        "lm_trial_free",
        "typedef struct LmLda LmLda",
        "LM_STATUS_SHAPE_MISMATCH = 5",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn f1_from_counts() {
    let counts: [u64; 30] = [
        284, 0, 73, 0, 16, //
        10, 289, 0, 68, 40, //
        24, 0, 308, 0, 1, //
        0, 9, 0, 275, 0, //
        69, 92, 12, 4, 88, //
        261, 40, 49, 60, 408,
    ];
    let (mut p, mut r, mut f) = ([0.0; 6], [0.0; 6], [0.0; 6]);
    let s = unsafe { lm_f1_breakdown(counts.as_ptr(), p.as_mut_ptr(), r.as_mut_ptr(), f.as_mut_ptr()) };
    assert_eq!(s, LmStatus::Ok);
    let (prec, rec) = (284.0 / 648.0, 284.0 / 373.0);
    assert!((f[0] - 2.0 * prec * rec / (prec + rec)).abs() < 1e-12);
    assert!((p[0] - prec).abs() < 1e-12 && (r[0] - rec).abs() < 1e-12);
    let s = unsafe { lm_f1_breakdown(counts.as_ptr(), ptr::null_mut(), ptr::null_mut(), f.as_mut_ptr()) };
    assert_eq!(s, LmStatus::Ok);
    assert_eq!(unsafe { lm_f1_breakdown(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, LmStatus::NullPointer);
}

#[test]
fn features_match_core_and_check_shapes() {
    let data = ramp(50, 3);
    let mut out = [0.0; 18];
    let s = unsafe { lm_extract_features(data.as_ptr(), 50, 3, out.as_mut_ptr(), 18) };
    assert_eq!(s, LmStatus::Ok);
    let expected = extract_from_matrix(&Matrix::from_vec(50, 3, data.clone())).unwrap();
    assert_eq!(&out[..], expected.as_slice());

    let s = unsafe { lm_extract_features(data.as_ptr(), 50, 3, out.as_mut_ptr(), 12) };
    assert_eq!(s, LmStatus::ShapeMismatch);
    assert!(last_error().contains("out_len"));
    let s = unsafe { lm_extract_features(ptr::null(), 50, 3, out.as_mut_ptr(), 18) };
    assert_eq!(s, LmStatus::NullPointer);
    let s = unsafe { lm_extract_features(data.as_ptr(), 1, 3, out.as_mut_ptr(), 18) };
    assert_eq!(s, LmStatus::InvalidArgument);
}

#[test]
fn lda_handle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![(i % 5) as f64 * 3.0 + (i as f64 * 0.37).sin(), (i as f64).cos()])
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let labels: Vec<TaskCategory> = (0..40).map(|i| TaskCategory::ALL[i % 5]).collect();
    let model = LdaModel::fit_rows(&refs, &labels, 1e-6).unwrap();
    let path = dir.path().join("m.lda");
    model.save(&path).unwrap();

    let mut h: *mut LmLda = ptr::null_mut();
    assert_eq!(unsafe { lm_lda_load(cpath(&path).as_ptr(), &mut h) }, LmStatus::Ok);
    assert_eq!(unsafe { lm_lda_feature_dim(h) }, 2);
    for (row, _) in rows.iter().zip(&labels) {
        let mut cat = -1;
        let mut scores = [0.0; 5];
        unsafe {
            assert_eq!(lm_lda_predict(h, row.as_ptr(), 2, &mut cat), LmStatus::Ok);
            assert_eq!(lm_lda_scores(h, row.as_ptr(), 2, scores.as_mut_ptr()), LmStatus::Ok);
        }
        assert_eq!(cat as usize, model.predict(row).unwrap().index());
        assert_eq!(scores, model.scores(row).unwrap());
    }
    let mut cat = 0;
    assert_eq!(unsafe { lm_lda_predict(h, rows[0].as_ptr(), 3, &mut cat) }, LmStatus::ShapeMismatch);
    unsafe { lm_lda_free(h) };
    unsafe { lm_lda_free(ptr::null_mut()) };

    let mut h: *mut LmLda = ptr::null_mut();
    let missing = dir.path().join("absent.lda");
    assert_eq!(unsafe { lm_lda_load(cpath(&missing).as_ptr(), &mut h) }, LmStatus::Io);
    assert!(last_error().contains("absent.lda"));
    let junk = dir.path().join("junk.lda");
    std::fs::write(&junk, "not a model\n").unwrap();
    assert_eq!(unsafe { lm_lda_load(cpath(&junk).as_ptr(), &mut h) }, LmStatus::Format);
    assert!(h.is_null());
    assert_eq!(unsafe { lm_lda_load(ptr::null(), &mut h) }, LmStatus::NullPointer);
}

#[test]
fn lstm_handle_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = LstmModel::init(3, 6, 5, 9);
    let path = dir.path().join("m.lstm");
    model.save(&path).unwrap();
    let mut h: *mut LmLstm = ptr::null_mut();
    assert_eq!(unsafe { lm_lstm_load(cpath(&path).as_ptr(), &mut h) }, LmStatus::Ok);
    assert_eq!(unsafe { lm_lstm_input_dim(h) }, 3);

    let window = ramp(50, 3);
    let mut probs = [0.0; 5];
    let mut cat = -1;
    unsafe {
        assert_eq!(lm_lstm_probabilities(h, window.as_ptr(), 50, 3, probs.as_mut_ptr(), 5), LmStatus::Ok);
        assert_eq!(lm_lstm_predict(h, window.as_ptr(), 50, 3, &mut cat), LmStatus::Ok);
    }
    let m = Matrix::from_vec(50, 3, window.clone());
    assert_eq!(probs.to_vec(), model.forward(&m).unwrap());
    assert_eq!(cat as usize, model.predict(&m).unwrap().index());
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    unsafe {
        assert_eq!(lm_lstm_probabilities(h, window.as_ptr(), 50, 3, probs.as_mut_ptr(), 4), LmStatus::ShapeMismatch);
        assert_eq!(lm_lstm_predict(h, window.as_ptr(), 25, 6, &mut cat), LmStatus::ShapeMismatch);
        lm_lstm_free(h);
    }
    assert_eq!(unsafe { lm_lstm_input_dim(ptr::null()) }, 0);
}

#[test]
fn trial_handle_exposes_signal_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let profile = make_subject(Cohort::Pd, 0, 4);
    let circuit = CircuitSpec::new(CircuitOrder::RaFirst, [2.0; 5]).unwrap();
    let settings = TrialSettings {
        trial_id: "P01_T01".into(),
        leading_leg: Leg::Right,
        handrail: false,
    };
    let trial = synth_trial(&profile, &circuit, &settings, 11).unwrap();
    let path = dir.path().join("P01_T01.csv");
    save_trial(&trial, &path).unwrap();

    let mut h: *mut LmTrial = ptr::null_mut();
    assert_eq!(unsafe { lm_trial_load(cpath(&path).as_ptr(), &mut h) }, LmStatus::Ok);
    let frames = unsafe { lm_trial_frames(h) };
    assert_eq!(frames, trial.frames());

    let mut feet = vec![0.0; frames * 12];
    let s = unsafe { lm_trial_signal(h, LmSource::Feet, feet.as_mut_ptr(), feet.len()) };
    assert_eq!(s, LmStatus::Ok);
    assert_eq!(feet, select_source(&trial, SignalSource::Feet).as_slice());
    let s = unsafe { lm_trial_signal(h, LmSource::Fusion, feet.as_mut_ptr(), feet.len()) };
    assert_eq!(s, LmStatus::ShapeMismatch);

    let mut labels = vec![-1; frames];
    assert_eq!(unsafe { lm_trial_labels(h, labels.as_mut_ptr(), frames) }, LmStatus::Ok);
    let expected: Vec<i32> = trial.labels().iter().map(|l| l.index() as i32).collect();
    assert_eq!(labels, expected);
    unsafe { lm_trial_free(h) };

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,label\n0.00,LW\n").unwrap();
    let mut h: *mut LmTrial = ptr::null_mut();
    assert_eq!(unsafe { lm_trial_load(cpath(&bad).as_ptr(), &mut h) }, LmStatus::Format);
    assert!(!last_error().is_empty());
}
