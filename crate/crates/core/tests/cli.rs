use std::path::Path;
use std::process::{Command, Output};

fn locomode(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locomode"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn locomode")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generate(dir: &Path) {
    let o = locomode(
        &["generate", "--subjects-healthy", "2", "--subjects-pd", "2", "--trials-per-subject", "2", "--seed", "3", "--out", "data"],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_dataset_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "dataset_dir = nowhere\noutput_dir = out\nmaster_seed = 0\n").unwrap();
    let o = locomode(&["run", "--config", "run.conf"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
    assert!(!dir.path().join("out").join("summary.txt").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "dataset_dir = data\noutput_dir = out\nepochz = 3\n").unwrap();
    let o = locomode(&["run", "--config", "run.conf"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("epochz"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = locomode(&["run", "--config", "absent.conf"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("absent.conf"));
}

#[test]
fn inspect_reports_composition() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let o = locomode(&["inspect", "data"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("healthy: 2 subject(s), 4 trial(s)"), "{text}");
    assert!(text.contains("pd: 2 subject(s), 4 trial(s)"), "{text}");
    assert!(text.contains("windows: RA="), "{text}");

    let o = locomode(&["inspect", "data/missing.csv"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn run_then_report_rerenders_the_same_grid() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    std::fs::write(
        dir.path().join("run.conf"),
        "dataset_dir = data\noutput_dir = out\nmaster_seed = 0\nparadigms = si1, sd\nclassifiers = lda\nsources = feet\n",
    )
    .unwrap();
    let o = locomode(&["run", "--config", "run.conf"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = stdout(&o);
    assert!(grid.contains("si1") && grid.contains("sd"), "{grid}");

    let out = dir.path().join("out");
    for name in ["si1_lda_feet", "sd_lda_feet"] {
        for file in ["report.csv", "confusion.csv", "fold_confusions.csv", "folds.csv", "summary.txt"] {
            assert!(out.join(name).join(file).is_file(), "{name}/{file}");
        }
    }
    assert!(!out.join("si2_lda_feet").exists());
    assert_eq!(std::fs::read_to_string(out.join("summary.txt")).unwrap(), grid);

    let o = locomode(&["report", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).ends_with(&grid));

    let o = locomode(&["report", "--out", "data"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    std::fs::write(
        dir.path().join("run.conf"),
        "dataset_dir = data\noutput_dir = out\nmaster_seed = 0\nparadigms = si1\nclassifiers = lstm\nsources = feet\nepochs = 1\nhidden_dim = 4\n",
    )
    .unwrap();
    let model = |out: &str, seed: &str| {
        let o = locomode(&["run", "--config", "run.conf", "--out", out, "--seed", seed], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let models = dir.path().join(out).join("si1_lstm_feet").join("models");
        let entry = std::fs::read_dir(models).unwrap().next().unwrap().unwrap();
        std::fs::read_to_string(entry.path()).unwrap()
    };
    let a = model("a", "1");
    assert_eq!(a, model("b", "1"));
    assert_ne!(a, model("c", "2"));
}
