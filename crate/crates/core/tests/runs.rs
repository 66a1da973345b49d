use std::fs;

use morawetz_lab::propagator::Abort;

use morawetz_lab::io::{
    read_snapshot, run_command, Command, ExperimentConfig, RunManifest, RunOptions, RunStatus, MANIFEST_FILE,
    TIMESERIES_HEADER,
};

const FREE_1D: &str = "[grid]\ndim = 1\nn = 128\nhalf_width = 16\n\
    [integrator]\ndt = 1e-2\nt_final = 0.5\nsnapshot_stride = 10\nnonlinear = false\n\
    [output]\nsnapshots = true\n";

// Small box: the spreading Gaussian reaches |x| >= 0.9 L well before t = 2.
const TIGHT_BOX: &str = "[grid]\ndim = 1\nn = 128\nhalf_width = 8\n\
    [integrator]\ndt = 1e-2\nt_final = 2\nsnapshot_stride = 10\n";

fn run(text: &str, command: Command) -> (tempfile::TempDir, morawetz_lab::io::CommandOutcome) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(text).unwrap();
    let opts = RunOptions {
        out: Some(dir.path().to_path_buf()),
        seed: Some(7),
    };
    let outcome = run_command(command, &cfg, &opts).unwrap();
    (dir, outcome)
}

#[test]
fn simulate_writes_checked_artifacts() {
    let (dir, outcome) = run(FREE_1D, Command::Simulate);
    assert_eq!(outcome.status, RunStatus::Ok);
    let manifest = RunManifest::load(dir.path()).unwrap();
    assert_eq!(manifest, outcome.manifest);
    assert!(manifest.verify(dir.path()).is_empty());
    assert_eq!(manifest.seed, 7);

    let ts = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = ts.lines();
    assert_eq!(lines.next(), Some(TIMESERIES_HEADER));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row.len(), 13);
        assert!((row[1] / rows[0][1] - 1.0).abs() < 1e-12, "mass drifted: {row:?}");
    }

    let snap = read_snapshot(&dir.path().join("snapshots/snap_00005.nlsf")).unwrap();
    assert_eq!(snap.grid().n(), 128);
    assert!(snap.is_finite());
}

#[test]
fn tail_overflow_aborts_with_partial_manifest() {
    let (dir, outcome) = run(TIGHT_BOX, Command::Simulate);
    assert_eq!(outcome.status, RunStatus::NumericalAbort);
    assert_eq!(outcome.exit_code(), 3);
    let manifest = RunManifest::load(dir.path()).unwrap();
    match manifest.abort {
        Some(Abort::TailOverflow { time, tail, threshold }) => {
            assert!(time > 0.0 && time < 2.0);
            assert!(tail > threshold);
        }
        other => panic!("expected a tail overflow, got {other:?}"),
    }
    assert!(manifest.files.iter().any(|f| f.path == "timeseries.csv"));
    assert!(manifest.verify(dir.path()).is_empty());
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let text = format!("{FREE_1D}[initial]\nnoise = 0.05\n");
    let (a, _) = run(&text, Command::Simulate);
    let (b, _) = run(&text, Command::Simulate);
    for name in ["timeseries.csv", "snapshots/snap_00005.nlsf"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    // Only the echoed output directory differs between the manifests.
    let ma = RunManifest::load(a.path()).unwrap();
    let mb = RunManifest::load(b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::parse(FREE_1D).unwrap();
    cfg.integrator.dt = 0.3;
    let opts = RunOptions {
        out: Some(dir.path().to_path_buf()),
        seed: None,
    };
    assert!(run_command(Command::Simulate, &cfg, &opts).is_err());
    assert!(!dir.path().join(MANIFEST_FILE).exists());
}

#[test]
fn exponents_command_needs_no_simulation() {
    let (dir, outcome) = run("[grid]\ndim = 3\nn = 16\n", Command::Exponents);
    assert_eq!(outcome.status, RunStatus::Ok);
    assert!(outcome.lines.iter().any(|l| l.contains("8/3")), "{:?}", outcome.lines);
    assert!(dir.path().join("exponents.json").exists());
}
