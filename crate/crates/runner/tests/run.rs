use std::fs;

use hvq_runner::manifest::RunManifest;
use hvq_runner::{parse_config, run, RunOptions, RunStatus, MANIFEST_FILE, SENTINEL_FILE};

const PILOT: &str = r#"
scenario = "pilot-wave"
name = "pilot"
seed = 3

[grid]
axes = [{ n = 128, lower = -10.0, upper = 10.0 }]

[hamiltonian]
kind = "free"

[initial]
packets = [{ center = [0.0], width = [1.0], k = [0.5] }]

[time]
t_end = 0.2
dt = 0.02
propagator = "exact"

[pilot]
trajectories = 500
bin_factor = 4
max_dt = 0.01

[checks]
equivariance_l1 = 0.5
"#;

const OVERLAP: &str = r#"
scenario = "measure"
name = "overlap"

[[experiment]]
name = "close"
kind = "momentum"
g = 1.0
t_span = 1.0
trajectories = 100
snapshots = 4
components = [
    { amplitude = [0.7071067811865476, 0.0], basis = "plane-wave", k = -1.0, window = 2.0 },
    { amplitude = [0.7071067811865476, 0.0], basis = "plane-wave", k = 1.0, window = 2.0 },
]
pointer = { center = 0.0, width = 0.5 }
system_axis = { n = 128, lower = -12.8, upper = 12.8 }
pointer_axis = { n = 64, lower = -8.0, upper = 8.0 }

[checks]
born_error = 0.02
"#;

fn manifest_text(m: &RunManifest) -> toml::Table {
    toml::from_str(&fs::read_to_string(m.out_dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn same_seed_gives_identical_outputs() {
    let cfg = parse_config(PILOT).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(&cfg, &RunOptions::new(a.path())).unwrap();
    let mb = run(&cfg, &RunOptions::new(b.path())).unwrap();
    assert!(ma.passed(), "{:?}", ma.error);
    assert_eq!(ma.files, mb.files);
    for f in ["equivariance.csv", "trajectories.csv"] {
        assert_eq!(fs::read(ma.out_dir.join(f)).unwrap(), fs::read(mb.out_dir.join(f)).unwrap(), "{f}");
    }
    let other = run(&cfg, &RunOptions { out_root: b.path().join("reseeded"), seed: Some(4) }).unwrap();
    assert_eq!(other.config.seed, 4);
    assert_ne!(
        fs::read(ma.out_dir.join("trajectories.csv")).unwrap(),
        fs::read(other.out_dir.join("trajectories.csv")).unwrap()
    );
}

#[test]
fn manifest_indexes_outputs_and_clears_the_sentinel() {
    let cfg = parse_config(PILOT).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pilot");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(MANIFEST_FILE), "stale").unwrap();
    let m = run(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert!(!out.join(SENTINEL_FILE).exists());
    let doc = manifest_text(&m);
    assert_eq!(doc["run"]["status"].as_str(), Some("pass"));
    assert_eq!(doc["run"]["seed"].as_integer(), Some(3));
    assert!(doc["metrics"]["equivariance_l1"].as_float().unwrap() < 0.5);
    let files = doc["file"].as_array().unwrap();
    assert_eq!(files.len(), m.files.len());
    for f in files {
        let path = out.join(f["path"].as_str().unwrap());
        let bytes = fs::read(&path).unwrap();
        assert_eq!(f["bytes"].as_integer(), Some(bytes.len() as i64));
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
    }
    // the embedded configuration reproduces the run
    let embedded = toml::to_string(doc["config"].as_table().unwrap()).unwrap();
    assert_eq!(parse_config(&embedded).unwrap(), cfg);
}

#[test]
fn failed_check_marks_the_run() {
    let cfg = parse_config(&PILOT.replace("equivariance_l1 = 0.5", "equivariance_l1 = 1e-9")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(m.status, RunStatus::Fail);
    assert!(!m.check("equivariance_l1").unwrap().passed);
    assert_eq!(manifest_text(&m)["run"]["status"].as_str(), Some("fail"));
}

#[test]
fn overlapping_pointers_are_recorded_as_an_error() {
    let cfg = parse_config(OVERLAP).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(m.status, RunStatus::Error);
    let err = m.error.as_deref().unwrap();
    assert!(err.contains("measure scenario `overlap`"), "{err}");
    assert!(err.contains("overlap: gap/width ratio 4 is below 8"), "{err}");
    assert!(m.check("born_error").unwrap().value.is_nan());
    let doc = manifest_text(&m);
    assert_eq!(doc["run"]["status"].as_str(), Some("error"));
    assert!(!m.out_dir.join(SENTINEL_FILE).exists());
}

#[test]
fn output_dir_override() {
    let cfg = parse_config(&PILOT.replace("seed = 3", "seed = 3\noutput_dir = \"elsewhere\"")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run(&cfg, &RunOptions::new(dir.path())).unwrap();
    assert_eq!(m.out_dir, dir.path().join("elsewhere"));
    assert!(m.out_dir.join(MANIFEST_FILE).exists());
}
