use hvq_runner::config::{HamiltonianSpec, PropagatorChoice};
use hvq_runner::{parse_config, ScenarioKind};

const MINIMAL: &str = r#"
scenario = "evolve-quantum"
name = "free"

[grid]
axes = [{ n = 128, lower = -10.0, upper = 10.0 }]

[hamiltonian]
kind = "free"

[initial]
packets = [{ center = [0.0], width = [1.0] }]

[time]
t_end = 0.1
dt = 0.01
"#;

#[test]
fn minimal_config_fills_defaults() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::EvolveQuantum);
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.hbar, 1.0);
    assert_eq!(cfg.output.every, 1);
    assert!(cfg.output.snapshots);
    assert_eq!(cfg.hamiltonian, Some(HamiltonianSpec::Free { mass: 1.0 }));
    let time = cfg.time.as_ref().unwrap();
    assert_eq!(time.propagator, PropagatorChoice::CrankNicolson);
    assert_eq!(time.reference_dt, time.dt);
    let p = &cfg.initial.as_ref().unwrap()[0];
    assert_eq!(p.amplitude, [1.0, 0.0]);
    assert_eq!(p.k, vec![0.0]);
    assert!(cfg.checks.is_empty());
}

#[test]
fn round_trip_through_toml() {
    let cfg = parse_config(MINIMAL).unwrap();
    let again = parse_config(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, again);
    for file in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios")).unwrap() {
        let path = file.unwrap().path();
        let cfg = parse_config(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg, "{}", path.display());
    }
}

#[test]
fn unnormalized_amplitudes_name_the_section() {
    let text = MINIMAL.replace(
        "packets = [{ center = [0.0], width = [1.0] }]",
        "packets = [{ amplitude = [0.6, 0.0], center = [0.0], width = [1.0] }, { amplitude = [0.6, 0.0], center = [2.0], width = [1.0] }]",
    );
    let err = parse_config(&text).unwrap_err();
    assert_eq!(err.issues.len(), 1);
    assert_eq!(err.issues[0].section, "initial");
    assert!(err.issues[0].message.contains("not normalized"), "{}", err.issues[0].message);
    assert!(err.to_string().contains("[initial]"));
}

#[test]
fn every_problem_is_reported() {
    let text = MINIMAL
        .replace("kind = \"free\"", "kind = \"free\"\nmas = 2.0")
        .replace("dt = 0.01", "dt = -0.01")
        .replace("name = \"free\"", "name = \"free\"\nseed = -3");
    let err = parse_config(&text).unwrap_err();
    let sections: Vec<&str> = err.issues.iter().map(|i| i.section.as_str()).collect();
    assert!(err.issues.iter().any(|i| i.section == "hamiltonian" && i.message.contains("unknown key `mas`")), "{err}");
    assert!(sections.contains(&"time"), "{err}");
    assert!(sections.contains(&"top level"), "{err}");
}

#[test]
fn sections_must_fit_the_scenario() {
    let text = format!("{MINIMAL}\n[pilot]\ntrajectories = 10\nmax_dt = 0.01\n");
    let err = parse_config(&text).unwrap_err();
    assert!(err.to_string().contains("section `pilot` is not used"), "{err}");
    let err = parse_config(&MINIMAL.replace("[time]\nt_end = 0.1\ndt = 0.01\n", "")).unwrap_err();
    assert!(err.to_string().contains("missing required key `time`"), "{err}");
}

#[test]
fn unknown_checks_and_kinds_are_rejected() {
    let err = parse_config(&format!("{MINIMAL}\n[checks]\nnorm_drift = 1e-8\nequivariance_l1 = 0.05\n")).unwrap_err();
    assert!(err.to_string().contains("unknown key `equivariance_l1`"), "{err}");
    let err = parse_config(&MINIMAL.replace("evolve-quantum", "evolve-sideways")).unwrap_err();
    assert!(err.to_string().contains("unknown scenario kind"), "{err}");
    assert!(parse_config("scenario = [").is_err());
}

#[test]
fn hamiltonian_must_fit_the_grid() {
    let text = MINIMAL.replace("kind = \"free\"", "kind = \"measure-position\"\ng = 1.0");
    let err = parse_config(&text).unwrap_err();
    assert!(err.issues.iter().any(|i| i.section == "hamiltonian"), "{err}");
}

#[test]
fn flip_span_must_be_whole_macro_steps() {
    let text = r#"
scenario = "hv-flip"
name = "flip"
[grid]
axes = [{ n = 64, lower = -5.0, upper = 5.0, boundary = "dirichlet" }]
[hamiltonian]
kind = "harmonic"
omega = 1.0
center = [0.0]
[initial]
packets = [{ center = [0.0], width = [1.0] }]
[time]
t_end = 0.125
dt = 1e-3
[hv]
n_micro = [4]
dt_macro = 0.05
"#;
    let err = parse_config(text).unwrap_err();
    assert!(err.to_string().contains("whole number"), "{err}");
}
