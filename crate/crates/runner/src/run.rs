use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use hvq_core::classical::{hj_step, ClassicalEnsembleState};
use hvq_core::field::{gradient, write_field, Axis, ComplexField, Grid, RealField};
use hvq_core::hv::{
    antithetic_step, ball_surface_vector, branch_continuity_rhs, check_phase_symmetry, evolve_branches, flip_replicas,
    fluctuation_identity_residual, madelung_continuity_rhs, replica_rng, sample_lambdas, BranchMode, FlipOptions,
    LambdaDistribution,
};
use hvq_core::measure::{quantum_vs_classical_position, repeated_pointer_measurement, run_measurement, MeasurementKind};
use hvq_core::pilot::{equivariance_test, GuidedEnsemble};
use hvq_core::quantizer::{ordering_gap, ordering_gap_interior, ClassicalHamiltonian};
use hvq_core::quantum::{
    evolve_madelung, madelung_energy, madelung_evolve_to, phase_gradient, to_madelung, ObservableSeries, Propagator,
    PropagatorKind,
};
use hvq_core::{Cplx, Error};
use rand::Rng;

use crate::config::{HamiltonianSpec, PacketSpec, PropagatorChoice, ScenarioConfig, ScenarioKind};
use crate::manifest::{CheckRecord, Outputs, RunManifest, RunStatus, MANIFEST_FILE, SENTINEL_FILE};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "HVQUANT_OUT";

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_root: PathBuf,
    /// Replaces the configured seed.
    pub seed: Option<u64>,
}

impl RunOptions {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        Self { out_root: out_root.into(), seed: None }
    }

    /// `--out`, then `HVQUANT_OUT`, then `./out`.
    pub fn resolve_root(cli: Option<PathBuf>) -> PathBuf {
        cli.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Metrics, warnings and the simulated time reached so far.
#[derive(Default)]
struct Report {
    metrics: BTreeMap<String, f64>,
    warnings: Vec<String>,
    clock: Cell<f64>,
}

impl Report {
    fn set(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    /// Keeps the largest value seen under `name`.
    fn worst(&mut self, name: &str, v: f64) {
        let e = self.metrics.entry(name.to_string()).or_insert(v);
        if v > *e || v.is_nan() {
            *e = v;
        }
    }

    fn tick(&self, t: f64) {
        self.clock.set(t);
    }
}

type Res<T> = hvq_core::Result<T>;

/// Executes `cfg` and writes its outputs and manifest under the output root.
/// Module errors are recorded in the manifest; only I/O problems with the
/// output directory itself are returned as errors.
pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> io::Result<RunManifest> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts.out_root.join(cfg.output_dir.as_deref().unwrap_or(&cfg.name));
    fs::create_dir_all(&dir)?;
    match fs::remove_file(dir.join(MANIFEST_FILE)) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
        _ => {}
    }
    fs::write(dir.join(SENTINEL_FILE), format!("{} {}\n", cfg.scenario.as_str(), cfg.name))?;

    let started = Instant::now();
    let mut outputs = Outputs::new(&dir);
    let mut report = Report::default();
    let outcome = execute(&cfg, &mut outputs, &mut report);
    let wall_time = started.elapsed().as_secs_f64();

    let (status, error) = match outcome {
        Ok(()) => (RunStatus::Pass, None),
        Err(e) => (
            RunStatus::Error,
            Some(format!(
                "{} scenario `{}` failed at t = {:e}: {e}",
                cfg.scenario.as_str(),
                cfg.name,
                report.clock.get()
            )),
        ),
    };
    let checks: Vec<CheckRecord> = cfg
        .checks
        .iter()
        .map(|(name, tol)| CheckRecord::evaluate(name, report.metrics.get(name).copied(), *tol))
        .collect();
    let status = if status == RunStatus::Pass && checks.iter().any(|c| !c.passed) { RunStatus::Fail } else { status };
    let manifest = RunManifest {
        config: cfg,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time,
        status,
        error,
        warnings: report.warnings,
        metrics: report.metrics,
        checks,
        files: outputs.into_records(),
        out_dir: dir.clone(),
    };
    manifest.write_atomic()?;
    fs::remove_file(dir.join(SENTINEL_FILE))?;
    Ok(manifest)
}

fn execute(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    match cfg.scenario {
        ScenarioKind::EvolveQuantum => evolve_quantum(cfg, out, rep),
        ScenarioKind::EvolveClassical => evolve_classical(cfg, out, rep),
        ScenarioKind::EvolveMadelung => evolve_madelung_scenario(cfg, out, rep),
        ScenarioKind::HvBranches => hv_branches(cfg, out, rep),
        ScenarioKind::HvFlip => hv_flip(cfg, out, rep),
        ScenarioKind::PilotWave => pilot_wave(cfg, out, rep),
        ScenarioKind::Measure => measure(cfg, out, rep),
        ScenarioKind::OrderingReport => ordering_report(cfg, out, rep),
    }
}

fn missing(section: &str) -> Error {
    Error::Usage(format!("section `{section}` is required"))
}

fn grid_of(cfg: &ScenarioConfig) -> Res<Arc<Grid<f64>>> {
    Ok(Arc::new(Grid::new(cfg.grid_axes()?)?))
}

/// Superposition of Gaussian packets, normalized on the grid.
pub fn initial_state(packets: &[PacketSpec], grid: &Arc<Grid<f64>>) -> Res<ComplexField<f64>> {
    ComplexField::from_fn(grid.clone(), |q| {
        packets.iter().fold(Cplx::new(0.0, 0.0), |acc, p| {
            let mut amp = 1.0;
            let mut phase = 0.0;
            for k in 0..q.len() {
                let x = q[k] - p.center[k];
                amp *= (-(x * x) / (4.0 * p.width[k] * p.width[k])).exp();
                phase += p.k[k] * q[k];
            }
            acc + Cplx::new(p.amplitude[0], p.amplitude[1]) * Cplx::from_polar(amp, phase)
        })
    })?
    .normalized()
}

/// Number of uniform steps of at most `dt` covering `span`.
fn steps_for(span: f64, dt: f64) -> (usize, f64) {
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

fn l2(a: &RealField<f64>, b: &RealField<f64>) -> Res<f64> {
    let d = a.sub(b)?;
    Ok(d.mul(&d)?.integrate().sqrt())
}

fn save(out: &mut Outputs, rel: &str, f: &RealField<f64>) -> Res<()> {
    out.emit(rel, |w| write_field(f, w))
}

fn save_complex(out: &mut Outputs, rel: &str, f: &ComplexField<f64>) -> Res<()> {
    out.emit(rel, |w| write_field(f, w))
}

fn evolve_quantum(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let hspec = cfg.hamiltonian.as_ref().ok_or_else(|| missing("hamiltonian"))?;
    let h = hspec.to_hamiltonian();
    let time = cfg.time.as_ref().ok_or_else(|| missing("time"))?;
    let packets = cfg.initial.as_ref().ok_or_else(|| missing("initial"))?;
    let kind = match time.propagator {
        PropagatorChoice::CrankNicolson => PropagatorKind::CrankNicolson,
        PropagatorChoice::Exact => PropagatorKind::ExactSpectral,
    };
    let prop = Propagator::new(&h, &grid, cfg.hbar, kind)?;
    let mut psi = initial_state(packets, &grid)?;
    let (steps, dt) = steps_for(time.t_end, time.dt);
    let mut series = ObservableSeries::new();
    series.record(&h, &psi, 0.0, 0, cfg.hbar)?;
    let mut t = 0.0;
    for step in 1..=steps {
        psi = prop.propagate_at(&psi, t, dt)?;
        t = step as f64 * dt;
        rep.tick(t);
        if step % cfg.output.every == 0 || step == steps {
            series.record(&h, &psi, t, 0, cfg.hbar)?;
        }
    }
    let rows = &series.rows;
    let e0 = rows[0].energy;
    let half = 0.5 * cfg.hbar;
    rep.set("norm_drift", rows.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max));
    rep.set("energy_drift", rows.iter().map(|r| ((r.energy - e0) / e0).abs()).fold(0.0, f64::max));
    let products: Vec<f64> = rows.iter().map(|r| r.sigma_q * r.sigma_p / half).collect();
    rep.set("heisenberg_floor", products.iter().map(|p| (1.0 - p).max(0.0)).fold(0.0, f64::max));
    rep.set("min_uncertainty", (products[0] - 1.0).abs());
    rep.set("final_time", t);
    if let (HamiltonianSpec::Free { mass }, [p]) = (hspec, packets.as_slice()) {
        let s0 = p.width[0];
        let law = |t: f64| s0 * (1.0 + (cfg.hbar * t / (2.0 * mass * s0 * s0)).powi(2)).sqrt();
        let err = rows.iter().map(|r| ((r.sigma_q - law(r.t)) / law(r.t)).abs()).fold(0.0, f64::max);
        rep.set("width_error", err);
    }
    out.emit("observables.csv", |w| series.write_csv(w))?;
    if cfg.output.snapshots {
        save_complex(out, "psi_final.bin", &psi)?;
    }
    Ok(())
}

fn evolve_classical(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let h = cfg.hamiltonian.as_ref().ok_or_else(|| missing("hamiltonian"))?.to_hamiltonian();
    let time = cfg.time.as_ref().ok_or_else(|| missing("time"))?;
    let psi = initial_state(cfg.initial.as_ref().ok_or_else(|| missing("initial"))?, &grid)?;
    let st = to_madelung(&psi, cfg.hbar)?;
    let mut state = ClassicalEnsembleState::new(st.s, st.rho, 0.0)?;
    let (steps, dt) = steps_for(time.t_end, time.dt);
    let mut csv = String::from("t,mass,mean_q1\n");
    let row = |s: &ClassicalEnsembleState<f64>, csv: &mut String| -> Res<f64> {
        let mass = s.rho.integrate();
        let q1 = RealField::from_fn(grid.clone(), |q| q[0])?;
        let mean = s.rho.mul(&q1)?.integrate() / mass;
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", s.t, mass, mean));
        Ok(mass)
    };
    let mut drift: f64 = (row(&state, &mut csv)? - 1.0).abs();
    for step in 1..=steps {
        state = hj_step(&h, &state, dt)?;
        rep.tick(state.t);
        if step % cfg.output.every == 0 || step == steps {
            drift = drift.max((row(&state, &mut csv)? - 1.0).abs());
        }
    }
    rep.set("mass_drift", drift);
    out.write("ensemble.csv", csv.as_bytes())?;
    if cfg.output.snapshots {
        save(out, "rho_final.bin", &state.rho)?;
        save(out, "s_final.bin", &state.s)?;
    }
    Ok(())
}

fn evolve_madelung_scenario(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let hspec = cfg.hamiltonian.as_ref().ok_or_else(|| missing("hamiltonian"))?;
    let em = hspec.em().ok_or_else(|| Error::Usage("madelung evolution needs a charged-particle hamiltonian".into()))?;
    let time = cfg.time.as_ref().ok_or_else(|| missing("time"))?;
    let psi0 = initial_state(cfg.initial.as_ref().ok_or_else(|| missing("initial"))?, &grid)?;
    let mut st = to_madelung(&psi0, cfg.hbar)?;
    let (steps, dt) = steps_for(time.t_end, time.dt);
    let mut csv = String::from("t,mass,energy\n");
    let record = |st: &hvq_core::quantum::MadelungState<f64>, csv: &mut String| -> Res<f64> {
        let mass = st.rho.integrate();
        let e = madelung_energy(&em, st, cfg.hbar)?;
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", st.t, mass, e));
        Ok(mass)
    };
    let mut drift: f64 = (record(&st, &mut csv)? - 1.0).abs();
    for step in 1..=steps {
        st = evolve_madelung(&em, &st, dt, cfg.hbar)?;
        rep.tick(st.t);
        if step % cfg.output.every == 0 || step == steps {
            drift = drift.max((record(&st, &mut csv)? - 1.0).abs());
        }
    }
    rep.set("mass_drift", drift);
    let prop = Propagator::new(&hspec.to_hamiltonian(), &grid, cfg.hbar, PropagatorKind::CrankNicolson)?;
    let psi = prop.evolve(&psi0, time.t_end, time.reference_dt)?;
    let rho = psi.norm_sqr();
    rep.set("rho_l2", l2(&st.rho, &rho)?);
    let mut ds = 0.0;
    for axis in 0..grid.rank() {
        let d = gradient(&st.s, axis)?.sub(&phase_gradient(&psi, axis, cfg.hbar)?)?;
        ds += d.mul(&d)?.mul(&rho)?.integrate();
    }
    rep.set("ds_l2", ds.sqrt());
    out.write("observables.csv", csv.as_bytes())?;
    if cfg.output.snapshots {
        save(out, "rho_final.bin", &st.rho)?;
        save(out, "s_final.bin", &st.s)?;
    }
    Ok(())
}

fn hv_branches(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let em = cfg.em().ok_or_else(|| Error::Usage("branch dynamics need a charged-particle hamiltonian".into()))?;
    let time = cfg.time.as_ref().ok_or_else(|| missing("time"))?;
    let hv = cfg.hv.as_ref().ok_or_else(|| missing("hv"))?;
    let psi0 = initial_state(cfg.initial.as_ref().ok_or_else(|| missing("initial"))?, &grid)?;
    let st0 = to_madelung(&psi0, cfg.hbar)?;

    let plus = branch_continuity_rhs(&em, cfg.hbar, &st0.rho, &st0.s, 0.0)?;
    let minus = branch_continuity_rhs(&em, -cfg.hbar, &st0.rho, &st0.s, 0.0)?;
    let avg = plus.add(&minus)?.scale(0.5);
    rep.set("average_identity", avg.sub(&madelung_continuity_rhs(&em, &st0.rho, &st0.s, 0.0)?)?.sup_norm());
    rep.set("fluctuation_identity", random_fluctuation_residual(cfg.seed)?);

    let (steps, dt) = steps_for(time.t_end, time.dt);
    let run = evolve_branches(&em, &st0, cfg.hbar, dt, steps, hv.mode)?;
    rep.tick(run.plus.t);
    rep.set("phase_symmetry", check_phase_symmetry(&run));
    let averaged = run.averaged()?;
    let madelung = madelung_evolve_to(&em, &st0, time.t_end, dt, cfg.hbar)?;
    rep.set("average_vs_madelung", l2(&averaged.rho, &madelung.rho)?);
    if hv.mode == BranchMode::IndependentRho {
        rep.set("density_split", l2(&run.plus.rho, &run.minus.rho)?);
    }
    let mut csv = String::from("t,phase_discrepancy\n");
    for (t, d) in run.times.iter().zip(&run.discrepancy) {
        csv.push_str(&format!("{t:.16e},{d:.16e}\n"));
    }
    out.write("branches.csv", csv.as_bytes())?;
    if cfg.output.snapshots {
        save(out, "rho_averaged.bin", &averaged.rho)?;
    }
    Ok(())
}

/// Worst residual over smooth positive periodic densities
/// `exp(sum_k a_k cos(k x + p_k))` with random coefficients.
fn random_fluctuation_residual(seed: u64) -> Res<f64> {
    let grid = Arc::new(Grid::new(vec![Axis::periodic(1024, 0.0, std::f64::consts::TAU)?])?);
    let mut rng = replica_rng(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let modes: Vec<(f64, f64)> = (1..=3)
            .map(|k| (rng.random_range(-0.5..0.5) / k as f64, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let rho = RealField::from_fn(grid.clone(), |q| {
            modes.iter().enumerate().map(|(k, (a, p))| a * ((k + 1) as f64 * q[0] + p).cos()).sum::<f64>().exp()
        })?;
        worst = worst.max(fluctuation_identity_residual(&rho)?.sup_norm());
    }
    Ok(worst)
}

fn lambda_statistics(dist: &LambdaDistribution<f64>, n: usize, seed: u64, rep: &mut Report) -> String {
    let draws = sample_lambdas(dist, n, seed);
    let mag = dist.magnitude();
    let plus = draws.iter().filter(|&&l| l > 0.0).count() as f64 / n as f64;
    let want_plus = match *dist {
        LambdaDistribution::GeneralizedTwoPoint { w, .. } => w,
        _ => 0.5,
    };
    let mut worst = draws.iter().map(|l| (l.abs() - mag).abs()).fold(0.0, f64::max);
    if let LambdaDistribution::BallSurface { hbar } = *dist {
        let mut rng = replica_rng(seed, 1);
        for _ in 0..n {
            let v = ball_surface_vector(hbar, &mut rng);
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            worst = worst.max((r - hbar).abs() / hbar);
        }
    }
    rep.set("lambda_magnitude", worst);
    rep.set("sign_frequency", (plus - want_plus).abs());
    rep.set("plus_fraction", plus);
    format!("draws,plus_fraction,magnitude_error\n{n},{plus:.16e},{worst:.16e}\n")
}

fn hv_flip(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let em = cfg.em().ok_or_else(|| Error::Usage("fast-flip evolution needs a charged-particle hamiltonian".into()))?;
    let time = cfg.time.as_ref().ok_or_else(|| missing("time"))?;
    let hv = cfg.hv.as_ref().ok_or_else(|| missing("hv"))?;
    let dist = hv.lambda.to_dist(cfg.hbar);
    dist.validate()?;
    if hv.lambda_draws > 0 {
        let csv = lambda_statistics(&dist, hv.lambda_draws, cfg.seed, rep);
        out.write("lambda_stats.csv", csv.as_bytes())?;
    }
    let psi0 = initial_state(cfg.initial.as_ref().ok_or_else(|| missing("initial"))?, &grid)?;
    let st0 = to_madelung(&psi0, cfg.hbar)?;

    if !hv.n_micro.is_empty() {
        let oracle = madelung_evolve_to(&em, &st0, time.t_end, time.dt, cfg.hbar)?;
        let opts = FlipOptions { dist, antithetic: hv.antithetic };
        let mut csv = String::from("n_micro,rms_error\n");
        let mut errors = Vec::new();
        for &n in &hv.n_micro {
            let runs = flip_replicas(&em, &st0, time.t_end, hv.dt_macro, n, &opts, cfg.seed, hv.replicas)?;
            rep.tick(time.t_end);
            let mut sq = 0.0;
            for r in &runs {
                sq += l2(&r.rho, &oracle.rho)?.powi(2);
            }
            let rms = (sq / runs.len() as f64).sqrt();
            rep.set(&format!("flip_rms_n{n}"), rms);
            csv.push_str(&format!("{n},{rms:.16e}\n"));
            errors.push(rms);
        }
        let ratio = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        rep.set("flip_ratio", if errors.len() > 1 { ratio } else { f64::NAN });
        out.write("flip_convergence.csv", csv.as_bytes())?;
    }

    if hv.antithetic_dt.len() >= 2 {
        let mut csv = String::from("dt,error\n");
        let mut errs = Vec::new();
        for &dt in &hv.antithetic_dt {
            let pair = antithetic_step(&em, &st0, cfg.hbar, dt)?;
            let reference = madelung_evolve_to(&em, &st0, 2.0 * dt, time.dt.min(dt / 8.0), cfg.hbar)?;
            let e = l2(&pair.rho, &reference.rho)?;
            csv.push_str(&format!("{dt:.16e},{e:.16e}\n"));
            errs.push((dt, e));
        }
        let order = errs
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
            .fold(f64::INFINITY, f64::min);
        rep.set("antithetic_order", order);
        out.write("antithetic.csv", csv.as_bytes())?;
    }
    Ok(())
}

fn pilot_wave(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let h = cfg.hamiltonian.as_ref().ok_or_else(|| missing("hamiltonian"))?.to_hamiltonian();
    let time = cfg.time.as_ref().ok_or_else(|| missing("time"))?;
    let pilot = cfg.pilot.as_ref().ok_or_else(|| missing("pilot"))?;
    let kind = match time.propagator {
        PropagatorChoice::CrankNicolson => PropagatorKind::CrankNicolson,
        PropagatorChoice::Exact => PropagatorKind::ExactSpectral,
    };
    let prop = Propagator::new(&h, &grid, cfg.hbar, kind)?;
    let mut psi = initial_state(cfg.initial.as_ref().ok_or_else(|| missing("initial"))?, &grid)?;
    let (steps, dt) = steps_for(time.t_end, time.dt);
    let mut snaps = vec![psi.clone()];
    let mut times = vec![0.0];
    let mut t = 0.0;
    for step in 1..=steps {
        psi = prop.propagate_at(&psi, t, dt)?;
        t = step as f64 * dt;
        rep.tick(t);
        if step % pilot.snapshot_every == 0 || step == steps {
            snaps.push(psi.clone());
            times.push(t);
        }
    }
    let ens = GuidedEnsemble::seed_and_guide(&h, Arc::new(snaps), &times, cfg.hbar, pilot.trajectories, cfg.seed, pilot.max_dt)?;
    let l1 = equivariance_test(&ens, pilot.bin_factor)?;
    rep.set("equivariance_l1", l1.iter().copied().fold(0.0, f64::max));
    rep.set("seeding_l1", ens.seeding_l1);
    rep.set("flagged_fraction", ens.trajectories.flagged_fraction());
    let mut csv = String::from("t,l1\n");
    for (t, e) in times.iter().zip(&l1) {
        csv.push_str(&format!("{t:.16e},{e:.16e}\n"));
    }
    out.write("equivariance.csv", csv.as_bytes())?;
    out.emit("trajectories.csv", |w| ens.trajectories.write_ensemble_csv(w))?;
    Ok(())
}

fn measure(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    for (i, spec) in cfg.experiments.iter().enumerate() {
        let m = spec.to_measurement(cfg.hbar, cfg.seed.wrapping_add(i as u64))?;
        let res = run_measurement(&m)?;
        rep.tick(m.t_span);
        let name = &spec.name;
        let metric = |key: &str| format!("{name}.{key}");
        rep.set(&metric("observable_drift"), res.observable_drift);
        rep.worst("observable_drift", res.observable_drift);
        rep.set(&metric("separation_ratio"), res.separation);
        rep.warnings.extend(res.warnings.iter().map(|w| format!("{name}: {w}")));
        if let Some(hist) = &res.histogram {
            let born = hist
                .frequencies()
                .iter()
                .zip(&hist.expected)
                .map(|(f, e)| (f - e).abs())
                .fold(0.0, f64::max);
            rep.set(&metric("born_error"), born);
            rep.worst("born_error", born);
            rep.set(&metric("unresolved_fraction"), hist.unresolved_fraction());
            rep.worst("unresolved_fraction", hist.unresolved_fraction());
            for (a, f) in hist.outcomes.iter().zip(hist.frequencies()) {
                rep.set(&metric(&format!("frequency[{a}]")), f);
            }
            out.emit(&format!("{name}_histogram.csv"), |w| hist.write_csv(w))?;

            // pointer-marginal mean inside each support against g a_n T
            let centers = m.shifted_centers();
            let reach = hvq_core::measure::SUPPORT_WIDTHS * m.apparatus.width;
            let means: Vec<f64> = centers
                .iter()
                .map(|&c| {
                    let (mut w, mut s) = (0.0, 0.0);
                    for (q, p) in res.pointer.centers.iter().zip(&res.pointer.predicted) {
                        if (q - c).abs() <= reach {
                            w += p;
                            s += p * q;
                        }
                    }
                    s / w
                })
                .collect();
            let mut order: Vec<usize> = (0..centers.len()).collect();
            order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
            let sep = order
                .windows(2)
                .map(|w| ((means[w[1]] - means[w[0]]) - (centers[w[1]] - centers[w[0]])).abs())
                .fold(0.0, f64::max);
            if centers.len() > 1 {
                rep.set(&metric("pointer_gap"), means[order[order.len() - 1]] - means[order[0]]);
                rep.set(&metric("pointer_separation_error"), sep);
                rep.worst("pointer_separation_error", sep);
            }
        }
        let traj = &res.ensemble.trajectories;
        if let MeasurementKind::Position = m.kind {
            let err = (0..traj.len()).map(|p| (res.readouts[p] - traj.initial(p)[0]).abs()).fold(0.0, f64::max);
            rep.set(&metric("readout_error"), err);
            rep.worst("readout_error", err);
            let contrast = quantum_vs_classical_position(&m)?;
            rep.set(&metric("classical_rho"), contrast.rho_sup);
            rep.set(&metric("classical_grad_s"), contrast.grad_s_sup);
            rep.worst("classical_rho", contrast.rho_sup);
            if spec.stages > 1 {
                let chain = repeated_pointer_measurement(&m, spec.stages)?;
                let worst = chain.agreement.iter().copied().fold(0.0, f64::max);
                rep.set(&metric("chain_agreement"), worst);
                rep.worst("chain_agreement", worst);
            }
        }
        let mut csv = String::from("particle,q1_initial,q2_initial,q2_final,readout\n");
        for p in 0..traj.len() {
            let (a, b) = (traj.initial(p), traj.last(p));
            csv.push_str(&format!("{p},{:.16e},{:.16e},{:.16e},{:.16e}\n", a[0], a[1], b[1], res.readouts[p]));
        }
        out.write(&format!("{name}_readouts.csv"), csv.as_bytes())?;
        out.emit(&format!("{name}_pointer.csv"), |w| res.pointer.write_csv(w))?;
        if cfg.output.snapshots {
            save_complex(out, &format!("{name}_final.bin"), res.final_state())?;
        }
    }
    Ok(())
}

fn ordering_report(cfg: &ScenarioConfig, out: &mut Outputs, rep: &mut Report) -> Res<()> {
    let grid = grid_of(cfg)?;
    let spec = cfg.ordering.as_ref().ok_or_else(|| missing("ordering"))?;
    let b = spec.b.to_fn();
    // the catalog pair this gap separates, validated for the grid
    ClassicalHamiltonian::PdmQuadratic { b: b.clone(), axis: 0 }.validate(grid.rank())?;
    let gap = ordering_gap(&b, &grid, cfg.hbar)?;
    let h2 = cfg.hbar * cfg.hbar;
    let mut worst: f64 = 0.0;
    let mut csv = String::from("q,gap_over_hbar2\n");
    for i in ordering_gap_interior(&grid) {
        let r = gap.data()[i] / h2;
        worst = worst.max((r - 1.0).abs());
        csv.push_str(&format!("{:.16e},{r:.16e}\n", grid.axis(0).coord(i)));
    }
    rep.set("ordering_gap", worst);
    out.write("ordering_gap.csv", csv.as_bytes())?;
    Ok(())
}

/// Runs every `*.toml` scenario in `dir` in name order, writing one status
/// line per scenario to `log`.
pub fn run_directory(dir: &Path, opts: &RunOptions, mut log: impl Write) -> io::Result<Vec<(PathBuf, Option<RunManifest>)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        match crate::config::parse_config(&text) {
            Ok(cfg) => {
                let m = run(&cfg, opts)?;
                let detail = m.error.clone().unwrap_or_else(|| {
                    m.checks
                        .iter()
                        .map(|c| format!("{}={:.3e}/{:.1e}", c.name, c.value, c.tolerance))
                        .collect::<Vec<_>>()
                        .join(" ")
                });
                writeln!(log, "{:<5} {:<28} {detail}", m.status.as_str().to_uppercase(), cfg.name)?;
                results.push((path, Some(m)));
            }
            Err(e) => {
                writeln!(log, "ERROR {}: {e}", path.display())?;
                results.push((path, None));
            }
        }
    }
    Ok(results)
}
