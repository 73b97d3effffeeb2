use std::io::Write;
use std::sync::Arc;

use super::config::{MeasurementConfig, MeasurementKind, PointerPacket, SUPPORT_WIDTHS};
use crate::classical::{hj_evolve, integrate_trajectories, shear_transport, ClassicalEnsembleState, TrajectorySet};
use crate::error::{usage, Error, Result};
use crate::field::{Axis, ComplexField, Grid};
use crate::pilot::{guidance_series, sample_density, GuidedEnsemble};
use crate::quantizer::{expectation, quantize, ClassicalHamiltonian};
use crate::quantum::{from_madelung, phase_gradient, to_madelung, ModePropagator, Propagator, PropagatorKind};
use crate::scalar::{Cplx, Real};

/// Largest unresolved fraction accepted without a warning.
pub const UNRESOLVED_WARNING: f64 = 0.01;

/// Trajectory counts per eigenvalue outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeHistogram<T> {
    pub outcomes: Vec<T>,
    /// Born weights `|c_n|^2`.
    pub expected: Vec<T>,
    pub counts: Vec<usize>,
    pub unresolved: usize,
}

impl<T: Real> OutcomeHistogram<T> {
    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.unresolved
    }

    /// Frequencies over the resolved trajectories.
    pub fn frequencies(&self) -> Vec<T> {
        let resolved: usize = self.counts.iter().sum();
        let n = T::count(resolved.max(1));
        self.counts.iter().map(|&c| T::count(c) / n).collect()
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)` of each frequency.
    pub fn std_errors(&self) -> Vec<T> {
        let n = T::count(self.counts.iter().sum::<usize>().max(1));
        self.frequencies().iter().map(|&p| (p * (T::one() - p) / n).sqrt()).collect()
    }

    pub fn unresolved_fraction(&self) -> f64 {
        self.unresolved as f64 / self.total().max(1) as f64
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "outcome,count,frequency,expected,std_error")?;
        let (f, e) = (self.frequencies(), self.std_errors());
        for i in 0..self.outcomes.len() {
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e}",
                self.outcomes[i].as_f64(),
                self.counts[i],
                f[i].as_f64(),
                self.expected[i].as_f64(),
                e[i].as_f64()
            )?;
        }
        writeln!(w, "unresolved,{},,,", self.unresolved)?;
        Ok(())
    }
}

/// Final pointer readouts binned against the quantum pointer marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerDensity<T> {
    pub centers: Vec<T>,
    pub empirical: Vec<T>,
    pub predicted: Vec<T>,
}

impl<T: Real> PointerDensity<T> {
    /// `sum |empirical - predicted| * width`.
    pub fn l1(&self) -> T {
        let w = if self.centers.len() > 1 { self.centers[1] - self.centers[0] } else { T::one() };
        self.empirical.iter().zip(&self.predicted).map(|(a, b)| (*a - *b).abs()).sum::<T>() * w
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "q,empirical,predicted")?;
        for i in 0..self.centers.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                self.centers[i].as_f64(),
                self.empirical[i].as_f64(),
                self.predicted[i].as_f64()
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementResult<T: Real> {
    /// Present for discrete kinds.
    pub histogram: Option<OutcomeHistogram<T>>,
    pub pointer: PointerDensity<T>,
    /// `(q_2(T) - q_2(0)) / (g T)` per trajectory.
    pub readouts: Vec<T>,
    pub ensemble: GuidedEnsemble<T>,
    pub times: Vec<T>,
    /// `max_t |<A_1>(t) - <A_1>(0)| / ||A_1 psi(0)||`.
    pub observable_drift: T,
    pub separation: T,
    pub warnings: Vec<String>,
}

impl<T: Real> MeasurementResult<T> {
    pub fn final_state(&self) -> &ComplexField<T> {
        self.ensemble.snapshots.last().expect("snapshots")
    }
}

fn snapshot_times<T: Real>(t_span: T, n: usize) -> Vec<T> {
    (0..=n).map(|i| t_span * T::count(i) / T::count(n)).collect()
}

/// Propagates the initial state through every snapshot time.
fn propagate_snapshots<T: Real>(cfg: &MeasurementConfig<T>, psi0: ComplexField<T>, times: &[T]) -> Result<Vec<ComplexField<T>>> {
    let grid = psi0.grid().clone();
    match &cfg.kind {
        MeasurementKind::Momentum | MeasurementKind::Position => {
            let p = Propagator::new(&cfg.kind.hamiltonian(cfg.g), &grid, cfg.hbar, PropagatorKind::ExactSpectral)?;
            times.iter().map(|&t| p.evolve_to(&psi0, t)).collect()
        }
        MeasurementKind::AngularZ => {
            let p = Propagator::angular_modes(&grid, cfg.g, 0, 1, cfg.hbar)?;
            times.iter().map(|&t| p.evolve_to(&psi0, t)).collect()
        }
        MeasurementKind::LinearObservable { .. } => {
            let p = ModePropagator::new(&cfg.kind.hamiltonian(cfg.g), &grid, cfg.hbar)?;
            let mut out = vec![psi0];
            for w in times.windows(2) {
                let next = p.evolve(out.last().expect("state"), w[1] - w[0], cfg.cn_dt)?;
                out.push(next);
            }
            Ok(out)
        }
    }
}

/// Relative drift of `<A_1>` over the snapshots.
fn observable_drift<T: Real>(kind: &MeasurementKind<T>, snaps: &[ComplexField<T>], hbar: T) -> Result<T> {
    let op = quantize(&kind.observable(), snaps[0].grid(), hbar)?;
    let scale = op.apply(&snaps[0])?.norm().max(T::min_positive_value());
    let a0 = expectation(&op, &snaps[0])?;
    let mut worst = T::zero();
    for s in &snaps[1..] {
        worst = worst.max((expectation(&op, s)? - a0).abs());
    }
    Ok(worst / scale)
}

/// `|psi|^2` integrated over the system axis.
fn pointer_marginal<T: Real>(psi: &ComplexField<T>) -> Vec<T> {
    let grid = psi.grid();
    let (n0, n1) = (grid.axis(0).len(), grid.axis(1).len());
    let rho = psi.norm_sqr();
    (0..n1)
        .map(|j| (0..n0).map(|i| rho.at(&[i, j]) * grid.axis(0).weight(i)).sum())
        .collect()
}

fn wrap_into<T: Real>(axis: &Axis<T>, q: T) -> T {
    let (lo, len) = (axis.lower(), axis.extent());
    let r = (q - lo) % len;
    lo + if r < T::zero() { r + len } else { r }
}

fn pointer_density<T: Real>(pointer: &Axis<T>, finals: &[T], psi: &ComplexField<T>) -> PointerDensity<T> {
    let h = pointer.spacing();
    let n = pointer.len();
    let mut counts = vec![0usize; n];
    for &q in finals {
        let x = (wrap_into(pointer, q) - pointer.lower()) / h;
        let i = x.round().to_usize().unwrap_or(0) % n;
        counts[i] += 1;
    }
    let total = T::count(finals.len().max(1));
    PointerDensity {
        centers: pointer.coords(),
        empirical: counts.iter().map(|&c| T::count(c) / (total * h)).collect(),
        predicted: pointer_marginal(psi),
    }
}

/// Assigns each final pointer position to the support within
/// `SUPPORT_WIDTHS` widths of a shifted center.
fn classify<T: Real>(cfg: &MeasurementConfig<T>, finals: &[T]) -> OutcomeHistogram<T> {
    let centers = cfg.shifted_centers();
    let reach = T::lit(SUPPORT_WIDTHS) * cfg.apparatus.width;
    let mut counts = vec![0usize; centers.len()];
    let mut unresolved = 0;
    for &q in finals {
        match centers.iter().position(|&c| (q - c).abs() <= reach) {
            Some(i) => counts[i] += 1,
            None => unresolved += 1,
        }
    }
    OutcomeHistogram {
        outcomes: cfg.eigenvalues(),
        expected: cfg.system.iter().map(|c| c.c.norm_sqr()).collect(),
        counts,
        unresolved,
    }
}

/// Runs the measurement: exact or per-mode propagation of the joint state,
/// guided trajectories seeded from `|psi(0)|^2`, and pointer classification.
pub fn run_measurement<T: Real>(cfg: &MeasurementConfig<T>) -> Result<MeasurementResult<T>> {
    cfg.validate()?;
    let separation = super::config::pointer_separation_check(cfg);
    let times = snapshot_times(cfg.t_span, cfg.snapshots);
    let snaps = propagate_snapshots(cfg, cfg.initial_state()?, &times)?;
    let observable_drift = observable_drift(&cfg.kind, &snaps, cfg.hbar)?;
    let h = cfg.kind.hamiltonian(cfg.g);
    let ensemble = GuidedEnsemble::seed_and_guide(
        &h,
        Arc::new(snaps),
        &times,
        cfg.hbar,
        cfg.trajectories,
        cfg.seed,
        cfg.max_dt,
    )?;
    let traj = &ensemble.trajectories;
    let finals: Vec<T> = (0..traj.len()).map(|i| traj.last(i)[1]).collect();
    let readouts = (0..traj.len())
        .map(|i| (traj.last(i)[1] - traj.initial(i)[1]) / (cfg.g * cfg.t_span))
        .collect();
    let mut warnings = Vec::new();
    let histogram = cfg.kind.is_discrete().then(|| classify(cfg, &finals));
    if let Some(hist) = &histogram {
        let frac = hist.unresolved_fraction();
        if frac > UNRESOLVED_WARNING {
            warnings.push(format!("{:.2}% of trajectories ended outside every pointer support", 100.0 * frac));
        }
    }
    let flagged = traj.flagged_fraction();
    if flagged > 0.0 {
        warnings.push(format!("{:.2}% of trajectories were flagged near a node or boundary", 100.0 * flagged));
    }
    let pointer = pointer_density(&cfg.pointer_axis, &finals, ensemble.snapshots.last().expect("snapshots"));
    Ok(MeasurementResult { histogram, pointer, readouts, ensemble, times, observable_drift, separation, warnings })
}

/// Sup-norm gaps between the classical ensemble and the Madelung form of
/// the quantum state at the end of the interaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalContrast<T> {
    pub rho_sup: T,
    /// Largest gap in `grad S`, restricted to cells with resolved density.
    pub grad_s_sup: T,
}

/// Compares the quantum evolution of the joint state with the classical
/// `(rho, S)` pair evolved by the same Hamiltonian. The position kind uses
/// exact shear transport; the momentum kind integrates the classical pair
/// with steps `dt`.
pub fn quantum_vs_classical<T: Real>(cfg: &MeasurementConfig<T>, dt: T) -> Result<ClassicalContrast<T>> {
    let psi0 = cfg.initial_state()?;
    let h = cfg.kind.hamiltonian(cfg.g);
    let start = to_madelung(&psi0, cfg.hbar)?;
    let classical0 = ClassicalEnsembleState::new(start.s.clone(), start.rho.clone(), T::zero())?;
    let classical = match cfg.kind {
        MeasurementKind::Position => shear_transport(&h, &classical0, cfg.t_span)?,
        MeasurementKind::Momentum => hj_evolve(&h, &classical0, cfg.t_span, dt)?,
        _ => return usage(format!("no classical comparator for a {} measurement", cfg.kind.as_str())),
    };
    let p = Propagator::new(&h, psi0.grid(), cfg.hbar, PropagatorKind::ExactSpectral)?;
    let quantum = to_madelung(&p.evolve_to(&psi0, cfg.t_span)?, cfg.hbar)?;
    let rho_sup = quantum.rho.sub(&classical.rho)?.sup_norm();
    // Compare gradients through `Im(conj(psi) dpsi)/|psi|^2` so that the
    // arbitrary phase of unresolved cells never enters a stencil at full weight.
    let psi_q = from_madelung(&quantum, cfg.hbar);
    let psi_c = classical.rho.zip_map(&classical.s, |r, s| Cplx::from_polar(r.max(T::zero()).sqrt(), s / cfg.hbar))?;
    let floor = T::lit(1e-6) * quantum.rho.max();
    let mut grad_s_sup = T::zero();
    for axis in 0..2 {
        let gq = phase_gradient(&psi_q, axis, cfg.hbar)?;
        let gc = phase_gradient(&psi_c, axis, cfg.hbar)?;
        for i in 0..gq.len() {
            if quantum.rho.data()[i] > floor {
                grad_s_sup = grad_s_sup.max((gq.data()[i] - gc.data()[i]).abs());
            }
        }
    }
    Ok(ClassicalContrast { rho_sup, grad_s_sup })
}

/// Position-measurement comparison; rejects other kinds.
pub fn quantum_vs_classical_position<T: Real>(cfg: &MeasurementConfig<T>) -> Result<ClassicalContrast<T>> {
    if !matches!(cfg.kind, MeasurementKind::Position) {
        return usage("expected a position measurement");
    }
    quantum_vs_classical(cfg, cfg.t_span)
}

/// A later pointer in a chain of position measurements. Stage `j` couples
/// pointer `j` to the coordinate read by stage `j - 1`.
#[derive(Clone, Debug)]
pub struct PointerStage<T> {
    pub g: T,
    pub t_span: T,
    pub axis: Axis<T>,
    pub packet: PointerPacket<T>,
}

#[derive(Clone, Debug)]
pub struct ChainResult<T> {
    /// `readouts[stage][particle]`.
    pub readouts: Vec<Vec<T>>,
    /// Largest `|readout_j - q_{j-1}|` per stage, with `q_{j-1}` the measured
    /// coordinate when stage `j` starts.
    pub agreement: Vec<T>,
    pub trajectories: Vec<TrajectorySet<T>>,
}

/// Chains `k <= 3` position measurements, each later pointer copying the
/// previous one. `cfg` supplies the system and the first stage; later
/// stages reuse its coupling, span, and pointer.
pub fn repeated_pointer_measurement<T: Real>(cfg: &MeasurementConfig<T>, k: usize) -> Result<ChainResult<T>> {
    if k == 0 {
        return usage("need at least one stage");
    }
    let later: Vec<_> = (1..k)
        .map(|_| PointerStage { g: cfg.g, t_span: cfg.t_span, axis: cfg.pointer_axis.clone(), packet: cfg.apparatus })
        .collect();
    chained_position_measurement(cfg, &later)
}

pub fn chained_position_measurement<T: Real>(cfg: &MeasurementConfig<T>, later: &[PointerStage<T>]) -> Result<ChainResult<T>> {
    if !matches!(cfg.kind, MeasurementKind::Position) {
        return usage("chained measurements couple to position");
    }
    if later.len() > 2 {
        return usage("at most three chained stages are supported");
    }
    cfg.validate()?;
    let mut stages = vec![PointerStage {
        g: cfg.g,
        t_span: cfg.t_span,
        axis: cfg.pointer_axis.clone(),
        packet: cfg.apparatus,
    }];
    stages.extend(later.iter().cloned());
    for s in &stages {
        if s.g == T::zero() || !(s.t_span > T::zero()) || !(s.packet.width > T::zero()) {
            return usage("every stage needs non-zero g, positive span, and positive width");
        }
    }
    let mut axes = vec![cfg.system_axis.clone()];
    axes.extend(stages.iter().map(|s| s.axis.clone()));
    let grid = Arc::new(Grid::new(axes)?);
    let mut psi = ComplexField::from_fn(grid.clone(), |q| {
        let sys = cfg.system.iter().fold(Cplx::new(T::zero(), T::zero()), |acc, c| acc + c.c * c.spec.value(q[0]));
        stages.iter().enumerate().fold(sys, |acc, (j, s)| acc * s.packet.value(q[j + 1]))
    })?
    .normalized()?;
    let mut seeds = sample_density(&psi.norm_sqr(), cfg.trajectories, cfg.seed)?;
    let mut readouts = Vec::new();
    let mut agreement = Vec::new();
    let mut trajectories = Vec::new();
    for (j, stage) in stages.iter().enumerate() {
        let h = ClassicalHamiltonian::MeasurePosition { g: stage.g, system: j, pointer: j + 1 };
        let p = Propagator::new(&h, &grid, cfg.hbar, PropagatorKind::ExactSpectral)?;
        // the pointer velocity g q_j does not depend on the state, so the
        // stage endpoints carry all the guidance there is
        let times = vec![T::zero(), stage.t_span];
        let snaps = times.iter().map(|&t| p.evolve_to(&psi, t)).collect::<Result<Vec<_>>>()?;
        let series = guidance_series(&h, &snaps, &times, cfg.hbar)?;
        let traj = integrate_trajectories(&series, &seeds, &times, cfg.max_dt)?;
        let r: Vec<T> = (0..traj.len())
            .map(|i| (traj.last(i)[j + 1] - traj.initial(i)[j + 1]) / (stage.g * stage.t_span))
            .collect();
        let worst = (0..traj.len()).map(|i| (r[i] - traj.initial(i)[j]).abs()).fold(T::zero(), T::max);
        psi = snaps.into_iter().last().ok_or_else(|| Error::Usage("empty stage".into()))?;
        seeds = (0..traj.len()).map(|i| traj.last(i).to_vec()).collect();
        readouts.push(r);
        agreement.push(worst);
        trajectories.push(traj);
    }
    Ok(ChainResult { readouts, agreement, trajectories })
}

/// The system factor of an eigenstate preparation, for reporting.
pub fn system_factor<T: Real>(cfg: &MeasurementConfig<T>) -> Result<ComplexField<T>> {
    let grid = Arc::new(Grid::new(vec![cfg.system_axis.clone()])?);
    ComplexField::from_fn(grid, |q| cfg.system.iter().fold(Cplx::new(T::zero(), T::zero()), |acc, c| acc + c.c * c.spec.value(q[0])))?
        .normalized()
}
