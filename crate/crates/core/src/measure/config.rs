use std::sync::Arc;

use crate::analytic::AnalyticFn;
use crate::error::{usage, Error, Result};
use crate::field::{Axis, Boundary, ComplexField, Grid};
use crate::quantizer::ClassicalHamiltonian;
use crate::scalar::{Cplx, Real};

/// Minimum pointer gap, in packet widths, between adjacent outcomes.
pub const SEPARATION_REQUIRED: f64 = 8.0;
/// Pointer supports extend this many widths around each shifted center.
pub const SUPPORT_WIDTHS: f64 = 4.0;
/// Tolerance on `sum |c_n|^2 = 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-10;

/// Which system observable the apparatus couples to.
#[derive(Clone, Debug)]
pub enum MeasurementKind<T> {
    /// `g p_1 p_2`.
    Momentum,
    /// `g q_1 p_2`.
    Position,
    /// `g L_z p_2`, with the system axis the polar angle on `[0, 2π)`.
    AngularZ,
    /// `g (B p_1 + p_1 B)/2 p_2`.
    LinearObservable { b: AnalyticFn<T> },
}

impl<T: Real> MeasurementKind<T> {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Momentum => "momentum",
            Self::Position => "position",
            Self::AngularZ => "angular-z",
            Self::LinearObservable { .. } => "linear-observable",
        }
    }

    /// Outcomes are discrete eigenvalues rather than pointer densities.
    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Momentum | Self::AngularZ)
    }

    /// Coupling Hamiltonian on a `(system, pointer)` grid. The angular kind
    /// on the polar grid is a momentum coupling in the angle.
    pub fn hamiltonian(&self, g: T) -> ClassicalHamiltonian<T> {
        match self {
            Self::Momentum | Self::AngularZ => ClassicalHamiltonian::MeasureMomentum { g, system: 0, pointer: 1 },
            Self::Position => ClassicalHamiltonian::MeasurePosition { g, system: 0, pointer: 1 },
            Self::LinearObservable { b } => {
                ClassicalHamiltonian::MeasureLinearObservable { g, b: b.clone(), system: 0, pointer: 1 }
            }
        }
    }

    /// System observable `A_1` as a catalog Hamiltonian on the 2-D grid.
    pub(crate) fn observable(&self) -> ClassicalHamiltonian<T> {
        match self {
            Self::Momentum | Self::AngularZ => ClassicalHamiltonian::LinearDrift { b: AnalyticFn::constant(T::one()), axis: 0 },
            Self::Position => ClassicalHamiltonian::Potential { v: AnalyticFn::polynomial(0, vec![T::zero(), T::one()]) },
            Self::LinearObservable { b } => ClassicalHamiltonian::LinearDrift { b: b.clone(), axis: 0 },
        }
    }
}

/// One system basis function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EigenSpec<T> {
    /// `exp(i k q) exp(-(q - center)^2 / 4 window^2)`; eigenvalue `hbar k`.
    WindowedPlaneWave { k: T, center: T, window: T },
    /// `exp(i m θ)`; eigenvalue `m hbar`.
    AngularMode { m: i32 },
    /// Gaussian packet with mean wavenumber `k`, for continuous observables.
    Packet { center: T, width: T, k: T },
}

impl<T: Real> EigenSpec<T> {
    pub(crate) fn value(&self, q: T) -> Cplx<T> {
        match *self {
            Self::WindowedPlaneWave { k, center, window } => {
                Cplx::from_polar((-(q - center).powi(2) / (T::lit(4.0) * window * window)).exp(), k * q)
            }
            Self::AngularMode { m } => Cplx::from_polar(T::one(), T::lit(m as f64) * q),
            Self::Packet { center, width, k } => {
                Cplx::from_polar((-(q - center).powi(2) / (T::lit(4.0) * width * width)).exp(), k * q)
            }
        }
    }

    /// Eigenvalue of the measured observable, if this is an eigenstate.
    pub fn eigenvalue(&self, hbar: T) -> Option<T> {
        match *self {
            Self::WindowedPlaneWave { k, .. } => Some(hbar * k),
            Self::AngularMode { m } => Some(hbar * T::lit(m as f64)),
            Self::Packet { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemComponent<T> {
    pub c: Cplx<T>,
    pub spec: EigenSpec<T>,
}

/// Gaussian pointer packet; `width` is the standard deviation of `|phi|^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointerPacket<T> {
    pub center: T,
    pub width: T,
}

impl<T: Real> PointerPacket<T> {
    pub(crate) fn value(&self, q: T) -> Cplx<T> {
        Cplx::new((-(q - self.center).powi(2) / (T::lit(4.0) * self.width * self.width)).exp(), T::zero())
    }
}

/// An impulsive measurement experiment.
#[derive(Clone, Debug)]
pub struct MeasurementConfig<T> {
    pub kind: MeasurementKind<T>,
    pub g: T,
    /// Interaction span `T`.
    pub t_span: T,
    pub hbar: T,
    pub system: Vec<SystemComponent<T>>,
    pub apparatus: PointerPacket<T>,
    pub system_axis: Axis<T>,
    pub pointer_axis: Axis<T>,
    pub trajectories: usize,
    pub seed: u64,
    /// Wavefunction snapshots over `[0, T]` used for guidance.
    pub snapshots: usize,
    /// Largest trajectory sub-step.
    pub max_dt: T,
    /// Crank-Nicolson step for the linear-observable kind.
    pub cn_dt: T,
}

impl<T: Real> MeasurementConfig<T> {
    /// Checks the configuration invariants, including the pointer
    /// separation criterion for discrete kinds.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_span > T::zero()) || !self.t_span.is_finite() {
            return usage("interaction span T must be positive");
        }
        if self.g == T::zero() || !self.g.is_finite() {
            return usage("coupling g must be non-zero");
        }
        if !(self.hbar > T::zero()) {
            return usage("hbar must be positive");
        }
        if !(self.apparatus.width > T::zero()) {
            return usage("pointer packet width must be positive");
        }
        if self.trajectories == 0 || self.snapshots == 0 {
            return usage("trajectory and snapshot counts must be positive");
        }
        if !(self.max_dt > T::zero()) || !(self.cn_dt > T::zero()) {
            return usage("time steps must be positive");
        }
        if self.system.is_empty() {
            return usage("system preparation is empty");
        }
        let total: T = self.system.iter().map(|c| c.c.norm_sqr()).sum();
        if (total - T::one()).abs().as_f64() > WEIGHT_TOLERANCE {
            return usage(format!("system weights sum to {total}, expected 1"));
        }
        for comp in &self.system {
            let ok = matches!(
                (&self.kind, comp.spec),
                (MeasurementKind::Momentum, EigenSpec::WindowedPlaneWave { .. })
                    | (MeasurementKind::AngularZ, EigenSpec::AngularMode { .. })
                    | (MeasurementKind::Position, EigenSpec::Packet { .. })
                    | (MeasurementKind::LinearObservable { .. }, EigenSpec::Packet { .. })
            );
            if !ok {
                return usage(format!("{:?} does not fit a {} measurement", comp.spec, self.kind.as_str()));
            }
        }
        if self.pointer_axis.boundary() != Boundary::Periodic {
            return usage("pointer axis must be periodic");
        }
        match self.kind {
            MeasurementKind::AngularZ => {
                let ax = &self.system_axis;
                if ax.boundary() != Boundary::Periodic
                    || ax.lower() != T::zero()
                    || (ax.upper() - T::TAU()).abs() > T::lit(1e-12)
                {
                    return usage("angular system axis must be periodic on [0, 2π)");
                }
            }
            MeasurementKind::Momentum if self.system_axis.boundary() != Boundary::Periodic => {
                return usage("momentum measurement needs a periodic system axis");
            }
            _ => {}
        }
        if self.kind.is_discrete() {
            let ratio = pointer_separation_check(self);
            if ratio.as_f64() < SEPARATION_REQUIRED {
                return Err(Error::UnresolvableOutcomes { ratio: ratio.as_f64(), required: SEPARATION_REQUIRED });
            }
            let (lo, hi) = (self.pointer_axis.lower(), self.pointer_axis.upper());
            let reach = T::lit(SUPPORT_WIDTHS) * self.apparatus.width;
            for c in self.shifted_centers() {
                if c - reach < lo || c + reach > hi {
                    return usage(format!("pointer support around {c} leaves the pointer domain [{lo}, {hi}]"));
                }
            }
        }
        Ok(())
    }

    /// Distinct eigenvalues `a_n`, in component order.
    pub fn eigenvalues(&self) -> Vec<T> {
        self.system.iter().filter_map(|c| c.spec.eigenvalue(self.hbar)).collect()
    }

    /// Pointer centers `q_2(0) + g a_n T`.
    pub fn shifted_centers(&self) -> Vec<T> {
        self.eigenvalues().iter().map(|a| self.apparatus.center + self.g * *a * self.t_span).collect()
    }

    pub fn grid(&self) -> Result<Arc<Grid<T>>> {
        Ok(Arc::new(Grid::new(vec![self.system_axis.clone(), self.pointer_axis.clone()])?))
    }

    /// `sum_n c_n psi_n(q_1) phi(q_2)`, normalized on the grid.
    pub fn initial_state(&self) -> Result<ComplexField<T>> {
        let grid = self.grid()?;
        let psi = ComplexField::from_fn(grid, |q| {
            let sys = self.system.iter().fold(Cplx::new(T::zero(), T::zero()), |acc, c| acc + c.c * c.spec.value(q[0]));
            sys * self.apparatus.value(q[1])
        })?;
        psi.normalized()
    }
}

/// Smallest gap `|g (a_n - a_m) T|` between distinct adjacent outcomes,
/// in pointer widths. Coinciding eigenvalues give 0; a single outcome gives
/// infinity.
pub fn pointer_separation_check<T: Real>(cfg: &MeasurementConfig<T>) -> T {
    let mut a = cfg.eigenvalues();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    a.windows(2)
        .map(|w| (cfg.g * (w[1] - w[0]) * cfg.t_span).abs() / cfg.apparatus.width)
        .fold(T::infinity(), T::min)
}
