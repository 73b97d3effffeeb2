//! Scenario configuration: a TOML document with one section per module.
//!
//! Parsing collects every problem it finds instead of stopping at the first,
//! rejects unknown keys, and fills documented defaults so that
//! [`ScenarioConfig::to_toml`] followed by [`parse_config`] is the identity.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use hvq_core::analytic::AnalyticFn;
use hvq_core::field::{Axis, Boundary};
use hvq_core::hv::{BranchMode, LambdaDistribution};
use hvq_core::measure::{EigenSpec, MeasurementConfig, MeasurementKind, PointerPacket, SystemComponent};
use hvq_core::quantizer::{ClassicalHamiltonian, EmParticle};
use hvq_core::Cplx;
use toml::{Table, Value};

/// Tolerance on normalized weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub section: String,
    pub message: String,
}

/// Every problem found in a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.issues.len())?;
        for i in &self.issues {
            writeln!(f, "  [{}] {}", i.section, i.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScenarioKind {
    EvolveClassical,
    EvolveQuantum,
    EvolveMadelung,
    HvBranches,
    HvFlip,
    PilotWave,
    Measure,
    OrderingReport,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        Self::EvolveClassical,
        Self::EvolveQuantum,
        Self::EvolveMadelung,
        Self::HvBranches,
        Self::HvFlip,
        Self::PilotWave,
        Self::Measure,
        Self::OrderingReport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EvolveClassical => "evolve-classical",
            Self::EvolveQuantum => "evolve-quantum",
            Self::EvolveMadelung => "evolve-madelung",
            Self::HvBranches => "hv-branches",
            Self::HvFlip => "hv-flip",
            Self::PilotWave => "pilot-wave",
            Self::Measure => "measure",
            Self::OrderingReport => "ordering-report",
        }
    }

    /// CLI subcommand that runs this kind.
    pub fn command(self) -> &'static str {
        match self {
            Self::EvolveClassical | Self::EvolveQuantum | Self::EvolveMadelung => "evolve",
            Self::HvBranches | Self::HvFlip => "hv",
            Self::PilotWave => "pilot",
            Self::Measure => "measure",
            Self::OrderingReport => "ordering",
        }
    }

    /// Check names this kind understands.
    pub fn checks(self) -> &'static [&'static str] {
        match self {
            Self::EvolveClassical => &["mass_drift"],
            Self::EvolveQuantum => &["norm_drift", "energy_drift", "width_error", "heisenberg_floor", "min_uncertainty"],
            Self::EvolveMadelung => &["mass_drift", "rho_l2", "ds_l2"],
            Self::HvBranches => &["phase_symmetry", "average_identity", "fluctuation_identity", "average_vs_madelung"],
            Self::HvFlip => &["flip_ratio", "antithetic_order", "lambda_magnitude", "sign_frequency"],
            Self::PilotWave => &["equivariance_l1", "flagged_fraction"],
            Self::Measure => &[
                "born_error",
                "unresolved_fraction",
                "observable_drift",
                "readout_error",
                "classical_rho",
                "chain_agreement",
                "pointer_separation_error",
            ],
            Self::OrderingReport => &["ordering_gap"],
        }
    }

    fn sections(self) -> &'static [&'static str] {
        match self {
            Self::EvolveClassical | Self::EvolveQuantum | Self::EvolveMadelung => &["grid", "hamiltonian", "initial", "time"],
            Self::HvBranches | Self::HvFlip => &["grid", "hamiltonian", "initial", "time", "hv"],
            Self::PilotWave => &["grid", "hamiltonian", "initial", "time", "pilot"],
            Self::Measure => &["experiment"],
            Self::OrderingReport => &["grid", "ordering"],
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario kind `{s}`"))
    }
}

/// `value >= tolerance` passes for these checks; all others pass when
/// `value <= tolerance`.
pub fn is_lower_bound(check: &str) -> bool {
    check == "antithetic_order"
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub boundary: Boundary,
}

impl AxisSpec {
    pub fn to_axis(&self) -> hvq_core::Result<Axis<f64>> {
        Axis::new(self.n, self.lower, self.upper, self.boundary)
    }
}

/// Coefficient function.
#[derive(Clone, Debug, PartialEq)]
pub enum FnSpec {
    Constant { value: f64 },
    Polynomial { axis: usize, coeffs: Vec<f64> },
    Harmonic { k: f64, center: Vec<f64> },
}

impl FnSpec {
    pub fn to_fn(&self) -> AnalyticFn<f64> {
        match self {
            Self::Constant { value } => AnalyticFn::constant(*value),
            Self::Polynomial { axis, coeffs } => AnalyticFn::polynomial(*axis, coeffs.clone()),
            Self::Harmonic { k, center } => AnalyticFn::harmonic(*k, center.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HamiltonianSpec {
    Free { mass: f64 },
    Harmonic { mass: f64, omega: f64, center: Vec<f64> },
    Potential { mass: f64, v: FnSpec },
    Pdm { b: FnSpec, axis: usize },
    LinearDrift { b: FnSpec, axis: usize },
    MeasureMomentum { g: f64, system: usize, pointer: usize },
    MeasurePosition { g: f64, system: usize, pointer: usize },
    MeasureLinearObservable { g: f64, b: FnSpec, system: usize, pointer: usize },
}

impl HamiltonianSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Free { .. } => "free",
            Self::Harmonic { .. } => "harmonic",
            Self::Potential { .. } => "potential",
            Self::Pdm { .. } => "pdm",
            Self::LinearDrift { .. } => "linear-drift",
            Self::MeasureMomentum { .. } => "measure-momentum",
            Self::MeasurePosition { .. } => "measure-position",
            Self::MeasureLinearObservable { .. } => "measure-linear-observable",
        }
    }

    /// The charged-particle form, for the kinds that have one.
    pub fn em(&self) -> Option<EmParticle<f64>> {
        match self {
            Self::Free { mass } => Some(EmParticle::free(*mass)),
            Self::Harmonic { mass, omega, center } => Some(EmParticle::harmonic(*mass, *omega, center.clone())),
            Self::Potential { mass, v } => Some(EmParticle::in_potential(*mass, v.to_fn())),
            _ => None,
        }
    }

    pub fn to_hamiltonian(&self) -> ClassicalHamiltonian<f64> {
        if let Some(em) = self.em() {
            return ClassicalHamiltonian::EmParticle(em);
        }
        match self {
            Self::Pdm { b, axis } => ClassicalHamiltonian::PdmQuadratic { b: b.to_fn(), axis: *axis },
            Self::LinearDrift { b, axis } => ClassicalHamiltonian::LinearDrift { b: b.to_fn(), axis: *axis },
            Self::MeasureMomentum { g, system, pointer } => {
                ClassicalHamiltonian::MeasureMomentum { g: *g, system: *system, pointer: *pointer }
            }
            Self::MeasurePosition { g, system, pointer } => {
                ClassicalHamiltonian::MeasurePosition { g: *g, system: *system, pointer: *pointer }
            }
            Self::MeasureLinearObservable { g, b, system, pointer } => ClassicalHamiltonian::MeasureLinearObservable {
                g: *g,
                b: b.to_fn(),
                system: *system,
                pointer: *pointer,
            },
            _ => unreachable!("charged-particle kinds handled above"),
        }
    }

    pub fn mass(&self) -> Option<f64> {
        match self {
            Self::Free { mass } | Self::Harmonic { mass, .. } | Self::Potential { mass, .. } => Some(*mass),
            _ => None,
        }
    }
}

/// Gaussian packet; `width` is the standard deviation of `|psi|^2` per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketSpec {
    pub amplitude: [f64; 2],
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagatorChoice {
    CrankNicolson,
    Exact,
}

impl PropagatorChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CrankNicolson => "crank-nicolson",
            Self::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub dt: f64,
    pub propagator: PropagatorChoice,
    /// Step of the Schrödinger reference run that Madelung results are
    /// compared against.
    pub reference_dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    /// Record observables every `every` steps.
    pub every: usize,
    /// Write final field snapshots.
    pub snapshots: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSpec {
    TwoPoint,
    BallSurface,
    Generalized { a: f64, w: f64 },
}

impl LambdaSpec {
    pub fn to_dist(&self, hbar: f64) -> LambdaDistribution<f64> {
        match *self {
            Self::TwoPoint => LambdaDistribution::TwoPoint { hbar },
            Self::BallSurface => LambdaDistribution::BallSurface { hbar },
            Self::Generalized { a, w } => LambdaDistribution::GeneralizedTwoPoint { a, w },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HvSpec {
    pub mode: BranchMode,
    pub lambda: LambdaSpec,
    pub n_micro: Vec<usize>,
    pub replicas: usize,
    pub dt_macro: f64,
    pub antithetic: bool,
    /// Steps used to measure the order of the antithetic pair.
    pub antithetic_dt: Vec<f64>,
    pub lambda_draws: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PilotSpec {
    pub trajectories: usize,
    pub bin_factor: usize,
    /// Guidance snapshot every this many propagation steps.
    pub snapshot_every: usize,
    pub max_dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BasisSpec {
    PlaneWave { k: f64, center: f64, window: f64 },
    Angular { m: i32 },
    Packet { center: f64, width: f64, k: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSpec {
    pub amplitude: [f64; 2],
    pub basis: BasisSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKindSpec {
    Momentum,
    Position,
    AngularZ,
    LinearObservable,
}

impl MeasureKindSpec {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Momentum => "momentum",
            Self::Position => "position",
            Self::AngularZ => "angular-z",
            Self::LinearObservable => "linear-observable",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: MeasureKindSpec,
    /// Coefficient of the linear observable.
    pub b: Option<FnSpec>,
    pub g: f64,
    pub t_span: f64,
    pub components: Vec<ComponentSpec>,
    pub pointer_center: f64,
    pub pointer_width: f64,
    pub system_axis: AxisSpec,
    pub pointer_axis: AxisSpec,
    pub trajectories: usize,
    pub snapshots: usize,
    pub max_dt: f64,
    pub cn_dt: f64,
    /// Chained pointer stages for position experiments; 1 means a single pointer.
    pub stages: usize,
}

impl ExperimentSpec {
    pub fn to_measurement(&self, hbar: f64, seed: u64) -> hvq_core::Result<MeasurementConfig<f64>> {
        let kind = match self.kind {
            MeasureKindSpec::Momentum => MeasurementKind::Momentum,
            MeasureKindSpec::Position => MeasurementKind::Position,
            MeasureKindSpec::AngularZ => MeasurementKind::AngularZ,
            MeasureKindSpec::LinearObservable => MeasurementKind::LinearObservable {
                b: self.b.as_ref().map(FnSpec::to_fn).unwrap_or_else(|| AnalyticFn::constant(1.0)),
            },
        };
        let system = self
            .components
            .iter()
            .map(|c| SystemComponent {
                c: Cplx::new(c.amplitude[0], c.amplitude[1]),
                spec: match c.basis {
                    BasisSpec::PlaneWave { k, center, window } => EigenSpec::WindowedPlaneWave { k, center, window },
                    BasisSpec::Angular { m } => EigenSpec::AngularMode { m },
                    BasisSpec::Packet { center, width, k } => EigenSpec::Packet { center, width, k },
                },
            })
            .collect();
        Ok(MeasurementConfig {
            kind,
            g: self.g,
            t_span: self.t_span,
            hbar,
            system,
            apparatus: PointerPacket { center: self.pointer_center, width: self.pointer_width },
            system_axis: self.system_axis.to_axis()?,
            pointer_axis: self.pointer_axis.to_axis()?,
            trajectories: self.trajectories,
            seed,
            snapshots: self.snapshots,
            max_dt: self.max_dt,
            cn_dt: self.cn_dt,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderingSpec {
    pub b: FnSpec,
}

/// A fully validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub hbar: f64,
    /// Output directory override; relative paths resolve against the output root.
    pub output_dir: Option<String>,
    pub grid: Option<Vec<AxisSpec>>,
    pub hamiltonian: Option<HamiltonianSpec>,
    pub initial: Option<Vec<PacketSpec>>,
    pub time: Option<TimeSpec>,
    pub output: OutputSpec,
    pub hv: Option<HvSpec>,
    pub pilot: Option<PilotSpec>,
    pub experiments: Vec<ExperimentSpec>,
    pub ordering: Option<OrderingSpec>,
    /// Declared checks and their tolerances.
    pub checks: BTreeMap<String, f64>,
}

impl ScenarioConfig {
    pub fn rank(&self) -> usize {
        self.grid.as_ref().map_or(0, Vec::len)
    }

    pub fn grid_axes(&self) -> hvq_core::Result<Vec<Axis<f64>>> {
        self.grid.iter().flatten().map(AxisSpec::to_axis).collect()
    }

    pub fn em(&self) -> Option<EmParticle<f64>> {
        self.hamiltonian.as_ref().and_then(HamiltonianSpec::em)
    }
}

type Issues<'a> = &'a RefCell<Vec<Issue>>;

/// Table view that records which keys were read and reports problems.
struct Section<'a> {
    table: &'a Table,
    path: String,
    used: RefCell<BTreeSet<String>>,
    issues: Issues<'a>,
}

impl<'a> Section<'a> {
    fn new(table: &'a Table, path: impl Into<String>, issues: Issues<'a>) -> Self {
        Self { table, path: path.into(), used: RefCell::new(BTreeSet::new()), issues }
    }

    fn err(&self, msg: impl Into<String>) {
        let section = if self.path.is_empty() { "top level".to_string() } else { self.path.clone() };
        self.issues.borrow_mut().push(Issue { section, message: msg.into() });
    }

    fn child(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn missing(&self, key: &str) {
        self.err(format!("missing required key `{key}`"));
    }

    fn as_f64(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn opt_f64(&self, key: &str) -> Option<f64> {
        let v = self.raw(key)?;
        let x = Self::as_f64(v);
        if x.is_none() {
            self.err(format!("`{key}` must be a number"));
        }
        x
    }

    fn f64(&self, key: &str) -> f64 {
        if !self.has(key) {
            self.missing(key);
        }
        self.opt_f64(key).unwrap_or(f64::NAN)
    }

    fn f64_or(&self, key: &str, default: f64) -> f64 {
        if self.has(key) {
            self.opt_f64(key).unwrap_or(default)
        } else {
            self.raw(key);
            default
        }
    }

    fn opt_int(&self, key: &str) -> Option<i64> {
        let v = self.raw(key)?;
        match v {
            Value::Integer(i) => Some(*i),
            _ => {
                self.err(format!("`{key}` must be an integer"));
                None
            }
        }
    }

    fn usize_checked(&self, key: &str, i: i64) -> usize {
        usize::try_from(i).unwrap_or_else(|_| {
            self.err(format!("`{key}` must be non-negative"));
            0
        })
    }

    fn usize(&self, key: &str) -> usize {
        if !self.has(key) {
            self.missing(key);
        }
        self.opt_int(key).map_or(0, |i| self.usize_checked(key, i))
    }

    fn usize_or(&self, key: &str, default: usize) -> usize {
        if self.has(key) {
            self.opt_int(key).map_or(default, |i| self.usize_checked(key, i))
        } else {
            self.raw(key);
            default
        }
    }

    fn i32(&self, key: &str) -> i32 {
        if !self.has(key) {
            self.missing(key);
        }
        self.opt_int(key)
            .map(|i| {
                i32::try_from(i).unwrap_or_else(|_| {
                    self.err(format!("`{key}` is out of range"));
                    0
                })
            })
            .unwrap_or(0)
    }

    fn bool_or(&self, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.err(format!("`{key}` must be a boolean"));
                default
            }
        }
    }

    fn opt_str(&self, key: &str) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                self.err(format!("`{key}` must be a string"));
                None
            }
        }
    }

    fn str(&self, key: &str) -> Option<&'a str> {
        if !self.has(key) {
            self.missing(key);
        }
        self.opt_str(key)
    }

    fn parse_str<E: FromStr<Err = String>>(&self, key: &str, default: Option<E>) -> Option<E> {
        let s = if default.is_some() { self.opt_str(key) } else { self.str(key) };
        match s {
            None => default,
            Some(s) => match s.parse() {
                Ok(v) => Some(v),
                Err(e) => {
                    self.err(format!("`{key}`: {e}"));
                    None
                }
            },
        }
    }

    fn opt_f64_list(&self, key: &str) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(a) => {
                let out: Option<Vec<f64>> = a.iter().map(Self::as_f64).collect();
                if out.is_none() {
                    self.err(format!("`{key}` must be an array of numbers"));
                }
                out
            }
            _ => {
                self.err(format!("`{key}` must be an array of numbers"));
                None
            }
        }
    }

    fn f64_list(&self, key: &str) -> Vec<f64> {
        if !self.has(key) {
            self.missing(key);
        }
        self.opt_f64_list(key).unwrap_or_default()
    }

    fn f64_list_or(&self, key: &str, default: Vec<f64>) -> Vec<f64> {
        if self.has(key) {
            self.opt_f64_list(key).unwrap_or(default)
        } else {
            self.raw(key);
            default
        }
    }

    fn usize_list_or(&self, key: &str, default: Vec<usize>) -> Vec<usize> {
        match self.raw(key) {
            None => default,
            Some(Value::Array(a)) => {
                let out: Option<Vec<usize>> =
                    a.iter().map(|v| v.as_integer().and_then(|i| usize::try_from(i).ok())).collect();
                out.unwrap_or_else(|| {
                    self.err(format!("`{key}` must be an array of non-negative integers"));
                    default
                })
            }
            Some(_) => {
                self.err(format!("`{key}` must be an array of non-negative integers"));
                default
            }
        }
    }

    fn complex_or(&self, key: &str, default: [f64; 2]) -> [f64; 2] {
        match self.opt_f64_list(key) {
            None => default,
            Some(v) if v.len() == 2 => [v[0], v[1]],
            Some(_) => {
                self.err(format!("`{key}` must be [re, im]"));
                default
            }
        }
    }

    fn opt_table(&self, key: &str) -> Option<Section<'a>> {
        match self.raw(key)? {
            Value::Table(t) => Some(Section::new(t, self.child(key), self.issues)),
            _ => {
                self.err(format!("`{key}` must be a table"));
                None
            }
        }
    }

    fn table(&self, key: &str) -> Option<Section<'a>> {
        if !self.has(key) {
            self.missing(key);
        }
        self.opt_table(key)
    }

    fn tables(&self, key: &str) -> Vec<Section<'a>> {
        match self.raw(key) {
            None => Vec::new(),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .filter_map(|(i, v)| match v {
                    Value::Table(t) => Some(Section::new(t, format!("{}[{i}]", self.child(key)), self.issues)),
                    _ => {
                        self.err(format!("`{key}` entries must be tables"));
                        None
                    }
                })
                .collect(),
            Some(_) => {
                self.err(format!("`{key}` must be an array of tables"));
                Vec::new()
            }
        }
    }

    /// Reports every key that was never read.
    fn finish(&self) {
        let used = self.used.borrow();
        for k in self.table.keys().filter(|k| !used.contains(*k)) {
            self.err(format!("unknown key `{k}`"));
        }
    }

    fn positive(&self, key: &str, x: f64) {
        if !(x > 0.0 && x.is_finite()) {
            self.err(format!("`{key}` must be positive and finite, got {x}"));
        }
    }
}

fn parse_axis(s: &Section) -> AxisSpec {
    let spec = AxisSpec {
        n: s.usize("n"),
        lower: s.f64("lower"),
        upper: s.f64("upper"),
        boundary: s.parse_str("boundary", Some(Boundary::Periodic)).unwrap_or(Boundary::Periodic),
    };
    if let Err(e) = spec.to_axis() {
        s.err(e.to_string());
    }
    s.finish();
    spec
}

fn parse_fn(s: &Section) -> FnSpec {
    let out = match s.str("kind").unwrap_or("") {
        "constant" => FnSpec::Constant { value: s.f64("value") },
        "polynomial" => FnSpec::Polynomial { axis: s.usize_or("axis", 0), coeffs: s.f64_list("coeffs") },
        "harmonic" => FnSpec::Harmonic { k: s.f64("k"), center: s.f64_list("center") },
        other => {
            s.err(format!("unknown function kind `{other}`"));
            FnSpec::Constant { value: 0.0 }
        }
    };
    s.finish();
    out
}

fn parse_hamiltonian(s: &Section) -> HamiltonianSpec {
    let fn_at = |key: &str| s.table(key).map(|t| parse_fn(&t)).unwrap_or(FnSpec::Constant { value: 0.0 });
    let out = match s.str("kind").unwrap_or("") {
        "free" => HamiltonianSpec::Free { mass: s.f64_or("mass", 1.0) },
        "harmonic" => HamiltonianSpec::Harmonic {
            mass: s.f64_or("mass", 1.0),
            omega: s.f64("omega"),
            center: s.f64_list("center"),
        },
        "potential" => HamiltonianSpec::Potential { mass: s.f64_or("mass", 1.0), v: fn_at("v") },
        "pdm" => HamiltonianSpec::Pdm { b: fn_at("b"), axis: s.usize_or("axis", 0) },
        "linear-drift" => HamiltonianSpec::LinearDrift { b: fn_at("b"), axis: s.usize_or("axis", 0) },
        "measure-momentum" => HamiltonianSpec::MeasureMomentum {
            g: s.f64("g"),
            system: s.usize_or("system", 0),
            pointer: s.usize_or("pointer", 1),
        },
        "measure-position" => HamiltonianSpec::MeasurePosition {
            g: s.f64("g"),
            system: s.usize_or("system", 0),
            pointer: s.usize_or("pointer", 1),
        },
        "measure-linear-observable" => HamiltonianSpec::MeasureLinearObservable {
            g: s.f64("g"),
            b: fn_at("b"),
            system: s.usize_or("system", 0),
            pointer: s.usize_or("pointer", 1),
        },
        other => {
            s.err(format!("unknown hamiltonian kind `{other}`"));
            HamiltonianSpec::Free { mass: 1.0 }
        }
    };
    if let Some(m) = out.mass() {
        s.positive("mass", m);
    }
    s.finish();
    out
}

fn check_weights(s: &Section, weights: impl Iterator<Item = [f64; 2]>) {
    let total: f64 = weights.map(|a| a[0] * a[0] + a[1] * a[1]).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        s.err(format!("amplitudes are not normalized: sum |c|^2 = {total}"));
    }
}

fn parse_initial(s: &Section, rank: usize) -> Vec<PacketSpec> {
    let packets: Vec<PacketSpec> = s
        .tables("packets")
        .iter()
        .map(|p| {
            let spec = PacketSpec {
                amplitude: p.complex_or("amplitude", [1.0, 0.0]),
                center: p.f64_list("center"),
                width: p.f64_list("width"),
                k: p.f64_list_or("k", vec![0.0; rank]),
            };
            for (key, v) in [("center", &spec.center), ("width", &spec.width), ("k", &spec.k)] {
                if v.len() != rank {
                    p.err(format!("`{key}` has {} entries, grid rank is {rank}", v.len()));
                }
            }
            for &w in &spec.width {
                p.positive("width", w);
            }
            p.finish();
            spec
        })
        .collect();
    if packets.is_empty() {
        s.err("at least one packet is required");
    } else {
        check_weights(s, packets.iter().map(|p| p.amplitude));
    }
    s.finish();
    packets
}

fn parse_time(s: &Section) -> TimeSpec {
    let propagator = match s.opt_str("propagator").unwrap_or("crank-nicolson") {
        "crank-nicolson" => PropagatorChoice::CrankNicolson,
        "exact" => PropagatorChoice::Exact,
        other => {
            s.err(format!("unknown propagator `{other}`"));
            PropagatorChoice::CrankNicolson
        }
    };
    let dt = s.f64("dt");
    let spec = TimeSpec { t_end: s.f64("t_end"), dt, propagator, reference_dt: s.f64_or("reference_dt", dt) };
    s.positive("t_end", spec.t_end);
    s.positive("dt", spec.dt);
    s.positive("reference_dt", spec.reference_dt);
    s.finish();
    spec
}

fn parse_hv(s: &Section) -> HvSpec {
    let mode = match s.opt_str("mode").unwrap_or("shared-rho") {
        "shared-rho" => BranchMode::SharedRho,
        "independent-rho" => BranchMode::IndependentRho,
        other => {
            s.err(format!("unknown branch mode `{other}`"));
            BranchMode::SharedRho
        }
    };
    let lambda = match s.opt_table("lambda") {
        None => LambdaSpec::TwoPoint,
        Some(t) => {
            let l = match t.str("kind").unwrap_or("") {
                "two-point" => LambdaSpec::TwoPoint,
                "ball-surface" => LambdaSpec::BallSurface,
                "generalized" => LambdaSpec::Generalized { a: t.f64("a"), w: t.f64("w") },
                other => {
                    t.err(format!("unknown lambda distribution `{other}`"));
                    LambdaSpec::TwoPoint
                }
            };
            if let LambdaSpec::Generalized { a, w } = l {
                if let Err(e) = (LambdaDistribution::GeneralizedTwoPoint { a, w }).validate() {
                    t.err(e.to_string());
                }
            }
            t.finish();
            l
        }
    };
    let spec = HvSpec {
        mode,
        lambda,
        n_micro: s.usize_list_or("n_micro", Vec::new()),
        replicas: s.usize_or("replicas", 16),
        dt_macro: s.f64_or("dt_macro", 0.05),
        antithetic: s.bool_or("antithetic", false),
        antithetic_dt: s.f64_list_or("antithetic_dt", Vec::new()),
        lambda_draws: s.usize_or("lambda_draws", 0),
    };
    s.positive("dt_macro", spec.dt_macro);
    if spec.n_micro.contains(&0) {
        s.err("`n_micro` entries must be positive");
    }
    if spec.replicas == 0 {
        s.err("`replicas` must be positive");
    }
    for &dt in &spec.antithetic_dt {
        s.positive("antithetic_dt", dt);
    }
    s.finish();
    spec
}

fn parse_pilot(s: &Section) -> PilotSpec {
    let spec = PilotSpec {
        trajectories: s.usize("trajectories"),
        bin_factor: s.usize_or("bin_factor", 1),
        snapshot_every: s.usize_or("snapshot_every", 1),
        max_dt: s.f64("max_dt"),
    };
    if spec.trajectories == 0 || spec.bin_factor == 0 || spec.snapshot_every == 0 {
        s.err("`trajectories`, `bin_factor` and `snapshot_every` must be positive");
    }
    s.positive("max_dt", spec.max_dt);
    s.finish();
    spec
}

fn parse_component(s: &Section) -> ComponentSpec {
    let basis = match s.str("basis").unwrap_or("") {
        "plane-wave" => BasisSpec::PlaneWave { k: s.f64("k"), center: s.f64_or("center", 0.0), window: s.f64("window") },
        "angular" => BasisSpec::Angular { m: s.i32("m") },
        "packet" => BasisSpec::Packet { center: s.f64("center"), width: s.f64("width"), k: s.f64_or("k", 0.0) },
        other => {
            s.err(format!("unknown basis `{other}`"));
            BasisSpec::Angular { m: 0 }
        }
    };
    let spec = ComponentSpec { amplitude: s.complex_or("amplitude", [1.0, 0.0]), basis };
    s.finish();
    spec
}

fn parse_experiment(s: &Section, index: usize) -> ExperimentSpec {
    let kind = match s.str("kind").unwrap_or("") {
        "momentum" => MeasureKindSpec::Momentum,
        "position" => MeasureKindSpec::Position,
        "angular-z" => MeasureKindSpec::AngularZ,
        "linear-observable" => MeasureKindSpec::LinearObservable,
        other => {
            s.err(format!("unknown measurement kind `{other}`"));
            MeasureKindSpec::Position
        }
    };
    let b = if kind == MeasureKindSpec::LinearObservable {
        s.table("b").map(|t| parse_fn(&t))
    } else {
        None
    };
    let components: Vec<_> = s.tables("components").iter().map(parse_component).collect();
    if components.is_empty() {
        s.err("at least one system component is required");
    } else {
        check_weights(s, components.iter().map(|c| c.amplitude));
    }
    let pointer = s.table("pointer");
    let (pointer_center, pointer_width) = pointer
        .as_ref()
        .map(|p| {
            let out = (p.f64_or("center", 0.0), p.f64("width"));
            p.finish();
            out
        })
        .unwrap_or((0.0, 1.0));
    let axis = |key: &str| {
        s.table(key)
            .map(|t| parse_axis(&t))
            .unwrap_or(AxisSpec { n: 8, lower: 0.0, upper: 1.0, boundary: Boundary::Periodic })
    };
    let t_span = s.f64("t_span");
    let spec = ExperimentSpec {
        name: s.opt_str("name").map(str::to_string).unwrap_or_else(|| format!("experiment{index}")),
        kind,
        b,
        g: s.f64("g"),
        t_span,
        components,
        pointer_center,
        pointer_width,
        system_axis: axis("system_axis"),
        pointer_axis: axis("pointer_axis"),
        trajectories: s.usize("trajectories"),
        snapshots: s.usize_or("snapshots", 50),
        max_dt: s.f64_or("max_dt", t_span / 200.0),
        cn_dt: s.f64_or("cn_dt", t_span / 200.0),
        stages: s.usize_or("stages", 1),
    };
    s.positive("t_span", spec.t_span);
    s.positive("pointer.width", spec.pointer_width);
    s.positive("max_dt", spec.max_dt);
    s.positive("cn_dt", spec.cn_dt);
    if spec.g == 0.0 || !spec.g.is_finite() {
        s.err("`g` must be non-zero and finite");
    }
    if spec.trajectories == 0 || spec.snapshots == 0 {
        s.err("`trajectories` and `snapshots` must be positive");
    }
    if !(1..=3).contains(&spec.stages) {
        s.err("`stages` must lie in 1..=3");
    }
    if spec.stages > 1 && kind != MeasureKindSpec::Position {
        s.err("chained stages apply to position measurements only");
    }
    if !spec.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        s.err("`name` may use only ASCII letters, digits, `-` and `_`");
    }
    s.finish();
    spec
}

/// Parses and validates a scenario, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc: Table = toml::from_str(text).map_err(|e| ConfigError {
        issues: vec![Issue { section: "document".into(), message: e.message().to_string() }],
    })?;
    let issues = RefCell::new(Vec::new());
    let root = Section::new(&doc, "", &issues);
    let scenario = root.parse_str::<ScenarioKind>("scenario", None);
    let name = root.str("name").unwrap_or("").to_string();
    if !name.is_empty() && !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        root.err("`name` may use only ASCII letters, digits, `-` and `_`");
    }
    let seed = root.opt_int("seed").map_or(0, |i| {
        u64::try_from(i).unwrap_or_else(|_| {
            root.err("`seed` must be non-negative");
            0
        })
    });
    let hbar = root.f64_or("hbar", 1.0);
    root.positive("hbar", hbar);
    let output_dir = root.opt_str("output_dir").map(str::to_string);

    let allowed: &[&str] = scenario.map_or(&[], |k| k.sections());
    let want = |key: &str| {
        let present = root.has(key);
        if scenario.is_some() && present && !allowed.contains(&key) {
            root.err(format!(
                "section `{key}` is not used by scenario `{}`",
                scenario.map_or("", |k| k.as_str())
            ));
        }
        if scenario.is_some() && !present && allowed.contains(&key) {
            root.missing(key);
        }
        present && allowed.contains(&key)
    };

    let grid = if want("grid") {
        root.opt_table("grid").map(|g| {
            let axes: Vec<_> = g.tables("axes").iter().map(parse_axis).collect();
            if axes.is_empty() {
                g.err("at least one axis is required");
            }
            g.finish();
            axes
        })
    } else {
        root.raw("grid");
        None
    };
    let rank = grid.as_ref().map_or(0, Vec::len);
    let hamiltonian = if want("hamiltonian") {
        root.opt_table("hamiltonian").map(|t| parse_hamiltonian(&t))
    } else {
        root.raw("hamiltonian");
        None
    };
    let initial = if want("initial") {
        root.opt_table("initial").map(|t| parse_initial(&t, rank))
    } else {
        root.raw("initial");
        None
    };
    let time = if want("time") {
        root.opt_table("time").map(|t| parse_time(&t))
    } else {
        root.raw("time");
        None
    };
    let hv = if want("hv") {
        root.opt_table("hv").map(|t| parse_hv(&t))
    } else {
        root.raw("hv");
        None
    };
    let pilot = if want("pilot") {
        root.opt_table("pilot").map(|t| parse_pilot(&t))
    } else {
        root.raw("pilot");
        None
    };
    let experiments = if want("experiment") {
        let list: Vec<_> = root.tables("experiment").iter().enumerate().map(|(i, t)| parse_experiment(t, i)).collect();
        let mut names = BTreeSet::new();
        for e in &list {
            if !names.insert(e.name.clone()) {
                root.err(format!("experiment name `{}` is used twice", e.name));
            }
        }
        list
    } else {
        root.raw("experiment");
        Vec::new()
    };
    let ordering = if want("ordering") {
        root.opt_table("ordering").map(|t| {
            let out = OrderingSpec { b: t.table("b").map(|b| parse_fn(&b)).unwrap_or(FnSpec::Constant { value: 1.0 }) };
            t.finish();
            out
        })
    } else {
        root.raw("ordering");
        None
    };
    let output = match root.opt_table("output") {
        Some(t) => {
            let out = OutputSpec { every: t.usize_or("every", 1), snapshots: t.bool_or("snapshots", true) };
            if out.every == 0 {
                t.err("`every` must be positive");
            }
            t.finish();
            out
        }
        None => OutputSpec { every: 1, snapshots: true },
    };
    let mut checks = BTreeMap::new();
    if let Some(t) = root.opt_table("checks") {
        let known = scenario.map_or(&[][..], |k| k.checks());
        for key in t.table.keys() {
            if !known.contains(&key.as_str()) {
                continue;
            }
            if let Some(v) = t.opt_f64(key) {
                if !(v >= 0.0 && v.is_finite()) {
                    t.err(format!("tolerance `{key}` must be finite and non-negative"));
                }
                checks.insert(key.clone(), v);
            }
        }
        t.finish();
    }
    root.finish();

    let cfg = ScenarioConfig {
        name,
        scenario: scenario.unwrap_or(ScenarioKind::EvolveQuantum),
        seed,
        hbar,
        output_dir,
        grid,
        hamiltonian,
        initial,
        time,
        output,
        hv,
        pilot,
        experiments,
        ordering,
        checks,
    };
    if issues.borrow().is_empty() {
        semantic_checks(&cfg, &issues);
    }
    let issues = issues.into_inner();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues })
    }
}

/// Cross-section invariants that need the parsed pieces together.
fn semantic_checks(cfg: &ScenarioConfig, issues: &RefCell<Vec<Issue>>) {
    let push = |section: &str, message: String| {
        issues.borrow_mut().push(Issue { section: section.to_string(), message });
    };
    let rank = cfg.rank();
    if let Some(h) = &cfg.hamiltonian {
        if let Err(e) = h.to_hamiltonian().validate(rank) {
            push("hamiltonian", e.to_string());
        }
        let needs_em = matches!(
            cfg.scenario,
            ScenarioKind::EvolveMadelung | ScenarioKind::HvBranches | ScenarioKind::HvFlip
        );
        if needs_em && h.em().is_none() {
            push("hamiltonian", format!("scenario `{}` needs a free, harmonic or potential hamiltonian", cfg.scenario.as_str()));
        }
    }
    if let Some(axes) = &cfg.grid {
        if let Err(e) = cfg.grid_axes().and_then(hvq_core::field::Grid::new) {
            push("grid", e.to_string());
        }
        if cfg.scenario == ScenarioKind::OrderingReport && axes.len() != 1 {
            push("grid", "the ordering report needs a one-dimensional grid".into());
        }
    }
    if let (Some(time), Some(hv)) = (&cfg.time, &cfg.hv) {
        if cfg.scenario == ScenarioKind::HvFlip && !hv.n_micro.is_empty() {
            let steps = time.t_end / hv.dt_macro;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                push("hv", "`time.t_end` must be a whole number of `dt_macro` steps".into());
            }
        }
    }
    for e in &cfg.experiments {
        if e.kind == MeasureKindSpec::AngularZ {
            let ax = &e.system_axis;
            if ax.boundary != Boundary::Periodic || ax.lower != 0.0 || (ax.upper - std::f64::consts::TAU).abs() > 1e-12 {
                push(&format!("experiment.{}", e.name), "angular system axis must be periodic on [0, 2π)".into());
            }
        }
        let fits = e.components.iter().all(|c| {
            matches!(
                (e.kind, c.basis),
                (MeasureKindSpec::Momentum, BasisSpec::PlaneWave { .. })
                    | (MeasureKindSpec::AngularZ, BasisSpec::Angular { .. })
                    | (MeasureKindSpec::Position | MeasureKindSpec::LinearObservable, BasisSpec::Packet { .. })
            )
        });
        if !fits {
            push(&format!("experiment.{}", e.name), format!("component basis does not fit a {} measurement", e.kind.as_str()));
        }
    }
}

fn axis_table(a: &AxisSpec) -> Table {
    let mut t = Table::new();
    t.insert("n".into(), Value::Integer(a.n as i64));
    t.insert("lower".into(), Value::Float(a.lower));
    t.insert("upper".into(), Value::Float(a.upper));
    t.insert("boundary".into(), Value::String(a.boundary.as_str().into()));
    t
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::Float(x)).collect())
}

fn fn_table(f: &FnSpec) -> Table {
    let mut t = Table::new();
    match f {
        FnSpec::Constant { value } => {
            t.insert("kind".into(), "constant".into());
            t.insert("value".into(), Value::Float(*value));
        }
        FnSpec::Polynomial { axis, coeffs } => {
            t.insert("kind".into(), "polynomial".into());
            t.insert("axis".into(), Value::Integer(*axis as i64));
            t.insert("coeffs".into(), floats(coeffs));
        }
        FnSpec::Harmonic { k, center } => {
            t.insert("kind".into(), "harmonic".into());
            t.insert("k".into(), Value::Float(*k));
            t.insert("center".into(), floats(center));
        }
    }
    t
}

fn hamiltonian_table(h: &HamiltonianSpec) -> Table {
    let mut t = Table::new();
    t.insert("kind".into(), h.kind().into());
    let idx = |x: usize| Value::Integer(x as i64);
    match h {
        HamiltonianSpec::Free { mass } => {
            t.insert("mass".into(), Value::Float(*mass));
        }
        HamiltonianSpec::Harmonic { mass, omega, center } => {
            t.insert("mass".into(), Value::Float(*mass));
            t.insert("omega".into(), Value::Float(*omega));
            t.insert("center".into(), floats(center));
        }
        HamiltonianSpec::Potential { mass, v } => {
            t.insert("mass".into(), Value::Float(*mass));
            t.insert("v".into(), Value::Table(fn_table(v)));
        }
        HamiltonianSpec::Pdm { b, axis } | HamiltonianSpec::LinearDrift { b, axis } => {
            t.insert("b".into(), Value::Table(fn_table(b)));
            t.insert("axis".into(), idx(*axis));
        }
        HamiltonianSpec::MeasureMomentum { g, system, pointer } | HamiltonianSpec::MeasurePosition { g, system, pointer } => {
            t.insert("g".into(), Value::Float(*g));
            t.insert("system".into(), idx(*system));
            t.insert("pointer".into(), idx(*pointer));
        }
        HamiltonianSpec::MeasureLinearObservable { g, b, system, pointer } => {
            t.insert("g".into(), Value::Float(*g));
            t.insert("b".into(), Value::Table(fn_table(b)));
            t.insert("system".into(), idx(*system));
            t.insert("pointer".into(), idx(*pointer));
        }
    }
    t
}

fn experiment_table(e: &ExperimentSpec) -> Table {
    let mut t = Table::new();
    t.insert("name".into(), e.name.clone().into());
    t.insert("kind".into(), e.kind.as_str().into());
    if let Some(b) = &e.b {
        t.insert("b".into(), Value::Table(fn_table(b)));
    }
    t.insert("g".into(), Value::Float(e.g));
    t.insert("t_span".into(), Value::Float(e.t_span));
    let comps = e
        .components
        .iter()
        .map(|c| {
            let mut ct = Table::new();
            ct.insert("amplitude".into(), floats(&c.amplitude));
            match c.basis {
                BasisSpec::PlaneWave { k, center, window } => {
                    ct.insert("basis".into(), "plane-wave".into());
                    ct.insert("k".into(), Value::Float(k));
                    ct.insert("center".into(), Value::Float(center));
                    ct.insert("window".into(), Value::Float(window));
                }
                BasisSpec::Angular { m } => {
                    ct.insert("basis".into(), "angular".into());
                    ct.insert("m".into(), Value::Integer(m as i64));
                }
                BasisSpec::Packet { center, width, k } => {
                    ct.insert("basis".into(), "packet".into());
                    ct.insert("center".into(), Value::Float(center));
                    ct.insert("width".into(), Value::Float(width));
                    ct.insert("k".into(), Value::Float(k));
                }
            }
            Value::Table(ct)
        })
        .collect();
    t.insert("components".into(), Value::Array(comps));
    let mut p = Table::new();
    p.insert("center".into(), Value::Float(e.pointer_center));
    p.insert("width".into(), Value::Float(e.pointer_width));
    t.insert("pointer".into(), Value::Table(p));
    t.insert("system_axis".into(), Value::Table(axis_table(&e.system_axis)));
    t.insert("pointer_axis".into(), Value::Table(axis_table(&e.pointer_axis)));
    t.insert("trajectories".into(), Value::Integer(e.trajectories as i64));
    t.insert("snapshots".into(), Value::Integer(e.snapshots as i64));
    t.insert("max_dt".into(), Value::Float(e.max_dt));
    t.insert("cn_dt".into(), Value::Float(e.cn_dt));
    t.insert("stages".into(), Value::Integer(e.stages as i64));
    t
}

impl ScenarioConfig {
    /// Canonical document with every default spelled out.
    pub fn to_table(&self) -> Table {
        let mut root = Table::new();
        root.insert("scenario".into(), self.scenario.as_str().into());
        root.insert("name".into(), self.name.clone().into());
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        root.insert("hbar".into(), Value::Float(self.hbar));
        if let Some(d) = &self.output_dir {
            root.insert("output_dir".into(), d.clone().into());
        }
        if let Some(axes) = &self.grid {
            let mut g = Table::new();
            g.insert("axes".into(), Value::Array(axes.iter().map(|a| Value::Table(axis_table(a))).collect()));
            root.insert("grid".into(), Value::Table(g));
        }
        if let Some(h) = &self.hamiltonian {
            root.insert("hamiltonian".into(), Value::Table(hamiltonian_table(h)));
        }
        if let Some(packets) = &self.initial {
            let list = packets
                .iter()
                .map(|p| {
                    let mut t = Table::new();
                    t.insert("amplitude".into(), floats(&p.amplitude));
                    t.insert("center".into(), floats(&p.center));
                    t.insert("width".into(), floats(&p.width));
                    t.insert("k".into(), floats(&p.k));
                    Value::Table(t)
                })
                .collect();
            let mut t = Table::new();
            t.insert("packets".into(), Value::Array(list));
            root.insert("initial".into(), Value::Table(t));
        }
        if let Some(time) = &self.time {
            let mut t = Table::new();
            t.insert("t_end".into(), Value::Float(time.t_end));
            t.insert("dt".into(), Value::Float(time.dt));
            t.insert("reference_dt".into(), Value::Float(time.reference_dt));
            t.insert("propagator".into(), time.propagator.as_str().into());
            root.insert("time".into(), Value::Table(t));
        }
        let mut out = Table::new();
        out.insert("every".into(), Value::Integer(self.output.every as i64));
        out.insert("snapshots".into(), Value::Boolean(self.output.snapshots));
        root.insert("output".into(), Value::Table(out));
        if let Some(hv) = &self.hv {
            let mut t = Table::new();
            t.insert("mode".into(), hv.mode.as_str().into());
            let mut l = Table::new();
            match hv.lambda {
                LambdaSpec::TwoPoint => {
                    l.insert("kind".into(), "two-point".into());
                }
                LambdaSpec::BallSurface => {
                    l.insert("kind".into(), "ball-surface".into());
                }
                LambdaSpec::Generalized { a, w } => {
                    l.insert("kind".into(), "generalized".into());
                    l.insert("a".into(), Value::Float(a));
                    l.insert("w".into(), Value::Float(w));
                }
            }
            t.insert("lambda".into(), Value::Table(l));
            t.insert("n_micro".into(), Value::Array(hv.n_micro.iter().map(|&n| Value::Integer(n as i64)).collect()));
            t.insert("replicas".into(), Value::Integer(hv.replicas as i64));
            t.insert("dt_macro".into(), Value::Float(hv.dt_macro));
            t.insert("antithetic".into(), Value::Boolean(hv.antithetic));
            t.insert("antithetic_dt".into(), floats(&hv.antithetic_dt));
            t.insert("lambda_draws".into(), Value::Integer(hv.lambda_draws as i64));
            root.insert("hv".into(), Value::Table(t));
        }
        if let Some(p) = &self.pilot {
            let mut t = Table::new();
            t.insert("trajectories".into(), Value::Integer(p.trajectories as i64));
            t.insert("bin_factor".into(), Value::Integer(p.bin_factor as i64));
            t.insert("snapshot_every".into(), Value::Integer(p.snapshot_every as i64));
            t.insert("max_dt".into(), Value::Float(p.max_dt));
            root.insert("pilot".into(), Value::Table(t));
        }
        if !self.experiments.is_empty() {
            root.insert(
                "experiment".into(),
                Value::Array(self.experiments.iter().map(|e| Value::Table(experiment_table(e))).collect()),
            );
        }
        if let Some(o) = &self.ordering {
            let mut t = Table::new();
            t.insert("b".into(), Value::Table(fn_table(&o.b)));
            root.insert("ordering".into(), Value::Table(t));
        }
        if !self.checks.is_empty() {
            let t: Table = self.checks.iter().map(|(k, v)| (k.clone(), Value::Float(*v))).collect();
            root.insert("checks".into(), Value::Table(t));
        }
        root
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_table()).expect("config tables serialize")
    }
}
