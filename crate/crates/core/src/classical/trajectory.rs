use std::io::Write;

use rayon::prelude::*;

use crate::error::{usage, Error, Result};
use crate::field::{gradient, interpolate, RealField};
use crate::quantizer::VelocityFunctional;
use crate::scalar::Real;

/// Velocity lookup for trajectory integration.
pub trait VelocitySource<T: Real>: Sync {
    fn rank(&self) -> usize;

    /// Writes the velocity at `(q, t)` into `out`. Returns `Ok(false)` when the
    /// point lies in a near-node region where the value is unreliable.
    fn velocity(&self, q: &[T], t: T, out: &mut [T]) -> Result<bool>;
}

/// Time-independent velocity fields, interpolated multilinearly.
#[derive(Clone, Debug)]
pub struct FrozenVelocity<T: Real> {
    fields: Vec<RealField<T>>,
}

impl<T: Real> FrozenVelocity<T> {
    pub fn new(fields: Vec<RealField<T>>) -> Result<Self> {
        let Some(first) = fields.first() else {
            return usage("no velocity components");
        };
        if fields.len() != first.grid().rank() {
            return usage("one velocity component per axis is required");
        }
        for f in &fields {
            first.check_grid(f)?;
        }
        Ok(Self { fields })
    }
}

impl<T: Real> VelocitySource<T> for FrozenVelocity<T> {
    fn rank(&self) -> usize {
        self.fields.len()
    }

    fn velocity(&self, q: &[T], _t: T, out: &mut [T]) -> Result<bool> {
        for (o, f) in out.iter_mut().zip(&self.fields) {
            *o = interpolate(f, q)?;
        }
        Ok(true)
    }
}

/// Analytic velocity `v(q, t)`.
pub struct FnVelocity<F> {
    rank: usize,
    f: F,
}

impl<F> FnVelocity<F> {
    pub fn new(rank: usize, f: F) -> Self {
        Self { rank, f }
    }
}

impl<T: Real, F: Fn(&[T], T, &mut [T]) + Sync> VelocitySource<T> for FnVelocity<F> {
    fn rank(&self) -> usize {
        self.rank
    }

    fn velocity(&self, q: &[T], t: T, out: &mut [T]) -> Result<bool> {
        (self.f)(q, t, out);
        Ok(true)
    }
}

/// Snapshot series of momentum fields `p_k(q, t_j)`. The momentum is
/// interpolated in space and linearly in time, and the velocity functional is
/// applied at the exact particle position.
#[derive(Clone, Debug)]
pub struct MomentumSeries<T: Real> {
    functional: VelocityFunctional<T>,
    times: Vec<T>,
    momenta: Vec<Vec<RealField<T>>>,
    /// Density snapshots with their node floors `floor * max(rho)`.
    densities: Option<(Vec<RealField<T>>, Vec<T>)>,
}

impl<T: Real> MomentumSeries<T> {
    pub fn new(functional: VelocityFunctional<T>, times: Vec<T>, momenta: Vec<Vec<RealField<T>>>) -> Result<Self> {
        if times.is_empty() || times.len() != momenta.len() {
            return usage("need one momentum snapshot per timestamp");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return usage("snapshot times must increase strictly");
        }
        Ok(Self { functional, times, momenta, densities: None })
    }

    /// Momentum fields taken as the gradient of action snapshots.
    pub fn from_actions(functional: VelocityFunctional<T>, times: Vec<T>, actions: &[RealField<T>]) -> Result<Self> {
        let momenta = actions
            .iter()
            .map(|s| (0..s.grid().rank()).map(|k| gradient(s, k)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(functional, times, momenta)
    }

    /// Flags particles sitting where the density drops below `floor * max(rho)`.
    pub fn with_node_guard(mut self, densities: Vec<RealField<T>>, floor: T) -> Result<Self> {
        if densities.len() != self.times.len() {
            return usage("need one density snapshot per timestamp");
        }
        let floors = densities.iter().map(|r| floor * r.max()).collect();
        self.densities = Some((densities, floors));
        Ok(self)
    }

    fn bracket(&self, t: T) -> (usize, usize, T) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, T::zero());
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, T::zero());
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let theta = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        (j, j + 1, theta)
    }
}

impl<T: Real> VelocitySource<T> for MomentumSeries<T> {
    fn rank(&self) -> usize {
        self.momenta[0].len()
    }

    fn velocity(&self, q: &[T], t: T, out: &mut [T]) -> Result<bool> {
        let (j0, j1, theta) = self.bracket(t);
        let mut p = vec![T::zero(); q.len()];
        for (k, pk) in p.iter_mut().enumerate() {
            let a = interpolate(&self.momenta[j0][k], q)?;
            *pk = if theta == T::zero() {
                a
            } else {
                a + (interpolate(&self.momenta[j1][k], q)? - a) * theta
            };
        }
        self.functional.at(q, &p, t, out);
        if let Some((rho, floors)) = &self.densities {
            let near = if theta < T::lit(0.5) { j0 } else { j1 };
            let r = interpolate(&rho[near], q)?;
            if r < floors[near] {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Particle paths sampled at common output times.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet<T> {
    pub times: Vec<T>,
    /// `paths[particle][time]` is a coordinate vector.
    pub paths: Vec<Vec<Vec<T>>>,
    /// Particle left a dirichlet domain and was frozen.
    pub exited: Vec<bool>,
    /// Particle entered a near-node region and kept its last good velocity.
    pub near_node: Vec<bool>,
}

impl<T: Real> TrajectorySet<T> {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.paths.first().and_then(|p| p.first()).map_or(0, Vec::len)
    }

    pub fn initial(&self, particle: usize) -> &[T] {
        &self.paths[particle][0]
    }

    pub fn last(&self, particle: usize) -> &[T] {
        self.paths[particle].last().expect("at least one time")
    }

    /// Positions of all particles at output index `ti`.
    pub fn at_time(&self, ti: usize) -> Vec<Vec<T>> {
        self.paths.iter().map(|p| p[ti].clone()).collect()
    }

    pub fn flagged(&self, particle: usize) -> bool {
        self.exited[particle] || self.near_node[particle]
    }

    pub fn flagged_fraction(&self) -> f64 {
        let n = (0..self.len()).filter(|&i| self.flagged(i)).count();
        n as f64 / self.len().max(1) as f64
    }

    /// Wide CSV: `t` then one column per particle coordinate.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let rank = self.rank();
        let mut header = vec!["t".to_string()];
        for p in 0..self.len() {
            for k in 0..rank {
                header.push(format!("p{p}_q{}", k + 1));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (ti, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", t.as_f64())];
            for path in &self.paths {
                row.extend(path[ti].iter().map(|x| format!("{:.16e}", x.as_f64())));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Long CSV: `particle,t,q1..qn,flagged`.
    pub fn write_ensemble_csv(&self, mut w: impl Write) -> Result<()> {
        let rank = self.rank();
        let coords: Vec<String> = (1..=rank).map(|k| format!("q{k}")).collect();
        writeln!(w, "particle,t,{},flagged", coords.join(","))?;
        for (p, path) in self.paths.iter().enumerate() {
            let flag = u8::from(self.flagged(p));
            for (t, q) in self.times.iter().zip(path) {
                let qs: Vec<String> = q.iter().map(|x| format!("{:.16e}", x.as_f64())).collect();
                writeln!(w, "{p},{:.16e},{},{flag}", t.as_f64(), qs.join(","))?;
            }
        }
        Ok(())
    }
}

enum Outcome {
    Fine,
    NearNode,
    Exited,
}

fn eval<T: Real>(src: &dyn VelocitySource<T>, q: &[T], t: T, out: &mut [T]) -> Result<Outcome> {
    match src.velocity(q, t, out) {
        Ok(true) => Ok(Outcome::Fine),
        Ok(false) => Ok(Outcome::NearNode),
        Err(Error::OutOfDomain { .. }) => Ok(Outcome::Exited),
        Err(e) => Err(e),
    }
}

fn integrate_one<T: Real>(
    src: &dyn VelocitySource<T>,
    seed: &[T],
    times: &[T],
    max_dt: T,
) -> Result<(Vec<Vec<T>>, bool, bool)> {
    let rank = seed.len();
    let mut q = seed.to_vec();
    let mut path = Vec::with_capacity(times.len());
    path.push(q.clone());
    let (mut exited, mut near) = (false, false);
    let mut last_good = vec![T::zero(); rank];
    let mut k = [vec![T::zero(); rank], vec![T::zero(); rank], vec![T::zero(); rank], vec![T::zero(); rank]];
    let mut stage = vec![T::zero(); rank];
    match eval(src, &q, times[0], &mut last_good)? {
        Outcome::Exited => return usage("trajectory seed lies outside the domain"),
        Outcome::NearNode => near = true,
        Outcome::Fine => {}
    }
    for w in times.windows(2) {
        if !exited {
            let span = w[1] - w[0];
            let n = (span / max_dt).ceil().to_usize().unwrap_or(1).max(1);
            let h = span / T::count(n);
            let half = h * T::lit(0.5);
            for step in 0..n {
                let t = w[0] + h * T::count(step);
                let mut status = Outcome::Fine;
                for s in 0..4 {
                    let (c, ts) = match s {
                        0 => (T::zero(), t),
                        1 | 2 => (half, t + half),
                        _ => (h, t + h),
                    };
                    for d in 0..rank {
                        stage[d] = if s == 0 { q[d] } else { q[d] + c * k[s - 1][d] };
                    }
                    match eval(src, &stage, ts, &mut k[s])? {
                        Outcome::Fine => {}
                        other => {
                            status = other;
                            break;
                        }
                    }
                }
                match status {
                    Outcome::Fine => {
                        for d in 0..rank {
                            q[d] += h / T::lit(6.0) * (k[0][d] + T::lit(2.0) * (k[1][d] + k[2][d]) + k[3][d]);
                        }
                        last_good.copy_from_slice(&k[0]);
                    }
                    Outcome::NearNode => {
                        near = true;
                        for d in 0..rank {
                            stage[d] = q[d] + h * last_good[d];
                        }
                        let mut probe = vec![T::zero(); rank];
                        if let Outcome::Exited = eval(src, &stage, t + h, &mut probe)? {
                            exited = true;
                            break;
                        }
                        q.copy_from_slice(&stage);
                    }
                    Outcome::Exited => {
                        exited = true;
                        break;
                    }
                }
            }
        }
        path.push(q.clone());
    }
    Ok((path, exited, near))
}

/// RK4 integration of every seed through `times` (the first entry is the
/// start time) with sub-steps no larger than `max_dt`. Particles leaving a
/// dirichlet domain are frozen and flagged.
pub fn integrate_trajectories<T: Real>(
    src: &dyn VelocitySource<T>,
    seeds: &[Vec<T>],
    times: &[T],
    max_dt: T,
) -> Result<TrajectorySet<T>> {
    if seeds.is_empty() {
        return usage("at least one trajectory seed is required");
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return usage("output times must be non-empty and non-decreasing");
    }
    if !(max_dt > T::zero()) {
        return usage("time step must be positive");
    }
    if let Some(bad) = seeds.iter().find(|s| s.len() != src.rank()) {
        return usage(format!("seed has {} coordinates, velocity source has rank {}", bad.len(), src.rank()));
    }
    let results = seeds
        .par_iter()
        .map(|seed| integrate_one(src, seed, times, max_dt))
        .collect::<Result<Vec<_>>>()?;
    let mut set = TrajectorySet {
        times: times.to_vec(),
        paths: Vec::with_capacity(seeds.len()),
        exited: Vec::with_capacity(seeds.len()),
        near_node: Vec::with_capacity(seeds.len()),
    };
    for (path, exited, near) in results {
        set.paths.push(path);
        set.exited.push(exited);
        set.near_node.push(near);
    }
    Ok(set)
}

/// Pointer readout `(q_p(T) - q_p(0)) / (g T)` for every trajectory.
pub fn classical_pointer_readout<T: Real>(traj: &TrajectorySet<T>, g: T, t: T, pointer: usize) -> Result<Vec<T>> {
    if t == T::zero() || g == T::zero() {
        return usage("pointer readout needs non-zero g and T");
    }
    if pointer >= traj.rank() {
        return usage("pointer axis out of range");
    }
    Ok((0..traj.len())
        .map(|i| (traj.last(i)[pointer] - traj.initial(i)[pointer]) / (g * t))
        .collect())
}
