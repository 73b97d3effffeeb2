use crate::error::{usage, Result};
use crate::scalar::Real;

/// Smallest admissible number of samples along an axis.
pub const MIN_POINTS: usize = 8;

/// Boundary treatment of one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Samples at `lower + i h`, `i < n`, with `h = (upper - lower) / n`; index `n` wraps to `0`.
    Periodic,
    /// Samples at `lower + i h`, `i < n`, with `h = (upper - lower) / (n - 1)`;
    /// both end nodes lie on the domain boundary.
    Dirichlet,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Periodic => "periodic",
            Boundary::Dirichlet => "dirichlet",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Boundary::Periodic => 0,
            Boundary::Dirichlet => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Boundary::Periodic),
            1 => Some(Boundary::Dirichlet),
            _ => None,
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "dirichlet" | "dirichlet-zero" => Ok(Boundary::Dirichlet),
            other => Err(format!("unknown boundary kind `{other}`")),
        }
    }
}

/// One axis of a tensor-product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis<T> {
    n: usize,
    lower: T,
    upper: T,
    boundary: Boundary,
    spacing: T,
}

impl<T: Real> Axis<T> {
    pub fn new(n: usize, lower: T, upper: T, boundary: Boundary) -> Result<Self> {
        if n < MIN_POINTS {
            return usage(format!("axis needs at least {MIN_POINTS} points, got {n}"));
        }
        if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
            return usage(format!("axis bounds must be finite with lower < upper, got [{lower}, {upper}]"));
        }
        let cells = match boundary {
            Boundary::Periodic => n,
            Boundary::Dirichlet => n - 1,
        };
        let spacing = (upper - lower) / T::count(cells);
        Ok(Self { n, lower, upper, boundary, spacing })
    }

    pub fn periodic(n: usize, lower: T, upper: T) -> Result<Self> {
        Self::new(n, lower, upper, Boundary::Periodic)
    }

    pub fn dirichlet(n: usize, lower: T, upper: T) -> Result<Self> {
        Self::new(n, lower, upper, Boundary::Dirichlet)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn lower(&self) -> T {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> T {
        self.upper
    }

    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Domain length `upper - lower`.
    #[inline]
    pub fn extent(&self) -> T {
        self.upper - self.lower
    }

    #[inline]
    pub fn coord(&self, i: usize) -> T {
        self.lower + T::count(i) * self.spacing
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Quadrature weight of node `i`: rectangle rule on periodic axes,
    /// trapezoid rule on dirichlet axes.
    #[inline]
    pub fn weight(&self, i: usize) -> T {
        match self.boundary {
            Boundary::Periodic => self.spacing,
            Boundary::Dirichlet if i == 0 || i + 1 == self.n => self.spacing * T::lit(0.5),
            Boundary::Dirichlet => self.spacing,
        }
    }

    /// Angular wavenumbers in FFT order (`0, 1, .., n/2 - 1, -n/2, .., -1` times `2 pi / L`).
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.n;
        let period = T::count(n) * self.spacing;
        let base = T::lit(2.0) * T::PI() / period;
        (0..n)
            .map(|j| {
                let signed = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
                base * T::lit(signed)
            })
            .collect()
    }
}

/// Tensor-product grid with row-major sample order (last axis fastest).
#[derive(Clone, Debug)]
pub struct Grid<T> {
    axes: Vec<Axis<T>>,
    strides: Vec<usize>,
    len: usize,
    weights: Vec<T>,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.axes == other.axes
    }
}

impl<T: Real> Grid<T> {
    pub fn new(axes: Vec<Axis<T>>) -> Result<Self> {
        if axes.is_empty() {
            return usage("grid needs at least one axis");
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].len();
        }
        let len = strides[0] * axes[0].len();
        let mut grid = Self { axes, strides, len, weights: Vec::new() };
        grid.weights = (0..len)
            .map(|flat| {
                let mut w = T::one();
                let mut rest = flat;
                for (k, axis) in grid.axes.iter().enumerate() {
                    let i = rest / grid.strides[k];
                    rest %= grid.strides[k];
                    w *= axis.weight(i);
                }
                w
            })
            .collect();
        Ok(grid)
    }

    /// One-dimensional convenience constructor.
    pub fn line(n: usize, lower: T, upper: T, boundary: Boundary) -> Result<Self> {
        Self::new(vec![Axis::new(n, lower, upper, boundary)?])
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn axes(&self) -> &[Axis<T>] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, k: usize) -> &Axis<T> {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    #[inline]
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Quadrature weight of each sample (product of per-axis weights).
    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        self.strides
            .iter()
            .map(|s| {
                let i = rest / s;
                rest %= s;
                i
            })
            .collect()
    }

    /// Coordinates of the sample with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(self.rank());
        self.point_into(flat, &mut out);
        out
    }

    pub(crate) fn point_into(&self, flat: usize, out: &mut Vec<T>) {
        out.clear();
        let mut rest = flat;
        for (axis, s) in self.axes.iter().zip(&self.strides) {
            out.push(axis.coord(rest / s));
            rest %= s;
        }
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return usage(format!("axis {axis} out of range for rank-{} grid", self.rank()));
        }
        Ok(())
    }

    /// Calls `visit(base)` for each line along `axis`; samples of the line are
    /// `base + i * stride` for `i < n`.
    pub(crate) fn for_each_line(&self, axis: usize, mut visit: impl FnMut(usize)) {
        let n = self.axes[axis].len();
        let stride = self.strides[axis];
        let block = n * stride;
        for outer in 0..self.len / block {
            for inner in 0..stride {
                visit(outer * block + inner);
            }
        }
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> T {
        self.axes.iter().map(Axis::spacing).fold(T::infinity(), T::min)
    }

    /// Grid keeping every `factor`-th node of each periodic axis.
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return usage("decimation factor must be positive");
        }
        let axes = self
            .axes
            .iter()
            .map(|a| {
                if a.boundary() != Boundary::Periodic || a.len() % factor != 0 {
                    return usage("decimation needs periodic axes divisible by the factor");
                }
                Axis::periodic(a.len() / factor, a.lower(), a.upper())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }
}
