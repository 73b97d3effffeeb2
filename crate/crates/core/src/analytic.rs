//! Analytic coefficient functions of `(q, t)` with their first derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::field::{Grid, RealField};
use crate::scalar::Real;

type ValueFn<T> = dyn Fn(&[T], T) -> T + Send + Sync;
type GradFn<T> = dyn Fn(&[T], T, usize) -> T + Send + Sync;

/// A real function of position and time together with its analytic partial
/// derivatives `d/dq_k`.
#[derive(Clone)]
pub struct AnalyticFn<T> {
    label: String,
    value: Arc<ValueFn<T>>,
    grad: Arc<GradFn<T>>,
    constant: Option<T>,
    time_dependent: bool,
}

impl<T> fmt::Debug for AnalyticFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticFn({})", self.label)
    }
}

impl<T: Real> AnalyticFn<T> {
    /// General closure pair. `grad(q, t, k)` must return `d value / d q_k`.
    pub fn new(
        label: impl Into<String>,
        time_dependent: bool,
        value: impl Fn(&[T], T) -> T + Send + Sync + 'static,
        grad: impl Fn(&[T], T, usize) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            grad: Arc::new(grad),
            constant: None,
            time_dependent,
        }
    }

    pub fn constant(c: T) -> Self {
        Self {
            label: format!("{c}"),
            value: Arc::new(move |_, _| c),
            grad: Arc::new(|_, _, _| T::zero()),
            constant: Some(c),
            time_dependent: false,
        }
    }

    /// `sum_j coeffs[j] * q_axis^j`.
    pub fn polynomial(axis: usize, coeffs: Vec<T>) -> Self {
        if coeffs.iter().skip(1).all(|c| *c == T::zero()) {
            return Self::constant(coeffs.first().copied().unwrap_or_else(T::zero));
        }
        let label = format!(
            "poly(q{}; {})",
            axis + 1,
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
        );
        let value_coeffs = coeffs.clone();
        let value = move |q: &[T], _t: T| value_coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * q[axis] + c);
        let grad = move |q: &[T], _t: T, k: usize| {
            if k != axis {
                return T::zero();
            }
            coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(T::zero(), |acc, (j, &c)| acc * q[axis] + c * T::count(j))
        };
        Self::new(label, false, value, grad)
    }

    /// `k/2 * |q - center|^2` over all coordinates.
    pub fn harmonic(k: T, center: Vec<T>) -> Self {
        let label = format!("harmonic(k={k})");
        let c1 = center.clone();
        let value = move |q: &[T], _t: T| {
            let r2: T = q.iter().zip(&c1).map(|(&x, &c)| (x - c) * (x - c)).sum();
            k * r2 * T::lit(0.5)
        };
        let grad = move |q: &[T], _t: T, axis: usize| k * (q[axis] - center[axis]);
        Self::new(label, false, value, grad)
    }

    #[inline]
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    #[inline]
    pub fn value(&self, q: &[T], t: T) -> T {
        (self.value)(q, t)
    }

    #[inline]
    pub fn derivative(&self, q: &[T], t: T, axis: usize) -> T {
        (self.grad)(q, t, axis)
    }

    pub fn as_constant(&self) -> Option<T> {
        self.constant
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    /// Pointwise sum with another function.
    pub fn plus(&self, other: &Self) -> Self {
        if let (Some(a), Some(b)) = (self.constant, other.constant) {
            return Self::constant(a + b);
        }
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        Self::new(
            format!("{}+{}", self.label, other.label),
            self.time_dependent || other.time_dependent,
            move |q, t| a.value(q, t) + b.value(q, t),
            move |q, t, k| ga.derivative(q, t, k) + gb.derivative(q, t, k),
        )
    }

    /// Pointwise product with a scalar.
    pub fn times(&self, s: T) -> Self {
        if let Some(c) = self.constant {
            return Self::constant(c * s);
        }
        let (a, ga) = (self.clone(), self.clone());
        Self::new(
            format!("{s}·{}", self.label),
            self.time_dependent,
            move |q, t| a.value(q, t) * s,
            move |q, t, k| ga.derivative(q, t, k) * s,
        )
    }

    /// Pointwise product of two functions.
    pub fn product(&self, other: &Self) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (ga, gb) = (self.clone(), other.clone());
        Self::new(
            format!("({})·({})", self.label, other.label),
            self.time_dependent || other.time_dependent,
            move |q, t| a.value(q, t) * b.value(q, t),
            move |q, t, k| ga.derivative(q, t, k) * gb.value(q, t) + ga.value(q, t) * gb.derivative(q, t, k),
        )
    }

    pub fn sample(&self, grid: &Arc<Grid<T>>, t: T) -> Result<RealField<T>> {
        RealField::from_fn(grid.clone(), |q| self.value(q, t))
    }

    pub fn sample_derivative(&self, grid: &Arc<Grid<T>>, t: T, axis: usize) -> Result<RealField<T>> {
        RealField::from_fn(grid.clone(), |q| self.derivative(q, t, axis))
    }
}
