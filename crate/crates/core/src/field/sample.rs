use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_traits::Zero;

use crate::scalar::{Cplx, Real};

/// Value stored at a grid node: a real scalar or a complex amplitude.
pub trait Sample<T: Real>:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<T, Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    /// Number of `f64` words per sample in the binary dump.
    const WORDS: usize;

    fn is_finite_sample(&self) -> bool;

    fn magnitude(&self) -> T;

    fn push_words(&self, out: &mut Vec<f64>);

    fn from_words(words: &[f64]) -> Self;
}

impl<T: Real> Sample<T> for T {
    const WORDS: usize = 1;

    #[inline]
    fn is_finite_sample(&self) -> bool {
        self.is_finite()
    }

    #[inline]
    fn magnitude(&self) -> T {
        self.abs()
    }

    fn push_words(&self, out: &mut Vec<f64>) {
        out.push(self.as_f64());
    }

    fn from_words(words: &[f64]) -> Self {
        T::lit(words[0])
    }
}

impl<T: Real> Sample<T> for Cplx<T> {
    const WORDS: usize = 2;

    #[inline]
    fn is_finite_sample(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    #[inline]
    fn magnitude(&self) -> T {
        self.norm()
    }

    fn push_words(&self, out: &mut Vec<f64>) {
        out.push(self.re.as_f64());
        out.push(self.im.as_f64());
    }

    fn from_words(words: &[f64]) -> Self {
        Cplx::new(T::lit(words[0]), T::lit(words[1]))
    }
}
