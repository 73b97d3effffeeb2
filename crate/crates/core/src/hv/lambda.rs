use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{usage, Result};
use crate::scalar::Real;

/// Law of the hidden variable `lambda`. Only densities that factor into a
/// position part and a `lambda` part are supported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaDistribution<T> {
    /// `±hbar` with equal probability.
    TwoPoint { hbar: T },
    /// `nu` uniform on the sphere of radius `hbar`; `lambda = +hbar` on the
    /// upper hemisphere `nu_3 >= 0` and `-hbar` otherwise.
    BallSurface { hbar: T },
    /// `+a` with probability `w`, `-a` otherwise. Exploratory only.
    GeneralizedTwoPoint { a: T, w: T },
}

impl<T: Real> LambdaDistribution<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::TwoPoint { hbar } | Self::BallSurface { hbar } => {
                if !(hbar > T::zero() && hbar.is_finite()) {
                    return usage(format!("hbar must be positive and finite, got {hbar}"));
                }
            }
            Self::GeneralizedTwoPoint { a, w } => {
                if !(a > T::zero() && a.is_finite()) {
                    return usage(format!("two-point value must be positive and finite, got {a}"));
                }
                if !(w > T::zero() && w < T::one()) {
                    return usage(format!("two-point weight must lie in (0, 1), got {w}"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> T {
        match *self {
            Self::TwoPoint { .. } | Self::BallSurface { .. } => T::zero(),
            Self::GeneralizedTwoPoint { a, w } => a * (w + w - T::one()),
        }
    }

    /// Magnitude `|lambda|`, which every law here fixes.
    pub fn magnitude(&self) -> T {
        match *self {
            Self::TwoPoint { hbar } | Self::BallSurface { hbar } => hbar,
            Self::GeneralizedTwoPoint { a, .. } => a,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match *self {
            Self::TwoPoint { hbar } => {
                if rng.random_bool(0.5) {
                    hbar
                } else {
                    -hbar
                }
            }
            Self::BallSurface { hbar } => {
                if ball_surface_vector(hbar, rng)[2] >= T::zero() {
                    hbar
                } else {
                    -hbar
                }
            }
            Self::GeneralizedTwoPoint { a, w } => {
                if rng.random_bool(w.as_f64()) {
                    a
                } else {
                    -a
                }
            }
        }
    }
}

/// Uniform point on the sphere of radius `hbar` by normalizing a Gaussian
/// vector.
pub fn ball_surface_vector<T: Real, R: Rng + ?Sized>(hbar: T, rng: &mut R) -> [T; 3] {
    loop {
        let v: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r > 1e-12 {
            return v.map(|x| T::lit(x / r) * hbar);
        }
    }
}

/// Generator for stream `replica` of a seed. Streams never overlap, so
/// replicas can draw independently in parallel.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// One draw, deterministic in `seed`.
pub fn sample_lambda<T: Real>(dist: &LambdaDistribution<T>, seed: u64) -> T {
    dist.sample(&mut replica_rng(seed, 0))
}

/// `n` consecutive draws from the stream of `seed`.
pub fn sample_lambdas<T: Real>(dist: &LambdaDistribution<T>, n: usize, seed: u64) -> Vec<T> {
    let mut rng = replica_rng(seed, 0);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible() {
        let d = LambdaDistribution::TwoPoint { hbar: 1.0_f64 };
        assert_eq!(sample_lambdas(&d, 50, 9), sample_lambdas(&d, 50, 9));
        assert_eq!(sample_lambda(&d, 3), sample_lambda(&d, 3));
    }

    #[test]
    fn ball_vectors_have_radius_hbar() {
        let mut rng = replica_rng(1, 0);
        for _ in 0..100 {
            let v = ball_surface_vector(0.5_f64, &mut rng);
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((r - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(LambdaDistribution::TwoPoint { hbar: 0.0_f64 }.validate().is_err());
        assert!(LambdaDistribution::GeneralizedTwoPoint { a: 1.0_f64, w: 1.0 }.validate().is_err());
        assert!(LambdaDistribution::GeneralizedTwoPoint { a: 1.0_f64, w: 0.3 }.validate().is_ok());
    }

    #[test]
    fn streams_differ() {
        let d = LambdaDistribution::TwoPoint { hbar: 1.0_f64 };
        let mut r0 = replica_rng(5, 0);
        let a: Vec<f64> = (0..64).map(|_| d.sample(&mut r0)).collect();
        let mut r1 = replica_rng(5, 1);
        let b: Vec<f64> = (0..64).map(|_| d.sample(&mut r1)).collect();
        assert_ne!(a, b);
    }
}
