//! State vectors: the per-time-point payload `u_i ∈ ℝ^n`.

use std::fmt;
use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Algebra the solver needs from a state vector.
///
/// Implementations must be deterministic: the same sequence of operations on
/// the same inputs yields bit-identical results. Reductions such as
/// [`StateVector::norm_sq`] use a fixed summation order.
pub trait StateVector: Clone + Send + Sync + fmt::Debug + 'static {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self += other`
    fn add_assign(&mut self, other: &Self);

    /// `self -= other`
    fn sub_assign(&mut self, other: &Self);

    /// `self *= alpha`
    fn scale(&mut self, alpha: f64);

    /// `self += alpha * x`
    fn axpy(&mut self, alpha: f64, x: &Self);

    /// Sum of squared entries.
    fn norm_sq(&self) -> f64;

    /// Discrete 2-norm.
    fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn fill(&mut self, value: f64);

    /// Overwrite with pseudorandom entries in `[-1, 1)` determined by `seed`.
    fn fill_random(&mut self, seed: u64);

    fn is_finite(&self) -> bool;
}

/// Dense real vector; the state type used by all built-in problems.
#[derive(Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Vector(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() <= 8 {
            f.debug_list().entries(self.0.iter()).finish()
        } else {
            write!(f, "Vector(len={}, |.|={:.6e})", self.0.len(), self.norm())
        }
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(values: Vec<f64>) -> Self {
        Vector(values)
    }
}

impl StateVector for Vector {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    fn sub_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= b;
        }
    }

    fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    fn axpy(&mut self, alpha: f64, x: &Self) {
        debug_assert_eq!(self.0.len(), x.0.len());
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += alpha * b;
        }
    }

    fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    fn fill(&mut self, value: f64) {
        self.0.fill(value);
    }

    fn fill_random(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for a in &mut self.0 {
            *a = rng.gen_range(-1.0..1.0);
        }
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Pseudorandom vector with entries in `[-1, 1)`, drawn from ChaCha8 seeded
/// with `seed`.
pub fn random_state(seed: u64, n: usize) -> Result<Vector> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "random_state needs at least one entry".into(),
        ));
    }
    let mut v = Vector::zeros(n);
    v.fill_random(seed);
    Ok(v)
}

/// SplitMix64 finalizer; derives independent per-time-point seeds so that a
/// random initial guess does not depend on how points are distributed.
pub(crate) fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pairwise sum over a slice. The tree depends only on the slice length, so
/// the result is independent of how the values were produced or distributed.
pub fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            tree_sum(lo) + tree_sum(hi)
        }
    }
}
