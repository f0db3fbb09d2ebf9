//! Dense real vectors modelling the Hilbert space `H`.
//!
//! [`VectorH`] is an owned, finite, fixed-dimension coordinate vector. The
//! fallible free functions ([`inner`], [`convex_combine`]) report dimension
//! mismatches as errors; the arithmetic operators panic on mismatch, the same
//! way slice indexing does, and are meant for code that already knows the
//! operands come from one problem instance.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inner products of vectors longer than this use compensated summation.
pub const COMPENSATED_THRESHOLD: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector must have at least one coordinate")]
    Empty,
    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

/// A point of the model Hilbert space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VectorH(Vec<f64>);

impl VectorH {
    /// Builds a vector, rejecting empty input and non-finite coordinates.
    pub fn new(coords: Vec<f64>) -> Result<Self, LinalgError> {
        if coords.is_empty() {
            return Err(LinalgError::Empty);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(LinalgError::NonFinite { index, value });
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "VectorH requires dimension >= 1");
        Self(vec![0.0; dim])
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        assert!(dim >= 1, "VectorH requires dimension >= 1");
        Self((0..dim).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `‖self − other‖²`, panicking on dimension mismatch.
    pub fn dist_sq(&self, other: &Self) -> f64 {
        assert_same_dim(self, other);
        if self.dim() > COMPENSATED_THRESHOLD {
            neumaier_sum(self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)))
        } else {
            self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
        }
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.dist_sq(other).sqrt()
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        assert_same_dim(self, x);
        for (s, xi) in self.0.iter_mut().zip(&x.0) {
            *s += a * xi;
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.iter().map(|x| a * x).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&x| f(x)).collect())
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self(v.iter().copied().collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_same_dim(self, other);
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for VectorH {
    type Error = LinalgError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<VectorH> for Vec<f64> {
    fn from(v: VectorH) -> Self {
        v.0
    }
}

impl Index<usize> for VectorH {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn assert_same_dim(a: &VectorH, b: &VectorH) {
    assert_eq!(a.dim(), b.dim(), "VectorH dimension mismatch");
}

fn check_dims(a: &VectorH, b: &VectorH) -> Result<(), LinalgError> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { left: a.dim(), right: b.dim() })
    }
}

/// Neumaier's variant of Kahan summation.
fn neumaier_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() > COMPENSATED_THRESHOLD {
        neumaier_sum(a.iter().zip(b).map(|(x, y)| x * y))
    } else {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

/// `⟨a, b⟩`.
pub fn inner(a: &VectorH, b: &VectorH) -> Result<f64, LinalgError> {
    check_dims(a, b)?;
    Ok(dot(&a.0, &b.0))
}

/// `p·w + (1 − p)·z` for any real `p`.
pub fn convex_combine(p: f64, w: &VectorH, z: &VectorH) -> Result<VectorH, LinalgError> {
    check_dims(w, z)?;
    Ok(VectorH(
        w.0.iter().zip(&z.0).map(|(wi, zi)| p * wi + (1.0 - p) * zi).collect(),
    ))
}

/// Both sides of `‖pw + (1−p)z‖² = p‖w‖² + (1−p)‖z‖² − p(1−p)‖w − z‖²`.
pub fn combination_identity_sides(
    p: f64,
    w: &VectorH,
    z: &VectorH,
) -> Result<(f64, f64), LinalgError> {
    let lhs = convex_combine(p, w, z)?.norm_sq();
    let rhs = p * w.norm_sq() + (1.0 - p) * z.norm_sq() - p * (1.0 - p) * w.dist_sq(z);
    Ok((lhs, rhs))
}

impl Add<&VectorH> for &VectorH {
    type Output = VectorH;

    fn add(self, rhs: &VectorH) -> VectorH {
        assert_same_dim(self, rhs);
        VectorH(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&VectorH> for &VectorH {
    type Output = VectorH;

    fn sub(self, rhs: &VectorH) -> VectorH {
        assert_same_dim(self, rhs);
        VectorH(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<&VectorH> for f64 {
    type Output = VectorH;

    fn mul(self, rhs: &VectorH) -> VectorH {
        rhs.scale(self)
    }
}

impl Neg for &VectorH {
    type Output = VectorH;

    fn neg(self) -> VectorH {
        self.scale(-1.0)
    }
}

impl AddAssign<&VectorH> for VectorH {
    fn add_assign(&mut self, rhs: &VectorH) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&VectorH> for VectorH {
    fn sub_assign(&mut self, rhs: &VectorH) {
        self.axpy(-1.0, rhs);
    }
}
