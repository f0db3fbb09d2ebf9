//! λ-weighted ergodic averages of the certificates and the transportation
//! formula that certifies them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hpe::Certificate;
use crate::linalg::{inner, VectorH};

/// Tolerance on the transport weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Negative `ε^a` within this distance of zero is reported as zero.
pub const NONNEGATIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErgodicError {
    #[error("transport weights sum to {0}, not 1")]
    WeightSum(f64),
    #[error("transport weight {index} is negative: {value}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("transport needs {points} weights, got {weights}")]
    Length { points: usize, weights: usize },
    #[error("transport needs at least one point")]
    Empty,
}

/// Neumaier-compensated scalar accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Sum {
    value: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.value + x;
        if self.value.abs() >= x.abs() {
            self.carry += (self.value - t) + x;
        } else {
            self.carry += (x - t) + self.value;
        }
        self.value = t;
    }

    fn get(&self) -> f64 {
        self.value + self.carry
    }
}

/// An aggregated triple `(z̃^a, v^a, ε^a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicPoint {
    pub z_tilde: VectorH,
    pub v: VectorH,
    /// Raw value; may sit a rounding error below zero.
    pub eps: f64,
}

impl ErgodicPoint {
    /// `ε^a` clamped to zero when it is negative only by rounding.
    pub fn eps_reported(&self) -> f64 {
        clamp_eps(self.eps)
    }
}

fn clamp_eps(eps: f64) -> f64 {
    if (-NONNEGATIVITY_TOL..0.0).contains(&eps) {
        0.0
    } else {
        eps
    }
}

/// Streaming accumulators for `Λ_k`, `Σλz̃`, `Σλv`, `Σλε` and `Σλ⟨z̃, v⟩`.
///
/// The cross term is accumulated around the first `z̃` to keep the final
/// subtraction well conditioned; the result is shift invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicState {
    count: usize,
    lambda_sum: Sum,
    z_sum: VectorH,
    v_sum: VectorH,
    eps_sum: Sum,
    cross_sum: Sum,
    anchor: Option<VectorH>,
}

impl ErgodicState {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            lambda_sum: Sum::default(),
            z_sum: VectorH::zeros(dim),
            v_sum: VectorH::zeros(dim),
            eps_sum: Sum::default(),
            cross_sum: Sum::default(),
            anchor: None,
        }
    }

    /// Number of certificates absorbed.
    pub fn count(&self) -> usize {
        self.count
    }

    /// `Λ_k = Σ λ_j`.
    pub fn lambda_sum(&self) -> f64 {
        self.lambda_sum.get()
    }

    pub fn update(&mut self, cert: &Certificate) {
        let anchor = self.anchor.get_or_insert_with(|| cert.z_tilde.clone());
        let shifted = &cert.z_tilde - anchor;
        let lam = cert.lambda;
        self.lambda_sum.add(lam);
        self.z_sum.axpy(lam, &shifted);
        self.v_sum.axpy(lam, &cert.v);
        self.eps_sum.add(lam * cert.eps);
        self.cross_sum.add(lam * inner(&shifted, &cert.v).expect("certificate dimension"));
        self.count += 1;
    }

    /// `z̃^a`, or `None` before the first update.
    pub fn z_tilde(&self) -> Option<VectorH> {
        let anchor = self.anchor.as_ref()?;
        Some(anchor + &self.z_sum.scale(1.0 / self.lambda_sum()))
    }

    pub fn v(&self) -> Option<VectorH> {
        self.anchor.as_ref()?;
        Some(self.v_sum.scale(1.0 / self.lambda_sum()))
    }

    /// Raw `ε^a = (Σλε + Σλ⟨z̃, v⟩)/Λ − ⟨z̃^a, v^a⟩`.
    pub fn eps(&self) -> Option<f64> {
        self.anchor.as_ref()?;
        let lam = self.lambda_sum();
        let za_shift = self.z_sum.scale(1.0 / lam);
        let va = self.v_sum.scale(1.0 / lam);
        let cross = inner(&za_shift, &va).expect("dimension");
        Some((self.eps_sum.get() + self.cross_sum.get()) / lam - cross)
    }

    pub fn point(&self) -> Option<ErgodicPoint> {
        Some(ErgodicPoint { z_tilde: self.z_tilde()?, v: self.v()?, eps: self.eps()? })
    }

    /// `‖v^a‖`, or 0 before the first update.
    pub fn norm_v(&self) -> f64 {
        self.v().map_or(0.0, |v| v.norm())
    }
}

/// Transportation formula: `z̃^a = Σα z̃`, `v^a = Σα v`,
/// `ε^a = Σα(ε + ⟨z̃ − z̃^a, v − v^a⟩)`.
pub fn transport(
    points: &[(VectorH, VectorH, f64)],
    weights: &[f64],
) -> Result<ErgodicPoint, ErgodicError> {
    if points.is_empty() {
        return Err(ErgodicError::Empty);
    }
    if points.len() != weights.len() {
        return Err(ErgodicError::Length { points: points.len(), weights: weights.len() });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(ErgodicError::NegativeWeight { index, value });
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(ErgodicError::WeightSum(total));
    }
    let n = points[0].0.dim();
    let mut za = VectorH::zeros(n);
    let mut va = VectorH::zeros(n);
    for ((z, v, _), &a) in points.iter().zip(weights) {
        za.axpy(a, z);
        va.axpy(a, v);
    }
    let mut eps = Sum::default();
    for ((z, v, e), &a) in points.iter().zip(weights) {
        let dz = z - &za;
        let dv = v - &va;
        eps.add(a * (e + inner(&dz, &dv).expect("dimension")));
    }
    Ok(ErgodicPoint { z_tilde: za, v: va, eps: eps.get() })
}

/// Direct `O(k)` evaluation of the ergodic triple over `certs`, returning
/// both `ε^a` forms: with `v_j − v^a` and with plain `v_j` in the inner product.
pub fn direct_average(certs: &[Certificate]) -> Option<(ErgodicPoint, f64)> {
    let first = certs.first()?;
    let lam: f64 = certs.iter().map(|c| c.lambda).sum();
    let n = first.z_tilde.dim();
    let mut za = VectorH::zeros(n);
    let mut va = VectorH::zeros(n);
    for c in certs {
        za.axpy(c.lambda / lam, &c.z_tilde);
        va.axpy(c.lambda / lam, &c.v);
    }
    let (mut centered, mut plain) = (Sum::default(), Sum::default());
    for c in certs {
        let dz = &c.z_tilde - &za;
        centered.add(c.lambda * (c.eps + inner(&dz, &(&c.v - &va)).expect("dimension")));
        plain.add(c.lambda * (c.eps + inner(&dz, &c.v).expect("dimension")));
    }
    Some((
        ErgodicPoint { z_tilde: za, v: va, eps: centered.get() / lam },
        plain.get() / lam,
    ))
}
