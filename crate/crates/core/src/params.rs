//! Inertia/relaxation parameter bundle and the scalar maps that tie
//! `(α, σ, β)` to the under-relaxation factor `τ`.
//!
//! The default path takes `(α, σ, β)` with `α < β` and derives
//! `β′ = max{β, β′_min(σ)}`, `τ = τ(σ, β)`, `η = 2/((1+σ)τ) − 1` and `q(α)`.
//! The expert path takes `(α, σ, τ)` directly and only requires `q(α) > 0`,
//! which is all the convergence theorems use.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for root identities of the closed forms.
pub const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    #[error("α = {alpha} must be < β = {beta} (q(α) ≤ 0 or α ≥ β)")]
    AlphaNotBelowBeta { alpha: f64, beta: f64 },
    #[error("η = {eta} ≤ 0: (1+σ)τ = {product} must be < 2")]
    EtaNotPositive { eta: f64, product: f64 },
    #[error("q(α) ≤ 0: q({alpha}) = {q} (α too large for σ = {sigma}, τ = {tau})")]
    QNotPositive { alpha: f64, q: f64, sigma: f64, tau: f64 },
    #[error("α schedule decreases at k = {k}: {prev} > {next}")]
    ScheduleDecreasing { k: usize, prev: f64, next: f64 },
    #[error("α schedule leaves [0, α] at k = {k}: {value}")]
    ScheduleOutOfRange { k: usize, value: f64 },
}

fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    range: &'static str,
) -> Result<(), ParamError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::OutOfRange { name, value, range })
    }
}

fn check_sigma(sigma: f64) -> Result<(), ParamError> {
    check_range("σ", sigma, (0.0..1.0).contains(&sigma), "[0, 1)")
}

fn check_beta(beta: f64) -> Result<(), ParamError> {
    check_range("β", beta, beta > 0.0 && beta < 1.0, "(0, 1)")
}

/// Smallest admissible `β′` for a given `σ`: `2(1−σ)/(3−σ+√(9+2σ−7σ²))`.
pub fn beta_prime_floor(sigma: f64) -> Result<f64, ParamError> {
    check_sigma(sigma)?;
    Ok(2.0 * (1.0 - sigma) / (3.0 - sigma + (9.0 + 2.0 * sigma - 7.0 * sigma * sigma).sqrt()))
}

/// `β′ = max{β, β′_min(σ)}`.
pub fn beta_prime(sigma: f64, beta: f64) -> Result<f64, ParamError> {
    check_beta(beta)?;
    Ok(beta.max(beta_prime_floor(sigma)?))
}

/// `β ↦ 2(β−1)²/(2(β−1)²+3β−1)`, the inverse of [`inverse_map`].
pub fn forward_map(beta: f64) -> f64 {
    let d = (beta - 1.0) * (beta - 1.0);
    2.0 * d / (2.0 * d + 3.0 * beta - 1.0)
}

/// Under-relaxation factor `τ(σ, β) = forward_map(β′)/(1+σ)`.
pub fn tau_of(sigma: f64, beta: f64) -> Result<f64, ParamError> {
    let bp = beta_prime(sigma, beta)?;
    // Equals 1 exactly at β′ = β′_min(σ); clamp the rounding overshoot.
    Ok((forward_map(bp) / (1.0 + sigma)).min(1.0))
}

/// `η(σ, τ) = 2/((1+σ)τ) − 1`.
pub fn eta_of(sigma: f64, tau: f64) -> Result<f64, ParamError> {
    check_sigma(sigma)?;
    check_range("τ", tau, tau > 0.0 && tau <= 1.0, "(0, 1]")?;
    let product = (1.0 + sigma) * tau;
    let eta = 2.0 / product - 1.0;
    if product >= 2.0 || eta <= 0.0 {
        return Err(ParamError::EtaNotPositive { eta, product });
    }
    Ok(eta)
}

/// `q(α′) = (η−1)α′² − (1+2η)α′ + η`.
pub fn q_value(alpha_prime: f64, eta: f64) -> f64 {
    (eta - 1.0) * alpha_prime * alpha_prime - (1.0 + 2.0 * eta) * alpha_prime + eta
}

/// Smallest root of `q`: `2η/(2η + 1 + √(8η+1))`.
pub fn q_smallest_root(eta: f64) -> f64 {
    2.0 * eta / (2.0 * eta + 1.0 + (8.0 * eta + 1.0).sqrt())
}

/// `t ↦ (4−2t)/(4−t+√(16t−7t²))` on `(0, 1+σ]`.
pub fn inverse_map(t: f64, sigma: f64) -> Result<f64, ParamError> {
    check_sigma(sigma)?;
    let cap = 1.0 + sigma;
    check_range("t", t, t > 0.0 && t <= cap * (1.0 + 1e-12), "(0, 1+σ]")?;
    let t = t.min(cap);
    Ok((4.0 - 2.0 * t) / (4.0 - t + (16.0 * t - 7.0 * t * t).sqrt()))
}

/// Rule producing the extrapolation factors `α_{k−1} ∈ [0, α]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSchedule {
    /// `α_k ≡ α`. Required by the ergodic rate bounds.
    #[default]
    Constant,
    /// Linear ramp from `start·α` to `α` over `horizon` steps, then constant.
    Ramp { start: f64, horizon: usize },
}

impl AlphaSchedule {
    /// `α_j` for `j ≥ 0`, given the upper bound `alpha`.
    pub fn alpha_at(&self, j: usize, alpha: f64) -> f64 {
        match *self {
            AlphaSchedule::Constant => alpha,
            AlphaSchedule::Ramp { start, horizon } => {
                if horizon == 0 || j >= horizon {
                    alpha
                } else {
                    let t = j as f64 / horizon as f64;
                    alpha * (start + (1.0 - start) * t)
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, AlphaSchedule::Constant)
    }

    /// Number of leading indices on which the schedule can change.
    pub fn horizon(&self) -> usize {
        match *self {
            AlphaSchedule::Constant => 1,
            AlphaSchedule::Ramp { horizon, .. } => horizon + 1,
        }
    }
}

/// Validated parameters under the relaxed inertial assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpeParams {
    pub alpha: f64,
    pub sigma: f64,
    /// Target bound `β`; `None` on the expert path.
    pub beta: Option<f64>,
    /// Smallest root of `q`; equals `max{β, β′_min(σ)}` on the default path.
    pub beta_prime: f64,
    pub tau: f64,
    pub eta: f64,
    pub q_alpha: f64,
    pub schedule: AlphaSchedule,
}

impl HpeParams {
    /// Default path: derive `τ` from `(σ, β)`.
    pub fn from_beta(alpha: f64, sigma: f64, beta: f64) -> Result<Self, ParamError> {
        Self::from_beta_with_schedule(alpha, sigma, beta, AlphaSchedule::Constant)
    }

    pub fn from_beta_with_schedule(
        alpha: f64,
        sigma: f64,
        beta: f64,
        schedule: AlphaSchedule,
    ) -> Result<Self, ParamError> {
        check_range("α", alpha, (0.0..1.0).contains(&alpha), "[0, 1)")?;
        check_sigma(sigma)?;
        check_beta(beta)?;
        if alpha >= beta {
            return Err(ParamError::AlphaNotBelowBeta { alpha, beta });
        }
        let tau = tau_of(sigma, beta)?;
        let mut params = Self::derive(alpha, sigma, tau, schedule)?;
        params.beta = Some(beta);
        params.beta_prime = beta_prime(sigma, beta)?;
        params.validate()
    }

    /// Expert path: raw `(α, σ, τ)`; only `q(α) > 0` is required.
    pub fn from_tau(alpha: f64, sigma: f64, tau: f64) -> Result<Self, ParamError> {
        Self::from_tau_with_schedule(alpha, sigma, tau, AlphaSchedule::Constant)
    }

    pub fn from_tau_with_schedule(
        alpha: f64,
        sigma: f64,
        tau: f64,
        schedule: AlphaSchedule,
    ) -> Result<Self, ParamError> {
        check_range("α", alpha, (0.0..1.0).contains(&alpha), "[0, 1)")?;
        Self::derive(alpha, sigma, tau, schedule)?.validate()
    }

    fn derive(alpha: f64, sigma: f64, tau: f64, schedule: AlphaSchedule) -> Result<Self, ParamError> {
        let eta = eta_of(sigma, tau)?;
        Ok(Self {
            alpha,
            sigma,
            beta: None,
            beta_prime: q_smallest_root(eta),
            tau,
            eta,
            q_alpha: q_value(alpha, eta),
            schedule,
        })
    }

    /// Re-checks every invariant; returns the bundle unchanged on success.
    pub fn validate(self) -> Result<Self, ParamError> {
        check_range("α", self.alpha, (0.0..1.0).contains(&self.alpha), "[0, 1)")?;
        let eta = eta_of(self.sigma, self.tau)?;
        if (eta - self.eta).abs() > ROOT_TOL * (1.0 + eta) {
            return Err(ParamError::EtaNotPositive { eta: self.eta, product: (1.0 + self.sigma) * self.tau });
        }
        if let Some(beta) = self.beta {
            check_beta(beta)?;
            if self.alpha >= beta {
                return Err(ParamError::AlphaNotBelowBeta { alpha: self.alpha, beta });
            }
            let expected = tau_of(self.sigma, beta)?;
            if (expected - self.tau).abs() > ROOT_TOL {
                return Err(ParamError::OutOfRange {
                    name: "τ",
                    value: self.tau,
                    range: "τ(σ, β) for the configured β",
                });
            }
        }
        let q = q_value(self.alpha, self.eta);
        if !(q > 0.0) {
            return Err(ParamError::QNotPositive {
                alpha: self.alpha,
                q,
                sigma: self.sigma,
                tau: self.tau,
            });
        }
        if let AlphaSchedule::Ramp { start, .. } = self.schedule {
            check_range("ramp start", start, (0.0..=1.0).contains(&start), "[0, 1]")?;
        }
        let horizon = self.schedule.horizon();
        let mut prev = self.schedule.alpha_at(0, self.alpha);
        for k in 0..=horizon {
            let next = self.schedule.alpha_at(k, self.alpha);
            if !(0.0..=self.alpha).contains(&next) {
                return Err(ParamError::ScheduleOutOfRange { k, value: next });
            }
            if next < prev {
                return Err(ParamError::ScheduleDecreasing { k, prev, next });
            }
            prev = next;
        }
        Ok(Self { q_alpha: q, ..self })
    }

    /// `α_j`, the extrapolation factor used to form `w_j`.
    pub fn alpha_at(&self, j: usize) -> f64 {
        self.schedule.alpha_at(j, self.alpha)
    }

    /// `1 + 2α(1+α)/((1−α)² q(α))`, the constant shared by every rate bound.
    pub fn energy_constant(&self) -> f64 {
        let a = self.alpha;
        1.0 + 2.0 * a * (1.0 + a) / ((1.0 - a) * (1.0 - a) * self.q_alpha)
    }
}
