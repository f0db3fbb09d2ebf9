//! The inertial under-relaxed HPE driver.
//!
//! Each step extrapolates `w = z_{k−1} + α_{k−1}(z_{k−1} − z_{k−2})`, asks an
//! [`InnerSolver`] for a certificate `(z̃, v, ε, λ)`, verifies the relative
//! error criterion and moves to `z_k = w − τλv`.

pub mod checks;
pub mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ergodic::ErgodicState;
use crate::linalg::VectorH;
use crate::operators::OracleError;
use crate::params::{HpeParams, ParamError};

pub use trace::{IterationRecord, Trace, TraceError, TraceHeader, CSV_COLUMNS, TRACE_SCHEMA_VERSION};

/// Default slack on the error criterion.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HpeError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("inner solver failed at k = {k}: {source}")]
    Oracle { k: usize, source: OracleError },
    #[error("relative error criterion violated at k = {k}: ratio {ratio:.12} > 1 + {tol:e}")]
    Certification { k: usize, ratio: f64, tol: f64 },
    #[error("non-finite {what} at k = {k}")]
    NonFinite { k: usize, what: &'static str },
    #[error("negative ε = {eps} at k = {k}")]
    NegativeEps { k: usize, eps: f64 },
    #[error("λ = {lambda} at k = {k} is below the floor {floor}")]
    LambdaBelowFloor { k: usize, lambda: f64, floor: f64 },
    #[error("certificate dimension {got} does not match {expected} at k = {k}")]
    Dimension { k: usize, expected: usize, got: usize },
    #[error("invalid stopping rule: {0}")]
    Stopping(String),
}

/// One inner-solver output `(z̃_k, v_k, ε_k, λ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub z_tilde: VectorH,
    pub v: VectorH,
    pub eps: f64,
    pub lambda: f64,
}

/// Produces a certificate for the current extrapolated point.
pub trait InnerSolver {
    fn solve(&mut self, k: usize, w: &VectorH) -> Result<Certificate, OracleError>;

    /// `λ̲ > 0` with `λ_k ≥ λ̲` for every `k`.
    fn lambda_floor(&self) -> f64;
}

/// The pieces of the error criterion `‖λv + z̃ − w‖² + 2λε ≤ σ²‖z̃ − w‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionTerms {
    /// `‖λv + z̃ − w‖²`.
    pub residual_sq: f64,
    /// `‖z̃ − w‖²`.
    pub gap_sq: f64,
    /// Rounding floor for the denominator (see [`CriterionTerms::ratio`]).
    pub floor_sq: f64,
}

impl CriterionTerms {
    pub fn compute(cert: &Certificate, w: &VectorH) -> Self {
        let lv = cert.v.scale(cert.lambda);
        let residual = &(&lv + &cert.z_tilde) - w;
        let scale = 1e-12 * (w.norm() + cert.z_tilde.norm() + lv.norm());
        Self {
            residual_sq: residual.norm_sq(),
            gap_sq: cert.z_tilde.dist_sq(w),
            floor_sq: scale * scale,
        }
    }

    /// `(‖λv + z̃ − w‖² + 2λε) / max(σ²‖z̃ − w‖², floor)`, with `0/0 = 0`.
    ///
    /// The floor sits twelve digits below the operand sizes, so an exact
    /// step whose residual is pure rounding (`σ = 0`) still scores `≪ 1`.
    pub fn ratio(&self, sigma: f64, lambda: f64, eps: f64) -> f64 {
        let num = self.residual_sq + 2.0 * lambda * eps;
        let den = (sigma * sigma * self.gap_sq).max(self.floor_sq);
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }
}

/// `w = z_curr + α_k(z_curr − z_prev)`.
pub fn extrapolate(
    z_curr: &VectorH,
    z_prev: &VectorH,
    alpha_k: f64,
    alpha_max: f64,
) -> Result<VectorH, ParamError> {
    if !(0.0..=alpha_max).contains(&alpha_k) {
        return Err(ParamError::ScheduleOutOfRange { k: 0, value: alpha_k });
    }
    let mut w = z_curr.clone();
    if alpha_k != 0.0 {
        w.axpy(alpha_k, &(z_curr - z_prev));
    }
    Ok(w)
}

/// Error ratio of `cert` at `w`; fails when it exceeds `1 + tol`.
pub fn certify(cert: &Certificate, w: &VectorH, sigma: f64, tol: f64) -> Result<f64, HpeError> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(ParamError::OutOfRange { name: "σ", value: sigma, range: "[0, 1)" }.into());
    }
    let ratio = CriterionTerms::compute(cert, w).ratio(sigma, cert.lambda, cert.eps);
    if ratio > 1.0 + tol {
        return Err(HpeError::Certification { k: 0, ratio, tol });
    }
    Ok(ratio)
}

/// `z_k = w − τλv`.
pub fn relax_update(w: &VectorH, cert: &Certificate, tau: f64) -> VectorH {
    let step = tau * cert.lambda;
    VectorH::from_fn(w.dim(), |i| w[i] - step * cert.v[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// `‖v_k‖ ≤ ρ` and `ε_k ≤ ε̂`.
    #[default]
    Pointwise,
    /// `‖v_k^a‖ ≤ ρ` and `ε_k^a ≤ ε̂`.
    Ergodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingRule {
    pub rho: f64,
    pub eps_hat: f64,
    pub max_iter: usize,
    pub mode: StopMode,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { rho: 1e-8, eps_hat: 1e-10, max_iter: 1_000_000, mode: StopMode::Pointwise }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<(), HpeError> {
        if !(self.rho > 0.0) {
            return Err(HpeError::Stopping(format!("ρ = {} must be positive", self.rho)));
        }
        if !(self.eps_hat > 0.0) {
            return Err(HpeError::Stopping(format!("ε̂ = {} must be positive", self.eps_hat)));
        }
        if self.max_iter == 0 {
            return Err(HpeError::Stopping("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Slack on the error criterion.
    pub tol: f64,
    /// A known solution; enables the distance columns of the trace.
    pub reference: Option<VectorH>,
    /// When false, criterion violations are recorded but do not abort.
    pub enforce_certificate: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, reference: None, enforce_certificate: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Converged { k: usize },
    ErgodicConverged { k: usize },
    CapReached { k: usize },
}

impl Verdict {
    pub fn iterations(&self) -> usize {
        match *self {
            Verdict::Converged { k } | Verdict::ErgodicConverged { k } | Verdict::CapReached { k } => k,
        }
    }

    pub fn is_converged(&self) -> bool {
        !matches!(self, Verdict::CapReached { .. })
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    /// Completed iterations.
    pub k: usize,
    /// `z_k`.
    pub z_curr: VectorH,
    /// `z_{k−1}`.
    pub z_prev: VectorH,
    /// The last extrapolated point `w_{k−1}`.
    pub w: VectorH,
    pub ergodic: ErgodicState,
    pub trace: Vec<IterationRecord>,
}

impl SolverState {
    pub fn new(z0: VectorH) -> Self {
        let n = z0.dim();
        Self {
            k: 0,
            z_prev: z0.clone(),
            w: z0.clone(),
            z_curr: z0,
            ergodic: ErgodicState::new(n),
            trace: Vec::new(),
        }
    }
}

/// Everything known about step `k`, handed to run observers.
#[derive(Debug)]
pub struct StepView<'a> {
    pub k: usize,
    pub alpha: f64,
    pub w: &'a VectorH,
    pub cert: &'a Certificate,
    /// `z_k`.
    pub z: &'a VectorH,
    pub ergodic: &'a ErgodicState,
    pub record: &'a IterationRecord,
}

/// Runs the driver from `z0` until the stopping rule fires or the cap is hit.
pub fn run(
    z0: &VectorH,
    solver: &mut dyn InnerSolver,
    params: &HpeParams,
    stop: &StoppingRule,
    opts: &RunOptions,
) -> Result<(SolverState, Verdict), HpeError> {
    run_with_observer(z0, solver, params, stop, opts, &mut |_| {})
}

pub fn run_with_observer(
    z0: &VectorH,
    solver: &mut dyn InnerSolver,
    params: &HpeParams,
    stop: &StoppingRule,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<(SolverState, Verdict), HpeError> {
    let params = params.validate()?;
    stop.validate()?;
    if !z0.is_finite() {
        return Err(HpeError::NonFinite { k: 0, what: "z₀" });
    }
    let n = z0.dim();
    let floor = solver.lambda_floor();
    let (sigma, tau, eta) = (params.sigma, params.tau, params.eta);
    let mut state = SolverState::new(z0.clone());
    state.trace.reserve(stop.max_iter.min(1 << 16));

    for k in 1..=stop.max_iter {
        let alpha = params.alpha_at(k - 1);
        let w = extrapolate(&state.z_curr, &state.z_prev, alpha, params.alpha)?;
        let cert = solver.solve(k, &w).map_err(|source| HpeError::Oracle { k, source })?;

        if cert.z_tilde.dim() != n || cert.v.dim() != n {
            return Err(HpeError::Dimension { k, expected: n, got: cert.z_tilde.dim().min(cert.v.dim()) });
        }
        if !cert.z_tilde.is_finite() {
            return Err(HpeError::NonFinite { k, what: "z̃" });
        }
        if !cert.v.is_finite() {
            return Err(HpeError::NonFinite { k, what: "v" });
        }
        if !cert.eps.is_finite() || !cert.lambda.is_finite() {
            return Err(HpeError::NonFinite { k, what: "ε or λ" });
        }
        if cert.eps < 0.0 {
            return Err(HpeError::NegativeEps { k, eps: cert.eps });
        }
        if cert.lambda < floor {
            return Err(HpeError::LambdaBelowFloor { k, lambda: cert.lambda, floor });
        }

        let terms = CriterionTerms::compute(&cert, &w);
        let ratio = terms.ratio(sigma, cert.lambda, cert.eps);
        if opts.enforce_certificate && ratio > 1.0 + opts.tol {
            return Err(HpeError::Certification { k, ratio, tol: opts.tol });
        }

        let z = relax_update(&w, &cert, tau);
        if !z.is_finite() {
            return Err(HpeError::NonFinite { k, what: "z" });
        }
        state.ergodic.update(&cert);

        let lambda_v_sq = cert.lambda * cert.lambda * cert.v.norm_sq();
        let s_k = (eta * z.dist_sq(&w)).max((1.0 - sigma * sigma) * tau * terms.gap_sq);
        let record = IterationRecord {
            k,
            alpha,
            norm_v: cert.v.norm(),
            eps: cert.eps,
            lambda: cert.lambda,
            error_ratio: ratio,
            step_norm: z.dist(&state.z_curr),
            s_k,
            dist_to_solution: opts.reference.as_ref().map(|r| z.dist(r)),
            lambda_sum: state.ergodic.lambda_sum(),
            norm_v_a: state.ergodic.norm_v(),
            eps_a: state.ergodic.eps().unwrap_or(0.0),
            residual_sq: terms.residual_sq,
            gap_sq: terms.gap_sq,
            floor_sq: terms.floor_sq,
            lambda_v_sq,
            dist_w: opts.reference.as_ref().map(|r| w.dist(r)),
        };
        observer(&StepView {
            k,
            alpha,
            w: &w,
            cert: &cert,
            z: &z,
            ergodic: &state.ergodic,
            record: &record,
        });

        let done = match stop.mode {
            StopMode::Pointwise => record.norm_v <= stop.rho && record.eps <= stop.eps_hat,
            StopMode::Ergodic => record.norm_v_a <= stop.rho && record.eps_a <= stop.eps_hat,
        };
        state.trace.push(record);
        state.z_prev = std::mem::replace(&mut state.z_curr, z);
        state.w = w;
        state.k = k;
        if done {
            let verdict = match stop.mode {
                StopMode::Pointwise => Verdict::Converged { k },
                StopMode::Ergodic => Verdict::ErgodicConverged { k },
            };
            return Ok((state, verdict));
        }
    }
    let k = state.k;
    Ok((state, Verdict::CapReached { k }))
}
