//! Trace invariants: every inequality of the convergence analysis, evaluated
//! from recorded scalars alone so the same code serves live runs and offline
//! certification.
//!
//! Notation: `φ_k = ‖z_k − z*‖²` with `φ_{−1} = φ_0 = d₀²`, and
//! `δ_k = α_{k−1}(1 + α_{k−1})‖z_{k−1} − z_{k−2}‖²`.

use serde::{Deserialize, Serialize};

use super::IterationRecord;
use crate::params::HpeParams;

/// `max(1e−9, 1e−12·magnitude)`.
pub fn inequality_tol(magnitude: f64) -> f64 {
    1e-9_f64.max(1e-12 * magnitude.abs())
}

/// Result of one invariant over a whole trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Number of steps the check was evaluated on.
    pub checked: usize,
    /// Smallest slack (`rhs − lhs`, or `1 + tol − ratio` for ratios) observed.
    pub worst_slack: f64,
    /// First failing `k`.
    pub first_failure: Option<usize>,
    /// Set when the check could not run (no reference solution, empty trace).
    pub skipped: Option<String>,
}

impl CheckOutcome {
    fn skipped(name: &str, why: &str) -> Self {
        Self {
            name: name.into(),
            passed: true,
            checked: 0,
            worst_slack: f64::INFINITY,
            first_failure: None,
            skipped: Some(why.into()),
        }
    }
}

struct Tally {
    name: String,
    checked: usize,
    worst: f64,
    first_failure: Option<usize>,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self { name: name.into(), checked: 0, worst: f64::INFINITY, first_failure: None }
    }

    /// Records `lhs ≤ rhs + tol`.
    fn le(&mut self, k: usize, lhs: f64, rhs: f64, tol: f64) {
        self.checked += 1;
        let slack = rhs - lhs;
        self.worst = self.worst.min(slack);
        if !(slack >= -tol) && self.first_failure.is_none() {
            self.first_failure = Some(k);
        }
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            passed: self.first_failure.is_none(),
            name: self.name,
            checked: self.checked,
            worst_slack: self.worst,
            first_failure: self.first_failure,
            skipped: None,
        }
    }
}

/// Re-evaluates the relative error criterion from the recorded terms.
pub fn criterion_check(records: &[IterationRecord], sigma: f64, tol: f64) -> CheckOutcome {
    let mut t = Tally::new("error criterion");
    for r in records {
        let num = r.residual_sq + 2.0 * r.lambda * r.eps;
        let den = (sigma * sigma * r.gap_sq).max(r.floor_sq);
        let ratio = if num == 0.0 { 0.0 } else { num / den };
        t.le(r.k, ratio, 1.0, tol);
    }
    t.finish()
}

fn phis(records: &[IterationRecord], d0: f64) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(records.len() + 1);
    out.push(d0 * d0);
    for r in records {
        out.push(r.dist_to_solution?.powi(2));
    }
    Some(out)
}

/// `‖w_{k−1} − z*‖² − ‖z_k − z*‖² − s_k` for each `k`; `None` without distances.
pub fn fejer_residuals(records: &[IterationRecord]) -> Option<Vec<f64>> {
    records
        .iter()
        .map(|r| Some(r.dist_w?.powi(2) - r.dist_to_solution?.powi(2) - r.s_k))
        .collect()
}

pub fn fejer_check(records: &[IterationRecord]) -> CheckOutcome {
    const NAME: &str = "Fejér descent";
    let Some(res) = fejer_residuals(records) else {
        return CheckOutcome::skipped(NAME, "no reference solution");
    };
    let mut t = Tally::new(NAME);
    for (r, x) in records.iter().zip(res) {
        t.le(r.k, -x, 0.0, inequality_tol(r.dist_w.unwrap_or(0.0).powi(2)));
    }
    t.finish()
}

/// `‖w − z*‖² − ‖z_k − z*‖² ≥ (1−σ²)τ‖z̃ − w‖² + τ(1−τ)‖λv‖²`.
pub fn relaxed_descent_check(records: &[IterationRecord], params: &HpeParams) -> CheckOutcome {
    const NAME: &str = "relaxed step descent";
    let (s, tau) = (params.sigma, params.tau);
    let mut t = Tally::new(NAME);
    for r in records {
        let (Some(dw), Some(dz)) = (r.dist_w, r.dist_to_solution) else {
            return CheckOutcome::skipped(NAME, "no reference solution");
        };
        let rhs = (1.0 - s * s) * tau * r.gap_sq + tau * (1.0 - tau) * r.lambda_v_sq;
        t.le(r.k, rhs, dw * dw - dz * dz, inequality_tol(dw * dw));
    }
    t.finish()
}

/// `‖w_{k−1} − z*‖² = (1+α)φ_{k−1} − αφ_{k−2} + δ_k`, checked as two inequalities.
pub fn wz_identity_check(records: &[IterationRecord], d0: Option<f64>) -> CheckOutcome {
    const NAME: &str = "extrapolation identity";
    let Some(phi) = d0.and_then(|d| phis(records, d)) else {
        return CheckOutcome::skipped(NAME, "no reference solution");
    };
    let mut t = Tally::new(NAME);
    for (i, r) in records.iter().enumerate() {
        let Some(dw) = r.dist_w else {
            return CheckOutcome::skipped(NAME, "no reference solution");
        };
        let a = r.alpha;
        let (p1, p2) = (phi[i], if i == 0 { phi[0] } else { phi[i - 1] });
        let prev_step = if i == 0 { 0.0 } else { records[i - 1].step_norm };
        let rhs = (1.0 + a) * p1 - a * p2 + a * (1.0 + a) * prev_step * prev_step;
        let lhs = dw * dw;
        let tol = 1e-9 * (1.0 + lhs.abs().max(p1).max(p2));
        t.le(r.k, lhs, rhs, tol);
        t.le(r.k, rhs, lhs, tol);
    }
    t.finish()
}

fn deltas(records: &[IterationRecord]) -> Vec<f64> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let prev = if i == 0 { 0.0 } else { records[i - 1].step_norm };
            r.alpha * (1.0 + r.alpha) * prev * prev
        })
        .collect()
}

/// `φ_k − φ_{k−1} + s_k ≤ α_{k−1}(φ_{k−1} − φ_{k−2}) + δ_k`.
pub fn recursion_check(records: &[IterationRecord], d0: Option<f64>) -> CheckOutcome {
    const NAME: &str = "inertial recursion";
    let Some(phi) = d0.and_then(|d| phis(records, d)) else {
        return CheckOutcome::skipped(NAME, "no reference solution");
    };
    let delta = deltas(records);
    let mut t = Tally::new(NAME);
    for (i, r) in records.iter().enumerate() {
        let (pk, p1) = (phi[i + 1], phi[i]);
        let p2 = if i == 0 { phi[0] } else { phi[i - 1] };
        let lhs = pk - p1 + r.s_k;
        let rhs = r.alpha * (p1 - p2) + delta[i];
        t.le(r.k, lhs, rhs, inequality_tol(p1.max(pk)));
    }
    t.finish()
}

/// `φ_k + Σ s_j ≤ φ_0 + Σ δ_j / (1 − α)`.
pub fn summation_lemma_check(records: &[IterationRecord], params: &HpeParams, d0: Option<f64>) -> CheckOutcome {
    const NAME: &str = "inertial summation lemma";
    let Some(phi) = d0.and_then(|d| phis(records, d)) else {
        return CheckOutcome::skipped(NAME, "no reference solution");
    };
    let delta = deltas(records);
    let mut t = Tally::new(NAME);
    let (mut s_sum, mut d_sum) = (0.0, 0.0);
    for (i, r) in records.iter().enumerate() {
        s_sum += r.s_k;
        d_sum += delta[i];
        let lhs = phi[i + 1] + s_sum;
        let rhs = phi[0] + d_sum / (1.0 - params.alpha);
        t.le(r.k, lhs, rhs, inequality_tol(rhs));
    }
    t.finish()
}

/// Observed quantities behind the step-summability theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    /// `Σ_{j≤k} ‖z_j − z_{j−1}‖²` per prefix.
    pub partial_sums: Vec<f64>,
    /// `2 d₀² / ((1 − α) q(α))`.
    pub bound: f64,
    /// `μ_0, μ_1, …`.
    pub mu: Vec<f64>,
    /// `Σ_{j≤k} α_j ‖z_j − z_{j−1}‖²` per prefix.
    pub weighted_sums: Vec<f64>,
}

impl SummabilityReport {
    /// Final `(lhs, rhs)`.
    pub fn final_pair(&self) -> (f64, f64) {
        (self.partial_sums.last().copied().unwrap_or(0.0), self.bound)
    }
}

pub fn summability(records: &[IterationRecord], params: &HpeParams, d0: f64) -> Option<SummabilityReport> {
    let phi = phis(records, d0)?;
    let (eta, q) = (params.eta, params.q_alpha);
    let bound = 2.0 * d0 * d0 / ((1.0 - params.alpha) * q);
    let mut partial = Vec::with_capacity(records.len());
    let mut weighted = Vec::with_capacity(records.len());
    let mut mu = Vec::with_capacity(records.len() + 1);
    mu.push((1.0 - params.alpha_at(0)) * phi[0]);
    let (mut sum, mut wsum) = (0.0, 0.0);
    for (i, r) in records.iter().enumerate() {
        let step_sq = r.step_norm * r.step_norm;
        let a_next = params.alpha_at(r.k);
        let gamma = (1.0 - eta) * a_next * a_next + (1.0 + eta) * a_next;
        sum += step_sq;
        wsum += a_next * step_sq;
        partial.push(sum);
        weighted.push(wsum);
        mu.push(phi[i + 1] - r.alpha * phi[i] + gamma * step_sq);
    }
    Some(SummabilityReport { partial_sums: partial, bound, mu, weighted_sums: weighted })
}

/// Partial sums below the bound, `‖z_k − z_{k−1}‖² ≤ (μ_{k−1} − μ_k)/q(α)`,
/// `μ` nonincreasing, and the weighted sum below `α` times the bound.
pub fn summability_checks(records: &[IterationRecord], params: &HpeParams, d0: Option<f64>) -> Vec<CheckOutcome> {
    const NAMES: [&str; 4] = [
        "step summability",
        "μ decrease",
        "μ monotone",
        "weighted step summability",
    ];
    let Some(rep) = d0.and_then(|d| summability(records, params, d)) else {
        return NAMES.iter().map(|n| CheckOutcome::skipped(n, "no reference solution")).collect();
    };
    let q = params.q_alpha;
    let mut sums = Tally::new(NAMES[0]);
    let mut dec = Tally::new(NAMES[1]);
    let mut mono = Tally::new(NAMES[2]);
    let mut weighted = Tally::new(NAMES[3]);
    for (i, r) in records.iter().enumerate() {
        let tol = inequality_tol(rep.bound);
        sums.le(r.k, rep.partial_sums[i], rep.bound, tol);
        weighted.le(r.k, rep.weighted_sums[i], params.alpha * rep.bound, tol);
        let mtol = inequality_tol(rep.mu[i].abs());
        dec.le(r.k, r.step_norm * r.step_norm, (rep.mu[i] - rep.mu[i + 1]) / q, mtol / q);
        mono.le(r.k, rep.mu[i + 1], rep.mu[i], mtol);
    }
    vec![sums.finish(), dec.finish(), mono.finish(), weighted.finish()]
}

/// `‖z_k − z*‖² + Σ s_j ≤ C‖z_0 − z*‖²` for every prefix.
pub fn energy_check(records: &[IterationRecord], params: &HpeParams, d0: Option<f64>) -> CheckOutcome {
    const NAME: &str = "telescoped energy";
    let Some(phi) = d0.and_then(|d| phis(records, d)) else {
        return CheckOutcome::skipped(NAME, "no reference solution");
    };
    let rhs = params.energy_constant() * phi[0];
    let mut t = Tally::new(NAME);
    let mut s_sum = 0.0;
    for (i, r) in records.iter().enumerate() {
        s_sum += r.s_k;
        t.le(r.k, phi[i + 1] + s_sum, rhs, inequality_tol(rhs));
    }
    t.finish()
}

/// `ε_k^a ≥ −tol`.
pub fn ergodic_nonnegativity_check(records: &[IterationRecord]) -> CheckOutcome {
    let mut t = Tally::new("ergodic ε nonnegative");
    for r in records {
        t.le(r.k, 0.0, r.eps_a, crate::ergodic::NONNEGATIVITY_TOL);
    }
    t.finish()
}

/// Every trace invariant that needs no operator data.
pub fn all_checks(
    records: &[IterationRecord],
    params: &HpeParams,
    d0: Option<f64>,
    tol: f64,
) -> Vec<CheckOutcome> {
    let mut out = vec![
        criterion_check(records, params.sigma, tol),
        fejer_check(records),
        relaxed_descent_check(records, params),
        wz_identity_check(records, d0),
        recursion_check(records, d0),
        summation_lemma_check(records, params, d0),
    ];
    out.extend(summability_checks(records, params, d0));
    out.push(energy_check(records, params, d0));
    out.push(ergodic_nonnegativity_check(records));
    out
}
