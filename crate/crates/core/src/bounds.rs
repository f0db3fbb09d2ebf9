//! Closed-form complexity bounds and the harness that holds traces to them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hpe::IterationRecord;
use crate::params::HpeParams;

/// Relative slack on bound assertions.
pub const BOUND_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("q(α) = {0} ≤ 0: bounds are undefined")]
    QNotPositive(f64),
    #[error("{name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("bound `{bound}` violated at k = {k}: observed {observed:e} > {limit:e}")]
    Violation { k: usize, bound: &'static str, observed: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Distance of `z₀` to the solution set.
    pub d0: f64,
    /// `λ̲`.
    pub lambda_floor: f64,
    pub params: HpeParams,
    pub k: usize,
}

impl BoundInputs {
    fn check(&self) -> Result<(), BoundError> {
        if !(self.params.q_alpha > 0.0) {
            return Err(BoundError::QNotPositive(self.params.q_alpha));
        }
        if !(self.lambda_floor > 0.0) {
            return Err(BoundError::NonPositive { name: "λ̲", value: self.lambda_floor });
        }
        if !(self.d0 >= 0.0) {
            return Err(BoundError::NonPositive { name: "d₀", value: self.d0 });
        }
        if self.k == 0 {
            return Err(BoundError::NonPositive { name: "k", value: 0.0 });
        }
        Ok(())
    }
}

/// `(‖v‖ bound, ε bound)` for the best iterate among the first `k`:
/// `d₀/(λ̲τ√k)·√(C/η)` and `σd₀²C/(2(1−σ²)λ̲τk)`.
pub fn pointwise_bounds(inp: &BoundInputs) -> Result<(f64, f64), BoundError> {
    inp.check()?;
    let p = &inp.params;
    let c = p.energy_constant();
    let k = inp.k as f64;
    let base = inp.lambda_floor * p.tau;
    let v = inp.d0 / (base * k.sqrt()) * (c / p.eta).sqrt();
    let eps = p.sigma * inp.d0 * inp.d0 * c / (2.0 * (1.0 - p.sigma * p.sigma) * base * k);
    Ok((v, eps))
}

/// `(‖v^a‖ bound, ε^a bound)` for constant `α_k ≡ α`:
/// `2(1+α)d₀√C/(λ̲τk)` and
/// `2√2·d₀²C/(λ̲τk)·(1 + σ/√((1−σ²)τ) + √(4 + (1−τ)²/(ητ²)))`.
pub fn ergodic_bounds(inp: &BoundInputs) -> Result<(f64, f64), BoundError> {
    inp.check()?;
    let p = &inp.params;
    let c = p.energy_constant();
    let (s, t) = (p.sigma, p.tau);
    let base = inp.lambda_floor * t * inp.k as f64;
    let v = 2.0 * (1.0 + p.alpha) * inp.d0 * c.sqrt() / base;
    let shape = 1.0 + s / ((1.0 - s * s) * t).sqrt() + (4.0 + (1.0 - t).powi(2) / (p.eta * t * t)).sqrt();
    let eps = 2.0 * std::f64::consts::SQRT_2 * inp.d0 * inp.d0 * c / base * shape;
    Ok((v, eps))
}

/// Smallest `k` with both pointwise bounds below `(ρ, ε̂)`.
pub fn iteration_budget(rho: f64, eps_hat: f64, d0: f64, lambda_floor: f64, params: &HpeParams) -> Result<u64, BoundError> {
    if !(rho > 0.0) {
        return Err(BoundError::NonPositive { name: "ρ", value: rho });
    }
    if !(eps_hat > 0.0) {
        return Err(BoundError::NonPositive { name: "ε̂", value: eps_hat });
    }
    let at = |k: u64| BoundInputs { d0, lambda_floor, params: *params, k: k as usize };
    let (v1, e1) = pointwise_bounds(&at(1))?;
    let guess = ((v1 / rho).powi(2)).max(e1 / eps_hat).ceil().max(1.0);
    if guess >= 2f64.powi(52) {
        return Ok(guess as u64);
    }
    let ok = |k: u64| -> Result<bool, BoundError> {
        let (v, e) = pointwise_bounds(&at(k))?;
        Ok(v <= rho && e <= eps_hat)
    };
    let mut k = guess as u64;
    while !ok(k)? {
        k += 1;
    }
    while k > 1 && ok(k - 1)? {
        k -= 1;
    }
    Ok(k)
}

/// `max{⌈d₀²/(λ̲²ρ²)⌉, ⌈d₀²/(λ̲ε̂)⌉}`, the constant-free budget.
pub fn order_budget(rho: f64, eps_hat: f64, d0: f64, lambda_floor: f64) -> f64 {
    let a = (d0 * d0 / (lambda_floor * lambda_floor * rho * rho)).ceil();
    let b = (d0 * d0 / (lambda_floor * eps_hat)).ceil();
    a.max(b)
}

/// Observed values against their bounds at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub k: usize,
    pub v_min: f64,
    pub v_bound: f64,
    pub eps_min: f64,
    pub eps_bound: f64,
    pub v_a: Option<f64>,
    pub v_a_bound: Option<f64>,
    pub eps_a: Option<f64>,
    pub eps_a_bound: Option<f64>,
}

/// `observed / bound` with `0/0 = 0`.
fn utilization(observed: f64, bound: f64) -> f64 {
    if observed <= 0.0 {
        0.0
    } else if bound == 0.0 {
        f64::INFINITY
    } else {
        observed / bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub d0: f64,
    pub lambda_floor: f64,
    /// Worst observed `observed / bound` ratios.
    pub worst_v: f64,
    pub worst_eps: f64,
    pub worst_v_a: Option<f64>,
    pub worst_eps_a: Option<f64>,
    /// Whether the ergodic bounds were asserted (constant `α` only).
    pub ergodic_checked: bool,
    /// Set when every `ε_k` is zero, making the ε bound trivially satisfied.
    pub eps_vacuous: bool,
    /// Most negative raw `ε_k^a`.
    pub min_eps_a: f64,
    pub violations: Vec<BoundViolation>,
    pub rows: Vec<BoundRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub k: usize,
    pub bound: String,
    pub observed: f64,
    pub limit: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest of the worst utilizations.
    pub fn worst_utilization(&self) -> f64 {
        [Some(self.worst_v), Some(self.worst_eps), self.worst_v_a, self.worst_eps_a]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

/// Compares every prefix of `records` with the pointwise bounds (best iterate
/// so far) and, for constant `α`, with the ergodic bounds.
pub fn evaluate_bounds(
    records: &[IterationRecord],
    d0: f64,
    lambda_floor: f64,
    params: &HpeParams,
    rel_tol: f64,
) -> Result<BoundReport, BoundError> {
    let ergodic = params.schedule.is_constant();
    let mut rep = BoundReport {
        d0,
        lambda_floor,
        worst_v: 0.0,
        worst_eps: 0.0,
        worst_v_a: ergodic.then_some(0.0),
        worst_eps_a: ergodic.then_some(0.0),
        ergodic_checked: ergodic,
        eps_vacuous: records.iter().all(|r| r.eps == 0.0),
        min_eps_a: records.iter().map(|r| r.eps_a).fold(0.0, f64::min),
        violations: Vec::new(),
        rows: Vec::with_capacity(records.len()),
    };
    let (mut v_min, mut eps_min) = (f64::INFINITY, f64::INFINITY);
    let push = |rep: &mut BoundReport, k: usize, name: &str, observed: f64, limit: f64| {
        if observed > limit * (1.0 + rel_tol) {
            rep.violations.push(BoundViolation { k, bound: name.into(), observed, limit });
        }
    };
    for r in records {
        v_min = v_min.min(r.norm_v);
        eps_min = eps_min.min(r.eps);
        let inp = BoundInputs { d0, lambda_floor, params: *params, k: r.k };
        let (vb, eb) = pointwise_bounds(&inp)?;
        rep.worst_v = rep.worst_v.max(utilization(v_min, vb));
        rep.worst_eps = rep.worst_eps.max(utilization(eps_min, eb));
        push(&mut rep, r.k, "pointwise ‖v‖", v_min, vb);
        push(&mut rep, r.k, "pointwise ε", eps_min, eb);
        let mut row = BoundRow {
            k: r.k,
            v_min,
            v_bound: vb,
            eps_min,
            eps_bound: eb,
            v_a: None,
            v_a_bound: None,
            eps_a: None,
            eps_a_bound: None,
        };
        if r.eps_a < -crate::ergodic::NONNEGATIVITY_TOL {
            rep.violations.push(BoundViolation {
                k: r.k,
                bound: "ergodic ε nonnegative".into(),
                observed: r.eps_a,
                limit: -crate::ergodic::NONNEGATIVITY_TOL,
            });
        }
        if ergodic {
            let (vab, eab) = ergodic_bounds(&inp)?;
            rep.worst_v_a = rep.worst_v_a.map(|w| w.max(utilization(r.norm_v_a, vab)));
            rep.worst_eps_a = rep.worst_eps_a.map(|w| w.max(utilization(r.eps_a, eab)));
            push(&mut rep, r.k, "ergodic ‖v^a‖", r.norm_v_a, vab);
            push(&mut rep, r.k, "ergodic ε^a", r.eps_a, eab);
            row.v_a = Some(r.norm_v_a);
            row.v_a_bound = Some(vab);
            row.eps_a = Some(r.eps_a);
            row.eps_a_bound = Some(eab);
        }
        rep.rows.push(row);
    }
    Ok(rep)
}

/// [`evaluate_bounds`], failing on the first violation.
pub fn assert_bounds(
    records: &[IterationRecord],
    d0: f64,
    lambda_floor: f64,
    params: &HpeParams,
) -> Result<BoundReport, BoundError> {
    let rep = evaluate_bounds(records, d0, lambda_floor, params, BOUND_REL_TOL)?;
    if let Some(v) = rep.violations.first() {
        let bound = match v.bound.as_str() {
            "pointwise ‖v‖" => "pointwise ‖v‖",
            "pointwise ε" => "pointwise ε",
            "ergodic ‖v^a‖" => "ergodic ‖v^a‖",
            "ergodic ε^a" => "ergodic ε^a",
            _ => "ergodic ε nonnegative",
        };
        return Err(BoundError::Violation { k: v.k, bound, observed: v.observed, limit: v.limit });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inp(alpha: f64, sigma: f64, k: usize) -> BoundInputs {
        BoundInputs {
            d0: 1.0,
            lambda_floor: 1.0,
            params: HpeParams::from_beta(alpha, sigma, 1.0 / 3.0).unwrap(),
            k,
        }
    }

    #[test]
    fn plain_hpe_pointwise_bound() {
        for k in [1, 4, 100, 12345] {
            let (v, e) = pointwise_bounds(&inp(0.0, 0.0, k)).unwrap();
            assert_relative_eq!(v, 1.0 / (k as f64).sqrt(), max_relative = 1e-15);
            assert_eq!(e, 0.0);
        }
    }

    #[test]
    fn quadrupling_k_halves_the_pointwise_bound() {
        let a = pointwise_bounds(&inp(0.2, 0.5, 25)).unwrap();
        let b = pointwise_bounds(&inp(0.2, 0.5, 100)).unwrap();
        assert_relative_eq!(a.0 / b.0, 2.0, max_relative = 1e-14);
        assert_relative_eq!(a.1 / b.1, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn inertial_pointwise_example() {
        // α = 0.3, σ = 0, β = 1/3: τ = 1, η = 1, q = 0.1, C = 1 + 0.78/0.049.
        let (v, _) = pointwise_bounds(&inp(0.3, 0.0, 100)).unwrap();
        let c: f64 = 1.0 + 0.78 / 0.049;
        assert_relative_eq!(v, 0.1 * c.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn ergodic_examples() {
        let (v, e) = ergodic_bounds(&inp(0.0, 0.0, 7)).unwrap();
        assert_relative_eq!(v, 2.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(e, 6.0 * 2f64.sqrt() / 7.0, max_relative = 1e-15);
        let a = ergodic_bounds(&inp(0.25, 0.6, 10)).unwrap();
        let b = ergodic_bounds(&inp(0.25, 0.6, 20)).unwrap();
        assert_relative_eq!(a.0, 2.0 * b.0, max_relative = 1e-14);
        assert_relative_eq!(a.1, 2.0 * b.1, max_relative = 1e-14);
    }

    #[test]
    fn sigma_zero_matches_the_exact_method_form() {
        // With σ = 0: ητ² = τ(2 − τ).
        for tau in [0.3, 0.6, 0.9, 1.0] {
            let params = HpeParams::from_tau(0.0, 0.0, tau).unwrap();
            let i = BoundInputs { d0: 2.0, lambda_floor: 0.5, params, k: 3 };
            let (_, e) = ergodic_bounds(&i).unwrap();
            let expected = 2.0 * 2f64.sqrt() * 4.0 / (0.5 * tau * 3.0)
                * (1.0 + (4.0 + (1.0 - tau).powi(2) / (tau * (2.0 - tau))).sqrt());
            assert_relative_eq!(e, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn budget_examples() {
        let p = HpeParams::from_beta(0.0, 0.0, 1.0 / 3.0).unwrap();
        assert_eq!(iteration_budget(0.1, f64::INFINITY, 1.0, 1.0, &p).unwrap(), 100);
        assert_eq!(iteration_budget(0.05, f64::INFINITY, 1.0, 1.0, &p).unwrap(), 400);
        // ε̂ binds when ε̂ ≪ ρ² (σ > 0 so the ε bound is nonzero).
        let q = HpeParams::from_beta(0.0, 0.5, 1.0 / 3.0).unwrap();
        let loose = iteration_budget(0.1, 1.0, 1.0, 1.0, &q).unwrap();
        let tight = iteration_budget(0.1, 1e-6, 1.0, 1.0, &q).unwrap();
        assert!(tight > 1000 * loose);
        assert!(iteration_budget(0.0, 1.0, 1.0, 1.0, &p).is_err());
    }

    #[test]
    fn budget_is_minimal_and_monotone() {
        let p = HpeParams::from_beta(0.2, 0.7, 0.4).unwrap();
        let mut prev = 0;
        for i in (1..30).rev() {
            let rho = i as f64 / 30.0;
            let k = iteration_budget(rho, 1e-3, 3.0, 0.2, &p).unwrap();
            assert!(k >= prev);
            prev = k;
            let at = |k| pointwise_bounds(&BoundInputs { d0: 3.0, lambda_floor: 0.2, params: p, k }).unwrap();
            let (v, e) = at(k as usize);
            assert!(v <= rho && e <= 1e-3);
            if k > 1 {
                let (v, e) = at(k as usize - 1);
                assert!(v > rho || e > 1e-3);
            }
        }
    }

    #[test]
    fn order_budget_example() {
        assert_eq!(order_budget(1e-2, f64::INFINITY, 1.0, 1.0), 1e4);
        assert_eq!(order_budget(1.0, 1e-3, 2.0, 0.5), 8000.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let mut i = inp(0.0, 0.0, 1);
        i.lambda_floor = 0.0;
        assert!(pointwise_bounds(&i).is_err());
        let mut i = inp(0.0, 0.0, 1);
        i.k = 0;
        assert!(ergodic_bounds(&i).is_err());
        let mut i = inp(0.0, 0.0, 1);
        i.params.q_alpha = -0.1;
        assert!(matches!(pointwise_bounds(&i), Err(BoundError::QNotPositive(_))));
    }
}
