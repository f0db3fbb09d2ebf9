//! Certificate producers for the proximal point, Tseng forward-backward-forward
//! and forward-backward instances of the driver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hpe::{Certificate, InnerSolver};
use crate::linalg::VectorH;
use crate::operators::{
    resolve, Backward, ForwardMap, ForwardOperator, OracleError, ResolventOracle, TestProblem,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("λ = {lambda} exceeds the cap {cap_name} = {cap}")]
    LambdaAboveCap { lambda: f64, cap: f64, cap_name: &'static str },
    #[error("λ = {0} must be positive and finite")]
    InvalidLambda(f64),
    #[error("{kind} needs 0 < σ < 1, got σ = {sigma}")]
    SigmaRange { kind: InstanceKind, sigma: f64 },
    #[error("forward-backward needs a cocoercive forward map")]
    NotCocoercive,
    #[error("the proximal point method has no stepsize cap; give λ explicitly")]
    NoCap,
    #[error("cyclic λ rule needs at least one value")]
    EmptySchedule,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Ppm,
    TsengFbf,
    ForwardBackward,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 3] =
        [InstanceKind::Ppm, InstanceKind::TsengFbf, InstanceKind::ForwardBackward];

    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::Ppm => "ppm",
            InstanceKind::TsengFbf => "tseng_fbf",
            InstanceKind::ForwardBackward => "forward_backward",
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown instance kind `{s}`"))
    }
}

/// How `λ_k` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    /// `λ_k` equal to the instance cap (`σ/L` or `2σ²/L`).
    #[default]
    AtCap,
    Constant { value: f64 },
    /// `λ_k = values[(k−1) mod len]`.
    Cyclic { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub kind: InstanceKind,
    #[serde(default)]
    pub lambda: LambdaRule,
}

/// A resolved, validated stepsize sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSeq {
    values: Vec<f64>,
}

impl LambdaSeq {
    fn new(values: Vec<f64>, cap: Option<(f64, &'static str)>) -> Result<Self, InstanceError> {
        if values.is_empty() {
            return Err(InstanceError::EmptySchedule);
        }
        for &lambda in &values {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(InstanceError::InvalidLambda(lambda));
            }
            if let Some((cap, cap_name)) = cap {
                if lambda > cap {
                    return Err(InstanceError::LambdaAboveCap { lambda, cap, cap_name });
                }
            }
        }
        Ok(Self { values })
    }

    fn from_rule(rule: &LambdaRule, cap: Option<(f64, &'static str)>) -> Result<Self, InstanceError> {
        let values = match rule {
            LambdaRule::AtCap => match cap {
                Some((c, _)) if c.is_finite() => vec![c],
                _ => return Err(InstanceError::NoCap),
            },
            LambdaRule::Constant { value } => vec![*value],
            LambdaRule::Cyclic { values } => values.clone(),
        };
        Self::new(values, cap)
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[(k.max(1) - 1) % self.values.len()]
    }

    /// `λ̲ = min λ_k`.
    pub fn floor(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `σ/L`, infinite when `L = 0`.
pub fn tseng_cap(sigma: f64, lipschitz: f64) -> f64 {
    sigma / lipschitz
}

/// `2σ²/L`, infinite when `L = 0`.
pub fn fb_cap(sigma: f64, lipschitz: f64) -> f64 {
    2.0 * sigma * sigma / lipschitz
}

/// Exact resolvent step: `z̃ = (λB + I)^{-1}w`, `v = (w − z̃)/λ`, `ε = 0`.
pub fn ppm_step(b: &dyn ResolventOracle, w: &VectorH, lambda: f64) -> Result<Certificate, OracleError> {
    let (z_tilde, v) = resolve(b, lambda, w)?;
    Ok(Certificate { z_tilde, v, eps: 0.0, lambda })
}

/// Forward-backward-forward step with `ε = 0`:
/// `z̃ = (λB + I)^{-1}(w − λF(P_Ω w))`, `v = F(z̃) − F(P_Ω w) + (w − z̃)/λ`.
pub fn tseng_step(
    f: &dyn ForwardOperator,
    b: &dyn ResolventOracle,
    w: &VectorH,
    lambda: f64,
) -> Result<Certificate, OracleError> {
    let w_proj = f.project_domain(w);
    let f_w = f.apply(&w_proj);
    let z_tilde = b.resolvent(lambda, &(w - &f_w.scale(lambda)))?;
    let mut v = (w - &z_tilde).scale(1.0 / lambda);
    v += &(&f.apply(&z_tilde) - &f_w);
    Ok(Certificate { z_tilde, v, eps: 0.0, lambda })
}

/// Forward-backward step: `z̃ = (λB + I)^{-1}(w − λF(w))`, `v = (w − z̃)/λ`,
/// `ε = L‖z̃ − w‖²/4`.
pub fn fb_step(
    f: &dyn ForwardOperator,
    b: &dyn ResolventOracle,
    w: &VectorH,
    lambda: f64,
) -> Result<Certificate, OracleError> {
    let f_w = f.apply(w);
    let z_tilde = b.resolvent(lambda, &(w - &f_w.scale(lambda)))?;
    let v = (w - &z_tilde).scale(1.0 / lambda);
    let eps = f.lipschitz() * z_tilde.dist_sq(w) / 4.0;
    Ok(Certificate { z_tilde, v, eps, lambda })
}

fn check_sigma(kind: InstanceKind, sigma: f64) -> Result<(), InstanceError> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        Err(InstanceError::SigmaRange { kind, sigma })
    }
}

#[derive(Debug, Clone)]
pub struct PpmSolver {
    pub op: Backward,
    pub lambdas: LambdaSeq,
}

impl PpmSolver {
    pub fn new(op: Backward, rule: &LambdaRule) -> Result<Self, InstanceError> {
        Ok(Self { op, lambdas: LambdaSeq::from_rule(rule, None)? })
    }
}

impl InnerSolver for PpmSolver {
    fn solve(&mut self, k: usize, w: &VectorH) -> Result<Certificate, OracleError> {
        ppm_step(&self.op, w, self.lambdas.at(k))
    }

    fn lambda_floor(&self) -> f64 {
        self.lambdas.floor()
    }
}

#[derive(Debug, Clone)]
pub struct TsengSolver {
    pub forward: ForwardMap,
    pub backward: Backward,
    pub lambdas: LambdaSeq,
}

impl TsengSolver {
    pub fn new(
        forward: ForwardMap,
        backward: Backward,
        sigma: f64,
        rule: &LambdaRule,
    ) -> Result<Self, InstanceError> {
        check_sigma(InstanceKind::TsengFbf, sigma)?;
        let cap = tseng_cap(sigma, forward.lipschitz());
        let lambdas = LambdaSeq::from_rule(rule, Some((cap, "σ/L")))?;
        Ok(Self { forward, backward, lambdas })
    }
}

impl InnerSolver for TsengSolver {
    fn solve(&mut self, k: usize, w: &VectorH) -> Result<Certificate, OracleError> {
        tseng_step(&self.forward, &self.backward, w, self.lambdas.at(k))
    }

    fn lambda_floor(&self) -> f64 {
        self.lambdas.floor()
    }
}

#[derive(Debug, Clone)]
pub struct FbSolver {
    pub forward: ForwardMap,
    pub backward: Backward,
    pub lambdas: LambdaSeq,
}

impl FbSolver {
    pub fn new(
        forward: ForwardMap,
        backward: Backward,
        sigma: f64,
        rule: &LambdaRule,
    ) -> Result<Self, InstanceError> {
        check_sigma(InstanceKind::ForwardBackward, sigma)?;
        if !forward.is_cocoercive() {
            return Err(InstanceError::NotCocoercive);
        }
        let cap = fb_cap(sigma, forward.lipschitz());
        let lambdas = LambdaSeq::from_rule(rule, Some((cap, "2σ²/L")))?;
        Ok(Self { forward, backward, lambdas })
    }
}

impl InnerSolver for FbSolver {
    fn solve(&mut self, k: usize, w: &VectorH) -> Result<Certificate, OracleError> {
        fb_step(&self.forward, &self.backward, w, self.lambdas.at(k))
    }

    fn lambda_floor(&self) -> f64 {
        self.lambdas.floor()
    }
}

/// Any of the three instances, dispatched statically.
#[derive(Debug, Clone)]
pub enum Instance {
    Ppm(PpmSolver),
    Tseng(TsengSolver),
    Fb(FbSolver),
}

impl Instance {
    /// Builds the instance for `problem`; PPM needs an affine `F + B`,
    /// the splitting methods take `F` and `B` from [`TestProblem::split`].
    pub fn build(problem: &TestProblem, config: &InstanceConfig, sigma: f64) -> Result<Self, InstanceError> {
        Ok(match config.kind {
            InstanceKind::Ppm => Instance::Ppm(PpmSolver::new(problem.proximal_operator()?, &config.lambda)?),
            InstanceKind::TsengFbf => {
                let (f, b) = problem.split()?;
                Instance::Tseng(TsengSolver::new(f, b, sigma, &config.lambda)?)
            }
            InstanceKind::ForwardBackward => {
                let (f, b) = problem.split()?;
                Instance::Fb(FbSolver::new(f, b, sigma, &config.lambda)?)
            }
        })
    }

    pub fn kind(&self) -> InstanceKind {
        match self {
            Instance::Ppm(_) => InstanceKind::Ppm,
            Instance::Tseng(_) => InstanceKind::TsengFbf,
            Instance::Fb(_) => InstanceKind::ForwardBackward,
        }
    }
}

impl InnerSolver for Instance {
    fn solve(&mut self, k: usize, w: &VectorH) -> Result<Certificate, OracleError> {
        match self {
            Instance::Ppm(s) => s.solve(k, w),
            Instance::Tseng(s) => s.solve(k, w),
            Instance::Fb(s) => s.solve(k, w),
        }
    }

    fn lambda_floor(&self) -> f64 {
        match self {
            Instance::Ppm(s) => s.lambda_floor(),
            Instance::Tseng(s) => s.lambda_floor(),
            Instance::Fb(s) => s.lambda_floor(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpe::{certify, DEFAULT_TOL};
    use crate::operators::{enlargement_member, make_problem, AffineOperator, BoxSet, ProblemKind};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> VectorH {
        VectorH::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn ppm_examples() {
        let c = ppm_step(&Backward::Zero { dim: 2 }, &v(&[1.0, 2.0]), 1.0).unwrap();
        assert_eq!(c.z_tilde, v(&[1.0, 2.0]));
        assert_eq!(c.v, VectorH::zeros(2));

        let id = Backward::Affine(AffineOperator::linear(DMatrix::identity(2, 2)).unwrap());
        let c = ppm_step(&id, &v(&[2.0, 4.0]), 1.0).unwrap();
        assert_eq!((c.z_tilde.clone(), c.v.clone(), c.eps), (v(&[1.0, 2.0]), v(&[1.0, 2.0]), 0.0));
        assert_eq!(certify(&c, &v(&[2.0, 4.0]), 0.0, DEFAULT_TOL).unwrap(), 0.0);

        let bx = Backward::BoxNormalCone(BoxSet::uniform(2, 0.0, 1.0));
        let c = ppm_step(&bx, &v(&[3.0, -1.0]), 2.0).unwrap();
        assert_eq!(c.z_tilde, v(&[1.0, 0.0]));
        assert_eq!(c.v, v(&[1.0, -0.5]));
    }

    #[test]
    fn tseng_with_zero_forward_map_is_ppm() {
        let zero = ForwardMap::new(AffineOperator::linear(DMatrix::zeros(2, 2)).unwrap(), None).unwrap();
        let b = Backward::L1 { weight: 0.3, dim: 2 };
        let w = v(&[1.0, -0.1]);
        assert_eq!(tseng_step(&zero, &b, &w, 0.5).unwrap(), ppm_step(&b, &w, 0.5).unwrap());
    }

    #[test]
    fn steps_at_a_solution_are_stationary() {
        let p = make_problem(ProblemKind::L1Composite, 6, 2).unwrap();
        let (f, b) = p.split().unwrap();
        let z = p.known_solution.clone().unwrap();
        for c in [tseng_step(&f, &b, &z, 0.1).unwrap(), fb_step(&f, &b, &z, 0.1).unwrap()] {
            assert!(c.v.norm() < 1e-12 && c.eps < 1e-24);
            assert!(certify(&c, &z, 0.5, DEFAULT_TOL).unwrap() <= 1.0);
        }
    }

    #[test]
    fn fb_at_cap_sits_on_the_boundary() {
        let p = make_problem(ProblemKind::L1Composite, 8, 5).unwrap();
        let (f, b) = p.split().unwrap();
        for sigma in [0.3, 0.7, 0.99] {
            let lambda = fb_cap(sigma, f.lipschitz());
            let c = fb_step(&f, &b, &p.z0, lambda).unwrap();
            let r = certify(&c, &p.z0, sigma, DEFAULT_TOL).unwrap();
            assert!((r - 1.0).abs() < 1e-12, "ratio {r}");
        }
    }

    #[test]
    fn caps_are_enforced_by_name() {
        let p = make_problem(ProblemKind::BilinearSaddle, 4, 0).unwrap();
        let (f, b) = p.split().unwrap();
        let over = LambdaRule::Constant { value: 1.01 * 0.5 / f.lipschitz() };
        let err = TsengSolver::new(f.clone(), b.clone(), 0.5, &over).unwrap_err();
        assert!(err.to_string().contains("σ/L"), "{err}");
        assert!(matches!(FbSolver::new(f.clone(), b.clone(), 0.5, &LambdaRule::AtCap), Err(InstanceError::NotCocoercive)));
        assert!(matches!(TsengSolver::new(f, b, 0.0, &LambdaRule::AtCap), Err(InstanceError::SigmaRange { .. })));

        let q = make_problem(ProblemKind::L1Composite, 4, 0).unwrap();
        let (f, b) = q.split().unwrap();
        let over = LambdaRule::Constant { value: 1.01 * fb_cap(0.5, f.lipschitz()) };
        let err = FbSolver::new(f, b, 0.5, &over).unwrap_err();
        assert!(err.to_string().contains("2σ²/L"), "{err}");
    }

    #[test]
    fn lambda_rules() {
        let s = LambdaSeq::from_rule(&LambdaRule::Cyclic { values: vec![0.5, 1.0, 0.25] }, None).unwrap();
        assert_eq!((s.at(1), s.at(2), s.at(3), s.at(4)), (0.5, 1.0, 0.25, 0.5));
        assert_eq!(s.floor(), 0.25);
        assert!(matches!(LambdaSeq::from_rule(&LambdaRule::AtCap, None), Err(InstanceError::NoCap)));
        assert!(LambdaSeq::from_rule(&LambdaRule::Cyclic { values: vec![] }, None).is_err());
        assert!(LambdaSeq::from_rule(&LambdaRule::Constant { value: -1.0 }, None).is_err());
    }

    #[test]
    fn tseng_inclusion_is_exact() {
        // v − F(z̃) = (w − λF(P_Ω w) − z̃)/λ is the resolvent displacement, so it lies in B(z̃).
        for kind in [ProblemKind::BoxConstrainedQuadratic, ProblemKind::L1Composite] {
            let p = make_problem(kind, 7, 11).unwrap();
            let (f, b) = p.split().unwrap();
            let c = tseng_step(&f, &b, &p.z0, tseng_cap(0.9, f.lipschitz())).unwrap();
            let g = &c.v - &f.apply(&c.z_tilde);
            assert!(b.inclusion_gap(&c.z_tilde, &(-&g)) < 1e-10);
        }
    }

    #[test]
    fn fb_forward_value_lies_in_the_enlargement() {
        // F(w) ∈ F^ε(z̃) with ε = L‖z̃ − w‖²/4 for cocoercive affine F.
        let p = make_problem(ProblemKind::L1Composite, 6, 4).unwrap();
        let (f, b) = p.split().unwrap();
        let c = fb_step(&f, &b, &p.z0, fb_cap(0.8, f.lipschitz())).unwrap();
        assert!(enlargement_member(&f.map, &c.z_tilde, &f.apply(&p.z0), c.eps));
    }

    #[test]
    fn ppm_requires_an_affine_operator() {
        let p = make_problem(ProblemKind::BoxConstrainedQuadratic, 3, 0).unwrap();
        let cfg = InstanceConfig { kind: InstanceKind::Ppm, lambda: LambdaRule::Constant { value: 1.0 } };
        assert!(matches!(Instance::build(&p, &cfg, 0.0), Err(InstanceError::Oracle(_))));
    }
}
