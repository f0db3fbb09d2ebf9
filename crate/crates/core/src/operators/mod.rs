//! Operator oracles: resolvents of the set-valued part `B`, forward maps `F`,
//! the ε-enlargement membership test for affine operators, and a zoo of
//! desk-scale test problems with known solutions.

mod affine;
mod zoo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::VectorH;

pub use affine::{
    enlargement_infimum, enlargement_member, enlargement_member_tol, AffineOperator,
    ENLARGEMENT_TOL,
};
pub use zoo::{make_problem, ProblemData, ProblemKind, TestProblem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("linear system is singular")]
    Singular,
    #[error("stepsize λ = {0} must be positive and finite")]
    InvalidLambda(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported problem: {0}")]
    Unsupported(String),
    #[error("invalid operator data: {0}")]
    Invalid(String),
}

/// Evaluates `(λB + I)^{-1}` for a maximal monotone `B`.
pub trait ResolventOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn resolvent(&self, lambda: f64, w: &VectorH) -> Result<VectorH, OracleError>;
}

/// Returns `(z̃, v)` with `z̃ = (λB + I)^{-1}w` and `v = (w − z̃)/λ ∈ B(z̃)`.
pub fn resolve(
    b: &dyn ResolventOracle,
    lambda: f64,
    w: &VectorH,
) -> Result<(VectorH, VectorH), OracleError> {
    let z_tilde = b.resolvent(lambda, w)?;
    let v = (w - &z_tilde).scale(1.0 / lambda);
    Ok((z_tilde, v))
}

/// Axis-aligned box `{z : lower ≤ z ≤ upper}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lower: VectorH,
    pub upper: VectorH,
}

impl BoxSet {
    pub fn new(lower: VectorH, upper: VectorH) -> Result<Self, OracleError> {
        if lower.dim() != upper.dim() {
            return Err(OracleError::Dimension { expected: lower.dim(), got: upper.dim() });
        }
        if (0..lower.dim()).any(|i| lower[i] > upper[i]) {
            return Err(OracleError::Invalid("box has lower > upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: VectorH::from_fn(dim, |_| lo),
            upper: VectorH::from_fn(dim, |_| hi),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn project(&self, z: &VectorH) -> VectorH {
        VectorH::from_fn(z.dim(), |i| z[i].clamp(self.lower[i], self.upper[i]))
    }

    pub fn contains(&self, z: &VectorH) -> bool {
        (0..z.dim()).all(|i| z[i] >= self.lower[i] && z[i] <= self.upper[i])
    }
}

/// The set-valued part `B` of a structured inclusion.
#[derive(Debug, Clone)]
pub enum Backward {
    /// `B ≡ 0`; the resolvent is the identity.
    Zero { dim: usize },
    Affine(AffineOperator),
    /// Normal cone of a box; the resolvent is the projection.
    BoxNormalCone(BoxSet),
    /// `∂(weight·‖·‖₁)`; the resolvent is soft thresholding.
    L1 { weight: f64, dim: usize },
}

/// `sign(x)·max(|x| − t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

impl ResolventOracle for Backward {
    fn dim(&self) -> usize {
        match self {
            Backward::Zero { dim } | Backward::L1 { dim, .. } => *dim,
            Backward::Affine(a) => a.dim(),
            Backward::BoxNormalCone(b) => b.dim(),
        }
    }

    fn resolvent(&self, lambda: f64, w: &VectorH) -> Result<VectorH, OracleError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(OracleError::InvalidLambda(lambda));
        }
        if w.dim() != self.dim() {
            return Err(OracleError::Dimension { expected: self.dim(), got: w.dim() });
        }
        Ok(match self {
            Backward::Zero { .. } => w.clone(),
            Backward::Affine(a) => a.resolvent(lambda, w)?,
            Backward::BoxNormalCone(b) => b.project(w),
            Backward::L1 { weight, .. } => w.map(|x| soft_threshold(x, lambda * weight)),
        })
    }
}

impl Backward {
    /// `dist(0, g + B(z))`; infinite when `z ∉ D(B)`.
    pub fn inclusion_gap(&self, z: &VectorH, g: &VectorH) -> f64 {
        const ACTIVE: f64 = 1e-12;
        match self {
            Backward::Zero { .. } => g.norm(),
            Backward::Affine(a) => (g + &a.apply(z)).norm(),
            Backward::BoxNormalCone(b) => {
                let mut acc = 0.0;
                for i in 0..z.dim() {
                    let (lo, hi, zi, gi) = (b.lower[i], b.upper[i], z[i], g[i]);
                    if zi < lo - ACTIVE || zi > hi + ACTIVE {
                        return f64::INFINITY;
                    }
                    let at_lo = zi <= lo + ACTIVE;
                    let at_hi = zi >= hi - ACTIVE;
                    let r = match (at_lo, at_hi) {
                        (true, true) => 0.0,
                        (true, false) => (-gi).max(0.0),
                        (false, true) => gi.max(0.0),
                        (false, false) => gi.abs(),
                    };
                    acc += r * r;
                }
                acc.sqrt()
            }
            Backward::L1 { weight, .. } => {
                let mut acc = 0.0;
                for i in 0..z.dim() {
                    let (zi, gi) = (z[i], g[i]);
                    let r = if zi > ACTIVE {
                        (gi + weight).abs()
                    } else if zi < -ACTIVE {
                        (gi - weight).abs()
                    } else {
                        (gi.abs() - weight).max(0.0)
                    };
                    acc += r * r;
                }
                acc.sqrt()
            }
        }
    }

    /// `B` as an affine operator, when it is one.
    pub fn as_affine(&self) -> Option<AffineOperator> {
        match self {
            Backward::Zero { dim } => {
                AffineOperator::linear(nalgebra::DMatrix::zeros(*dim, *dim)).ok()
            }
            Backward::Affine(a) => Some(a.clone()),
            _ => None,
        }
    }
}

/// A single-valued monotone map `F` with its Lipschitz/cocoercivity metadata.
pub trait ForwardOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, z: &VectorH) -> VectorH;

    /// Lipschitz constant `L` on `Ω`.
    fn lipschitz(&self) -> f64;

    /// Whether `F` is `(1/L)`-cocoercive.
    fn is_cocoercive(&self) -> bool;

    /// `P_Ω`; the identity when `Ω = H`.
    fn project_domain(&self, z: &VectorH) -> VectorH {
        z.clone()
    }
}

/// Affine forward map with precomputed constant `L`.
#[derive(Debug, Clone)]
pub struct ForwardMap {
    pub map: AffineOperator,
    pub lipschitz: f64,
    pub cocoercive: bool,
    /// `Ω`, or `None` for the whole space.
    pub domain: Option<BoxSet>,
}

impl ForwardMap {
    /// Computes `L = ‖A‖` and flags cocoercivity for symmetric PSD `A`.
    pub fn new(map: AffineOperator, domain: Option<BoxSet>) -> Result<Self, OracleError> {
        if !map.is_monotone(1e-10 * map.matrix().amax().max(1.0)) {
            return Err(OracleError::Invalid("forward map is not monotone".into()));
        }
        let lipschitz = map.spectral_norm();
        let cocoercive = map.is_symmetric() && lipschitz > 0.0;
        Ok(Self { map, lipschitz, cocoercive, domain })
    }
}

impl ForwardOperator for ForwardMap {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn apply(&self, z: &VectorH) -> VectorH {
        self.map.apply(z)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn is_cocoercive(&self) -> bool {
        self.cocoercive
    }

    fn project_domain(&self, z: &VectorH) -> VectorH {
        match &self.domain {
            Some(b) => b.project(z),
            None => z.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn v(xs: &[f64]) -> VectorH {
        VectorH::new(xs.to_vec()).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> VectorH {
        VectorH::from_fn(n, |_| scale * rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn zero_operator_resolvent_is_identity() {
        let b = Backward::Zero { dim: 3 };
        let w = v(&[1.0, -2.0, 0.5]);
        let (z, g) = resolve(&b, 0.7, &w).unwrap();
        assert_eq!(z, w);
        assert_eq!(g, VectorH::zeros(3));
    }

    #[test]
    fn box_resolvent_projects() {
        let b = Backward::BoxNormalCone(BoxSet::uniform(2, 0.0, 1.0));
        let (z, g) = resolve(&b, 1.0, &v(&[2.0, -1.0])).unwrap();
        assert_eq!(z, v(&[1.0, 0.0]));
        // v is the displacement to the projection, which lies in N_box(z̃).
        assert_eq!(g, v(&[1.0, -1.0]));
        assert_eq!(b.inclusion_gap(&z, &(-&g)), 0.0);
    }

    #[test]
    fn affine_resolvent_example() {
        let b = Backward::Affine(AffineOperator::linear(DMatrix::identity(2, 2)).unwrap());
        let (z, g) = resolve(&b, 1.0, &v(&[2.0, 4.0])).unwrap();
        assert_eq!(z, v(&[1.0, 2.0]));
        assert_eq!(g, v(&[1.0, 2.0]));
    }

    #[test]
    fn resolve_satisfies_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = [
            Backward::L1 { weight: 0.4, dim: 5 },
            Backward::BoxNormalCone(BoxSet::uniform(5, -1.0, 1.0)),
        ];
        for b in &ops {
            for _ in 0..50 {
                let w = random_vec(&mut rng, 5, 2.0);
                let lambda = rng.random_range(0.1..3.0);
                let (z, g) = resolve(b, lambda, &w).unwrap();
                assert!((&z + &g.scale(lambda)).max_abs_diff(&w) < 1e-14);
                // g ∈ B(z): the inclusion gap of −g + B(z) vanishes.
                assert!(b.inclusion_gap(&z, &(-&g)) < 1e-12);
            }
        }
    }

    #[test]
    fn resolvents_are_firmly_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { (i as f64 - j as f64) * 0.3 });
        let ops = [
            Backward::Affine(AffineOperator::new(a, random_vec(&mut rng, 4, 1.0)).unwrap()),
            Backward::L1 { weight: 0.7, dim: 4 },
            Backward::BoxNormalCone(BoxSet::uniform(4, -0.5, 2.0)),
        ];
        for b in &ops {
            for _ in 0..200 {
                let w1 = random_vec(&mut rng, 4, 3.0);
                let w2 = random_vec(&mut rng, 4, 3.0);
                let z1 = b.resolvent(1.3, &w1).unwrap();
                let z2 = b.resolvent(1.3, &w2).unwrap();
                let lhs = z1.dist_sq(&z2);
                let rhs = inner(&(&z1 - &z2), &(&w1 - &w2)).unwrap();
                assert!(lhs <= rhs + 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_lambda_and_dims() {
        let b = Backward::L1 { weight: 1.0, dim: 2 };
        assert!(matches!(b.resolvent(-1.0, &v(&[1.0, 1.0])), Err(OracleError::InvalidLambda(_))));
        assert!(matches!(b.resolvent(1.0, &v(&[1.0])), Err(OracleError::Dimension { .. })));
    }

    /// Baillon–Haddad: the gradient of a convex quadratic with ‖Q‖ = L is (1/L)-cocoercive.
    #[test]
    fn convex_quadratic_gradient_is_cocoercive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.transpose() * &g;
        let f = ForwardMap::new(AffineOperator::new(q, random_vec(&mut rng, 6, 1.0)).unwrap(), None).unwrap();
        assert!(f.is_cocoercive());
        let l = f.lipschitz();
        for _ in 0..1000 {
            let z1 = random_vec(&mut rng, 6, 2.0);
            let z2 = random_vec(&mut rng, 6, 2.0);
            let df = &f.apply(&z1) - &f.apply(&z2);
            let lhs = inner(&(&z1 - &z2), &df).unwrap();
            assert!(lhs >= df.norm_sq() / l - 1e-9 * (1.0 + lhs.abs()));
            assert!(df.norm() <= l * z1.dist(&z2) + 1e-9);
        }
    }

    #[test]
    fn skew_map_is_lipschitz_but_not_cocoercive() {
        let k = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let f = ForwardMap::new(AffineOperator::linear(k).unwrap(), None).unwrap();
        assert!(!f.is_cocoercive());
        assert!((f.lipschitz() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_forward_map_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(ForwardMap::new(AffineOperator::linear(a).unwrap(), None).is_err());
    }

    #[test]
    fn projection_reduces_distance_to_points_of_the_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = BoxSet::uniform(5, -1.0, 1.0);
        for _ in 0..500 {
            let z = b.project(&random_vec(&mut rng, 5, 2.0));
            assert!(b.contains(&z));
            let w = random_vec(&mut rng, 5, 3.0);
            assert!(z.dist(&b.project(&w)) <= z.dist(&w) + 1e-15);
        }
    }

    /// Sum rule: T^ε(z) + S^ε′(z) ⊂ (T+S)^{ε+ε′}(z) for affine T, S.
    #[test]
    fn enlargement_sum_rule_on_affine_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 3;
        for _ in 0..100 {
            let g1 = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let g2 = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a1 = g1.transpose() * &g1 + DMatrix::identity(n, n) * 0.1;
            let a2 = &g2 - g2.transpose() + DMatrix::identity(n, n) * 0.5;
            let t = AffineOperator::new(a1.clone(), random_vec(&mut rng, n, 1.0)).unwrap();
            let s = AffineOperator::new(a2.clone(), random_vec(&mut rng, n, 1.0)).unwrap();
            let sum = AffineOperator::new(&a1 + &a2, t.offset() + s.offset()).unwrap();
            let z = random_vec(&mut rng, n, 1.0);
            let v1 = &t.apply(&z) + &random_vec(&mut rng, n, 0.3);
            let v2 = &s.apply(&z) + &random_vec(&mut rng, n, 0.3);
            let e1 = -enlargement_infimum(&t, &z, &v1);
            let e2 = -enlargement_infimum(&s, &z, &v2);
            assert!(enlargement_member(&t, &z, &v1, e1));
            assert!(enlargement_member(&s, &z, &v2, e2));
            assert!(enlargement_member(&sum, &z, &(&v1 + &v2), e1 + e2));
            // Monotonicity in ε.
            assert!(enlargement_member(&t, &z, &v1, e1 + 0.5));
        }
    }
}
