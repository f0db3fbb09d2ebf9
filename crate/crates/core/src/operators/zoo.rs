//! Seeded desk-scale test problems with unique, known solutions.
//!
//! Every generated operator is strongly monotone (or invertible skew for the
//! saddle problem), so the solution set is a single point and `d₀` is just a
//! distance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AffineOperator, Backward, BoxSet, ForwardMap, ForwardOperator, OracleError};
use crate::linalg::VectorH;

/// Residual below which a stored solution is accepted.
const SOLUTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    AffineInclusion,
    BoxConstrainedQuadratic,
    BilinearSaddle,
    L1Composite,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::AffineInclusion,
        ProblemKind::BoxConstrainedQuadratic,
        ProblemKind::BilinearSaddle,
        ProblemKind::L1Composite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::AffineInclusion => "affine_inclusion",
            ProblemKind::BoxConstrainedQuadratic => "box_constrained_quadratic",
            ProblemKind::BilinearSaddle => "bilinear_saddle",
            ProblemKind::L1Composite => "l1_composite",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| OracleError::Unsupported(format!("unknown problem kind `{s}`")))
    }
}

/// An inclusion `0 ∈ F(z) + B(z)`; `forward` is `None` for the single-operator form `0 ∈ T(z)`.
#[derive(Debug, Clone)]
pub struct TestProblem {
    pub kind: ProblemKind,
    pub seed: Option<u64>,
    pub forward: Option<ForwardMap>,
    pub backward: Backward,
    pub z0: VectorH,
    pub known_solution: Option<VectorH>,
    /// `‖z₀ − z*‖` when the solution is known.
    pub known_d0: Option<f64>,
}

/// Plain serializable form of a [`TestProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemData {
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Row-major matrix of the affine part (of `F`, or of `T` when there is no `F`).
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_weight: Option<f64>,
    pub z0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_solution: Option<Vec<f64>>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> VectorH {
    VectorH::from_fn(n, |_| rng.sample::<f64, _>(StandardNormal))
}

fn vec_from(data: Vec<f64>) -> Result<VectorH, OracleError> {
    VectorH::new(data).map_err(|e| OracleError::Invalid(e.to_string()))
}

/// Builds a seeded instance of `kind` in dimension `dim`.
pub fn make_problem(kind: ProblemKind, dim: usize, seed: u64) -> Result<TestProblem, OracleError> {
    if dim == 0 {
        return Err(OracleError::Unsupported("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut problem = match kind {
        ProblemKind::AffineInclusion => affine_inclusion(&mut rng, dim)?,
        ProblemKind::BoxConstrainedQuadratic => box_quadratic(&mut rng, dim)?,
        ProblemKind::BilinearSaddle => bilinear_saddle(&mut rng, dim)?,
        ProblemKind::L1Composite => l1_composite(&mut rng, dim)?,
    };
    problem.seed = Some(seed);
    Ok(problem)
}

fn affine_inclusion(rng: &mut ChaCha8Rng, n: usize) -> Result<TestProblem, OracleError> {
    let g = gaussian_matrix(rng, n, n);
    let h = gaussian_matrix(rng, n, n);
    let nf = n as f64;
    let a = g.transpose() * &g / nf
        + (&h - h.transpose()) / (2.0 * nf.sqrt())
        + DMatrix::identity(n, n) * 0.5;
    let b = gaussian_vector(rng, n);
    let z0 = gaussian_vector(rng, n);
    TestProblem::affine(AffineOperator::new(a, b)?, z0)
}

fn box_quadratic(rng: &mut ChaCha8Rng, n: usize) -> Result<TestProblem, OracleError> {
    let g = gaussian_matrix(rng, n, n);
    let q = g.transpose() * &g / n as f64 + DMatrix::identity(n, n) * 0.1;
    let bx = BoxSet::uniform(n, -1.0, 1.0);
    // Strictly complementary plant: active coordinates get a gradient pushing outward.
    let mut z_star = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for i in 0..n {
        match rng.random_range(0..3u8) {
            0 => {
                z_star[i] = -1.0;
                grad[i] = rng.random_range(0.2..1.0);
            }
            1 => {
                z_star[i] = 1.0;
                grad[i] = -rng.random_range(0.2..1.0);
            }
            _ => z_star[i] = rng.random_range(-0.8..0.8),
        }
    }
    let z_star = vec_from(z_star)?;
    let qz = VectorH::from_dvector(&(&q * z_star.to_dvector()));
    let c = VectorH::from_fn(n, |i| grad[i] - qz[i]);
    let z0 = gaussian_vector(rng, n);
    let forward = ForwardMap::new(AffineOperator::new(q, c)?, Some(bx.clone()))?;
    TestProblem::new(
        ProblemKind::BoxConstrainedQuadratic,
        Some(forward),
        Backward::BoxNormalCone(bx),
        z0,
        Some(z_star),
    )
}

fn bilinear_saddle(rng: &mut ChaCha8Rng, n: usize) -> Result<TestProblem, OracleError> {
    if !n.is_multiple_of(2) {
        return Err(OracleError::Unsupported(format!(
            "bilinear_saddle needs an even dimension, got {n}"
        )));
    }
    let m = n / 2;
    // ‖G‖/√m ≈ 2, so K stays well conditioned.
    let k = DMatrix::identity(m, m) + gaussian_matrix(rng, m, m) * (0.25 / (m as f64).sqrt());
    let z0 = gaussian_vector(rng, n);
    TestProblem::bilinear(&k, VectorH::zeros(m), VectorH::zeros(m), z0)
}

fn l1_composite(rng: &mut ChaCha8Rng, n: usize) -> Result<TestProblem, OracleError> {
    let rows = 2 * n;
    let mm = gaussian_matrix(rng, rows, n);
    let q = mm.transpose() * &mm / rows as f64 + DMatrix::identity(n, n) * 0.1;
    let mu = 0.5;
    // Sparse plant; zero coordinates get a strictly interior subgradient.
    let mut z_star = vec![0.0; n];
    let mut sub = vec![0.0; n];
    for i in 0..n {
        if rng.random::<f64>() < 0.4 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            z_star[i] = sign * rng.random_range(0.5..1.5);
            sub[i] = sign;
        } else {
            sub[i] = rng.random_range(-0.8..0.8);
        }
    }
    let z_star = vec_from(z_star)?;
    let qz = VectorH::from_dvector(&(&q * z_star.to_dvector()));
    let c = VectorH::from_fn(n, |i| -qz[i] - mu * sub[i]);
    let z0 = gaussian_vector(rng, n);
    let forward = ForwardMap::new(AffineOperator::new(q, c)?, None)?;
    TestProblem::new(
        ProblemKind::L1Composite,
        Some(forward),
        Backward::L1 { weight: mu, dim: n },
        z0,
        Some(z_star),
    )
}

impl TestProblem {
    /// Validates dimensions and the stored solution, then fills in `d₀`.
    pub fn new(
        kind: ProblemKind,
        forward: Option<ForwardMap>,
        backward: Backward,
        z0: VectorH,
        known_solution: Option<VectorH>,
    ) -> Result<Self, OracleError> {
        use super::ResolventOracle;
        let n = backward.dim();
        if let Some(f) = &forward {
            if f.dim() != n {
                return Err(OracleError::Dimension { expected: n, got: f.dim() });
            }
        }
        if z0.dim() != n {
            return Err(OracleError::Dimension { expected: n, got: z0.dim() });
        }
        let mut p = Self {
            kind,
            seed: None,
            forward,
            backward,
            z0,
            known_solution: None,
            known_d0: None,
        };
        if let Some(z) = known_solution {
            p.set_solution(z)?;
        }
        Ok(p)
    }

    /// `0 ∈ Az + b`, solved by a linear solve.
    pub fn affine(op: AffineOperator, z0: VectorH) -> Result<Self, OracleError> {
        if !op.is_monotone(1e-10 * op.matrix().amax().max(1.0)) {
            return Err(OracleError::Invalid("affine operator is not monotone".into()));
        }
        let z_star = op.zero()?;
        Self::new(ProblemKind::AffineInclusion, None, Backward::Affine(op), z0, Some(z_star))
    }

    /// Saddle point of `xᵀKy + pᵀx + qᵀy`: `F(x, y) = (Ky + p, −Kᵀx − q)`, `B = 0`.
    pub fn bilinear(
        k: &DMatrix<f64>,
        p: VectorH,
        q: VectorH,
        z0: VectorH,
    ) -> Result<Self, OracleError> {
        let m = k.nrows();
        if !k.is_square() || p.dim() != m || q.dim() != m {
            return Err(OracleError::Dimension { expected: m, got: p.dim().max(q.dim()) });
        }
        let n = 2 * m;
        let mut s = DMatrix::zeros(n, n);
        s.view_mut((0, m), (m, m)).copy_from(k);
        s.view_mut((m, 0), (m, m)).copy_from(&(-k.transpose()));
        let offset = VectorH::from_fn(n, |i| if i < m { p[i] } else { -q[i - m] });
        let op = AffineOperator::new(s, offset)?;
        let z_star = op.zero()?;
        let forward = ForwardMap::new(op, None)?;
        Self::new(
            ProblemKind::BilinearSaddle,
            Some(forward),
            Backward::Zero { dim: n },
            z0,
            Some(z_star),
        )
    }

    pub fn dim(&self) -> usize {
        self.z0.dim()
    }

    /// Replaces `z₀` and recomputes `d₀`.
    pub fn with_initial_point(mut self, z0: VectorH) -> Result<Self, OracleError> {
        if z0.dim() != self.dim() {
            return Err(OracleError::Dimension { expected: self.dim(), got: z0.dim() });
        }
        self.known_d0 = self.known_solution.as_ref().map(|z| z0.dist(z));
        self.z0 = z0;
        Ok(self)
    }

    fn set_solution(&mut self, z: VectorH) -> Result<(), OracleError> {
        let r = self.inclusion_residual(&z);
        let scale = 1.0 + z.norm();
        if !(r <= SOLUTION_TOL * scale) {
            return Err(OracleError::Invalid(format!(
                "stored solution has inclusion residual {r:.3e}"
            )));
        }
        self.known_d0 = Some(self.z0.dist(&z));
        self.known_solution = Some(z);
        Ok(())
    }

    /// `dist(0, F(z) + B(z))`.
    pub fn inclusion_residual(&self, z: &VectorH) -> f64 {
        let g = match &self.forward {
            Some(f) => f.apply(z),
            None => VectorH::zeros(z.dim()),
        };
        self.backward.inclusion_gap(z, &g)
    }

    /// `T = F + B` as a single affine operator, when both parts are affine.
    pub fn full_operator(&self) -> Option<AffineOperator> {
        let b = self.backward.as_affine()?;
        match &self.forward {
            None => Some(b),
            Some(f) => {
                let m = f.map.matrix() + b.matrix();
                AffineOperator::new(m, f.map.offset() + b.offset()).ok()
            }
        }
    }

    /// The `(F, B)` pair for splitting methods; an affine `T` splits as `F = T`, `B = 0`.
    pub fn split(&self) -> Result<(ForwardMap, Backward), OracleError> {
        match (&self.forward, &self.backward) {
            (Some(f), b) => Ok((f.clone(), b.clone())),
            (None, Backward::Affine(a)) => {
                Ok((ForwardMap::new(a.clone(), None)?, Backward::Zero { dim: a.dim() }))
            }
            (None, _) => Err(OracleError::Unsupported(format!(
                "{} has no forward part to split off",
                self.kind
            ))),
        }
    }

    /// The single operator whose resolvent the proximal point method needs.
    pub fn proximal_operator(&self) -> Result<Backward, OracleError> {
        if self.forward.is_none() {
            return Ok(self.backward.clone());
        }
        self.full_operator().map(Backward::Affine).ok_or_else(|| {
            OracleError::Unsupported(format!(
                "{}: resolvent of F + B has no closed form",
                self.kind
            ))
        })
    }

    pub fn to_data(&self) -> ProblemData {
        let (affine, lower, upper, l1_weight) = match (&self.forward, &self.backward) {
            (None, Backward::Affine(a)) => (a.clone(), None, None, None),
            (Some(f), Backward::BoxNormalCone(b)) => (
                f.map.clone(),
                Some(b.lower.as_slice().to_vec()),
                Some(b.upper.as_slice().to_vec()),
                None,
            ),
            (Some(f), Backward::L1 { weight, .. }) => (f.map.clone(), None, None, Some(*weight)),
            (Some(f), _) => (f.map.clone(), None, None, None),
            (None, _) => unreachable!("every zoo problem has an affine part"),
        };
        ProblemData {
            kind: self.kind,
            seed: self.seed,
            matrix: affine.rows(),
            offset: affine.offset().as_slice().to_vec(),
            lower,
            upper,
            l1_weight,
            z0: self.z0.as_slice().to_vec(),
            known_solution: self.known_solution.as_ref().map(|z| z.as_slice().to_vec()),
        }
    }

    pub fn from_data(data: ProblemData) -> Result<Self, OracleError> {
        let offset = vec_from(data.offset)?;
        let op = AffineOperator::from_rows(&data.matrix, offset)?;
        let n = op.dim();
        let z0 = vec_from(data.z0)?;
        let sol = data.known_solution.map(vec_from).transpose()?;
        let mut p = match data.kind {
            ProblemKind::AffineInclusion => {
                let mut p = Self::new(data.kind, None, Backward::Affine(op), z0, None)?;
                let z = match sol {
                    Some(z) => z,
                    None => p.backward.as_affine().expect("affine").zero()?,
                };
                p.set_solution(z)?;
                p
            }
            ProblemKind::BoxConstrainedQuadratic => {
                let (lo, hi) = data.lower.zip(data.upper).ok_or_else(|| {
                    OracleError::Invalid("box problem needs `lower` and `upper`".into())
                })?;
                let bx = BoxSet::new(vec_from(lo)?, vec_from(hi)?)?;
                let f = ForwardMap::new(op, Some(bx.clone()))?;
                Self::new(data.kind, Some(f), Backward::BoxNormalCone(bx), z0, sol)?
            }
            ProblemKind::BilinearSaddle => {
                let sol = match sol {
                    Some(z) => z,
                    None => op.zero()?,
                };
                let f = ForwardMap::new(op, None)?;
                Self::new(data.kind, Some(f), Backward::Zero { dim: n }, z0, Some(sol))?
            }
            ProblemKind::L1Composite => {
                let weight = data.l1_weight.ok_or_else(|| {
                    OracleError::Invalid("l1 problem needs `l1_weight`".into())
                })?;
                if !(weight >= 0.0) {
                    return Err(OracleError::Invalid("l1_weight must be nonnegative".into()));
                }
                let f = ForwardMap::new(op, None)?;
                Self::new(data.kind, Some(f), Backward::L1 { weight, dim: n }, z0, sol)?
            }
        };
        p.seed = data.seed;
        Ok(p)
    }
}
