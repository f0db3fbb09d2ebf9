//! Affine monotone operators `T(z) = Az + b` and the closed-form membership
//! test for their ε-enlargements.

use std::fmt;
use std::sync::Mutex;

use nalgebra::{DMatrix, SymmetricEigen, LU, Dyn};

use super::OracleError;
use crate::linalg::VectorH;

type Factorization = LU<f64, Dyn, Dyn>;

/// `z ↦ Az + b` with `A` square.
pub struct AffineOperator {
    matrix: DMatrix<f64>,
    offset: VectorH,
    /// LU factors of `λA + I` for the most recent `λ`.
    resolvent_cache: Mutex<Option<(f64, Factorization)>>,
}

impl Clone for AffineOperator {
    fn clone(&self) -> Self {
        Self {
            matrix: self.matrix.clone(),
            offset: self.offset.clone(),
            resolvent_cache: Mutex::new(None),
        }
    }
}

impl fmt::Debug for AffineOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineOperator")
            .field("dim", &self.dim())
            .field("matrix", &self.matrix)
            .field("offset", &self.offset)
            .finish()
    }
}

impl AffineOperator {
    pub fn new(matrix: DMatrix<f64>, offset: VectorH) -> Result<Self, OracleError> {
        if !matrix.is_square() || matrix.nrows() != offset.dim() {
            return Err(OracleError::Dimension {
                expected: offset.dim(),
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(OracleError::Invalid("matrix has non-finite entries".into()));
        }
        Ok(Self { matrix, offset, resolvent_cache: Mutex::new(None) })
    }

    /// Builds from row-major data.
    pub fn from_rows(rows: &[Vec<f64>], offset: VectorH) -> Result<Self, OracleError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(OracleError::Invalid(format!("matrix must be square with {n} rows")));
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(matrix, offset)
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self, OracleError> {
        let n = matrix.nrows();
        Self::new(matrix, VectorH::zeros(n.max(1)))
    }

    pub fn dim(&self) -> usize {
        self.offset.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &VectorH {
        &self.offset
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn apply(&self, z: &VectorH) -> VectorH {
        assert_eq!(z.dim(), self.dim(), "AffineOperator dimension mismatch");
        let az = &self.matrix * z.to_dvector();
        VectorH::from_fn(self.dim(), |i| az[i] + self.offset[i])
    }

    /// `Az` without the offset.
    pub fn apply_linear(&self, z: &VectorH) -> VectorH {
        VectorH::from_dvector(&(&self.matrix * z.to_dvector()))
    }

    pub fn symmetric_part(&self) -> DMatrix<f64> {
        (&self.matrix + self.matrix.transpose()) * 0.5
    }

    pub fn is_symmetric(&self) -> bool {
        let scale = self.matrix.amax().max(1.0);
        (&self.matrix - self.matrix.transpose()).amax() <= 1e-12 * scale
    }

    /// Smallest eigenvalue of the symmetric part; `≥ 0` iff monotone.
    pub fn monotonicity_modulus(&self) -> f64 {
        SymmetricEigen::new(self.symmetric_part()).eigenvalues.min()
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.monotonicity_modulus() >= -tol
    }

    /// Operator 2-norm `‖A‖`, the Lipschitz constant of the map.
    pub fn spectral_norm(&self) -> f64 {
        if self.is_symmetric() {
            SymmetricEigen::new(self.symmetric_part()).eigenvalues.amax()
        } else {
            self.matrix.clone().svd(false, false).singular_values.max()
        }
    }

    /// Solves `Az + b = 0`.
    pub fn zero(&self) -> Result<VectorH, OracleError> {
        let lu = self.matrix.clone().lu();
        let rhs = -self.offset.to_dvector();
        lu.solve(&rhs)
            .map(|x| VectorH::from_dvector(&x))
            .ok_or(OracleError::Singular)
    }

    /// `(λA + I)^{-1}(w − λb)`, the resolvent of the affine operator.
    pub fn resolvent(&self, lambda: f64, w: &VectorH) -> Result<VectorH, OracleError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(OracleError::InvalidLambda(lambda));
        }
        if w.dim() != self.dim() {
            return Err(OracleError::Dimension { expected: self.dim(), got: w.dim() });
        }
        let mut rhs = w.to_dvector();
        rhs.axpy(-lambda, &self.offset.to_dvector(), 1.0);

        let mut cache = self.resolvent_cache.lock().unwrap_or_else(|e| e.into_inner());
        let stale = !matches!(&*cache, Some((l, _)) if *l == lambda);
        if stale {
            let n = self.dim();
            let m = &self.matrix * lambda + DMatrix::<f64>::identity(n, n);
            *cache = Some((lambda, m.lu()));
        }
        let (_, lu) = cache.as_ref().expect("factorization cached above");
        lu.solve(&rhs)
            .map(|x| VectorH::from_dvector(&x))
            .ok_or(OracleError::Singular)
    }
}

/// Tolerance used by [`enlargement_member`] when none is given.
pub const ENLARGEMENT_TOL: f64 = 1e-9;

/// `inf_{z′} ⟨z − z′, v − (Az′ + b)⟩`, or `−∞` when unbounded below.
///
/// Substituting `u = z − z′` the objective is `⟨u, r⟩ + uᵀSu` with
/// `r = v − Az − b` and `S` the symmetric part of `A`. It is bounded below iff
/// `r ∈ range(S)`, and then the infimum is `−¼ rᵀS⁺r`.
pub fn enlargement_infimum(t: &AffineOperator, z: &VectorH, v: &VectorH) -> f64 {
    let tz = t.apply(z);
    let r = v - &tz;
    let eig = SymmetricEigen::new(t.symmetric_part());
    let coeffs = eig.eigenvectors.transpose() * r.to_dvector();
    let spectral_scale = eig.eigenvalues.amax().max(1.0);
    let null_tol = 1e-9 * (1.0 + v.norm() + tz.norm());
    let mut acc = 0.0;
    for (mu, c) in eig.eigenvalues.iter().zip(coeffs.iter()) {
        if *mu > 1e-12 * spectral_scale {
            acc += c * c / (4.0 * mu);
        } else if c.abs() > null_tol {
            return f64::NEG_INFINITY;
        }
    }
    -acc
}

/// Whether `v ∈ T^ε(z)` for affine monotone `T`, up to `tol`.
pub fn enlargement_member(t: &AffineOperator, z: &VectorH, v: &VectorH, eps: f64) -> bool {
    enlargement_member_tol(t, z, v, eps, ENLARGEMENT_TOL)
}

pub fn enlargement_member_tol(
    t: &AffineOperator,
    z: &VectorH,
    v: &VectorH,
    eps: f64,
    tol: f64,
) -> bool {
    enlargement_infimum(t, z, v) >= -eps - tol
}
