//! Algebraic curvature operators on Λ²Rⁿ.
//!
//! An operator is stored as a symmetric N×N matrix (N = n(n−1)/2) in the
//! orthonormal wedge basis of [`WedgeBasis`]. With this convention
//! `⟨R,S⟩ = tr(RS)`, `scal(R) = tr(R)`, and the round sphere has `R = 2I`.

mod algebraic;
mod sharp;
mod wedge;

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

pub use algebraic::{algebraic_basis, symmetric_basis, AlgebraicBasis};
pub use sharp::{adjugate3, phi3, sharp_prefactor, sharp_product, sharp_structure, MAX_SHARP_DIM};
pub use wedge::{WedgeBasis, MAX_DIM};

use crate::error::{Error, Result};
use crate::linalg::{orthogonality_defect, sorted_symmetric_eigen, symmetry_defect};

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureOperator {
    n: usize,
    mat: DMatrix<f64>,
}

/// The Ricci endomorphism `Ric(R)` on Rⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricForm2 {
    pub n: usize,
    pub mat: DMatrix<f64>,
}

impl SymmetricForm2 {
    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub frame: DMatrix<f64>,
}

fn wedge_dim(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Distance of a symmetric wedge-coordinate matrix from 𝒜ₙ (zero for n ≤ 3).
pub fn first_bianchi_residual(n: usize, mat: &DMatrix<f64>) -> f64 {
    if n <= 3 {
        return 0.0;
    }
    (mat - algebraic_basis(n).project(mat)).norm()
}

/// Orthogonal projection of a symmetric matrix onto 𝒜ₙ, n ≥ 4.
pub fn first_bianchi_project(n: usize, s: &DMatrix<f64>) -> Result<CurvatureOperator> {
    if n <= 3 {
        return Err(Error::Capability(format!(
            "first Bianchi projection is the identity for n = {n}; use CurvatureOperator::new"
        )));
    }
    if n > MAX_DIM {
        return Err(Error::Capability(format!("n = {n} exceeds {MAX_DIM}")));
    }
    check_shape(n, s)?;
    check_symmetric(s)?;
    Ok(CurvatureOperator {
        n,
        mat: algebraic_basis(n).project(s),
    })
}

fn check_shape(n: usize, mat: &DMatrix<f64>) -> Result<()> {
    let d = wedge_dim(n);
    if mat.nrows() != d || mat.ncols() != d {
        return Err(Error::invalid(format!(
            "expected {d}x{d} matrix for n = {n}, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

fn check_symmetric(mat: &DMatrix<f64>) -> Result<()> {
    if mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite matrix entry"));
    }
    let defect = symmetry_defect(mat);
    if defect > 1e-12 * (1.0 + mat.amax()) {
        return Err(Error::invalid(format!("matrix not symmetric (defect {defect:e})")));
    }
    Ok(())
}

impl CurvatureOperator {
    /// Validates shape, symmetry and (for n ≥ 4) the first Bianchi identity.
    pub fn new(n: usize, mat: DMatrix<f64>) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::invalid(format!("base dimension {n} outside 2..={MAX_DIM}")));
        }
        check_shape(n, &mat)?;
        check_symmetric(&mat)?;
        if n >= 4 {
            let res = first_bianchi_residual(n, &mat);
            if res > 1e-10 * mat.norm() {
                return Err(Error::invalid(format!(
                    "operator violates the first Bianchi identity (residual {res:e})"
                )));
            }
        }
        Ok(Self { n, mat })
    }

    /// Symmetrizes `mat` and skips the first-Bianchi check.
    pub(crate) fn from_raw(n: usize, mat: DMatrix<f64>) -> Self {
        let mat = (&mat + mat.transpose()) * 0.5;
        Self { n, mat }
    }

    pub fn from_matrix3(m: &Matrix3<f64>) -> Self {
        let mat = DMatrix::from_fn(3, 3, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Self { n: 3, mat }
    }

    pub fn to_matrix3(&self) -> Option<Matrix3<f64>> {
        (self.n == 3).then(|| Matrix3::from_fn(|i, j| self.mat[(i, j)]))
    }

    pub fn zero(n: usize) -> Self {
        let d = wedge_dim(n);
        Self {
            n,
            mat: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(n: usize) -> Self {
        let d = wedge_dim(n);
        Self {
            n,
            mat: DMatrix::identity(d, d),
        }
    }

    /// Diagonal operator in wedge coordinates (n ≤ 3, where every symmetric matrix is admissible).
    pub fn diagonal(n: usize, values: &[f64]) -> Result<Self> {
        if n > 3 {
            return Err(Error::invalid("diagonal constructor is only admissible for n <= 3"));
        }
        let d = wedge_dim(n);
        if values.len() != d {
            return Err(Error::invalid(format!("expected {d} diagonal entries")));
        }
        Self::new(n, DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Size N of the wedge-coordinate matrix.
    pub fn wedge_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.mat.transpose().iter().copied().collect()
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.mat.dot(&other.mat)
    }

    pub fn scalar(&self) -> f64 {
        self.mat.trace()
    }

    /// `Ric(R)_{kl} = ½ Σᵢ R(e_k∧e_i, e_l∧e_i)`.
    pub fn ricci(&self) -> SymmetricForm2 {
        let w = WedgeBasis::new(self.n).expect("validated dimension");
        let n = self.n;
        let mut ric = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in k..n {
                let mut acc = 0.0;
                for i in 0..n {
                    if let (Some((p, s1)), Some((q, s2))) = (w.locate(k, i), w.locate(l, i)) {
                        acc += s1 * s2 * self.mat[(p, q)];
                    }
                }
                ric[(k, l)] = 0.5 * acc;
                ric[(l, k)] = 0.5 * acc;
            }
        }
        SymmetricForm2 { n, mat: ric }
    }

    /// `R#`: adjugate for n = 3, calibrated structure-constant form otherwise.
    pub fn sharp(&self) -> Result<Self> {
        if self.n == 3 {
            let m = self.to_matrix3().expect("n = 3");
            return Ok(Self::from_matrix3(&adjugate3(&m)));
        }
        Ok(Self::from_raw(self.n, sharp_structure(self.n, &self.mat)?))
    }

    /// Reaction term `Φ(R) = R² + R#`.
    pub fn phi(&self) -> Result<Self> {
        if self.n == 3 {
            let m = self.to_matrix3().expect("n = 3");
            return Ok(Self::from_matrix3(&phi3(&m)));
        }
        let sq = &self.mat * &self.mat;
        Ok(Self::from_raw(self.n, sq + sharp_structure(self.n, &self.mat)?))
    }

    /// `ρ(Q)R = Λ²Q · R · (Λ²Q)ᵀ`.
    pub fn rotate(&self, q: &DMatrix<f64>) -> Result<Self> {
        if q.nrows() != self.n || q.ncols() != self.n {
            return Err(Error::invalid(format!(
                "rotation must be {0}x{0}, got {1}x{2}",
                self.n,
                q.nrows(),
                q.ncols()
            )));
        }
        let defect = orthogonality_defect(q);
        if defect > 1e-10 {
            return Err(Error::invalid(format!("matrix is not orthogonal (defect {defect:e})")));
        }
        let lift = WedgeBasis::new(self.n)?.lift(q);
        Ok(Self::from_raw(self.n, &lift * &self.mat * lift.transpose()))
    }

    pub fn eigen_sorted(&self) -> Result<EigenData> {
        let (values, frame) = sorted_symmetric_eigen(&self.mat)?;
        Ok(EigenData { values, frame })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen_sorted()?.values)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n: self.n,
            mat: &self.mat * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mat.iter().all(|x| x.is_finite())
    }
}

impl Add for &CurvatureOperator {
    type Output = CurvatureOperator;
    fn add(self, rhs: Self) -> CurvatureOperator {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        CurvatureOperator {
            n: self.n,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &CurvatureOperator {
    type Output = CurvatureOperator;
    fn sub(self, rhs: Self) -> CurvatureOperator {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        CurvatureOperator {
            n: self.n,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul<f64> for &CurvatureOperator {
    type Output = CurvatureOperator;
    fn mul(self, rhs: f64) -> CurvatureOperator {
        self.scale(rhs)
    }
}

impl Neg for &CurvatureOperator {
    type Output = CurvatureOperator;
    fn neg(self) -> CurvatureOperator {
        self.scale(-1.0)
    }
}
