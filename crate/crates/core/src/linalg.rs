//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Orthonormal basis of the null space of `a`, plus the full list of
/// singular values (descending, padded with zeros up to the column count).
///
/// Rank is decided with the threshold `rel_tol * sigma_max`.
pub struct NullSpace {
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> NullSpace {
    let cols = a.ncols();
    // Pad to at least square so the SVD returns a complete right factor.
    let rows = a.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = values.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * sigma_max;
    let rank = if sigma_max == 0.0 {
        0
    } else {
        values.iter().filter(|&&s| s > cutoff).count()
    };
    let kernel: Vec<usize> = order[rank..].to_vec();
    let mut basis = DMatrix::zeros(cols, kernel.len());
    for (c, &i) in kernel.iter().enumerate() {
        let row = v_t.row(i).transpose();
        basis.set_column(c, &canonical_sign(row));
    }
    NullSpace {
        basis,
        singular_values: values,
        rank,
    }
}

/// Flip `v` so that its first component with magnitude above 1e-12 is positive.
pub fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-12) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
    v
}

/// Eigen-decomposition sorted ascending, frame columns with canonical sign.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let scale = 1.0 + m.amax();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric {
            message: "symmetric eigensolver did not converge".into(),
            residual: f64::NAN,
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut frame = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        frame.set_column(c, &canonical_sign(eig.eigenvectors.column(i).into_owned()));
    }
    let recon = &frame * DMatrix::from_diagonal(&DVector::from_vec(values.clone())) * frame.transpose();
    let residual = (m - recon).norm();
    if !residual.is_finite() || residual > 1e-9 * scale * (n as f64) {
        return Err(Error::Numeric {
            message: "eigen reconstruction residual too large".into(),
            residual,
        });
    }
    Ok((values, frame))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn top_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (values, _) = sorted_symmetric_eigen(m)?;
    Ok(*values.last().unwrap())
}

pub fn smallest_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let (values, _) = sorted_symmetric_eigen(m)?;
    Ok(values[0])
}

/// Haar-distributed rotation in SO(n) (QR of a Gaussian matrix, sign fixed).
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        let mut col = q.column_mut(0);
        col.neg_mut();
    }
    q
}

/// Symmetric matrix with independent N(0,1) entries on and above the diagonal.
pub fn random_symmetric<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x: f64 = rng.sample(StandardNormal);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(n, n)).amax()
}

/// Orthonormal basis (columns) of the orthogonal complement of `v` in R^len.
pub fn complement_basis(v: &DVector<f64>) -> DMatrix<f64> {
    let a = DMatrix::from_row_slice(1, v.len(), v.as_slice());
    null_space(&a, 1e-12).basis
}
