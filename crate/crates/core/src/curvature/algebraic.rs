//! The subspace of symmetric operators obeying the first Bianchi identity.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::wedge::{WedgeBasis, MAX_DIM};
use crate::linalg::null_space;

/// Orthonormal basis (for ⟨R,S⟩ = tr(RS)) of the algebraic curvature tensors in dimension n.
#[derive(Debug)]
pub struct AlgebraicBasis {
    n: usize,
    elements: Vec<DMatrix<f64>>,
    /// Singular values of the first-Bianchi constraint system (empty for n ≤ 3).
    singular_values: Vec<f64>,
}

impl AlgebraicBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    /// dim 𝒜ₙ.
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn coords(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.elements.iter().map(|b| b.dot(m)))
    }

    pub fn compose(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let size = self.elements[0].nrows();
        self.elements
            .iter()
            .zip(c.iter())
            .fold(DMatrix::zeros(size, size), |acc, (b, &x)| acc + b * x)
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.compose(&self.coords(m))
    }
}

/// Orthonormal basis of symmetric N×N matrices: E_ii, then (E_ij + E_ji)/√2 for i < j.
pub fn symmetric_basis(size: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(size * (size + 1) / 2);
    for i in 0..size {
        let mut m = DMatrix::zeros(size, size);
        m[(i, i)] = 1.0;
        out.push(m);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..size {
        for j in i + 1..size {
            let mut m = DMatrix::zeros(size, size);
            m[(i, j)] = s;
            m[(j, i)] = s;
            out.push(m);
        }
    }
    out
}

fn build(n: usize) -> AlgebraicBasis {
    let w = WedgeBasis::new(n).expect("dimension validated by caller");
    let size = w.dim();
    let sym = symmetric_basis(size);
    if n <= 3 {
        return AlgebraicBasis {
            n,
            elements: sym,
            singular_values: Vec::new(),
        };
    }
    // The cyclic sum is alternating in (x, y, z), so x < y < z with any w suffices.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            for z in y + 1..n {
                for v in 0..n {
                    let terms = [((x, y), (z, v)), ((y, z), (x, v)), ((z, x), (y, v))];
                    let row: Vec<f64> = sym
                        .iter()
                        .map(|b| {
                            terms
                                .iter()
                                .map(|&((i, j), (k, l))| match (w.locate(i, j), w.locate(k, l)) {
                                    (Some((p, s1)), Some((q, s2))) => s1 * s2 * b[(p, q)],
                                    _ => 0.0,
                                })
                                .sum()
                        })
                        .collect();
                    if row.iter().any(|&c| c != 0.0) {
                        rows.push(row);
                    }
                }
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), sym.len(), |r, c| rows[r][c]);
    let ns = null_space(&a, 1e-8);
    let elements = (0..ns.basis.ncols())
        .map(|k| {
            sym.iter()
                .zip(ns.basis.column(k).iter())
                .fold(DMatrix::zeros(size, size), |acc, (b, &x)| acc + b * x)
        })
        .collect();
    AlgebraicBasis {
        n,
        elements,
        singular_values: ns.singular_values,
    }
}

/// Cached basis of 𝒜ₙ, built on first use.
pub fn algebraic_basis(n: usize) -> &'static AlgebraicBasis {
    static CACHE: [OnceLock<AlgebraicBasis>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    assert!((2..=MAX_DIM).contains(&n), "dimension {n} out of range");
    CACHE[n].get_or_init(|| build(n))
}
