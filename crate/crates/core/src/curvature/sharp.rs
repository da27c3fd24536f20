//! The quadratic map `#` on symmetric operators of Λ²Rⁿ.
//!
//! In general dimension `R#` is built from the structure constants of
//! so(n) in the orthonormal wedge basis:
//!
//! ```text
//! (R#)_{αβ} = κ · Σ c^α_{γε} c^β_{δζ} R_{γδ} R_{εζ},   [E_γ, E_ε] = Σ_α c^α_{γε} E_α
//! ```
//!
//! The prefactor κ is fixed once per dimension from `I# = (n−2)·I`, after
//! checking that the uncalibrated form maps the identity to a multiple of
//! the identity. In dimension three the same map is the adjugate.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix3};

use super::wedge::{WedgeBasis, MAX_DIM};
use crate::error::{Error, Result};

/// Largest dimension for which the structure-constant table is built.
pub const MAX_SHARP_DIM: usize = 8;

pub(crate) struct SharpTable {
    /// For each output index α, the nonzero structure constants (γ, ε, c^α_{γε}).
    terms: Vec<Vec<(usize, usize, f64)>>,
    kappa: f64,
}

impl SharpTable {
    fn build(n: usize) -> Self {
        let w = WedgeBasis::new(n).expect("dimension validated by caller");
        let dim = w.dim();
        let mut terms = vec![Vec::new(); dim];
        let skews: Vec<DMatrix<f64>> = (0..dim).map(|p| w.skew(p)).collect();
        for g in 0..dim {
            for e in 0..dim {
                let bracket = &skews[g] * &skews[e] - &skews[e] * &skews[g];
                let coords = w.skew_coords(&bracket);
                for (alpha, &c) in coords.iter().enumerate() {
                    if c != 0.0 {
                        terms[alpha].push((g, e, c));
                    }
                }
            }
        }
        let mut table = SharpTable { terms, kappa: 1.0 };
        let raw = table.bilinear(&DMatrix::identity(dim, dim), &DMatrix::identity(dim, dim));
        let d = raw[(0, 0)];
        let off = (&raw - DMatrix::<f64>::identity(dim, dim) * d).amax();
        assert!(
            off <= 1e-12 * (1.0 + d.abs()),
            "uncalibrated sharp does not map I to a multiple of I (defect {off:e})"
        );
        table.kappa = if d == 0.0 { 0.5 } else { (n as f64 - 2.0) / d };
        table
    }

    /// Uncalibrated symmetric bilinear form B(R, S).
    fn bilinear(&self, r: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
        let dim = self.terms.len();
        let mut out = DMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in a..dim {
                let mut acc = 0.0;
                for &(g, e, c1) in &self.terms[a] {
                    for &(d, z, c2) in &self.terms[b] {
                        acc += c1 * c2 * 0.5 * (r[(g, d)] * s[(e, z)] + s[(g, d)] * r[(e, z)]);
                    }
                }
                out[(a, b)] = acc;
                out[(b, a)] = acc;
            }
        }
        out
    }
}

fn table(n: usize) -> &'static SharpTable {
    static TABLES: [OnceLock<SharpTable>; MAX_SHARP_DIM + 1] = [const { OnceLock::new() }; MAX_SHARP_DIM + 1];
    TABLES[n].get_or_init(|| SharpTable::build(n))
}

fn check_dim(n: usize) -> Result<()> {
    if n > MAX_SHARP_DIM || !(2..=MAX_DIM).contains(&n) {
        return Err(Error::Capability(format!(
            "sharp is configured for 2 <= n <= {MAX_SHARP_DIM}, got n = {n}"
        )));
    }
    Ok(())
}

/// Calibrated prefactor κ for dimension `n`.
pub fn sharp_prefactor(n: usize) -> Result<f64> {
    check_dim(n)?;
    Ok(table(n).kappa)
}

/// `R#` from so(n) structure constants, for a matrix in wedge coordinates.
pub fn sharp_structure(n: usize, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(n)?;
    let t = table(n);
    Ok(t.bilinear(r, r) * t.kappa)
}

/// Polarized form `R # S` (so that `R # R = R#`).
pub fn sharp_product(n: usize, r: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim(n)?;
    let t = table(n);
    Ok(t.bilinear(r, s) * t.kappa)
}

/// Classical adjugate (transposed cofactor matrix) of a 3×3 matrix.
pub fn adjugate3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let c = |i0: usize, i1: usize, j0: usize, j1: usize| m[(i0, j0)] * m[(i1, j1)] - m[(i0, j1)] * m[(i1, j0)];
    Matrix3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

/// Reaction term `R² + R#` for n = 3, shared by the ODE and the grid simulator.
pub fn phi3(m: &Matrix3<f64>) -> Matrix3<f64> {
    m * m + adjugate3(m)
}
