//! Tuples `(T₁,…,Tₙ)` of curvature operators and the second Bianchi identity
//!
//! ```text
//! Tᵢ(b_j∧b_k) + T_j(b_k∧bᵢ) + T_k(bᵢ∧b_j) = 0   for all i, j, k.
//! ```
//!
//! Tuple coordinates are slot-major: slot `i` occupies entries
//! `i·d .. (i+1)·d`, where `d = dim 𝒜ₙ` and each slot is expanded in the
//! orthonormal basis returned by [`algebraic_basis`].

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::curvature::{algebraic_basis, CurvatureOperator, WedgeBasis, MAX_DIM};
use crate::error::{Error, Result};
use crate::linalg::{null_space, orthogonality_defect};

/// Tuple spaces above this base dimension must be requested explicitly.
pub const DEFAULT_TUPLE_CEILING: usize = 4;

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureTuple {
    n: usize,
    tensors: Vec<CurvatureOperator>,
}

impl CurvatureTuple {
    pub fn new(tensors: Vec<CurvatureOperator>) -> Result<Self> {
        let n = tensors.len();
        if n < 2 {
            return Err(Error::invalid("a tuple needs at least two slots"));
        }
        if let Some(t) = tensors.iter().find(|t| t.n() != n) {
            return Err(Error::invalid(format!(
                "tuple of length {n} contains an operator for n = {}",
                t.n()
            )));
        }
        Ok(Self { n, tensors })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            tensors: vec![CurvatureOperator::zero(n); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tensors(&self) -> &[CurvatureOperator] {
        &self.tensors
    }

    pub fn norm_squared(&self) -> f64 {
        self.tensors.iter().map(|t| t.norm().powi(2)).sum()
    }

    pub fn coords(&self) -> DVector<f64> {
        let basis = algebraic_basis(self.n);
        let d = basis.dim();
        let mut v = DVector::zeros(self.n * d);
        for (i, t) in self.tensors.iter().enumerate() {
            v.rows_mut(i * d, d).copy_from(&basis.coords(t.matrix()));
        }
        v
    }

    pub fn from_coords(n: usize, v: &DVector<f64>) -> Result<Self> {
        let basis = algebraic_basis(n);
        let d = basis.dim();
        if v.len() != n * d {
            return Err(Error::invalid(format!("expected {} tuple coordinates", n * d)));
        }
        let tensors = (0..n)
            .map(|i| CurvatureOperator::from_raw(n, basis.compose(&v.rows(i * d, d).into_owned())))
            .collect();
        Ok(Self { n, tensors })
    }
}

/// Stacked identity over all i < j < k with respect to the orthonormal basis
/// whose columns are `frame`; slot `i` is attached to `frame[:, i]`.
fn residual_vector(t: &CurvatureTuple, frame: &DMatrix<f64>) -> DVector<f64> {
    let n = t.n;
    let w = WedgeBasis::new(n).expect("validated dimension");
    let col = |i: usize| -> Vec<f64> { frame.column(i).iter().copied().collect() };
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (bi, bj, bk) = (col(i), col(j), col(k));
                let v = t.tensors[i].matrix() * w.wedge(&bj, &bk)
                    + t.tensors[j].matrix() * w.wedge(&bk, &bi)
                    + t.tensors[k].matrix() * w.wedge(&bi, &bj);
                out.extend(v.iter());
            }
        }
    }
    DVector::from_vec(out)
}

/// Norm of the stacked second Bianchi identity in the standard basis.
pub fn bianchi_residual(t: &CurvatureTuple) -> f64 {
    residual_vector(t, &DMatrix::identity(t.n, t.n)).norm()
}

/// Residual of the identity with slot `i` attached to the i-th column of `frame`.
pub fn bianchi_residual_in_basis(t: &CurvatureTuple, frame: &DMatrix<f64>) -> Result<f64> {
    if frame.nrows() != t.n || frame.ncols() != t.n || orthogonality_defect(frame) > 1e-10 {
        return Err(Error::invalid("frame must be an orthogonal n×n matrix"));
    }
    Ok(residual_vector(t, frame).norm())
}

/// Identity evaluated over all n³ index triples (including repeated indices).
pub fn bianchi_residual_all_triples(t: &CurvatureTuple) -> f64 {
    let n = t.n;
    let w = WedgeBasis::new(n).expect("validated dimension");
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = t.tensors[i].matrix() * w.unit_wedge(j, k)
                    + t.tensors[j].matrix() * w.unit_wedge(k, i)
                    + t.tensors[k].matrix() * w.unit_wedge(i, j);
                acc += v.norm_squared();
            }
        }
    }
    acc.sqrt()
}

/// Rows: one per (i<j<k, wedge coordinate); columns: tuple coordinates.
fn build_constraints(n: usize) -> DMatrix<f64> {
    let w = WedgeBasis::new(n).expect("validated dimension");
    let basis = algebraic_basis(n);
    let d = basis.dim();
    let big_n = w.dim();
    let slot_block = |slot: usize, j: usize, k: usize, a: &mut DMatrix<f64>, row0: usize| {
        let wjk = w.unit_wedge(j, k);
        for (m, b) in basis.elements().iter().enumerate() {
            let v = b * &wjk;
            for r in 0..big_n {
                a[(row0 + r, slot * d + m)] += v[r];
            }
        }
    };
    // Repeated-index triples contribute nothing: T_i(e_i∧e_k) + T_i(e_k∧e_i) + T_k(0) = 0.
    let mut probe = DMatrix::zeros(big_n, n * d);
    for i in 0..n {
        for k in 0..n {
            slot_block(i, i, k, &mut probe, 0);
            slot_block(i, k, i, &mut probe, 0);
        }
    }
    assert!(probe.amax() < 1e-14, "repeated-index rows are not identically zero");

    let triples: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| (i, j, k))))
        .collect();
    let mut a = DMatrix::zeros(triples.len() * big_n, n * d);
    for (t, &(i, j, k)) in triples.iter().enumerate() {
        let row0 = t * big_n;
        slot_block(i, j, k, &mut a, row0);
        slot_block(j, k, i, &mut a, row0);
        slot_block(k, i, j, &mut a, row0);
    }
    a
}

fn constraints(n: usize) -> &'static DMatrix<f64> {
    static CACHE: [OnceLock<DMatrix<f64>>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    CACHE[n].get_or_init(|| build_constraints(n))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SubspaceTag {
    Bianchi,
    BianchiTangent { normals: usize },
}

/// Orthonormal basis of a linear subspace of tuple space.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub n: usize,
    pub ambient_dim: usize,
    pub columns: DMatrix<f64>,
    /// All singular values of the constraint system, descending.
    pub singular_values: Vec<f64>,
    pub constraint_rank: usize,
    pub tag: SubspaceTag,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn tuple(&self, k: usize) -> CurvatureTuple {
        CurvatureTuple::from_coords(self.n, &self.columns.column(k).into_owned())
            .expect("column length matches ambient dimension")
    }

    /// Smallest retained over largest discarded singular value (∞ if nothing was discarded or all discarded are zero).
    pub fn spectral_gap(&self) -> f64 {
        let kept = self.singular_values[..self.constraint_rank]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let dropped = self.singular_values[self.constraint_rank..]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        if dropped == 0.0 {
            f64::INFINITY
        } else {
            kept / dropped
        }
    }

    /// Orthogonal projection of a tuple onto the subspace.
    pub fn project(&self, t: &CurvatureTuple) -> CurvatureTuple {
        let c = t.coords();
        let p = &self.columns * (self.columns.transpose() * c);
        CurvatureTuple::from_coords(self.n, &p).expect("same ambient dimension")
    }
}

fn check_tuple_dim(n: usize, ceiling: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::invalid("tuple spaces need n >= 3"));
    }
    if n > ceiling || n > MAX_DIM {
        return Err(Error::Capability(format!(
            "tuple space for n = {n} exceeds the configured ceiling {ceiling}"
        )));
    }
    Ok(())
}

/// Kernel of the second-Bianchi constraint system, n ≤ [`DEFAULT_TUPLE_CEILING`].
pub fn tuple_space_basis(n: usize) -> Result<SubspaceBasis> {
    tuple_space_basis_with_ceiling(n, DEFAULT_TUPLE_CEILING)
}

pub fn tuple_space_basis_with_ceiling(n: usize, ceiling: usize) -> Result<SubspaceBasis> {
    check_tuple_dim(n, ceiling)?;
    let a = constraints(n);
    let ns = null_space(a, RANK_TOLERANCE);
    Ok(SubspaceBasis {
        n,
        ambient_dim: a.ncols(),
        columns: ns.basis,
        singular_values: ns.singular_values,
        constraint_rank: ns.rank,
        tag: SubspaceTag::Bianchi,
    })
}

/// Bianchi tuples whose every slot is orthogonal to every given normal.
pub fn tangent_bianchi_subspace(normals: &[CurvatureOperator], n: usize) -> Result<SubspaceBasis> {
    check_tuple_dim(n, DEFAULT_TUPLE_CEILING.max(n.min(MAX_DIM)))?;
    if normals.is_empty() {
        return Err(Error::invalid("at least one normal is required"));
    }
    let basis = algebraic_basis(n);
    let d = basis.dim();
    let base = constraints(n);
    let mut a = DMatrix::zeros(base.nrows() + normals.len() * n, base.ncols());
    a.view_mut((0, 0), (base.nrows(), base.ncols())).copy_from(base);
    for (k, nu) in normals.iter().enumerate() {
        if nu.n() != n {
            return Err(Error::invalid("normal dimension mismatch"));
        }
        let norm = nu.norm();
        if !(norm > 1e-12) {
            return Err(Error::invalid("degenerate (zero) normal"));
        }
        let c = basis.coords(nu.matrix()) / norm;
        for slot in 0..n {
            let row = base.nrows() + k * n + slot;
            for m in 0..d {
                a[(row, slot * d + m)] = c[m];
            }
        }
    }
    let ns = null_space(&a, RANK_TOLERANCE);
    Ok(SubspaceBasis {
        n,
        ambient_dim: a.ncols(),
        columns: ns.basis,
        singular_values: ns.singular_values,
        constraint_rank: ns.rank,
        tag: SubspaceTag::BianchiTangent {
            normals: normals.len(),
        },
    })
}

/// Transport a tuple by Q ∈ O(n): `T'ᵢ = Σⱼ Q_{ij} ρ(Q)Tⱼ`, i.e. `T'(v) = ρ(Q)T(Q⁻¹v)`.
///
/// A tuple satisfying the identity in the standard basis is mapped to one
/// that satisfies it in the standard basis again; the residual norm is
/// preserved for arbitrary tuples.
pub fn rotate_tuple(q: &DMatrix<f64>, t: &CurvatureTuple) -> Result<CurvatureTuple> {
    let n = t.n;
    let rotated: Vec<CurvatureOperator> = t
        .tensors
        .iter()
        .map(|x| x.rotate(q))
        .collect::<Result<_>>()?;
    let tensors = (0..n)
        .map(|i| {
            let mut acc = CurvatureOperator::zero(n);
            for (j, r) in rotated.iter().enumerate() {
                acc = &acc + &(r * q[(i, j)]);
            }
            acc
        })
        .collect();
    Ok(CurvatureTuple { n, tensors })
}

/// Apply ρ(Q) slot-wise without mixing slots (the tuple attached to the basis `Q eᵢ`).
pub fn rotate_slots(q: &DMatrix<f64>, t: &CurvatureTuple) -> Result<CurvatureTuple> {
    let tensors = t.tensors.iter().map(|x| x.rotate(q)).collect::<Result<_>>()?;
    Ok(CurvatureTuple { n: t.n, tensors })
}
