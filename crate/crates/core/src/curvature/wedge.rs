use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest base dimension accepted anywhere in the crate.
pub const MAX_DIM: usize = 10;

/// Ordered basis `e_a ∧ e_b` of Λ²Rⁿ, declared orthonormal.
///
/// For n = 3 the Hodge order (e₂∧e₃, e₃∧e₁, e₁∧e₂) is used, so that the
/// induced action of Q ∈ SO(3) on Λ²R³ is Q itself. Otherwise pairs are
/// lexicographic with a < b.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WedgeBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl WedgeBasis {
    pub fn new(n: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::invalid(format!(
                "base dimension {n} outside supported range 2..={MAX_DIM}"
            )));
        }
        let pairs = if n == 3 {
            vec![(1, 2), (2, 0), (0, 1)]
        } else {
            let mut p = Vec::with_capacity(n * (n - 1) / 2);
            for a in 0..n {
                for b in a + 1..n {
                    p.push((a, b));
                }
            }
            p
        };
        Ok(Self { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// N = n(n−1)/2.
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Index and orientation sign of `e_i ∧ e_j` in this basis; `None` if i == j.
    pub fn locate(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        if i == j {
            return None;
        }
        self.pairs.iter().enumerate().find_map(|(p, &(a, b))| {
            if (a, b) == (i, j) {
                Some((p, 1.0))
            } else if (a, b) == (j, i) {
                Some((p, -1.0))
            } else {
                None
            }
        })
    }

    /// Coordinates of `x ∧ y`.
    pub fn wedge(&self, x: &[f64], y: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.pairs.iter().map(|&(a, b)| x[a] * y[b] - x[b] * y[a]),
        )
    }

    /// Coordinates of `e_i ∧ e_j`.
    pub fn unit_wedge(&self, i: usize, j: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        if let Some((p, s)) = self.locate(i, j) {
            v[p] = s;
        }
        v
    }

    /// Skew matrix `e_a e_bᵀ − e_b e_aᵀ` of basis element `p`; unit norm for ⟨A,B⟩ = −½tr(AB).
    pub fn skew(&self, p: usize) -> DMatrix<f64> {
        let (a, b) = self.pairs[p];
        let mut m = DMatrix::zeros(self.n, self.n);
        m[(a, b)] = 1.0;
        m[(b, a)] = -1.0;
        m
    }

    /// Coordinates of a skew matrix in this basis.
    pub fn skew_coords(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.pairs.iter().map(|&(a, b)| m[(a, b)]))
    }

    /// Induced action Λ²Q on Λ²Rⁿ in this basis.
    pub fn lift(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (c, &(a, b)) in self.pairs.iter().enumerate() {
            let x: Vec<f64> = q.column(a).iter().copied().collect();
            let y: Vec<f64> = q.column(b).iter().copied().collect();
            m.set_column(c, &self.wedge(&x, &y));
        }
        m
    }
}
