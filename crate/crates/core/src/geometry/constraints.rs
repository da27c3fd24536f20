//! Scalar constraint functions g on 𝒜ₙ with analytic derivatives.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::curvature::{algebraic_basis, CurvatureOperator};
use crate::error::{Error, Result};

/// A smooth function `g`; the constrained set is `{g ≤ 0}`.
pub trait Constraint: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn params(&self) -> Value {
        Value::Null
    }

    fn value(&self, r: &CurvatureOperator) -> Result<f64>;

    fn gradient(&self, r: &CurvatureOperator) -> Result<CurvatureOperator>;

    /// Symmetric bilinear Hessian `Hess g_R(t, s)`.
    fn hessian(&self, r: &CurvatureOperator, t: &CurvatureOperator, s: &CurvatureOperator)
        -> Result<f64>;

    /// Hessian in the orthonormal coordinates of [`algebraic_basis`].
    fn hessian_matrix(&self, r: &CurvatureOperator) -> Result<DMatrix<f64>> {
        let els = basis_operators(r.n());
        let d = els.len();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = self.hessian(r, &els[i], &els[j])?;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// Magnitude of the terms making up `g(R)`; residuals are judged relative to it.
    fn scale(&self, r: &CurvatureOperator) -> f64 {
        1.0 + r.norm()
    }

    /// Closed-form smallest root `t > 0` of `g(origin + t·dir)`; `None` when not available.
    fn ray_root(&self, _origin: &CurvatureOperator, _dir: &CurvatureOperator) -> Option<Option<f64>> {
        None
    }

    fn o_n_invariant(&self) -> bool {
        true
    }
}

pub(crate) fn basis_operators(n: usize) -> Vec<CurvatureOperator> {
    algebraic_basis(n)
        .elements()
        .iter()
        .map(|e| CurvatureOperator::from_raw(n, e.clone()))
        .collect()
}

/// Smallest positive root of `A t² + B t + C` (numerically stable form).
pub(crate) fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return None;
    }
    if a.abs() <= 1e-14 * scale {
        if b == 0.0 {
            return None;
        }
        let t = -c / b;
        return (t > 0.0).then_some(t);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(q / a);
        roots.push(c / q);
    } else {
        roots.push(0.0);
    }
    roots
        .into_iter()
        .filter(|t| *t > 0.0 && t.is_finite())
        .min_by(f64::total_cmp)
}

/// `g(R) = ‖R‖² − a·scal(R)² − c`. With `a = 0` this is the ball of radius √c.
#[derive(Clone, Debug)]
pub struct QuadraticPinching {
    pub a: f64,
    pub c: f64,
    name: String,
}

impl QuadraticPinching {
    pub fn new(a: f64, c: f64) -> Result<Self> {
        if !a.is_finite() || !c.is_finite() {
            return Err(Error::invalid("non-finite pinching parameters"));
        }
        Ok(Self {
            a,
            c,
            name: "quadratic-pinching".into(),
        })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        Ok(Self {
            a: 0.0,
            c: radius * radius,
            name: "norm-ball".into(),
        })
    }
}

impl Constraint for QuadraticPinching {
    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> Value {
        json!({ "a": self.a, "c": self.c })
    }

    fn value(&self, r: &CurvatureOperator) -> Result<f64> {
        let s = r.scalar();
        Ok(r.norm().powi(2) - self.a * s * s - self.c)
    }

    /// `∇g = 2(R − a·scal·I)`.
    fn gradient(&self, r: &CurvatureOperator) -> Result<CurvatureOperator> {
        let id = CurvatureOperator::identity(r.n());
        Ok(&r.scale(2.0) - &id.scale(2.0 * self.a * r.scalar()))
    }

    fn hessian(&self, _r: &CurvatureOperator, t: &CurvatureOperator, s: &CurvatureOperator) -> Result<f64> {
        Ok(2.0 * t.inner(s) - 2.0 * self.a * t.scalar() * s.scalar())
    }

    fn scale(&self, r: &CurvatureOperator) -> f64 {
        let s = r.scalar();
        r.norm().powi(2) + self.a.abs() * s * s + self.c.abs()
    }

    fn ray_root(&self, origin: &CurvatureOperator, dir: &CurvatureOperator) -> Option<Option<f64>> {
        let (to, td) = (origin.scalar(), dir.scalar());
        let qa = dir.norm().powi(2) - self.a * td * td;
        let qb = 2.0 * (origin.inner(dir) - self.a * to * td);
        let qc = origin.norm().powi(2) - self.a * to * to - self.c;
        Some(smallest_positive_root(qa, qb, qc))
    }
}

/// `g(R) = b − scal(R)`, the half-space `{scal ≥ b}`.
#[derive(Clone, Debug)]
pub struct ScalHalfspace {
    pub b: f64,
}

impl Constraint for ScalHalfspace {
    fn name(&self) -> &str {
        "scal-halfspace"
    }

    fn params(&self) -> Value {
        json!({ "b": self.b })
    }

    fn value(&self, r: &CurvatureOperator) -> Result<f64> {
        Ok(self.b - r.scalar())
    }

    fn gradient(&self, r: &CurvatureOperator) -> Result<CurvatureOperator> {
        Ok(-&CurvatureOperator::identity(r.n()))
    }

    fn hessian(&self, _: &CurvatureOperator, _: &CurvatureOperator, _: &CurvatureOperator) -> Result<f64> {
        Ok(0.0)
    }

    fn hessian_matrix(&self, r: &CurvatureOperator) -> Result<DMatrix<f64>> {
        let d = algebraic_basis(r.n()).dim();
        Ok(DMatrix::zeros(d, d))
    }

    fn scale(&self, r: &CurvatureOperator) -> f64 {
        self.b.abs() + r.scalar().abs() + 1.0
    }

    fn ray_root(&self, origin: &CurvatureOperator, dir: &CurvatureOperator) -> Option<Option<f64>> {
        let slope = -dir.scalar();
        let g0 = self.b - origin.scalar();
        if slope == 0.0 {
            return Some(None);
        }
        let t = -g0 / slope;
        Some((t > 0.0).then_some(t))
    }
}
