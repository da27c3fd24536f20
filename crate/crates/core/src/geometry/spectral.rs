//! Spectral constraints `g(R) = f(λ(R))` in dimension three.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde_json::{json, Value};

use super::constraints::{basis_operators, Constraint};
use crate::curvature::{CurvatureOperator, EigenData};
use crate::error::{Error, Result};

/// Minimum eigenvalue separation at which spectral Hessians are evaluated.
pub fn gap_threshold(r_norm: f64) -> f64 {
    1e-4 * (1.0 + r_norm)
}

/// A symmetric function f: R³ → R.
pub trait EigenFunction: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn params(&self) -> Value;
    fn value(&self, x: &[f64; 3]) -> f64;
    fn gradient(&self, x: &[f64; 3]) -> [f64; 3];
    fn hessian(&self, x: &[f64; 3]) -> Matrix3<f64>;
    /// A point with `f < 0`; rays from it are used to sample `f⁻¹(0)`.
    fn anchor(&self) -> [f64; 3];
}

/// `f = x₁ + x₂ + x₃ − c`.
#[derive(Debug)]
pub struct SumFn {
    pub c: f64,
}

impl EigenFunction for SumFn {
    fn name(&self) -> &str {
        "sum"
    }
    fn params(&self) -> Value {
        json!({ "c": self.c })
    }
    fn value(&self, x: &[f64; 3]) -> f64 {
        x.iter().sum::<f64>() - self.c
    }
    fn gradient(&self, _: &[f64; 3]) -> [f64; 3] {
        [1.0; 3]
    }
    fn hessian(&self, _: &[f64; 3]) -> Matrix3<f64> {
        Matrix3::zeros()
    }
    fn anchor(&self) -> [f64; 3] {
        [self.c / 3.0 - 1.0; 3]
    }
}

/// `f = ‖x‖² − a(Σx)² − c`; `a = 0` is the sphere of radius √c.
#[derive(Debug)]
pub struct PinchingFn {
    pub a: f64,
    pub c: f64,
    name: &'static str,
}

impl PinchingFn {
    pub fn new(a: f64, c: f64) -> Self {
        Self { a, c, name: "f-ac" }
    }

    pub fn sphere(c: f64) -> Self {
        Self {
            a: 0.0,
            c,
            name: "sphere",
        }
    }
}

impl EigenFunction for PinchingFn {
    fn name(&self) -> &str {
        self.name
    }
    fn params(&self) -> Value {
        json!({ "a": self.a, "c": self.c })
    }
    fn value(&self, x: &[f64; 3]) -> f64 {
        let s: f64 = x.iter().sum();
        x.iter().map(|v| v * v).sum::<f64>() - self.a * s * s - self.c
    }
    fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let s: f64 = x.iter().sum();
        x.map(|v| 2.0 * v - 2.0 * self.a * s)
    }
    fn hessian(&self, _: &[f64; 3]) -> Matrix3<f64> {
        Matrix3::identity() * 2.0 - Matrix3::repeat(2.0 * self.a)
    }
    fn anchor(&self) -> [f64; 3] {
        [0.0; 3]
    }
}

/// `f = c − ‖x‖²`, the complement of a ball.
#[derive(Debug)]
pub struct NegSphereFn {
    pub c: f64,
}

impl EigenFunction for NegSphereFn {
    fn name(&self) -> &str {
        "neg-sphere"
    }
    fn params(&self) -> Value {
        json!({ "c": self.c })
    }
    fn value(&self, x: &[f64; 3]) -> f64 {
        self.c - x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        x.map(|v| -2.0 * v)
    }
    fn hessian(&self, _: &[f64; 3]) -> Matrix3<f64> {
        Matrix3::identity() * -2.0
    }
    fn anchor(&self) -> [f64; 3] {
        let r = 2.0 * self.c.abs().sqrt();
        [r / 3f64.sqrt(); 3]
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key).copied().or(default) {
        Some(v) if v.is_finite() => Ok(v),
        Some(_) => Err(Error::invalid(format!("parameter {key} is not finite"))),
        None => Err(Error::invalid(format!("missing parameter {key}"))),
    }
}

/// Built-in registry: "sum", "sphere", "f-ac", "neg-sphere".
pub fn eigen_function(name: &str, params: &BTreeMap<String, f64>) -> Result<Arc<dyn EigenFunction>> {
    Ok(match name {
        "sum" => Arc::new(SumFn {
            c: param(params, "c", Some(0.0))?,
        }),
        "sphere" => {
            let c = param(params, "c", Some(1.0))?;
            if c <= 0.0 {
                return Err(Error::invalid("sphere needs c > 0"));
            }
            Arc::new(PinchingFn::sphere(c))
        }
        "f-ac" => Arc::new(PinchingFn::new(param(params, "a", None)?, param(params, "c", Some(1.0))?)),
        "neg-sphere" => Arc::new(NegSphereFn {
            c: param(params, "c", Some(1.0))?,
        }),
        other => return Err(Error::invalid(format!("unknown eigenvalue function {other:?}"))),
    })
}

/// Largest relative deviation of `f(σx)` from `f(x)` over all permutations σ.
pub fn symmetry_defect(f: &dyn EigenFunction, x: &[f64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let base = f.value(x);
    PERMS
        .iter()
        .map(|p| {
            let y = [x[p[0]], x[p[1]], x[p[2]]];
            (f.value(&y) - base).abs() / (1.0 + base.abs())
        })
        .fold(0.0, f64::max)
}

/// First and second derivatives of a function of the sorted spectrum.
struct SpectralDerivs {
    eig: EigenData,
    d1: Vec<f64>,
    d2: DMatrix<f64>,
}

impl SpectralDerivs {
    fn gradient(&self, n: usize) -> CurvatureOperator {
        let u = &self.eig.frame;
        let m = u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.d1.clone())) * u.transpose();
        CurvatureOperator::from_raw(n, m)
    }

    /// Divided differences `(∂ᵢf − ∂ⱼf)/(λᵢ − λⱼ)`; zero numerators are exempt from the gap guard.
    fn divided(&self, guard: f64) -> Result<DMatrix<f64>> {
        let k = self.d1.len();
        let lam = &self.eig.values;
        let mut z = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let num = self.d1[i] - self.d1[j];
                let den = lam[i] - lam[j];
                if num.abs() <= 1e-14 * (1.0 + self.d1[i].abs() + self.d1[j].abs()) {
                    continue;
                }
                if den.abs() < guard {
                    return Err(Error::DegenerateSpectrum {
                        gap: den.abs(),
                        required: guard,
                    });
                }
                z[(i, j)] = num / den;
            }
        }
        Ok(z)
    }

    /// `Σ ∂²ᵢⱼf tᵢᵢ sⱼⱼ + Σ_{i≠j} zᵢⱼ tᵢⱼ sᵢⱼ` with `t = UᵀTU`.
    fn bilinear(&self, z: &DMatrix<f64>, t: &CurvatureOperator, s: &CurvatureOperator) -> f64 {
        let u = &self.eig.frame;
        let tt = u.transpose() * t.matrix() * u;
        let ss = u.transpose() * s.matrix() * u;
        let k = self.d1.len();
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                acc += self.d2[(i, j)] * tt[(i, i)] * ss[(j, j)];
                if i != j {
                    acc += z[(i, j)] * tt[(i, j)] * ss[(i, j)];
                }
            }
        }
        acc
    }

    fn hessian_matrix(&self, r: &CurvatureOperator) -> Result<DMatrix<f64>> {
        let z = self.divided(gap_threshold(r.norm()))?;
        let els = basis_operators(r.n());
        let d = els.len();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = self.bilinear(&z, &els[i], &els[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }
}

fn require_n3(r: &CurvatureOperator) -> Result<()> {
    if r.n() != 3 {
        return Err(Error::Capability("spectral constraints are implemented for n = 3".into()));
    }
    Ok(())
}

fn lambda3(eig: &EigenData) -> [f64; 3] {
    [eig.values[0], eig.values[1], eig.values[2]]
}

/// `g(R) = f(λ(R))`.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub f: Arc<dyn EigenFunction>,
}

impl Spectral {
    fn derivs(&self, r: &CurvatureOperator) -> Result<SpectralDerivs> {
        require_n3(r)?;
        let eig = r.eigen_sorted()?;
        let x = lambda3(&eig);
        let h = self.f.hessian(&x);
        Ok(SpectralDerivs {
            d1: self.f.gradient(&x).to_vec(),
            d2: DMatrix::from_fn(3, 3, |i, j| h[(i, j)]),
            eig,
        })
    }
}

impl Constraint for Spectral {
    fn name(&self) -> &str {
        self.f.name()
    }

    fn params(&self) -> Value {
        self.f.params()
    }

    fn value(&self, r: &CurvatureOperator) -> Result<f64> {
        require_n3(r)?;
        Ok(self.f.value(&lambda3(&r.eigen_sorted()?)))
    }

    /// `Σᵢ ∂ᵢf(λ) uᵢuᵢᵀ`.
    fn gradient(&self, r: &CurvatureOperator) -> Result<CurvatureOperator> {
        Ok(self.derivs(r)?.gradient(3))
    }

    fn hessian(&self, r: &CurvatureOperator, t: &CurvatureOperator, s: &CurvatureOperator) -> Result<f64> {
        let d = self.derivs(r)?;
        let z = d.divided(gap_threshold(r.norm()))?;
        Ok(d.bilinear(&z, t, s))
    }

    fn hessian_matrix(&self, r: &CurvatureOperator) -> Result<DMatrix<f64>> {
        self.derivs(r)?.hessian_matrix(r)
    }

    fn scale(&self, r: &CurvatureOperator) -> f64 {
        1.0 + r.norm().powi(2) + self.f.value(&[0.0; 3]).abs()
    }
}

/// `g(R) = −λ_min(R)`, the cone of non-negative operators.
#[derive(Clone, Debug)]
pub struct PsdCone;

impl PsdCone {
    fn derivs(&self, r: &CurvatureOperator) -> Result<SpectralDerivs> {
        require_n3(r)?;
        Ok(SpectralDerivs {
            eig: r.eigen_sorted()?,
            d1: vec![-1.0, 0.0, 0.0],
            d2: DMatrix::zeros(3, 3),
        })
    }
}

impl Constraint for PsdCone {
    fn name(&self) -> &str {
        "psd"
    }

    fn value(&self, r: &CurvatureOperator) -> Result<f64> {
        require_n3(r)?;
        Ok(-r.eigen_sorted()?.values[0])
    }

    fn gradient(&self, r: &CurvatureOperator) -> Result<CurvatureOperator> {
        Ok(self.derivs(r)?.gradient(3))
    }

    fn hessian(&self, r: &CurvatureOperator, t: &CurvatureOperator, s: &CurvatureOperator) -> Result<f64> {
        let d = self.derivs(r)?;
        let z = d.divided(gap_threshold(r.norm()))?;
        Ok(d.bilinear(&z, t, s))
    }

    fn hessian_matrix(&self, r: &CurvatureOperator) -> Result<DMatrix<f64>> {
        self.derivs(r)?.hessian_matrix(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_symmetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op(m: DMatrix<f64>) -> CurvatureOperator {
        CurvatureOperator::new(3, m).unwrap()
    }

    fn fd_gradient(g: &dyn Constraint, r: &CurvatureOperator) -> DMatrix<f64> {
        let h = 1e-5 * (1.0 + r.norm());
        DMatrix::from_fn(3, 3, |i, j| {
            let mut e = DMatrix::zeros(3, 3);
            e[(i, j)] += 0.5;
            e[(j, i)] += 0.5;
            let e = op(e);
            let plus = g.value(&(r + &e.scale(h))).unwrap();
            let minus = g.value(&(r - &e.scale(h))).unwrap();
            (plus - minus) / (2.0 * h)
        })
    }

    #[test]
    fn builtins_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = BTreeMap::from([("a".to_string(), 0.35), ("c".to_string(), 1.0)]);
        for name in ["sum", "sphere", "f-ac", "neg-sphere"] {
            let f = eigen_function(name, &params).unwrap();
            assert!(f.value(&f.anchor()) < 0.0, "{name} anchor");
            for _ in 0..20 {
                let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                assert!(symmetry_defect(f.as_ref(), &x) < 1e-10);
            }
        }
        assert!(eigen_function("cubic", &params).is_err());
        assert!(eigen_function("f-ac", &BTreeMap::new()).is_err());
    }

    #[test]
    fn spectral_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = Spectral {
            f: Arc::new(PinchingFn::new(0.35, 1.0)),
        };
        for _ in 0..20 {
            let r = op(random_symmetric(3, &mut rng));
            let fd = fd_gradient(&g, &r);
            let an = g.gradient(&r).unwrap();
            let err = (an.matrix() - &fd).norm() / (1.0 + an.norm());
            assert!(err < 1e-5, "gradient error {err}");
        }
    }

    #[test]
    fn lewis_hessian_matches_finite_differences_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let constraints: Vec<Box<dyn Constraint>> = vec![
            Box::new(Spectral {
                f: Arc::new(PinchingFn::new(0.35, 1.0)),
            }),
            Box::new(PsdCone),
        ];
        for g in &constraints {
            for _ in 0..20 {
                let r = op(random_symmetric(3, &mut rng));
                let t = op(random_symmetric(3, &mut rng));
                let s = op(random_symmetric(3, &mut rng));
                let h = 1e-5 * (1.0 + r.norm());
                let dg = &g.gradient(&(&r + &t.scale(h))).unwrap() - &g.gradient(&(&r - &t.scale(h))).unwrap();
                let fd = dg.inner(&s) / (2.0 * h);
                let an = g.hessian(&r, &t, &s).unwrap();
                assert!((an - fd).abs() < 1e-4 * (1.0 + an.abs()), "{}: {an} vs {fd}", g.name());
            }
        }
    }

    #[test]
    fn spectral_hessian_agrees_with_ambient_polynomial() {
        // f_{a,c}∘λ and ‖R‖² − a·scal² − c are the same function.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let spectral = Spectral {
            f: Arc::new(PinchingFn::new(0.35, 1.0)),
        };
        let ambient = super::super::constraints::QuadraticPinching::new(0.35, 1.0).unwrap();
        for _ in 0..10 {
            let r = op(random_symmetric(3, &mut rng));
            let hs = spectral.hessian_matrix(&r).unwrap();
            let ha = ambient.hessian_matrix(&r).unwrap();
            assert!((hs - ha).amax() < 1e-9);
        }
    }

    #[test]
    fn degenerate_spectrum_is_rejected() {
        let g = Spectral {
            f: Arc::new(PinchingFn::new(0.35, 1.0)),
        };
        let id = CurvatureOperator::identity(3);
        let near = CurvatureOperator::diagonal(3, &[1.0, 1.0 + 1e-6, 2.0]).unwrap();
        assert!(matches!(
            g.hessian(&near, &id, &id),
            Err(Error::DegenerateSpectrum { .. })
        ));
        // Exactly repeated eigenvalues give equal partials for symmetric f.
        assert!(g.hessian(&id, &id, &id).is_ok());
        let g = Spectral { f: Arc::new(SumFn { c: 0.0 }) };
        assert_eq!(g.hessian(&id, &id, &id).unwrap(), 0.0);
    }

}
