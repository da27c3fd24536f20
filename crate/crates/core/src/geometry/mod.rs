//! Sets `Ω = {g₁ ≤ 0, …, g_M ≤ 0}` in 𝒜ₙ given by smooth inequalities.
//!
//! At a boundary point the supporting hypersurface of each active constraint
//! is its own level set, so normals and second fundamental forms come from
//! the analytic gradient and Hessian. At corners every active constraint is
//! tested separately and the tangent cone is taken to be the intersection of
//! the active half-spaces (exact for transversal intersections).

mod constraints;
mod sampler;
mod spectral;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

pub use constraints::{Constraint, QuadraticPinching, ScalHalfspace};
pub use sampler::{boundary_sampler, corner_samples, psd_rank_two_samples, BoundarySample, SamplerStrategy};
pub use spectral::{
    eigen_function, gap_threshold, symmetry_defect, EigenFunction, NegSphereFn, PinchingFn, PsdCone,
    Spectral, SumFn,
};

use crate::curvature::{algebraic_basis, CurvatureOperator};
use crate::error::{Error, Result};

/// Gradients shorter than this are treated as singular.
pub const GRADIENT_GUARD: f64 = 1e-6;

/// Relative tangency tolerance for second-fundamental-form arguments.
pub const TANGENCY_TOL: f64 = 1e-8;

/// `τ_act = 10⁻⁸·(1 + ‖R‖)`, applied to the first-order distance `g/‖∇g‖`.
pub fn activity_tolerance(r: &CurvatureOperator) -> f64 {
    1e-8 * (1.0 + r.norm())
}

/// Where radial boundary searches start.
#[derive(Clone, Debug)]
pub enum Anchor {
    Point(CurvatureOperator),
    /// `t·I` with `t` log-uniform in `[lo, hi]`; every such point is interior.
    Axis { lo: f64, hi: f64 },
}

#[derive(Clone, Debug)]
pub struct SetSpec {
    pub name: String,
    pub n: usize,
    pub constraints: Vec<Arc<dyn Constraint>>,
    pub anchor: Anchor,
    pub o_n_invariant: bool,
    pub params: BTreeMap<String, f64>,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{name} must be finite")))
    }
}

impl SetSpec {
    /// `{‖R‖ ≤ radius}`.
    pub fn ball(n: usize, radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        Ok(Self {
            name: "ball".into(),
            n,
            constraints: vec![Arc::new(QuadraticPinching::ball(radius)?)],
            anchor: Anchor::Point(CurvatureOperator::zero(n)),
            o_n_invariant: true,
            params: BTreeMap::from([("radius".into(), radius)]),
        })
    }

    /// `{scal ≥ b}`.
    pub fn halfspace_scal(n: usize, b: f64) -> Result<Self> {
        finite("b", b)?;
        let dim = (n * (n - 1) / 2) as f64;
        let t = (b + 1.0 + b.abs()) / dim;
        Ok(Self {
            name: "halfspace-scal".into(),
            n,
            constraints: vec![Arc::new(ScalHalfspace { b })],
            anchor: Anchor::Point(CurvatureOperator::identity(n).scale(t)),
            o_n_invariant: true,
            params: BTreeMap::from([("b".into(), b)]),
        })
    }

    /// `Ω_{a,c} = {‖R‖² − a·scal² ≤ c}`.
    pub fn omega_ac(n: usize, a: f64, c: f64) -> Result<Self> {
        finite("a", a)?;
        positive("c", c)?;
        Ok(Self {
            name: "omega-ac".into(),
            n,
            constraints: vec![Arc::new(QuadraticPinching::new(a, c)?)],
            anchor: Anchor::Point(CurvatureOperator::zero(n)),
            o_n_invariant: true,
            params: BTreeMap::from([("a".into(), a), ("c".into(), c)]),
        })
    }

    /// `Ω̃_{a,c} = Ω_{a,c} ∩ {scal ≥ b}` in 𝒜₃, for `a > 1/3` and `b > 0`.
    pub fn omega_tilde_ac(a: f64, c: f64, b: f64) -> Result<Self> {
        if !(a > 1.0 / 3.0 && a.is_finite()) {
            return Err(Error::Domain(format!("omega-tilde-ac needs a > 1/3, got {a}")));
        }
        positive("c", c)?;
        positive("b", b)?;
        Ok(Self {
            name: "omega-tilde-ac".into(),
            n: 3,
            constraints: vec![
                Arc::new(QuadraticPinching::new(a, c)?),
                Arc::new(ScalHalfspace { b }),
            ],
            // For a > 1/3 the whole ray tI, t > 0, lies in Ω_{a,c}.
            anchor: Anchor::Axis {
                lo: b / 3.0 * 1.01,
                hi: 100.0 * b / 3.0,
            },
            o_n_invariant: true,
            params: BTreeMap::from([("a".into(), a), ("c".into(), c), ("b".into(), b)]),
        })
    }

    /// `Ω_f = {f(λ(R)) ≤ 0}` in 𝒜₃.
    pub fn omega_f(f: Arc<dyn EigenFunction>) -> Result<Self> {
        let x = f.anchor();
        let mut params = BTreeMap::new();
        if let serde_json::Value::Object(map) = f.params() {
            for (k, v) in map {
                if let Some(v) = v.as_f64() {
                    params.insert(k, v);
                }
            }
        }
        Ok(Self {
            name: format!("omega-f:{}", f.name()),
            n: 3,
            constraints: vec![Arc::new(Spectral { f })],
            anchor: Anchor::Point(CurvatureOperator::diagonal(3, &x)?),
            o_n_invariant: true,
            params,
        })
    }

    /// Non-negative operators in 𝒜₃.
    pub fn psd_cone() -> Self {
        Self {
            name: "psd-cone".into(),
            n: 3,
            constraints: vec![Arc::new(PsdCone)],
            anchor: Anchor::Point(CurvatureOperator::identity(3)),
            o_n_invariant: true,
            params: BTreeMap::new(),
        }
    }

    /// Named built-in: "ball", "halfspace-scal", "omega-ac", "omega-tilde-ac",
    /// "omega-f" (with `f` naming an [`eigen_function`]), "psd-cone".
    pub fn builtin(name: &str, n: usize, params: &BTreeMap<String, f64>, f: Option<&str>) -> Result<Self> {
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::invalid(format!("set {name} needs parameter {k}")))
        };
        match name {
            "ball" => Self::ball(n, params.get("radius").copied().unwrap_or(1.0)),
            "halfspace-scal" => Self::halfspace_scal(n, get("b")?),
            "omega-ac" => Self::omega_ac(n, get("a")?, get("c")?),
            "omega-tilde-ac" => Self::omega_tilde_ac(get("a")?, get("c")?, get("b")?),
            "omega-f" => {
                let fname = f.ok_or_else(|| Error::invalid("omega-f needs a function name"))?;
                Self::omega_f(eigen_function(fname, params)?)
            }
            "psd-cone" => Ok(Self::psd_cone()),
            other => Err(Error::invalid(format!("unknown set {other:?}"))),
        }
    }

    /// A start point for radial searches.
    pub fn origin<R: Rng + ?Sized>(&self, rng: &mut R) -> CurvatureOperator {
        match &self.anchor {
            Anchor::Point(p) => p.clone(),
            Anchor::Axis { lo, hi } => {
                let u: f64 = rng.random();
                let t = (lo.ln() + u * (hi.ln() - lo.ln())).exp();
                CurvatureOperator::identity(self.n).scale(t)
            }
        }
    }

    pub fn values(&self, r: &CurvatureOperator) -> Result<Vec<f64>> {
        self.check_dim(r)?;
        self.constraints.iter().map(|g| g.value(r)).collect()
    }

    fn check_dim(&self, r: &CurvatureOperator) -> Result<()> {
        if r.n() != self.n {
            return Err(Error::invalid(format!(
                "set {} lives in dimension {}, operator has n = {}",
                self.name,
                self.n,
                r.n()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Clone, Debug, Serialize)]
pub struct Membership {
    pub region: Region,
    /// `max_m g_m(R)`.
    pub margin: f64,
    /// `max_m g_m(R)/‖∇g_m(R)‖`, the first-order signed distance.
    pub distance: f64,
    pub values: Vec<f64>,
}

pub fn membership(spec: &SetSpec, r: &CurvatureOperator) -> Result<Membership> {
    let values = spec.values(r)?;
    let mut distance = f64::NEG_INFINITY;
    for (g, v) in spec.constraints.iter().zip(&values) {
        let norm = g.gradient(r)?.norm();
        let d = if norm > GRADIENT_GUARD { v / norm } else { *v };
        distance = distance.max(d);
    }
    let margin = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tau = activity_tolerance(r);
    let region = if distance.abs() <= tau || margin == 0.0 {
        Region::Boundary
    } else if margin < 0.0 {
        Region::Interior
    } else {
        Region::Exterior
    };
    Ok(Membership {
        region,
        margin,
        distance,
        values,
    })
}

/// A point of ∂Ω with its active constraints and unit outward normals.
#[derive(Clone, Debug)]
pub struct BoundaryPoint {
    pub r: CurvatureOperator,
    pub active: Vec<usize>,
    pub normals: Vec<CurvatureOperator>,
    pub grad_norms: Vec<f64>,
    /// Largest `|g_m|` over active constraints.
    pub residual: f64,
}

impl BoundaryPoint {
    pub fn new(spec: &SetSpec, r: CurvatureOperator) -> Result<Self> {
        spec.check_dim(&r)?;
        let tau = activity_tolerance(&r);
        let mut active = Vec::new();
        let mut normals = Vec::new();
        let mut grad_norms = Vec::new();
        let mut residual: f64 = 0.0;
        for (m, g) in spec.constraints.iter().enumerate() {
            let v = g.value(&r)?;
            let grad = g.gradient(&r)?;
            let norm = grad.norm();
            let dist = if norm > 0.0 { v / norm } else { v };
            if dist > tau {
                return Err(Error::invalid(format!(
                    "point lies outside {} (constraint {m} distance {dist:e})",
                    spec.name
                )));
            }
            if dist.abs() <= tau {
                if norm < GRADIENT_GUARD {
                    return Err(Error::Regularity {
                        norm,
                        guard: GRADIENT_GUARD,
                    });
                }
                active.push(m);
                normals.push(grad.scale(1.0 / norm));
                grad_norms.push(norm);
                residual = residual.max(v.abs());
            }
        }
        if active.is_empty() {
            return Err(Error::invalid(format!("point is not on the boundary of {}", spec.name)));
        }
        Ok(Self {
            r,
            active,
            normals,
            grad_norms,
            residual,
        })
    }

    pub fn is_corner(&self) -> bool {
        self.active.len() > 1
    }

    pub fn rotate(&self, spec: &SetSpec, q: &nalgebra::DMatrix<f64>) -> Result<Self> {
        Self::new(spec, self.r.rotate(q)?)
    }
}

fn single_active(p: &BoundaryPoint) -> Result<usize> {
    if p.active.len() != 1 {
        return Err(Error::invalid(format!(
            "{} active constraints; a smooth boundary point is required",
            p.active.len()
        )));
    }
    Ok(0)
}

/// `II(T,S) = −Hess g(T,S)/‖∇g(R)‖` for tangent `T`, `S` at a smooth boundary point.
pub fn second_fundamental_form(
    spec: &SetSpec,
    p: &BoundaryPoint,
    t: &CurvatureOperator,
    s: &CurvatureOperator,
) -> Result<f64> {
    let k = single_active(p)?;
    let nu = &p.normals[k];
    for v in [t, s] {
        if nu.inner(v).abs() > TANGENCY_TOL * v.norm() {
            return Err(Error::invalid("argument is not tangent to the boundary"));
        }
    }
    let g = &spec.constraints[p.active[k]];
    Ok(-g.hessian(&p.r, t, s)? / p.grad_norms[k])
}

/// Matrix of `II` on the full space in [`algebraic_basis`] coordinates (restrict to `ν^⊥` before use).
pub fn second_fundamental_matrix(spec: &SetSpec, p: &BoundaryPoint) -> Result<nalgebra::DMatrix<f64>> {
    let k = single_active(p)?;
    let g = &spec.constraints[p.active[k]];
    Ok(g.hessian_matrix(&p.r)? * (-1.0 / p.grad_norms[k]))
}

/// `max_ν ⟨ν, v⟩` over the active normals; `v` can be tangent only if this is ≤ 0.
pub fn tangent_cone_test(p: &BoundaryPoint, v: &CurvatureOperator) -> f64 {
    p.normals
        .iter()
        .map(|nu| nu.inner(v))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct StarWitness {
    pub r: Vec<f64>,
    pub normal: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StarShape {
    /// `−max ⟨ν, S − R⟩`; positive values support star-shapedness about `S` on the ball.
    pub a_est: f64,
    pub witness: StarWitness,
    pub used: usize,
    pub outside_ball: usize,
}

/// Star-shapedness margin about `s` from boundary samples inside the ball of radius `k_radius`.
pub fn star_shape_margin(samples: &[BoundaryPoint], s: &CurvatureOperator, k_radius: f64) -> Result<StarShape> {
    let mut worst: Option<StarWitness> = None;
    let mut used = 0;
    for p in samples {
        if p.r.norm() > k_radius {
            continue;
        }
        used += 1;
        let diff = s - &p.r;
        for nu in &p.normals {
            let value = nu.inner(&diff);
            if worst.as_ref().is_none_or(|w| value > w.value) {
                worst = Some(StarWitness {
                    r: p.r.to_row_major(),
                    normal: nu.to_row_major(),
                    value,
                });
            }
        }
    }
    let witness = worst.ok_or(Error::EmptySample {
        what: "boundary points inside the ball".into(),
        skipped: samples.len(),
    })?;
    Ok(StarShape {
        a_est: -witness.value,
        outside_ball: samples.len() - used,
        used,
        witness,
    })
}

/// Unit-norm random element of 𝒜ₙ.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CurvatureOperator {
    let basis = algebraic_basis(n);
    let c = nalgebra::DVector::from_fn(basis.dim(), |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let c = &c / c.norm();
    CurvatureOperator::from_raw(n, basis.compose(&c))
}
