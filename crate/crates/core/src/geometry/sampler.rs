//! Boundary sampling: radial root finding and random-walk projection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{random_direction, BoundaryPoint, SetSpec};
use crate::curvature::CurvatureOperator;
use crate::error::{Error, Result};
use crate::linalg::random_rotation;
use crate::rng::SeedStream;

/// Target relative residual `|g| ≤ 10⁻¹⁰·scale(g, R)` after polishing.
pub const POLISH_TOL: f64 = 1e-10;

/// Candidate attempts per requested point before giving up.
const ATTEMPTS_PER_POINT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerStrategy {
    RadialRoot,
    RandomWalkProjection,
}

impl std::str::FromStr for SamplerStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radial-root" => Ok(Self::RadialRoot),
            "random-walk-projection" => Ok(Self::RandomWalkProjection),
            other => Err(Error::invalid(format!("unknown sampler strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub points: Vec<BoundaryPoint>,
    /// Candidates discarded (no bracketed root, failed projection, singular gradient).
    pub skipped: usize,
}

/// Smallest `t > 0` with `g(origin + t·dir) = 0` found by doubling, bisection and Newton polish.
fn bracketed_root(
    g: &dyn super::Constraint,
    origin: &CurvatureOperator,
    dir: &CurvatureOperator,
) -> Result<Option<f64>> {
    let at = |t: f64| g.value(&(origin + &dir.scale(t)));
    let g0 = at(0.0)?;
    if g0 >= 0.0 {
        return Ok(None);
    }
    let scale = 1.0 + origin.norm();
    let mut lo = 0.0;
    let mut hi = 1e-3 * scale;
    loop {
        if at(hi)? > 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 * scale {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Newton steps along the ray on constraint `g`.
fn polish_on_ray(
    g: &dyn super::Constraint,
    origin: &CurvatureOperator,
    dir: &CurvatureOperator,
    mut t: f64,
) -> Result<f64> {
    for _ in 0..3 {
        let r = origin + &dir.scale(t);
        let v = g.value(&r)?;
        if v.abs() <= POLISH_TOL * g.scale(&r) * 1e-3 {
            break;
        }
        let slope = g.gradient(&r)?.inner(dir);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = t - v / slope;
        if !(next > 0.0) {
            break;
        }
        t = next;
    }
    Ok(t)
}

fn residual_ok(spec: &SetSpec, m: usize, r: &CurvatureOperator) -> Result<bool> {
    let g = &spec.constraints[m];
    Ok(g.value(r)?.abs() <= POLISH_TOL * g.scale(r))
}

/// One radial candidate: the first crossing of ∂Ω along a random ray from the anchor.
fn radial_candidate(spec: &SetSpec, rng: &mut ChaCha8Rng) -> Result<Option<CurvatureOperator>> {
    let origin = spec.origin(rng);
    let dir = random_direction(spec.n, rng);
    let mut best: Option<(f64, usize)> = None;
    for (m, g) in spec.constraints.iter().enumerate() {
        let root = match g.ray_root(&origin, &dir) {
            Some(closed) => closed,
            None => bracketed_root(g.as_ref(), &origin, &dir)?,
        };
        if let Some(t) = root {
            if best.is_none_or(|(tb, _)| t < tb) {
                best = Some((t, m));
            }
        }
    }
    let Some((t, m)) = best else {
        return Ok(None);
    };
    let t = polish_on_ray(spec.constraints[m].as_ref(), &origin, &dir, t)?;
    let r = &origin + &dir.scale(t);
    Ok(residual_ok(spec, m, &r)?.then_some(r))
}

/// Newton projection `R ← R − g∇g/‖∇g‖²` onto the constraint closest to violation.
fn project(spec: &SetSpec, mut r: CurvatureOperator) -> Result<Option<CurvatureOperator>> {
    for _ in 0..60 {
        let mut worst: Option<(f64, usize)> = None;
        for (m, g) in spec.constraints.iter().enumerate() {
            let norm = g.gradient(&r)?.norm();
            if norm < super::GRADIENT_GUARD {
                return Ok(None);
            }
            let d = g.value(&r)? / norm;
            if worst.is_none_or(|(dw, _)| d > dw) {
                worst = Some((d, m));
            }
        }
        let (_, m) = worst.expect("at least one constraint");
        let g = &spec.constraints[m];
        if residual_ok(spec, m, &r)? {
            return Ok(Some(r));
        }
        let grad = g.gradient(&r)?;
        let step = g.value(&r)? / grad.norm().powi(2);
        r = &r - &grad.scale(step);
        if !r.is_finite() {
            return Ok(None);
        }
    }
    Ok(None)
}

fn walk_candidate(spec: &SetSpec, rng: &mut ChaCha8Rng) -> Result<Option<CurvatureOperator>> {
    let Some(mut r) = radial_candidate(spec, rng)? else {
        return Ok(None);
    };
    for _ in 0..8 {
        let sigma = 0.05 * (1.0 + r.norm());
        let step = random_direction(spec.n, rng).scale(sigma);
        match project(spec, &r + &step)? {
            Some(next) => r = next,
            None => return Ok(None),
        }
    }
    Ok(Some(r))
}

/// Up to `m` boundary points; candidate `i` draws from the substream `("boundary", i)`.
pub fn boundary_sampler(
    spec: &SetSpec,
    strategy: SamplerStrategy,
    m: usize,
    stream: &SeedStream,
) -> Result<BoundarySample> {
    if m == 0 {
        return Err(Error::invalid("sample budget must be at least 1"));
    }
    let mut points = Vec::with_capacity(m);
    let mut skipped = 0;
    let mut next = 0usize;
    while points.len() < m && next < ATTEMPTS_PER_POINT * m {
        let batch = m - points.len();
        let results: Vec<Result<Option<BoundaryPoint>>> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream.rng("boundary", i as u64);
                let cand = match strategy {
                    SamplerStrategy::RadialRoot => radial_candidate(spec, &mut rng)?,
                    SamplerStrategy::RandomWalkProjection => walk_candidate(spec, &mut rng)?,
                };
                Ok(cand.and_then(|r| BoundaryPoint::new(spec, r).ok()))
            })
            .collect();
        next += batch;
        for res in results {
            match res? {
                Some(p) => points.push(p),
                None => skipped += 1,
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptySample {
            what: format!("boundary of {}", spec.name),
            skipped,
        });
    }
    Ok(BoundarySample { points, skipped })
}

/// Gauss–Newton projection onto all constraints at once: `R ← R − Jᵀ(JJᵀ)⁻¹g`.
fn project_all(spec: &SetSpec, mut r: CurvatureOperator) -> Result<Option<CurvatureOperator>> {
    let basis = crate::curvature::algebraic_basis(spec.n);
    let k = spec.constraints.len();
    for _ in 0..60 {
        let mut done = true;
        let mut jac = nalgebra::DMatrix::zeros(k, basis.dim());
        let mut vals = nalgebra::DVector::zeros(k);
        for (m, g) in spec.constraints.iter().enumerate() {
            done &= residual_ok(spec, m, &r)?;
            vals[m] = g.value(&r)?;
            jac.set_row(m, &basis.coords(g.gradient(&r)?.matrix()).transpose());
        }
        if done {
            return Ok(Some(r));
        }
        let Some(inv) = (&jac * jac.transpose()).try_inverse() else {
            return Ok(None);
        };
        let delta = jac.transpose() * (inv * vals);
        r = &r - &CurvatureOperator::from_raw(spec.n, basis.compose(&delta));
        if !r.is_finite() {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Points where every constraint is active, started from radial boundary points.
pub fn corner_samples(spec: &SetSpec, m: usize, stream: &SeedStream) -> Result<BoundarySample> {
    if spec.constraints.len() < 2 {
        return Err(Error::invalid(format!("{} has no corners", spec.name)));
    }
    let found: Vec<Result<Option<BoundaryPoint>>> = (0..ATTEMPTS_PER_POINT.min(4) * m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng("corner", i as u64);
            let Some(r) = radial_candidate(spec, &mut rng)? else {
                return Ok(None);
            };
            Ok(project_all(spec, r)?
                .and_then(|r| BoundaryPoint::new(spec, r).ok())
                .filter(|p| p.active.len() == spec.constraints.len()))
        })
        .collect();
    let mut points = Vec::with_capacity(m);
    let mut skipped = 0;
    for res in found {
        match res? {
            Some(p) if points.len() < m => points.push(p),
            Some(_) => {}
            None => skipped += 1,
        }
    }
    if points.is_empty() {
        return Err(Error::EmptySample {
            what: format!("corners of {}", spec.name),
            skipped,
        });
    }
    Ok(BoundarySample { points, skipped })
}

/// Rank-two non-negative operators `A·diag(0, d₂, d₃)·Aᵀ` with Haar `A`.
pub fn psd_rank_two_samples(spec: &SetSpec, m: usize, stream: &SeedStream) -> Result<BoundarySample> {
    let points: Vec<Option<BoundaryPoint>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng("psd-boundary", i as u64);
            let d2: f64 = rng.random_range(0.1..5.0);
            let d3: f64 = d2 + rng.random_range(0.1..5.0);
            let q = random_rotation(3, &mut rng);
            let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, d2, d3]));
            let r = CurvatureOperator::from_raw(3, &q * d * q.transpose());
            BoundaryPoint::new(spec, r).ok()
        })
        .collect();
    let skipped = points.iter().filter(|p| p.is_none()).count();
    let points: Vec<BoundaryPoint> = points.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptySample {
            what: "psd boundary".into(),
            skipped,
        });
    }
    Ok(BoundarySample { points, skipped })
}
