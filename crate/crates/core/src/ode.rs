//! The reaction ODE `R′ = Φ(R) = R² + R#` and invariance checks for sets.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{CurvatureOperator, MAX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{boundary_sampler, corner_samples, membership, tangent_cone_test, BoundaryPoint, Region,
    SamplerStrategy, SetSpec, GRADIENT_GUARD};
use crate::rng::SeedStream;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepControl {
    /// Local error target per unit time, relative to `1 + ‖y‖`.
    pub tol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// `‖R‖` at which the run is declared a blow-up.
    pub blow_up: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            initial_step: 1e-3,
            max_step: 0.1,
            min_step: 1e-12,
            blow_up: 1e6,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Horizon,
    BlowUp,
    StepFailure,
    /// A caller-supplied stop condition fired (e.g. a scalar-curvature cutoff).
    Stopped,
}

fn rk4<F: Fn(&DVector<f64>) -> DVector<f64>>(f: &F, y: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (0.5 * h)));
    let k3 = f(&(y + &k2 * (0.5 * h)));
    let k4 = f(&(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Raw adaptive integration of `y′ = f(y)`; `stop` is checked after each accepted step.
pub struct RawTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub termination: Termination,
}

/// Adaptive RK4 with step doubling: a step is accepted when
/// `‖y_{h/2,h/2} − y_h‖/15 ≤ tol·h·(1 + ‖y‖)`.
pub fn integrate_adaptive<F, S>(f: F, y0: DVector<f64>, horizon: f64, ctl: &StepControl, stop: S) -> RawTrajectory
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    S: Fn(&DVector<f64>) -> bool,
{
    let dir = if horizon < 0.0 { -1.0 } else { 1.0 };
    let g = |y: &DVector<f64>| f(y) * dir;
    let span = horizon.abs();
    let mut t = 0.0;
    let mut y = y0;
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut h = ctl.initial_step.min(ctl.max_step);
    let mut termination = Termination::Horizon;
    let mut steps = 0;
    while t < span {
        if steps >= ctl.max_steps {
            termination = Termination::StepFailure;
            break;
        }
        steps += 1;
        let h_try = h.min(span - t);
        let full = rk4(&g, &y, h_try);
        let half = rk4(&g, &rk4(&g, &y, 0.5 * h_try), 0.5 * h_try);
        let err = (&half - &full).norm() / 15.0;
        let allowed = ctl.tol * h_try * (1.0 + half.norm());
        let finite = half.iter().all(|v| v.is_finite());
        if finite && err <= allowed {
            t += h_try;
            y = half;
            times.push(t * dir);
            states.push(y.clone());
            if y.norm() >= ctl.blow_up {
                termination = Termination::BlowUp;
                break;
            }
            if stop(&y) {
                termination = Termination::Stopped;
                break;
            }
        }
        let factor = if !finite {
            0.1
        } else if err == 0.0 {
            4.0
        } else {
            (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 4.0)
        };
        h = (h_try * factor).min(ctl.max_step);
        if h < ctl.min_step {
            termination = Termination::StepFailure;
            break;
        }
    }
    RawTrajectory {
        times,
        states,
        termination,
    }
}

/// Fixed-step RK4.
pub fn integrate_fixed<F: Fn(&DVector<f64>) -> DVector<f64>>(f: F, y0: DVector<f64>, h: f64, steps: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(y0);
    for _ in 0..steps {
        let next = rk4(&f, out.last().expect("non-empty"), h);
        out.push(next);
    }
    out
}

fn flatten(r: &CurvatureOperator) -> DVector<f64> {
    DVector::from_column_slice(r.matrix().as_slice())
}

fn unflatten(n: usize, y: &DVector<f64>) -> CurvatureOperator {
    let d = n * (n - 1) / 2;
    CurvatureOperator::from_raw(n, DMatrix::from_column_slice(d, d, y.as_slice()))
}

/// `Φ` on the flattened wedge matrix.
pub fn phi_rhs(n: usize) -> impl Fn(&DVector<f64>) -> DVector<f64> + Sync {
    move |y| flatten(&unflatten(n, y).phi().expect("dimension validated by caller"))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CurvatureOperator>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &CurvatureOperator {
        self.states.last().expect("trajectories are non-empty")
    }
}

fn check_start(r0: &CurvatureOperator) -> Result<()> {
    if !r0.is_finite() {
        return Err(Error::invalid("initial operator is not finite"));
    }
    if r0.n() > crate::curvature::MAX_SHARP_DIM || r0.n() > MAX_DIM {
        return Err(Error::Capability(format!("no reaction term for n = {}", r0.n())));
    }
    Ok(())
}

/// Integrate `R′ = Φ(R)` on `[0, horizon]` (negative horizons run backwards).
pub fn integrate(r0: &CurvatureOperator, horizon: f64, ctl: &StepControl) -> Result<Trajectory> {
    integrate_until(r0, horizon, ctl, |_| false)
}

pub fn integrate_until<S>(r0: &CurvatureOperator, horizon: f64, ctl: &StepControl, stop: S) -> Result<Trajectory>
where
    S: Fn(&CurvatureOperator) -> bool,
{
    check_start(r0)?;
    let n = r0.n();
    let raw = integrate_adaptive(phi_rhs(n), flatten(r0), horizon, ctl, |y| stop(&unflatten(n, y)));
    Ok(Trajectory {
        times: raw.times,
        states: raw.states.iter().map(|y| unflatten(n, y)).collect(),
        termination: raw.termination,
    })
}

/// `λ′ = (λ₁² + λ₂λ₃, λ₂² + λ₁λ₃, λ₃² + λ₁λ₂)`.
pub fn eigen_ode_rhs(l: &[f64; 3]) -> [f64; 3] {
    [
        l[0] * l[0] + l[1] * l[2],
        l[1] * l[1] + l[0] * l[2],
        l[2] * l[2] + l[0] * l[1],
    ]
}

/// `√(3c/(3a − 1))·sinh(3/2)`.
pub fn b_formula(a: f64, c: f64) -> Result<f64> {
    if !(a > 1.0 / 3.0) || !(c > 0.0) || !a.is_finite() || !c.is_finite() {
        return Err(Error::Domain(format!("b_formula needs a > 1/3 and c > 0, got a = {a}, c = {c}")));
    }
    Ok((3.0 * c / (3.0 * a - 1.0)).sqrt() * 1.5f64.sinh())
}

#[derive(Clone, Debug, Serialize)]
pub struct TangencyWitness {
    pub r: Vec<f64>,
    pub phi_norm: f64,
    pub margin: f64,
    pub active: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TangencyReport {
    pub set: String,
    pub samples: usize,
    pub skipped: usize,
    pub tol_rel: f64,
    /// `max ⟨ν, Φ(R)⟩/(1 + ‖Φ(R)‖)` over samples and active normals.
    pub worst_margin: f64,
    pub corners: usize,
    pub witness: TangencyWitness,
    pub pass: bool,
}

/// `Φ(R)` must point into the tangent cone at every sampled boundary point.
pub fn tangent_cone_ode_test(spec: &SetSpec, points: &[BoundaryPoint], skipped: usize, tol_rel: f64) -> Result<TangencyReport> {
    if points.is_empty() {
        return Err(Error::EmptySample {
            what: format!("boundary of {}", spec.name),
            skipped,
        });
    }
    let margins: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let phi = p.r.phi()?;
            let m = tangent_cone_test(p, &phi);
            Ok((m / (1.0 + phi.norm()), phi.norm()))
        })
        .collect::<Result<_>>()?;
    let (k, &(worst, phi_norm)) = margins
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("non-empty");
    Ok(TangencyReport {
        set: spec.name.clone(),
        samples: points.len(),
        skipped,
        tol_rel,
        worst_margin: worst,
        corners: points.iter().filter(|p| p.is_corner()).count(),
        witness: TangencyWitness {
            r: points[k].r.to_row_major(),
            phi_norm,
            margin: worst,
            active: points[k].active.clone(),
        },
        pass: worst <= tol_rel,
    })
}

/// Sample the boundary and run [`tangent_cone_ode_test`]; sets with several
/// constraints get an extra tenth of the budget as corner points.
pub fn tangency_check(spec: &SetSpec, samples: usize, tol_rel: f64, stream: &SeedStream) -> Result<TangencyReport> {
    let mut batch = if spec.name == "psd-cone" {
        crate::geometry::psd_rank_two_samples(spec, samples, stream)?
    } else {
        boundary_sampler(spec, SamplerStrategy::RadialRoot, samples, stream)?
    };
    if spec.constraints.len() > 1 {
        let corners = corner_samples(spec, samples.div_ceil(10), &stream.child("corners"))?;
        batch.points.extend(corners.points);
        batch.skipped += corners.skipped;
    }
    tangent_cone_ode_test(spec, &batch.points, batch.skipped, tol_rel)
}

/// Interior points `origin + u·(boundary − origin)` with `u ∈ [0, 0.98)` along random rays.
pub fn interior_starts(spec: &SetSpec, m: usize, stream: &SeedStream) -> Result<Vec<CurvatureOperator>> {
    let batch = boundary_sampler(spec, SamplerStrategy::RadialRoot, m, &stream.child("rays"))?;
    let mut out = Vec::with_capacity(m);
    for (i, p) in batch.points.iter().enumerate() {
        let mut rng = stream.rng("interior", i as u64);
        let origin = spec.origin(&mut rng);
        let u: f64 = rng.random_range(0.0..0.98);
        let r = &origin + &(&p.r - &origin).scale(u);
        if membership(spec, &r)?.region == Region::Interior {
            out.push(r);
        }
    }
    Ok(out)
}

/// `max_m g_m(R)/‖∇g_m(R)‖`.
fn first_order_margin(spec: &SetSpec, r: &CurvatureOperator) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for g in &spec.constraints {
        let v = g.value(r)?;
        let norm = g.gradient(r)?.norm();
        worst = worst.max(if norm > GRADIENT_GUARD { v / norm } else { v });
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct StartRecord {
    pub index: usize,
    pub steps: usize,
    pub final_time: f64,
    pub final_scal: f64,
    pub termination: Termination,
    /// `max_t margin(t)/(1 + ‖R(t)‖)`.
    pub max_exit: f64,
    /// Largest `log(s_{k+1}/s_k)/Δt` with `s = (margin⁺)²`; zero if `s` never becomes positive.
    pub gronwall_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub set: String,
    pub starts: usize,
    pub horizon: f64,
    pub scal_stop: f64,
    pub tol_rel: f64,
    pub worst_exit: f64,
    pub worst_start: usize,
    pub records: Vec<StartRecord>,
    pub pass: bool,
}

/// Integrate each start until `scal ≥ scal_stop` (or the horizon) and track exits.
pub fn invariance_monitor(
    spec: &SetSpec,
    starts: &[CurvatureOperator],
    horizon: f64,
    scal_stop: f64,
    ctl: &StepControl,
    tol_rel: f64,
) -> Result<InvarianceReport> {
    if starts.is_empty() {
        return Err(Error::EmptySample {
            what: "interior starts".into(),
            skipped: 0,
        });
    }
    for (i, s) in starts.iter().enumerate() {
        let m = membership(spec, s)?;
        if m.margin > 0.0 {
            return Err(Error::invalid(format!("start {i} lies outside {} (margin {:e})", spec.name, m.margin)));
        }
    }
    let records: Vec<StartRecord> = starts
        .par_iter()
        .enumerate()
        .map(|(i, r0)| {
            let traj = integrate_until(r0, horizon, ctl, |r| r.scalar() >= scal_stop)?;
            let mut max_exit = f64::NEG_INFINITY;
            let mut rate: f64 = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for (t, r) in traj.times.iter().zip(&traj.states) {
                let m = first_order_margin(spec, r)?;
                max_exit = max_exit.max(m / (1.0 + r.norm()));
                let s = m.max(0.0).powi(2);
                if let Some((tp, sp)) = prev {
                    if sp > 0.0 && s > 0.0 && t > &tp {
                        rate = rate.max((s / sp).ln() / (t - tp));
                    }
                }
                prev = Some((*t, s));
            }
            Ok(StartRecord {
                index: i,
                steps: traj.times.len() - 1,
                final_time: *traj.times.last().expect("non-empty"),
                final_scal: traj.last().scalar(),
                termination: traj.termination,
                max_exit,
                gronwall_rate: rate,
            })
        })
        .collect::<Result<_>>()?;
    let (worst_start, worst_exit) = records
        .iter()
        .map(|r| (r.index, r.max_exit))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    Ok(InvarianceReport {
        set: spec.name.clone(),
        starts: starts.len(),
        horizon,
        scal_stop,
        tol_rel,
        worst_exit,
        worst_start,
        pass: worst_exit <= tol_rel,
        records,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanEntry {
    pub b: f64,
    pub worst_margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub a: f64,
    pub c: f64,
    pub b_formula: f64,
    pub min_b: Option<f64>,
    pub entries: Vec<ScanEntry>,
    /// `min_b ≤ b_formula`.
    pub consistent: bool,
}

/// Default grid: `b_formula·k/20` for `k = 1..=20`.
pub fn default_b_grid(a: f64, c: f64) -> Result<Vec<f64>> {
    let bf = b_formula(a, c)?;
    Ok((1..=20).map(|k| bf * k as f64 / 20.0).collect())
}

/// Smallest grid `b` whose `Ω̃_{a,c,b}` passes the boundary tangency test.
pub fn min_b_scan(a: f64, c: f64, grid: &[f64], samples: usize, tol_rel: f64, stream: &SeedStream) -> Result<ScanReport> {
    let bf = b_formula(a, c)?;
    let mut entries = Vec::with_capacity(grid.len());
    for &b in grid {
        let spec = SetSpec::omega_tilde_ac(a, c, b)?;
        let rep = tangency_check(&spec, samples, tol_rel, stream)?;
        entries.push(ScanEntry {
            b,
            worst_margin: rep.worst_margin,
            pass: rep.pass,
        });
    }
    let min_b = entries.iter().filter(|e| e.pass).map(|e| e.b).min_by(f64::total_cmp);
    Ok(ScanReport {
        a,
        c,
        b_formula: bf,
        consistent: min_b.is_some_and(|m| m <= bf),
        min_b,
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    /// `max_t max_i |λᵢ(R(t)) − μᵢ(t)|/(1 + |μᵢ(t)|)`.
    pub max_deviation: f64,
    pub steps: usize,
    pub final_time: f64,
    pub termination: Termination,
}

/// Integrates the matrix ODE and the eigenvalue ODE as one system on a shared step grid.
pub fn eigen_vs_matrix_consistency(
    r0: &CurvatureOperator,
    horizon: f64,
    ctl: &StepControl,
    scal_stop: f64,
) -> Result<ConsistencyReport> {
    if r0.n() != 3 {
        return Err(Error::Capability("eigenvalue ODE is three-dimensional".into()));
    }
    let mu0 = r0.eigenvalues()?;
    let mut y0 = DVector::zeros(12);
    y0.rows_mut(0, 9).copy_from(&flatten(r0));
    for i in 0..3 {
        y0[9 + i] = mu0[i];
    }
    let phi = phi_rhs(3);
    let rhs = |y: &DVector<f64>| {
        let mut out = DVector::zeros(12);
        out.rows_mut(0, 9).copy_from(&phi(&y.rows(0, 9).into_owned()));
        let d = eigen_ode_rhs(&[y[9], y[10], y[11]]);
        for i in 0..3 {
            out[9 + i] = d[i];
        }
        out
    };
    let raw = integrate_adaptive(rhs, y0, horizon, ctl, |y| y[0] + y[4] + y[8] >= scal_stop);
    let mut max_deviation: f64 = 0.0;
    for y in &raw.states {
        let lam = unflatten(3, &y.rows(0, 9).into_owned()).eigenvalues()?;
        let mut mu = [y[9], y[10], y[11]];
        mu.sort_by(f64::total_cmp);
        for i in 0..3 {
            max_deviation = max_deviation.max((lam[i] - mu[i]).abs() / (1.0 + mu[i].abs()));
        }
    }
    Ok(ConsistencyReport {
        max_deviation,
        steps: raw.times.len() - 1,
        final_time: *raw.times.last().expect("non-empty"),
        termination: raw.termination,
    })
}

/// `c(t) = c₀/(1 − 2c₀t)`, the solution through `c₀I` in dimension three.
pub fn identity_ray_solution(c0: f64, t: f64) -> f64 {
    c0 / (1.0 - 2.0 * c0 * t)
}

/// CSV: `t`, upper-triangular wedge entries, eigenvalues, `scal`, one margin column per constraint.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, spec: Option<&SetSpec>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let n = traj.states.first().map_or(3, |s| s.n());
    let d = n * (n - 1) / 2;
    let mut header = vec!["t".to_string()];
    for i in 0..d {
        for j in i..d {
            header.push(format!("r{}{}", i + 1, j + 1));
        }
    }
    header.extend((1..=d).map(|i| format!("lambda{i}")));
    header.push("scal".into());
    if let Some(spec) = spec {
        header.extend(spec.constraints.iter().enumerate().map(|(m, g)| format!("margin{m}_{}", g.name())));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (t, r) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![fmt(*t)];
        for i in 0..d {
            for j in i..d {
                row.push(fmt(r.matrix()[(i, j)]));
            }
        }
        row.extend(r.eigenvalues()?.into_iter().map(fmt));
        row.push(fmt(r.scalar()));
        if let Some(spec) = spec {
            row.extend(spec.values(r)?.into_iter().map(fmt));
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}
