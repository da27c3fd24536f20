//! Periodic-grid demonstrator for `∂ₜR = ΔR + R² + R#` in 𝒜₃.
//!
//! The Laplacian is the flat second-difference stencil; time stepping is
//! explicit RK4 under a hard CFL bound. Grid fields do not satisfy the
//! second Bianchi identity across slots, so containment is only expected for
//! convex sets; margins for other sets are exploratory.

use std::path::Path;

use nalgebra::Matrix3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{phi3, CurvatureOperator};
use crate::error::{Error, Result};
use crate::geometry::{membership, BoundaryPoint, SetSpec, GRADIENT_GUARD};
use crate::ode::{csv_error, fmt};
use crate::rng::SeedStream;

/// Grids with at least this many cells update in parallel.
const PARALLEL_CELLS: usize = 4096;

/// Exactly symmetric reaction term.
fn reaction(m: &Matrix3<f64>) -> Matrix3<f64> {
    let p = phi3(m);
    (p + p.transpose()) * 0.5
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub g: usize,
    pub dims: usize,
    pub cells: Vec<Matrix3<f64>>,
}

impl MatrixField {
    pub fn new(g: usize, dims: usize, cells: Vec<Matrix3<f64>>) -> Result<Self> {
        if g < 3 || !(1..=2).contains(&dims) {
            return Err(Error::Config(format!("grid needs G ≥ 3 and dims ∈ {{1,2}}, got G = {g}, dims = {dims}")));
        }
        if cells.len() != g.pow(dims as u32) {
            return Err(Error::invalid("cell count does not match the grid"));
        }
        if cells.iter().any(|c| (c - c.transpose()).amax() != 0.0) {
            return Err(Error::invalid("cells must be symmetric"));
        }
        Ok(Self { g, dims, cells })
    }

    pub fn constant(g: usize, dims: usize, value: Matrix3<f64>) -> Result<Self> {
        Self::new(g, dims, vec![value; g.pow(dims as u32)])
    }

    pub fn h(&self) -> f64 {
        1.0 / self.g as f64
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cell coordinates in `[0,1)^dims`.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let h = self.h();
        [(idx % self.g) as f64 * h, (idx / self.g) as f64 * h]
    }

    fn neighbours(&self, idx: usize, axis: usize) -> (usize, usize) {
        let g = self.g;
        if axis == 0 {
            let (i, j) = (idx % g, idx / g);
            ((i + g - 1) % g + j * g, (i + 1) % g + j * g)
        } else {
            let (i, j) = (idx % g, idx / g);
            (i + ((j + g - 1) % g) * g, i + ((j + 1) % g) * g)
        }
    }

    fn map_cells<F: Fn(usize) -> Matrix3<f64> + Sync + Send>(&self, f: F) -> Vec<Matrix3<f64>> {
        if self.cells.len() >= PARALLEL_CELLS {
            (0..self.cells.len()).into_par_iter().map(f).collect()
        } else {
            (0..self.cells.len()).map(f).collect()
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.cells.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ ‖R_x‖²·h^dims`.
    pub fn energy(&self) -> f64 {
        self.cells.iter().map(|c| c.norm_squared()).sum::<f64>() * self.h().powi(self.dims as i32)
    }

    pub fn mean(&self) -> Matrix3<f64> {
        self.cells.iter().fold(Matrix3::zeros(), |a, c| a + c) / self.cells.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|c| c.iter().all(|x| x.is_finite()))
    }

    pub fn operator(&self, idx: usize) -> CurvatureOperator {
        CurvatureOperator::from_matrix3(&self.cells[idx])
    }
}

/// `Σ_axes (R_{i+1} − 2R_i + R_{i−1})/h²`, periodic.
pub fn laplacian(field: &MatrixField) -> MatrixField {
    let inv_h2 = 1.0 / (field.h() * field.h());
    let cells = field.map_cells(|idx| {
        let mut acc = Matrix3::zeros();
        for axis in 0..field.dims {
            let (lo, hi) = field.neighbours(idx, axis);
            acc += (field.cells[hi] - field.cells[idx] * 2.0 + field.cells[lo]) * inv_h2;
        }
        acc
    });
    MatrixField {
        g: field.g,
        dims: field.dims,
        cells,
    }
}

fn rhs(field: &MatrixField, reaction_on: bool) -> Vec<Matrix3<f64>> {
    let lap = laplacian(field);
    if !reaction_on {
        return lap.cells;
    }
    field.map_cells(|i| lap.cells[i] + reaction(&field.cells[i]))
}

fn axpy(field: &MatrixField, k: &[Matrix3<f64>], a: f64) -> MatrixField {
    MatrixField {
        g: field.g,
        dims: field.dims,
        cells: field.map_cells(|i| field.cells[i] + k[i] * a),
    }
}

/// One explicit RK4 step of `∂ₜR = ΔR + [reaction_on]·Φ(R)`.
pub fn step(field: &MatrixField, dt: f64, reaction_on: bool) -> MatrixField {
    let k1 = rhs(field, reaction_on);
    let k2 = rhs(&axpy(field, &k1, 0.5 * dt), reaction_on);
    let k3 = rhs(&axpy(field, &k2, 0.5 * dt), reaction_on);
    let k4 = rhs(&axpy(field, &k3, dt), reaction_on);
    let cells = field.map_cells(|i| field.cells[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0));
    MatrixField {
        g: field.g,
        dims: field.dims,
        cells,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialField {
    /// `mean·I` plus up to four seeded Fourier modes per entry.
    Fourier { mean: f64, amplitude: f64, modes: usize },
    /// Like `Fourier`, then retracted cell-wise into the set under test.
    FourierInSet { mean: f64, amplitude: f64, modes: usize },
    Constant { value: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SimConfig {
    pub g: usize,
    pub dims: usize,
    pub dt: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub reaction_on: bool,
    pub seed: u64,
    /// Diagnostics are recorded every `cadence` steps and at the end.
    pub cadence: usize,
    /// Runs stop once `max ‖R‖` reaches this value.
    pub blow_up: f64,
    pub set: String,
    pub set_params: std::collections::BTreeMap<String, f64>,
    pub init: InitialField,
    /// Cells with `|g/‖∇g‖| ≤ spot_band·(1 + ‖R‖)` enter the Laplacian spot check.
    pub spot_band: f64,
    pub spot_epsilon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let g = 128;
        let h = 1.0 / g as f64;
        Self {
            g,
            dims: 1,
            dt: 0.4 * h * h / 2.0,
            t_end: 1.0,
            cfl_safety: 0.5,
            reaction_on: true,
            seed: 0,
            cadence: 100,
            blow_up: 1e3,
            set: "psd-cone".into(),
            set_params: Default::default(),
            init: InitialField::FourierInSet {
                mean: 1.0,
                amplitude: 1.0,
                modes: 4,
            },
            spot_band: 1e-3,
            spot_epsilon: 0.0,
        }
    }
}

impl SimConfig {
    pub fn h(&self) -> f64 {
        1.0 / self.g as f64
    }

    pub fn dt_limit(&self) -> f64 {
        self.cfl_safety * self.h() * self.h() / (2.0 * self.dims as f64)
    }

    /// Largest admissible step: `cfl_safety·h²/(2·dims)`.
    pub fn validate(&self) -> Result<()> {
        if self.g < 3 || !(1..=2).contains(&self.dims) {
            return Err(Error::Config("grid needs G ≥ 3 and dims ∈ {1,2}".into()));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config("cfl_safety must lie in (0, 1]".into()));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) || !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config("dt and t_end must be finite and non-negative".into()));
        }
        if self.dt > self.dt_limit() {
            return Err(Error::Config(format!(
                "dt = {:e} violates the CFL bound {:e}",
                self.dt,
                self.dt_limit()
            )));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        Ok(())
    }

    pub fn set_spec(&self) -> Result<SetSpec> {
        let f = self.set.strip_prefix("omega-f:");
        let name = if f.is_some() { "omega-f" } else { self.set.as_str() };
        SetSpec::builtin(name, 3, &self.set_params, f)
    }
}

/// Seeded smooth field: each upper-triangular entry gets `modes` sine modes.
pub fn fourier_field(g: usize, dims: usize, mean: f64, amplitude: f64, modes: usize, stream: &SeedStream) -> Result<MatrixField> {
    if modes > 4 {
        return Err(Error::Config("at most four Fourier modes per entry".into()));
    }
    let mut rng = stream.rng("fourier", 0);
    let mut terms = Vec::new();
    for entry in 0..6 {
        for _ in 0..modes {
            let kx = rng.random_range(1..=3) as f64;
            let ky = if dims == 2 { rng.random_range(0..=3) as f64 } else { 0.0 };
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = amplitude * rng.random_range(-1.0..1.0) / modes.max(1) as f64;
            terms.push((entry, kx, ky, phase, amp));
        }
    }
    let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let proto = MatrixField::constant(g, dims, Matrix3::identity() * mean)?;
    let cells = (0..proto.len())
        .map(|idx| {
            let [x, y] = proto.position(idx);
            let mut m = Matrix3::identity() * mean;
            for &(entry, kx, ky, phase, amp) in &terms {
                let v = amp * (std::f64::consts::TAU * (kx * x + ky * y) + phase).sin();
                let (i, j) = pairs[entry];
                m[(i, j)] += v;
                if i != j {
                    m[(j, i)] += v;
                }
            }
            m
        })
        .collect();
    MatrixField::new(g, dims, cells)
}

/// Pull exterior cells toward `anchor` onto `anchor + 0.99·t*(R − anchor)`, with `t*` the exit parameter.
pub fn retract_into(field: &MatrixField, spec: &SetSpec, anchor: &Matrix3<f64>) -> Result<MatrixField> {
    let a = CurvatureOperator::from_matrix3(anchor);
    if membership(spec, &a)?.margin >= 0.0 {
        return Err(Error::invalid("retraction anchor must be interior"));
    }
    let cells = field
        .cells
        .iter()
        .map(|c| {
            let r = CurvatureOperator::from_matrix3(c);
            if membership(spec, &r)?.margin < 0.0 {
                return Ok(*c);
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let p = &a + &(&r - &a).scale(mid);
                if membership(spec, &p)?.margin < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let m = anchor + (c - anchor) * (0.99 * lo);
            Ok((m + m.transpose()) * 0.5)
        })
        .collect::<Result<_>>()?;
    MatrixField::new(field.g, field.dims, cells)
}

pub fn initial_field(cfg: &SimConfig, spec: &SetSpec) -> Result<MatrixField> {
    let stream = SeedStream::new(cfg.seed).child("rd-init");
    match &cfg.init {
        InitialField::Constant { value } => MatrixField::constant(cfg.g, cfg.dims, Matrix3::identity() * *value),
        InitialField::Fourier { mean, amplitude, modes } => fourier_field(cfg.g, cfg.dims, *mean, *amplitude, *modes, &stream),
        InitialField::FourierInSet { mean, amplitude, modes } => {
            let raw = fourier_field(cfg.g, cfg.dims, *mean, *amplitude, *modes, &stream)?;
            let anchor = match &spec.anchor {
                crate::geometry::Anchor::Point(p) => p.to_matrix3().ok_or_else(|| Error::invalid("n = 3 required"))?,
                crate::geometry::Anchor::Axis { lo, hi } => Matrix3::identity() * (lo * hi).sqrt(),
            };
            retract_into(&raw, spec, &anchor)
        }
    }
}

/// Worst `⟨ΔR, ν⟩ − ε·Σ_axes ‖∂R‖²` over cells within `band` of the boundary; `None` if no such cell.
pub fn laplace_inward_spot_check(field: &MatrixField, spec: &SetSpec, band: f64, epsilon: f64) -> Result<Option<f64>> {
    let lap = laplacian(field);
    let h = field.h();
    let mut worst: Option<f64> = None;
    for idx in 0..field.len() {
        let r = field.operator(idx);
        let mut best: Option<(f64, usize)> = None;
        for (m, g) in spec.constraints.iter().enumerate() {
            let norm = g.gradient(&r)?.norm();
            if norm < GRADIENT_GUARD {
                continue;
            }
            let d = g.value(&r)? / norm;
            if d.abs() <= band * (1.0 + r.norm()) && best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, m));
            }
        }
        let Some((_, m)) = best else { continue };
        let grad = spec.constraints[m].gradient(&r)?;
        let nu = grad.scale(1.0 / grad.norm());
        let inward = nu.inner(&CurvatureOperator::from_matrix3(&lap.cells[idx]));
        let mut grad_sq = 0.0;
        for axis in 0..field.dims {
            let (lo, hi) = field.neighbours(idx, axis);
            grad_sq += ((field.cells[hi] - field.cells[lo]) / (2.0 * h)).norm_squared();
        }
        let v = inward - epsilon * grad_sq;
        worst = Some(worst.map_or(v, |w: f64| w.max(v)));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub min_scal: f64,
    pub max_scal: f64,
    pub min_eig: f64,
    pub max_norm: f64,
    /// Per constraint, the largest value over cells.
    pub margins: Vec<f64>,
    pub spot: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RdTermination {
    Horizon,
    BlowUp,
}

#[derive(Clone, Debug)]
pub struct RdRun {
    pub series: Vec<Diagnostics>,
    pub field: MatrixField,
    pub steps: usize,
    pub termination: RdTermination,
    pub constraint_names: Vec<String>,
}

pub fn diagnostics(t: f64, field: &MatrixField, spec: &SetSpec, cfg: &SimConfig) -> Result<Diagnostics> {
    let mut min_scal = f64::INFINITY;
    let mut max_scal = f64::NEG_INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut margins = vec![f64::NEG_INFINITY; spec.constraints.len()];
    for idx in 0..field.len() {
        let r = field.operator(idx);
        let s = r.scalar();
        min_scal = min_scal.min(s);
        max_scal = max_scal.max(s);
        min_eig = min_eig.min(r.eigenvalues()?[0]);
        for (m, v) in spec.values(&r)?.into_iter().enumerate() {
            margins[m] = margins[m].max(v);
        }
    }
    Ok(Diagnostics {
        t,
        min_scal,
        max_scal,
        min_eig,
        max_norm: field.max_norm(),
        margins,
        spot: laplace_inward_spot_check(field, spec, cfg.spot_band, cfg.spot_epsilon)?,
    })
}

/// Integrate to `t_end`, recording diagnostics every `cadence` steps.
pub fn run(cfg: &SimConfig, init: MatrixField) -> Result<RdRun> {
    cfg.validate()?;
    if init.g != cfg.g || init.dims != cfg.dims {
        return Err(Error::Config("initial field does not match the configured grid".into()));
    }
    let spec = cfg.set_spec()?;
    let mut field = init;
    let mut t = 0.0;
    let mut series = vec![diagnostics(t, &field, &spec, cfg)?];
    let total = if cfg.dt == 0.0 { 0 } else { (cfg.t_end / cfg.dt).round() as usize };
    let mut termination = RdTermination::Horizon;
    let mut steps = 0;
    while steps < total {
        let next = step(&field, cfg.dt, cfg.reaction_on);
        if !next.is_finite() {
            termination = RdTermination::BlowUp;
            break;
        }
        field = next;
        steps += 1;
        t = steps as f64 * cfg.dt;
        let blown = field.max_norm() >= cfg.blow_up;
        if steps % cfg.cadence == 0 || steps == total || blown {
            series.push(diagnostics(t, &field, &spec, cfg)?);
        }
        if blown {
            termination = RdTermination::BlowUp;
            break;
        }
    }
    Ok(RdRun {
        series,
        field,
        steps,
        termination,
        constraint_names: spec.constraints.iter().map(|g| g.name().to_string()).collect(),
    })
}

/// CSV: `t,min_scal,max_scal,min_eig,max_norm,margin_<constraint>…,spot`.
pub fn write_diagnostics_csv(path: &Path, run: &RdRun) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = ["t", "min_scal", "max_scal", "min_eig", "max_norm"].iter().map(|s| s.to_string()).collect();
    header.extend(run.constraint_names.iter().map(|n| format!("margin_{n}")));
    header.push("spot".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for d in &run.series {
        let mut row = vec![fmt(d.t), fmt(d.min_scal), fmt(d.max_scal), fmt(d.min_eig), fmt(d.max_norm)];
        row.extend(d.margins.iter().map(|m| fmt(*m)));
        row.push(d.spot.map(fmt).unwrap_or_default());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Largest drop `min_scal(t_k) − min_scal(t_{k+1})` over the series (zero if monotone).
pub fn min_scal_defect(series: &[Diagnostics]) -> f64 {
    series
        .windows(2)
        .map(|w| (w[0].min_scal - w[1].min_scal).max(0.0))
        .fold(0.0, f64::max)
}

/// Spatially constant boundary cells, used to probe the spot check.
pub fn boundary_constant_field(g: usize, dims: usize, p: &BoundaryPoint) -> Result<MatrixField> {
    MatrixField::constant(g, dims, p.r.to_matrix3().ok_or_else(|| Error::invalid("n = 3 required"))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{identity_ray_solution, integrate_fixed, phi_rhs};
    use nalgebra::DVector;

    fn cfg(g: usize) -> SimConfig {
        let h = 1.0 / g as f64;
        SimConfig {
            g,
            dt: 0.4 * h * h / 2.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn laplacian_examples() {
        let c = MatrixField::constant(16, 1, Matrix3::new(1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0)).unwrap();
        assert!(laplacian(&c).cells.iter().all(|m| m.amax() == 0.0));

        let g = 32;
        let h = 1.0 / g as f64;
        let e = Matrix3::new(1.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        let cells = (0..g).map(|i| e * (std::f64::consts::TAU * i as f64 * h).sin()).collect();
        let f = MatrixField::new(g, 1, cells).unwrap();
        let symbol = -(2.0 / (h * h)) * (1.0 - (std::f64::consts::TAU * h).cos());
        let lap = laplacian(&f);
        for (l, c) in lap.cells.iter().zip(&f.cells) {
            assert!((l - c * symbol).amax() < 1e-12 * symbol.abs());
        }

        let a = fourier_field(8, 2, 0.0, 1.0, 3, &SeedStream::new(1)).unwrap();
        let b = fourier_field(8, 2, 1.0, 2.0, 2, &SeedStream::new(2)).unwrap();
        let sum = MatrixField::new(8, 2, a.cells.iter().zip(&b.cells).map(|(x, y)| x + y).collect()).unwrap();
        let (la, lb, ls) = (laplacian(&a), laplacian(&b), laplacian(&sum));
        for i in 0..sum.len() {
            assert!((ls.cells[i] - la.cells[i] - lb.cells[i]).amax() < 1e-12 * 64.0 * 10.0);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let f = fourier_field(16, 1, 1.0, 1.0, 4, &SeedStream::new(3)).unwrap();
        assert_eq!(step(&f, 0.0, true), f);
    }

    #[test]
    fn cfl_violation_is_a_configuration_error() {
        let mut c = cfg(64);
        c.dt = 2.0 * c.dt_limit();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn constant_field_follows_the_ode() {
        let c0 = 1.0;
        let mut c = cfg(16);
        c.t_end = 0.2;
        c.init = InitialField::Constant { value: c0 };
        c.set = "halfspace-scal".into();
        c.set_params.insert("b".into(), 0.0);
        let init = initial_field(&c, &c.set_spec().unwrap()).unwrap();
        let run = run(&c, init.clone()).unwrap();
        let ys = integrate_fixed(phi_rhs(3), DVector::from_column_slice(init.cells[0].as_slice()), c.dt, run.steps);
        let ode = ys.last().unwrap();
        for cell in &run.field.cells {
            let diff = (DVector::from_column_slice(cell.as_slice()) - ode).norm() / ode.norm();
            assert!(diff < 1e-8);
        }
        let exact = identity_ray_solution(c0, run.steps as f64 * c.dt);
        assert!((run.field.cells[0][(0, 0)] - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn heat_flow_conserves_mean_and_decays() {
        let f0 = fourier_field(32, 1, 0.5, 1.0, 4, &SeedStream::new(4)).unwrap();
        let dt = 0.4 / (32.0f64 * 32.0) / 2.0;
        let mut f = f0.clone();
        let mean = f0.mean();
        let mut energy = f0.energy();
        let deviation = |f: &MatrixField| f.cells.iter().map(|c| (c - mean).norm_squared()).sum::<f64>();
        let mut dev = deviation(&f0);
        for _ in 0..200 {
            let next = step(&f, dt, false);
            assert!((next.mean() - f.mean()).amax() < 1e-12);
            assert!(next.energy() <= energy * (1.0 + 1e-14));
            let d = deviation(&next);
            assert!(d <= dev);
            energy = next.energy();
            dev = d;
            f = next;
        }
        assert!(dev < 0.5 * deviation(&f0));
    }

    #[test]
    fn symmetry_is_exact_after_many_steps() {
        let mut f = fourier_field(8, 2, 0.2, 1.0, 4, &SeedStream::new(5)).unwrap();
        let dt = 0.4 / 64.0 / 4.0;
        for _ in 0..300 {
            f = step(&f, dt, true);
        }
        assert!(f.is_finite());
        assert!(f.cells.iter().all(|c| (c - c.transpose()).amax() == 0.0));
    }

    #[test]
    fn retraction_lands_inside() {
        let spec = SetSpec::psd_cone();
        let raw = fourier_field(32, 1, 0.5, 3.0, 4, &SeedStream::new(6)).unwrap();
        let f = retract_into(&raw, &spec, &Matrix3::identity()).unwrap();
        for c in &f.cells {
            assert!(membership(&spec, &CurvatureOperator::from_matrix3(c)).unwrap().margin < 0.0);
        }
    }

    #[test]
    fn spot_check_examples() {
        let spec = SetSpec::psd_cone();
        let p = BoundaryPoint::new(&spec, CurvatureOperator::diagonal(3, &[0.0, 1.0, 2.0]).unwrap()).unwrap();
        let f = boundary_constant_field(8, 1, &p).unwrap();
        assert_eq!(laplace_inward_spot_check(&f, &spec, 1e-6, 0.1).unwrap(), Some(0.0));

        // A cell on ∂Ω whose neighbours lie outside pushes outward.
        let mut cells = vec![Matrix3::from_diagonal(&nalgebra::Vector3::new(0.0, 1.0, 2.0)); 8];
        cells[3][(0, 0)] = -0.5;
        cells[5][(0, 0)] = -0.5;
        let f = MatrixField::new(8, 1, cells).unwrap();
        assert!(laplace_inward_spot_check(&f, &spec, 1e-6, 0.0).unwrap().unwrap() > 0.0);

        let interior = MatrixField::constant(8, 1, Matrix3::identity()).unwrap();
        assert_eq!(laplace_inward_spot_check(&interior, &spec, 1e-6, 0.0).unwrap(), None);
    }

    #[test]
    fn diagnostics_csv_header() {
        let mut c = cfg(8);
        c.t_end = 10.0 * c.dt;
        c.cadence = 5;
        let spec = c.set_spec().unwrap();
        let run = run(&c, initial_field(&c, &spec).unwrap()).unwrap();
        assert_eq!(run.series.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rd.csv");
        write_diagnostics_csv(&path, &run).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,min_scal,max_scal,min_eig,max_norm,margin_psd,spot");
    }

    fn psd_run(g: usize, dt_scale: f64) -> RdRun {
        let mut c = cfg(g);
        c.dt *= dt_scale;
        c.t_end = 0.3;
        c.cadence = 20;
        c.seed = 11;
        let init = initial_field(&c, &c.set_spec().unwrap()).unwrap();
        run(&c, init).unwrap()
    }

    #[test]
    fn psd_fields_stay_psd_and_min_scal_rises() {
        let r = psd_run(32, 1.0);
        for d in &r.series {
            assert!(d.min_eig >= -1e-6 * (1.0 + d.max_norm), "{} at t = {}", d.min_eig, d.t);
            assert!(d.margins[0] <= 1e-6 * (1.0 + d.max_norm));
        }
        let h = 1.0 / 32.0;
        assert!(min_scal_defect(&r.series) <= 10.0 * (r.series[1].t + h * h));
    }

    fn rough_defect(g: usize, dt_scale: f64) -> f64 {
        let mut c = cfg(g);
        c.dt *= dt_scale;
        c.t_end = 0.05;
        c.cadence = 1;
        c.set = "halfspace-scal".into();
        c.set_params.insert("b".into(), -100.0);
        c.init = InitialField::Fourier {
            mean: 0.0,
            amplitude: 4.0,
            modes: 4,
        };
        let init = initial_field(&c, &c.set_spec().unwrap()).unwrap();
        min_scal_defect(&run(&c, init).unwrap().series)
    }

    #[test]
    fn min_scal_defect_shrinks_under_refinement() {
        let coarse = rough_defect(16, 1.0);
        let fine = rough_defect(32, 0.25);
        assert!(coarse <= 1e-6);
        assert!(fine <= (0.5 * coarse).max(1e-12), "coarse {coarse:e}, fine {fine:e}");
    }
}
