//! Command dispatch: resolve a [`RunConfig`], run the checks, assemble a [`Report`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DVector, Matrix3};
use serde_json::{json, Value};

use crate::bianchi::tuple_space_basis;
use crate::convexity::{self, CrossVerdict, Mode, Verdict};
use crate::curvature::{adjugate3, sharp_structure, CurvatureOperator};
use crate::error::{Error, Result};
use crate::geometry::{
    boundary_sampler, corner_samples, eigen_function, star_shape_margin, EigenFunction, PinchingFn, SamplerStrategy,
    SetSpec,
};
use crate::linalg::random_symmetric;
use crate::ode::{self, fmt, StepControl};
use crate::rd::{self, InitialField, SimConfig};
use crate::report::{write_csv, write_plot, CheckRecord, Report, RunConfig};
use crate::rng::SeedStream;

const TANGENT_CONE_ASSUMPTION: &str =
    "tangent cones are taken as the intersection of active half-spaces, which is exact for smooth transversal constraint systems";
const ROTATION_ASSUMPTION: &str =
    "Bianchi-convexity is checked in a finite sample of orthonormal frames (identity plus seeded Haar rotations)";
const BALL_ASSUMPTION: &str = "star-shapedness is certified only on the configured ball K, not on every compact set";
const GRID_ASSUMPTION: &str =
    "grid fields do not satisfy the second Bianchi identity; containment is asserted only for convex sets";

/// Process exit status for an error: 64 for usage problems, 74 for I/O, 70 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::Domain(_) | Error::Capability(_) => 64,
        Error::Io { .. } => 74,
        _ => 70,
    }
}

fn default_set(command: &str) -> &'static str {
    match command {
        "check-bianchi-eigen" | "check-bianchi-direct" | "cross-validate" => "omega-ac",
        "simulate-rd" => "psd-cone",
        "calibrate" => "none",
        _ => "omega-tilde-ac",
    }
}

/// Fill command defaults so the report records every value actually used.
pub fn resolve(cfg: &RunConfig) -> Result<RunConfig> {
    cfg.validate()?;
    let mut out = cfg.clone();
    if out.set.is_empty() {
        out.set = default_set(&out.command).into();
    }
    if out.b.is_none() && out.a > 1.0 / 3.0 && out.c > 0.0 {
        out.b = Some(ode::b_formula(out.a, out.c)?);
    }
    if out.lambda_star.is_none() {
        out.lambda_star = out.b.map(|b| 1.1 * b);
    }
    if out.command == "simulate-rd" && out.rd.dt.is_none() {
        let h = 1.0 / out.rd.grid as f64;
        out.rd.dt = Some(out.rd.cfl_safety * h * h / (2.0 * out.rd.dims as f64));
    }
    Ok(out)
}

fn set_params(cfg: &RunConfig) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::from([("a".to_string(), cfg.a), ("c".to_string(), cfg.c), ("radius".to_string(), cfg.radius)]);
    if let Some(b) = cfg.b {
        p.insert("b".into(), b);
    }
    p
}

fn set_spec(cfg: &RunConfig) -> Result<SetSpec> {
    let (name, f) = match cfg.set.split_once(':') {
        Some(("omega-f", f)) => ("omega-f", Some(f)),
        _ => (cfg.set.as_str(), cfg.function.as_deref()),
    };
    SetSpec::builtin(name, 3, &set_params(cfg), f)
}

fn spectral_function(cfg: &RunConfig) -> Result<Arc<dyn EigenFunction>> {
    let params = set_params(cfg);
    match cfg.set.as_str() {
        "omega-ac" => Ok(Arc::new(PinchingFn::new(cfg.a, cfg.c))),
        "ball" => eigen_function("sphere", &BTreeMap::from([("c".to_string(), cfg.radius * cfg.radius)])),
        "omega-f" => eigen_function(
            cfg.function.as_deref().ok_or_else(|| Error::Config("omega-f needs a function".into()))?,
            &params,
        ),
        other => match other.strip_prefix("omega-f:") {
            Some(f) => eigen_function(f, &params),
            None => Err(Error::Config(format!("set {other:?} is not a spectral set Ω_f"))),
        },
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report fragments serialize")
}

fn to_matrix3(m: &nalgebra::DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    stream: SeedStream,
    report: Report,
}

impl Ctx<'_> {
    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.report
            .volatile
            .timings_ms
            .insert(label.into(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        if let Some(dir) = &self.cfg.out {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write(&dir.join(name))?;
            self.report.files.push(name.into());
        }
        Ok(())
    }
}

/// Validate, resolve and run one command; writes `report.json` and data files when `out` is set.
pub fn run_command(cfg: &RunConfig) -> Result<Report> {
    let cfg = resolve(cfg)?;
    let start = Instant::now();
    let mut ctx = Ctx {
        cfg: &cfg,
        stream: SeedStream::new(cfg.seed),
        report: Report::new(cfg.clone()),
    };
    match cfg.command.as_str() {
        "check-bianchi-eigen" => convexity_command(&mut ctx, Mode::Eigen)?,
        "check-bianchi-direct" => convexity_command(&mut ctx, Mode::Direct)?,
        "cross-validate" => convexity_command(&mut ctx, Mode::Cross)?,
        "check-ode-invariance" => invariance_command(&mut ctx)?,
        "min-b-scan" => scan_command(&mut ctx)?,
        "star-shape" => star_command(&mut ctx)?,
        "simulate-ode" => ode_command(&mut ctx)?,
        "simulate-rd" => rd_command(&mut ctx)?,
        "calibrate" => calibrate_command(&mut ctx)?,
        other => return Err(Error::Config(format!("unknown command {other:?}"))),
    }
    let mut report = ctx.report;
    report.finish();
    report
        .volatile
        .timings_ms
        .insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    if let Some(dir) = &cfg.out {
        report.write(dir)?;
    }
    Ok(report)
}

fn convexity_command(ctx: &mut Ctx, mode: Mode) -> Result<()> {
    let cfg = ctx.cfg;
    let f = spectral_function(cfg)?;
    let stream = ctx.stream.child("convexity");
    let rep = ctx.timed("convexity", || convexity::run_checks(&f, mode, cfg.samples, cfg.rotations, &stream))?;
    if mode != Mode::Eigen {
        ctx.report.assumptions.push(ROTATION_ASSUMPTION.into());
    }
    let margin = match mode {
        Mode::Direct => rep.worst_direct.as_ref().map(|w| w.margin),
        _ => rep.worst_eigen.as_ref().map(|w| w.margin),
    };
    let mut check = CheckRecord::new(
        "bianchi-convexity",
        Some(rep.verdict),
        margin,
        Some(rep.tolerances.verdict_band),
        to_value(&rep),
    );
    check.defect = rep
        .agreement
        .as_ref()
        .is_some_and(|a| a.verdict == CrossVerdict::Disagree);
    ctx.report.checks.push(check);

    if mode == Mode::Cross && cfg.set == "omega-ac" {
        let w = convexity::nonconvexity_witness(cfg.a, cfg.c)?;
        let on_set = 1e-10 * (1.0 + cfg.c);
        let ok = w.margin_r1 <= on_set && w.margin_r2 <= on_set && w.margin_midpoint > cfg.tolerances.witness_midpoint;
        ctx.report.checks.push(CheckRecord::new(
            "nonconvexity-witness",
            Some(if ok { Verdict::Pass } else { Verdict::Fail }),
            Some(w.margin_midpoint),
            Some(cfg.tolerances.witness_midpoint),
            to_value(&w),
        ));
    }

    let records = &rep.records;
    ctx.file("samples.csv", |p| {
        let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
        write_csv(
            p,
            &[
                "index", "lambda1", "lambda2", "lambda3", "condition_one", "condition_two", "direct_margin", "eigen_verdict",
                "direct_verdict",
            ],
            records.iter().map(|r| {
                vec![
                    r.index.to_string(),
                    fmt(r.lambda[0]),
                    fmt(r.lambda[1]),
                    fmt(r.lambda[2]),
                    fmt(r.condition_one),
                    opt(r.condition_two),
                    opt(r.direct_margin),
                    format!("{:?}", r.eigen_verdict).to_uppercase(),
                    r.direct_verdict.map(|v| format!("{v:?}").to_uppercase()).unwrap_or_default(),
                ]
            }),
        )
    })?;
    ctx.file("margins.dat", |p| {
        write_plot(
            p,
            ("index", "eigen_margin"),
            records.iter().map(|r| (r.index as f64, r.eigen_margin())),
        )
    })
}

fn step_control(cfg: &RunConfig) -> StepControl {
    StepControl {
        tol: cfg.tolerances.ode_step,
        ..StepControl::default()
    }
}

fn invariance_command(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = set_spec(cfg)?;
    ctx.report.assumptions.push(TANGENT_CONE_ASSUMPTION.into());
    let stream = ctx.stream.child("invariance");
    let tangency = ctx.timed("tangency", || {
        ode::tangency_check(&spec, cfg.samples, cfg.tolerances.tangency_rel, &stream.child("tangency"))
    })?;
    ctx.report.checks.push(CheckRecord::new(
        "tangent-cone",
        Some(if tangency.pass { Verdict::Pass } else { Verdict::Fail }),
        Some(tangency.worst_margin),
        Some(tangency.tol_rel),
        to_value(&tangency),
    ));
    let inv = ctx.timed("trajectories", || {
        let starts = ode::interior_starts(&spec, cfg.starts, &stream.child("starts"))?;
        ode::invariance_monitor(
            &spec,
            &starts,
            cfg.horizon,
            cfg.scal_stop,
            &step_control(cfg),
            cfg.tolerances.invariance_rel,
        )
    })?;
    ctx.report.checks.push(CheckRecord::new(
        "trajectory-exit",
        Some(if inv.pass { Verdict::Pass } else { Verdict::Fail }),
        Some(inv.worst_exit),
        Some(inv.tol_rel),
        to_value(&inv),
    ));
    ctx.file("starts.csv", |p| {
        write_csv(
            p,
            &["index", "steps", "final_time", "final_scal", "termination", "max_exit", "gronwall_rate"],
            inv.records.iter().map(|r| {
                vec![
                    r.index.to_string(),
                    r.steps.to_string(),
                    fmt(r.final_time),
                    fmt(r.final_scal),
                    to_value(&r.termination).as_str().unwrap_or_default().to_string(),
                    fmt(r.max_exit),
                    fmt(r.gronwall_rate),
                ]
            }),
        )
    })
}

fn scan_command(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let bf = ode::b_formula(cfg.a, cfg.c)?;
    ctx.report.assumptions.push(TANGENT_CONE_ASSUMPTION.into());
    let grid: Vec<f64> = (1..=cfg.grid_steps).map(|k| bf * k as f64 / cfg.grid_steps as f64).collect();
    let stream = ctx.stream.child("scan");
    let scan = ctx.timed("scan", || {
        ode::min_b_scan(cfg.a, cfg.c, &grid, cfg.samples, cfg.tolerances.tangency_rel, &stream)
    })?;
    ctx.report.checks.push(CheckRecord::new(
        "min-b-scan",
        Some(if scan.consistent { Verdict::Pass } else { Verdict::Fail }),
        scan.min_b,
        Some(bf),
        to_value(&scan),
    ));
    ctx.file("scan.csv", |p| {
        write_csv(
            p,
            &["b", "worst_margin", "pass"],
            scan.entries.iter().map(|e| vec![fmt(e.b), fmt(e.worst_margin), e.pass.to_string()]),
        )
    })?;
    ctx.file("scan.dat", |p| {
        write_plot(p, ("b", "worst_margin"), scan.entries.iter().map(|e| (e.b, e.worst_margin)))
    })
}

fn star_command(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = set_spec(cfg)?;
    let lambda = cfg
        .lambda_star
        .ok_or_else(|| Error::Config("star-shape needs lambda_star or b".into()))?;
    let k_radius = cfg.k_radius_factor * cfg.b.unwrap_or(1.0).abs().max(1.0);
    ctx.report.assumptions.push(BALL_ASSUMPTION.into());
    let stream = ctx.stream.child("star-shape");
    let center = CurvatureOperator::identity(3).scale(lambda);
    let star = ctx.timed("star-shape", || {
        let mut batch = boundary_sampler(&spec, SamplerStrategy::RadialRoot, cfg.samples, &stream.child("boundary"))?;
        if spec.constraints.len() > 1 {
            let corners = corner_samples(&spec, cfg.samples.div_ceil(10), &stream.child("corners"))?;
            batch.points.extend(corners.points);
        }
        star_shape_margin(&batch.points, &center, k_radius)
    })?;
    let details = json!({ "center": lambda, "k_radius": k_radius, "result": to_value(&star) });
    ctx.report.checks.push(CheckRecord::new(
        "star-shape",
        Some(if star.a_est > 0.0 { Verdict::Pass } else { Verdict::Fail }),
        Some(star.a_est),
        Some(0.0),
        details,
    ));
    if spec.name == "halfspace-scal" {
        let b = cfg.b.ok_or_else(|| Error::Config("halfspace-scal needs b".into()))?;
        let closed = (3.0 * lambda - b) / 3f64.sqrt();
        ctx.report.checks.push(CheckRecord::at_most(
            "halfspace-closed-form",
            (star.a_est - closed).abs(),
            cfg.tolerances.star_closed_form,
            json!({ "closed_form": closed, "a_est": star.a_est }),
        ));
    }
    Ok(())
}

fn ode_command(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let ctl = step_control(cfg);
    let spec = set_spec(cfg).ok();
    let r0 = CurvatureOperator::diagonal(3, &cfg.lambda0)?;
    let stop = cfg.scal_stop;
    let traj = ctx.timed("trajectory", || ode::integrate_until(&r0, cfg.horizon, &ctl, |r| r.scalar() >= stop))?;
    ctx.report.checks.push(CheckRecord::diagnostic(
        "trajectory",
        Some(traj.last().scalar()),
        json!({
            "steps": traj.times.len() - 1,
            "final_time": traj.times.last(),
            "termination": to_value(&traj.termination),
            "final": traj.last().to_row_major(),
        }),
    ));
    let cons = ctx.timed("consistency", || ode::eigen_vs_matrix_consistency(&r0, cfg.horizon, &ctl, stop))?;
    ctx.report.checks.push(CheckRecord::at_most(
        "eigen-matrix-consistency",
        cons.max_deviation,
        cfg.tolerances.eigen_consistency,
        to_value(&cons),
    ));
    let c0 = cfg.lambda0[0];
    if c0 > 0.0 && cfg.lambda0.iter().all(|&l| l == c0) {
        let t_max = 0.9 / (2.0 * c0);
        let ray = ode::integrate(&r0, t_max, &ctl)?;
        let dev = ray
            .times
            .iter()
            .zip(&ray.states)
            .map(|(&t, s)| {
                let exact = ode::identity_ray_solution(c0, t);
                (s - &CurvatureOperator::identity(3).scale(exact)).norm() / (3f64.sqrt() * exact)
            })
            .fold(0.0, f64::max);
        ctx.report.checks.push(CheckRecord::at_most(
            "closed-form",
            dev,
            cfg.tolerances.closed_form_rel,
            json!({ "c0": c0, "t_max": t_max, "steps": ray.times.len() - 1 }),
        ));
    }
    ctx.file("trajectory.csv", |p| ode::write_trajectory_csv(p, &traj, spec.as_ref()))?;
    ctx.file("scal.dat", |p| {
        write_plot(p, ("t", "scal"), traj.times.iter().zip(&traj.states).map(|(&t, s)| (t, s.scalar())))
    })
}

fn sim_config(cfg: &RunConfig) -> SimConfig {
    let rd = &cfg.rd;
    let mut params = set_params(cfg);
    if cfg.set == "ball" {
        params.retain(|k, _| k == "radius");
    }
    SimConfig {
        g: rd.grid,
        dims: rd.dims,
        dt: rd.dt.expect("resolved"),
        t_end: rd.t_end,
        cfl_safety: rd.cfl_safety,
        reaction_on: rd.reaction_on,
        seed: cfg.seed,
        cadence: rd.cadence,
        blow_up: rd.blow_up,
        set: cfg.set.clone(),
        set_params: params,
        init: rd.init.clone(),
        spot_band: rd.spot_band,
        spot_epsilon: rd.spot_epsilon,
    }
}

fn rd_command(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let sim = sim_config(cfg);
    sim.validate()?;
    let spec = sim.set_spec()?;
    ctx.report.assumptions.push(GRID_ASSUMPTION.into());
    let run = ctx.timed("simulation", || rd::run(&sim, rd::initial_field(&sim, &spec)?))?;
    let convex = matches!(spec.name.as_str(), "psd-cone" | "ball" | "norm-ball" | "halfspace-scal" | "scal-halfspace");
    let exit = run
        .series
        .iter()
        .map(|d| d.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max) / (1.0 + d.max_norm))
        .fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "steps": run.steps,
        "termination": to_value(&run.termination),
        "final_time": run.series.last().map(|d| d.t),
        "constraints": run.constraint_names,
        "series": to_value(&run.series),
    });
    if convex {
        ctx.report
            .checks
            .push(CheckRecord::at_most("containment", exit, cfg.tolerances.rd_containment, summary));
    } else {
        ctx.report.checks.push(CheckRecord::diagnostic("exploratory-exit", Some(exit), summary));
    }
    let h = sim.h();
    ctx.report.checks.push(CheckRecord::at_most(
        "min-scal-monotone",
        rd::min_scal_defect(&run.series),
        sim.dt + h * h,
        json!({ "dt": sim.dt, "h": h }),
    ));
    let spot = run.series.iter().filter_map(|d| d.spot).fold(None, |a: Option<f64>, s| Some(a.map_or(s, |a| a.max(s))));
    ctx.report.checks.push(CheckRecord::diagnostic(
        "laplace-spot-check",
        spot,
        json!({ "band": sim.spot_band, "epsilon": sim.spot_epsilon, "cells_found": spot.is_some() }),
    ));

    // Spatially constant field against the fixed-step ODE with the same dt.
    let c0 = match sim.init {
        InitialField::Constant { value } => value,
        InitialField::Fourier { mean, .. } | InitialField::FourierInSet { mean, .. } => mean,
    };
    let t_const = if c0 > 0.0 { sim.t_end.min(0.4 / c0) } else { sim.t_end.min(0.2) };
    let steps = (t_const / sim.dt).round() as usize;
    let dev = ctx.timed("constant-run", || {
        let field = rd::MatrixField::constant(8, sim.dims, Matrix3::identity() * c0)?;
        let mut f = field.clone();
        for _ in 0..steps {
            f = rd::step(&f, sim.dt, sim.reaction_on);
        }
        let rhs = ode::phi_rhs(3);
        let y = if sim.reaction_on {
            ode::integrate_fixed(rhs, DVector::from_column_slice(field.cells[0].as_slice()), sim.dt, steps)
                .pop()
                .expect("non-empty")
        } else {
            DVector::from_column_slice(field.cells[0].as_slice())
        };
        Ok(f.cells
            .iter()
            .map(|c| (DVector::from_column_slice(c.as_slice()) - &y).norm() / (1.0 + y.norm()))
            .fold(0.0, f64::max))
    })?;
    ctx.report.checks.push(CheckRecord::at_most(
        "constant-run-vs-ode",
        dev,
        cfg.tolerances.rd_ode_match,
        json!({ "c0": c0, "steps": steps, "t": steps as f64 * sim.dt }),
    ));

    ctx.file("diagnostics.csv", |p| rd::write_diagnostics_csv(p, &run))?;
    ctx.file("min_eig.dat", |p| write_plot(p, ("t", "min_eig"), run.series.iter().map(|d| (d.t, d.min_eig))))?;
    ctx.file("min_scal.dat", |p| write_plot(p, ("t", "min_scal"), run.series.iter().map(|d| (d.t, d.min_scal))))
}

fn calibrate_command(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let tol = &cfg.tolerances;
    let mut per_n = Vec::new();
    for n in 3..=6 {
        let id = CurvatureOperator::identity(n);
        let diff = &id.sharp()? - &id.scale(n as f64 - 2.0);
        per_n.push((n, diff.matrix().amax()));
    }
    let worst = per_n.iter().map(|p| p.1).fold(0.0, f64::max);
    ctx.report.checks.push(CheckRecord::at_most(
        "sharp-identity",
        worst,
        tol.sharp_identity,
        json!({ "per_dimension": per_n }),
    ));

    let samples = 1000;
    let stream = ctx.stream.child("calibrate");
    let (adj, trace) = ctx.timed("sharp-samples", || {
        let mut adj: f64 = 0.0;
        let mut trace = f64::INFINITY;
        for i in 0..samples {
            let m = random_symmetric(3, &mut stream.rng("sharp", i as u64));
            adj = adj.max((to_matrix3(&sharp_structure(3, &m)?) - adjugate3(&to_matrix3(&m))).amax());
            let r = CurvatureOperator::new(3, m)?;
            let s = r.scalar();
            trace = trace.min((r.phi()?.scalar() - 2.0 / 3.0 * s * s) / (1.0 + r.norm() * r.norm()));
        }
        Ok((adj, trace))
    })?;
    ctx.report.checks.push(CheckRecord::at_most(
        "sharp-adjugate",
        adj,
        tol.sharp_adjugate,
        json!({ "samples": samples }),
    ));
    ctx.report.checks.push(CheckRecord::new(
        "trace-phi-bound",
        Some(Verdict::from_lower_margin(trace, 1e-12)),
        Some(trace),
        Some(0.0),
        json!({ "samples": samples, "normalization": "1 + |R|^2" }),
    ));

    let basis = ctx.timed("bianchi-kernel", || tuple_space_basis(3))?;
    let gap = basis.spectral_gap();
    let ok = basis.dim() == 15 && gap >= tol.kernel_gap;
    ctx.report.checks.push(CheckRecord::new(
        "bianchi-kernel",
        Some(if ok { Verdict::Pass } else { Verdict::Fail }),
        Some(gap),
        Some(tol.kernel_gap),
        json!({ "dimension": basis.dim(), "ambient": basis.ambient_dim, "rank": basis.constraint_rank }),
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Status;

    fn cfg(command: &str) -> RunConfig {
        RunConfig::for_command(command)
    }

    #[test]
    fn resolution_fills_defaults() {
        let r = resolve(&cfg("star-shape")).unwrap();
        assert_eq!(r.set, "omega-tilde-ac");
        let b = r.b.unwrap();
        assert!((b - 16.4933).abs() < 1e-4);
        assert_eq!(r.lambda_star, Some(1.1 * b));
        let r = resolve(&cfg("simulate-rd")).unwrap();
        assert_eq!(r.set, "psd-cone");
        assert!(r.rd.dt.unwrap() > 0.0);
    }

    #[test]
    fn usage_errors_map_to_64() {
        let e = run_command(&cfg("nope")).unwrap_err();
        assert_eq!(exit_code(&e), 64);
        let mut c = cfg("check-bianchi-eigen");
        c.set = "psd-cone".into();
        assert_eq!(exit_code(&run_command(&c).unwrap_err()), 64);
        let mut c = cfg("simulate-rd");
        c.rd.grid = 16;
        c.rd.dt = Some(1.0);
        assert_eq!(exit_code(&run_command(&c).unwrap_err()), 64);
    }

    #[test]
    fn calibrate_passes() {
        let r = run_command(&cfg("calibrate")).unwrap();
        assert_eq!(r.status, Status::Pass, "{}", r.stable_body());
        assert_eq!(r.checks.len(), 4);
    }

    #[test]
    fn eigen_check_verdicts() {
        let mut c = cfg("check-bianchi-eigen");
        c.samples = 200;
        assert_eq!(run_command(&c).unwrap().status, Status::Pass);
        c.a = 0.45;
        let r = run_command(&c).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.warnings.len(), 1);
        assert!(r.check("bianchi-convexity").unwrap().details["worst_eigen"]["lambda"].is_array());
    }

    #[test]
    fn halfspace_star_shape_matches_closed_form() {
        let mut c = cfg("star-shape");
        c.set = "halfspace-scal".into();
        c.samples = 100;
        let r = run_command(&c).unwrap();
        assert_eq!(r.status, Status::Pass, "{}", r.stable_body());
        assert!(r.check("halfspace-closed-form").unwrap().margin.unwrap() <= 1e-8);
    }

    #[test]
    fn simulate_ode_on_the_identity_ray() {
        let mut c = cfg("simulate-ode");
        c.lambda0 = [1.0; 3];
        let dir = tempfile::tempdir().unwrap();
        c.out = Some(dir.path().to_path_buf());
        let r = run_command(&c).unwrap();
        assert_eq!(r.status, Status::Pass, "{}", r.stable_body());
        assert!(r.check("closed-form").is_some());
        for f in ["report.json", "trajectory.csv", "scal.dat"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let body = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
        let v: Value = serde_json::from_str(&body).unwrap();
        let again: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(run_command(&RunConfig { out: None, ..again }).unwrap().stable_body(), {
            let mut r2 = r.clone();
            r2.config.out = None;
            r2.files.clear();
            r2.stable_body()
        });
    }

    #[test]
    fn small_rd_run_passes_and_is_reproducible() {
        let mut c = cfg("simulate-rd");
        c.rd.grid = 16;
        c.rd.t_end = 0.1;
        c.rd.cadence = 10;
        let a = run_command(&c).unwrap();
        assert_eq!(a.status, Status::Pass, "{}", a.stable_body());
        assert_eq!(a.stable_body(), run_command(&c).unwrap().stable_body());
    }
}
