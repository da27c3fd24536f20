//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! The suite drives the command layer with seed 42, then drives it again and
//! compares the reports byte for byte (volatile fields excluded).

// Negated comparisons make NaN count as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::{Duration, Instant};

use bianchi_core::bianchi::tuple_space_basis;
use bianchi_core::commands::run_command;
use bianchi_core::convexity::nonconvexity_witness;
use bianchi_core::ode::b_formula;
use bianchi_core::report::{Report, RunConfig, Status};

const SEED: u64 = 42;
const PASSING_A: [f64; 4] = [0.34, 0.35, 0.37, 0.39];
const FAILING_A: [f64; 2] = [0.42, 0.45];
const C_VALUES: [f64; 3] = [0.5, 1.0, 2.0];

struct Run {
    criterion: usize,
    label: String,
    report: Report,
    elapsed: Duration,
}

fn config(command: &str, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        ..RunConfig::for_command(command)
    }
}

fn suite(seed: u64) -> Vec<Run> {
    let mut plan: Vec<(usize, String, RunConfig)> = vec![(1, "calibrate".into(), config("calibrate", seed))];
    for a in PASSING_A.iter().chain(&FAILING_A) {
        for c in C_VALUES {
            let mut cfg = config("cross-validate", seed);
            cfg.a = *a;
            cfg.c = c;
            cfg.samples = 500;
            cfg.rotations = 8;
            plan.push((3, format!("cross-validate a={a} c={c}"), cfg));
        }
    }
    plan.push((5, "check-ode-invariance".into(), config("check-ode-invariance", seed)));
    plan.push((5, "min-b-scan".into(), config("min-b-scan", seed)));
    let mut ray = config("simulate-ode", seed);
    ray.lambda0 = [1.0; 3];
    plan.push((6, "simulate-ode c0=1".into(), ray));
    plan.push((6, "simulate-ode diag(1,2,3)".into(), config("simulate-ode", seed)));
    plan.push((7, "star-shape omega-tilde-ac".into(), config("star-shape", seed)));
    let mut half = config("star-shape", seed);
    half.set = "halfspace-scal".into();
    plan.push((7, "star-shape halfspace-scal".into(), half));
    plan.push((8, "simulate-rd".into(), config("simulate-rd", seed)));

    plan.into_iter()
        .map(|(criterion, label, cfg)| {
            let t = Instant::now();
            let report = run_command(&cfg).unwrap_or_else(|e| panic!("{label}: {e}"));
            Run {
                criterion,
                label,
                report,
                elapsed: t.elapsed(),
            }
        })
        .collect()
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, summary: String) -> Self {
        if failures.is_empty() {
            Self {
                pass: true,
                detail: summary,
            }
        } else {
            Self {
                pass: false,
                detail: format!("{summary}; {}", failures.join("; ")),
            }
        }
    }
}

fn of(runs: &[Run], criterion: usize) -> impl Iterator<Item = &Run> {
    runs.iter().filter(move |r| r.criterion == criterion)
}

fn find<'a>(runs: &'a [Run], label: &str) -> &'a Report {
    &runs.iter().find(|r| r.label == label).expect("planned run").report
}

fn margin(r: &Report, check: &str) -> f64 {
    r.check(check).and_then(|c| c.margin).unwrap_or(f64::NAN)
}

fn passed(r: &Report, check: &str) -> bool {
    r.check(check).and_then(|c| c.verdict).is_some_and(|v| v.passed())
}

fn time_limit(failures: &mut Vec<String>, elapsed: Duration, limit: Duration) {
    if elapsed > limit {
        failures.push(format!("runtime {elapsed:.2?} exceeds {limit:?}"));
    }
}

fn criterion_1(runs: &[Run], elapsed: Duration) -> Outcome {
    let r = find(runs, "calibrate");
    let mut f = Vec::new();
    let id = margin(r, "sharp-identity");
    let adj = margin(r, "sharp-adjugate");
    if !(id <= 1e-10) {
        f.push(format!("sharp(I) defect {id:e}"));
    }
    if !(adj <= 1e-9) {
        f.push(format!("adjugate defect {adj:e}"));
    }
    let samples = &r.check("sharp-adjugate").unwrap().details["samples"];
    if samples.as_u64() != Some(1000) {
        f.push(format!("sample count {samples}"));
    }
    time_limit(&mut f, elapsed, Duration::from_secs(10));
    Outcome::new(f, format!("sharp(I) defect {id:.1e} for n = 3..6, adjugate defect {adj:.1e} on 1000 samples"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let basis = tuple_space_basis(3).expect("n = 3 supported");
    let elapsed = t.elapsed();
    let mut f = Vec::new();
    if basis.dim() != 15 {
        f.push(format!("kernel dimension {}", basis.dim()));
    }
    if !(basis.spectral_gap() >= 1e6) {
        f.push(format!("singular-value gap {:e}", basis.spectral_gap()));
    }
    time_limit(&mut f, elapsed, Duration::from_secs(1));
    Outcome::new(
        f,
        format!("dimension {} of {}, gap {:.1e}", basis.dim(), basis.ambient_dim, basis.spectral_gap()),
    )
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let mut f = Vec::new();
    let mut worst_pass_direct = f64::NEG_INFINITY;
    let mut elapsed = Duration::ZERO;
    for run in of(runs, 3) {
        elapsed += run.elapsed;
        let d = &run.report.check("bianchi-convexity").expect("convexity check").details;
        let a = run.report.config.a;
        let agreement = d["agreement"]["verdict"].as_str().unwrap_or("missing");
        let samples = d["samples_used"].as_u64().unwrap_or(0);
        if samples < 500 {
            f.push(format!("{}: only {samples} samples", run.label));
        }
        if d["rotations"].as_u64() != Some(8) {
            f.push(format!("{}: rotation budget {}", run.label, d["rotations"]));
        }
        if PASSING_A.contains(&a) {
            let direct = d["worst_direct"]["margin"].as_f64().unwrap_or(f64::NAN);
            worst_pass_direct = worst_pass_direct.max(direct);
            if agreement != "agree-pass" {
                f.push(format!("{}: {agreement}", run.label));
            }
            if !(direct <= 1e-8) {
                f.push(format!("{}: direct margin {direct:e}", run.label));
            }
        } else {
            let both_fail = d["eigen_verdict"] == "FAIL" && d["direct_verdict"] == "FAIL";
            let witnessed = d["worst_eigen"]["lambda"].is_array() && d["worst_direct"]["lambda"].is_array();
            if !(both_fail && witnessed) {
                f.push(format!("{}: eigen {} direct {}", run.label, d["eigen_verdict"], d["direct_verdict"]));
            }
        }
    }
    time_limit(&mut f, elapsed, Duration::from_secs(300));
    Outcome::new(
        f,
        format!(
            "{} configurations, worst passing direct margin {worst_pass_direct:.3e}, a ∈ {{0.42, 0.45}} fail with witnesses ({elapsed:.1?})",
            of(runs, 3).count()
        ),
    )
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let w = nonconvexity_witness(0.35, 1.0).expect("valid parameters");
    let elapsed = t.elapsed();
    let mut f = Vec::new();
    if !(w.margin_r1 <= 1e-12 && w.margin_r2 <= 1e-12) {
        f.push(format!("endpoint margins {:e}, {:e}", w.margin_r1, w.margin_r2));
    }
    if !(w.margin_midpoint > 1e-3) {
        f.push(format!("midpoint margin {:e}", w.margin_midpoint));
    }
    time_limit(&mut f, elapsed, Duration::from_secs(1));
    Outcome::new(f, format!("midpoint margin {:.4}", w.margin_midpoint))
}

fn criterion_5(runs: &[Run]) -> Outcome {
    let inv = find(runs, "check-ode-invariance");
    let scan = find(runs, "min-b-scan");
    let mut f = Vec::new();
    let b = b_formula(0.35, 1.0).unwrap();
    if (inv.config.b.unwrap() - b).abs() > 0.0 || (b - 16.4933).abs() > 1e-4 {
        f.push(format!("b = {:?}", inv.config.b));
    }
    let tangency = &inv.check("tangent-cone").unwrap().details;
    let points = tangency["samples"].as_u64().unwrap_or(0);
    if points < 500 || !passed(inv, "tangent-cone") {
        f.push(format!("tangency over {points} points, worst {:e}", margin(inv, "tangent-cone")));
    }
    let traj = &inv.check("trajectory-exit").unwrap().details;
    let starts = traj["starts"].as_u64().unwrap_or(0);
    let reached = traj["records"]
        .as_array()
        .map(|r| r.iter().all(|s| s["final_scal"].as_f64().is_some_and(|x| x >= 1e3)))
        .unwrap_or(false);
    if starts != 100 || !reached || !passed(inv, "trajectory-exit") {
        f.push(format!(
            "{starts} starts, all reached scal 1e3: {reached}, worst exit {:e}",
            margin(inv, "trajectory-exit")
        ));
    }
    let min_b = margin(scan, "min-b-scan");
    if !(min_b <= b) {
        f.push(format!("min_b {min_b} exceeds {b}"));
    }
    let elapsed = of(runs, 5).map(|r| r.elapsed).sum::<Duration>();
    time_limit(&mut f, elapsed, Duration::from_secs(300));
    Outcome::new(
        f,
        format!(
            "b = {b:.4}, tangency worst {:.2e} on {points} points, exit worst {:.2e} over {starts} starts, min_b {min_b:.3}",
            margin(inv, "tangent-cone"),
            margin(inv, "trajectory-exit")
        ),
    )
}

fn criterion_6(runs: &[Run]) -> Outcome {
    let ray = find(runs, "simulate-ode c0=1");
    let generic = find(runs, "simulate-ode diag(1,2,3)");
    let mut f = Vec::new();
    let closed = margin(ray, "closed-form");
    let c1 = margin(ray, "eigen-matrix-consistency");
    let c2 = margin(generic, "eigen-matrix-consistency");
    if !(closed <= 1e-6) {
        f.push(format!("closed-form deviation {closed:e}"));
    }
    if !(c1.max(c2) <= 1e-6) {
        f.push(format!("eigen-vs-matrix deviation {:e}", c1.max(c2)));
    }
    let elapsed = of(runs, 6).map(|r| r.elapsed).sum::<Duration>();
    time_limit(&mut f, elapsed, Duration::from_secs(10));
    Outcome::new(f, format!("closed-form {closed:.1e}, eigen-vs-matrix {:.1e}", c1.max(c2)))
}

fn criterion_7(runs: &[Run]) -> Outcome {
    let tilde = find(runs, "star-shape omega-tilde-ac");
    let half = find(runs, "star-shape halfspace-scal");
    let mut f = Vec::new();
    let b = tilde.config.b.unwrap();
    if tilde.config.lambda_star != Some(1.1 * b) {
        f.push(format!("center {:?}", tilde.config.lambda_star));
    }
    if tilde.check("star-shape").unwrap().details["k_radius"].as_f64() != Some(10.0 * b) {
        f.push("K is not ball(10·b)".into());
    }
    let a_est = margin(tilde, "star-shape");
    if !(a_est > 0.0) {
        f.push(format!("a_est {a_est:e}"));
    }
    let closed = margin(half, "halfspace-closed-form");
    if !(closed <= 1e-8) || !passed(half, "star-shape") {
        f.push(format!("halfspace closed-form defect {closed:e}"));
    }
    let elapsed = of(runs, 7).map(|r| r.elapsed).sum::<Duration>();
    time_limit(&mut f, elapsed, Duration::from_secs(60));
    Outcome::new(f, format!("a_est {a_est:.3} about {:.3}·I, halfspace defect {closed:.1e}", 1.1 * b))
}

fn criterion_8(runs: &[Run]) -> Outcome {
    let run = of(runs, 8).next().expect("rd run");
    let r = &run.report;
    let mut f = Vec::new();
    if r.config.rd.grid != 128 || r.config.rd.dims != 1 || r.config.set != "psd-cone" {
        f.push("configuration is not G = 128, 1D, PSD".into());
    }
    for check in ["containment", "min-scal-monotone", "constant-run-vs-ode"] {
        if !passed(r, check) {
            f.push(format!("{check}: {:e}", margin(r, check)));
        }
    }
    let d = &r.check("containment").unwrap().details;
    time_limit(&mut f, run.elapsed, Duration::from_secs(120));
    Outcome::new(
        f,
        format!(
            "{} steps to t = {:.4} ({}), containment {:.1e}, min-scal defect {:.1e}, constant run {:.1e} ({:.1?})",
            d["steps"],
            d["final_time"].as_f64().unwrap_or(f64::NAN),
            d["termination"].as_str().unwrap_or("?"),
            margin(r, "containment"),
            margin(r, "min-scal-monotone"),
            margin(r, "constant-run-vs-ode"),
            run.elapsed
        ),
    )
}

fn criterion_9(first: &[Run]) -> Outcome {
    let second = suite(SEED);
    let mut f = Vec::new();
    for (a, b) in first.iter().zip(&second) {
        if a.report.stable_body() != b.report.stable_body() {
            f.push(format!("{} differs", a.label));
        }
    }
    Outcome::new(f, format!("{} reports compared", first.len()))
}

#[test]
fn acceptance() {
    let t = Instant::now();
    let runs = suite(SEED);
    let c1_elapsed = runs.iter().find(|r| r.label == "calibrate").unwrap().elapsed;
    let outcomes = [
        (1, "calibration identities", criterion_1(&runs, c1_elapsed)),
        (2, "Bianchi constraint space", criterion_2()),
        (3, "Bianchi-convexity of the pinching sets", criterion_3(&runs)),
        (4, "non-convexity witness", criterion_4()),
        (5, "ODE-invariance with the closed-form b", criterion_5(&runs)),
        (6, "integrator oracle", criterion_6(&runs)),
        (7, "star-shapedness", criterion_7(&runs)),
        (8, "maximum-principle demonstrator", criterion_8(&runs)),
        (9, "determinism", criterion_9(&runs)),
    ];
    for run in &runs {
        let status = match run.report.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Defect => "DEFECT",
        };
        eprintln!("  run {:<32} status {status:<6} {:.2?}", run.label, run.elapsed);
    }
    for (id, name, o) in &outcomes {
        println!("criterion {id} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance suite finished in {:.1?}", t.elapsed());
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.2.pass).map(|o| o.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
