//! Run configuration, report container and output writers.
//!
//! Reports are pretty-printed JSON with a fixed field order. Everything that
//! may differ between identical runs (wall-clock time, timings) lives under
//! the `volatile` key, which [`Report::stable_body`] drops.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::convexity::Verdict;
use crate::error::{Error, Result};
use crate::rd::InitialField;

pub const TOOLKIT_VERSION: &str = concat!("bianchi-core ", env!("CARGO_PKG_VERSION"));

pub const COMMANDS: [&str; 9] = [
    "check-bianchi-eigen",
    "check-bianchi-direct",
    "cross-validate",
    "check-ode-invariance",
    "min-b-scan",
    "star-shape",
    "simulate-ode",
    "simulate-rd",
    "calibrate",
];

/// Overridable numeric tolerances. Keys match `--tol key=value`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tangent-cone tolerance, scaled by `1 + ‖Φ(R)‖`.
    pub tangency_rel: f64,
    /// Relative trajectory exit tolerance, scaled by `1 + ‖R‖`.
    pub invariance_rel: f64,
    /// Adaptive integrator error target per unit time.
    pub ode_step: f64,
    pub closed_form_rel: f64,
    pub eigen_consistency: f64,
    pub sharp_identity: f64,
    pub sharp_adjugate: f64,
    pub kernel_gap: f64,
    pub star_closed_form: f64,
    pub witness_midpoint: f64,
    pub rd_containment: f64,
    pub rd_ode_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tangency_rel: 1e-6,
            invariance_rel: 1e-6,
            ode_step: 1e-8,
            closed_form_rel: 1e-6,
            eigen_consistency: 1e-6,
            sharp_identity: 1e-10,
            sharp_adjugate: 1e-9,
            kernel_gap: 1e6,
            star_closed_form: 1e-8,
            witness_midpoint: 1e-3,
            rd_containment: 1e-6,
            rd_ode_match: 1e-8,
        }
    }
}

impl Tolerances {
    /// Apply one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("tolerance override {assignment:?} is not key=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("tolerance {key} needs a number, got {value:?}")))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Config(format!("tolerance {key} must be positive and finite")));
        }
        let mut map = serde_json::to_value(&*self).expect("tolerances serialize");
        let slot = map
            .get_mut(key.trim())
            .ok_or_else(|| Error::Config(format!("unknown tolerance {key:?}")))?;
        *slot = Value::from(value);
        *self = serde_json::from_value(map).expect("same shape");
        Ok(())
    }
}

/// Grid simulator settings; `dt = None` resolves to `0.8·` the CFL bound.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RdSettings {
    pub grid: usize,
    pub dims: usize,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub reaction_on: bool,
    pub cadence: usize,
    pub blow_up: f64,
    pub init: InitialField,
    pub spot_band: f64,
    pub spot_epsilon: f64,
}

impl Default for RdSettings {
    fn default() -> Self {
        Self {
            grid: 128,
            dims: 1,
            dt: None,
            t_end: 1.0,
            cfl_safety: 0.5,
            reaction_on: true,
            cadence: 100,
            blow_up: 1e3,
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

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub seed: u64,
    /// Empty selects the command's default set.
    pub set: String,
    /// Eigenvalue function for `omega-f`.
    pub function: Option<String>,
    pub a: f64,
    pub c: f64,
    /// Scalar-curvature floor; `None` resolves to the closed-form `b` for `(a, c)`.
    pub b: Option<f64>,
    /// Star-shape center `λ_star·I`; `None` resolves to `1.1·b`.
    pub lambda_star: Option<f64>,
    pub radius: f64,
    pub samples: usize,
    pub rotations: usize,
    pub starts: usize,
    pub horizon: f64,
    pub scal_stop: f64,
    /// `K = ball(k_radius_factor·b)` for star-shape checks.
    pub k_radius_factor: f64,
    /// The b-scan grid is `b_formula·k/grid_steps`, `k = 1..=grid_steps`.
    pub grid_steps: usize,
    /// Initial spectrum for `simulate-ode`.
    pub lambda0: [f64; 3],
    pub tolerances: Tolerances,
    pub rd: RdSettings,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            seed: 42,
            set: String::new(),
            function: None,
            a: 0.35,
            c: 1.0,
            b: None,
            lambda_star: None,
            radius: 1.0,
            samples: 500,
            rotations: crate::convexity::DEFAULT_ROTATIONS,
            starts: 100,
            horizon: 10.0,
            scal_stop: 1e3,
            k_radius_factor: 10.0,
            grid_steps: 20,
            lambda0: [1.0, 2.0, 3.0],
            tolerances: Tolerances::default(),
            rd: RdSettings::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn for_command(command: &str) -> Self {
        Self {
            command: command.into(),
            ..Self::default()
        }
    }

    /// Parse JSON, or TOML when the extension is `.toml`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(Error::Config(format!(
                "unknown command {:?}; expected one of {}",
                self.command,
                COMMANDS.join(", ")
            )));
        }
        let mut nums = vec![
            ("a", self.a),
            ("c", self.c),
            ("radius", self.radius),
            ("horizon", self.horizon),
            ("scal_stop", self.scal_stop),
            ("k_radius_factor", self.k_radius_factor),
        ];
        nums.extend(self.b.map(|b| ("b", b)));
        nums.extend(self.lambda_star.map(|l| ("lambda_star", l)));
        nums.extend(self.lambda0.iter().map(|&l| ("lambda0", l)));
        if let Some((k, v)) = nums.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("{k} must be finite, got {v}")));
        }
        if self.samples == 0 || self.grid_steps == 0 {
            return Err(Error::Config("samples and grid_steps must be positive".into()));
        }
        Ok(())
    }

    /// Range warnings that do not stop the run.
    pub fn warnings(&self) -> Vec<String> {
        let uses_ac = matches!(self.set.as_str(), "omega-ac" | "omega-tilde-ac") || self.command == "min-b-scan";
        if uses_ac && !(self.a > 1.0 / 3.0 && self.a < 0.4) {
            vec![format!("a = {} lies outside (1/3, 2/5); Bianchi-convexity is only expected inside", self.a)]
        } else {
            Vec::new()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// The tool contradicted itself; not a statement about the set.
    Defect,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::Defect => 70,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// `None` for diagnostics that never decide the verdict.
    pub verdict: Option<Verdict>,
    /// Self-consistency failure of the tool.
    pub defect: bool,
    pub margin: Option<f64>,
    pub tolerance: Option<f64>,
    pub details: Value,
}

impl CheckRecord {
    pub fn new(name: &str, verdict: Option<Verdict>, margin: Option<f64>, tolerance: Option<f64>, details: Value) -> Self {
        Self {
            name: name.into(),
            verdict,
            defect: false,
            margin,
            tolerance,
            details,
        }
    }

    /// `value ≤ tol` passes.
    pub fn at_most(name: &str, value: f64, tol: f64, details: Value) -> Self {
        let v = if value <= tol { Verdict::Pass } else { Verdict::Fail };
        Self::new(name, Some(v), Some(value), Some(tol), details)
    }

    pub fn diagnostic(name: &str, margin: Option<f64>, details: Value) -> Self {
        Self::new(name, None, margin, None, details)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub dimension: usize,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Volatile {
    pub timestamp_unix: u64,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub toolkit: String,
    pub command: String,
    pub config: RunConfig,
    pub fingerprint: Fingerprint,
    pub warnings: Vec<String>,
    /// Scope statements attached to the verdict.
    pub assumptions: Vec<String>,
    pub status: Status,
    pub checks: Vec<CheckRecord>,
    /// Sibling files written next to the report, relative names.
    pub files: Vec<String>,
    pub volatile: Volatile,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self {
            toolkit: TOOLKIT_VERSION.into(),
            command: config.command.clone(),
            fingerprint: Fingerprint {
                seed: config.seed,
                dimension: 3,
            },
            warnings: config.warnings(),
            config,
            assumptions: Vec::new(),
            status: Status::Pass,
            checks: Vec::new(),
            files: Vec::new(),
            volatile: Volatile {
                timestamp_unix: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                timings_ms: BTreeMap::new(),
            },
        }
    }

    /// Fold check verdicts into the status: any defect wins, then any failure.
    pub fn finish(&mut self) {
        self.status = if self.checks.iter().any(|c| c.defect) {
            Status::Defect
        } else if self.checks.iter().any(|c| c.verdict == Some(Verdict::Fail)) {
            Status::Fail
        } else {
            Status::Pass
        };
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// The report without its `volatile` field; equal inputs give equal bodies.
    pub fn stable_body(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        if let Value::Object(map) = &mut v {
            map.remove("volatile");
        }
        serde_json::to_string_pretty(&v).expect("reports serialize") + "\n"
    }

    /// Write `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Gnuplot-readable two-column file with a `#` header line.
pub fn write_plot(path: &Path, header: (&str, &str), rows: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut text = format!("# {} {}\n", header.0, header.1);
    for (x, y) in rows {
        text.push_str(&format!("{} {}\n", crate::ode::fmt(x), crate::ode::fmt(y)));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write a CSV with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::ode::csv_error(path, e))?;
    w.write_record(header).map_err(|e| crate::ode::csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| crate::ode::csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
