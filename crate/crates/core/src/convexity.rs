//! Bianchi-convexity of `Ω_f = {f(λ(R)) ≤ 0}` in 𝒜₃.
//!
//! Two independent checkers run on a shared sample of `f⁻¹(0)`:
//!
//! * the eigenvalue criterion: ordered partials plus a Hessian inequality on
//!   `ker df_λ` involving `Zᵢ = (∂ₖf − ∂ⱼf)/(λₖ − λⱼ)`;
//! * the direct check: the top eigenvalue of `T ↦ Σᵢ II(Tᵢ,Tᵢ)` on tuples
//!   that satisfy the second Bianchi identity and are tangent to ∂Ω, maximized
//!   over a sample of orthonormal bases.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::bianchi::tangent_bianchi_subspace;
use crate::curvature::CurvatureOperator;
use crate::error::{Error, Result};
use crate::geometry::{gap_threshold, BoundaryPoint, EigenFunction, SetSpec, GRADIENT_GUARD};
use crate::linalg::{complement_basis, random_rotation, smallest_eigenvalue, top_eigenvalue};
use crate::rng::SeedStream;

/// Width of the marginal / indeterminate band around zero.
pub const VERDICT_BAND: f64 = 1e-6;

pub const DEFAULT_ROTATIONS: usize = 8;

const ATTEMPTS_PER_SAMPLE: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    /// Within the band on the failing side of zero; counts as a pass.
    Marginal,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }

    /// `margin ≥ 0` passes (lower-is-worse convention).
    pub fn from_lower_margin(margin: f64, band: f64) -> Self {
        if margin >= 0.0 {
            Verdict::Pass
        } else if margin >= -band {
            Verdict::Marginal
        } else {
            Verdict::Fail
        }
    }

    /// `margin ≤ 0` passes (higher-is-worse convention).
    pub fn from_upper_margin(margin: f64, band: f64) -> Self {
        Self::from_lower_margin(-margin, band)
    }

    fn and(self, other: Self) -> Self {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Marginal, _) | (_, Verdict::Marginal) => Verdict::Marginal,
            _ => Verdict::Pass,
        }
    }
}

fn sorted_gaps_ok(lambda: &[f64; 3]) -> Result<()> {
    let norm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let guard = gap_threshold(norm);
    let gap = (lambda[1] - lambda[0]).min(lambda[2] - lambda[1]);
    if !(gap >= guard) {
        return Err(Error::DegenerateSpectrum { gap, required: guard });
    }
    Ok(())
}

/// `(Z₁, Z₂, Z₃)` at a sorted spectrum with gaps at least `10⁻⁴·(1+‖λ‖)`.
pub fn z_values(f: &dyn EigenFunction, lambda: &[f64; 3]) -> Result<[f64; 3]> {
    sorted_gaps_ok(lambda)?;
    let d = f.gradient(lambda);
    let z = |j: usize, k: usize| (d[k] - d[j]) / (lambda[k] - lambda[j]);
    Ok([z(1, 2), z(0, 2), z(0, 1)])
}

/// `min(∂₂f − ∂₁f, ∂₃f − ∂₂f)`; non-negative iff the partials are ordered.
pub fn condition_one(f: &dyn EigenFunction, lambda: &[f64; 3]) -> Result<f64> {
    sorted_gaps_ok(lambda)?;
    let d = f.gradient(lambda);
    Ok((d[1] - d[0]).min(d[2] - d[1]))
}

fn restricted_min(k: &DMatrix<f64>, h: &Matrix3<f64>) -> Result<f64> {
    let hd = DMatrix::from_fn(3, 3, |i, j| h[(i, j)]);
    smallest_eigenvalue(&(k.transpose() * hd * k))
}

/// Minimum over unit `x ∈ ker df_λ` of `Hess f(x,x) + 2·min_k c_k x_k²`,
/// with `c_k = ZᵢZⱼ/(Zᵢ+Zⱼ)` (zero when `Zᵢ = Zⱼ = 0`); plain `Hess f` when all `Z` vanish.
pub fn condition_two(f: &dyn EigenFunction, lambda: &[f64; 3]) -> Result<f64> {
    let z = z_values(f, lambda)?;
    let d = Vector3::from(f.gradient(lambda));
    if d.norm() < GRADIENT_GUARD {
        return Err(Error::Regularity {
            norm: d.norm(),
            guard: GRADIENT_GUARD,
        });
    }
    let kernel = complement_basis(&DVector::from_column_slice(d.as_slice()));
    let h = f.hessian(lambda);
    let ztol = 1e-12 * (1.0 + d.amax());
    if z.iter().all(|v| v.abs() <= ztol) {
        return restricted_min(&kernel, &h);
    }
    let mut margin = f64::INFINITY;
    for k in 0..3 {
        let (i, j) = match k {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let (zi, zj) = (z[i], z[j]);
        let c = if zi.abs() <= ztol && zj.abs() <= ztol {
            0.0
        } else if (zi + zj).abs() <= 1e-14 * (zi.abs() + zj.abs()) {
            return Err(Error::Convention(format!("Z_{} + Z_{} = 0 with nonzero terms", i + 1, j + 1)));
        } else {
            zi * zj / (zi + zj)
        };
        let mut hk = h;
        hk[(k, k)] += 2.0 * c;
        margin = margin.min(restricted_min(&kernel, &hk)?);
    }
    Ok(margin)
}

/// A point of `f⁻¹(0)` with sorted, separated coordinates and the rotation placing it in 𝒜₃.
#[derive(Clone, Debug)]
pub struct ZeroSample {
    pub index: usize,
    pub lambda: [f64; 3],
    pub frame: DMatrix<f64>,
}

impl ZeroSample {
    /// `ρ(Q)·diag(λ)`.
    pub fn operator(&self) -> CurvatureOperator {
        CurvatureOperator::diagonal(3, &self.lambda)
            .and_then(|d| d.rotate(&self.frame))
            .expect("valid rotation")
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SkipCounts {
    pub unbracketed: usize,
    pub degenerate: usize,
    pub singular: usize,
}

enum Candidate {
    Ok(ZeroSample),
    Unbracketed,
    Degenerate,
    Singular,
}

fn ray_root(f: &dyn EigenFunction, origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
    let at = |t: f64| f.value(&[origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]]);
    if at(0.0) >= 0.0 {
        return None;
    }
    let scale = 1.0 + origin.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (0.0, 1e-3 * scale);
    while at(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 * scale {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..2 {
        let x = [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
        let g = f.gradient(&x);
        let slope = g[0] * dir[0] + g[1] * dir[1] + g[2] * dir[2];
        let next = t - f.value(&x) / slope;
        if slope != 0.0 && next > lo.min(t) * 0.5 && next.is_finite() {
            t = next;
        }
    }
    Some(t)
}

fn zero_candidate(f: &dyn EigenFunction, index: usize, stream: &SeedStream) -> Candidate {
    let mut rng = stream.rng("zero-set", index as u64);
    let v: [f64; 3] = std::array::from_fn(|_| rng.sample(rand_distr::StandardNormal));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dir = v.map(|x| x / norm);
    let origin = f.anchor();
    let frame = random_rotation(3, &mut rng);
    let Some(t) = ray_root(f, origin, dir) else {
        return Candidate::Unbracketed;
    };
    let mut lambda: [f64; 3] = std::array::from_fn(|i| origin[i] + t * dir[i]);
    lambda.sort_by(f64::total_cmp);
    if sorted_gaps_ok(&lambda).is_err() {
        return Candidate::Degenerate;
    }
    let g = f.gradient(&lambda);
    if g.iter().map(|x| x * x).sum::<f64>().sqrt() < GRADIENT_GUARD {
        return Candidate::Singular;
    }
    Candidate::Ok(ZeroSample { index, lambda, frame })
}

/// Up to `m` points of `f⁻¹(0)` from rays through the function's anchor.
pub fn sample_zero_set(f: &dyn EigenFunction, m: usize, stream: &SeedStream) -> Result<(Vec<ZeroSample>, SkipCounts)> {
    if m == 0 {
        return Err(Error::invalid("sample budget must be at least 1"));
    }
    let mut samples = Vec::with_capacity(m);
    let mut skips = SkipCounts::default();
    let mut next = 0;
    while samples.len() < m && next < ATTEMPTS_PER_SAMPLE * m {
        let batch = m - samples.len();
        let out: Vec<Candidate> = (next..next + batch)
            .into_par_iter()
            .map(|i| zero_candidate(f, i, stream))
            .collect();
        next += batch;
        for c in out {
            match c {
                Candidate::Ok(s) => samples.push(s),
                Candidate::Unbracketed => skips.unbracketed += 1,
                Candidate::Degenerate => skips.degenerate += 1,
                Candidate::Singular => skips.singular += 1,
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptySample {
            what: format!("zero set of {}", f.name()),
            skipped: skips.unbracketed + skips.degenerate + skips.singular,
        });
    }
    Ok((samples, skips))
}

/// Identity followed by `count − 1` seeded Haar rotations.
pub fn rotation_sample(count: usize, stream: &SeedStream) -> Vec<DMatrix<f64>> {
    let mut out = vec![DMatrix::identity(3, 3)];
    for k in 1..count.max(1) {
        out.push(random_rotation(3, &mut stream.rng("rotations", k as u64)));
    }
    out
}

/// Top eigenvalue of `T ↦ −(1/‖∇g‖) Σᵢ Hess g(Tᵢ,Tᵢ)` on tangent Bianchi tuples at `R`.
pub fn tuple_form_top(spec: &SetSpec, p: &BoundaryPoint) -> Result<f64> {
    let (form, _) = tuple_form(spec, p)?;
    top_eigenvalue(&form)
}

/// The projected quadratic form and the subspace basis it is expressed in.
pub fn tuple_form(spec: &SetSpec, p: &BoundaryPoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if p.active.len() != 1 {
        return Err(Error::invalid("direct margin needs a smooth boundary point"));
    }
    let n = spec.n;
    let g = &spec.constraints[p.active[0]];
    let sub = tangent_bianchi_subspace(std::slice::from_ref(&p.normals[0]), n)?;
    let h = g.hessian_matrix(&p.r)?;
    let d = h.nrows();
    let mut big = DMatrix::zeros(n * d, n * d);
    for slot in 0..n {
        big.view_mut((slot * d, slot * d), (d, d)).copy_from(&h);
    }
    let v = &sub.columns;
    let form = (v.transpose() * big * v) * (-1.0 / p.grad_norms[0]);
    Ok(((&form + form.transpose()) * 0.5, sub.columns))
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectMargin {
    pub max: f64,
    pub per_rotation: Vec<f64>,
    pub worst_rotation: usize,
}

/// Maximum over `rotations` of the top eigenvalue at `ρ(Q)R`.
pub fn direct_margin(spec: &SetSpec, r: &CurvatureOperator, rotations: &[DMatrix<f64>]) -> Result<DirectMargin> {
    if rotations.is_empty() {
        return Err(Error::invalid("at least one rotation is required"));
    }
    let per_rotation = rotations
        .iter()
        .map(|q| {
            let p = BoundaryPoint::new(spec, r.rotate(q)?)?;
            tuple_form_top(spec, &p)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (worst_rotation, max) = per_rotation
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(DirectMargin {
        max,
        per_rotation,
        worst_rotation,
    })
}

/// Set used by the direct checker: the ambient polynomial for `f-ac` and `sphere`, `f∘λ` otherwise.
pub fn direct_spec(f: &Arc<dyn EigenFunction>) -> Result<SetSpec> {
    let p = f.params();
    let get = |k: &str| p.get(k).and_then(Value::as_f64);
    match (f.name(), get("a"), get("c")) {
        ("f-ac", Some(a), Some(c)) if c > 0.0 => SetSpec::omega_ac(3, a, c),
        ("sphere", _, Some(c)) => SetSpec::ball(3, c.sqrt()),
        _ => SetSpec::omega_f(f.clone()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agreement {
    Agree,
    Indeterminate,
    Disagree,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleRecord {
    pub index: usize,
    pub lambda: [f64; 3],
    pub condition_one: f64,
    /// `None` when the Z convention fails (only possible if condition one fails).
    pub condition_two: Option<f64>,
    pub eigen_verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direct_verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Agreement>,
}

impl SampleRecord {
    pub fn eigen_margin(&self) -> f64 {
        self.condition_one.min(self.condition_two.unwrap_or(f64::NEG_INFINITY))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub index: usize,
    pub lambda: [f64; 3],
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub verdict_band: f64,
    pub gap_relative: f64,
    pub gradient_guard: f64,
    pub rank_tolerance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            verdict_band: VERDICT_BAND,
            gap_relative: 1e-4,
            gradient_guard: GRADIENT_GUARD,
            rank_tolerance: crate::bianchi::RANK_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossVerdict {
    AgreePass,
    AgreeFail,
    /// The checkers contradict each other outside the band: a defect of the tool.
    Disagree,
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementSummary {
    pub verdict: CrossVerdict,
    pub agree: usize,
    pub indeterminate: usize,
    pub disagree: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub function: String,
    pub params: Value,
    pub direct_set: Option<String>,
    pub samples_requested: usize,
    pub samples_used: usize,
    pub skipped: SkipCounts,
    pub rotations: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub eigen_verdict: Option<Verdict>,
    pub direct_verdict: Option<Verdict>,
    pub verdict: Verdict,
    pub worst_eigen: Option<Witness>,
    pub worst_direct: Option<Witness>,
    /// `−max direct margin`; positive means strictly Bianchi-convex on the sample.
    pub strictness: Option<f64>,
    pub agreement: Option<AgreementSummary>,
    pub records: Vec<SampleRecord>,
}

fn eigen_record(f: &dyn EigenFunction, s: &ZeroSample) -> Result<SampleRecord> {
    let c1 = condition_one(f, &s.lambda)?;
    let c2 = match condition_two(f, &s.lambda) {
        Ok(v) => Some(v),
        Err(Error::Convention(_)) if c1 < 0.0 => None,
        Err(e) => return Err(e),
    };
    let m = c1.min(c2.unwrap_or(f64::NEG_INFINITY));
    Ok(SampleRecord {
        index: s.index,
        lambda: s.lambda,
        condition_one: c1,
        condition_two: c2,
        eigen_verdict: Verdict::from_lower_margin(m, VERDICT_BAND),
        direct_margin: None,
        direct_verdict: None,
        agreement: None,
    })
}

fn worst_by<F: Fn(&SampleRecord) -> Option<f64>>(records: &[SampleRecord], key: F) -> Option<Witness> {
    records
        .iter()
        .filter_map(|r| key(r).map(|m| (r, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, m)| Witness {
            index: r.index,
            lambda: r.lambda,
            margin: m,
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eigen,
    Direct,
    Cross,
}

/// Runs the requested checker(s) on a shared sample of `f⁻¹(0)`.
pub fn run_checks(
    f: &Arc<dyn EigenFunction>,
    mode: Mode,
    samples: usize,
    rotations: usize,
    stream: &SeedStream,
) -> Result<ConvexityReport> {
    let (zeros, skipped) = sample_zero_set(f.as_ref(), samples, &stream.child("samples"))?;
    let spec = match mode {
        Mode::Eigen => None,
        _ => Some(direct_spec(f)?),
    };
    let rots = rotation_sample(rotations, &stream.child("direct"));
    let records: Vec<SampleRecord> = zeros
        .par_iter()
        .map(|s| {
            let mut rec = eigen_record(f.as_ref(), s)?;
            if let Some(spec) = &spec {
                let d = direct_margin(spec, &s.operator(), &rots)?.max;
                rec.direct_margin = Some(d);
                rec.direct_verdict = Some(Verdict::from_upper_margin(d, VERDICT_BAND));
                if mode == Mode::Cross {
                    let e = rec.eigen_margin();
                    rec.agreement = Some(if e.abs() <= VERDICT_BAND || d.abs() <= VERDICT_BAND {
                        Agreement::Indeterminate
                    } else if (e > 0.0) == (d < 0.0) {
                        Agreement::Agree
                    } else {
                        Agreement::Disagree
                    });
                }
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;

    let fold = |get: &dyn Fn(&SampleRecord) -> Option<Verdict>| {
        records.iter().filter_map(get).fold(Verdict::Pass, Verdict::and)
    };
    let eigen_verdict = (mode != Mode::Direct).then(|| fold(&|r| Some(r.eigen_verdict)));
    let direct_verdict = spec.as_ref().map(|_| fold(&|r| r.direct_verdict));
    let worst_eigen = (mode != Mode::Direct).then(|| worst_by(&records, |r| Some(r.eigen_margin()))).flatten();
    let worst_direct = worst_by(&records, |r| r.direct_margin.map(|d| -d)).map(|w| Witness {
        margin: -w.margin,
        ..w
    });
    let strictness = worst_direct.as_ref().map(|w| -w.margin);
    let agreement = (mode == Mode::Cross).then(|| {
        let count = |a: Agreement| records.iter().filter(|r| r.agreement == Some(a)).count();
        let (agree, indeterminate, disagree) =
            (count(Agreement::Agree), count(Agreement::Indeterminate), count(Agreement::Disagree));
        let e = eigen_verdict.expect("cross mode").passed();
        let d = direct_verdict.expect("cross mode").passed();
        let verdict = match (disagree, e, d) {
            (0, true, true) => CrossVerdict::AgreePass,
            (0, false, false) => CrossVerdict::AgreeFail,
            _ => CrossVerdict::Disagree,
        };
        AgreementSummary {
            verdict,
            agree,
            indeterminate,
            disagree,
        }
    });
    let verdict = match mode {
        Mode::Eigen => eigen_verdict.expect("eigen mode"),
        Mode::Direct => direct_verdict.expect("direct mode"),
        Mode::Cross => eigen_verdict.expect("cross").and(direct_verdict.expect("cross")),
    };
    Ok(ConvexityReport {
        function: f.name().to_string(),
        params: f.params(),
        direct_set: spec.map(|s| s.name),
        samples_requested: samples,
        samples_used: records.len(),
        skipped,
        rotations: if mode == Mode::Eigen { 0 } else { rots.len() },
        seed: stream.seed(),
        tolerances: Tolerances::default(),
        eigen_verdict,
        direct_verdict,
        verdict,
        worst_eigen,
        worst_direct,
        strictness,
        agreement,
        records,
    })
}

pub fn verify_eigen(f: &Arc<dyn EigenFunction>, samples: usize, stream: &SeedStream) -> Result<ConvexityReport> {
    run_checks(f, Mode::Eigen, samples, 0, stream)
}

pub fn verify_direct(
    f: &Arc<dyn EigenFunction>,
    samples: usize,
    rotations: usize,
    stream: &SeedStream,
) -> Result<ConvexityReport> {
    run_checks(f, Mode::Direct, samples, rotations, stream)
}

pub fn cross_validate(
    f: &Arc<dyn EigenFunction>,
    samples: usize,
    rotations: usize,
    stream: &SeedStream,
) -> Result<ConvexityReport> {
    run_checks(f, Mode::Cross, samples, rotations, stream)
}

/// Two boundary points of `Ω_{a,c}` whose midpoint lies outside.
#[derive(Clone, Debug, Serialize)]
pub struct NonConvexityWitness {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub midpoint: Vec<f64>,
    pub margin_r1: f64,
    pub margin_r2: f64,
    pub margin_midpoint: f64,
}

/// In eigenvalue space `Ω_{a,c}` is `‖x⊥‖² ≤ c + (a − 1/3)s²` with `s = Σxᵢ`.
/// Both points share the perpendicular direction, at `s = 0` and at
/// `s` with `(a − 1/3)s² = 8c`; the midpoint then exceeds the bound by `c`.
pub fn nonconvexity_witness(a: f64, c: f64) -> Result<NonConvexityWitness> {
    let k = a - 1.0 / 3.0;
    if !(k > 0.0) || !(c > 0.0) {
        return Err(Error::Domain("a non-convexity witness needs a > 1/3 and c > 0".into()));
    }
    let spec = SetSpec::omega_ac(3, a, c)?;
    let u = [1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
    let point = |s: f64| {
        let rho = (c + k * s * s).sqrt();
        let x: Vec<f64> = (0..3).map(|i| s / 3.0 + rho * u[i]).collect();
        CurvatureOperator::diagonal(3, &x).expect("n = 3")
    };
    let r1 = point(0.0);
    let r2 = point((8.0 * c / k).sqrt());
    let mid = (&r1 + &r2).scale(0.5);
    let g = |r: &CurvatureOperator| spec.values(r).map(|v| v[0]);
    Ok(NonConvexityWitness {
        margin_r1: g(&r1)?,
        margin_r2: g(&r2)?,
        margin_midpoint: g(&mid)?,
        r1: r1.to_row_major(),
        r2: r2.to_row_major(),
        midpoint: mid.to_row_major(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{eigen_function, NegSphereFn, PinchingFn, SumFn};
    use std::collections::BTreeMap;

    fn fac(a: f64, c: f64) -> Arc<dyn EigenFunction> {
        Arc::new(PinchingFn::new(a, c))
    }

    #[test]
    fn z_value_examples() {
        let sum = SumFn { c: 6.0 };
        assert_eq!(z_values(&sum, &[1.0, 2.0, 3.0]).unwrap(), [0.0; 3]);
        let f = PinchingFn::new(0.35, 1.0);
        for z in z_values(&f, &[-0.3, 0.4, 1.7]).unwrap() {
            assert!((z - 2.0).abs() < 1e-12);
        }
        let sphere = PinchingFn::sphere(14.0);
        assert_eq!(z_values(&sphere, &[1.0, 2.0, 3.0]).unwrap(), [2.0; 3]);
        assert!(matches!(
            z_values(&sphere, &[1.0, 1.0, 3.0]),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn condition_one_examples() {
        let f = PinchingFn::new(0.35, 1.0);
        let l = [-0.5, 0.25, 2.0];
        assert!((condition_one(&f, &l).unwrap() - 2.0 * 0.75).abs() < 1e-12);
        assert_eq!(condition_one(&SumFn { c: 0.0 }, &l).unwrap(), 0.0);
        assert!(condition_one(&NegSphereFn { c: 14.0 }, &[1.0, 2.0, 3.0]).unwrap() < 0.0);
    }

    #[test]
    fn condition_two_examples() {
        assert_eq!(condition_two(&SumFn { c: 6.0 }, &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        // x = (1, 1, 0.5)-type directions decide the a = 2/5 threshold.
        let (zeros, _) = sample_zero_set(&PinchingFn::new(0.35, 1.0), 200, &SeedStream::new(1)).unwrap();
        for z in &zeros {
            assert!(condition_two(&PinchingFn::new(0.35, 1.0), &z.lambda).unwrap() >= 0.0);
        }
        let f = PinchingFn::new(0.45, 1.0);
        let (zeros, _) = sample_zero_set(&f, 200, &SeedStream::new(2)).unwrap();
        assert!(zeros.iter().any(|z| condition_two(&f, &z.lambda).unwrap() < 0.0));
    }

    #[test]
    fn zero_set_samples_are_admissible() {
        let f = PinchingFn::new(0.35, 1.0);
        let (zeros, _) = sample_zero_set(&f, 100, &SeedStream::new(3)).unwrap();
        assert_eq!(zeros.len(), 100);
        for z in &zeros {
            assert!(f.value(&z.lambda).abs() < 1e-10 * (1.0 + z.lambda.iter().map(|x| x * x).sum::<f64>()));
            assert!(z.lambda[0] < z.lambda[1] && z.lambda[1] < z.lambda[2]);
        }
    }

    #[test]
    fn sphere_direct_margin_is_minus_one() {
        let ball = SetSpec::ball(3, 1.0).unwrap();
        let r = CurvatureOperator::diagonal(3, &[0.6, 0.0, 0.8]).unwrap();
        let rots = rotation_sample(4, &SeedStream::new(4));
        let d = direct_margin(&ball, &r, &rots).unwrap();
        for v in d.per_rotation {
            assert!((v + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn direct_margin_is_equivariant() {
        let spec = SetSpec::omega_ac(3, 0.37, 1.0).unwrap();
        let (zeros, _) = sample_zero_set(&PinchingFn::new(0.37, 1.0), 5, &SeedStream::new(5)).unwrap();
        let rots = rotation_sample(3, &SeedStream::new(6));
        for z in &zeros {
            let r = z.operator();
            for q in &rots[1..] {
                let moved = direct_margin(&spec, &r.rotate(q).unwrap(), &rots[..1]).unwrap().max;
                let sampled = direct_margin(&spec, &r, std::slice::from_ref(q)).unwrap().max;
                assert!((moved - sampled).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn projected_form_top_eigenvalue_matches_power_iteration() {
        let spec = SetSpec::omega_ac(3, 0.45, 1.0).unwrap();
        let (zeros, _) = sample_zero_set(&PinchingFn::new(0.45, 1.0), 3, &SeedStream::new(7)).unwrap();
        for z in &zeros {
            let p = BoundaryPoint::new(&spec, z.operator()).unwrap();
            let (form, _) = tuple_form(&spec, &p).unwrap();
            assert!((&form - form.transpose()).amax() < 1e-14);
            let top = top_eigenvalue(&form).unwrap();
            // Power iteration on a shifted positive matrix.
            let shift = form.norm();
            let m = &form + DMatrix::identity(form.nrows(), form.ncols()) * shift;
            let mut v = DVector::from_element(form.nrows(), 1.0);
            let mut est = 0.0;
            for _ in 0..20000 {
                let w = &m * &v;
                est = v.dot(&w) / v.dot(&v);
                v = &w / w.norm();
            }
            assert!((est - shift - top).abs() < 1e-8 * (1.0 + top.abs()), "{} vs {}", est - shift, top);
        }
    }

    #[test]
    fn cross_validation_examples() {
        let stream = SeedStream::new(8);
        let pass = cross_validate(&fac(0.35, 1.0), 60, 8, &stream).unwrap();
        assert_eq!(pass.agreement.as_ref().unwrap().verdict, CrossVerdict::AgreePass);
        assert!(pass.strictness.unwrap() > 0.0);
        let fail = cross_validate(&fac(0.45, 1.0), 60, 8, &stream).unwrap();
        assert_eq!(fail.agreement.as_ref().unwrap().verdict, CrossVerdict::AgreeFail);
        assert!(fail.worst_eigen.is_some() && fail.worst_direct.is_some());
        let sphere = eigen_function("sphere", &BTreeMap::from([("c".into(), 1.0)])).unwrap();
        let s = cross_validate(&sphere, 40, 4, &stream).unwrap();
        assert_eq!(s.agreement.unwrap().verdict, CrossVerdict::AgreePass);
    }

    #[test]
    fn spectral_direct_matches_ambient_direct() {
        let f = fac(0.39, 1.0);
        let ambient = direct_spec(&f).unwrap();
        let spectral = SetSpec::omega_f(f.clone()).unwrap();
        let (zeros, _) = sample_zero_set(f.as_ref(), 10, &SeedStream::new(9)).unwrap();
        let rots = rotation_sample(2, &SeedStream::new(10));
        for z in &zeros {
            let a = direct_margin(&ambient, &z.operator(), &rots).unwrap().max;
            let b = direct_margin(&spectral, &z.operator(), &rots).unwrap().max;
            assert!((a - b).abs() < 1e-7 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn witness_for_nonconvexity() {
        let w = nonconvexity_witness(0.35, 1.0).unwrap();
        assert!(w.margin_r1.abs() < 1e-12 && w.margin_r2.abs() < 1e-9);
        assert!((w.margin_midpoint - 1.0).abs() < 1e-9);
        assert!(matches!(nonconvexity_witness(0.3, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(Verdict::from_lower_margin(0.0, 1e-6), Verdict::Pass);
        assert_eq!(Verdict::from_lower_margin(-5e-7, 1e-6), Verdict::Marginal);
        assert_eq!(Verdict::from_lower_margin(-2e-6, 1e-6), Verdict::Fail);
        assert_eq!(Verdict::from_upper_margin(5e-7, 1e-6), Verdict::Marginal);
    }
}
