//! End-to-end verification suite: configuration, the registered checks and report emission.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::envelope::{envelope_ratio, format_float, EnvelopeReport, STABILITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::kernels::{mehler_kernel_log, BoundSpec};
use crate::quadrature::{gauss_hermite_rule, GridLayout, PlaneGrid};
use crate::semigroup::{
    bergman_norm, calibrate_weight, hermite_grid, reproduce, reproduce_grid, schwartz_image_check, semigroup_image,
    Mode, SemigroupOptions,
};
use crate::special::{
    composed_check, intertwine_check, laguerre_projections, laguerre_reconstruct, special_gram, special_grid,
    special_semigroup_apply, Poly, SignConvention, SpecialMode, SpecialOptions, TwistedFunction,
};
use crate::specfun::{hermite_eval, hermite_real_into, ComplexPoint, MultiIndex};
use crate::spectral::{l2_norm_sqr, EntireHandle, TestFunction};
use crate::stft::{bridge_residual, compact_growth_check, compact_growth_factor, pw_envelope};

pub const SCHEMA: &str = "1";

/// Box and resolution for envelope scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// `[x_min, x_max, y_min, y_max]`.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub res: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            bbox: [-8.0, 8.0, -6.0, 6.0],
            res: 128,
        }
    }
}

/// Tolerances per check kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub orthonormality: f64,
    pub mehler: f64,
    pub isometry: f64,
    pub kappa_drift: f64,
    pub orthogonality_spread: f64,
    pub orthogonality_offdiag: f64,
    pub sobolev: f64,
    pub reproduce: f64,
    pub envelope_value: f64,
    pub envelope_stability: f64,
    pub intertwine: f64,
    pub composed: f64,
    pub special_isometry: f64,
    pub special_sobolev: f64,
    pub special_eigen: f64,
    pub projection: f64,
    pub reconstruction: f64,
    pub bridge: f64,
    /// Minimum growth of the compact-support sup when the box doubles, for a too-small radius.
    pub compact_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            orthonormality: 1e-10,
            mehler: 1e-8,
            isometry: 1e-5,
            kappa_drift: 1e-5,
            orthogonality_spread: 1e-5,
            orthogonality_offdiag: 1e-9,
            sobolev: 1e-4,
            reproduce: 1e-5,
            envelope_value: 0.01,
            envelope_stability: STABILITY_TOLERANCE,
            intertwine: 1e-6,
            composed: 1e-5,
            special_isometry: 1e-4,
            special_sobolev: 1e-3,
            special_eigen: 1e-6,
            projection: 1e-6,
            reconstruction: 1e-4,
            bridge: 1e-6,
            compact_growth: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Suite configuration, read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub schema: String,
    pub n: usize,
    /// Hermite truncation order.
    #[serde(rename = "N")]
    pub order: u32,
    /// Gauss-Hermite order.
    pub quad: usize,
    /// Times for the Hermite checks.
    pub t: Vec<f64>,
    /// Times for the special Hermite checks.
    pub special_t: Vec<f64>,
    /// Sobolev orders.
    pub m: Vec<u32>,
    pub grid: GridConfig,
    pub tol: Tolerances,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            schema: SCHEMA.into(),
            n: 1,
            order: 48,
            quad: 128,
            t: vec![0.3, 0.5],
            special_t: vec![0.4, 0.5],
            m: vec![0, 1, 2, 3],
            grid: GridConfig::default(),
            tol: Tolerances::default(),
            seed: 12345,
            out: None,
            format: OutputFormat::Json,
        }
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema != SCHEMA {
            return bad(format!("unsupported schema {:?}, expected {SCHEMA:?}", self.schema));
        }
        if self.n != 1 {
            return bad(format!("the suite runs at n = 1, got n = {}", self.n));
        }
        if !(1..=200).contains(&self.order) {
            return bad(format!("N must be in 1..=200, got {}", self.order));
        }
        if !(8..=512).contains(&self.quad) {
            return bad(format!("quad must be in 8..=512, got {}", self.quad));
        }
        for (name, ts) in [("t", &self.t), ("special_t", &self.special_t)] {
            if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0 && t <= 5.0)) {
                return bad(format!("{name} must be a non-empty list of times in (0, 5]"));
            }
        }
        if self.m.iter().any(|&m| m > 4) {
            return bad("Sobolev orders must not exceed 4".into());
        }
        let b = self.grid.bbox;
        if !b.iter().all(|v| v.is_finite()) || b[0] >= b[1] || b[2] >= b[3] {
            return bad(format!("degenerate grid box {b:?}"));
        }
        if !(2..=1024).contains(&self.grid.res) {
            return bad(format!("grid res must be in 2..=1024, got {}", self.grid.res));
        }
        let tol = serde_json::to_value(&self.tol)?;
        for (k, v) in tol.as_object().into_iter().flatten() {
            match v.as_f64() {
                Some(x) if x >= 0.0 && x.is_finite() => {}
                _ => return bad(format!("tolerance {k} must be a non-negative number")),
            }
        }
        Ok(())
    }

    fn envelope_grid(&self) -> Result<PlaneGrid> {
        PlaneGrid::new(vec![self.grid.bbox], self.grid.res, GridLayout::Uniform)
    }

    fn semigroup_options(&self) -> Result<SemigroupOptions> {
        SemigroupOptions::new(self.order, self.quad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// How a measured value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `value < tol`.
    Below,
    /// `value >= tol`.
    AtLeast,
    /// `value == tol`.
    Equal,
}

/// One measured quantity inside a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    pub tol: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Measurement {
    fn new(label: impl Into<String>, value: f64, tol: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::Below => value < tol,
            Comparison::AtLeast => value >= tol,
            Comparison::Equal => value == tol,
        };
        Measurement {
            label: label.into(),
            value,
            tol,
            comparison,
            pass,
        }
    }

    fn below(label: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::new(label, value, tol, Comparison::Below)
    }

    /// How far the measurement is from failing; larger is worse.
    fn severity(&self) -> f64 {
        let r = match self.comparison {
            Comparison::Below => self.value / self.tol,
            Comparison::AtLeast => self.tol / self.value,
            Comparison::Equal => (self.value - self.tol).abs(),
        };
        match (self.pass, r.is_nan()) {
            (false, _) => f64::INFINITY,
            (true, true) => 0.0,
            (true, false) => r,
        }
    }
}

/// Result of one registered check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub theorem: String,
    pub status: Status,
    /// Value of the most critical measurement.
    pub metric: Option<f64>,
    pub tol: Option<f64>,
    pub measurements: Vec<Measurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    /// Wall-clock seconds; excluded from the determinism contract.
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub config: SuiteConfig,
    pub checks: Vec<CheckResult>,
    pub summary: Summary,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.summary.fail == 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with every timing field removed; identical configs give identical output.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(checks) = v.get_mut("checks").and_then(Value::as_array_mut) {
            for c in checks {
                if let Some(o) = c.as_object_mut() {
                    o.remove("seconds");
                }
            }
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// CSV with header `name,theorem,status,metric,tol`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["name", "theorem", "status", "metric", "tol"])?;
        let num = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        for c in &self.checks {
            let status = serde_json::to_value(c.status)?;
            wr.write_record([
                c.name.clone(),
                c.theorem.clone(),
                status.as_str().unwrap_or_default().to_string(),
                num(c.metric),
                num(c.tol),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// What a check function produces before packaging.
#[derive(Debug, Default)]
struct Outcome {
    measurements: Vec<Measurement>,
    details: serde_json::Map<String, Value>,
}

impl Outcome {
    fn push(&mut self, m: Measurement) {
        self.measurements.push(m);
    }

    fn note(&mut self, key: &str, v: Value) {
        self.details.insert(key.into(), v);
    }
}

type CheckFn = fn(&SuiteConfig, &mut ChaCha8Rng) -> Result<Outcome>;

/// A registered check.
pub struct CheckSpec {
    pub name: &'static str,
    pub theorem: &'static str,
    run: CheckFn,
}

/// Every check of the suite, in report order.
pub const CHECKS: [CheckSpec; 14] = [
    CheckSpec { name: "hermite-orthonormality", theorem: "hermite-basis", run: check_orthonormality },
    CheckSpec { name: "mehler-spectral-agreement", theorem: "mehler-kernel", run: check_mehler },
    CheckSpec { name: "bergman-isometry", theorem: "bergman-isometry", run: check_isometry },
    CheckSpec { name: "weighted-orthogonality", theorem: "weighted-orthogonality", run: check_orthogonality },
    CheckSpec { name: "sobolev-weight-identity", theorem: "sobolev-identity", run: check_sobolev },
    CheckSpec { name: "reproducing-kernel", theorem: "reproducing-kernel", run: check_reproduce },
    CheckSpec { name: "schwartz-envelopes", theorem: "schwartz-image-growth", run: check_envelopes },
    CheckSpec { name: "intertwining-sign", theorem: "intertwining-relations", run: check_intertwining },
    CheckSpec { name: "special-isometry", theorem: "special-bergman-isometry", run: check_special },
    CheckSpec { name: "laguerre-projections", theorem: "twisted-projections", run: check_projections },
    CheckSpec { name: "tempered-envelope", theorem: "tempered-image-growth", run: check_tempered },
    CheckSpec { name: "stft-bridge", theorem: "paley-wiener-stft", run: check_bridge },
    CheckSpec { name: "compact-support-growth", theorem: "compact-support-growth", run: check_compact },
    CheckSpec { name: "determinism", theorem: "determinism", run: check_determinism },
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.name).collect()
}

fn package(spec: &CheckSpec, out: Result<Outcome>, seconds: f64) -> CheckResult {
    let mut r = CheckResult {
        name: spec.name.into(),
        theorem: spec.theorem.into(),
        status: Status::Fail,
        metric: None,
        tol: None,
        measurements: Vec::new(),
        error: None,
        details: Value::Null,
        seconds,
    };
    match out {
        Err(e) => r.error = Some(e.to_string()),
        Ok(o) => {
            r.status = if o.measurements.is_empty() {
                Status::Skipped
            } else if o.measurements.iter().all(|m| m.pass) {
                Status::Pass
            } else {
                Status::Fail
            };
            // first measurement with the largest severity
            let mut worst: Option<&Measurement> = None;
            for m in &o.measurements {
                if worst.is_none_or(|w| m.severity() > w.severity()) {
                    worst = Some(m);
                }
            }
            if let Some(w) = worst {
                r.metric = w.value.is_finite().then_some(w.value);
                r.tol = Some(w.tol);
            }
            if !o.details.is_empty() {
                r.details = Value::Object(o.details);
            }
            r.measurements = o.measurements;
        }
    }
    r
}

fn check_rng(cfg: &SuiteConfig, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1)))
}

fn run_indexed(index: usize, cfg: &SuiteConfig) -> CheckResult {
    let spec = &CHECKS[index];
    let mut rng = check_rng(cfg, index);
    let start = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (spec.run)(cfg, &mut rng)))
        .unwrap_or_else(|_| Err(Error::Domain(format!("check {} panicked", spec.name))));
    package(spec, out, start.elapsed().as_secs_f64())
}

/// Run one check by name.
pub fn run_check(name: &str, cfg: &SuiteConfig) -> Result<CheckResult> {
    cfg.validate()?;
    let index = CHECKS
        .iter()
        .position(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("unknown check {name:?}")))?;
    Ok(run_indexed(index, cfg))
}

/// Run every registered check; one failing check never stops the others.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let checks: Vec<CheckResult> = (0..CHECKS.len()).map(|i| run_indexed(i, cfg)).collect();
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    let summary = Summary {
        pass: count(Status::Pass),
        fail: count(Status::Fail),
        skipped: count(Status::Skipped),
    };
    Ok(SuiteReport {
        schema: SCHEMA.into(),
        config: cfg.clone(),
        checks,
        summary,
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_point(rng: &mut ChaCha8Rng, re: f64, im: f64) -> Complex64 {
    let x = if re > 0.0 { rng.gen_range(-re..=re) } else { 0.0 };
    let y = if im > 0.0 { rng.gen_range(-im..=im) } else { 0.0 };
    c(x, y)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| if x > m || x.is_nan() { x } else { m })
}

fn check_orthonormality(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    const K: usize = 30;
    let rule = gauss_hermite_rule(cfg.quad)?;
    let mut gram = vec![0.0; (K + 1) * (K + 1)];
    let mut h = vec![0.0; K + 1];
    for (x, w) in rule.nodes.iter().zip(&rule.plain_weights) {
        hermite_real_into(*x, &mut h);
        for j in 0..=K {
            for k in 0..=K {
                gram[j * (K + 1) + k] += w * h[j] * h[k];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for j in 0..=K {
        for k in 0..=K {
            let d = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((gram[j * (K + 1) + k] - d).abs());
        }
    }
    let mut o = Outcome::default();
    o.push(Measurement::below("max |<h_j, h_k> - delta_jk|, j,k <= 30", worst, cfg.tol.orthonormality));
    Ok(o)
}

/// Imaginary half-width of the sampling region where the `N = 48` spectral sum is resolved.
fn mehler_region(t: f64) -> (f64, f64) {
    if t >= 0.5 {
        (2.0, 2.0)
    } else if t >= 0.3 {
        (2.0, 0.25)
    } else {
        (2.0, 0.0)
    }
}

fn check_mehler(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let n = cfg.order as usize;
    for &t in &cfg.t {
        let (re, im) = mehler_region(t);
        let mut worst: f64 = 0.0;
        let mut last: f64 = 0.0;
        for _ in 0..20 {
            let z = random_point(rng, re, im);
            let w = random_point(rng, re, im);
            let hz = hermite_eval(n, z)?;
            let hw = hermite_eval(n, w)?;
            let mut sum = c(0.0, 0.0);
            let mut term = c(0.0, 0.0);
            for k in 0..=n {
                term = (-(2.0 * k as f64 + 1.0) * t).exp() * hz[k] * hw[k];
                sum += term;
            }
            let exact = mehler_kernel_log(t, &[z], &[w])?.to_complex();
            worst = worst.max(rel(sum, exact));
            last = last.max(term.norm() / exact.norm());
        }
        o.push(Measurement::below(format!("t = {t}: max relative error"), worst, cfg.tol.mehler));
        o.note(
            &format!("t={t}"),
            json!({"re_max": re, "im_max": im, "last_term_ratio": last, "order": n}),
        );
    }
    Ok(o)
}

fn isometry_functions() -> Result<Vec<(String, TestFunction)>> {
    let mut v: Vec<(String, TestFunction)> = (0..4).map(|k| (format!("h_{k}"), TestFunction::hermite1(k))).collect();
    v.push(("gaussian(1)".into(), TestFunction::gaussian(1.0, 1)?));
    v.push((
        "(1 + x + x^2/2) e^{-x^2/2}".into(),
        TestFunction::poly_gaussian(
            vec![
                (MultiIndex::single(0), 1.0),
                (MultiIndex::single(1), 1.0),
                (MultiIndex::single(2), 0.5),
            ],
            1.0,
        )?,
    ));
    Ok(v)
}

const HERMITE_GRID_RES: usize = 128;

fn calibration(t: f64) -> Result<crate::semigroup::CalibrationResult> {
    let alphas: Vec<MultiIndex> = (0..=4).map(MultiIndex::single).collect();
    calibrate_weight(t, 1, &alphas, &hermite_grid(t, 1, 8, HERMITE_GRID_RES)?)
}

fn check_isometry(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let opts = cfg.semigroup_options()?;
    let rule = gauss_hermite_rule(cfg.quad)?;
    let mut kappas = Vec::new();
    for &t in &cfg.t {
        let kappa = calibration(t)?.kappa;
        kappas.push(kappa);
        let grid = hermite_grid(t, 1, 10, HERMITE_GRID_RES)?;
        for (label, f) in isometry_functions()? {
            let img = semigroup_image(&f, t, Mode::Spectral, &opts)?;
            let lhs = kappa * bergman_norm(&img, t, 0, &grid)?;
            let rhs = l2_norm_sqr(&f, &rule)?;
            o.push(Measurement::below(
                format!("t = {t}, {label}: |kappa |F|^2 - |f|^2|"),
                (lhs - rhs).abs(),
                cfg.tol.isometry,
            ));
        }
    }
    let k0 = kappas[0];
    let drift = max_of(kappas.iter().map(|k| (k / k0 - 1.0).abs()));
    o.push(Measurement::below("kappa drift across t", drift, cfg.tol.kappa_drift));
    o.note(
        "kappa",
        json!({"values": kappas, "expected": (2.0 * PI).powf(-0.5)}),
    );
    Ok(o)
}

fn check_orthogonality(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    for &t in &cfg.t {
        let cal = calibration(t)?;
        o.push(Measurement::below(
            format!("t = {t}: diagonal ratio spread, |alpha| <= 4"),
            cal.spread,
            cfg.tol.orthogonality_spread,
        ));
        o.push(Measurement::below(
            format!("t = {t}: max off-diagonal"),
            cal.max_offdiag,
            cfg.tol.orthogonality_offdiag,
        ));
    }
    Ok(o)
}

fn check_sobolev(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let opts = cfg.semigroup_options()?;
    let ms: Vec<u32> = cfg.m.iter().copied().filter(|&m| m >= 1).collect();
    if ms.is_empty() {
        return Ok(o);
    }
    for &t in &cfg.t {
        let kappa = calibration(t)?.kappa;
        for &m in &ms {
            let grid = hermite_grid(t, 1, 8 + 4 * m, HERMITE_GRID_RES)?;
            for k in 0..4u32 {
                let img = semigroup_image(&TestFunction::hermite1(k), t, Mode::Spectral, &opts)?;
                let lhs = kappa * bergman_norm(&img, t, m, &grid)?;
                let rhs = 4f64.powi(m as i32) * (2.0 * k as f64 + 1.0).powi(2 * m as i32);
                o.push(Measurement::below(
                    format!("t = {t}, m = {m}, h_{k}: relative error"),
                    (lhs / rhs - 1.0).abs(),
                    cfg.tol.sobolev,
                ));
            }
        }
    }
    Ok(o)
}

fn check_reproduce(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let opts = cfg.semigroup_options()?;
    let points: Vec<ComplexPoint> = (0..10)
        .map(|_| ComplexPoint::new(vec![random_point(rng, 2.0, 1.0)]))
        .collect();
    for &t in &cfg.t {
        let kappa = calibration(t)?.kappa;
        for k in 0..4u32 {
            let img = semigroup_image(&TestFunction::hermite1(k), t, Mode::Spectral, &opts)?;
            let mut worst: f64 = 0.0;
            for z in &points {
                let grid = reproduce_grid(t, z, 8, HERMITE_GRID_RES)?;
                let r = reproduce(&img, t, kappa, z, &grid)?;
                let f = img.eval(z)?;
                worst = worst.max((r - f).norm() / (1.0 + f.norm()));
            }
            o.push(Measurement::below(
                format!("t = {t}, h_{k}: max |P F - F| / (1 + |F|)"),
                worst,
                cfg.tol.reproduce,
            ));
        }
    }
    Ok(o)
}

fn stability(o: &mut Outcome, label: &str, r: &EnvelopeReport, tol: f64) {
    let change = if r.is_finite() {
        r.refinement_change.max(r.growth_change)
    } else {
        f64::INFINITY
    };
    o.push(Measurement::below(format!("{label}: sup change under refinement and growth"), change, tol));
}

fn check_envelopes(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let opts = cfg.semigroup_options()?;
    let grid = cfg.envelope_grid()?;
    let mut fs: Vec<(String, TestFunction)> = (0..4).map(|k| (format!("h_{k}"), TestFunction::hermite1(k))).collect();
    fs.push(("gaussian(1)".into(), TestFunction::gaussian(1.0, 1)?));
    let mut sups = serde_json::Map::new();
    for &t in &cfg.t {
        for (label, f) in &fs {
            let reports = schwartz_image_check(f, t, &cfg.m, &grid, &opts)?;
            for (m, r) in cfg.m.iter().zip(&reports) {
                let l = format!("t = {t}, m = {m}, {label}");
                stability(&mut o, &l, r, cfg.tol.envelope_stability);
                sups.insert(l, json!(r.sup_ratio));
            }
        }
    }
    let t = 0.3;
    let r = schwartz_image_check(&TestFunction::hermite1(0), t, &[0], &grid, &opts)?.remove(0);
    let want = (-2.0 * t).exp() / PI.sqrt();
    o.push(Measurement::below(
        "h_0, m = 0, t = 0.3: relative error of the sup",
        (r.sup_ratio / want - 1.0).abs(),
        cfg.tol.envelope_value,
    ));
    o.note("sups", Value::Object(sups));
    Ok(o)
}

fn intertwine_functions(t: f64) -> Result<Vec<(String, TwistedFunction)>> {
    let zu = Poly::new(
        2,
        vec![(vec![1, 0], c(1.0, 0.0)), (vec![0, 1], c(0.0, 1.0)), (vec![1, 1], c(0.5, 0.0))],
    )?;
    Ok(vec![
        ("gaussian(1)".into(), TwistedFunction::Gaussian { a: 1.0, dim: 1 }),
        ("gaussian(coth t)".into(), TwistedFunction::Gaussian { a: 1.0 / t.tanh(), dim: 1 }),
        ("(x + iu + xu/2) gaussian(1)".into(), TwistedFunction::PolyGaussian { poly: zu, a: 1.0 }),
        ("Phi_00".into(), TwistedFunction::special_hermite(0, 0)),
        ("Phi_10".into(), TwistedFunction::special_hermite(1, 0)),
        ("Phi_01".into(), TwistedFunction::special_hermite(0, 1)),
    ])
}

fn check_intertwining(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let rule = gauss_hermite_rule(cfg.quad.min(64))?;
    let points: Vec<Vec<Complex64>> = (0..4)
        .map(|_| vec![random_point(rng, 1.0, 0.5), random_point(rng, 1.0, 0.5)])
        .collect();
    let mut holds = [true; 2];
    let mut residuals = serde_json::Map::new();
    for &t in &cfg.special_t {
        for (label, f) in intertwine_functions(t)? {
            let r = intertwine_check(&f, t, 0, &points, &rule)?;
            let ok = r.passing(cfg.tol.intertwine);
            for (i, s) in SignConvention::ALL.iter().enumerate() {
                holds[i] &= ok.contains(s);
            }
            residuals.insert(format!("t = {t}, {label}"), serde_json::to_value(&r)?);
        }
    }
    let passing: Vec<SignConvention> = SignConvention::ALL
        .iter()
        .zip(holds)
        .filter(|(_, h)| *h)
        .map(|(s, _)| *s)
        .collect();
    o.push(Measurement::new(
        "number of sign conventions passing everywhere",
        passing.len() as f64,
        1.0,
        Comparison::Equal,
    ));
    o.note("passing", serde_json::to_value(&passing)?);
    o.note("residuals", Value::Object(residuals));
    if let [sign] = passing[..] {
        for &t in &cfg.special_t {
            for (label, f) in intertwine_functions(t)? {
                if f.as_poly_gaussian().is_none() {
                    continue;
                }
                let e = composed_check(&f, t, 0, sign, &points, &rule)?;
                o.push(Measurement::below(
                    format!("t = {t}, {label}: composed relation residual"),
                    e,
                    cfg.tol.composed,
                ));
            }
        }
    }
    Ok(o)
}

const SPECIAL_GRID_RES: usize = 56;

fn check_special(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let pairs = [(0u32, 0u32), (0, 1), (1, 0), (1, 1)];
    let mut kappas = Vec::new();
    for &t in &cfg.special_t {
        let grid = special_grid(t, 8, SPECIAL_GRID_RES)?;
        let g = special_gram(t, &pairs, &[0, 1], &grid)?;
        let kappa = (2.0 * t).exp() / g.get(0, 0, 0).re;
        kappas.push(kappa);
        for (i, &(a, b)) in pairs.iter().enumerate() {
            let decay = (-2.0 * (2.0 * b as f64 + 1.0) * t).exp();
            if i > 0 {
                o.push(Measurement::below(
                    format!("t = {t}, Phi_{a}{b}: isometry relative error"),
                    (kappa * g.get(0, i, i).re * decay - 1.0).abs(),
                    cfg.tol.special_isometry,
                ));
            }
            let want = 4.0 * (2.0 * b as f64 + 1.0).powi(2);
            o.push(Measurement::below(
                format!("t = {t}, Phi_{a}{b}: m = 1 identity relative error"),
                (kappa * g.get(1, i, i).re * decay / want - 1.0).abs(),
                cfg.tol.special_sobolev,
            ));
        }
        let off = max_of((0..pairs.len()).flat_map(|i| (0..pairs.len()).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| g.get(0, i, j).norm()));
        o.note(&format!("t={t}"), json!({"kappa_star": kappa, "max_offdiag": off}));
    }
    let mut opts = SpecialOptions::new(cfg.quad.min(64))?;
    opts.levels = None;
    let points: Vec<[Complex64; 2]> = (0..3)
        .map(|_| [random_point(rng, 1.5, 0.5), random_point(rng, 1.5, 0.5)])
        .collect();
    for &t in &cfg.special_t {
        let mut worst: f64 = 0.0;
        for (a, b) in [(0u32, 0u32), (0, 1), (1, 0), (2, 1), (1, 2)] {
            let f = TwistedFunction::special_hermite(a, b);
            for p in &points {
                let got = special_semigroup_apply(&f, t, SpecialMode::Kernel, p, &opts)?;
                let want = f.eval_entire(p)? * (-(2.0 * b as f64 + 1.0) * t).exp();
                worst = worst.max((got - want).norm() / (1.0 + want.norm()));
            }
        }
        o.push(Measurement::below(
            format!("t = {t}: eigen-relation residual"),
            worst,
            cfg.tol.special_eigen,
        ));
    }
    o.note("kappa_star", json!(kappas));
    Ok(o)
}

fn check_projections(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let rule = gauss_hermite_rule(cfg.quad.min(64))?;
    const K: usize = 4;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let p = [random_point(rng, 2.0, 0.5), random_point(rng, 2.0, 0.5)];
        for j in 0..K as u32 {
            let f = TwistedFunction::Laguerre { k: j, dim: 1 };
            let proj = laguerre_projections(&f, K, &p, &rule)?;
            let fj = f.eval_entire(&p)?;
            for (k, v) in proj.iter().enumerate() {
                let want = if k == j as usize { fj } else { c(0.0, 0.0) };
                worst = worst.max((v - want).norm());
            }
        }
    }
    o.push(Measurement::below(
        "max |(2 pi)^{-1} phi_k x phi_j - delta_kj phi_k|, k, j < 4",
        worst,
        cfg.tol.projection,
    ));
    let g = TwistedFunction::Gaussian { a: 1.0, dim: 1 };
    let r = laguerre_reconstruct(&g, 13, &[0.0, 0.0], &rule)?;
    o.push(Measurement::below(
        "gaussian(1): |sum_{k <= 12} projections - f| at 0",
        r.error,
        cfg.tol.reconstruction,
    ));
    o.note("reconstruction", serde_json::to_value(r)?);
    Ok(o)
}

fn check_tempered(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let grid = cfg.envelope_grid()?;
    for &t in &cfg.t {
        let img = EntireHandle::Mehler { t, center: vec![0.0] };
        let r = envelope_ratio(&img, &BoundSpec::Tempered { t, m: 0 }, &grid)?;
        let want = 1.0 / (2.0 * PI * (2.0 * t).sinh());
        stability(&mut o, &format!("t = {t}"), &r, cfg.tol.envelope_stability);
        o.push(Measurement::below(
            format!("t = {t}: relative error of the sup"),
            (r.sup_ratio / want - 1.0).abs(),
            cfg.tol.envelope_value,
        ));
    }
    Ok(o)
}

fn check_bridge(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let opts = cfg.semigroup_options()?;
    let points: Vec<ComplexPoint> = (0..10)
        .map(|_| {
            let r = rng.gen_range(0.0..=2.0);
            let th = rng.gen_range(0.0..2.0 * PI);
            ComplexPoint::new(vec![Complex64::from_polar(r, th)])
        })
        .collect();
    let fs = vec![
        ("h_0", TestFunction::hermite1(0)),
        ("h_1", TestFunction::hermite1(1)),
        ("h_2", TestFunction::hermite1(2)),
        ("gaussian(1)", TestFunction::gaussian(1.0, 1)?),
        ("dirac(0.3)", TestFunction::dirac(vec![0.3])?),
    ];
    for &t in &cfg.t {
        for (label, f) in &fs {
            let r = bridge_residual(f, t, &points, &opts)?;
            o.push(Measurement::below(format!("t = {t}, {label}: bridge residual"), r.residual, cfg.tol.bridge));
        }
    }
    let grid = PlaneGrid::new(vec![[-4.0, 4.0, -4.0, 4.0]], 41, GridLayout::Uniform)?;
    for a in [0.5, 2.0] {
        let r = pw_envelope(&TestFunction::hermite1(0), a, 0, &grid, &opts.rule)?;
        stability(&mut o, &format!("a = {a}, h_0, m = 0: windowed envelope"), &r, cfg.tol.envelope_stability);
    }
    Ok(o)
}

fn check_compact(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let opts = cfg.semigroup_options()?;
    let t = 0.5;
    let d = TestFunction::dirac(vec![0.5])?;
    let grid = PlaneGrid::new(vec![[-4.0, 4.0, -3.0, 3.0]], 41, GridLayout::Uniform)?;
    let r = compact_growth_check(&d, t, &grid, &opts)?;
    let want = (2.0 * PI * (2.0 * t).sinh()).powf(-0.5) * (-0.125 / (2.0 * t).tanh()).exp();
    stability(&mut o, "R = 0.5", &r, cfg.tol.envelope_stability);
    o.push(Measurement::below(
        "R = 0.5: relative error of the sup",
        (r.sup_ratio / want - 1.0).abs(),
        cfg.tol.envelope_value,
    ));
    let wide = PlaneGrid::new(vec![[-16.0, 16.0, -3.0, 3.0]], 65, GridLayout::Uniform)?;
    let growth = compact_growth_factor(&d, t, 0.3, &wide, 2.0, &opts)?;
    o.push(Measurement::new(
        "R = 0.3: sup growth when the half-width doubles from 16",
        growth,
        cfg.tol.compact_growth,
        Comparison::AtLeast,
    ));
    Ok(o)
}

/// Re-run a few checks from fresh generators and compare their serialized results.
fn check_determinism(cfg: &SuiteConfig, _: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut o = Outcome::default();
    let subset = ["hermite-orthonormality", "mehler-spectral-agreement", "laguerre-projections"];
    let mut differing = 0.0;
    for name in subset {
        let index = CHECKS.iter().position(|c| c.name == name).expect("registered check");
        let strip = |mut r: CheckResult| {
            r.seconds = 0.0;
            serde_json::to_string(&r)
        };
        let a = strip(run_indexed(index, cfg))?;
        let b = strip(run_indexed(index, cfg))?;
        if a != b {
            differing += 1.0;
        }
    }
    o.push(Measurement::new(
        "checks whose repeated runs differ",
        differing,
        0.0,
        Comparison::Equal,
    ));
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = SuiteConfig::default();
        let back = SuiteConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg, back);
        let sparse = SuiteConfig::from_json(r#"{"schema":"1","n":1,"N":48,"quad":128,"t":[0.3,0.5],"m":[0,1,2],"grid":{"box":[-8,8,-6,6],"res":128},"seed":12345}"#).unwrap();
        assert_eq!(sparse.m, vec![0, 1, 2]);
        assert_eq!(sparse.tol, Tolerances::default());
    }

    #[test]
    fn config_rejections() {
        for bad in [
            r#"{"schema":"2"}"#,
            r#"{"n":2}"#,
            r#"{"t":[]}"#,
            r#"{"t":[-1]}"#,
            r#"{"grid":{"box":[1,0,0,1],"res":10}}"#,
            r#"{"tol":{"mehler":-1}}"#,
            r#"{"unknown":1}"#,
        ] {
            assert!(matches!(SuiteConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn every_check_is_registered_once() {
        let names = check_names();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 14);
        assert!(run_check("nope", &SuiteConfig::default()).is_err());
    }

    #[test]
    fn cheap_checks_pass() {
        let cfg = SuiteConfig::default();
        for name in ["hermite-orthonormality", "mehler-spectral-agreement", "laguerre-projections"] {
            let r = run_check(name, &cfg).unwrap();
            assert_eq!(r.status, Status::Pass, "{r:?}");
        }
    }

    #[test]
    fn measurement_comparisons() {
        assert!(Measurement::below("x", 0.5, 1.0).pass);
        assert!(!Measurement::below("x", 0.0, 0.0).pass);
        assert!(Measurement::new("x", 12.0, 10.0, Comparison::AtLeast).pass);
        assert!(!Measurement::new("x", 2.0, 1.0, Comparison::Equal).pass);
    }

    #[test]
    fn under_truncation_fails_with_diagnostics() {
        let cfg = SuiteConfig {
            order: 4,
            ..SuiteConfig::default()
        };
        let r = run_check("mehler-spectral-agreement", &cfg).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert!(r.details["t=0.3"]["last_term_ratio"].as_f64().unwrap() > 1e-8);
    }
}
