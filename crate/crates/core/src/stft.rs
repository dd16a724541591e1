//! Windowed Fourier transform, its Gaussian-window form `T_a`, the identity linking `T_a` to
//! `e^{-tH}`, and Paley-Wiener type envelopes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{envelope_ratio, growth_factor, EnvelopeReport};
use crate::error::{require_dim, require_positive_time, Error, Result};
use crate::kernels::BoundSpec;
use crate::quadrature::{gauss_legendre_rule, integrate_tensor, shifted, PlaneGrid, QuadKind, QuadRule};
use crate::semigroup::{semigroup_image, Mode, SemigroupOptions};
use crate::spectral::{EntireHandle, TestFunction};
use crate::specfun::{ComplexPoint, LogComplex};

/// Relative level below which the Gaussian tail of an integrand is ignored.
const TAIL_LOG: f64 = 41.446_531_673_892_82; // ln 1e18

/// Analysis window `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WindowSpec {
    /// `c e^{-a|x|^2/2}`.
    Gaussian { a: f64, c: f64 },
    General { f: TestFunction },
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WindowSpec::Gaussian { a, c } => {
                if !(a.is_finite() && *a > 0.0 && c.is_finite() && *c > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Gaussian window needs a > 0 and c > 0, got a = {a}, c = {c}"
                    )));
                }
                Ok(())
            }
            WindowSpec::General { f } => {
                if matches!(f, TestFunction::Dirac { .. }) {
                    return Err(Error::Unsupported("a point mass cannot serve as a window".into()));
                }
                f.validate()
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        match self {
            WindowSpec::Gaussian { a, c } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Ok(Complex64::new(c * (-0.5 * a * r2).exp(), 0.0))
            }
            WindowSpec::General { f } => f.eval(x),
        }
    }

    fn decay_rate(&self) -> f64 {
        match self {
            WindowSpec::Gaussian { a, .. } => *a,
            WindowSpec::General { f } => f.decay_rate().unwrap_or(0.0),
        }
    }
}

/// Refuse when `q` nodes cannot follow the oscillation `e^{-ix.u}` over the half-width `half`.
fn oscillation_guard(rule: &QuadRule, x_max: f64, half: f64) -> Result<()> {
    let need = 8.0 * x_max * half / PI;
    if (rule.len() as f64) < need {
        return Err(Error::RuleTooCoarse(format!(
            "{} nodes cannot follow frequency {x_max} over half-width {half:.3}; need {}",
            rule.len(),
            need.ceil()
        )));
    }
    Ok(())
}

fn gaussian_rules(rule: &QuadRule, rate: f64, centers: &[f64]) -> Result<Vec<QuadRule>> {
    if rule.kind != QuadKind::GaussHermite {
        return Err(Error::InvalidParameter(
            "Gaussian-dominated integrands need a Gauss-Hermite rule".into(),
        ));
    }
    let base = rule.scaled((2.0 / rate).sqrt());
    Ok(centers.iter().map(|&c| shifted(&base, c)).collect())
}

/// `V_g f(x, y) = (2 pi)^{-n/2} int f(u) g(u - y) e^{-i x.u} du`.
pub fn windowed_transform(f: &TestFunction, g: &WindowSpec, x: &[f64], y: &[f64], rule: &QuadRule) -> Result<Complex64> {
    f.validate()?;
    g.validate()?;
    let n = f.dim();
    require_dim(n, x.len())?;
    require_dim(n, y.len())?;
    let norm = (2.0 * PI).powf(-0.5 * n as f64);
    if let TestFunction::Dirac { center } = f {
        let shiftd: Vec<f64> = center.iter().zip(y).map(|(c, yy)| c - yy).collect();
        let phase: f64 = x.iter().zip(center).map(|(a, b)| a * b).sum();
        return Ok(g.eval(&shiftd)? * Complex64::from_polar(norm, -phase));
    }
    let x_max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rules = match f {
        TestFunction::Bump { radius, .. } => {
            oscillation_guard(rule, x_max, *radius)?;
            vec![gauss_legendre_rule(rule.len())?.mapped(-radius, *radius); n]
        }
        _ => {
            let af = f.decay_rate().ok_or_else(|| {
                Error::Unsupported("windowed transform needs a decaying or compactly supported function".into())
            })?;
            let ag = g.decay_rate();
            let total = af + ag;
            oscillation_guard(rule, x_max, (2.0 * TAIL_LOG / total).sqrt())?;
            let centers: Vec<f64> = y.iter().map(|v| ag * v / total).collect();
            gaussian_rules(rule, total, &centers)?
        }
    };
    let refs: Vec<&QuadRule> = rules.iter().collect();
    let v = integrate_tensor(
        |u| {
            let diff: Vec<f64> = u.iter().zip(y).map(|(a, b)| a - b).collect();
            let phase: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
            let fv = f.eval(u).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let gv = g.eval(&diff).unwrap_or(Complex64::new(f64::NAN, 0.0));
            fv * gv * Complex64::from_polar(1.0, -phase)
        },
        &refs,
    )?;
    Ok(v * norm)
}

/// `T_a f(z) = (2 pi)^{-n/2} int f(u) c e^{-a|u|^2/2} e^{-i z.u} du` in log form, entire in `z`.
pub fn gauss_stft_log(f: &TestFunction, a: f64, z: &[Complex64], c: f64, rule: &QuadRule) -> Result<LogComplex> {
    f.validate()?;
    WindowSpec::Gaussian { a, c }.validate()?;
    let n = f.dim();
    require_dim(n, z.len())?;
    if z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Domain("non-finite point".into()));
    }
    let log_norm = -0.5 * n as f64 * (2.0 * PI).ln() + c.ln();
    if let TestFunction::Dirac { center } = f {
        let mut e = Complex64::new(log_norm, 0.0);
        for (zj, uj) in z.iter().zip(center) {
            e += -0.5 * a * uj * uj - Complex64::new(0.0, 1.0) * zj * uj;
        }
        return Ok(LogComplex::from_exp(e));
    }
    let x_max = z.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    // e^{-i z u} = e^{-i x u} e^{y u}; the real part peaks at u = y/(a_f + a)
    let (rules, peak) = match f {
        TestFunction::Bump { radius, .. } => {
            oscillation_guard(rule, x_max, *radius)?;
            let peak: f64 = z.iter().map(|v| radius * v.im.abs()).sum();
            (vec![gauss_legendre_rule(rule.len())?.mapped(-radius, *radius); n], peak)
        }
        _ => {
            let af = f
                .decay_rate()
                .ok_or_else(|| Error::Unsupported("T_a needs a decaying or compactly supported function".into()))?;
            let total = af + a;
            oscillation_guard(rule, x_max, (2.0 * TAIL_LOG / total).sqrt())?;
            let centers: Vec<f64> = z.iter().map(|v| v.im / total).collect();
            let peak: f64 = z.iter().map(|v| v.im * v.im / (2.0 * total)).sum();
            (gaussian_rules(rule, total, &centers)?, peak)
        }
    };
    let refs: Vec<&QuadRule> = rules.iter().collect();
    let i = Complex64::new(0.0, 1.0);
    let v = integrate_tensor(
        |u| {
            let mut e = Complex64::new(-peak, 0.0);
            for (uj, zj) in u.iter().zip(z) {
                e += -0.5 * a * uj * uj - i * zj * uj;
            }
            f.eval(u).unwrap_or(Complex64::new(f64::NAN, 0.0)) * e.exp()
        },
        &refs,
    )?;
    Ok(LogComplex::from_complex(v).mul_exp(Complex64::new(log_norm + peak, 0.0)))
}

pub fn gauss_stft(f: &TestFunction, a: f64, z: &ComplexPoint, c: f64, rule: &QuadRule) -> Result<Complex64> {
    Ok(gauss_stft_log(f, a, z.coords(), c, rule)?.to_complex())
}

/// Window constant `c_n(a) = (a^2 - 1)^{n/4}` that makes
/// `e^{-tH} f(z) = e^{-coth(2t) z^2/2} T_a f(iz / sinh 2t)` exact with `a = coth 2t`.
pub fn bridge_constant(a: f64, n: usize) -> Result<f64> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::Domain(format!("the bridge needs a > 1, got {a}")));
    }
    Ok((a * a - 1.0).powf(0.25 * n as f64))
}

/// Comparison of `e^{-tH} f` with its `T_a` form over a set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub t: f64,
    pub a: f64,
    pub c: f64,
    /// Max of `|lhs - rhs| / |lhs|`.
    pub residual: f64,
    pub worst_point: Vec<Complex64>,
    pub points: usize,
}

/// Right side `e^{-coth(2t) z^2/2} T_a f(iz / sinh 2t)` in log form.
pub fn bridge_rhs_log(f: &TestFunction, t: f64, z: &[Complex64], rule: &QuadRule) -> Result<LogComplex> {
    require_positive_time(t)?;
    let a = 1.0 / (2.0 * t).tanh();
    let s = (2.0 * t).sinh();
    let c = bridge_constant(a, z.len())?;
    let w: Vec<Complex64> = z.iter().map(|v| Complex64::new(0.0, 1.0) * v / s).collect();
    let z2: Complex64 = z.iter().map(|v| v * v).sum();
    Ok(gauss_stft_log(f, a, &w, c, rule)?.mul_exp(-0.5 * a * z2))
}

/// Evaluate both sides independently: the left through the Hermite series (closed-form
/// kernel for point masses), the right through `T_a`.
pub fn bridge_residual(f: &TestFunction, t: f64, points: &[ComplexPoint], opts: &SemigroupOptions) -> Result<BridgeReport> {
    require_positive_time(t)?;
    if points.is_empty() {
        return Err(Error::InvalidParameter("bridge check needs at least one point".into()));
    }
    let a = 1.0 / (2.0 * t).tanh();
    let c = bridge_constant(a, f.dim())?;
    let lhs = semigroup_image(f, t, Mode::Spectral, opts)?;
    let mut residual: f64 = 0.0;
    let mut worst = points[0].coords().to_vec();
    for z in points {
        let l = lhs.eval(z)?;
        let r = bridge_rhs_log(f, t, z.coords(), &opts.rule)?.to_complex();
        let e = (l - r).norm() / l.norm().max(f64::MIN_POSITIVE);
        if !(e <= residual) {
            residual = e;
            worst = z.coords().to_vec();
        }
    }
    Ok(BridgeReport {
        t,
        a,
        c,
        residual,
        worst_point: worst,
        points: points.len(),
    })
}

/// Max over `points` of `|dF/dy - i dF/dx| / (1 + |F'|)` for `F = T_a f`, by central
/// differences with step `h`.
pub fn stft_cauchy_riemann(f: &TestFunction, a: f64, c: f64, points: &[ComplexPoint], h: f64, rule: &QuadRule) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in points {
        let n = z.dim();
        for j in 0..n {
            let at = |d: Complex64| -> Result<Complex64> {
                let mut p = z.coords().to_vec();
                p[j] += d;
                Ok(gauss_stft_log(f, a, &p, c, rule)?.to_complex())
            };
            let dx = (at(Complex64::new(h, 0.0))? - at(Complex64::new(-h, 0.0))?) / (2.0 * h);
            let dy = (at(Complex64::new(0.0, h))? - at(Complex64::new(0.0, -h))?) / (2.0 * h);
            let r = (dy - Complex64::new(0.0, 1.0) * dx).norm() / (1.0 + dx.norm());
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Sup of `|T_a f| / ((1+x^2+y^2)^m e^{y^2/(2a)})` over the grid (window constant 1).
pub fn pw_envelope(f: &TestFunction, a: f64, m: u32, grid: &PlaneGrid, rule: &QuadRule) -> Result<EnvelopeReport> {
    f.validate()?;
    let handle = EntireHandle::GaussStft {
        f: f.clone(),
        a,
        c: 1.0,
        rule: rule.clone(),
    };
    envelope_ratio(&handle, &BoundSpec::PwStft { a, m }, grid)
}

/// Support radius of a point mass (`|u0|`) or bump.
pub fn support_radius(f: &TestFunction) -> Result<f64> {
    match f {
        TestFunction::Dirac { center } => Ok(center.iter().map(|v| v * v).sum::<f64>().sqrt()),
        TestFunction::Bump { radius, .. } => Ok(*radius),
        _ => Err(Error::Unsupported(
            "compact-support checks need a point mass or a bump".into(),
        )),
    }
}

/// Envelope of `e^{-tH} f` against the compact-support bound with the radius of `f`.
pub fn compact_growth_check(f: &TestFunction, t: f64, grid: &PlaneGrid, opts: &SemigroupOptions) -> Result<EnvelopeReport> {
    compact_growth_check_with_radius(f, t, support_radius(f)?, grid, opts)
}

/// Envelope against the compact-support bound with an arbitrary radius.
pub fn compact_growth_check_with_radius(
    f: &TestFunction,
    t: f64,
    radius: f64,
    grid: &PlaneGrid,
    opts: &SemigroupOptions,
) -> Result<EnvelopeReport> {
    support_radius(f)?;
    let handle = semigroup_image(f, t, Mode::Kernel, opts)?;
    envelope_ratio(&handle, &BoundSpec::Compact { t, radius }, grid)
}

/// Factor by which the compact-support sup grows when the box is scaled by `factor`.
pub fn compact_growth_factor(
    f: &TestFunction,
    t: f64,
    radius: f64,
    grid: &PlaneGrid,
    factor: f64,
    opts: &SemigroupOptions,
) -> Result<f64> {
    let handle = semigroup_image(f, t, Mode::Kernel, opts)?;
    growth_factor(&handle, &BoundSpec::Compact { t, radius }, grid, factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_hermite_rule, GridLayout};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gh(q: usize) -> QuadRule {
        gauss_hermite_rule(q).unwrap()
    }

    #[test]
    fn windowed_transform_values() {
        let h0 = TestFunction::hermite1(0);
        let g = WindowSpec::Gaussian { a: 1.0, c: PI.powf(-0.25) };
        let v = windowed_transform(&h0, &g, &[0.0], &[0.0], &gh(64)).unwrap();
        assert!((v.re - (2.0 * PI).powf(-0.5)).abs() < 1e-14);
        let d = TestFunction::dirac(vec![0.5]).unwrap();
        let v = windowed_transform(&d, &WindowSpec::Gaussian { a: 2.0, c: 1.0 }, &[1.0], &[0.0], &gh(8)).unwrap();
        let want = Complex64::from_polar((2.0 * PI).powf(-0.5) * (-0.25f64).exp(), -0.5);
        assert!((v - want).norm() < 1e-15);
        let h1 = TestFunction::hermite1(1);
        assert!(windowed_transform(&h1, &g, &[0.0], &[0.0], &gh(64)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn oscillation_guard_refuses() {
        let h0 = TestFunction::hermite1(0);
        let g = WindowSpec::Gaussian { a: 1.0, c: 1.0 };
        assert!(matches!(
            windowed_transform(&h0, &g, &[40.0], &[0.0], &gh(32)),
            Err(Error::RuleTooCoarse(_))
        ));
    }

    #[test]
    fn gauss_stft_closed_form() {
        let h0 = TestFunction::hermite1(0);
        for z in [c(0.0, 0.0), c(1.0, 2.0), c(-0.5, -3.0)] {
            let v = gauss_stft(&h0, 2.0, &ComplexPoint::new(vec![z]), 1.0, &gh(64)).unwrap();
            let want = PI.powf(-0.25) / 3f64.sqrt() * (-z * z / 6.0).exp();
            assert!((v - want).norm() < 1e-13 * want.norm().max(1.0), "{z}: {v} {want}");
        }
        let d0 = TestFunction::dirac(vec![0.0]).unwrap();
        let v = gauss_stft(&d0, 1.0, &ComplexPoint::new(vec![c(3.0, 1.0)]), 1.0, &gh(8)).unwrap();
        assert!((v - c((2.0 * PI).powf(-0.5), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bridge_exact_for_ground_state() {
        let opts = SemigroupOptions::new(16, 64).unwrap();
        let pts: Vec<ComplexPoint> = [c(0.3, 0.1), c(-1.5, 0.8), c(1.9, -0.4)]
            .iter()
            .map(|z| ComplexPoint::new(vec![*z]))
            .collect();
        let r = bridge_residual(&TestFunction::hermite1(0), 0.4, &pts, &opts).unwrap();
        assert!(r.residual < 1e-12, "{r:?}");
        assert!((r.c - (0.8f64).sinh().powf(-0.5)).abs() < 1e-15);
        let r = bridge_residual(&TestFunction::dirac(vec![0.3]).unwrap(), 0.5, &pts, &opts).unwrap();
        assert!(r.residual < 1e-12, "{r:?}");
    }

    #[test]
    fn pw_envelope_ground_state() {
        let grid = PlaneGrid::centered(1, 4.0, 4.0, 41, GridLayout::Uniform).unwrap();
        let r = pw_envelope(&TestFunction::dirac(vec![0.0]).unwrap(), 1.0, 0, &grid, &gh(64)).unwrap();
        assert!((r.sup_ratio - (2.0 * PI).powf(-0.5)).abs() < 1e-12);
        let r = pw_envelope(&TestFunction::hermite1(0), 0.5, 0, &grid, &gh(128)).unwrap();
        assert!(r.is_finite() && r.stable, "{r:?}");
    }

    #[test]
    fn compact_bound_for_point_mass() {
        let opts = SemigroupOptions::new(16, 64).unwrap();
        let grid = PlaneGrid::centered(1, 4.0, 3.0, 33, GridLayout::Uniform).unwrap();
        let d = TestFunction::dirac(vec![0.5]).unwrap();
        let r = compact_growth_check(&d, 0.5, &grid, &opts).unwrap();
        let want = (2.0 * PI * 1f64.sinh()).powf(-0.5) * (-0.125 / 1f64.tanh()).exp();
        assert!((r.sup_ratio - want).abs() < 1e-10 * want, "{} {want}", r.sup_ratio);
        let wide = PlaneGrid::centered(1, 16.0, 3.0, 65, GridLayout::Uniform).unwrap();
        let g = compact_growth_factor(&d, 0.5, 0.3, &wide, 2.0, &opts).unwrap();
        assert!(g > 10.0, "{g}");
    }
}
