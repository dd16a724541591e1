//! The Hermite semigroup `e^{-tH}` as a map onto spaces of entire functions: evaluation in
//! spectral and kernel form, weighted Bergman norms, weight calibration and the reproducing
//! property.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{envelope_ratio, EnvelopeReport};
use crate::error::{require_dim, require_positive_time, Error, Result};
use crate::kernels::{mehler_kernel_log, weight_u_log, BoundSpec, WeightProfile};
use crate::quadrature::{
    gauss_hermite_rule, gauss_legendre_rule, gaussian_half_width, integrate_plane,
    integrate_plane_many, integrate_tensor, integrate_rn, shifted, GridLayout, PlaneGrid, QuadRule,
};
use crate::spectral::{adapted_rule, eval_series, expand, EntireHandle, HermiteExpansion, TestFunction};
use crate::specfun::{hermite_tensor, hermite_tensor_log, ComplexPoint, LogComplex, MultiIndex};

/// How `e^{-tH} f` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Truncated Hermite series.
    Spectral,
    /// Quadrature against the Mehler kernel.
    Kernel,
}

/// Truncation and quadrature settings shared by the semigroup operations.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupOptions {
    pub order: u32,
    pub rule: QuadRule,
}

/// Default truncation order for dimension `n`.
pub fn default_order(n: usize) -> u32 {
    match n {
        1 => 48,
        2 => 24,
        _ => 12,
    }
}

impl SemigroupOptions {
    pub fn new(order: u32, q: usize) -> Result<Self> {
        Ok(SemigroupOptions {
            order,
            rule: gauss_hermite_rule(q)?,
        })
    }

    /// Default order for dimension `n` with a 128-point rule.
    pub fn for_dim(n: usize) -> Result<Self> {
        Self::new(default_order(n), 128)
    }
}

/// `e^{-tH} f(z)` in log form.
pub fn semigroup_apply_log(
    f: &TestFunction,
    t: f64,
    mode: Mode,
    z: &ComplexPoint,
    opts: &SemigroupOptions,
) -> Result<LogComplex> {
    require_positive_time(t)?;
    require_dim(f.dim(), z.dim())?;
    z.check_finite()?;
    match mode {
        Mode::Spectral => {
            let e = expand(f, opts.order, &opts.rule)?;
            Ok(eval_series(&e, t, z.coords())?.value)
        }
        Mode::Kernel => kernel_apply_log(f, t, z.coords(), &opts.rule),
    }
}

/// The entire extension `e^{-tH} f(z)`.
pub fn semigroup_apply(
    f: &TestFunction,
    t: f64,
    mode: Mode,
    z: &ComplexPoint,
    opts: &SemigroupOptions,
) -> Result<Complex64> {
    Ok(semigroup_apply_log(f, t, mode, z, opts)?.to_complex())
}

/// `e^{-tH} f` as an evaluable handle; point masses always use the closed-form kernel.
pub fn semigroup_image(f: &TestFunction, t: f64, mode: Mode, opts: &SemigroupOptions) -> Result<EntireHandle> {
    require_positive_time(t)?;
    f.validate()?;
    if let TestFunction::Dirac { center } = f {
        return Ok(EntireHandle::Mehler {
            t,
            center: center.clone(),
        });
    }
    Ok(match mode {
        Mode::Spectral => EntireHandle::Hermite {
            expansion: expand(f, opts.order, &opts.rule)?,
            t,
        },
        Mode::Kernel => EntireHandle::HermiteKernel {
            f: f.clone(),
            t,
            rule: opts.rule.clone(),
        },
    })
}

/// `int f(u) K_t(z, u) du` with the Gaussian part of the kernel folded into the rule.
pub(crate) fn kernel_apply_log(f: &TestFunction, t: f64, z: &[Complex64], rule: &QuadRule) -> Result<LogComplex> {
    require_positive_time(t)?;
    require_dim(f.dim(), z.len())?;
    f.validate()?;
    if let TestFunction::Dirac { center } = f {
        let c: Vec<Complex64> = center.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        return mehler_kernel_log(t, z, &c);
    }
    let n = z.len();
    let s = (2.0 * t).sinh();
    let b = 1.0 / (2.0 * t).tanh();
    let z2: Complex64 = z.iter().map(|c| c * c).sum();
    let pre = Complex64::new(-0.5 * n as f64 * (2.0 * std::f64::consts::PI * s).ln(), 0.0) - 0.5 * b * z2;
    let (rules, peak) = match f {
        TestFunction::Bump { radius, .. } => {
            let r = gauss_legendre_rule(rule.len())?.mapped(-radius, *radius);
            let peak: f64 = z.iter().map(|c| radius * c.re.abs() / s).sum();
            (vec![r; n], peak)
        }
        _ => {
            let a = f.decay_rate().unwrap_or(1.0);
            let base = adapted_rule(f, rule, b)?;
            let rules = z.iter().map(|c| shifted(&base, c.re / (s * (a + b)))).collect();
            let peak: f64 = z.iter().map(|c| c.re * c.re / (2.0 * s * s * (a + b))).sum();
            (rules, peak)
        }
    };
    let refs: Vec<&QuadRule> = rules.iter().collect();
    let integral = integrate_tensor(
        |u| {
            let fu = f.eval(u).unwrap_or(Complex64::new(f64::NAN, 0.0));
            let mut e = Complex64::new(-peak, 0.0);
            for (uj, zj) in u.iter().zip(z) {
                e += -0.5 * b * uj * uj + zj * uj / s;
            }
            fu * e.exp()
        },
        &refs,
    )?;
    Ok(LogComplex::from_complex(integral).mul_exp(pre + peak))
}

/// Gauss-Legendre box for integrals of `|e^{-tH} f|^2` against `U_t` (or its time derivatives),
/// with `degree` the polynomial degree in `|z|` of the integrand beyond its Gaussian.
pub fn hermite_grid(t: f64, n: usize, degree: u32, resolution: usize) -> Result<PlaneGrid> {
    require_positive_time(t)?;
    let rx = 1.0 - (2.0 * t).tanh();
    let ry = 1.0 / (2.0 * t).tanh() - 1.0;
    let hx = gaussian_half_width(rx, degree);
    let hy = gaussian_half_width(ry, degree);
    PlaneGrid::centered(n, hx, hy, resolution, GridLayout::GaussLegendre)
}

fn features(p: &[Complex64]) -> [f64; 2] {
    [
        p.iter().map(|c| c.re * c.re).sum(),
        p.iter().map(|c| c.im * c.im).sum(),
    ]
}

/// `int F conj(G) (d^{2m}/dt^{2m} U_t) dz` over the grid, with the weight as printed.
pub fn bergman_inner(
    f: &EntireHandle,
    g: &EntireHandle,
    t: f64,
    m: u32,
    grid: &PlaneGrid,
) -> Result<Complex64> {
    let n = f.complex_dim();
    require_dim(n, g.complex_dim())?;
    require_dim(n, grid.complex_dim())?;
    let prof = WeightProfile::hermite(t, m, n)?;
    integrate_plane(
        |p| {
            let w = prof.eval(&features(p), 0.0);
            let v = (f.eval_log(p)? * g.eval_log(p)?.conj()).mul_exp(Complex64::new(w.log_magnitude, 0.0));
            Ok(v.to_complex() * w.factor)
        },
        grid,
    )
}

/// `(F, F)_m = int |F|^2 (d^{2m}/dt^{2m} U_t) dz`; `m = 0` is the squared norm of `H_t(C^n)`
/// under the printed weight.
pub fn bergman_norm(f: &EntireHandle, t: f64, m: u32, grid: &PlaneGrid) -> Result<f64> {
    let n = f.complex_dim();
    require_dim(n, grid.complex_dim())?;
    let prof = WeightProfile::hermite(t, m, n)?;
    let v = integrate_plane(
        |p| {
            let w = prof.eval(&features(p), 0.0);
            let lf = f.eval_log(p)?;
            if lf.is_zero() {
                return Ok(Complex64::new(0.0, 0.0));
            }
            Ok(Complex64::new(
                (2.0 * lf.log_magnitude + w.log_magnitude).exp() * w.factor,
                0.0,
            ))
        },
        grid,
    )?;
    Ok(v.re)
}

/// A norm with its value on the refined grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub refined: f64,
    /// Relative change under refinement.
    pub change: f64,
    /// Set when the change exceeds `1e-8` relative.
    pub flagged: bool,
}

/// [`bergman_norm`] on `grid` and `grid.refined()`.
pub fn bergman_norm_checked(f: &EntireHandle, t: f64, m: u32, grid: &PlaneGrid) -> Result<NormEstimate> {
    let value = bergman_norm(f, t, m, grid)?;
    let refined = bergman_norm(f, t, m, &grid.refined())?;
    let change = (refined - value).abs() / value.abs().max(f64::MIN_POSITIVE);
    Ok(NormEstimate {
        value,
        refined,
        change,
        flagged: change > 1e-8,
    })
}

/// Diagonal calibration data for one multi-index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRatio {
    pub alpha: MultiIndex,
    /// `int |Phi_alpha|^2 U_t dz`.
    pub integral: f64,
    /// `int |Phi_alpha|^2 U_t dz / e^{2(2|alpha|+n)t}`.
    pub ratio: f64,
}

/// Outcome of [`calibrate_weight`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Multiplier making `kappa * U_t` an exact isometry weight.
    pub kappa: f64,
    pub t: f64,
    pub ratios: Vec<IndexRatio>,
    /// `max |ratio / mean - 1|` over the indices.
    pub spread: f64,
    /// Largest `|int Phi_alpha conj(Phi_beta) U_t dz|` over distinct pairs.
    pub max_offdiag: f64,
}

/// Largest relative deviation tolerated before calibration is declared broken.
pub const CALIBRATION_SPREAD_LIMIT: f64 = 1e-3;

/// Determine the constant `kappa` with `kappa * int |Phi_alpha|^2 U_t = e^{2(2|alpha|+n)t}`.
///
/// `kappa` is the geometric mean over `alphas` of the inverse diagonal ratios. All pairwise
/// integrals are computed in one sweep over the grid.
pub fn calibrate_weight(t: f64, n: usize, alphas: &[MultiIndex], grid: &PlaneGrid) -> Result<CalibrationResult> {
    require_positive_time(t)?;
    require_dim(n, grid.complex_dim())?;
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("calibration needs at least one multi-index".into()));
    }
    for a in alphas {
        require_dim(n, a.dim())?;
    }
    let k = alphas.len();
    let prof = WeightProfile::hermite(t, 0, n)?;
    let gram = integrate_plane_many(
        |p, out: &mut [Complex64]| {
            let w = prof.eval(&features(p), 0.0).log_magnitude;
            let zp = ComplexPoint::new(p.to_vec());
            let vals: Vec<LogComplex> = alphas
                .iter()
                .map(|a| hermite_tensor_log(a, &zp))
                .collect::<Result<_>>()?;
            let mut idx = 0;
            for i in 0..k {
                for j in i..k {
                    out[idx] = (vals[i] * vals[j].conj())
                        .mul_exp(Complex64::new(w, 0.0))
                        .to_complex();
                    idx += 1;
                }
            }
            Ok(())
        },
        k * (k + 1) / 2,
        grid,
    )?;
    let mut ratios = Vec::with_capacity(k);
    let mut max_offdiag: f64 = 0.0;
    let mut idx = 0;
    for i in 0..k {
        for j in i..k {
            if i == j {
                let integral = gram[idx].re;
                let ratio = integral / (2.0 * alphas[i].eigenvalue() * t).exp();
                ratios.push(IndexRatio {
                    alpha: alphas[i].clone(),
                    integral,
                    ratio,
                });
            } else {
                max_offdiag = max_offdiag.max(gram[idx].norm());
            }
            idx += 1;
        }
    }
    if ratios.iter().any(|r| !(r.ratio > 0.0)) {
        return Err(Error::Calibration("non-positive diagonal integral".into()));
    }
    let log_mean = ratios.iter().map(|r| r.ratio.ln()).sum::<f64>() / k as f64;
    let mean = log_mean.exp();
    let spread = ratios
        .iter()
        .map(|r| (r.ratio / mean - 1.0).abs())
        .fold(0.0, f64::max);
    if spread > CALIBRATION_SPREAD_LIMIT {
        return Err(Error::Calibration(format!(
            "diagonal ratios vary by {spread:.3e} across indices"
        )));
    }
    Ok(CalibrationResult {
        kappa: 1.0 / mean,
        t,
        ratios,
        spread,
        max_offdiag,
    })
}

/// Gauss-Legendre box for the reproducing integral at `z`.
pub fn reproduce_grid(t: f64, z: &ComplexPoint, degree: u32, resolution: usize) -> Result<PlaneGrid> {
    require_positive_time(t)?;
    let c4 = 1.0 / (4.0 * t).tanh();
    let rx = 0.5 * (1.0 + c4) - (2.0 * t).tanh();
    let ry = 1.0 / (2.0 * t).tanh() - 0.5 * (1.0 + c4);
    let s4 = (4.0 * t).sinh();
    let boxes = z
        .coords()
        .iter()
        .map(|c| {
            // the kernel tilts the Gaussian towards z
            let cx = c.re / (2.0 * rx * s4);
            let cy = c.im / (2.0 * ry * s4);
            let hx = gaussian_half_width(rx, degree);
            let hy = gaussian_half_width(ry, degree);
            [cx - hx, cx + hx, cy - hy, cy + hy]
        })
        .collect();
    PlaneGrid::new(boxes, resolution, GridLayout::GaussLegendre)
}

/// `int F(w) conj(K_t(z, w)) kappa U_t(w) dw`, which equals `F(z)` for `F` in `H_t(C^n)`.
pub fn reproduce(f: &EntireHandle, t: f64, kappa: f64, z: &ComplexPoint, grid: &PlaneGrid) -> Result<Complex64> {
    require_positive_time(t)?;
    let n = f.complex_dim();
    require_dim(n, z.dim())?;
    require_dim(n, grid.complex_dim())?;
    let log_kappa = kappa.ln();
    integrate_plane(
        |w| {
            let wc: Vec<Complex64> = w.iter().map(|c| c.conj()).collect();
            // conj K_{2t}(conj z, w) = K_{2t}(z, conj w)
            let k = mehler_kernel_log(2.0 * t, z.coords(), &wc)?;
            let u = weight_u_log(t, w)?;
            Ok((f.eval_log(w)? * k)
                .mul_exp(Complex64::new(u + log_kappa, 0.0))
                .to_complex())
        },
        grid,
    )
}

/// Envelope reports of `e^{-tH} f` against the Schwartz-image bound, one per `m`.
pub fn schwartz_image_check(
    f: &TestFunction,
    t: f64,
    m_list: &[u32],
    grid: &PlaneGrid,
    opts: &SemigroupOptions,
) -> Result<Vec<EnvelopeReport>> {
    let handle = semigroup_image(f, t, Mode::Spectral, opts)?;
    m_list
        .iter()
        .map(|&m| envelope_ratio(&handle, &BoundSpec::SchwartzImage { t, m }, grid))
        .collect()
}

/// Recover `(f, Phi_alpha)` from `F = e^{-tH} f` restricted to `R^n`:
/// `c_alpha = e^{(2|alpha|+n)t} int F(x) Phi_alpha(x) dx`.
pub fn recover_coefficients(f: &EntireHandle, t: f64, order: u32, rule: &QuadRule) -> Result<HermiteExpansion> {
    require_positive_time(t)?;
    let n = f.complex_dim();
    if rule.len() < order as usize + 1 {
        return Err(Error::RuleTooCoarse(format!(
            "{} nodes cannot resolve coefficients up to order {order}",
            rule.len()
        )));
    }
    let mut entries = Vec::new();
    for alpha in MultiIndex::graded(n, order) {
        let v = integrate_rn(
            |x| {
                let p = ComplexPoint::from_real(x);
                match (f.eval(&p), hermite_tensor(&alpha, &p)) {
                    (Ok(a), Ok(b)) => a * b,
                    _ => Complex64::new(f64::NAN, 0.0),
                }
            },
            rule,
            n,
        )?;
        entries.push((alpha.clone(), v * (alpha.eigenvalue() * t).exp()));
    }
    HermiteExpansion::from_entries(n, &entries).map(|e| e.with_order(order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn opts() -> SemigroupOptions {
        SemigroupOptions::for_dim(1).unwrap()
    }

    #[test]
    fn ground_state_both_modes() {
        let f = TestFunction::hermite1(0);
        let want = (-0.3f64).exp() * PI.powf(-0.25);
        for mode in [Mode::Spectral, Mode::Kernel] {
            let v = semigroup_apply(&f, 0.3, mode, &ComplexPoint::origin(1), &opts()).unwrap();
            assert!((v - c(want, 0.0)).norm() < 1e-12, "{mode:?} {v}");
        }
    }

    #[test]
    fn kernel_eigenfunction_integral() {
        let v = semigroup_apply(
            &TestFunction::hermite1(0),
            0.3,
            Mode::Kernel,
            &ComplexPoint::from_real(&[1.0]),
            &opts(),
        )
        .unwrap();
        let want = (-0.3f64).exp() * PI.powf(-0.25) * (-0.5f64).exp();
        assert!((v.re - want).abs() < 1e-12);
        assert!((v.re - 0.337500).abs() < 1e-5);
    }

    #[test]
    fn point_mass_image() {
        let f = TestFunction::dirac(vec![0.5]).unwrap();
        let v = semigroup_apply(&f, 0.5, Mode::Kernel, &ComplexPoint::origin(1), &opts()).unwrap();
        let want = (2.0 * PI * 1f64.sinh()).powf(-0.5) * (-0.125 / 1f64.tanh()).exp();
        assert!((v.re - want).abs() < 1e-14);
    }

    #[test]
    fn gaussian_modes_agree() {
        let f = TestFunction::gaussian(1.0, 1).unwrap();
        let z = ComplexPoint::new(vec![c(1.0, 1.0)]);
        let a = semigroup_apply(&f, 0.4, Mode::Spectral, &z, &opts()).unwrap();
        let b = semigroup_apply(&f, 0.4, Mode::Kernel, &z, &opts()).unwrap();
        assert!((a - b).norm() < 1e-8 * a.norm());
    }

    #[test]
    fn bump_kernel_matches_spectral_at_small_points() {
        let f = TestFunction::bump(1.0, 1).unwrap();
        let o = SemigroupOptions::new(60, 200).unwrap();
        let z = ComplexPoint::new(vec![c(0.3, 0.2)]);
        let a = semigroup_apply(&f, 0.4, Mode::Kernel, &z, &o).unwrap();
        let b = semigroup_apply(&f, 0.4, Mode::Spectral, &z, &o).unwrap();
        assert!((a - b).norm() < 1e-6 * a.norm(), "{a} {b}");
    }

    #[test]
    fn calibration_probe_and_isometry() {
        let t = 0.25;
        let grid = hermite_grid(t, 1, 8, 128).unwrap();
        let f = semigroup_image(&TestFunction::hermite1(0), t, Mode::Spectral, &opts()).unwrap();
        let raw = bergman_norm(&f, t, 0, &grid).unwrap();
        assert!((raw - (2.0 * PI).sqrt()).abs() < 1e-8);
        let alphas: Vec<_> = (0..=4).map(MultiIndex::single).collect();
        let cal = calibrate_weight(t, 1, &alphas, &grid).unwrap();
        assert!((cal.kappa - (2.0 * PI).powf(-0.5)).abs() < 1e-9);
        assert!(cal.spread < 1e-8);
        assert!(cal.max_offdiag < 1e-9);
        assert!((cal.kappa * raw - 1.0).abs() < 1e-8);
    }

    #[test]
    fn probe_integral_value() {
        let grid = PlaneGrid::centered(1, 8.0, 8.0, 128, GridLayout::GaussLegendre).unwrap();
        let h0 = EntireHandle::Hermite {
            expansion: HermiteExpansion::from_entries(1, &[(MultiIndex::single(0), c(1.0, 0.0))]).unwrap(),
            t: 1e-300,
        };
        let v = bergman_norm(&h0, 0.25, 0, &grid).unwrap();
        assert!((v - (2.0 * PI).sqrt() * 0.5f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn sobolev_weight_identity() {
        let t = 0.3;
        let grid = hermite_grid(t, 1, 12, 128).unwrap();
        let f = semigroup_image(&TestFunction::hermite1(1), t, Mode::Spectral, &opts()).unwrap();
        let v = bergman_norm(&f, t, 1, &grid).unwrap() * (2.0 * PI).powf(-0.5);
        assert!((v - 36.0).abs() < 1e-4, "{v}");
    }

    #[test]
    fn reproducing_property() {
        let t = 0.3;
        let kappa = (2.0 * PI).powf(-0.5);
        let f = semigroup_image(&TestFunction::hermite1(2), t, Mode::Spectral, &opts()).unwrap();
        let z = ComplexPoint::new(vec![c(1.0, 0.5)]);
        let grid = reproduce_grid(t, &z, 8, 128).unwrap();
        let r = reproduce(&f, t, kappa, &z, &grid).unwrap();
        let want = f.eval(&z).unwrap();
        assert!((r - want).norm() < 1e-8 * want.norm(), "{r} {want}");
        let zero = EntireHandle::Zero { dim: 1 };
        assert_eq!(reproduce(&zero, t, kappa, &z, &grid).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn coefficients_round_trip() {
        let f = TestFunction::poly_gaussian(
            vec![(MultiIndex::single(0), 1.0), (MultiIndex::single(3), -0.5)],
            1.0,
        )
        .unwrap();
        let rule = gauss_hermite_rule(64).unwrap();
        let e = expand(&f, 12, &rule).unwrap();
        let h = semigroup_image(&f, 0.3, Mode::Spectral, &opts()).unwrap();
        let back = recover_coefficients(&h, 0.3, 12, &rule).unwrap();
        for ((_, a), (_, b)) in e.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn invalid_inputs() {
        let f = TestFunction::hermite1(0);
        assert!(semigroup_apply(&f, 0.0, Mode::Kernel, &ComplexPoint::origin(1), &opts()).is_err());
        assert!(semigroup_apply(&f, 0.3, Mode::Kernel, &ComplexPoint::origin(2), &opts()).is_err());
    }
}
