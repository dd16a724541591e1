//! Closed-form kernels and weights, their time derivatives, and the growth bounds that the
//! envelope scans compare against.
//!
//! Conventions: `z^2 = sum z_j^2` without conjugation; points of `C^{2n}` are passed as `2n`
//! complex numbers `(z_1..z_n, w_1..w_n)` with `z = x + iy`, `w = u + iv`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_dim, require_positive_time, Error, Result};
use crate::quadrature::gauss_legendre_rule;
use crate::specfun::{hermite_log_eval, ComplexPoint, LogAccumulator, LogComplex, MultiIndex};
use crate::taylor::TaylorScalar;

fn sq(p: &[Complex64]) -> Complex64 {
    p.iter().map(|c| c * c).sum()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log of the Mehler kernel
/// `K_t(z,w) = (2 pi sinh 2t)^{-n/2} exp(-coth(2t)(z^2+w^2)/2 + z.w / sinh 2t)`.
pub fn mehler_kernel_log(t: f64, z: &[Complex64], w: &[Complex64]) -> Result<LogComplex> {
    require_positive_time(t)?;
    require_dim(z.len(), w.len())?;
    let n = z.len() as f64;
    let s = (2.0 * t).sinh();
    let coth = 1.0 / (2.0 * t).tanh();
    let expo = -0.5 * n * (2.0 * PI * s).ln() - 0.5 * coth * (sq(z) + sq(w)) + dot(z, w) / s;
    Ok(LogComplex::from_exp(expo))
}

/// Mehler kernel `K_t(z, w)`, the kernel of `e^{-tH}`, at complex points.
pub fn mehler_kernel(t: f64, z: &ComplexPoint, w: &ComplexPoint) -> Result<Complex64> {
    Ok(mehler_kernel_log(t, z.coords(), w.coords())?.to_complex())
}

/// Log of `U_t(x+iy) = 2^n (sinh 4t)^{-n/2} e^{tanh(2t) x^2 - coth(2t) y^2}`.
pub fn weight_u_log(t: f64, z: &[Complex64]) -> Result<f64> {
    require_positive_time(t)?;
    let n = z.len() as f64;
    let x2: f64 = z.iter().map(|c| c.re * c.re).sum();
    let y2: f64 = z.iter().map(|c| c.im * c.im).sum();
    Ok(n * 2f64.ln() - 0.5 * n * (4.0 * t).sinh().ln() + (2.0 * t).tanh() * x2
        - y2 / (2.0 * t).tanh())
}

/// The weight `U_t` of the Bergman space `H_t(C^n)` as printed (before calibration).
pub fn weight_u(t: f64, z: &ComplexPoint) -> Result<f64> {
    Ok(weight_u_log(t, z.coords())?.exp())
}

/// A signed weight value `exp(log_magnitude) * factor`, kept apart so that huge Gaussian
/// factors can cancel in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitWeight {
    pub log_magnitude: f64,
    pub factor: f64,
}

impl SplitWeight {
    pub fn value(&self) -> f64 {
        self.log_magnitude.exp() * self.factor
    }

    pub fn as_log(&self) -> LogComplex {
        LogComplex::from_real(self.factor).mul_exp(Complex64::new(self.log_magnitude, 0.0))
    }
}

/// `d^{k}/dt^{k} exp(L(t))` written as `exp(L(t0)) * factor`, from the Taylor series of `L`.
fn derivative_of_exp(series: &TaylorScalar, k: usize) -> SplitWeight {
    let l0 = series.value();
    let shifted = series.add_scalar(-l0);
    SplitWeight {
        log_magnitude: l0,
        factor: shifted.exp().derivative(k),
    }
}

fn weight_u_series(t: f64, z: &[Complex64], order: usize) -> Result<TaylorScalar> {
    let n = z.len() as f64;
    let x2: f64 = z.iter().map(|c| c.re * c.re).sum();
    let y2: f64 = z.iter().map(|c| c.im * c.im).sum();
    let tt = TaylorScalar::variable(t, order);
    let two_t = tt.scale(2.0);
    let four_t = tt.scale(4.0);
    let log_sinh = four_t.sinh().ln()?;
    let tanh = two_t.tanh()?;
    let coth = two_t.coth()?;
    let s = &(&tanh.scale(x2) - &coth.scale(y2)) - &log_sinh.scale(0.5 * n);
    Ok(s.add_scalar(n * 2f64.ln()))
}

/// `d^{2m}/dt^{2m} U_t(z)` split as magnitude-log and signed factor.
pub fn weight_u_deriv_split(t: f64, m: u32, z: &[Complex64]) -> Result<SplitWeight> {
    require_positive_time(t)?;
    let k = 2 * m as usize;
    if k == 0 {
        return Ok(SplitWeight {
            log_magnitude: weight_u_log(t, z)?,
            factor: 1.0,
        });
    }
    Ok(derivative_of_exp(&weight_u_series(t, z, k)?, k))
}

/// `d^{2m}/dt^{2m} U_t(z)` by truncated Taylor arithmetic on the closed form.
pub fn weight_u_deriv(t: f64, m: u32, z: &ComplexPoint) -> Result<f64> {
    Ok(weight_u_deriv_split(t, m, z.coords())?.value())
}

/// Largest `m` accepted for derivative weights.
pub const MAX_WEIGHT_ORDER: u32 = 8;

fn require_weight_order(m: u32) -> Result<()> {
    if m > MAX_WEIGHT_ORDER {
        return Err(Error::InvalidParameter(format!(
            "weight derivative order 2m = {} exceeds {}",
            2 * m,
            2 * MAX_WEIGHT_ORDER
        )));
    }
    Ok(())
}

/// Precomputed time-derivative data for weights of the form
/// `log w = c(t) + sum_i g_i(t) X_i + offset`, where the features `X_i` and the offset depend
/// only on the point. Evaluating the `2m`-th derivative at many points then costs a few
/// multiplications per point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    order: usize,
    constant: Vec<f64>,
    slopes: Vec<Vec<f64>>,
}

impl WeightProfile {
    fn from_series(constant: TaylorScalar, slopes: Vec<TaylorScalar>) -> Self {
        WeightProfile {
            order: constant.order(),
            constant: constant.coeffs().to_vec(),
            slopes: slopes.iter().map(|s| s.coeffs().to_vec()).collect(),
        }
    }

    /// `d^{2m}/dt^{2m} U_t` with features `(x^2, y^2)`.
    pub fn hermite(t: f64, m: u32, n: usize) -> Result<Self> {
        require_positive_time(t)?;
        require_weight_order(m)?;
        let k = 2 * m as usize;
        let tt = TaylorScalar::variable(t, k);
        let log_sinh = tt.scale(4.0).sinh().ln()?;
        let constant = log_sinh.scale(-0.5 * n as f64).add_scalar(n as f64 * 2f64.ln());
        let two_t = tt.scale(2.0);
        Ok(Self::from_series(constant, vec![two_t.tanh()?, two_t.coth()?.scale(-1.0)]))
    }

    /// `d^{2m}/dt^{2m} W_t` with the single feature `y^2 + v^2`; the phase `uy - vx` is the offset.
    pub fn special(t: f64, m: u32, n: usize) -> Result<Self> {
        require_positive_time(t)?;
        require_weight_order(m)?;
        let k = 2 * m as usize;
        let nf = n as f64;
        let tt = TaylorScalar::variable(t, k);
        let two_t = tt.scale(2.0);
        let constant = two_t
            .sinh()
            .ln()?
            .scale(-nf)
            .add_scalar(nf * 4f64.ln() - nf * (2.0 * PI).ln());
        Ok(Self::from_series(constant, vec![two_t.coth()?.scale(-1.0)]))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval(&self, features: &[f64], offset: f64) -> SplitWeight {
        let k = self.order;
        let lin = |j: usize| -> f64 {
            self.constant[j]
                + self
                    .slopes
                    .iter()
                    .zip(features)
                    .map(|(g, x)| g[j] * x)
                    .sum::<f64>()
        };
        let l0 = lin(0) + offset;
        if k == 0 {
            return SplitWeight {
                log_magnitude: l0,
                factor: 1.0,
            };
        }
        let mut s = [0.0; 2 * MAX_WEIGHT_ORDER as usize + 1];
        let mut b = [0.0; 2 * MAX_WEIGHT_ORDER as usize + 1];
        for (j, sj) in s.iter_mut().enumerate().take(k + 1).skip(1) {
            *sj = lin(j);
        }
        b[0] = 1.0;
        for i in 1..=k {
            let acc: f64 = (1..=i).map(|j| j as f64 * s[j] * b[i - j]).sum();
            b[i] = acc / i as f64;
        }
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        SplitWeight {
            log_magnitude: l0,
            factor: fact * b[k],
        }
    }
}

/// Value of the reproducing-kernel computation with its quadrature or truncation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: Complex64,
    /// For `m > 0`: difference between two panel layouts of the `s`-integral.
    /// For `m < 0`: magnitude of the last spectral shell.
    pub error_estimate: f64,
    pub converged: bool,
}

/// Reproducing kernel `K_t^{2m}(z, w)` of the holomorphic Sobolev space.
///
/// * `m = 0`: `K_{2t}(conj z, w)` in closed form.
/// * `m > 0`: `(1/(2m-1)!) int_0^inf s^{2m-1} K_{2(t+s)}(conj z, w) ds` by Gauss-Legendre panels.
/// * `m < 0`: `sum (2|a|+n)^{2|m|} e^{-2(2|a|+n)t} Phi_a(conj z) Phi_a(w)` truncated at `spectral_order`.
pub fn repr_kernel(t: f64, m: i32, z: &ComplexPoint, w: &ComplexPoint) -> Result<KernelValue> {
    repr_kernel_with(t, m, z, w, 48)
}

pub fn repr_kernel_with(
    t: f64,
    m: i32,
    z: &ComplexPoint,
    w: &ComplexPoint,
    spectral_order: u32,
) -> Result<KernelValue> {
    require_positive_time(t)?;
    require_dim(z.dim(), w.dim())?;
    let zc = z.conj();
    if m == 0 {
        return Ok(KernelValue {
            value: mehler_kernel_log(2.0 * t, zc.coords(), w.coords())?.to_complex(),
            error_estimate: 0.0,
            converged: true,
        });
    }
    if m > 0 {
        return sobolev_kernel_integral(t, m as u32, zc.coords(), w.coords());
    }
    negative_order_kernel(t, m.unsigned_abs(), &zc, w, spectral_order)
}

fn sobolev_kernel_integral(t: f64, m: u32, zc: &[Complex64], w: &[Complex64]) -> Result<KernelValue> {
    let n = zc.len() as f64;
    let p = 2 * m - 1;
    let mut s_max = 1.0;
    while (-2.0 * n * (t + s_max)).exp() * s_max.powi(p as i32) >= 1e-16 {
        s_max += 0.25;
    }
    let rule = gauss_legendre_rule(64)?;
    let fact: f64 = (1..=p).map(|j| j as f64).product();
    let panel_sum = |breaks: &[f64]| -> Result<LogComplex> {
        let mut acc = LogAccumulator::new();
        for pair in breaks.windows(2) {
            let r = rule.mapped(pair[0], pair[1]);
            for (s, wt) in r.nodes.iter().zip(&r.weights) {
                let k = mehler_kernel_log(2.0 * (t + s), zc, w)?;
                acc.add(k.scale(wt * s.powi(p as i32) / fact));
            }
        }
        Ok(acc.finish())
    };
    let a = panel_sum(&[0.0, s_max / 16.0, s_max / 4.0, s_max])?.to_complex();
    let b = panel_sum(&[0.0, s_max / 8.0, s_max / 2.0, s_max])?.to_complex();
    let err = (a - b).norm();
    Ok(KernelValue {
        value: a,
        error_estimate: err,
        converged: err <= 1e-10 * a.norm().max(1e-300),
    })
}

fn negative_order_kernel(
    t: f64,
    order: u32,
    zc: &ComplexPoint,
    w: &ComplexPoint,
    spectral_order: u32,
) -> Result<KernelValue> {
    let n = zc.dim();
    let a_vals: Vec<Vec<LogComplex>> = zc
        .coords()
        .iter()
        .map(|&c| (0..=spectral_order as usize).map(|k| hermite_log_eval(k, c)).collect())
        .collect::<Result<_>>()?;
    let b_vals: Vec<Vec<LogComplex>> = w
        .coords()
        .iter()
        .map(|&c| (0..=spectral_order as usize).map(|k| hermite_log_eval(k, c)).collect())
        .collect::<Result<_>>()?;
    let mut acc = LogAccumulator::new();
    let mut last = LogAccumulator::new();
    for alpha in MultiIndex::graded(n, spectral_order) {
        let lambda = alpha.eigenvalue();
        let mut term = LogComplex::from_real(lambda.powi(2 * order as i32) * (-2.0 * lambda * t).exp());
        for (j, &k) in alpha.entries().iter().enumerate() {
            term = term * a_vals[j][k as usize] * b_vals[j][k as usize];
        }
        acc.add(term);
        if alpha.order() == spectral_order {
            last.add(term);
        }
    }
    let value = acc.finish();
    let tail = last.finish();
    Ok(KernelValue {
        value: value.to_complex(),
        error_estimate: tail.abs(),
        converged: tail.log_magnitude - value.log_magnitude < (1e-6f64).ln(),
    })
}

/// Log of the special Hermite heat kernel
/// `p_t(z, w) = (2 pi)^{-n} (2 sinh t)^{-n} e^{-coth(t) (z^2 + w^2) / 4}` on `C^{2n}`.
///
/// The factor `2^{-n}` makes `f x p_t` the semigroup `e^{-tL} f`; see the crate docs.
pub fn special_heat_kernel_log(t: f64, p: &[Complex64]) -> Result<LogComplex> {
    require_positive_time(t)?;
    if p.is_empty() || p.len() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "special heat kernel needs a point of C^(2n), got {} coordinates",
            p.len()
        )));
    }
    let n = (p.len() / 2) as f64;
    let expo = -n * (2.0 * PI).ln() - n * (2.0 * t.sinh()).ln() - 0.25 / t.tanh() * sq(p);
    Ok(LogComplex::from_exp(expo))
}

pub fn special_heat_kernel(t: f64, p: &ComplexPoint) -> Result<Complex64> {
    Ok(special_heat_kernel_log(t, p.coords())?.to_complex())
}

fn split_zw(zw: &[Complex64]) -> Result<(&[Complex64], &[Complex64])> {
    if zw.is_empty() || zw.len() % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "expected a point of C^(2n), got {} coordinates",
            zw.len()
        )));
    }
    Ok(zw.split_at(zw.len() / 2))
}

fn weight_w_series(t: f64, zw: &[Complex64], order: usize) -> Result<TaylorScalar> {
    let (z, w) = split_zw(zw)?;
    let n = z.len() as f64;
    let phase: f64 = z
        .iter()
        .zip(w)
        .map(|(zj, wj)| wj.re * zj.im - wj.im * zj.re)
        .sum();
    let r2: f64 = z.iter().map(|c| c.im * c.im).sum::<f64>() + w.iter().map(|c| c.im * c.im).sum::<f64>();
    let tt = TaylorScalar::variable(t, order);
    let two_t = tt.scale(2.0);
    let log_sinh = two_t.sinh().ln()?;
    let coth = two_t.coth()?;
    let s = &coth.scale(-r2) - &log_sinh.scale(n);
    Ok(s.add_scalar(n * 4f64.ln() + phase - n * (2.0 * PI).ln()))
}

/// `d^{2m}/dt^{2m} W_t(z, w)` split as magnitude-log and signed factor, with
/// `W_t = 4^n e^{uy - vx} (2 pi)^{-n} (sinh 2t)^{-n} e^{-coth(2t)(y^2 + v^2)}` as printed.
pub fn weight_w_split(t: f64, m: u32, zw: &[Complex64]) -> Result<SplitWeight> {
    require_positive_time(t)?;
    let k = 2 * m as usize;
    let series = weight_w_series(t, zw, k)?;
    if k == 0 {
        return Ok(SplitWeight {
            log_magnitude: series.value(),
            factor: 1.0,
        });
    }
    Ok(derivative_of_exp(&series, k))
}

/// The weight `W_t` (or its `2m`-th time derivative) of the special Hermite Bergman space.
pub fn weight_w(t: f64, m: u32, zw: &ComplexPoint) -> Result<f64> {
    Ok(weight_w_split(t, m, zw.coords())?.value())
}

/// Whether a bound constrains `|F|^2` or `|F|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundConvention {
    SquaredModulus,
    Modulus,
}

/// Pointwise growth bounds. Special kinds live on `C^{2n}`, all others on `C^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundSpec {
    /// `(1+x^2+y^2)^{-2m} e^{-x^2 tanh 2t + y^2 coth 2t}` on `|F|^2` (Schwartz image).
    SchwartzImage { t: f64, m: u32 },
    /// Same envelope, used for `W_t^{m,2}` embedding.
    SobolevEmbed { t: f64, m: u32 },
    /// `(1+|z|^2)^{2m} e^{-x^2 tanh 2t + y^2 coth 2t}` on `|F|^2` (tempered distributions).
    Tempered { t: f64, m: u32 },
    /// `e^{vx-uy} e^{coth 4t (y^2+v^2)} (1+x^2+y^2+u^2+v^2)^{-2m}` on `|F|^2`.
    SpecialSchwartz { t: f64, m: u32 },
    /// `e^{vx-uy} e^{coth 4t (y^2+v^2)} (1+y^2+v^2)^{-2m}` on `|F|^2`.
    SpecialPlain { t: f64, m: u32 },
    /// `(1+x^2+y^2)^m e^{y^2/(2a)}` on `|T_a f|`.
    PwStft { a: f64, m: u32 },
    /// `e^{-coth(2t)(x^2-y^2)/2} e^{R|x|/sinh 2t}` on `|F|`.
    Compact { t: f64, radius: f64 },
}

impl BoundSpec {
    pub fn convention(&self) -> BoundConvention {
        match self {
            BoundSpec::PwStft { .. } | BoundSpec::Compact { .. } => BoundConvention::Modulus,
            _ => BoundConvention::SquaredModulus,
        }
    }

    pub fn is_special(&self) -> bool {
        matches!(self, BoundSpec::SpecialSchwartz { .. } | BoundSpec::SpecialPlain { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundSpec::SchwartzImage { t, .. }
            | BoundSpec::SobolevEmbed { t, .. }
            | BoundSpec::Tempered { t, .. }
            | BoundSpec::SpecialSchwartz { t, .. }
            | BoundSpec::SpecialPlain { t, .. } => require_positive_time(t),
            BoundSpec::PwStft { a, .. } => {
                if a > 0.0 && a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("window parameter a must be positive, got {a}")))
                }
            }
            BoundSpec::Compact { t, radius } => {
                require_positive_time(t)?;
                if radius >= 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("support radius must be non-negative, got {radius}")))
                }
            }
        }
    }

    /// Natural log of the bound at a point.
    pub fn log_eval(&self, p: &[Complex64]) -> Result<f64> {
        self.validate()?;
        let x2: f64 = p.iter().map(|c| c.re * c.re).sum();
        let y2: f64 = p.iter().map(|c| c.im * c.im).sum();
        let hermite_exp = |t: f64| -x2 * (2.0 * t).tanh() + y2 / (2.0 * t).tanh();
        Ok(match *self {
            BoundSpec::SchwartzImage { t, m } | BoundSpec::SobolevEmbed { t, m } => {
                -2.0 * m as f64 * (1.0 + x2 + y2).ln() + hermite_exp(t)
            }
            BoundSpec::Tempered { t, m } => 2.0 * m as f64 * (1.0 + x2 + y2).ln() + hermite_exp(t),
            BoundSpec::SpecialSchwartz { t, m } | BoundSpec::SpecialPlain { t, m } => {
                let (z, w) = split_zw(p)?;
                let phase: f64 = z
                    .iter()
                    .zip(w)
                    .map(|(zj, wj)| wj.im * zj.re - wj.re * zj.im)
                    .sum();
                let yv2: f64 = z.iter().chain(w).map(|c| c.im * c.im).sum();
                let denom = match self {
                    BoundSpec::SpecialSchwartz { .. } => 1.0 + x2 + y2,
                    _ => 1.0 + yv2,
                };
                phase + yv2 / (4.0 * t).tanh() - 2.0 * m as f64 * denom.ln()
            }
            BoundSpec::PwStft { a, m } => m as f64 * (1.0 + x2 + y2).ln() + y2 / (2.0 * a),
            BoundSpec::Compact { t, radius } => {
                -0.5 / (2.0 * t).tanh() * (x2 - y2) + radius * x2.sqrt() / (2.0 * t).sinh()
            }
        })
    }

    pub fn eval(&self, p: &ComplexPoint) -> Result<f64> {
        Ok(self.log_eval(p.coords())?.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn pt(v: &[Complex64]) -> ComplexPoint {
        ComplexPoint::new(v.to_vec())
    }

    #[test]
    fn mehler_origin() {
        let o = ComplexPoint::origin(1);
        let v = mehler_kernel(0.5, &o, &o).unwrap();
        assert!(rel(v.re, (2.0 * PI * 1f64.sinh()).powf(-0.5)) < 1e-14);
        assert!((v.re - 0.368005).abs() < 1e-6);
        assert!(mehler_kernel(0.0, &o, &o).is_err());
    }

    #[test]
    fn mehler_is_symmetric() {
        let z = pt(&[c(0.3, -1.1), c(1.2, 0.4)]);
        let w = pt(&[c(-0.7, 0.2), c(0.1, 0.9)]);
        let a = mehler_kernel(0.37, &z, &w).unwrap();
        let b = mehler_kernel(0.37, &w, &z).unwrap();
        assert!((a - b).norm() < 1e-14 * a.norm());
    }

    #[test]
    fn weight_u_examples() {
        let o = ComplexPoint::origin(1);
        let v = weight_u(0.25, &o).unwrap();
        assert!(rel(v, 2.0 / 1f64.sinh().sqrt()) < 1e-14);
        assert!((v - 1.844904).abs() < 1e-6);
        let yi = weight_u(0.25, &pt(&[c(0.0, 1.0)])).unwrap();
        assert!(rel(yi / v, (-1.0 / 0.5f64.tanh()).exp()) < 1e-13);
        assert!((yi / v - 0.114870).abs() < 1e-6);
        let a = weight_u(0.3, &pt(&[c(0.7, -0.4)])).unwrap();
        let b = weight_u(0.3, &pt(&[c(-0.7, 0.4)])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weight_u_second_derivative_at_origin() {
        let o = ComplexPoint::origin(1);
        let s = 1f64.sinh();
        let ch = 1f64.cosh();
        let exact = -16.0 * s.powf(-0.5) + 24.0 * ch * ch * s.powf(-2.5);
        let v = weight_u_deriv(0.25, 1, &o).unwrap();
        assert!(rel(v, exact) < 1e-12);
        assert!((v - 23.4095130512453).abs() < 1e-9);
        assert_eq!(weight_u_deriv(0.25, 0, &o).unwrap(), weight_u(0.25, &o).unwrap());
    }

    fn fd4<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
        (-f(t + 2.0 * h) + 16.0 * f(t + h) - 30.0 * f(t) + 16.0 * f(t - h) - f(t - 2.0 * h))
            / (12.0 * h * h)
    }

    #[test]
    fn weight_u_derivative_matches_finite_differences() {
        for z in [c(0.0, 0.0), c(1.3, -0.6), c(-0.4, 1.7)] {
            let p = pt(&[z]);
            let fd = fd4(|t| weight_u(t, &p).unwrap(), 0.3, 1e-3);
            let v = weight_u_deriv(0.3, 1, &p).unwrap();
            assert!(rel(v, fd) < 1e-5, "z={z} v={v} fd={fd}");
        }
    }

    #[test]
    fn repr_kernel_zero_order() {
        let o = ComplexPoint::origin(1);
        let v = repr_kernel(0.3, 0, &o, &o).unwrap();
        assert!(rel(v.value.re, (2.0 * PI * 1.2f64.sinh()).powf(-0.5)) < 1e-14);
        assert!((v.value.re - 0.324713).abs() < 1e-6);
    }

    #[test]
    fn repr_kernel_first_order_at_origin() {
        let o = ComplexPoint::origin(1);
        let v = repr_kernel(0.3, 1, &o, &o).unwrap();
        assert!(v.converged);
        assert!(rel(v.value.re, 0.0775519602515624) < 1e-10, "{v:?}");
    }

    #[test]
    fn repr_kernel_diagonal_closed_form() {
        for z in [c(0.4, 0.3), c(-1.0, 1.5), c(2.0, -0.5)] {
            let p = pt(&[z]);
            let v = repr_kernel(0.35, 0, &p, &p).unwrap().value;
            let s4 = (1.4f64).sinh();
            let exact = (2.0 * PI).powf(-0.5) * s4.powf(-0.5)
                * (-0.5 / 1.4f64.tanh() * (z * z + z.conj() * z.conj()) + z * z.conj() / s4).exp();
            assert!((v - exact).norm() < 1e-10 * exact.norm());
        }
    }

    #[test]
    fn special_heat_kernel_examples() {
        let o = ComplexPoint::origin(2);
        let v = special_heat_kernel(0.5, &o).unwrap();
        assert!(rel(v.re, 1.0 / (4.0 * PI * 0.5f64.sinh())) < 1e-14);
        let p = pt(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let r = special_heat_kernel(0.5, &p).unwrap() / v;
        assert!(rel(r.re, (-0.5 / 0.5f64.tanh()).exp()) < 1e-14);
        let q = pt(&[c(2f64.sqrt(), 0.0), c(0.0, 0.0)]);
        let r2 = special_heat_kernel(0.5, &q).unwrap() / v;
        assert!((r - r2).norm() < 1e-15);
        assert!(special_heat_kernel(0.5, &ComplexPoint::origin(1)).is_err());
    }

    #[test]
    fn weight_w_examples() {
        let o = ComplexPoint::origin(2);
        let v = weight_w(0.5, 0, &o).unwrap();
        assert!(rel(v, 2.0 / (PI * 1f64.sinh())) < 1e-14);
        assert!((v - 0.541711).abs() < 1e-6);
        let real = pt(&[c(1.7, 0.0), c(-2.3, 0.0)]);
        assert!(rel(weight_w(0.5, 0, &real).unwrap(), v) < 1e-14);
        let p = pt(&[c(0.3, 0.5), c(-0.2, 0.4)]);
        let fd = fd4(|t| weight_w(t, 0, &p).unwrap(), 0.4, 1e-3);
        let d = weight_w(0.4, 1, &p).unwrap();
        assert!(rel(d, fd) < 1e-5);
        let fd0 = fd4(|t| weight_w(t, 0, &o).unwrap(), 0.4, 1e-3);
        assert!(rel(weight_w(0.4, 1, &o).unwrap(), fd0) < 1e-5);
    }

    #[test]
    fn weight_profiles_match_direct_evaluation() {
        for m in 0..=2 {
            let prof = WeightProfile::hermite(0.3, m, 1).unwrap();
            for z in [c(0.0, 0.0), c(1.3, -0.6), c(-2.4, 1.7)] {
                let a = prof.eval(&[z.re * z.re, z.im * z.im], 0.0).value();
                let b = weight_u_deriv(0.3, m, &pt(&[z])).unwrap();
                assert!(rel(a, b) < 1e-12, "m={m} z={z}");
            }
            let prof = WeightProfile::special(0.4, m, 1).unwrap();
            let (z, w) = (c(0.3, 0.5), c(-0.2, 0.4));
            let a = prof
                .eval(&[z.im * z.im + w.im * w.im], w.re * z.im - w.im * z.re)
                .value();
            let b = weight_w(0.4, m, &pt(&[z, w])).unwrap();
            assert!(rel(a, b) < 1e-12, "m={m}");
        }
        assert!(WeightProfile::hermite(0.3, 9, 1).is_err());
    }

    #[test]
    fn bound_examples() {
        let b = BoundSpec::SobolevEmbed { t: 0.3, m: 0 };
        assert_eq!(b.eval(&ComplexPoint::origin(1)).unwrap(), 1.0);
        let b = BoundSpec::Tempered { t: 0.3, m: 1 };
        let v = b.eval(&pt(&[c(1.0, 1.0)])).unwrap();
        let exact = 9.0 * (-(0.6f64).tanh() + 1.0 / 0.6f64.tanh()).exp();
        assert!(rel(v, exact) < 1e-14);
        assert!((v - 33.8588540).abs() < 1e-6);
        let b = BoundSpec::Compact { t: 0.5, radius: 0.5 };
        let v = b.eval(&pt(&[c(2.0, 0.0)])).unwrap();
        assert!((v - 0.169458).abs() < 1e-6);
        assert_eq!(b.convention(), BoundConvention::Modulus);
        assert!(BoundSpec::PwStft { a: -1.0, m: 0 }.log_eval(&[c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn hermite_bound_exponent_identity() {
        // -coth 4t (x^2 - y^2) + cosech 4t (x^2 + y^2) = -x^2 tanh 2t + y^2 coth 2t
        for (x, y, t) in [(0.3, 1.2, 0.1), (2.0, -0.5, 0.7), (-1.4, 3.0, 1.3)] {
            let lhs = -(x * x - y * y) / (4.0 * t as f64).tanh() + (x * x + y * y) / (4.0 * t as f64).sinh();
            let rhs = -x * x * (2.0 * t as f64).tanh() + y * y / (2.0 * t as f64).tanh();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
