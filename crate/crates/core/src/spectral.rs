//! Hermite expansions, spectral multipliers, Sobolev norms and holomorphic evaluation.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_dim, require_positive_time, Error, Result};
use crate::quadrature::{gauss_legendre_rule, integrate_rn, QuadKind, QuadRule};
use crate::specfun::{
    hermite_poly_log, hermite_real_into, hermite_tensor, ComplexPoint, LogAccumulator, LogComplex,
    MultiIndex, PI_POW_NEG_QUARTER,
};

/// Functions and distributions on `R^n` that the transforms accept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    /// `Phi_alpha`.
    HermiteBasis { alpha: MultiIndex },
    /// `e^{-a|x|^2/2}`.
    Gaussian { a: f64, dim: usize },
    /// `sum_k c_k x^{alpha_k} e^{-a|x|^2/2}`.
    PolyGaussian { terms: Vec<(MultiIndex, f64)>, a: f64 },
    /// Point mass at `center`.
    Dirac { center: Vec<f64> },
    /// `exp(1 - 1/(1 - |x|^2/R^2))` inside the ball of radius `R`, zero outside.
    Bump { radius: f64, dim: usize },
    /// A finite Hermite series, possibly representing a tempered distribution.
    CoefficientList { expansion: HermiteExpansion },
}

impl TestFunction {
    pub fn hermite(alpha: MultiIndex) -> Self {
        TestFunction::HermiteBasis { alpha }
    }

    pub fn hermite1(k: u32) -> Self {
        TestFunction::HermiteBasis {
            alpha: MultiIndex::single(k),
        }
    }

    pub fn gaussian(a: f64, dim: usize) -> Result<Self> {
        let f = TestFunction::Gaussian { a, dim };
        f.validate()?;
        Ok(f)
    }

    pub fn poly_gaussian(terms: Vec<(MultiIndex, f64)>, a: f64) -> Result<Self> {
        let f = TestFunction::PolyGaussian { terms, a };
        f.validate()?;
        Ok(f)
    }

    pub fn dirac(center: Vec<f64>) -> Result<Self> {
        let f = TestFunction::Dirac { center };
        f.validate()?;
        Ok(f)
    }

    pub fn bump(radius: f64, dim: usize) -> Result<Self> {
        let f = TestFunction::Bump { radius, dim };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            TestFunction::HermiteBasis { alpha } if alpha.dim() == 0 => bad("empty multi-index".into()),
            TestFunction::Gaussian { a, dim } | TestFunction::Bump { radius: a, dim } => {
                if !(a.is_finite() && *a > 0.0) {
                    bad(format!("parameter must be positive, got {a}"))
                } else if *dim == 0 {
                    bad("dimension must be at least 1".into())
                } else {
                    Ok(())
                }
            }
            TestFunction::PolyGaussian { terms, a } => {
                if terms.is_empty() {
                    return bad("polynomial has no terms".into());
                }
                if !(a.is_finite() && *a > 0.0) {
                    return bad(format!("Gaussian rate must be positive, got {a}"));
                }
                let n = terms[0].0.dim();
                if n == 0 || terms.iter().any(|(m, _)| m.dim() != n) {
                    return bad("polynomial exponents have inconsistent dimensions".into());
                }
                Ok(())
            }
            TestFunction::Dirac { center } => {
                if center.is_empty() || !center.iter().all(|v| v.is_finite()) {
                    bad(format!("invalid point-mass location {center:?}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::HermiteBasis { alpha } => alpha.dim(),
            TestFunction::Gaussian { dim, .. } | TestFunction::Bump { dim, .. } => *dim,
            TestFunction::PolyGaussian { terms, .. } => terms.first().map_or(0, |t| t.0.dim()),
            TestFunction::Dirac { center } => center.len(),
            TestFunction::CoefficientList { expansion } => expansion.dim(),
        }
    }

    /// Rate `a` of the Gaussian factor `e^{-a|x|^2/2}` that dominates the function, if any.
    pub fn decay_rate(&self) -> Option<f64> {
        match self {
            TestFunction::HermiteBasis { .. } | TestFunction::CoefficientList { .. } => Some(1.0),
            TestFunction::Gaussian { a, .. } | TestFunction::PolyGaussian { a, .. } => Some(*a),
            TestFunction::Dirac { .. } | TestFunction::Bump { .. } => None,
        }
    }

    /// Radius of a ball about the origin containing the support, for compactly supported members.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            TestFunction::Dirac { center } => Some(center.iter().map(|v| v * v).sum::<f64>().sqrt()),
            TestFunction::Bump { radius, .. } => Some(*radius),
            _ => None,
        }
    }

    /// Pointwise value; point masses have none.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        require_dim(self.dim(), x.len())?;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Ok(match self {
            TestFunction::HermiteBasis { alpha } => hermite_tensor(alpha, &ComplexPoint::from_real(x))?,
            TestFunction::Gaussian { a, .. } => Complex64::new((-0.5 * a * r2).exp(), 0.0),
            TestFunction::PolyGaussian { terms, a } => {
                let p: f64 = terms
                    .iter()
                    .map(|(m, c)| {
                        c * m
                            .entries()
                            .iter()
                            .zip(x)
                            .map(|(&e, &xi)| xi.powi(e as i32))
                            .product::<f64>()
                    })
                    .sum();
                Complex64::new(p * (-0.5 * a * r2).exp(), 0.0)
            }
            TestFunction::Dirac { .. } => {
                return Err(Error::Unsupported("a point mass has no pointwise values".into()))
            }
            TestFunction::Bump { radius, .. } => {
                let s = r2 / (radius * radius);
                if s >= 1.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new((1.0 - 1.0 / (1.0 - s)).exp(), 0.0)
                }
            }
            TestFunction::CoefficientList { expansion } => {
                let p = ComplexPoint::from_real(x);
                let mut sum = Complex64::new(0.0, 0.0);
                for (alpha, c) in expansion.iter() {
                    if *c != Complex64::new(0.0, 0.0) {
                        sum += c * hermite_tensor(alpha, &p)?;
                    }
                }
                sum
            }
        })
    }
}

/// A one-dimensional rule adapted to `f` times an extra Gaussian factor `e^{-b x^2/2}`:
/// a rescaled Gauss-Hermite rule for Gaussian-dominated `f`, Gauss-Legendre on the support
/// for bumps. Its plain weights integrate the full product.
pub(crate) fn adapted_rule(f: &TestFunction, base: &QuadRule, extra_rate: f64) -> Result<QuadRule> {
    if let TestFunction::Bump { radius, .. } = f {
        return Ok(gauss_legendre_rule(base.len())?.mapped(-radius, *radius));
    }
    let a = f.decay_rate().ok_or_else(|| {
        Error::Unsupported("quadrature needs a Gaussian-dominated or compactly supported function".into())
    })?;
    if base.kind != QuadKind::GaussHermite {
        return Err(Error::InvalidParameter(
            "Gaussian-dominated integrands need a Gauss-Hermite rule".into(),
        ));
    }
    Ok(base.scaled((2.0 / (a + extra_rate)).sqrt()))
}

/// Truncated Hermite series `sum_{|alpha| <= N} c_alpha Phi_alpha` in graded order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    dim: usize,
    order: u32,
    indices: Vec<MultiIndex>,
    coeffs: Vec<Complex64>,
}

impl HermiteExpansion {
    pub fn zero(dim: usize, order: u32) -> Self {
        let indices = MultiIndex::graded(dim, order);
        let coeffs = vec![Complex64::new(0.0, 0.0); indices.len()];
        HermiteExpansion {
            dim,
            order,
            indices,
            coeffs,
        }
    }

    pub fn from_fn<F: Fn(&MultiIndex) -> Complex64>(dim: usize, order: u32, f: F) -> Self {
        let mut e = Self::zero(dim, order);
        for (i, a) in e.indices.iter().enumerate() {
            e.coeffs[i] = f(a);
        }
        e
    }

    /// Expansion with the given coefficients; the order is the largest `|alpha|` present.
    pub fn from_entries(dim: usize, entries: &[(MultiIndex, Complex64)]) -> Result<Self> {
        for (a, _) in entries {
            require_dim(dim, a.dim())?;
        }
        let order = entries.iter().map(|(a, _)| a.order()).max().unwrap_or(0);
        let mut e = Self::zero(dim, order);
        for (a, c) in entries {
            let i = e.position(a).expect("index within order");
            e.coeffs[i] += c;
        }
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.indices.iter().zip(&self.coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        if alpha.dim() != self.dim || alpha.order() > self.order {
            return None;
        }
        // graded blocks: binary search would need an ordering key; the lists are short
        self.indices.iter().position(|a| a == alpha)
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Complex64 {
        self.position(alpha)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// `sum_{|alpha| = k} |c_alpha|^2`.
    pub fn shell_energy(&self, k: u32) -> f64 {
        self.iter()
            .filter(|(a, _)| a.order() == k)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Energy of the last shell, the truncation indicator.
    pub fn tail_estimate(&self) -> f64 {
        self.shell_energy(self.order)
    }

    pub fn l2_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Restrict or zero-pad to a new truncation order.
    pub fn with_order(&self, order: u32) -> Self {
        Self::from_fn(self.dim, order, |a| self.coefficient(a))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("alpha_{j}")).collect();
        header.push("re".into());
        header.push("im".into());
        wr.write_record(&header)?;
        for (a, c) in self.iter() {
            let mut row: Vec<String> = a.entries().iter().map(|e| e.to_string()).collect();
            row.push(c.re.to_string());
            row.push(c.im.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Read rows `alpha_1,...,alpha_n,re,im`; a header row is optional.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut entries = Vec::new();
        let mut dim = None;
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() < 3 {
                return Err(Error::Parse(format!("coefficient row too short: {rec:?}")));
            }
            if rec.get(0).is_some_and(|s| s.starts_with("alpha")) {
                continue;
            }
            let n = rec.len() - 2;
            if *dim.get_or_insert(n) != n {
                return Err(Error::Parse("rows have differing lengths".into()));
            }
            let alpha = (0..n)
                .map(|j| rec[j].parse::<u32>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let re: f64 = rec[n].parse().map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
            let im: f64 = rec[n + 1].parse().map_err(|e: std::num::ParseFloatError| Error::Parse(e.to_string()))?;
            entries.push((MultiIndex::new(alpha), Complex64::new(re, im)));
        }
        let dim = dim.ok_or_else(|| Error::Parse("no coefficient rows".into()))?;
        Self::from_entries(dim, &entries)
    }
}

/// Hermite coefficients `c_alpha = (f, Phi_alpha)` for `|alpha| <= order`.
pub fn expand(f: &TestFunction, order: u32, rule: &QuadRule) -> Result<HermiteExpansion> {
    f.validate()?;
    let n = f.dim();
    match f {
        TestFunction::HermiteBasis { alpha } => {
            return Ok(HermiteExpansion::from_fn(n, order, |a| {
                Complex64::new(if a == alpha { 1.0 } else { 0.0 }, 0.0)
            }))
        }
        TestFunction::Dirac { center } => {
            let p = ComplexPoint::from_real(center);
            let mut e = HermiteExpansion::zero(n, order);
            for i in 0..e.indices.len() {
                e.coeffs[i] = hermite_tensor(&e.indices[i], &p)?;
            }
            return Ok(e);
        }
        TestFunction::CoefficientList { expansion } => return Ok(expansion.with_order(order)),
        _ => {}
    }
    if rule.len() < order as usize + 1 {
        return Err(Error::RuleTooCoarse(format!(
            "{} nodes cannot resolve Hermite coefficients up to order {order}",
            rule.len()
        )));
    }
    if n > 4 {
        return Err(Error::Unsupported(format!("expansion in dimension {n}")));
    }
    let line = adapted_rule(f, rule, 1.0)?;
    let q = line.len();
    let k = order as usize + 1;
    let mut h_at = vec![0.0; q * k];
    for (j, &x) in line.nodes.iter().enumerate() {
        hermite_real_into(x, &mut h_at[j * k..(j + 1) * k]);
    }
    let mut e = HermiteExpansion::zero(n, order);
    let total = q.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut sums = vec![crate::quadrature::CompensatedSum::new(); e.indices.len()];
    for _ in 0..total {
        let mut w = 1.0;
        for j in 0..n {
            x[j] = line.nodes[idx[j]];
            w *= line.plain_weights[idx[j]];
        }
        let fx = f.eval(&x)? * w;
        if !(fx.re.is_finite() && fx.im.is_finite()) {
            return Err(Error::NonFiniteSample { node: x.clone() });
        }
        if fx.norm() > 0.0 {
            for (i, alpha) in e.indices.iter().enumerate() {
                let mut phi = 1.0;
                for (j, &aj) in alpha.entries().iter().enumerate() {
                    phi *= h_at[idx[j] * k + aj as usize];
                }
                sums[i].add(fx * phi);
            }
        }
        for j in (0..n).rev() {
            idx[j] += 1;
            if idx[j] < q {
                break;
            }
            idx[j] = 0;
        }
    }
    for (c, s) in e.coeffs.iter_mut().zip(&sums) {
        *c = s.value();
    }
    Ok(e)
}

/// `int |f|^2` over `R^n` with a rule adapted to `f`.
pub fn l2_norm_sqr(f: &TestFunction, rule: &QuadRule) -> Result<f64> {
    if let TestFunction::CoefficientList { expansion } = f {
        return Ok(expansion.l2_norm_sqr());
    }
    if let TestFunction::HermiteBasis { .. } = f {
        return Ok(1.0);
    }
    let line = adapted_rule(f, rule, f.decay_rate().unwrap_or(0.0))?;
    let v = integrate_rn(|x| Complex64::new(f.eval(x).map_or(f64::NAN, |c| c.norm_sqr()), 0.0), &line, f.dim())?;
    Ok(v.re)
}

/// Diagonal spectral multipliers in the Hermite basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MultiplierSpec {
    /// `e^{-t lambda}`.
    Heat { t: f64 },
    /// `e^{-(t + i theta) lambda}`.
    ComplexHeat { t: f64, theta: f64 },
    /// `lambda^m`.
    Power { m: i32 },
}

impl MultiplierSpec {
    pub fn factor(&self, lambda: f64) -> Complex64 {
        match *self {
            MultiplierSpec::Heat { t } => Complex64::new((-t * lambda).exp(), 0.0),
            MultiplierSpec::ComplexHeat { t, theta } => {
                Complex64::from_polar((-t * lambda).exp(), -theta * lambda)
            }
            MultiplierSpec::Power { m } => Complex64::new(lambda.powi(m), 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MultiplierSpec::Heat { t } | MultiplierSpec::ComplexHeat { t, .. } => require_positive_time(t),
            MultiplierSpec::Power { .. } => Ok(()),
        }
    }
}

/// `c_alpha -> factor(2|alpha| + n) c_alpha`.
pub fn apply_multiplier(e: &HermiteExpansion, m: &MultiplierSpec) -> Result<HermiteExpansion> {
    m.validate()?;
    let mut out = e.clone();
    for (a, c) in out.indices.iter().zip(out.coeffs.iter_mut()) {
        *c *= m.factor(a.eigenvalue());
    }
    Ok(out)
}

/// `sqrt(sum (2|alpha| + n)^{2m} |c_alpha|^2)`.
pub fn sobolev_norm(e: &HermiteExpansion, m: i32) -> f64 {
    e.iter()
        .map(|(a, c)| a.eigenvalue().powi(2 * m) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Holomorphic value of a spectral sum with its truncation indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralValue {
    pub value: LogComplex,
    /// `|sum over the last shell| / |value|`.
    pub last_shell_ratio: f64,
    /// Set when the last shell exceeds `1e-6` of the result.
    pub truncation_flag: bool,
}

impl SpectralValue {
    pub fn complex(&self) -> Complex64 {
        self.value.to_complex()
    }
}

/// `sum_alpha c_alpha e^{-(2|alpha|+n)t} Phi_alpha(z)` in log form.
pub fn eval_entire(e: &HermiteExpansion, t: f64, z: &ComplexPoint) -> Result<SpectralValue> {
    require_positive_time(t)?;
    eval_series(e, t, z.coords())
}

pub(crate) fn eval_series(e: &HermiteExpansion, t: f64, z: &[Complex64]) -> Result<SpectralValue> {
    require_dim(e.dim(), z.len())?;
    let parts: Vec<Vec<LogComplex>> = z
        .iter()
        .map(|&c| hermite_poly_log(e.order as usize, c))
        .collect::<Result<_>>()?;
    let mut acc = LogAccumulator::new();
    let mut last = LogAccumulator::new();
    for (alpha, c) in e.iter() {
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let mut term = LogComplex::from_complex(*c).mul_exp(Complex64::new(-t * alpha.eigenvalue(), 0.0));
        for (j, &k) in alpha.entries().iter().enumerate() {
            term = term * parts[j][k as usize];
        }
        acc.add(term);
        if alpha.order() == e.order {
            last.add(term);
        }
    }
    let n = z.len() as f64;
    let gauss: Complex64 = Complex64::new(n * PI_POW_NEG_QUARTER.ln(), 0.0)
        - 0.5 * z.iter().map(|c| c * c).sum::<Complex64>();
    let sum = acc.finish();
    let tail = last.finish();
    let ratio = if sum.is_zero() {
        if tail.is_zero() { 0.0 } else { f64::INFINITY }
    } else {
        (tail.log_magnitude - sum.log_magnitude).exp()
    };
    Ok(SpectralValue {
        value: sum.mul_exp(gauss),
        last_shell_ratio: ratio,
        truncation_flag: ratio > 1e-6,
    })
}

/// An evaluable entire function on `C^n` (or `C^{2n}` for special Hermite data).
#[derive(Debug, Clone)]
pub enum EntireHandle {
    Zero { dim: usize },
    /// `e^{-tH} f` from Hermite coefficients.
    Hermite { expansion: HermiteExpansion, t: f64 },
    /// `e^{-tH} delta_{center} = K_t(., center)`.
    Mehler { t: f64, center: Vec<f64> },
    /// `e^{-tH} f` by quadrature against the Mehler kernel.
    HermiteKernel { f: TestFunction, t: f64, rule: QuadRule },
    /// `e^{-tL} f` from special Hermite coefficients, on `C^{2n}`.
    Special {
        expansion: crate::special::SpecialExpansion,
        t: f64,
        rule: QuadRule,
    },
    /// `T_a f` with window constant `c`.
    GaussStft { f: TestFunction, a: f64, c: f64, rule: QuadRule },
}

impl EntireHandle {
    /// Number of complex variables.
    pub fn complex_dim(&self) -> usize {
        match self {
            EntireHandle::Zero { dim } => *dim,
            EntireHandle::Hermite { expansion, .. } => expansion.dim(),
            EntireHandle::Mehler { center, .. } => center.len(),
            EntireHandle::HermiteKernel { f, .. } | EntireHandle::GaussStft { f, .. } => f.dim(),
            EntireHandle::Special { expansion, .. } => 2 * expansion.dim(),
        }
    }

    /// Truncation order of spectral handles.
    pub fn truncation(&self) -> Option<u32> {
        match self {
            EntireHandle::Hermite { expansion, .. } => Some(expansion.order()),
            EntireHandle::Special { expansion, .. } => Some(expansion.order()),
            _ => None,
        }
    }

    pub fn eval_log(&self, p: &[Complex64]) -> Result<LogComplex> {
        require_dim(self.complex_dim(), p.len())?;
        match self {
            EntireHandle::Zero { .. } => Ok(LogComplex::ZERO),
            EntireHandle::Hermite { expansion, t } => Ok(eval_series(expansion, *t, p)?.value),
            EntireHandle::Mehler { t, center } => {
                let c: Vec<Complex64> = center.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                crate::kernels::mehler_kernel_log(*t, p, &c)
            }
            EntireHandle::HermiteKernel { f, t, rule } => {
                crate::semigroup::kernel_apply_log(f, *t, p, rule)
            }
            EntireHandle::Special { expansion, t, rule } => expansion.eval_log(*t, p, rule),
            EntireHandle::GaussStft { f, a, c, rule } => crate::stft::gauss_stft_log(f, *a, p, *c, rule),
        }
    }

    pub fn eval(&self, p: &ComplexPoint) -> Result<Complex64> {
        Ok(self.eval_log(p.coords())?.to_complex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_hermite_rule;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_expansion_is_exact() {
        let rule = gauss_hermite_rule(16).unwrap();
        let e = expand(&TestFunction::hermite1(1), 8, &rule).unwrap();
        for (a, v) in e.iter() {
            let want = if a.entries()[0] == 1 { 1.0 } else { 0.0 };
            assert_eq!(*v, c(want, 0.0));
        }
    }

    #[test]
    fn dirac_coefficients() {
        let rule = gauss_hermite_rule(8).unwrap();
        let e = expand(&TestFunction::dirac(vec![0.0]).unwrap(), 4, &rule).unwrap();
        let want = [0.751126, 0.0, -0.531126, 0.0, 0.459969];
        for (got, w) in e.coeffs().iter().zip(want) {
            assert!((got.re - w).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_coefficients() {
        let rule = gauss_hermite_rule(128).unwrap();
        let e = expand(&TestFunction::gaussian(1.0, 1).unwrap(), 48, &rule).unwrap();
        assert!((e.coeffs()[0].re - PI.powf(0.25)).abs() < 1e-13);
        for k in 1..=48 {
            assert!(e.coeffs()[k].norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn coarse_rule_is_refused() {
        let rule = gauss_hermite_rule(8).unwrap();
        let err = expand(&TestFunction::gaussian(1.0, 1).unwrap(), 12, &rule).unwrap_err();
        assert!(matches!(err, Error::RuleTooCoarse(_)));
    }

    #[test]
    fn multiplier_examples() {
        let rule = gauss_hermite_rule(8).unwrap();
        let e1 = expand(&TestFunction::hermite1(1), 4, &rule).unwrap();
        let h = apply_multiplier(&e1, &MultiplierSpec::Heat { t: 0.3 }).unwrap();
        assert!((h.coeffs()[1].re - 0.406570).abs() < 1e-6);
        let e2 = expand(&TestFunction::hermite1(2), 4, &rule).unwrap();
        let p = apply_multiplier(&e2, &MultiplierSpec::Power { m: -1 }).unwrap();
        assert!((p.coeffs()[2].re - 0.2).abs() < 1e-15);
        let e0 = expand(&TestFunction::hermite1(0), 4, &rule).unwrap();
        let ch = apply_multiplier(&e0, &MultiplierSpec::ComplexHeat { t: 0.2, theta: PI / 4.0 }).unwrap();
        assert!((ch.coeffs()[0] - c(0.578930, -0.578930)).norm() < 1e-6);
        assert!(apply_multiplier(&e0, &MultiplierSpec::Heat { t: 0.0 }).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let rule = gauss_hermite_rule(8).unwrap();
        let e2 = expand(&TestFunction::hermite1(2), 4, &rule).unwrap();
        assert!((sobolev_norm(&e2, 1) - 5.0).abs() < 1e-15);
        assert!((sobolev_norm(&e2, -1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dirac_negative_sobolev_norm_converges() {
        let rule = gauss_hermite_rule(8).unwrap();
        let d = TestFunction::dirac(vec![0.0]).unwrap();
        let a = sobolev_norm(&expand(&d, 32, &rule).unwrap(), -1);
        let b = sobolev_norm(&expand(&d, 48, &rule).unwrap(), -1);
        assert!((a - b).abs() < 1e-4);
        assert!((b - 0.762119948).abs() < 1e-8);
    }

    #[test]
    fn entire_evaluation_examples() {
        let rule = gauss_hermite_rule(8).unwrap();
        let e0 = expand(&TestFunction::hermite1(0), 4, &rule).unwrap();
        let v = eval_entire(&e0, 0.3, &ComplexPoint::origin(1)).unwrap();
        assert!((v.complex().re - 0.556447).abs() < 1e-6);
        let v = eval_entire(&e0, 0.3, &ComplexPoint::new(vec![c(0.0, 2.0)])).unwrap();
        assert!((v.complex().re - 4.111622).abs() < 1e-6);
        let d = expand(&TestFunction::dirac(vec![0.0]).unwrap(), 48, &rule).unwrap();
        let v = eval_entire(&d, 0.5, &ComplexPoint::origin(1)).unwrap();
        assert!((v.complex().re - 0.368005).abs() < 1e-6);
        assert!(!v.truncation_flag);
    }

    #[test]
    fn csv_round_trip() {
        let e = HermiteExpansion::from_fn(2, 3, |a| c(a.order() as f64 + 0.25, -(a.entries()[0] as f64)));
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("alpha_1,alpha_2,re,im"));
        let back = HermiteExpansion::read_csv(&buf[..]).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn bump_values() {
        let b = TestFunction::bump(1.0, 1).unwrap();
        assert_eq!(b.eval(&[0.0]).unwrap(), c(1.0, 0.0));
        assert_eq!(b.eval(&[1.0]).unwrap(), c(0.0, 0.0));
        assert!(b.eval(&[0.9]).unwrap().re > 0.0);
        assert!(TestFunction::bump(-1.0, 1).is_err());
    }
}
