//! Special Hermite functions, twisted convolution, the semigroup `e^{-tL}` and the
//! weighted spaces on `C^{2n}`.
//!
//! Points of `R^{2n}` are `(x_1..x_n, u_1..u_n)`; their complexifications are
//! `(z_1..z_n, w_1..w_n)` with `z = x + iy`, `w = u + iv`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelope::{envelope_ratio, EnvelopeReport};
use crate::error::{require_dim, require_positive_time, Error, Result};
use crate::kernels::{special_heat_kernel_log, BoundSpec, WeightProfile};
use crate::quadrature::{
    gauss_hermite_rule, gaussian_half_width, integrate_plane, integrate_plane_many, shifted, CompensatedSum,
    GridLayout, PlaneGrid, QuadKind, QuadRule,
};
use crate::spectral::EntireHandle;
use crate::specfun::{laguerre_function, poly_parts_into, LogComplex, MultiIndex};

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Polynomial with complex coefficients in the `2n` real variables `(x, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    vars: usize,
    terms: Vec<(Vec<u32>, Complex64)>,
}

impl Poly {
    pub fn new(vars: usize, terms: Vec<(Vec<u32>, Complex64)>) -> Result<Self> {
        if terms.iter().any(|(e, _)| e.len() != vars) {
            return Err(Error::InvalidParameter(format!(
                "monomial exponents must have {vars} entries"
            )));
        }
        Ok(Self::merged(vars, terms))
    }

    pub fn constant(vars: usize, c: Complex64) -> Self {
        Self::merged(vars, vec![(vec![0; vars], c)])
    }

    fn merged(vars: usize, terms: Vec<(Vec<u32>, Complex64)>) -> Self {
        let mut map: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
        for (e, c) in terms {
            *map.entry(e).or_insert(c0()) += c;
        }
        Poly {
            vars,
            terms: map.into_iter().filter(|(_, c)| c.norm() != 0.0).collect(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> &[(Vec<u32>, Complex64)] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().cloned());
        Self::merged(self.vars, t)
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Self::merged(self.vars, self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect())
    }

    /// Multiply by the variable with index `i`.
    pub fn mul_var(&self, i: usize) -> Poly {
        Self::merged(
            self.vars,
            self.terms
                .iter()
                .map(|(e, v)| {
                    let mut e = e.clone();
                    e[i] += 1;
                    (e, *v)
                })
                .collect(),
        )
    }

    /// Partial derivative in the variable with index `i`.
    pub fn diff(&self, i: usize) -> Poly {
        Self::merged(
            self.vars,
            self.terms
                .iter()
                .filter(|(e, _)| e[i] > 0)
                .map(|(e, v)| {
                    let mut e = e.clone();
                    let k = e[i];
                    e[i] -= 1;
                    (e, v * k as f64)
                })
                .collect(),
        )
    }

    pub fn eval(&self, p: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(p)
                    .fold(*c, |acc, (&k, &x)| if k == 0 { acc } else { acc * x.powu(k) })
            })
            .sum()
    }
}

/// Values of a function sampled on a uniform grid over `[x0,x1] x [u0,u1]` (n = 1),
/// row-major with `u` varying fastest, interpolated bilinearly and zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledGrid {
    pub x_range: [f64; 2],
    pub u_range: [f64; 2],
    pub nx: usize,
    pub nu: usize,
    pub values: Vec<Complex64>,
}

impl SampledGrid {
    /// Sample `f` at the grid nodes.
    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(x_range: [f64; 2], u_range: [f64; 2], nx: usize, nu: usize, f: F) -> Result<Self> {
        if nx < 2 || nu < 2 || x_range[0] >= x_range[1] || u_range[0] >= u_range[1] {
            return Err(Error::InvalidParameter("sampled grid needs two nodes per axis and a proper box".into()));
        }
        let mut values = Vec::with_capacity(nx * nu);
        for i in 0..nx {
            for j in 0..nu {
                let (x, u) = Self::node(x_range, nx, i, u_range, nu, j);
                values.push(f(x, u));
            }
        }
        Ok(SampledGrid {
            x_range,
            u_range,
            nx,
            nu,
            values,
        })
    }

    fn node(xr: [f64; 2], nx: usize, i: usize, ur: [f64; 2], nu: usize, j: usize) -> (f64, f64) {
        (
            xr[0] + (xr[1] - xr[0]) * i as f64 / (nx - 1) as f64,
            ur[0] + (ur[1] - ur[0]) * j as f64 / (nu - 1) as f64,
        )
    }

    pub fn eval(&self, x: f64, u: f64) -> Complex64 {
        let fx = (x - self.x_range[0]) / (self.x_range[1] - self.x_range[0]) * (self.nx - 1) as f64;
        let fu = (u - self.u_range[0]) / (self.u_range[1] - self.u_range[0]) * (self.nu - 1) as f64;
        if !(0.0..=(self.nx - 1) as f64).contains(&fx) || !(0.0..=(self.nu - 1) as f64).contains(&fu) {
            return c0();
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fu.floor() as usize).min(self.nu - 2);
        let (a, b) = (fx - i as f64, fu - j as f64);
        let v = |i: usize, j: usize| self.values[i * self.nu + j];
        v(i, j) * (1.0 - a) * (1.0 - b) + v(i + 1, j) * a * (1.0 - b) + v(i, j + 1) * (1.0 - a) * b + v(i + 1, j + 1) * a * b
    }

    /// Trapezoid rules along the two axes.
    fn rules(&self) -> [QuadRule; 2] {
        let axis = |r: [f64; 2], m: usize| {
            let h = (r[1] - r[0]) / (m - 1) as f64;
            let nodes: Vec<f64> = (0..m).map(|i| r[0] + h * i as f64).collect();
            let weights: Vec<f64> = (0..m).map(|i| if i == 0 || i == m - 1 { 0.5 * h } else { h }).collect();
            QuadRule {
                kind: QuadKind::GaussLegendre,
                nodes,
                plain_weights: weights.clone(),
                weights,
            }
        };
        [axis(self.x_range, self.nx), axis(self.u_range, self.nu)]
    }
}

/// Functions on `R^{2n} = C^n` that the twisted-convolution operations accept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TwistedFunction {
    /// `Phi_{alpha beta}`.
    SpecialHermite { alpha: MultiIndex, beta: MultiIndex },
    /// `e^{-a(|x|^2+|u|^2)/2}`.
    Gaussian { a: f64, dim: usize },
    /// `P(x, u) e^{-a(|x|^2+|u|^2)/2}`.
    PolyGaussian { poly: Poly, a: f64 },
    /// Laguerre function `phi_k`.
    Laguerre { k: u32, dim: usize },
    /// Heat kernel `p_t` of `L`.
    HeatKernel { t: f64, dim: usize },
    /// Grid samples (n = 1), not entire.
    Sampled { grid: SampledGrid },
}

impl TwistedFunction {
    pub fn special_hermite(alpha: u32, beta: u32) -> Self {
        TwistedFunction::SpecialHermite {
            alpha: MultiIndex::single(alpha),
            beta: MultiIndex::single(beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            TwistedFunction::SpecialHermite { alpha, beta } => {
                require_dim(alpha.dim(), beta.dim())?;
                if alpha.dim() == 0 {
                    return Err(Error::InvalidParameter("empty multi-index".into()));
                }
                Ok(())
            }
            TwistedFunction::Gaussian { a, .. } => positive(*a, "Gaussian rate"),
            TwistedFunction::PolyGaussian { poly, a } => {
                if poly.vars() == 0 || poly.vars() % 2 != 0 {
                    return Err(Error::InvalidParameter("polynomial needs 2n variables".into()));
                }
                positive(*a, "Gaussian rate")
            }
            TwistedFunction::HeatKernel { t, .. } => require_positive_time(*t),
            _ => Ok(()),
        }?;
        if self.dim() == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(())
    }

    /// `n`, the complex dimension of the underlying `C^n`.
    pub fn dim(&self) -> usize {
        match self {
            TwistedFunction::SpecialHermite { alpha, .. } => alpha.dim(),
            TwistedFunction::Gaussian { dim, .. }
            | TwistedFunction::Laguerre { dim, .. }
            | TwistedFunction::HeatKernel { dim, .. } => *dim,
            TwistedFunction::PolyGaussian { poly, .. } => poly.vars() / 2,
            TwistedFunction::Sampled { .. } => 1,
        }
    }

    /// Rate `a` of the dominating Gaussian `e^{-a(|x|^2+|u|^2)/2}`.
    pub fn decay_rate(&self) -> Option<f64> {
        match self {
            TwistedFunction::SpecialHermite { .. } | TwistedFunction::Laguerre { .. } => Some(0.5),
            TwistedFunction::Gaussian { a, .. } | TwistedFunction::PolyGaussian { a, .. } => Some(*a),
            TwistedFunction::HeatKernel { t, .. } => Some(0.5 / t.tanh()),
            TwistedFunction::Sampled { .. } => None,
        }
    }

    pub fn is_entire(&self) -> bool {
        !matches!(self, TwistedFunction::Sampled { .. })
    }

    /// Value at a point of `C^{2n}` (entire members) or of `R^{2n}` (all members).
    pub fn eval_entire(&self, p: &[Complex64]) -> Result<Complex64> {
        let n = self.dim();
        require_dim(2 * n, p.len())?;
        let s: Complex64 = p.iter().map(|c| c * c).sum();
        Ok(match self {
            TwistedFunction::SpecialHermite { alpha, beta } => {
                let q = contour_nodes_needed(alpha, beta);
                phi_ab_log(alpha, beta, p, &gauss_hermite_rule(q.max(1))?)?.to_complex()
            }
            TwistedFunction::Gaussian { a, .. } => (-0.5 * a * s).exp(),
            TwistedFunction::PolyGaussian { poly, a } => poly.eval(p) * (-0.5 * a * s).exp(),
            TwistedFunction::Laguerre { k, .. } => laguerre_function(*k as usize, n, s),
            TwistedFunction::HeatKernel { t, .. } => special_heat_kernel_log(*t, p)?.to_complex(),
            TwistedFunction::Sampled { grid } => {
                if p.iter().any(|c| c.im != 0.0) {
                    return Err(Error::Unsupported("sampled functions have no entire extension".into()));
                }
                grid.eval(p[0].re, p[1].re)
            }
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<Complex64> {
        let pc: Vec<Complex64> = p.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.eval_entire(&pc)
    }

    /// `(P, a)` with `f = P e^{-a(|x|^2+|u|^2)/2}`, when `f` has that closed form here.
    pub fn as_poly_gaussian(&self) -> Option<(Poly, f64)> {
        let n = self.dim();
        match self {
            TwistedFunction::Gaussian { a, .. } => Some((Poly::constant(2 * n, Complex64::new(1.0, 0.0)), *a)),
            TwistedFunction::PolyGaussian { poly, a } => Some((poly.clone(), *a)),
            TwistedFunction::SpecialHermite { alpha, beta } if alpha.order() == 0 && beta.order() == 0 => Some((
                Poly::constant(2 * n, Complex64::new((2.0 * PI).powf(-0.5 * n as f64), 0.0)),
                0.5,
            )),
            _ => None,
        }
    }
}

fn contour_nodes_needed(alpha: &MultiIndex, beta: &MultiIndex) -> usize {
    alpha
        .entries()
        .iter()
        .zip(beta.entries())
        .map(|(&a, &b)| (a + b) as usize / 2 + 1)
        .max()
        .unwrap_or(1)
}

fn require_plain_hermite(rule: &QuadRule) -> Result<()> {
    if rule.kind != QuadKind::GaussHermite {
        return Err(Error::InvalidParameter("special Hermite evaluation needs a Gauss-Hermite rule".into()));
    }
    Ok(())
}

/// log of `(2 pi)^{-1/2} pi^{-1/2}`, the per-coordinate constant of the contour formula.
fn contour_log_constant() -> f64 {
    -0.5 * (2.0 * PI).ln() - 0.5 * PI.ln()
}

/// One-coordinate table `S[a][b] = sum_k W_k p_a(eta_k + iz/2 + w/2) p_b(eta_k + iz/2 - w/2)`
/// for `a <= max_a`, `b <= max_b`, with `Phi_{ab}(z, w) = c e^{-(z^2+w^2)/4} S[a][b]`.
fn contour_table(max_a: usize, max_b: usize, z: Complex64, w: Complex64, rule: &QuadRule) -> Vec<Complex64> {
    let mut plus = vec![c0(); max_a + 1];
    let mut minus = vec![c0(); max_b + 1];
    let mut table = vec![c0(); (max_a + 1) * (max_b + 1)];
    let shift = Complex64::new(0.0, 0.5) * z;
    for (eta, wt) in rule.nodes.iter().zip(&rule.weights) {
        poly_parts_into(eta + shift + 0.5 * w, &mut plus);
        poly_parts_into(eta + shift - 0.5 * w, &mut minus);
        for (a, pa) in plus.iter().enumerate() {
            let s = pa * wt;
            for (b, pb) in minus.iter().enumerate() {
                table[a * (max_b + 1) + b] += s * pb;
            }
        }
    }
    table
}

/// `Phi_{alpha beta}` at a point of `C^{2n}` in log form.
///
/// The defining `xi`-integral is moved to the line `xi = eta + iz/2`, where the integrand is
/// `e^{-eta^2}` times a polynomial of degree `|alpha_j| + |beta_j|`; a Gauss-Hermite rule
/// with at least `(alpha_j + beta_j)/2 + 1` nodes is therefore exact.
pub fn phi_ab_log(alpha: &MultiIndex, beta: &MultiIndex, zw: &[Complex64], rule: &QuadRule) -> Result<LogComplex> {
    let n = alpha.dim();
    require_dim(n, beta.dim())?;
    require_dim(2 * n, zw.len())?;
    require_plain_hermite(rule)?;
    if zw.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Domain("non-finite point".into()));
    }
    let need = contour_nodes_needed(alpha, beta);
    if rule.len() < need {
        return Err(Error::RuleTooCoarse(format!(
            "{} nodes cannot resolve indices ({alpha}, {beta}); need {need}",
            rule.len()
        )));
    }
    let mut acc = LogComplex::ONE;
    let mut expo = Complex64::new(n as f64 * contour_log_constant(), 0.0);
    for j in 0..n {
        let (z, w) = (zw[j], zw[n + j]);
        let (a, b) = (alpha.entries()[j] as usize, beta.entries()[j] as usize);
        let table = contour_table(a, b, z, w, rule);
        acc = acc * LogComplex::from_complex(table[a * (b + 1) + b]);
        expo -= 0.25 * (z * z + w * w);
    }
    Ok(acc.mul_exp(expo))
}

/// The special Hermite function `Phi_{alpha beta}` (entire in `(z, w)`).
pub fn phi_ab(alpha: &MultiIndex, beta: &MultiIndex, zw: &[Complex64], rule: &QuadRule) -> Result<Complex64> {
    Ok(phi_ab_log(alpha, beta, zw, rule)?.to_complex())
}

/// Truncated special Hermite series `sum d_{alpha beta} Phi_{alpha beta}`, `|alpha|, |beta| <= N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialExpansion {
    dim: usize,
    order: u32,
    indices: Vec<MultiIndex>,
    coeffs: Vec<Complex64>,
}

impl SpecialExpansion {
    pub fn zero(dim: usize, order: u32) -> Self {
        let indices = MultiIndex::graded(dim, order);
        let k = indices.len();
        SpecialExpansion {
            dim,
            order,
            indices,
            coeffs: vec![c0(); k * k],
        }
    }

    pub fn from_entries(dim: usize, entries: &[(MultiIndex, MultiIndex, Complex64)]) -> Result<Self> {
        for (a, b, _) in entries {
            require_dim(dim, a.dim())?;
            require_dim(dim, b.dim())?;
        }
        let order = entries
            .iter()
            .map(|(a, b, _)| a.order().max(b.order()))
            .max()
            .unwrap_or(0);
        let mut e = Self::zero(dim, order);
        for (a, b, c) in entries {
            let i = e.position(a).expect("index within order");
            let j = e.position(b).expect("index within order");
            let k = e.indices.len();
            e.coeffs[i * k + j] += c;
        }
        Ok(e)
    }

    /// The single basis function `Phi_{alpha beta}`.
    pub fn basis(alpha: &MultiIndex, beta: &MultiIndex) -> Result<Self> {
        Self::from_entries(alpha.dim(), &[(alpha.clone(), beta.clone(), Complex64::new(1.0, 0.0))])
    }

    fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|x| x == a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &MultiIndex, &Complex64)> {
        let k = self.indices.len();
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(idx, c)| (&self.indices[idx / k], &self.indices[idx % k], c))
    }

    pub fn coefficient(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Complex64 {
        match (self.position(alpha), self.position(beta)) {
            (Some(i), Some(j)) => self.coeffs[i * self.indices.len() + j],
            _ => c0(),
        }
    }

    pub fn l2_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Laguerre Sobolev norm `sqrt(sum (2|beta|+n)^{2m} |d_{alpha beta}|^2)`.
    pub fn sobolev_norm(&self, m: i32) -> f64 {
        self.iter()
            .map(|(_, b, c)| b.eigenvalue().powi(2 * m) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `sum d_{alpha beta} e^{-(2|beta|+n)t} Phi_{alpha beta}(z, w)` in log form; `t = 0` gives the
    /// series itself.
    pub fn eval_log(&self, t: f64, zw: &[Complex64], rule: &QuadRule) -> Result<LogComplex> {
        let n = self.dim;
        require_dim(2 * n, zw.len())?;
        require_plain_hermite(rule)?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        let need = self.order as usize + 1;
        if rule.len() < need {
            return Err(Error::RuleTooCoarse(format!(
                "{} nodes cannot resolve order {}; need {need}",
                rule.len(),
                self.order
            )));
        }
        let m = self.order as usize;
        let tables: Vec<Vec<Complex64>> = (0..n)
            .map(|j| contour_table(m, m, zw[j], zw[n + j], rule))
            .collect();
        let mut sum = CompensatedSum::new();
        for (a, b, c) in self.iter() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let mut term = c * (-b.eigenvalue() * t).exp();
            for (j, tab) in tables.iter().enumerate() {
                term *= tab[a.entries()[j] as usize * (m + 1) + b.entries()[j] as usize];
            }
            sum.add(term);
        }
        let mut expo = Complex64::new(n as f64 * contour_log_constant(), 0.0);
        for j in 0..n {
            expo -= 0.25 * (zw[j] * zw[j] + zw[n + j] * zw[n + j]);
        }
        Ok(LogComplex::from_complex(sum.value()).mul_exp(expo))
    }
}

/// Quadrature settings for the special Hermite operations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialOptions {
    /// Gauss-Hermite rule for integrals over `R^{2n}`.
    pub rule: QuadRule,
    /// Gauss-Hermite rule for the contour formula of `Phi_{alpha beta}`.
    pub contour: QuadRule,
    /// Number of Laguerre levels in spectral mode; `None` picks `ceil(16/t)`.
    pub levels: Option<u32>,
    /// Truncation order for special Hermite expansions of non-basis functions.
    pub order: u32,
}

impl SpecialOptions {
    pub fn new(q: usize) -> Result<Self> {
        Ok(SpecialOptions {
            rule: gauss_hermite_rule(q)?,
            contour: gauss_hermite_rule(8)?,
            levels: None,
            order: 16,
        })
    }

    fn levels_for(&self, t: f64) -> u32 {
        self.levels.unwrap_or_else(|| ((16.0 / t).ceil() as u32).clamp(12, 400))
    }
}

/// `(d_{alpha beta}) = (f, Phi_{alpha beta})` for `|alpha|, |beta| <= order` (n = 1).
pub fn special_expand(f: &TwistedFunction, order: u32, rule: &QuadRule) -> Result<SpecialExpansion> {
    f.validate()?;
    if let TwistedFunction::SpecialHermite { alpha, beta } = f {
        let mut e = SpecialExpansion::basis(alpha, beta)?;
        if e.order < order {
            let entries: Vec<_> = e.iter().map(|(a, b, c)| (a.clone(), b.clone(), *c)).collect();
            e = SpecialExpansion::zero(f.dim(), order);
            for (a, b, c) in entries {
                let (i, j) = (e.position(&a).unwrap(), e.position(&b).unwrap());
                let k = e.indices.len();
                e.coeffs[i * k + j] = c;
            }
        }
        return Ok(e);
    }
    if f.dim() != 1 {
        return Err(Error::Unsupported("special Hermite expansions are limited to n = 1".into()));
    }
    let rules: [QuadRule; 2] = match f {
        TwistedFunction::Sampled { grid } => grid.rules(),
        _ => {
            let a = f.decay_rate().expect("decaying member");
            if rule.len() < order as usize + 1 {
                return Err(Error::RuleTooCoarse(format!(
                    "{} nodes cannot resolve order {order}",
                    rule.len()
                )));
            }
            let r = rule.scaled((2.0 / (a + 0.5)).sqrt());
            [r.clone(), r]
        }
    };
    let contour = gauss_hermite_rule(order as usize + 1)?;
    let m = order as usize;
    let mut sums = vec![CompensatedSum::new(); (m + 1) * (m + 1)];
    let lc = contour_log_constant();
    for (x, wx) in rules[0].nodes.iter().zip(&rules[0].plain_weights) {
        for (u, wu) in rules[1].nodes.iter().zip(&rules[1].plain_weights) {
            let fv = f.eval(&[*x, *u])?;
            if fv.norm() == 0.0 {
                continue;
            }
            let table = contour_table(m, m, Complex64::new(*x, 0.0), Complex64::new(*u, 0.0), &contour);
            let g = (lc - 0.25 * (x * x + u * u)).exp() * wx * wu;
            for (s, v) in sums.iter_mut().zip(&table) {
                s.add(fv * (v * g).conj());
            }
        }
    }
    let mut e = SpecialExpansion::zero(1, order);
    for (idx, (a, b)) in e
        .indices
        .iter()
        .flat_map(|a| e.indices.iter().map(move |b| (a, b)))
        .enumerate()
        .map(|(i, (a, b))| (i, (a.entries()[0] as usize, b.entries()[0] as usize)))
        .collect::<Vec<_>>()
    {
        e.coeffs[idx] = sums[a * (m + 1) + b].value();
    }
    Ok(e)
}

/// `int f(x', u') g(z - x', w - u') e^{-(i/2)(x'.w - z.u')} dx' du'` for every output of `g`,
/// with `f` given by a closure decaying like `e^{-f_rate(|x'|^2+|u'|^2)/2}` (or sampled rules).
#[allow(clippy::too_many_arguments)]
fn twisted_integral<F, G>(
    f: F,
    f_rate: Option<f64>,
    sampled_rules: Option<[QuadRule; 2]>,
    g_rate: f64,
    n: usize,
    p: &[Complex64],
    rule: &QuadRule,
    outputs: usize,
    g: G,
) -> Result<Vec<Complex64>>
where
    F: Fn(&[f64]) -> Result<Complex64>,
    G: Fn(&[Complex64], &mut [Complex64]) -> Result<()>,
{
    let (z, w) = p.split_at(n);
    let rules: Vec<QuadRule> = match (sampled_rules, f_rate) {
        (Some(r), _) => r.to_vec(),
        (None, Some(a)) => {
            let total = a + g_rate;
            let base = rule.scaled((2.0 / total).sqrt());
            let mut rs = Vec::with_capacity(2 * n);
            for j in 0..n {
                rs.push(shifted(&base, (g_rate * z[j].re + 0.5 * w[j].im) / total));
            }
            for j in 0..n {
                rs.push(shifted(&base, (g_rate * w[j].re - 0.5 * z[j].im) / total));
            }
            rs
        }
        (None, None) => {
            return Err(Error::Unsupported("twisted convolution needs a decaying or sampled first factor".into()))
        }
    };
    let d = 2 * n;
    if d > 4 {
        return Err(Error::Unsupported(format!("twisted convolution over R^{d}")));
    }
    let total: usize = rules.iter().map(|r| r.len()).product();
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut q = vec![c0(); d];
    let mut vals = vec![c0(); outputs];
    let mut sums = vec![CompensatedSum::new(); outputs];
    let half_i = Complex64::new(0.0, 0.5);
    for _ in 0..total {
        let mut wt = 1.0;
        for j in 0..d {
            x[j] = rules[j].nodes[idx[j]];
            wt *= rules[j].plain_weights[idx[j]];
        }
        let fv = f(&x)?;
        if fv.norm() != 0.0 && wt != 0.0 {
            let mut phase = c0();
            for j in 0..n {
                phase -= half_i * (x[j] * w[j] - z[j] * x[n + j]);
            }
            for j in 0..d {
                q[j] = p[j] - x[j];
            }
            g(&q, &mut vals)?;
            let factor = fv * phase.exp() * wt;
            for (s, v) in sums.iter_mut().zip(&vals) {
                let term = factor * v;
                if !(term.re.is_finite() && term.im.is_finite()) {
                    return Err(Error::NonFiniteSample { node: x.clone() });
                }
                s.add(term);
            }
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < rules[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(sums.iter().map(|s| s.value()).collect())
}

fn sampled_rules(f: &TwistedFunction) -> Option<[QuadRule; 2]> {
    match f {
        TwistedFunction::Sampled { grid } => Some(grid.rules()),
        _ => None,
    }
}

fn check_point(f: &TwistedFunction, g: &TwistedFunction, p: &[Complex64]) -> Result<usize> {
    f.validate()?;
    g.validate()?;
    let n = f.dim();
    require_dim(n, g.dim())?;
    require_dim(2 * n, p.len())?;
    if p.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Domain("non-finite point".into()));
    }
    if p.iter().any(|c| c.im != 0.0) && !g.is_entire() {
        return Err(Error::Unsupported(
            "a complex point needs a second factor with an entire extension".into(),
        ));
    }
    Ok(n)
}

/// Twisted convolution `(f x g)(p)`; at complex `p` this is the entire extension in `p`.
pub fn twisted_conv(f: &TwistedFunction, g: &TwistedFunction, p: &[Complex64], rule: &QuadRule) -> Result<Complex64> {
    let n = check_point(f, g, p)?;
    let v = twisted_integral(
        |x| f.eval(x),
        f.decay_rate(),
        sampled_rules(f),
        g.decay_rate().unwrap_or(0.0),
        n,
        p,
        rule,
        1,
        |q, out| {
            out[0] = g.eval_entire(q)?;
            Ok(())
        },
    )?;
    Ok(v[0])
}

/// How `e^{-tL} f` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecialMode {
    /// `(2 pi)^{-n} sum_k e^{-(2k+n)t} f x phi_k`.
    Spectral,
    /// `f x p_t`.
    Kernel,
}

/// `e^{-tL} f` at a point of `C^{2n}`.
pub fn special_semigroup_apply(
    f: &TwistedFunction,
    t: f64,
    mode: SpecialMode,
    p: &[Complex64],
    opts: &SpecialOptions,
) -> Result<Complex64> {
    require_positive_time(t)?;
    let n = f.dim();
    match mode {
        SpecialMode::Kernel => twisted_conv(f, &TwistedFunction::HeatKernel { t, dim: n }, p, &opts.rule),
        SpecialMode::Spectral => {
            let levels = opts.levels_for(t) as usize;
            let proj = laguerre_projections(f, levels, p, &opts.rule)?;
            let mut sum = CompensatedSum::new();
            for (k, v) in proj.iter().enumerate() {
                sum.add(v * (-(2.0 * k as f64 + n as f64) * t).exp());
            }
            Ok(sum.value())
        }
    }
}

/// `(2 pi)^{-n} (f x phi_k)(p)` for `k = 0..levels-1` in one quadrature sweep.
pub fn laguerre_projections(f: &TwistedFunction, levels: usize, p: &[Complex64], rule: &QuadRule) -> Result<Vec<Complex64>> {
    let n = check_point(f, &TwistedFunction::Laguerre { k: 0, dim: f.dim() }, p)?;
    let scale = (2.0 * PI).powi(-(n as i32));
    let a = (n - 1) as f64;
    let v = twisted_integral(
        |x| f.eval(x),
        f.decay_rate(),
        sampled_rules(f),
        0.5,
        n,
        p,
        rule,
        levels,
        |q, out| {
            let s: Complex64 = q.iter().map(|c| c * c).sum();
            let r = 0.5 * s;
            let g = (-0.25 * s).exp();
            // Laguerre recurrence in k at fixed type n-1
            let mut prev = Complex64::new(1.0, 0.0);
            let mut cur = 1.0 + a - r;
            for (k, slot) in out.iter_mut().enumerate() {
                if k == 0 {
                    *slot = prev * g;
                    continue;
                }
                *slot = cur * g;
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0 + a - r) * cur - (kf + a) * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            Ok(())
        },
    )?;
    Ok(v.into_iter().map(|c| c * scale).collect())
}

/// `(2 pi)^{-n} (f x phi_k)(p)`, the projection onto the `k`-th eigenspace of `L`.
pub fn laguerre_project(f: &TwistedFunction, k: u32, p: &[Complex64], rule: &QuadRule) -> Result<Complex64> {
    let n = check_point(f, &TwistedFunction::Laguerre { k, dim: f.dim() }, p)?;
    Ok(twisted_conv(f, &TwistedFunction::Laguerre { k, dim: n }, p, rule)? * (2.0 * PI).powi(-(n as i32)))
}

/// Partial sum of the Laguerre projections with the size of its last term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub value: Complex64,
    pub last_term: f64,
    pub target: Complex64,
    pub error: f64,
}

/// `sum_{k < levels} (2 pi)^{-n} f x phi_k` at a real point, compared with `f` there.
pub fn laguerre_reconstruct(f: &TwistedFunction, levels: usize, p: &[f64], rule: &QuadRule) -> Result<Reconstruction> {
    let pc: Vec<Complex64> = p.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let proj = laguerre_projections(f, levels, &pc, rule)?;
    let mut sum = CompensatedSum::new();
    for v in &proj {
        sum.add(*v);
    }
    let value = sum.value();
    let target = f.eval(p)?;
    Ok(Reconstruction {
        value,
        last_term: proj.last().map_or(0.0, |c| c.norm()),
        target,
        error: (value - target).norm(),
    })
}

/// The two readings of the constant `a` in the intertwining relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `a = -coth(t)/2`.
    Negative,
    /// `a = +coth(t)/2`.
    Positive,
}

impl SignConvention {
    pub const ALL: [SignConvention; 2] = [SignConvention::Negative, SignConvention::Positive];

    pub fn a(&self, t: f64) -> f64 {
        let h = 0.5 / t.tanh();
        match self {
            SignConvention::Negative => -h,
            SignConvention::Positive => h,
        }
    }
}

/// How the derivatives inside an intertwining check were taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeKind {
    Analytic,
    FiniteDifference,
}

/// Residuals `max |LHS - RHS| / (1 + |RHS|)` of the first-order intertwining relations,
/// indexed by [`SignConvention::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntertwineReport {
    pub t: f64,
    pub coordinate: usize,
    pub derivative: DerivativeKind,
    /// `e^{-tL}((d/dx_j - a x_j) f) = (-a z_j + b w_j) e^{-tL} f`.
    pub residual_x: [f64; 2],
    /// `e^{-tL}((d/du_j + b u_j) f) = (b z_j + a w_j) e^{-tL} f`, as first stated.
    pub residual_u_stated: [f64; 2],
    /// `e^{-tL}((d/du_j - a u_j) f) = (-b z_j - a w_j) e^{-tL} f`.
    pub residual_u: [f64; 2],
}

impl IntertwineReport {
    /// Conventions under which both the `x` relation and the `u` relation hold to `tol`.
    pub fn passing(&self, tol: f64) -> Vec<SignConvention> {
        SignConvention::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| self.residual_x[*i] <= tol && self.residual_u[*i] <= tol)
            .map(|(_, s)| *s)
            .collect()
    }
}

/// `(d/dv + c v) f` for variable index `var`, analytically when `f` is a polynomial times a
/// Gaussian and by fourth-order central differences (step `1e-3`) otherwise.
enum FirstOrder<'a> {
    Analytic(TwistedFunction),
    Numeric { f: &'a TwistedFunction, var: usize, c: Complex64 },
}

const FD_STEP: f64 = 1e-3;

fn first_order<'a>(f: &'a TwistedFunction, var: usize, c: Complex64) -> FirstOrder<'a> {
    match f.as_poly_gaussian() {
        Some((poly, a)) => FirstOrder::Analytic(apply_first_order(&poly, a, var, c)),
        None => FirstOrder::Numeric { f, var, c },
    }
}

/// `(d/dv + c v)(P e^{-a r^2/2}) = (dP/dv + (c - a) v P) e^{-a r^2/2}`.
fn apply_first_order(poly: &Poly, a: f64, var: usize, c: Complex64) -> TwistedFunction {
    let p = poly.diff(var).add(&poly.mul_var(var).scale(c - a));
    TwistedFunction::PolyGaussian { poly: p, a }
}

impl FirstOrder<'_> {
    fn eval(&self, x: &[f64]) -> Result<Complex64> {
        match self {
            FirstOrder::Analytic(g) => g.eval(x),
            FirstOrder::Numeric { f, var, c } => {
                let mut y = x.to_vec();
                let mut at = |d: f64| -> Result<Complex64> {
                    y[*var] = x[*var] + d;
                    f.eval(&y)
                };
                let h = FD_STEP;
                let deriv = (at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h);
                Ok(deriv + c * x[*var] * f.eval(x)?)
            }
        }
    }

    fn kind(&self) -> DerivativeKind {
        match self {
            FirstOrder::Analytic(_) => DerivativeKind::Analytic,
            FirstOrder::Numeric { .. } => DerivativeKind::FiniteDifference,
        }
    }
}

fn heat_apply_fn<F>(fun: F, rate: f64, n: usize, t: f64, p: &[Complex64], rule: &QuadRule) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Result<Complex64>,
{
    let v = twisted_integral(
        fun,
        Some(rate),
        None,
        0.5 / t.tanh(),
        n,
        p,
        rule,
        1,
        |q, out| {
            out[0] = special_heat_kernel_log(t, q)?.to_complex();
            Ok(())
        },
    )?;
    Ok(v[0])
}

/// Residuals of the intertwining relations for `f` at the given points of `C^{2n}`.
pub fn intertwine_check(
    f: &TwistedFunction,
    t: f64,
    j: usize,
    points: &[Vec<Complex64>],
    rule: &QuadRule,
) -> Result<IntertwineReport> {
    require_positive_time(t)?;
    f.validate()?;
    let n = f.dim();
    if j >= n {
        return Err(Error::InvalidParameter(format!("coordinate {j} out of range for n = {n}")));
    }
    let rate = f
        .decay_rate()
        .ok_or_else(|| Error::Unsupported("intertwining needs a decaying function".into()))?;
    let b = Complex64::new(0.0, 0.5);
    let base: Vec<Complex64> = points
        .iter()
        .map(|p| heat_apply_fn(|x| f.eval(x), rate, n, t, p, rule))
        .collect::<Result<_>>()?;
    let mut report = IntertwineReport {
        t,
        coordinate: j,
        derivative: first_order(f, j, c0()).kind(),
        residual_x: [0.0; 2],
        residual_u_stated: [0.0; 2],
        residual_u: [0.0; 2],
    };
    for (si, sign) in SignConvention::ALL.iter().enumerate() {
        let a = Complex64::new(sign.a(t), 0.0);
        let ops: [(usize, Complex64, &dyn Fn(Complex64, Complex64) -> Complex64); 3] = [
            (j, -a, &|z, w| -a * z + b * w),
            (n + j, b, &|z, w| b * z + a * w),
            (n + j, -a, &|z, w| -b * z - a * w),
        ];
        for (oi, (var, coef, rhs)) in ops.iter().enumerate() {
            let g = first_order(f, *var, *coef);
            let mut worst: f64 = 0.0;
            for (p, fp) in points.iter().zip(&base) {
                let lhs = heat_apply_fn(|x| g.eval(x), rate, n, t, p, rule)?;
                let r = rhs(p[j], p[n + j]) * fp;
                worst = worst.max((lhs - r).norm() / (1.0 + r.norm()));
            }
            match oi {
                0 => report.residual_x[si] = worst,
                1 => report.residual_u_stated[si] = worst,
                _ => report.residual_u[si] = worst,
            }
        }
    }
    Ok(report)
}

/// Residual of `e^{-tL}(T f) = z_j w_j e^{-tL} f` where `T` is the composition of the
/// first-order operators (under `sign`) that maps to multiplication by `z_j` and by `w_j`.
pub fn composed_check(
    f: &TwistedFunction,
    t: f64,
    j: usize,
    sign: SignConvention,
    points: &[Vec<Complex64>],
    rule: &QuadRule,
) -> Result<f64> {
    require_positive_time(t)?;
    let (poly, rate) = f
        .as_poly_gaussian()
        .ok_or_else(|| Error::Unsupported("composed relation needs a polynomial times a Gaussian".into()))?;
    let n = f.dim();
    if j >= n {
        return Err(Error::InvalidParameter(format!("coordinate {j} out of range for n = {n}")));
    }
    let a = Complex64::new(sign.a(t), 0.0);
    let b = Complex64::new(0.0, 0.5);
    let det = a * a + b * b;
    // A = d/dx - a x  maps to  -a z + b w;   B = d/du - a u  maps to  -b z - a w
    let op_a = |p: &Poly| p.diff(j).add(&p.mul_var(j).scale(-a - rate));
    let op_b = |p: &Poly| p.diff(n + j).add(&p.mul_var(n + j).scale(-a - rate));
    // W = (bA - aB)/det maps to w, Z = (-aA - bB)/det maps to z
    let wp = op_a(&poly).scale(b / det).add(&op_b(&poly).scale(-a / det));
    let zwp = op_a(&wp).scale(-a / det).add(&op_b(&wp).scale(-b / det));
    let composed = TwistedFunction::PolyGaussian { poly: zwp, a: rate };
    let mut worst: f64 = 0.0;
    for p in points {
        let lhs = heat_apply_fn(|x| composed.eval(x), rate, n, t, p, rule)?;
        let base = heat_apply_fn(|x| f.eval(x), rate, n, t, p, rule)?;
        let r = p[j] * p[n + j] * base;
        worst = worst.max((lhs - r).norm() / (1.0 + r.norm()));
    }
    Ok(worst)
}

/// Gauss-Legendre box on `C^2` for integrals against `W_t`: `x, u` in `[-hx, hx]`,
/// `y, v` in `[-hy, hy]`, from the coupled Gaussian of `|Phi|^2 W_t`.
pub fn special_grid(t: f64, degree: u32, resolution: usize) -> Result<PlaneGrid> {
    require_positive_time(t)?;
    let c = 1.0 / (2.0 * t).tanh() - 0.5;
    let det = 0.5 * c - 0.25;
    // the ellipse Q <= L has extents sqrt(L (A^{-1})_xx) and sqrt(L (A^{-1})_vv)
    let hx = gaussian_half_width(det / c, degree);
    let hy = gaussian_half_width(2.0 * det, degree);
    PlaneGrid::new(vec![[-hx, hx, -hy, hy]; 2], resolution, GridLayout::GaussLegendre)
}

fn special_features(p: &[Complex64]) -> ([f64; 1], f64) {
    let (z, w) = (p[0], p[1]);
    ([z.im * z.im + w.im * w.im], w.re * z.im - w.im * z.re)
}

fn require_special_plane(grid: &PlaneGrid, f_dim: usize) -> Result<()> {
    if f_dim != 2 || grid.complex_dim() != 2 {
        return Err(Error::Unsupported(
            "integrals over C^{2n} are limited to n = 1 (four real dimensions)".into(),
        ));
    }
    Ok(())
}

/// `int |F|^2 (d^{2m}/dt^{2m} W_t) dz dw` over the grid (n = 1), with the weight as printed.
pub fn bergman_norm_special(f: &EntireHandle, t: f64, m: u32, grid: &PlaneGrid) -> Result<f64> {
    require_special_plane(grid, f.complex_dim())?;
    let prof = WeightProfile::special(t, m, 1)?;
    let v = integrate_plane(
        |p| {
            let (feat, phase) = special_features(p);
            let w = prof.eval(&feat, phase);
            let lf = f.eval_log(p)?;
            if lf.is_zero() {
                return Ok(c0());
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

/// Pairwise integrals `int Phi_p conj(Phi_q) (d^{2m}/dt^{2m} W_t)` of special Hermite
/// functions for several `m` at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialGram {
    pub t: f64,
    pub pairs: Vec<(u32, u32)>,
    pub orders: Vec<u32>,
    /// `entries[m_index][p * k + q]`.
    pub entries: Vec<Vec<Complex64>>,
}

impl SpecialGram {
    pub fn get(&self, m_index: usize, p: usize, q: usize) -> Complex64 {
        self.entries[m_index][p * self.pairs.len() + q]
    }
}

/// One sweep of the grid computing [`SpecialGram`] for `n = 1` index pairs.
pub fn special_gram(t: f64, pairs: &[(u32, u32)], orders: &[u32], grid: &PlaneGrid) -> Result<SpecialGram> {
    require_positive_time(t)?;
    require_special_plane(grid, 2)?;
    let k = pairs.len();
    if k == 0 || orders.is_empty() {
        return Err(Error::InvalidParameter("special Gram matrix needs pairs and orders".into()));
    }
    let profiles: Vec<WeightProfile> = orders
        .iter()
        .map(|&m| WeightProfile::special(t, m, 1))
        .collect::<Result<_>>()?;
    let max_a = pairs.iter().map(|p| p.0).max().unwrap() as usize;
    let max_b = pairs.iter().map(|p| p.1).max().unwrap() as usize;
    let contour = gauss_hermite_rule((max_a + max_b) / 2 + 1)?;
    let lc = contour_log_constant();
    let upper = k * (k + 1) / 2;
    let flat = integrate_plane_many(
        |p, out: &mut [Complex64]| {
            let (z, w) = (p[0], p[1]);
            let table = contour_table(max_a, max_b, z, w, &contour);
            let g = Complex64::new(lc, 0.0) - 0.25 * (z * z + w * w);
            let vals: Vec<Complex64> = pairs
                .iter()
                .map(|&(a, b)| table[a as usize * (max_b + 1) + b as usize])
                .collect();
            let (feat, phase) = special_features(p);
            for (mi, prof) in profiles.iter().enumerate() {
                let wt = prof.eval(&feat, phase);
                let scale = (2.0 * g.re + wt.log_magnitude).exp() * wt.factor;
                let mut idx = 0;
                for i in 0..k {
                    for jj in i..k {
                        out[mi * upper + idx] = vals[i] * vals[jj].conj() * scale;
                        idx += 1;
                    }
                }
            }
            Ok(())
        },
        orders.len() * upper,
        grid,
    )?;
    let mut entries = vec![vec![c0(); k * k]; orders.len()];
    for (mi, e) in entries.iter_mut().enumerate() {
        let mut idx = 0;
        for i in 0..k {
            for jj in i..k {
                let v = flat[mi * upper + idx];
                e[i * k + jj] = v;
                e[jj * k + i] = v.conj();
                idx += 1;
            }
        }
    }
    Ok(SpecialGram {
        t,
        pairs: pairs.to_vec(),
        orders: orders.to_vec(),
        entries,
    })
}

/// `kappa*` with `kappa* int |Phi_00|^2 W_t = e^{2nt}` (n = 1).
pub fn calibrate_special_weight(t: f64, grid: &PlaneGrid) -> Result<f64> {
    let g = special_gram(t, &[(0, 0)], &[0], grid)?;
    let d = g.get(0, 0, 0).re;
    if !(d > 0.0) {
        return Err(Error::Calibration("non-positive probe integral".into()));
    }
    Ok((2.0 * t).exp() / d)
}

/// `e^{-tL} f` as an evaluable handle on `C^{2n}` (special Hermite series form).
pub fn special_image(f: &TwistedFunction, t: f64, opts: &SpecialOptions) -> Result<EntireHandle> {
    require_positive_time(t)?;
    let expansion = special_expand(f, opts.order, &opts.rule)?;
    let need = expansion.order() as usize + 1;
    let rule = if opts.contour.len() >= need {
        opts.contour.clone()
    } else {
        gauss_hermite_rule(need)?
    };
    Ok(EntireHandle::Special { expansion, t, rule })
}

/// Envelope of `e^{-tL} f` against the full (`plain = false`) or the `(y, v)`-only
/// (`plain = true`) denominator, over a grid on `C^2`.
pub fn special_envelope(
    f: &TwistedFunction,
    t: f64,
    m: u32,
    plain: bool,
    grid: &PlaneGrid,
    opts: &SpecialOptions,
) -> Result<EnvelopeReport> {
    if f.dim() != 1 {
        return Err(Error::Unsupported("special envelopes are limited to n = 1".into()));
    }
    let handle = special_image(f, t, opts)?;
    let bound = if plain {
        BoundSpec::SpecialPlain { t, m }
    } else {
        BoundSpec::SpecialSchwartz { t, m }
    };
    envelope_ratio(&handle, &bound, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gh(q: usize) -> QuadRule {
        gauss_hermite_rule(q).unwrap()
    }

    #[test]
    fn phi_00_closed_form() {
        let m0 = MultiIndex::single(0);
        let v = phi_ab(&m0, &m0, &[c(0.0, 0.0), c(0.0, 0.0)], &gh(8)).unwrap();
        assert!((v.re - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
        let v = phi_ab(&m0, &m0, &[c(2f64.sqrt(), 0.0), c(2f64.sqrt(), 0.0)], &gh(8)).unwrap();
        assert!((v.re - (2.0 * PI).powf(-0.5) * (-1f64).exp()).abs() < 1e-15);
        let p = [c(0.4, -0.7), c(1.1, 0.3)];
        let v = phi_ab(&m0, &m0, &p, &gh(8)).unwrap();
        let want = (2.0 * PI).powf(-0.5) * (-0.25 * (p[0] * p[0] + p[1] * p[1])).exp();
        assert!((v - want).norm() < 1e-15);
    }

    #[test]
    fn coarse_contour_rule_refused() {
        let a = MultiIndex::single(5);
        assert!(matches!(
            phi_ab(&a, &a, &[c(0.0, 0.0), c(0.0, 0.0)], &gh(4)),
            Err(Error::RuleTooCoarse(_))
        ));
    }

    #[test]
    fn direct_definition_agrees_at_real_points() {
        // (2 pi)^{-1/2} int e^{i x xi} h_a(xi + u/2) h_b(xi - u/2) d xi by brute force
        let rule = gh(96);
        for (a, b) in [(0u32, 1u32), (2, 1), (3, 3)] {
            let (x, u) = (0.7, -1.3);
            let mut s = c0();
            for (xi, w) in rule.nodes.iter().zip(&rule.plain_weights) {
                let ha = crate::specfun::hermite_eval(a as usize, c(xi + u / 2.0, 0.0)).unwrap()[a as usize];
                let hb = crate::specfun::hermite_eval(b as usize, c(xi - u / 2.0, 0.0)).unwrap()[b as usize];
                s += Complex64::from_polar(1.0, x * xi) * ha * hb * w;
            }
            s *= (2.0 * PI).powf(-0.5);
            let v = phi_ab(&MultiIndex::single(a), &MultiIndex::single(b), &[c(x, 0.0), c(u, 0.0)], &gh(8)).unwrap();
            assert!((v - s).norm() < 1e-12, "{a}{b}: {v} {s}");
        }
    }

    #[test]
    fn laguerre_self_convolution() {
        let rule = gh(64);
        let p = [c(0.0, 0.0), c(0.0, 0.0)];
        let phi0 = TwistedFunction::Laguerre { k: 0, dim: 1 };
        let phi1 = TwistedFunction::Laguerre { k: 1, dim: 1 };
        let v = twisted_conv(&phi0, &phi0, &p, &rule).unwrap();
        assert!((v.re - 2.0 * PI).abs() < 1e-10);
        assert!(twisted_conv(&phi0, &phi1, &p, &rule).unwrap().norm() < 1e-10);
    }

    #[test]
    fn heat_kernel_eigen_relation() {
        let opts = SpecialOptions::new(64).unwrap();
        for (a, b) in [(0u32, 0u32), (0, 1), (2, 1)] {
            let f = TwistedFunction::special_hermite(a, b);
            for p in [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.5, 0.3), c(-0.2, 0.6)]] {
                let got = special_semigroup_apply(&f, 0.5, SpecialMode::Kernel, &p, &opts).unwrap();
                let want = f.eval_entire(&p).unwrap() * (-(2.0 * b as f64 + 1.0) * 0.5).exp();
                assert!((got - want).norm() < 1e-10, "({a},{b}) {got} {want}");
            }
        }
    }

    #[test]
    fn projections_and_reconstruction() {
        let rule = gh(64);
        let f = TwistedFunction::special_hermite(0, 0);
        let o = [c(0.0, 0.0), c(0.0, 0.0)];
        let v0 = laguerre_project(&f, 0, &o, &rule).unwrap();
        assert!((v0.re - (2.0 * PI).powf(-0.5)).abs() < 1e-10);
        assert!(laguerre_project(&f, 1, &o, &rule).unwrap().norm() < 1e-10);
        let g = TwistedFunction::Gaussian { a: 1.0, dim: 1 };
        let r = laguerre_reconstruct(&g, 13, &[0.0, 0.0], &rule).unwrap();
        assert!(r.error < 1e-4, "{r:?}");
    }

    #[test]
    fn modes_agree_for_gaussian() {
        let mut opts = SpecialOptions::new(96).unwrap();
        opts.levels = Some(60);
        let f = TwistedFunction::Gaussian { a: 1.0, dim: 1 };
        let p = [c(0.3, 0.8), c(-0.5, -0.6)];
        let a = special_semigroup_apply(&f, 0.4, SpecialMode::Kernel, &p, &opts).unwrap();
        let b = special_semigroup_apply(&f, 0.4, SpecialMode::Spectral, &p, &opts).unwrap();
        assert!((a - b).norm() < 1e-8 * a.norm(), "{a} {b}");
    }

    #[test]
    fn intertwining_selects_positive_sign() {
        let points = vec![vec![c(0.3, 0.2), c(-0.4, 0.5)], vec![c(-0.8, -0.3), c(0.6, 0.1)]];
        let f = TwistedFunction::Gaussian { a: 1.0 / 0.5f64.tanh(), dim: 1 };
        let r = intertwine_check(&f, 0.5, 0, &points, &gh(64)).unwrap();
        assert_eq!(r.derivative, DerivativeKind::Analytic);
        assert_eq!(r.passing(1e-6), vec![SignConvention::Positive]);
        let g = TwistedFunction::special_hermite(1, 0);
        let r = intertwine_check(&g, 0.4, 0, &points, &gh(64)).unwrap();
        assert_eq!(r.derivative, DerivativeKind::FiniteDifference);
        assert_eq!(r.passing(1e-6), vec![SignConvention::Positive]);
        let e = composed_check(&f, 0.5, 0, SignConvention::Positive, &points, &gh(64)).unwrap();
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn expansion_of_basis_and_gaussian() {
        let rule = gh(48);
        let g = TwistedFunction::Gaussian { a: 1.0, dim: 1 };
        let e = special_expand(&g, 12, &rule).unwrap();
        // Gaussian(1) has norm^2 = pi on R^2
        assert!((e.l2_norm_sqr() - PI).abs() < 1e-6, "{}", e.l2_norm_sqr());
        let p = [c(0.3, 0.1), c(-0.2, 0.2)];
        let v = e.eval_log(0.0, &p, &gh(13)).unwrap().to_complex();
        let want = g.eval_entire(&p).unwrap();
        assert!((v - want).norm() < 1e-5, "{v} {want}");
    }

    #[test]
    fn poly_algebra() {
        let p = Poly::new(2, vec![(vec![2, 0], c(1.0, 0.0)), (vec![0, 1], c(0.0, 2.0))]).unwrap();
        assert_eq!(p.degree(), 2);
        let d = p.diff(0);
        assert_eq!(d.terms(), &[(vec![1, 0], c(2.0, 0.0))]);
        let v = p.mul_var(1).eval(&[c(1.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(v, c(2.0, 8.0));
        assert!(Poly::new(2, vec![(vec![1], c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn sampled_functions_stay_real() {
        let grid = SampledGrid::from_fn([-6.0, 6.0], [-6.0, 6.0], 121, 121, |x, u| {
            c((-(x * x + u * u) / 2.0).exp(), 0.0)
        })
        .unwrap();
        let f = TwistedFunction::Sampled { grid };
        assert!((f.eval(&[0.05, 0.0]).unwrap().re - (-0.00125f64).exp()).abs() < 2e-3);
        let phi0 = TwistedFunction::Laguerre { k: 0, dim: 1 };
        assert!(twisted_conv(&phi0, &f, &[c(0.0, 1.0), c(0.0, 0.0)], &gh(16)).is_err());
        let v = twisted_conv(&f, &phi0, &[c(0.0, 0.0), c(0.0, 0.0)], &gh(16)).unwrap();
        // int e^{-r^2/2} e^{-r^2/4} = 2 pi / 1.5
        assert!((v.re - 2.0 * PI / 1.5).abs() < 1e-2);
    }
}
