//! Gauss rules on the line and tensor grids over `C^n`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::LogComplex;

/// Largest number of complex coordinates a [`PlaneGrid`] may carry.
pub const MAX_COMPLEX_DIM: usize = 4;

/// Peak-relative level at which truncated boxes cut a Gaussian weight.
pub const TRUNCATION_LEVEL: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadKind {
    GaussHermite,
    GaussLegendre,
}

/// A one-dimensional Gauss rule.
///
/// For Gauss-Hermite rules `weights` integrate against `e^{-(x/s)^2}` (`s = 1` unless the rule
/// was rescaled) and `plain_weights` are the weights with the factor `e^{(x/s)^2}` folded in,
/// so `sum plain_weights[j] g(nodes[j])` approximates `int g`. For Gauss-Legendre rules the two
/// coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadRule {
    pub kind: QuadKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub plain_weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss-Hermite rule for `e^{-(x/s)^2}`: nodes and weights scaled by `s`.
    pub fn scaled(&self, s: f64) -> QuadRule {
        QuadRule {
            kind: self.kind,
            nodes: self.nodes.iter().map(|x| x * s).collect(),
            weights: self.weights.iter().map(|w| w * s).collect(),
            plain_weights: self.plain_weights.iter().map(|w| w * s).collect(),
        }
    }

    /// Gauss-Legendre rule moved from `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> QuadRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        QuadRule {
            kind: self.kind,
            nodes: self.nodes.iter().map(|x| mid + half * x).collect(),
            weights: self.weights.iter().map(|w| w * half).collect(),
            plain_weights: self.plain_weights.iter().map(|w| w * half).collect(),
        }
    }

    /// Largest node magnitude.
    pub fn half_width(&self) -> f64 {
        self.nodes.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `q`-point Gauss-Hermite rule for the weight `e^{-x^2}` (`1 <= q <= 512`).
///
/// Nodes come from the symmetric tridiagonal Jacobi matrix and are polished by Newton steps on
/// `h_q`; weights use the Christoffel form `w_j = e^{-x_j^2} / sum_{k<q} h_k(x_j)^2`.
pub fn gauss_hermite_rule(q: usize) -> Result<QuadRule> {
    if !(1..=512).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "Gauss-Hermite order must lie in 1..=512, got {q}"
        )));
    }
    let jacobi = DMatrix::from_fn(q, q, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut h = vec![0.0; q + 1];
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            crate::specfun::hermite_real_into(*x, &mut h);
            let deriv = (2.0 * q as f64).sqrt() * h[q - 1] - *x * h[q];
            if deriv == 0.0 {
                break;
            }
            let step = h[q] / deriv;
            *x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // enforce exact symmetry
    for i in 0..q / 2 {
        let m = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -m;
        nodes[q - 1 - i] = m;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut weights = Vec::with_capacity(q);
    let mut plain = Vec::with_capacity(q);
    let mut hq = vec![0.0; q];
    for &x in &nodes {
        crate::specfun::hermite_real_into(x, &mut hq);
        let s: f64 = hq.iter().map(|v| v * v).sum();
        plain.push(1.0 / s);
        weights.push((-x * x).exp() / s);
    }
    Ok(QuadRule {
        kind: QuadKind::GaussHermite,
        nodes,
        weights,
        plain_weights: plain,
    })
}

/// `q`-point Gauss-Legendre rule on `[-1, 1]` (`1 <= q <= 4096`).
pub fn gauss_legendre_rule(q: usize) -> Result<QuadRule> {
    if !(1..=4096).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "Gauss-Legendre order must lie in 1..=4096, got {q}"
        )));
    }
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    Ok(QuadRule {
        kind: QuadKind::GaussLegendre,
        nodes,
        plain_weights: weights.clone(),
        weights,
    })
}

fn legendre_with_derivative(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if q == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = q as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Neumaier-compensated complex sum in the given order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, v.re);
        neumaier(&mut self.im, &mut self.im_c, v.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

fn neumaier(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

/// Tensor-product approximation of `int_{R^n} g` using the plain weights of `rule`
/// (for a Gauss-Hermite rule this applies the compensation factor `e^{sum x_j^2}`).
pub fn integrate_rn<G>(g: G, rule: &QuadRule, n: usize) -> Result<Complex64>
where
    G: Fn(&[f64]) -> Complex64,
{
    if n == 0 || n > 4 {
        return Err(Error::Unsupported(format!(
            "tensor integration over R^{n} is outside the supported range 1..=4"
        )));
    }
    let rules = vec![rule; n];
    integrate_tensor(g, &rules)
}

/// Tensor product of one rule per coordinate, summed with plain weights in index order.
pub fn integrate_tensor<G>(g: G, rules: &[&QuadRule]) -> Result<Complex64>
where
    G: Fn(&[f64]) -> Complex64,
{
    let n = rules.len();
    if n == 0 || n > 2 * MAX_COMPLEX_DIM {
        return Err(Error::Unsupported(format!("tensor integration in {n} real dimensions")));
    }
    let total: usize = rules.iter().map(|r| r.len()).product();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    let mut sum = CompensatedSum::new();
    for _ in 0..total {
        let mut w = 1.0;
        for j in 0..n {
            x[j] = rules[j].nodes[idx[j]];
            w *= rules[j].plain_weights[idx[j]];
        }
        let v = g(&x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteSample { node: x.clone() });
        }
        sum.add(v * w);
        advance(&mut idx, rules);
    }
    Ok(sum.value())
}

/// The rule with every node moved by `shift`.
pub fn shifted(rule: &QuadRule, shift: f64) -> QuadRule {
    QuadRule {
        kind: rule.kind,
        nodes: rule.nodes.iter().map(|x| x + shift).collect(),
        weights: rule.weights.clone(),
        plain_weights: rule.plain_weights.clone(),
    }
}

fn advance(idx: &mut [usize], rules: &[&QuadRule]) {
    for j in (0..idx.len()).rev() {
        idx[j] += 1;
        if idx[j] < rules[j].len() {
            return;
        }
        idx[j] = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridLayout {
    /// Gauss-Legendre nodes per axis, for integration.
    GaussLegendre,
    /// Equispaced nodes including the endpoints with trapezoid weights, for scans.
    Uniform,
}

/// Tensor grid over a box in `C^n`; each complex coordinate has its own `[x_min, x_max, y_min, y_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneGrid {
    pub boxes: Vec<[f64; 4]>,
    pub resolution: usize,
    pub layout: GridLayout,
}

/// Nodes and weights along one real axis.
#[derive(Debug, Clone)]
pub struct Axis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PlaneGrid {
    pub fn new(boxes: Vec<[f64; 4]>, resolution: usize, layout: GridLayout) -> Result<Self> {
        if boxes.is_empty() || boxes.len() > MAX_COMPLEX_DIM {
            return Err(Error::InvalidParameter(format!(
                "grid needs between 1 and {MAX_COMPLEX_DIM} complex coordinates, got {}",
                boxes.len()
            )));
        }
        for b in &boxes {
            if !b.iter().all(|v| v.is_finite()) || b[0] >= b[1] || b[2] >= b[3] {
                return Err(Error::InvalidParameter(format!("degenerate box {b:?}")));
            }
        }
        let min_res = if layout == GridLayout::Uniform { 2 } else { 1 };
        if resolution < min_res {
            return Err(Error::InvalidParameter(format!(
                "grid resolution {resolution} too small"
            )));
        }
        Ok(PlaneGrid {
            boxes,
            resolution,
            layout,
        })
    }

    /// Box `[-hx, hx] x [-hy, hy]` in every one of `n` complex coordinates.
    pub fn centered(n: usize, hx: f64, hy: f64, resolution: usize, layout: GridLayout) -> Result<Self> {
        Self::new(vec![[-hx, hx, -hy, hy]; n], resolution, layout)
    }

    pub fn complex_dim(&self) -> usize {
        self.boxes.len()
    }

    pub fn real_dim(&self) -> usize {
        2 * self.boxes.len()
    }

    pub fn point_count(&self) -> usize {
        self.resolution.pow(self.real_dim() as u32)
    }

    pub fn area(&self) -> f64 {
        self.boxes
            .iter()
            .map(|b| (b[1] - b[0]) * (b[3] - b[2]))
            .product()
    }

    /// Real axes in the order `Re z_1, Im z_1, Re z_2, ...`.
    pub fn axes(&self) -> Result<Vec<Axis>> {
        let mut out = Vec::with_capacity(self.real_dim());
        let gl = match self.layout {
            GridLayout::GaussLegendre => Some(gauss_legendre_rule(self.resolution)?),
            GridLayout::Uniform => None,
        };
        for b in &self.boxes {
            for (lo, hi) in [(b[0], b[1]), (b[2], b[3])] {
                out.push(match &gl {
                    Some(rule) => {
                        let m = rule.mapped(lo, hi);
                        Axis {
                            nodes: m.nodes,
                            weights: m.weights,
                        }
                    }
                    None => uniform_axis(lo, hi, self.resolution),
                });
            }
        }
        Ok(out)
    }

    /// Same box, resolution doubled (Gauss-Legendre) or spacing halved (uniform).
    pub fn refined(&self) -> PlaneGrid {
        let resolution = match self.layout {
            GridLayout::GaussLegendre => 2 * self.resolution,
            GridLayout::Uniform => 2 * self.resolution - 1,
        };
        PlaneGrid {
            boxes: self.boxes.clone(),
            resolution,
            layout: self.layout,
        }
    }

    /// Box scaled about its center by `factor`; uniform grids keep their spacing.
    pub fn grown(&self, factor: f64) -> PlaneGrid {
        let boxes = self
            .boxes
            .iter()
            .map(|b| {
                let cx = 0.5 * (b[0] + b[1]);
                let hx = 0.5 * (b[1] - b[0]) * factor;
                let cy = 0.5 * (b[2] + b[3]);
                let hy = 0.5 * (b[3] - b[2]) * factor;
                [cx - hx, cx + hx, cy - hy, cy + hy]
            })
            .collect();
        let resolution = match self.layout {
            GridLayout::GaussLegendre => self.resolution,
            GridLayout::Uniform => ((self.resolution - 1) as f64 * factor).round() as usize + 1,
        };
        PlaneGrid {
            boxes,
            resolution,
            layout: self.layout,
        }
    }

    /// Evaluate `f` at every node in index order (last axis fastest).
    pub fn map_points<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[Complex64]) -> Result<T> + Sync,
    {
        let axes = self.axes()?;
        let r = self.resolution;
        let inner = self.point_count() / r;
        let chunks: Vec<Result<Vec<T>>> = (0..r)
            .into_par_iter()
            .map(|outer| {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.complex_dim()];
                let mut out = Vec::with_capacity(inner);
                for i in 0..inner {
                    fill_point(&axes, r, outer, i, &mut buf);
                    out.push(f(&buf)?);
                }
                Ok(out)
            })
            .collect();
        let mut all = Vec::with_capacity(self.point_count());
        for c in chunks {
            all.extend(c?);
        }
        Ok(all)
    }

    /// Point with flat index `idx` (as enumerated by `map_points`).
    pub fn point(&self, idx: usize) -> Result<Vec<Complex64>> {
        let axes = self.axes()?;
        let r = self.resolution;
        let inner = self.point_count() / r;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.complex_dim()];
        fill_point(&axes, r, idx / inner, idx % inner, &mut buf);
        Ok(buf)
    }
}

fn uniform_axis(lo: f64, hi: f64, r: usize) -> Axis {
    let h = (hi - lo) / (r - 1) as f64;
    let nodes = (0..r).map(|i| lo + h * i as f64).collect();
    let weights = (0..r)
        .map(|i| if i == 0 || i == r - 1 { 0.5 * h } else { h })
        .collect();
    Axis { nodes, weights }
}

fn fill_point(axes: &[Axis], r: usize, outer: usize, inner: usize, buf: &mut [Complex64]) -> f64 {
    let d = axes.len();
    let mut rest = inner;
    let mut coord = [0usize; 2 * MAX_COMPLEX_DIM];
    coord[0] = outer;
    for a in (1..d).rev() {
        coord[a] = rest % r;
        rest /= r;
    }
    let mut w = 1.0;
    for (j, slot) in buf.iter_mut().enumerate() {
        let (ax, ay) = (&axes[2 * j], &axes[2 * j + 1]);
        *slot = Complex64::new(ax.nodes[coord[2 * j]], ay.nodes[coord[2 * j + 1]]);
        w *= ax.weights[coord[2 * j]] * ay.weights[coord[2 * j + 1]];
    }
    w
}

fn plane_sum<G>(g: G, grid: &PlaneGrid) -> Result<Complex64>
where
    G: Fn(&[Complex64]) -> Result<Complex64> + Sync,
{
    let v = plane_sum_many(
        |p, out: &mut [Complex64]| {
            out[0] = g(p)?;
            Ok(())
        },
        1,
        grid,
    )?;
    Ok(v[0])
}

fn plane_sum_many<G>(g: G, k: usize, grid: &PlaneGrid) -> Result<Vec<Complex64>>
where
    G: Fn(&[Complex64], &mut [Complex64]) -> Result<()> + Sync,
{
    let axes = grid.axes()?;
    let r = grid.resolution;
    let inner = grid.point_count() / r;
    let partials: Vec<Result<Vec<CompensatedSum>>> = (0..r)
        .into_par_iter()
        .map(|outer| {
            let mut buf = vec![Complex64::new(0.0, 0.0); grid.complex_dim()];
            let mut vals = vec![Complex64::new(0.0, 0.0); k];
            let mut sums = vec![CompensatedSum::new(); k];
            for i in 0..inner {
                let w = fill_point(&axes, r, outer, i, &mut buf);
                g(&buf, &mut vals)?;
                for (s, v) in sums.iter_mut().zip(&vals) {
                    if !(v.re.is_finite() && v.im.is_finite()) {
                        return Err(Error::NonFiniteSample {
                            node: buf.iter().flat_map(|c| [c.re, c.im]).collect(),
                        });
                    }
                    s.add(v * w);
                }
            }
            Ok(sums)
        })
        .collect();
    let mut total = vec![CompensatedSum::new(); k];
    for p in partials {
        for (t, s) in total.iter_mut().zip(p?) {
            t.add(s.value());
        }
    }
    Ok(total.iter().map(|s| s.value()).collect())
}

/// Integrate `k` integrands in one sweep; `g` writes the values at a point into its buffer.
pub fn integrate_plane_many<G>(g: G, k: usize, grid: &PlaneGrid) -> Result<Vec<Complex64>>
where
    G: Fn(&[Complex64], &mut [Complex64]) -> Result<()> + Sync,
{
    plane_sum_many(g, k, grid)
}

/// Tensor quadrature of `int g dx dy` over the grid's box (Lebesgue measure on `C^n`).
pub fn integrate_plane<G>(g: G, grid: &PlaneGrid) -> Result<Complex64>
where
    G: Fn(&[Complex64]) -> Result<Complex64> + Sync,
{
    plane_sum(g, grid)
}

/// As [`integrate_plane`] for an integrand given in log form, so that large Gaussian factors
/// cancel before exponentiation.
pub fn integrate_plane_log<G>(g: G, grid: &PlaneGrid) -> Result<Complex64>
where
    G: Fn(&[Complex64]) -> Result<LogComplex> + Sync,
{
    plane_sum(|p| Ok(g(p)?.to_complex()), grid)
}

/// An integral together with its value on the refined grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedIntegral {
    pub value: Complex64,
    pub refined: Complex64,
    /// `|refined - value|`.
    pub change: f64,
}

/// Integrate on `grid` and on `grid.refined()`, reporting the change.
pub fn integrate_plane_refined<G>(g: G, grid: &PlaneGrid) -> Result<RefinedIntegral>
where
    G: Fn(&[Complex64]) -> Result<Complex64> + Sync,
{
    let value = plane_sum(&g, grid)?;
    let refined = plane_sum(&g, &grid.refined())?;
    Ok(RefinedIntegral {
        value,
        refined,
        change: (refined - value).norm(),
    })
}

/// Half-width `X` at which `X^degree e^{-rate X^2}` has fallen below [`TRUNCATION_LEVEL`]
/// of its value at `X = 1`.
pub fn gaussian_half_width(rate: f64, degree: u32) -> f64 {
    let target = -TRUNCATION_LEVEL.ln();
    let mut x = (target / rate).sqrt();
    for _ in 0..20 {
        x = ((target + degree as f64 * x.max(1.0).ln()) / rate).sqrt();
    }
    x.max(1.0)
}
