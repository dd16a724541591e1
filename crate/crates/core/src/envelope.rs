//! Grid scans of `|F|^2 / bound` (or `|F| / bound`) with refinement and box-growth checks.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_dim, Result};
use crate::kernels::{BoundConvention, BoundSpec};
use crate::quadrature::PlaneGrid;
use crate::spectral::EntireHandle;
use crate::specfun::LogComplex;

/// Relative change of the sup under refinement or box growth accepted as stable.
pub const STABILITY_TOLERANCE: f64 = 0.05;

/// Box growth factor used by the stability check.
pub const GROWTH_FACTOR: f64 = 1.5;

/// Result of an envelope scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub bound: BoundSpec,
    pub grid: PlaneGrid,
    pub sup_ratio: f64,
    pub argmax: Vec<Complex64>,
    /// Sup on the refined grid.
    pub refined_sup: f64,
    /// Sup on the grid grown by [`GROWTH_FACTOR`].
    pub grown_sup: f64,
    pub refinement_change: f64,
    pub growth_change: f64,
    /// Both changes are below [`STABILITY_TOLERANCE`].
    pub stable: bool,
}

impl EnvelopeReport {
    pub fn is_finite(&self) -> bool {
        self.sup_ratio.is_finite() && self.refined_sup.is_finite() && self.grown_sup.is_finite()
    }
}

/// One scanned point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub point: Vec<Complex64>,
    pub abs_f2: f64,
    pub bound: f64,
    pub ratio: f64,
}

fn power(b: &BoundSpec) -> f64 {
    match b.convention() {
        BoundConvention::SquaredModulus => 2.0,
        BoundConvention::Modulus => 1.0,
    }
}

fn log_ratio<E>(eval: &E, b: &BoundSpec, p: &[Complex64]) -> Result<f64>
where
    E: Fn(&[Complex64]) -> Result<LogComplex>,
{
    let f = eval(p)?;
    if f.is_zero() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(power(b) * f.log_magnitude - b.log_eval(p)?)
}

fn in_box(grid: &PlaneGrid, p: &[f64]) -> bool {
    grid.boxes.iter().enumerate().all(|(j, bx)| {
        p[2 * j] >= bx[0] && p[2 * j] <= bx[1] && p[2 * j + 1] >= bx[2] && p[2 * j + 1] <= bx[3]
    })
}

fn to_point(p: &[f64]) -> Vec<Complex64> {
    p.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Compass search from the best grid point, staying inside the box.
fn polish<E>(eval: &E, b: &BoundSpec, grid: &PlaneGrid, start: &[Complex64], start_val: f64) -> (f64, Vec<Complex64>)
where
    E: Fn(&[Complex64]) -> Result<LogComplex>,
{
    let mut x: Vec<f64> = start.iter().flat_map(|c| [c.re, c.im]).collect();
    let mut best = start_val;
    let mut step = grid
        .boxes
        .iter()
        .map(|bx| (bx[1] - bx[0]).min(bx[3] - bx[2]))
        .fold(f64::INFINITY, f64::min)
        / (grid.resolution.max(2) - 1) as f64;
    let floor = step * 1e-6;
    let mut evals = 0;
    while step > floor && evals < 4000 {
        let mut improved = false;
        for d in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] += dir * step;
                if !in_box(grid, &y) {
                    continue;
                }
                evals += 1;
                if let Ok(v) = log_ratio(eval, b, &to_point(&y)) {
                    if v > best {
                        best = v;
                        x = y;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, to_point(&x))
}

/// Log of the sup of the ratio over the grid, with its argmax (first maximum in index order).
pub fn log_sup<E>(eval: &E, b: &BoundSpec, grid: &PlaneGrid) -> Result<(f64, Vec<Complex64>)>
where
    E: Fn(&[Complex64]) -> Result<LogComplex> + Sync,
{
    b.validate()?;
    let vals = grid.map_points(|p| log_ratio(eval, b, p))?;
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v > best || (v.is_nan() && !best.is_nan()) {
            best = v;
            idx = i;
        }
    }
    let arg = grid.point(idx)?;
    if !best.is_finite() {
        return Ok((best, arg));
    }
    Ok(polish(eval, b, grid, &arg, best))
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs().max(b.abs())
    }
}

/// Scan an arbitrary evaluator against a bound.
pub fn envelope_scan<E>(eval: &E, b: &BoundSpec, grid: &PlaneGrid) -> Result<EnvelopeReport>
where
    E: Fn(&[Complex64]) -> Result<LogComplex> + Sync,
{
    let (ls, argmax) = log_sup(eval, b, grid)?;
    let (lr, _) = log_sup(eval, b, &grid.refined())?;
    let (lg, _) = log_sup(eval, b, &grid.grown(GROWTH_FACTOR))?;
    let (sup, refined, grown) = (ls.exp(), lr.exp(), lg.exp());
    let refinement_change = relative_change(sup, refined);
    let growth_change = relative_change(sup, grown);
    Ok(EnvelopeReport {
        bound: *b,
        grid: grid.clone(),
        sup_ratio: sup,
        argmax,
        refined_sup: refined,
        grown_sup: grown,
        refinement_change,
        growth_change,
        stable: refinement_change < STABILITY_TOLERANCE && growth_change < STABILITY_TOLERANCE,
    })
}

/// Sup over the grid of `|F|^2 / bound` (or `|F| / bound` for modulus-type bounds).
pub fn envelope_ratio(f: &EntireHandle, b: &BoundSpec, grid: &PlaneGrid) -> Result<EnvelopeReport> {
    require_dim(f.complex_dim(), grid.complex_dim())?;
    envelope_scan(&|p: &[Complex64]| f.eval_log(p), b, grid)
}

/// Factor by which the sup grows when the box is scaled by `factor`.
pub fn growth_factor(f: &EntireHandle, b: &BoundSpec, grid: &PlaneGrid, factor: f64) -> Result<f64> {
    require_dim(f.complex_dim(), grid.complex_dim())?;
    let eval = |p: &[Complex64]| f.eval_log(p);
    let (a, _) = log_sup(&eval, b, grid)?;
    let (c, _) = log_sup(&eval, b, &grid.grown(factor))?;
    Ok((c - a).exp())
}

/// Per-point values of a scan; `abs_f2` is `|F|^2` for every bound kind.
pub fn envelope_samples(f: &EntireHandle, b: &BoundSpec, grid: &PlaneGrid) -> Result<Vec<EnvelopeSample>> {
    require_dim(f.complex_dim(), grid.complex_dim())?;
    b.validate()?;
    grid.map_points(|p| {
        let lf = f.eval_log(p)?;
        let lb = b.log_eval(p)?;
        let ratio = if lf.is_zero() {
            0.0
        } else {
            (power(b) * lf.log_magnitude - lb).exp()
        };
        Ok(EnvelopeSample {
            point: p.to_vec(),
            abs_f2: (2.0 * lf.log_magnitude).exp(),
            bound: lb.exp(),
            ratio,
        })
    })
}

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e15)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// CSV with header `x,y,absF2,bound,ratio` (first complex coordinate); floats round-trip
/// exactly through [`format_float`].
pub fn write_envelope_csv<W: Write>(samples: &[EnvelopeSample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x", "y", "absF2", "bound", "ratio"])?;
    for s in samples {
        let p = s.point.first().copied().unwrap_or_default();
        wr.write_record([
            format_float(p.re),
            format_float(p.im),
            format_float(s.abs_f2),
            format_float(s.bound),
            format_float(s.ratio),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridLayout;
    use crate::spectral::HermiteExpansion;
    use crate::specfun::MultiIndex;
    use std::f64::consts::PI;

    fn ground_state(t: f64) -> EntireHandle {
        EntireHandle::Hermite {
            expansion: HermiteExpansion::from_entries(1, &[(MultiIndex::single(0), Complex64::new(1.0, 0.0))])
                .unwrap(),
            t,
        }
    }

    #[test]
    fn ground_state_sup_at_origin() {
        let grid = PlaneGrid::centered(1, 4.0, 4.0, 41, GridLayout::Uniform).unwrap();
        let r = envelope_ratio(&ground_state(0.3), &BoundSpec::SobolevEmbed { t: 0.3, m: 0 }, &grid).unwrap();
        let want = (-0.6f64).exp() / PI.sqrt();
        assert!((r.sup_ratio - want).abs() < 1e-12);
        assert!(r.argmax[0].norm() < 1e-12);
        assert!(r.stable);
    }

    #[test]
    fn zero_function_has_zero_sup() {
        let grid = PlaneGrid::centered(1, 2.0, 2.0, 11, GridLayout::Uniform).unwrap();
        let r = envelope_ratio(&EntireHandle::Zero { dim: 1 }, &BoundSpec::Tempered { t: 0.5, m: 0 }, &grid).unwrap();
        assert_eq!(r.sup_ratio, 0.0);
        assert!(r.stable);
    }

    #[test]
    fn csv_header_and_rows() {
        let grid = PlaneGrid::centered(1, 1.0, 1.0, 3, GridLayout::Uniform).unwrap();
        let s = envelope_samples(&ground_state(0.3), &BoundSpec::SobolevEmbed { t: 0.3, m: 1 }, &grid).unwrap();
        assert_eq!(s.len(), 9);
        let mut buf = Vec::new();
        write_envelope_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,absF2,bound,ratio"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], -1.0);
        assert_eq!(row[4], s[0].ratio);
    }
}
