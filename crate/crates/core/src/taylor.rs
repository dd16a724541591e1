//! Truncated Taylor series in one variable, used to differentiate closed-form weights in `t`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Coefficients `c_0 + c_1 h + ... + c_K h^K` of a series in the increment `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorScalar {
    coeffs: Vec<f64>,
}

impl TaylorScalar {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        TaylorScalar { coeffs }
    }

    /// The independent variable `t0 + h`.
    pub fn variable(t0: f64, order: usize) -> Self {
        let mut s = Self::constant(t0, order);
        if order >= 1 {
            s.coeffs[1] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `k`-th derivative at the expansion point, `k! c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        if k > self.order() {
            return 0.0;
        }
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        fact * self.coeffs[k]
    }

    pub fn scale(&self, s: f64) -> Self {
        TaylorScalar {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn recip(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 == 0.0 {
            return Err(Error::Domain("reciprocal of a series with zero constant term".into()));
        }
        let k = self.order();
        let mut b = vec![0.0; k + 1];
        b[0] = 1.0 / a0;
        for n in 1..=k {
            let s: f64 = (1..=n).map(|j| self.coeffs[j] * b[n - j]).sum();
            b[n] = -s / a0;
        }
        Ok(TaylorScalar { coeffs: b })
    }

    pub fn exp(&self) -> Self {
        let k = self.order();
        let mut b = vec![0.0; k + 1];
        b[0] = self.coeffs[0].exp();
        for n in 1..=k {
            let s: f64 = (1..=n)
                .map(|j| j as f64 * self.coeffs[j] * b[n - j])
                .sum();
            b[n] = s / n as f64;
        }
        TaylorScalar { coeffs: b }
    }

    pub fn ln(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0 <= 0.0 {
            return Err(Error::Domain("logarithm of a series with non-positive constant term".into()));
        }
        let k = self.order();
        let mut b = vec![0.0; k + 1];
        b[0] = a0.ln();
        for n in 1..=k {
            let s: f64 = (1..n)
                .map(|j| j as f64 * b[j] * self.coeffs[n - j])
                .sum();
            b[n] = (self.coeffs[n] - s / n as f64) / a0;
        }
        Ok(TaylorScalar { coeffs: b })
    }

    pub fn sqrt(&self) -> Result<Self> {
        Ok(self.ln()?.scale(0.5).exp())
    }

    /// `sinh` and `cosh` of the series together.
    pub fn sinh_cosh(&self) -> (Self, Self) {
        let ep = self.exp();
        let em = (-self).exp();
        let s = (&ep - &em).scale(0.5);
        let c = (&ep + &em).scale(0.5);
        (s, c)
    }

    pub fn sinh(&self) -> Self {
        self.sinh_cosh().0
    }

    pub fn cosh(&self) -> Self {
        self.sinh_cosh().1
    }

    pub fn tanh(&self) -> Result<Self> {
        let (s, c) = self.sinh_cosh();
        Ok(&s * &c.recip()?)
    }

    pub fn coth(&self) -> Result<Self> {
        let (s, c) = self.sinh_cosh();
        Ok(&c * &s.recip()?)
    }
}

fn check_orders(a: &TaylorScalar, b: &TaylorScalar) {
    assert_eq!(a.order(), b.order(), "Taylor series orders differ");
}

impl Add for &TaylorScalar {
    type Output = TaylorScalar;
    fn add(self, rhs: &TaylorScalar) -> TaylorScalar {
        check_orders(self, rhs);
        TaylorScalar {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &TaylorScalar {
    type Output = TaylorScalar;
    fn sub(self, rhs: &TaylorScalar) -> TaylorScalar {
        check_orders(self, rhs);
        TaylorScalar {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &TaylorScalar {
    type Output = TaylorScalar;
    fn mul(self, rhs: &TaylorScalar) -> TaylorScalar {
        check_orders(self, rhs);
        let k = self.order();
        let mut c = vec![0.0; k + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().take(k + 1 - i).enumerate() {
                c[i + j] += a * b;
            }
        }
        TaylorScalar { coeffs: c }
    }
}

impl Neg for &TaylorScalar {
    type Output = TaylorScalar;
    fn neg(self) -> TaylorScalar {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_variable_matches_derivatives() {
        let t = TaylorScalar::variable(0.3, 6);
        let e = t.scale(2.0).exp();
        for k in 0..=6 {
            let exact = 2f64.powi(k as i32) * 0.6f64.exp();
            assert!((e.derivative(k) - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn ln_inverts_exp() {
        let t = TaylorScalar::variable(0.7, 5);
        let s = t.sinh();
        let back = s.ln().unwrap().exp();
        for (a, b) in back.coeffs().iter().zip(s.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn recip_times_self_is_one() {
        let t = TaylorScalar::variable(0.4, 6);
        let c = t.cosh();
        let p = &c * &c.recip().unwrap();
        assert!((p.value() - 1.0).abs() < 1e-15);
        for k in 1..=6 {
            assert!(p.coeffs()[k].abs() < 1e-13);
        }
    }

    #[test]
    fn coth_derivative() {
        // d/dt coth(t) = -1/sinh^2(t)
        let t = TaylorScalar::variable(0.5, 2);
        let c = t.coth().unwrap();
        let exact = -1.0 / 0.5f64.sinh().powi(2);
        assert!((c.derivative(1) - exact).abs() < 1e-13);
    }

    #[test]
    fn sqrt_and_domain_errors() {
        let t = TaylorScalar::variable(4.0, 3);
        let r = t.sqrt().unwrap();
        assert!((r.value() - 2.0).abs() < 1e-15);
        assert!((r.derivative(1) - 0.25).abs() < 1e-15);
        assert!(TaylorScalar::constant(0.0, 2).recip().is_err());
        assert!(TaylorScalar::constant(-1.0, 2).ln().is_err());
    }
}
