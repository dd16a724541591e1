//! Values frozen from an independent arbitrary-precision evaluation (direct quadrature of the
//! defining integrals, or closed forms evaluated at 30 digits).

#![allow(clippy::excessive_precision)]

use bergman_core::kernels::{mehler_kernel, special_heat_kernel};
use bergman_core::quadrature::gauss_hermite_rule;
use bergman_core::semigroup::{semigroup_apply, Mode, SemigroupOptions};
use bergman_core::special::{phi_ab, twisted_conv, Poly, TwistedFunction};
use bergman_core::specfun::{hermite_eval, phi_k, ComplexPoint, MultiIndex};
use bergman_core::spectral::TestFunction;
use bergman_core::stft::gauss_stft;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn close(got: Complex64, want: Complex64, tol: f64) {
    let err = (got - want).norm() / want.norm().max(1.0);
    assert!(err < tol, "got {got}, want {want}, relative error {err:e}");
}

#[test]
fn hermite_function_values() {
    close(hermite_eval(5, c(0.7, 0.0)).unwrap()[5], c(0.327296763498510687, 0.0), 1e-14);
    close(hermite_eval(3, c(0.4, 1.1)).unwrap()[3], c(-4.16903980571859047, -2.01245767687067302), 1e-14);
    close(hermite_eval(30, c(2.5, 0.0)).unwrap()[30], c(-0.276629554508474434, 0.0), 1e-12);
}

#[test]
fn mehler_kernel_at_complex_pair() {
    let z = ComplexPoint::new(vec![c(0.3, 0.2)]);
    let w = ComplexPoint::new(vec![c(-0.7, 0.4)]);
    close(mehler_kernel(0.5, &z, &w).unwrap(), c(0.215818710762216544, 0.0601595115819535524), 1e-13);
}

#[test]
fn heat_semigroup_of_polynomial_gaussian() {
    let f = TestFunction::poly_gaussian(vec![(MultiIndex::single(0), 1.0), (MultiIndex::single(3), -0.5)], 1.0).unwrap();
    let z = ComplexPoint::new(vec![c(0.8, -0.5)]);
    let want = c(0.385820038169524360, 0.303975646928970053);
    let opts = SemigroupOptions::for_dim(1).unwrap();
    close(semigroup_apply(&f, 0.3, Mode::Spectral, &z, &opts).unwrap(), want, 1e-10);
    close(semigroup_apply(&f, 0.3, Mode::Kernel, &z, &opts).unwrap(), want, 1e-10);
}

#[test]
fn heat_semigroup_of_bump() {
    let f = TestFunction::bump(1.0, 1).unwrap();
    let z = ComplexPoint::new(vec![c(0.3, 0.2)]);
    let opts = SemigroupOptions::for_dim(1).unwrap();
    let got = semigroup_apply(&f, 0.4, Mode::Kernel, &z, &opts).unwrap();
    close(got, c(0.440647376443047186, -0.0352479502396894721), 1e-7);
}

#[test]
fn gaussian_window_transform_of_h2() {
    let f = TestFunction::hermite1(2);
    let z = ComplexPoint::new(vec![c(0.6, 0.9)]);
    let got = gauss_stft(&f, 1.5, &z, 1.0, &gauss_hermite_rule(64).unwrap()).unwrap();
    close(got, c(-0.0473288514299509762, -0.119661483669086639), 1e-12);
}

#[test]
fn special_hermite_values() {
    let rule = gauss_hermite_rule(8).unwrap();
    let (one, two) = (MultiIndex::single(1), MultiIndex::single(2));
    close(
        phi_ab(&two, &one, &[c(0.7, 0.0), c(-1.3, 0.0)], &rule).unwrap(),
        c(-0.136827793062379190, 0.0736765039566657177),
        1e-13,
    );
    close(
        phi_ab(&one, &two, &[c(0.4, -0.3), c(-0.2, 0.5)], &rule).unwrap(),
        c(0.219231123584805596, 0.00405342304914002368),
        1e-13,
    );
}

#[test]
fn special_heat_kernel_and_laguerre_function() {
    let p = ComplexPoint::new(vec![c(1.0, 0.0), c(0.5, 0.0)]);
    close(special_heat_kernel(0.5, &p).unwrap(), c(0.0776582598035797337, 0.0), 1e-14);
    let r = ComplexPoint::new(vec![c(1.5, 0.5)]);
    close(c(phi_k(3, &r).unwrap(), 0.0), c(-0.391688701598531922, 0.0), 1e-14);
}

#[test]
fn twisted_convolution_values() {
    // f = x e^{-(x^2+u^2)/2}, g = e^{-(x^2+u^2)/4}
    let f = TwistedFunction::PolyGaussian {
        poly: Poly::new(2, vec![(vec![1, 0], c(1.0, 0.0))]).unwrap(),
        a: 1.0,
    };
    let g = TwistedFunction::Gaussian { a: 0.5, dim: 1 };
    let rule = gauss_hermite_rule(48).unwrap();
    close(
        twisted_conv(&f, &g, &[c(0.7, 0.0), c(-0.4, 0.0)], &rule).unwrap(),
        c(0.830792450284293669, 0.474738543019596382),
        1e-10,
    );
    close(
        twisted_conv(&f, &g, &[c(0.3, 0.2), c(-0.5, 0.1)], &rule).unwrap(),
        c(0.523985351918283726, 0.906423148620023047),
        1e-10,
    );
}
