use bergman_core::envelope::format_float;
use bergman_core::kernels::mehler_kernel;
use bergman_core::quadrature::{gauss_hermite_rule, integrate_rn};
use bergman_core::special::{phi_ab, Poly};
use bergman_core::specfun::{hermite_eval, ComplexPoint, LogComplex, MultiIndex};
use bergman_core::suite::SuiteConfig;
use num_complex::Complex64;
use proptest::prelude::*;

fn cx() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermite_parity(z in cx()) {
        let plus = hermite_eval(40, z).unwrap();
        let minus = hermite_eval(40, -z).unwrap();
        for (k, (p, m)) in plus.iter().zip(&minus).enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((p - sign * m).norm() <= 1e-12 * p.norm().max(1.0));
        }
    }

    #[test]
    fn mehler_kernel_symmetries(z in cx(), w in cx(), t in 0.1..2.0f64) {
        let (pz, pw) = (ComplexPoint::new(vec![z]), ComplexPoint::new(vec![w]));
        let k = mehler_kernel(t, &pz, &pw).unwrap();
        prop_assert!(rel(k, mehler_kernel(t, &pw, &pz).unwrap()) < 1e-13);
        prop_assert!(rel(k.conj(), mehler_kernel(t, &pz.conj(), &pw.conj()).unwrap()) < 1e-13);
    }

    #[test]
    fn mehler_kernel_composes(x in -2.0..2.0f64, y in -2.0..2.0f64, s in 0.2..1.0f64, t in 0.2..1.0f64) {
        let rule = gauss_hermite_rule(96).unwrap();
        let (px, py) = (ComplexPoint::from_real(&[x]), ComplexPoint::from_real(&[y]));
        let composed = integrate_rn(
            |u| {
                let pu = ComplexPoint::from_real(u);
                mehler_kernel(s, &px, &pu).unwrap() * mehler_kernel(t, &pu, &py).unwrap()
            },
            &rule,
            1,
        )
        .unwrap();
        prop_assert!(rel(composed, mehler_kernel(s + t, &px, &py).unwrap()) < 1e-9);
    }

    #[test]
    fn special_hermite_conjugation(x in -3.0..3.0f64, u in -3.0..3.0f64, a in 0u32..6, b in 0u32..6) {
        // conj Phi_ab(x, u) = (-1)^(a+b) Phi_ba(x, u) on the real domain
        let rule = gauss_hermite_rule(8).unwrap();
        let p = [Complex64::new(x, 0.0), Complex64::new(u, 0.0)];
        let ab = phi_ab(&MultiIndex::single(a), &MultiIndex::single(b), &p, &rule).unwrap();
        let ba = phi_ab(&MultiIndex::single(b), &MultiIndex::single(a), &p, &rule).unwrap();
        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((ab.conj() - sign * ba).norm() < 1e-13);
    }

    #[test]
    fn poly_product_rule(
        coeffs in prop::collection::vec((0u32..4, 0u32..4, -2.0..2.0f64), 1..6),
        z in cx(),
        w in cx(),
        i in 0usize..2,
    ) {
        let p = Poly::new(2, coeffs.iter().map(|&(a, b, c)| (vec![a, b], Complex64::new(c, 0.0))).collect()).unwrap();
        let at = [z, w];
        let lhs = p.mul_var(i).diff(i).eval(&at);
        let rhs = p.eval(&at) + at[i] * p.diff(i).eval(&at);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
        prop_assert!(p.mul_var(i).degree() == p.degree() + 1 || p.terms().is_empty());
    }

    #[test]
    fn log_complex_round_trip(z in cx(), w in cx()) {
        let (lz, lw) = (LogComplex::from_complex(z), LogComplex::from_complex(w));
        prop_assert!(rel(lz.to_complex(), z) < 1e-14);
        prop_assert!(rel((lz * lw).to_complex(), z * w) < 1e-13);
        prop_assert!(rel(LogComplex::sum([&lz, &lw]).to_complex(), z + w) < 1e-12 || (z + w).norm() < 1e-12);
    }

    #[test]
    fn formatted_floats_parse_back(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn config_json_round_trip(
        t in prop::collection::vec(0.05..2.0f64, 1..4),
        m in prop::collection::vec(0u32..5, 1..5),
        seed in any::<u64>(),
        res in 8usize..256,
    ) {
        let mut cfg = SuiteConfig { t, m, seed, ..SuiteConfig::default() };
        cfg.grid.res = res;
        let back = SuiteConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn gauss_hermite_integrates_even_moments_exactly() {
    // int x^{2k} e^{-x^2} dx = Gamma(k + 1/2)
    let rule = gauss_hermite_rule(20).unwrap();
    let mut gamma = std::f64::consts::PI.sqrt();
    for k in 0..20 {
        let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(2 * k)).sum();
        assert!((got - gamma).abs() <= 1e-12 * gamma, "k = {k}: {got} vs {gamma}");
        gamma *= k as f64 + 0.5;
    }
}
