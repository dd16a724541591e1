//! Acceptance gate: every registered check at its default tolerance, one line per criterion.
//!
//! The criterion lines go straight to the stdout handle so they survive libtest's capture.

use std::io::Write;

use bergman_core::suite::{check_names, run_check, run_suite, CheckResult, Status, SuiteConfig};

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"))
}

fn report(index: usize, r: &CheckResult) {
    let verdict = match r.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skipped => "SKIP",
    };
    let line = format!(
        "criterion {:>2} {:<26} {} metric={} tol={}{}",
        index,
        r.name,
        verdict,
        fmt(r.metric),
        fmt(r.tol),
        r.error.as_deref().map(|e| format!(" error={e}")).unwrap_or_default()
    );
    emit(&line);
}

fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
}

fn criterion(index: usize) {
    let name = check_names()[index - 1];
    let r = run_check(name, &SuiteConfig::default()).expect("check runs");
    report(index, &r);
    for m in &r.measurements {
        let mark = if m.pass { "ok" } else { "FAIL" };
        println!("    {:<4} {} = {:.3e} ({:?} {:.1e})", mark, m.label, m.value, m.comparison, m.tol);
    }
    assert_eq!(r.status, Status::Pass, "criterion {index} ({name}) failed");
}

#[test]
fn criterion_01_hermite_orthonormality() {
    criterion(1);
}

#[test]
fn criterion_02_mehler_spectral_agreement() {
    criterion(2);
}

#[test]
fn criterion_03_bergman_isometry() {
    criterion(3);
}

#[test]
fn criterion_04_weighted_orthogonality() {
    criterion(4);
}

#[test]
fn criterion_05_sobolev_weight_identity() {
    criterion(5);
}

#[test]
fn criterion_06_reproducing_kernel() {
    criterion(6);
}

#[test]
fn criterion_07_schwartz_envelopes() {
    criterion(7);
}

#[test]
fn criterion_08_intertwining_sign() {
    criterion(8);
}

#[test]
fn criterion_09_special_isometry() {
    criterion(9);
}

#[test]
fn criterion_10_laguerre_projections() {
    criterion(10);
}

#[test]
fn criterion_11_tempered_envelope() {
    criterion(11);
}

#[test]
fn criterion_12_stft_bridge() {
    criterion(12);
}

#[test]
fn criterion_13_compact_support_growth() {
    criterion(13);
}

#[test]
fn criterion_14_determinism() {
    // The in-suite check repeats a subset; here the whole report is compared.
    criterion(14);
    let cfg = SuiteConfig::default();
    let a = run_suite(&cfg).expect("first run").to_json_without_timing().unwrap();
    let b = run_suite(&cfg).expect("second run").to_json_without_timing().unwrap();
    let same = a == b;
    emit(&format!(
        "criterion 14 {:<26} {} bytes={}",
        "full-report-identical",
        if same { "PASS" } else { "FAIL" },
        a.len()
    ));
    assert!(same, "reports differ between identical runs");
}
