//! Acceptance criteria A1-A7. Each test prints one PASS/FAIL line.

use bottleneck_core::verify::{run_suite, Suite};

fn criterion(label: &str, suite: Suite) {
    let report = run_suite(suite, 0).expect("suite runs");
    for c in &report.checks {
        println!("    {c}");
    }
    println!(
        "{label} {}: {} ({:.2} s)",
        suite.as_str(),
        if report.passed() { "PASS" } else { "FAIL" },
        report.seconds
    );
    assert!(report.passed(), "{label} failed:\n{report}");
}

#[test]
fn a1_lower_entropy_matches_mrs_gerber() {
    criterion("A1", Suite::Mgl);
}

#[test]
fn a2_upper_entropy_matches_mr_gerber() {
    criterion("A2", Suite::Mrgl);
}

#[test]
fn a3_arimoto_beta_two_matches_closed_forms() {
    criterion("A3", Suite::Arimoto);
}

#[test]
fn a4_oracle_cross_check() {
    criterion("A4", Suite::OracleCross);
}

#[test]
fn a5_matched_channel_invariance() {
    criterion("A5", Suite::Matched);
}

#[test]
fn a6_chi_squared_endpoints() {
    criterion("A6", Suite::Chi2);
}

#[test]
fn a7_randomized_properties() {
    criterion("A7", Suite::Properties);
}
