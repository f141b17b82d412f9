//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; any failure fails the build either way.

use std::time::Instant;

use consensus_sim::algorithms::Rule;
use consensus_sim::suites::{self, SuiteOutcome};
use consensus_sim::value::parse_rational;

fn report(criterion: &str, outcome: &SuiteOutcome) {
    println!(
        "acceptance {criterion:<28} {} ({} cases){}",
        if outcome.pass { "pass" } else { "FAIL" },
        outcome.cases,
        outcome
            .counterexample
            .as_deref()
            .map(|cx| format!(" counterexample: {cx}"))
            .unwrap_or_default()
    );
    assert!(outcome.pass, "{criterion}: {:?}", outcome.counterexample);
}

#[test]
fn criterion_01_rooted_products_nonsplit() {
    let start = Instant::now();
    let outcome = suites::graph_products(16, 1000, 0xA1);
    report("01-rooted-products-nonsplit", &outcome);
    let elapsed = start.elapsed();
    println!("acceptance 01 runtime: {elapsed:.2?}");
    assert!(elapsed.as_secs() < 60, "criterion 1 exceeded one minute");
}

#[test]
fn criterion_02_safety_coefficients() {
    report("02-safety-coefficients", &suites::safety(10_000, 16, 0xA2));
}

#[test]
fn criterion_03_nonsplit_contraction() {
    report(
        "03-nonsplit-contraction",
        &suites::contraction(100, 12, 50, 0xA3),
    );
}

#[test]
fn criterion_04_two_process_exactness() {
    report(
        "04-two-process-exactness",
        &suites::third_point_exactness(100, 30, 0xA4),
    );
}

fn standard_epsilons() -> Vec<num_rational::BigRational> {
    ["1e-1", "1e-2", "1e-3"]
        .iter()
        .map(|e| parse_rational(e).unwrap())
        .collect()
}

#[test]
fn criterion_05_amortized_midpoint_bound() {
    report(
        "05-amortized-midpoint-bound",
        &suites::amortized_bounds(Rule::Midpoint, &[3, 5, 8, 16], &standard_epsilons(), 50, 0xA5),
    );
}

#[test]
fn criterion_06_amortized_mean_value_bound() {
    report(
        "06-amortized-mean-value-bound",
        &suites::amortized_bounds(Rule::MeanValue, &[3, 5, 8, 16], &standard_epsilons(), 50, 0xA6),
    );
}

#[test]
fn criterion_07_k_nonsplit_resiliency() {
    report(
        "07-k-nonsplit-resiliency",
        &suites::resiliency(
            &[(7, 4), (9, 3), (13, 5)],
            10,
            &parse_rational("1e-2").unwrap(),
            0xA7,
        ),
    );
}

#[test]
fn criterion_08_09_quantized_bound_and_recurrence() {
    // the recurrence check (criterion 9) runs inside the same suite,
    // on every run of criterion 8
    report(
        "08-09-quantized",
        &suites::quantized(&[4, 10, 64], &[3, 4, 8], 100, 0xA8),
    );
}

#[test]
fn criterion_10_suboptimal_precision() {
    report(
        "10-suboptimal-precision",
        &suites::suboptimal_precision(64, 8, &parse_rational("3/64").unwrap(), 100, 0xAA),
    );
}

#[test]
fn criterion_11_negative_control() {
    report(
        "11-negative-control",
        &suites::negative_control(&[2, 4, 7, 16], 30),
    );
}

#[test]
fn criterion_12_adversary_gap() {
    // a pool-searched schedule keeps plain equal-neighbor nearly
    // stalled for 20+ consecutive rounds while the amortized midpoint
    // halves the spread every macro-round on the identical schedule
    let gap = suites::adversary_gap(10, 60, 128, 20, 5);
    println!(
        "acceptance 12 detail: slow streak {} rounds, worst midpoint macro ratio {}",
        gap.slow_streak,
        gap.midpoint_worst_macro_ratio
            .as_ref()
            .map(|r| consensus_sim::Scalar::render(r))
            .unwrap_or_default()
    );
    report("12-adversary-gap", &gap.outcome);
}
