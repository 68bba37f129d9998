//! Acceptance gate: runs the full validation suite, prints one line per
//! criterion, and asserts every criterion passes at its stated tolerance.
//! Determinism is checked by running the suite twice and comparing the
//! serialized reports byte for byte.

use kelsim::validate::{run_suite_with_timings, SuiteReport};

fn print_summary(report: &SuiteReport, timings: &[(u32, f64)]) {
    for c in &report.criteria {
        let secs = timings
            .iter()
            .find(|&&(id, _)| id == c.id)
            .map(|&(_, s)| format!(" [{s:.1}s]"))
            .unwrap_or_default();
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("criterion {:2} {:32} {}{}", c.id, c.name, status, secs);
        if !c.passed {
            for (k, v) in &c.details {
                println!("    {k} = {v}");
            }
        }
    }
}

#[test]
fn acceptance_criteria() {
    let (report, timings) = run_suite_with_timings();
    print_summary(&report, &timings);

    // stated runtime limits
    let secs = |id: u32| {
        timings
            .iter()
            .find(|&&(i, _)| i == id)
            .map(|&(_, s)| s)
            .unwrap_or(0.0)
    };
    assert!(
        secs(1) <= 60.0,
        "criterion 1 exceeded its 60 s budget: {:.1}s",
        secs(1)
    );
    assert!(
        secs(6) <= 120.0,
        "criterion 6 exceeded its 120 s budget: {:.1}s",
        secs(6)
    );

    for c in &report.criteria {
        assert!(
            c.passed,
            "criterion {} ({}) failed: {:?}",
            c.id, c.name, c.details
        );
    }

    // criterion 11: repeated runs produce byte-identical reports
    let (second, _) = run_suite_with_timings();
    let bytes1 = report.to_json_pretty();
    let bytes2 = second.to_json_pretty();
    assert_eq!(
        bytes1, bytes2,
        "criterion 11 (determinism) failed: reports differ between runs"
    );
    println!("criterion 11 determinism re-run           PASS (byte-identical)");
}
