//! The shared verification suite must pass end to end.

#[test]
fn standard_suite_passes_everywhere() {
    let results = autodiff::check::standard_suite().unwrap();
    assert!(results.len() >= 40, "suite covers all primitives, got {}", results.len());
    for r in &results {
        assert!(r.passed(), "{r}");
    }
}
