use levy_rg::acceptance::{run, DEFAULT_SEED};
use std::io::Write;

// the raw stdout handle is not captured by the test harness
#[test]
fn acceptance_criteria() {
    let mut out = std::io::stdout();
    let mut failed = Vec::new();
    for id in 1..=12 {
        let r = run(id, DEFAULT_SEED);
        writeln!(out, "{}", r.line()).unwrap();
        for m in r.measurements.iter().filter(|m| !m.ok) {
            writeln!(out, "       {} = {:.6e} ({})", m.label, m.value, m.bound).unwrap();
        }
        out.flush().unwrap();
        if !r.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
