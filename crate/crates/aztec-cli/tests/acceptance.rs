//! The twelve acceptance criteria at full scale, one line per criterion.

use std::io::Write;

use aztec_cli::verify::{run_suite, summary};
use aztec_dimers::acceptance::{Scale, Status};

#[test]
fn acceptance() {
    // Written to the process stdout directly so the lines survive libtest's output capture.
    let mut out = std::io::stdout();
    writeln!(out).unwrap();
    let outcomes = run_suite(Scale::Full, |o| {
        writeln!(out, "{o}").unwrap();
        out.flush().unwrap();
    });
    write!(out, "{}", summary(&outcomes)).unwrap();
    assert_eq!(outcomes.len(), 12);
    for o in &outcomes {
        assert_ne!(o.status, Status::Skipped, "criterion {} skipped at full scale", o.id);
        assert!(o.acceptable(), "criterion {} failed: {}", o.id, o.detail);
        if o.status == Status::Fail {
            // Only a bound documented as out of reach may fail, and only with its
            // attainable parts passing.
            assert!(o.limitation.is_some() && o.attainable_passed, "criterion {}", o.id);
        }
    }
}
