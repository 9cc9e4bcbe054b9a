//! Shared plumbing for the acceptance target: every criterion yields one
//! [`Outcome`], printed as a single `criterion N: PASS|FAIL ...` line.

use std::time::Instant;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

pub type Criterion = (u32, fn() -> Outcome);

/// Runs the criteria in order and returns how many passed.
pub fn run_all(criteria: &[Criterion]) -> usize {
    let mut passed = 0;
    for &(n, f) in criteria {
        let start = Instant::now();
        let outcome = match std::panic::catch_unwind(f) {
            Ok(o) => o,
            Err(_) => Outcome::new(false, "panicked"),
        };
        passed += usize::from(outcome.pass);
        println!(
            "criterion {n}: {} {} [{:.2}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    passed
}
