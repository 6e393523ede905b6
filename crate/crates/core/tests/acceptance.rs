//! One PASS/FAIL line per acceptance criterion.
//!
//! `BQP_SEED` overrides the base seed.

use std::process::ExitCode;

use bqp::verify::{run_criterion, SuiteConfig, CRITERIA};

fn main() -> ExitCode {
    let seed = std::env::var("BQP_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let cfg = SuiteConfig {
        seed,
        ..SuiteConfig::default()
    };
    let filter: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for &(id, _) in CRITERIA.iter() {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let r = run_criterion(id, &cfg);
        println!("{}", r.line());
        println!("    {}", r.report);
        if !r.report.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
