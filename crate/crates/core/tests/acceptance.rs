//! One line per acceptance criterion.

use std::process::ExitCode;

use anonq::verify::Suite;

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for suite in Suite::ALL {
        let report = suite.run();
        println!("{}", report.summary_line());
        if !report.passed {
            for f in report.failures() {
                println!("    {}: {}", f.name, f.detail);
            }
            failed.push(suite.name());
        }
    }
    if failed.is_empty() {
        println!(
            "acceptance: {} of {} criteria pass",
            Suite::ALL.len(),
            Suite::ALL.len()
        );
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
