//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;

use covsum::selftest::Selftest;

fn main() -> ExitCode {
    let suite = Selftest::new(1, None).expect("bundled corpus loads");
    let mut failed = 0;
    for n in 1..=9 {
        match suite.criterion(n) {
            Ok(c) => {
                if !c.passed {
                    failed += 1;
                }
                println!("{}", c.line());
            }
            Err(e) => {
                failed += 1;
                println!("criterion {n}: FAIL - error: {e}");
            }
        }
    }
    println!("{}/9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
