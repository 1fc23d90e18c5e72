//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned
//! next to each check.

#[path = "../common/mod.rs"]
mod common;

mod api;
mod determinism;
mod evaluation;
mod fairness;
mod payoff;
mod pipeline;
mod scale;
mod visibility;

use std::future::Future;
use std::pin::Pin;
use std::process::ExitCode;
use std::time::Instant;

/// Detail for the PASS line, or the reason for FAIL.
pub type Verdict = Result<String, String>;

#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

type CheckFn = fn() -> Pin<Box<dyn Future<Output = Verdict> + Send>>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("payoff table reproduction", || Box::pin(payoff::table_cells())),
    ("payoff zero-sum per issue", || Box::pin(payoff::zero_sum())),
    ("visibility lattice and leak audit", || Box::pin(visibility::check())),
    ("round-robin fairness", || Box::pin(fairness::check())),
    ("default metric suite and clamping", || Box::pin(evaluation::check())),
    ("api conformance", || Box::pin(api::check())),
    ("scalability", || Box::pin(scale::check())),
    ("determinism", || Box::pin(determinism::check())),
    ("simulate and report pipeline", || Box::pin(pipeline::check())),
];

fn main() -> ExitCode {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().expect("runtime");
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, check) in CHECKS {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let started = Instant::now();
        // A panicking check is a failure, not an abort of the whole suite.
        let verdict = runtime
            .block_on(async { tokio::spawn(check()).await })
            .unwrap_or_else(|e| Err(format!("check panicked: {e}")));
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
