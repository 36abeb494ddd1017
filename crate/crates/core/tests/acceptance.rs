//! Runs the ten acceptance criteria and prints one PASS/FAIL line each.

use std::process::ExitCode;

use dirlab_core::acceptance::{run_all, run_criterion, AcceptanceOptions, Fault};

fn main() -> ExitCode {
    let opts = AcceptanceOptions::default();
    let results = run_all(&opts);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();

    // the suite must notice a wrong Douglas prefactor
    let faulty = run_criterion(
        1,
        &AcceptanceOptions {
            fault: Some(Fault::DouglasPrefactor),
            ..opts
        },
    );
    println!("fault injection (douglas-prefactor) detected: {}", !faulty.passed);

    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 && !faulty.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
