use std::process::ExitCode;

use svie_core::selftest::{self, NAMES};

fn main() -> ExitCode {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut failed = Vec::new();
    for id in 1..=NAMES.len() {
        let outcome = selftest::run(id, workers);
        println!("{}", outcome.render());
        if !outcome.pass {
            failed.push(outcome.name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} passed", NAMES.len(), NAMES.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
