use std::process::ExitCode;

use hazgate_core::acceptance::{criterion_ids, run_criterion};
use hazgate_core::data::DataSet;

fn main() -> ExitCode {
    let d = DataSet::canonical();
    let mut failed = Vec::new();
    for id in criterion_ids() {
        let r = run_criterion(id, &d).expect("known criterion");
        println!("{r}");
        if !r.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
