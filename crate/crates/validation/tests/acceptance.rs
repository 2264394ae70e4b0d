use std::process::ExitCode;
use std::time::Instant;

use vvbath_validation::criteria;

fn main() -> ExitCode {
    let mut failed = 0;
    for check in criteria::all() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict}  {} ({:.1} s): {}",
            o.id,
            o.name,
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
