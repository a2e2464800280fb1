//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! `ACCEPTANCE_ONLY=<group or id>` restricts the run to one criterion.

use std::process::ExitCode;
use std::time::Instant;

use disi::exec::Exec;
use disi::verify;

fn main() -> ExitCode {
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let groups = verify::groups();
    let ids: Vec<u32> = (1..=groups.len() as u32)
        .filter(|&id| only.as_deref().is_none_or(|o| o == groups[id as usize - 1] || o == id.to_string()))
        .collect();

    let mut failed = 0;
    println!("\nrunning {} acceptance criteria", ids.len());
    for id in ids {
        let start = Instant::now();
        match verify::run_one(Exec::default(), id) {
            Ok(c) => {
                let status = if c.pass() { "PASS" } else { "FAIL" };
                println!("{status} [{:>2}] {} ({:.1}s)", c.id, c.title, start.elapsed().as_secs_f64());
                for k in &c.checks {
                    let mark = if k.pass { "ok" } else { "FAILED" };
                    let detail = k.detail.as_deref().map(|d| format!("; {d}")).unwrap_or_default();
                    println!("       {mark:<6} {} = {:.6e} (want {}){detail}", k.check_name, k.measured, k.tolerance);
                }
                if !c.pass() {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("FAIL [{id:>2}] {}: error: {e}", groups[id as usize - 1]);
                failed += 1;
            }
        }
    }
    println!("\nacceptance result: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
