//! Judge reduction candidates: the identity reduction preserves the issue,
//! a loop-deleted one does not.
//!
//! ```sh
//! cargo run --example validate_reduction
//! ```

use warp_lens::harness::TimingSample;
use warp_lens::reduction::{judge_reduction, ReductionTolerances};

fn sample(summary: f64) -> TimingSample {
    TimingSample {
        raw_runs: vec![summary; 3],
        summary,
        repetitions: 3,
        warmups_discarded: 1,
        unstable: false,
    }
}

fn main() -> warp_lens::Result<()> {
    let tolerances = ReductionTolerances::default();
    // Original: 7.77x slower on the buggy runtime than on the oracle.
    let (orig_buggy, orig_oracle) = (sample(7.77), sample(1.0));

    println!("case 1: faithful reduction (times preserved)");
    let v = judge_reduction(
        &orig_buggy,
        &orig_oracle,
        &sample(7.0),
        &sample(0.95),
        &tolerances,
    )?;
    println!(
        "  buggy-time ratio {:.3}, gap ratio {:.3} -> pass = {}",
        v.buggy_time_ratio, v.relative_difference_ratio, v.pass
    );

    println!("case 2: reduction deleted the hot loop (100x faster)");
    let v = judge_reduction(
        &orig_buggy,
        &orig_oracle,
        &sample(0.0777),
        &sample(0.01),
        &tolerances,
    )?;
    println!(
        "  buggy-time ratio {:.4} outside [0.5, 2.0] -> check 1 = {}, pass = {}",
        v.buggy_time_ratio, v.check_buggy_time, v.pass
    );

    println!("case 3: reduction kept the time but lost the buggy/oracle gap");
    let v = judge_reduction(
        &orig_buggy,
        &orig_oracle,
        &sample(7.77),
        &sample(7.0),
        &tolerances,
    )?;
    println!(
        "  gap ratio {:.3} outside [0.5, 2.0] -> check 2 = {}, pass = {}",
        v.relative_difference_ratio, v.check_relative_difference, v.pass
    );
    Ok(())
}
