//! The whole pipeline against the built-in mock runtimes: a loop with a
//! dead division runs 4x slower on the "buggy" runtime (division x50); the
//! pipeline finds the division-replacing mutant and isolates the expanded
//! division block in the dump.
//!
//! Requires the CLI binary (the mock runtime is driven as a subprocess):
//!
//! ```sh
//! cargo build --bin warp-lens && cargo run --example end_to_end
//! ```

use std::path::PathBuf;
use warp_lens::pipeline::{load_config, run_pipeline};

fn warp_lens_bin() -> PathBuf {
    // target/debug/examples/end_to_end -> target/debug/warp-lens
    let exe = std::env::current_exe().expect("current_exe");
    let bin = exe
        .parent()
        .and_then(|p| p.parent())
        .map(|p| p.join("warp-lens"))
        .filter(|p| p.exists());
    bin.unwrap_or_else(|| {
        eprintln!("warp-lens binary not found next to the example; build it first:");
        eprintln!("  cargo build --bin warp-lens");
        std::process::exit(1);
    })
}

fn main() -> warp_lens::Result<()> {
    let bin = warp_lens_bin();
    let dir = std::env::temp_dir().join(format!("warp-lens-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let module = r#"(module (func (export "_start") (result i64)
        (local $i i64) (local $acc i64)
        i64.const 20000
        local.set $i
        block $exit
          loop $l
            local.get $i
            i64.eqz
            br_if $exit
            i64.const 7
            i64.const 3
            i64.div_u
            drop
            local.get $acc
            i64.const 3
            i64.add
            local.set $acc
            local.get $i
            i64.const 1
            i64.sub
            local.set $i
            br $l
          end
        end
        local.get $acc))"#;
    std::fs::write(dir.join("input.wat"), module)?;
    std::fs::write(
        dir.join("buggy.cost"),
        "default 1\nbudget 2000000\nmultiply div 50\nexpand div 5 div_expand\n",
    )?;
    std::fs::write(dir.join("uniform.cost"), "default 1\nbudget 2000000\n")?;

    let bin = bin.display();
    let buggy_cost = dir.join("buggy.cost");
    let uniform_cost = dir.join("uniform.cost");
    let (buggy_cost, uniform_cost) = (buggy_cost.display(), uniform_cost.display());
    let config = format!(
        "input = input.wat\nout = out\nreps = 3\nwarmups = 1\ntop-k = 3\n\n\
         [runtime.buggy]\n\
         name = mock-buggy\n\
         invoke = {bin} mock-run --cost-model {buggy_cost} {{module}}\n\
         dump = {bin} mock-run --cost-model {buggy_cost} --dump {{module}}\n\n\
         [runtime.oracle]\n\
         name = mock-oracle\n\
         invoke = {bin} mock-run --cost-model {uniform_cost} {{module}}\n"
    );
    let cfg = load_config(&config, &[], &dir)?;

    println!("running the pipeline (mock runtimes, ~100 mutants)...");
    let outcome = run_pipeline(&cfg)?;
    let s = &outcome.stats;
    println!(
        "generated {}, qualified {}, disqualified {}",
        s.mutants_generated, s.qualified, s.disqualified
    );
    println!();
    for c in &outcome.bundle.candidates {
        println!(
            "rank {}: mutant {:04} ({})  Ratio(B)={:.2} Ratio(O)={:.2} total={:.6}",
            c.rank,
            c.ordinal,
            c.rule,
            c.score.perf_diff_ratio,
            c.score.func_sim_ratio,
            c.score.total
        );
    }
    println!();
    println!(
        "full report: {}",
        outcome.out_dir.join("report.txt").display()
    );
    Ok(())
}
