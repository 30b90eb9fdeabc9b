//! Run one module under two cost models and compare pseudo-times: the
//! uniform oracle vs a buggy model where division costs 50x.
//!
//! ```sh
//! cargo run --example mock_interpreter
//! ```

use warp_lens::mock::{mock_dump, render_observables, run_module, CostModel};
use warp_lens::model::parse_module;

fn main() -> warp_lens::Result<()> {
    let wat = r#"(module (func (export "_start") (result i64)
        (local $i i64) (local $acc i64)
        i64.const 10000
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
    let model = parse_module(&wat::parse_str(wat).expect("fixture wat"))?;

    let oracle = CostModel::uniform();
    let buggy = CostModel::parse("default 1\nmultiply div 50\nexpand div 5 div_expand\n")?;

    let oracle_run = run_module(&model, &oracle, "_start")?;
    let buggy_run = run_module(&model, &buggy, "_start")?;

    println!("observables (identical under both models):");
    print!("{}", render_observables(&oracle_run));
    println!();
    println!("oracle pseudo-time: {:>9}", oracle_run.pseudo_time);
    println!("buggy  pseudo-time: {:>9}", buggy_run.pseudo_time);
    println!(
        "slowdown: {:.2}x over {} executed instructions",
        buggy_run.pseudo_time as f64 / oracle_run.pseudo_time as f64,
        buggy_run.steps
    );

    let listing = mock_dump(&model, &buggy)?;
    let f = &listing.functions[0];
    println!(
        "\nbuggy dump has {} pseudo-instructions (division expands to 5):",
        f.instructions.len()
    );
    for i in f.instructions.iter().skip(7).take(8) {
        println!("  {:#04x}  {} {}", i.address, i.mnemonic, i.operands);
    }
    Ok(())
}
