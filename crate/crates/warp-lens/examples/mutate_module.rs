//! Generate the full mutant set of a small module and print the manifest.
//!
//! ```sh
//! cargo run --example mutate_module
//! ```

use warp_lens::model::{parse_module, validate_module};
use warp_lens::mutate::{generate_all_mutants, ManifestRecord, MutationConfig};

fn main() -> warp_lens::Result<()> {
    let wat = r#"(module
        (global $g (mut i32) (i32.const -65537))
        (memory 1)
        (func (export "f") (param i32) (result i32)
          local.get 0
          i32.const -65537
          i32.add
          i32.const 8 i32.load
          i32.sub
          global.get $g
          i32.mul))"#;
    let bytes = wat::parse_str(wat).expect("fixture wat");
    let model = parse_module(&bytes)?;
    let set = generate_all_mutants(&model, &MutationConfig::default())?;

    println!(
        "{} sites -> {} mutants ({} duplicates dropped)\n",
        set.site_count,
        set.mutants.len(),
        set.duplicates
    );
    for m in &set.mutants {
        let record = ManifestRecord::of(m);
        println!(
            "{:04} {}  func {} offset {:2}:  {}  =>  {}",
            record.ordinal,
            record.rule,
            record.func_index,
            record.offset,
            record.original,
            record.mutated
        );
        assert!(validate_module(&m.bytes).ok);
    }
    println!("\nevery mutant passes the independent validator");
    Ok(())
}
