//! Diff two machine-code listings opcode-by-opcode and print the isolated
//! regions, the way the pipeline compares original vs mutant dumps.
//!
//! ```sh
//! cargo run --example diff_dumps
//! ```

use warp_lens::diff::{isolate_slow_code, EditKind};
use warp_lens::harness::disasm::parse_columnar;

const ORIGINAL: &str = "
0000000000000000 <func2>:
   0:\t55\tpush %rbp
   1:\t44 8b 15 aa 00 00 00\tmov 0xaa(%rip),%r10d
   8:\t44 89 56 04\tmov %r10d,0x4(%rsi)
   c:\tc7 46 08 01 00 01 00\tmovl $0x10001,0x8(%rsi)
  13:\t48 8b 04 24\tmov (%rsp),%rax
  17:\t48 89 44 24 08\tmov %rax,0x8(%rsp)
  1c:\tc3\tret
";

const MUTANT: &str = "
0000000000000000 <func2>:
   0:\t55\tpush %rbp
   1:\tc7 46 04 01 00 01 00\tmovl $0x10001,0x4(%rsi)
   8:\tc7 46 08 01 00 01 00\tmovl $0x10001,0x8(%rsi)
   f:\tc3\tret
";

fn main() -> warp_lens::Result<()> {
    let original = parse_columnar(ORIGINAL)?;
    let mutant = parse_columnar(MUTANT)?;
    let diffs = isolate_slow_code(&original, &mutant)?;

    for d in &diffs {
        println!(
            "function {}: original {} instrs, mutant {} instrs, lcs {}, identified {}",
            d.func_index,
            d.original_count,
            d.mutant_count,
            d.edit.lcs_length,
            d.identified_original_instructions
        );
        for region in &d.regions {
            println!("  differing region:");
            for op in &d.edit.ops[region.context_start..region.context_end] {
                let marker = match op.kind {
                    EditKind::Keep => ' ',
                    EditKind::DeleteFromOriginal => '-',
                    EditKind::InsertFromMutant => '+',
                };
                println!("    {marker} {:#04x}  {}", op.address, op.mnemonic);
            }
        }
        if d.bytes_differ {
            println!("  note: identical opcodes with differing bytes");
        }
    }
    Ok(())
}
