//! Property suites for the crate's structural invariants.

mod common;

use proptest::prelude::*;
use warp_lens::diff::{lcs_diff, EditKind, OpcodeSequence};
use warp_lens::harness::disasm::{
    parse_normalized, DisassembledFunction, Disassembly, MachineInstr,
};
use warp_lens::harness::TimingSample;
use warp_lens::score::{func_sim_score, perf_diff_score, rank_mutants, score_mutant, ScoreWeights};

fn mnemonic_strategy() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["mov", "add", "sub", "mul", "jmp", "ret"]).prop_map(|s| s.to_string())
}

fn instr_strategy() -> impl Strategy<Value = (Vec<u8>, String, String)> {
    (
        prop::collection::vec(any::<u8>(), 0..6),
        mnemonic_strategy(),
        prop::sample::select(vec!["", "%rax", "$0x1,(%rsp)", "8(%rip)"])
            .prop_map(|s| s.to_string()),
    )
}

fn function_strategy() -> impl Strategy<Value = DisassembledFunction> {
    (
        0u32..16,
        prop::collection::btree_set(0u64..10_000, 0..12),
        prop::collection::vec(instr_strategy(), 0..12),
    )
        .prop_map(|(func_index, addrs, instrs)| {
            let addrs: Vec<u64> = addrs.into_iter().collect();
            let instructions: Vec<MachineInstr> = addrs
                .iter()
                .zip(instrs)
                .map(|(addr, (bytes, mnemonic, operands))| MachineInstr {
                    address: *addr,
                    bytes,
                    mnemonic,
                    operands,
                })
                .collect();
            let start_address = instructions.first().map(|i| i.address).unwrap_or(0);
            DisassembledFunction {
                func_index,
                symbol: format!("func{func_index}"),
                start_address,
                instructions,
            }
        })
}

proptest! {
    /// Serializing a disassembly to the normalized line format and parsing
    /// it back is the identity (the adapter normalization invariant).
    #[test]
    fn disassembly_serialization_roundtrip(
        funcs in prop::collection::vec(function_strategy(), 0..5)
    ) {
        let dis = Disassembly { functions: funcs };
        let text = dis.serialize_normalized();
        let re = parse_normalized(&text).unwrap();
        prop_assert_eq!(dis, re);
    }

    /// The edit script replays both inputs, its keep count equals the LCS
    /// length, and the LCS length is symmetric with delete/insert roles
    /// swapped.
    #[test]
    fn lcs_script_replays_and_is_symmetric(
        a in prop::collection::vec(mnemonic_strategy(), 0..40),
        b in prop::collection::vec(mnemonic_strategy(), 0..40),
    ) {
        let sa = OpcodeSequence {
            func_index: 0,
            mnemonics: a.clone(),
            addresses: (0..a.len() as u64).collect(),
        };
        let sb = OpcodeSequence {
            func_index: 0,
            mnemonics: b.clone(),
            addresses: (0..b.len() as u64).collect(),
        };
        let fwd = lcs_diff(&sa, &sb);
        let (mut ra, mut rb) = (Vec::new(), Vec::new());
        let mut keeps = 0;
        for op in &fwd.ops {
            match op.kind {
                EditKind::Keep => {
                    ra.push(op.mnemonic.clone());
                    rb.push(op.mnemonic.clone());
                    keeps += 1;
                }
                EditKind::DeleteFromOriginal => ra.push(op.mnemonic.clone()),
                EditKind::InsertFromMutant => rb.push(op.mnemonic.clone()),
            }
        }
        prop_assert_eq!(ra, a);
        prop_assert_eq!(rb, b);
        prop_assert_eq!(keeps, fwd.lcs_length);

        let rev = lcs_diff(&sb, &sa);
        prop_assert_eq!(rev.lcs_length, fwd.lcs_length);
        prop_assert_eq!(rev.deletes(), fwd.inserts());
        prop_assert_eq!(rev.inserts(), fwd.deletes());
    }

    /// Component scores stay inside their bounds over six decades of ratio.
    #[test]
    fn score_bounds(log_r in -3f64..3f64) {
        let r = 10f64.powf(log_r);
        let pd = perf_diff_score(r).unwrap();
        let fs = func_sim_score(r).unwrap();
        prop_assert!((0.0..=1.0).contains(&pd));
        prop_assert!((0.0..=1.0).contains(&fs));
        // Below ratio 1 the two branches are exact complements.
        if r <= 1.0 {
            prop_assert!((pd + fs - 1.0).abs() < 1e-12);
        }
    }

    /// Scaling every timing by one positive constant leaves the ranking
    /// order unchanged (ranking invariance; order compared, not values).
    /// Timings come from a 0.1-step grid: distinct totals are then far
    /// apart relative to rounding noise, and exact ties break by ordinal,
    /// which is scale-independent.
    #[test]
    fn ranking_invariant_under_common_time_scale(
        timings in prop::collection::vec((1u32..=1000, 1u32..=1000), 2..12)
            .prop_map(|v| v.into_iter()
                .map(|(b, o)| (b as f64 / 10.0, o as f64 / 10.0))
                .collect::<Vec<(f64, f64)>>()),
        orig in (1u32..=1000, 1u32..=1000).prop_map(|(b, o)| (b as f64 / 10.0, o as f64 / 10.0)),
        scale in 0.01f64..1000.0,
    ) {
        let weights = ScoreWeights::default();
        let sample = |v: f64| TimingSample {
            raw_runs: vec![v; 3],
            summary: v,
            repetitions: 3,
            warmups_discarded: 0,
            unstable: false,
        };
        let rank_order = |scale: f64| -> Vec<usize> {
            let ob = sample(orig.0 * scale);
            let oo = sample(orig.1 * scale);
            let scores: Vec<_> = timings
                .iter()
                .enumerate()
                .map(|(i, (b, o))| {
                    score_mutant(
                        i,
                        (&ob, &oo),
                        (&sample(b * scale), &sample(o * scale)),
                        &weights,
                    )
                    .unwrap()
                })
                .collect();
            rank_mutants(&scores).iter().map(|s| s.ordinal).collect()
        };
        prop_assert_eq!(rank_order(1.0), rank_order(scale));
    }
}

/// Straight-line bodies (no control or other records) simulate cleanly with
/// the per-record signatures: no underflow, no type mismatch, and the final
/// stack matches the function's declared results.
#[test]
fn straight_line_signature_soundness() {
    use warp_lens::model::{parse_module, simulate_stack_effect, InstrCategory};
    let mut straight_line_functions = 0;
    for (name, bytes) in common::corpus_modules() {
        let model = parse_module(&bytes).unwrap();
        for f in &model.functions {
            if !f.mutable
                || f.instructions
                    .iter()
                    .any(|r| matches!(r.category, InstrCategory::Control | InstrCategory::Other))
            {
                continue;
            }
            straight_line_functions += 1;
            let effect = simulate_stack_effect(&f.instructions)
                .unwrap_or_else(|| panic!("{name} func {} underflowed", f.func_index));
            let sig = model.func_sig(f.func_index).unwrap();
            assert_eq!(
                effect, sig.results,
                "{name} func {}: stack effect does not match declared results",
                f.func_index
            );
        }
    }
    assert!(
        straight_line_functions >= 5,
        "corpus lost its straight-line coverage"
    );
}

/// parse -> encode -> parse is the identity under structural equality over
/// the whole corpus, and the canonical encoding is a fixed point.
#[test]
fn corpus_roundtrip_structural_equality() {
    use warp_lens::model::{encode_module, parse_module, validate_module};
    for (name, bytes) in common::corpus_modules() {
        let m1 = parse_module(&bytes).unwrap();
        let re = encode_module(&m1).unwrap();
        assert!(validate_module(&re).ok, "{name}: re-encoding invalid");
        let m2 = parse_module(&re).unwrap();
        assert!(m1.structural_eq(&m2), "{name}: round trip changed the model");
        assert_eq!(re, encode_module(&m2).unwrap(), "{name}: encoding not a fixed point");
    }
}
