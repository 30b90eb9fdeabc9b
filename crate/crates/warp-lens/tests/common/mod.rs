#![allow(dead_code)] // shared across test targets; each uses a subset

//! Shared fixtures: a hand-written module corpus spanning the mutation rule
//! domain, and config plumbing for driving the built binary as a mock
//! runtime.

use std::path::{Path, PathBuf};

/// The corpus: (name, wat source). Every module validates; together they
/// cover constants, locals, globals, fused and computed memory access,
/// floats, conversions, loops, dense control flow, calls, and stores.
pub const CORPUS: &[(&str, &str)] = &[
    (
        "arith_straight",
        r#"(module (func (export "f") (result i32)
            i32.const 5 i32.const 3 i32.add
            i32.const 7 i32.mul
            i32.const 2 i32.sub))"#,
    ),
    (
        "locals_params",
        r#"(module (func (export "f") (param i32 i64) (result i64)
            (local i64)
            local.get 0
            i64.extend_i32_s
            local.get 1
            i64.add
            local.tee 2
            local.get 2
            i64.mul))"#,
    ),
    (
        "globals",
        r#"(module
            (global $a (mut i32) (i32.const -65537))
            (global $b i32 (i32.const 9))
            (func (export "f") (result i32)
              global.get $a
              global.get $b
              i32.add
              global.get $a
              i32.sub)
            (func (export "set")
              i32.const 65537
              global.set $a))"#,
    ),
    (
        "memory_fused",
        r#"(module (memory 1)
            (func (export "f") (result i64)
              i32.const 8 i64.load
              i32.const 16 i64.load offset=8
              i64.add)
            (func (export "g")
              i32.const 0 i32.const 77 i32.store
              i32.const 4 i32.const -1 i32.store8))"#,
    ),
    (
        "memory_computed",
        r#"(module (memory 1)
            (func (export "f") (param i32) (result i32)
              local.get 0
              i32.load
              local.get 0
              i32.const 4
              i32.add
              i32.load16_u
              i32.add))"#,
    ),
    (
        "floats",
        r#"(module (func (export "f") (param f64 f32) (result f64)
            local.get 0
            f64.const 1
            f64.mul
            f64.sqrt
            local.get 1
            f64.promote_f32
            f64.min
            f64.const -0.5
            f64.max))"#,
    ),
    (
        "conversions",
        r#"(module (func (export "f") (param i32) (result f32)
            local.get 0
            f64.convert_i32_s
            f64.const 2.5
            f64.add
            f32.demote_f64
            local.get 0
            f32.convert_i32_u
            f32.add
            f32.abs))"#,
    ),
    (
        "loop_div",
        r#"(module (func (export "_start") (result i64)
            (local $i i64) (local $acc i64)
            i64.const 200
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
            local.get $acc))"#,
    ),
    (
        "control_heavy",
        r#"(module
            (func $leaf (param i32) (result i32)
              (block $b2
                (block $b1
                  (block $b0
                    local.get 0
                    br_table $b0 $b1 $b2)
                  i32.const 10
                  return)
                i32.const 20
                return)
              i32.const 30)
            (func (export "f") (param i32) (result i32)
              (if (result i32) (i32.gt_s (local.get 0) (i32.const 0))
                (then local.get 0 call $leaf)
                (else i32.const 2 call $leaf))
              i32.const 1
              i32.add))"#,
    ),
    (
        "multi_func_table",
        r#"(module
            (type $t (func (result i32)))
            (table 2 funcref)
            (elem (i32.const 0) $a $b)
            (func $a (result i32) i32.const 11 i32.const 1 i32.or)
            (func $b (result i32) i32.const 20 i32.const 2 i32.add)
            (func (export "f") (param i32) (result i32)
              local.get 0
              call_indirect (type $t)
              i32.const 100
              i32.add))"#,
    ),
    (
        "store_heavy",
        r#"(module (memory 1)
            (global $g (mut i64) (i64.const 0))
            (func (export "f")
              i32.const 8 i32.const 7 i32.store
              i32.const 16 i64.const -65537 i64.store
              i64.const 42
              global.set $g
              i32.const 24 f64.const 1 f64.store))"#,
    ),
    (
        "comparisons",
        r#"(module (func (export "f") (param i64 i64) (result i32)
            local.get 0
            local.get 1
            i64.eq
            local.get 0
            local.get 1
            i64.lt_s
            i32.add
            local.get 0
            i64.eqz
            i32.add))"#,
    ),
];

pub fn corpus_modules() -> Vec<(&'static str, Vec<u8>)> {
    CORPUS
        .iter()
        .map(|(name, src)| (*name, wat::parse_str(src).expect(name)))
        .collect()
}

pub fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_warp-lens")
}

/// Standard mock cost models for the synthetic acceptance scenario:
/// buggy = division x50 with a 5-instruction dump expansion, oracle =
/// uniform. Both carry a small deterministic step budget.
pub const BUGGY_COST: &str = "\
default 1
budget 2000000
multiply div 50
expand div 5 div_expand
";

pub const UNIFORM_COST: &str = "\
default 1
budget 2000000
";

pub struct MockSetup {
    pub dir: tempfile::TempDir,
}

impl MockSetup {
    pub fn new() -> MockSetup {
        MockSetup {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> PathBuf {
        let p = self.path().join(name);
        std::fs::write(&p, contents).expect("write fixture");
        p
    }

    /// A pipeline config file wired to the built binary's mock runtime.
    /// Cost-model paths are absolute so the harness can spawn from any CWD.
    pub fn write_pipeline_config(&self, input: &str, extra: &str) -> PathBuf {
        let buggy_cost = self.write("buggy.cost", BUGGY_COST);
        let uniform_cost = self.write("uniform.cost", UNIFORM_COST);
        let (buggy_cost, uniform_cost) = (buggy_cost.display(), uniform_cost.display());
        let bin = bin_path();
        let config = format!(
            "input = {input}\nout = out\nreps = 3\nwarmups = 1\ntop-k = 3\n{extra}\n\
             [runtime.buggy]\n\
             name = mock-buggy\n\
             invoke = {bin} mock-run --cost-model {buggy_cost} {{module}}\n\
             dump = {bin} mock-run --cost-model {buggy_cost} --dump {{module}}\n\n\
             [runtime.oracle]\n\
             name = mock-oracle\n\
             invoke = {bin} mock-run --cost-model {uniform_cost} {{module}}\n\
             dump = {bin} mock-run --cost-model {uniform_cost} --dump {{module}}\n"
        );
        self.write("pipeline.conf", config)
    }
}

/// Levenshtein distance over instruction text sequences.
pub fn edit_distance(a: &[String], b: &[String]) -> usize {
    let m = b.len();
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for j in 0..m {
            let sub = prev[j] + usize::from(*ai != b[j]);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

pub fn instruction_texts(f: &warp_lens::model::FunctionBody) -> Vec<String> {
    f.instructions.iter().map(|r| r.instr.text()).collect()
}
