//! Deterministic mock runtime: an interpreter with a configurable
//! per-opcode cost model, driven through the same process boundary as real
//! runtimes. Pseudo-time makes the whole pipeline reproducible at desk
//! scale, and dump expansions make injected slowness visible to the differ.

mod interp;

pub use interp::{MockError, MockRun, Value};

use crate::error::{Error, Result};
use crate::harness::{DisassembledFunction, Disassembly, MachineInstr};
use crate::model::InstructionModel;

/// Per-opcode cost model plus dump-expansion rules.
///
/// Patterns are substring matches on the full opcode name, so `div` covers
/// `i32.div_s`, `i64.div_u`, `f64.div`, and so on.
#[derive(Debug, Clone)]
pub struct CostModel {
    /// Cost for opcodes without a `cost` entry.
    pub default_cost: u64,
    /// Exact opcode name -> base cost.
    pub base_costs: Vec<(String, u64)>,
    /// (pattern, factor): every matching pattern multiplies the base cost.
    pub multipliers: Vec<(String, u64)>,
    /// (pattern, count, mnemonic): matching instructions expand into `count`
    /// pseudo-instructions named `mnemonic` in the dump.
    pub expansions: Vec<(String, usize, String)>,
    /// True: every executed instruction accrues its cost. False: each static
    /// instruction is charged at most once for the whole run.
    pub loop_amplification: bool,
    pub step_budget: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            default_cost: 1,
            base_costs: Vec::new(),
            multipliers: Vec::new(),
            expansions: Vec::new(),
            loop_amplification: true,
            step_budget: 100_000_000,
        }
    }
}

impl CostModel {
    /// The uniform model: every instruction costs 1.
    pub fn uniform() -> CostModel {
        CostModel::default()
    }

    pub fn cost_of(&self, opcode: &str) -> u64 {
        let mut cost = self
            .base_costs
            .iter()
            .find(|(name, _)| name == opcode)
            .map(|(_, c)| *c)
            .unwrap_or(self.default_cost);
        for (pattern, factor) in &self.multipliers {
            if opcode.contains(pattern.as_str()) {
                cost = cost.saturating_mul(*factor);
            }
        }
        cost.max(1)
    }

    /// First matching expansion rule, if any.
    pub fn expansion_of(&self, opcode: &str) -> Option<(usize, &str)> {
        self.expansions
            .iter()
            .find(|(pattern, _, _)| opcode.contains(pattern.as_str()))
            .map(|(_, count, mnemonic)| (*count, mnemonic.as_str()))
    }

    /// Parse the line-oriented cost-model file format:
    ///
    /// ```text
    /// # comment
    /// default 1
    /// budget 2000000
    /// amplify-loops on
    /// cost i64.div_u 50
    /// multiply div 50
    /// expand div 5 div_expand
    /// ```
    pub fn parse(text: &str) -> Result<CostModel> {
        let mut model = CostModel::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let directive = tok.next().unwrap();
            let bad = |what: &str| {
                Error::ConfigError(format!("cost model line {}: {what}: {raw:?}", lineno + 1))
            };
            let mut next = |what: &str| tok.next().ok_or_else(|| bad(what));
            match directive {
                "default" => {
                    model.default_cost = next("missing value")?
                        .parse()
                        .map_err(|_| bad("bad default cost"))?;
                    if model.default_cost == 0 {
                        return Err(bad("costs must be positive"));
                    }
                }
                "budget" => {
                    model.step_budget = next("missing value")?
                        .parse()
                        .map_err(|_| bad("bad step budget"))?;
                }
                "amplify-loops" => {
                    model.loop_amplification = match next("missing value")? {
                        "on" | "true" | "1" => true,
                        "off" | "false" | "0" => false,
                        _ => return Err(bad("expected on/off")),
                    };
                }
                "cost" => {
                    let name = next("missing opcode")?.to_string();
                    let cost: u64 = next("missing cost")?.parse().map_err(|_| bad("bad cost"))?;
                    if cost == 0 {
                        return Err(bad("costs must be positive"));
                    }
                    model.base_costs.push((name, cost));
                }
                "multiply" => {
                    let pattern = next("missing pattern")?.to_string();
                    let factor: u64 = next("missing factor")?
                        .parse()
                        .map_err(|_| bad("bad factor"))?;
                    if factor == 0 {
                        return Err(bad("factors must be positive"));
                    }
                    model.multipliers.push((pattern, factor));
                }
                "expand" => {
                    let pattern = next("missing pattern")?.to_string();
                    let count: usize = next("missing count")?
                        .parse()
                        .map_err(|_| bad("bad count"))?;
                    let mnemonic = next("missing mnemonic")?.to_string();
                    if count == 0 {
                        return Err(bad("expansion count must be positive"));
                    }
                    model.expansions.push((pattern, count, mnemonic));
                }
                _ => return Err(bad("unknown directive")),
            }
        }
        Ok(model)
    }
}

fn mock_error(e: MockError) -> Error {
    match e {
        MockError::Trap(msg) => Error::Trap(msg),
        MockError::StepBudgetExceeded(budget) => Error::StepBudgetExceeded(budget),
        MockError::Unsupported(msg) => Error::UnsupportedFeature(msg),
    }
}

/// Pick the entry function: an explicit name, else the `_start` export,
/// else the single exported function.
pub fn resolve_entry(model: &InstructionModel, explicit: Option<&str>) -> Result<String> {
    if let Some(name) = explicit {
        if model.export_func(name).is_none() {
            return Err(Error::ConfigError(format!(
                "no exported function named `{name}`"
            )));
        }
        return Ok(name.to_string());
    }
    if model.export_func("_start").is_some() {
        return Ok("_start".into());
    }
    let funcs: Vec<&crate::model::Export> = model
        .exports
        .iter()
        .filter(|e| e.kind == crate::model::ExportKind::Func)
        .collect();
    match funcs.as_slice() {
        [one] => Ok(one.name.clone()),
        [] => Err(Error::ConfigError("module exports no function".into())),
        _ => Err(Error::ConfigError(
            "module exports several functions; pass --entry".into(),
        )),
    }
}

/// Execute the module under the cost model and return the run record.
/// The entry function must take no parameters.
pub fn interpret_with_cost(
    model: &InstructionModel,
    cost: &CostModel,
    entry: &str,
) -> std::result::Result<MockRun, MockError> {
    let mut interp = interp::Interpreter::instantiate(model, cost)?;
    let results = interp.invoke_export(entry)?;
    Ok(interp.finish(results))
}

/// Convenience wrapper mapping mock errors into crate errors.
pub fn run_module(model: &InstructionModel, cost: &CostModel, entry: &str) -> Result<MockRun> {
    interpret_with_cost(model, cost, entry).map_err(mock_error)
}

/// The observable program output printed on stdout: entry results, exported
/// globals, and a memory digest. Deliberately excludes steps and cost so
/// digests compare semantics, not cost models.
pub fn render_observables(run: &MockRun) -> String {
    let mut out = String::new();
    let rendered: Vec<String> = run.results.iter().map(|v| v.render()).collect();
    out.push_str(&format!("result: {}\n", rendered.join(" ")));
    for (name, v) in &run.exported_globals {
        out.push_str(&format!("global {name}: {}\n", v.render()));
    }
    if let Some(digest) = &run.memory_digest {
        out.push_str(&format!("memory: {digest}\n"));
    }
    out
}

/// Synthesize the "machine code" listing: one pseudo-instruction per Wasm
/// instruction, except that expansion rules blow matching instructions up
/// into `count` entries, so injected slowness shows up as extra
/// instructions. Addresses are sequential over the whole module.
pub fn mock_dump(model: &InstructionModel, cost: &CostModel) -> Result<Disassembly> {
    let mut functions = Vec::with_capacity(model.functions.len());
    let mut address: u64 = 0;
    for f in &model.functions {
        if !f.mutable {
            return Err(Error::UnsupportedFeature(format!(
                "cannot dump function {}: outside the interpreted subset",
                f.func_index
            )));
        }
        let start_address = address;
        let mut instructions = Vec::new();
        for rec in &f.instructions {
            let opcode = rec.instr.opcode_name();
            let encoding = instruction_bytes(&rec.instr);
            match cost.expansion_of(opcode) {
                Some((count, mnemonic)) => {
                    for _ in 0..count {
                        instructions.push(MachineInstr {
                            address,
                            bytes: encoding.clone(),
                            mnemonic: mnemonic.to_string(),
                            operands: String::new(),
                        });
                        address += 1;
                    }
                }
                None => {
                    let text = rec.instr.text();
                    let operands = text
                        .strip_prefix(opcode)
                        .map(|s| s.trim().to_string())
                        .unwrap_or_default();
                    instructions.push(MachineInstr {
                        address,
                        bytes: encoding.clone(),
                        mnemonic: opcode.to_string(),
                        operands,
                    });
                    address += 1;
                }
            }
        }
        functions.push(DisassembledFunction {
            func_index: f.func_index,
            symbol: format!("func{}", f.func_index),
            start_address,
            instructions,
        });
    }
    Ok(Disassembly { functions })
}

/// Canonical binary encoding of one instruction, used as the dump's "bytes"
/// column so immediate-only differences stay visible behind equal opcodes.
fn instruction_bytes(instr: &crate::model::Instr) -> Vec<u8> {
    use wasm_encoder::Encode;
    let mut bytes = Vec::new();
    crate::model::encoder_instruction(instr).encode(&mut bytes);
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_module;

    fn model_of(src: &str) -> InstructionModel {
        parse_module(&wat::parse_str(src).unwrap()).unwrap()
    }

    #[test]
    fn uniform_cost_counts_instructions() {
        let m = model_of(
            r#"(module (func (export "_start") (result i32)
                i32.const 1 i32.const 2 i32.add
                i32.const 3 i32.add
                i32.const 4 i32.add
                i32.const 5 i32.add
                i32.const 0 i32.add))"#,
        );
        let run = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        assert_eq!(run.pseudo_time, 11);
        assert_eq!(run.steps, 11);
        assert_eq!(run.results, vec![Value::I32(15)]);
    }

    #[test]
    fn multiplier_dominates_loop_cost() {
        // 1000 iterations, one division each: uniform cost would be ~9
        // per iteration, the x50 divide adds 49 more.
        let src = r#"(module (func (export "_start")
            (local $i i64)
            i64.const 1000
            local.set $i
            block $exit
              loop $l
                local.get $i
                i64.eqz
                br_if $exit
                i64.const 8
                i64.const 2
                i64.div_u
                drop
                local.get $i
                i64.const 1
                i64.sub
                local.set $i
                br $l
              end
            end))"#;
        let m = model_of(src);
        let uniform = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        let mut slow = CostModel::uniform();
        slow.multipliers.push(("div".into(), 50));
        let buggy = run_module(&m, &slow, "_start").unwrap();
        assert_eq!(buggy.steps, uniform.steps);
        assert_eq!(buggy.pseudo_time, uniform.pseudo_time + 49 * 1000);
    }

    #[test]
    fn closed_form_cost_for_division_loop() {
        // Per iteration: local.get, i64.eqz, br_if, i64.const, i64.const,
        // i64.div_u, drop, local.get, i64.const, i64.sub, local.set, br
        // = 12 steps; entry adds const+set+block+loop, exit iteration runs 3
        // + the final br_if taken.
        let src = r#"(module (func (export "_start")
            (local $i i64)
            i64.const 10
            local.set $i
            block $exit
              loop $l
                local.get $i
                i64.eqz
                br_if $exit
                i64.const 8
                i64.const 2
                i64.div_u
                drop
                local.get $i
                i64.const 1
                i64.sub
                local.set $i
                br $l
              end
            end))"#;
        let m = model_of(src);
        let run = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        // 4 setup + 10 full iterations of 12 + the final check of 3;
        // the exiting br_if jumps past both `end`s, so they never execute.
        let expected = 4 + 10 * 12 + 3;
        assert_eq!(run.steps, expected);
    }

    #[test]
    fn trap_on_unreachable_and_division_by_zero() {
        let m = model_of(r#"(module (func (export "_start") unreachable))"#);
        assert!(matches!(
            interpret_with_cost(&m, &CostModel::uniform(), "_start"),
            Err(MockError::Trap(_))
        ));
        let m = model_of(
            r#"(module (func (export "_start") (result i32) i32.const 1 i32.const 0 i32.div_u))"#,
        );
        assert!(matches!(
            interpret_with_cost(&m, &CostModel::uniform(), "_start"),
            Err(MockError::Trap(_))
        ));
    }

    #[test]
    fn step_budget_stops_infinite_loop() {
        let m = model_of(r#"(module (func (export "_start") (loop br 0)))"#);
        let mut cost = CostModel::uniform();
        cost.step_budget = 10_000;
        assert!(matches!(
            interpret_with_cost(&m, &cost, "_start"),
            Err(MockError::StepBudgetExceeded(10_000))
        ));
    }

    #[test]
    fn memory_and_globals_are_observable() {
        let src = r#"(module
            (memory 1)
            (global $g (mut i64) (i64.const 0))
            (func (export "_start")
              i32.const 16
              i64.const -65537
              i64.store
              i64.const 42
              global.set $g)
            (global (export "g") (mut i64) (i64.const 7)))"#;
        let m = model_of(src);
        let run = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        let obs = render_observables(&run);
        assert!(obs.contains("result: \n") || obs.starts_with("result:"));
        assert!(obs.contains("global g: 7"));
        assert!(obs.contains("memory: "));
        // Same module, mutated store value: digest must differ.
        let src2 = src.replace("-65537", "65537");
        let m2 = model_of(&src2);
        let run2 = run_module(&m2, &CostModel::uniform(), "_start").unwrap();
        assert_ne!(run.memory_digest, run2.memory_digest);
    }

    #[test]
    fn control_flow_if_else_br_table_calls() {
        let src = r#"(module
            (func $classify (param i32) (result i32)
              (block $b2
                (block $b1
                  (block $b0
                    local.get 0
                    br_table $b0 $b1 $b2)
                  i32.const 100
                  return)
                i32.const 200
                return)
              i32.const 300)
            (func (export "_start") (result i32)
              (local $acc i32)
              i32.const 0
              call $classify
              i32.const 1
              call $classify
              i32.add
              i32.const 2
              call $classify
              i32.add
              local.tee $acc
              (if (result i32) (i32.eqz (local.get $acc))
                (then i32.const -1)
                (else local.get $acc))
              i32.add))"#;
        let m = model_of(src);
        let run = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        assert_eq!(run.results, vec![Value::I32(1200)]);
    }

    #[test]
    fn call_indirect_dispatch() {
        let src = r#"(module
            (type $t (func (result i32)))
            (table 2 funcref)
            (elem (i32.const 0) $a $b)
            (func $a (result i32) i32.const 11)
            (func $b (result i32) i32.const 22)
            (func (export "_start") (result i32)
              i32.const 1
              call_indirect (type $t)
              i32.const 0
              call_indirect (type $t)
              i32.add))"#;
        let m = model_of(src);
        let run = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        assert_eq!(run.results, vec![Value::I32(33)]);
    }

    #[test]
    fn numeric_semantics_fixtures() {
        // Hand-computed fixtures over the numeric subset.
        let cases: &[(&str, Value)] = &[
            (
                "i32.const -2147483648 i32.const -1 i32.rem_s",
                Value::I32(0),
            ),
            ("i32.const -7 i32.const 2 i32.div_s", Value::I32(-3)),
            ("i32.const -7 i32.const 2 i32.rem_s", Value::I32(-1)),
            ("i32.const 5 i32.const 33 i32.shl", Value::I32(10)),
            ("i32.const -1 i32.const 1 i32.shr_u", Value::I32(2147483647)),
            ("i32.const 1 i32.const 1 i32.rotr", Value::I32(-2147483648)),
            ("i32.const 240 i32.popcnt", Value::I32(4)),
            ("i64.const -1 i64.clz", Value::I64(0)),
            ("i64.const 8 i64.ctz", Value::I64(3)),
            ("i32.const 200 i32.extend8_s", Value::I32(-56)),
            ("i64.const 4294967295 i64.extend32_s", Value::I64(-1)),
            ("f64.const -0 f64.const 0 f64.min", Value::F64(-0.0)),
            ("f64.const -0 f64.const 0 f64.max", Value::F64(0.0)),
            ("f32.const 2.5 f32.nearest", Value::F32(2.0)),
            ("f32.const 3.5 f32.nearest", Value::F32(4.0)),
            ("f64.const -2.5 f64.nearest", Value::F64(-2.0)),
            ("f64.const 2.75 f64.trunc", Value::F64(2.0)),
            (
                "f64.const 1e308 f64.const 10 f64.mul",
                Value::F64(f64::INFINITY),
            ),
            ("f64.const -3.99 i32.trunc_f64_s", Value::I32(-3)),
            ("f64.const -0.5 i32.trunc_f64_u", Value::I32(0)),
            ("f64.const 1e10 i32.trunc_sat_f64_s", Value::I32(2147483647)),
            ("f64.const nan i32.trunc_sat_f64_s", Value::I32(0)),
            ("f64.const -1 i64.trunc_sat_f64_u", Value::I64(0)),
            (
                "i64.const -1 f64.convert_i64_u",
                Value::F64(18446744073709551616.0),
            ),
            (
                "i32.const -1 f32.convert_i32_u",
                Value::F32(4294967295.0_f32),
            ),
            ("f32.const -5 f32.const 3 f32.copysign", Value::F32(5.0)),
            (
                "f64.const 9007199254740993 i64.trunc_f64_s",
                Value::I64(9007199254740992),
            ),
            (
                "i64.const 9223372036854775807 f64.convert_i64_s",
                Value::F64(9.223372036854776e18),
            ),
        ];
        for (body, expected) in cases {
            let ty = match expected {
                Value::I32(_) => "i32",
                Value::I64(_) => "i64",
                Value::F32(_) => "f32",
                Value::F64(_) => "f64",
            };
            let src = format!(r#"(module (func (export "_start") (result {ty}) {body}))"#);
            let m = model_of(&src);
            let run = run_module(&m, &CostModel::uniform(), "_start").unwrap();
            match (run.results[0], expected) {
                (Value::F32(a), Value::F32(b)) => {
                    assert_eq!(a.to_bits(), b.to_bits(), "{body}")
                }
                (Value::F64(a), Value::F64(b)) => {
                    assert_eq!(a.to_bits(), b.to_bits(), "{body}")
                }
                (got, want) => assert_eq!(got, *want, "{body}"),
            }
        }
    }

    #[test]
    fn trunc_traps_on_out_of_range() {
        for body in [
            "f64.const 1e300 i32.trunc_f64_s",
            "f32.const nan i32.trunc_f32_s",
            "f64.const -1.5 i64.trunc_f64_u",
            "f64.const 9223372036854775808 i64.trunc_f64_s",
        ] {
            let ty = if body.contains("i32.trunc") {
                "i32"
            } else {
                "i64"
            };
            let src = format!(r#"(module (func (export "_start") (result {ty}) {body}))"#);
            let m = model_of(&src);
            assert!(
                matches!(
                    interpret_with_cost(&m, &CostModel::uniform(), "_start"),
                    Err(MockError::Trap(_))
                ),
                "{body}"
            );
        }
    }

    #[test]
    fn determinism_across_runs() {
        let src = r#"(module
            (memory 1)
            (func (export "_start") (result i64)
              (local $i i64) (local $acc i64)
              i64.const 500
              local.set $i
              block $exit
                loop $l
                  local.get $i
                  i64.eqz
                  br_if $exit
                  local.get $acc
                  local.get $i
                  i64.mul
                  i64.const 1000003
                  i64.rem_u
                  local.get $i
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
        let m = model_of(src);
        let a = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        let b = run_module(&m, &CostModel::uniform(), "_start").unwrap();
        assert_eq!(a.pseudo_time, b.pseudo_time);
        assert_eq!(a.results, b.results);
        assert_eq!(render_observables(&a), render_observables(&b));
    }

    #[test]
    fn dump_counts_and_expansion() {
        let m = model_of(
            r#"(module
                (func (result i32) i32.const 1 i32.const 2 i32.add)
                (func (param i64 i64) (result i64) local.get 0 local.get 1 i64.div_u))"#,
        );
        let plain = mock_dump(&m, &CostModel::uniform()).unwrap();
        assert_eq!(plain.functions.len(), 2);
        assert_eq!(plain.functions[0].instructions.len(), 3);
        assert_eq!(plain.functions[0].start_address, 0);
        assert_eq!(plain.functions[1].start_address, 3);
        let addrs: Vec<u64> = plain.functions[0]
            .instructions
            .iter()
            .map(|i| i.address)
            .collect();
        assert_eq!(addrs, vec![0, 1, 2]);

        let mut cfg = CostModel::uniform();
        cfg.expansions.push(("div".into(), 5, "div_expand".into()));
        let expanded = mock_dump(&m, &cfg).unwrap();
        let f1 = &expanded.functions[1];
        assert_eq!(f1.instructions.len(), 2 + 5);
        let div_block: Vec<&str> = f1
            .instructions
            .iter()
            .filter(|i| i.mnemonic == "div_expand")
            .map(|i| i.mnemonic.as_str())
            .collect();
        assert_eq!(div_block.len(), 5);
    }

    #[test]
    fn cost_model_file_roundtrip() {
        let text = "
# the buggy runtime
default 1
budget 2000000
amplify-loops on
cost i64.div_u 50
multiply div 50
expand div 5 div_expand
";
        let model = CostModel::parse(text).unwrap();
        assert_eq!(model.default_cost, 1);
        assert_eq!(model.step_budget, 2_000_000);
        assert!(model.loop_amplification);
        assert_eq!(model.cost_of("i64.div_u"), 50 * 50);
        assert_eq!(model.cost_of("i64.div_s"), 50);
        assert_eq!(model.cost_of("i64.add"), 1);
        assert_eq!(model.expansion_of("i64.div_u"), Some((5, "div_expand")));
        assert_eq!(model.expansion_of("i64.add"), None);
        assert!(CostModel::parse("bogus 1").is_err());
        assert!(CostModel::parse("cost i32.add 0").is_err());
    }

    #[test]
    fn loop_amplification_off_charges_once() {
        let src = r#"(module (func (export "_start")
            (local $i i64)
            i64.const 5
            local.set $i
            block $exit
              loop $l
                local.get $i
                i64.eqz
                br_if $exit
                local.get $i
                i64.const 1
                i64.sub
                local.set $i
                br $l
              end
            end))"#;
        let m = model_of(src);
        let mut cost = CostModel::uniform();
        cost.loop_amplification = false;
        let run = run_module(&m, &cost, "_start").unwrap();
        // 12 distinct static instructions execute (the two `end`s are
        // always skipped by branches), each charged once.
        assert_eq!(run.pseudo_time, 12);
        assert!(run.steps > run.pseudo_time);
    }
}
