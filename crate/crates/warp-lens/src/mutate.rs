//! Single-instruction mutant generation.
//!
//! Three rules, all type-aware so every emitted module still validates:
//!   1. operand substitution — swap a constant / local read / global read /
//!      fused constant-address load for another operand of the same type;
//!   2. operator substitution — swap a numeric operator for another with the
//!      same stack signature;
//!   3. operator deletion — remove an operator together with its
//!      operand-producing instructions and restore the stack with zero
//!      constants of the result types.
//!
//! Control instructions are never touched, so every mutant's control-flow
//! skeleton is identical to the original.

use crate::error::{Error, Result};
use crate::model::{
    self, const_of, substitution_candidates, DataType, FunctionBody, FusedRole, Instr,
    InstrCategory, InstructionModel, PoolValue,
};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationRule {
    OperandSubst,
    OperatorSubst,
    OperatorDelete,
}

impl MutationRule {
    /// Short label used in file names and manifests.
    pub fn label(self) -> &'static str {
        match self {
            MutationRule::OperandSubst => "rule1",
            MutationRule::OperatorSubst => "rule2",
            MutationRule::OperatorDelete => "rule3",
        }
    }
}

/// A legal mutation location. `offset` is the first record of the edited
/// span; `span_len` covers the fused pair for fused Rule 1 sites and the
/// producers-plus-operator run for Rule 3.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationSite {
    /// Module function index of the containing function.
    pub func_index: u32,
    pub offset: usize,
    pub span_len: usize,
    pub rule: MutationRule,
    /// For Rule 1: whether the site is a fused `i32.const addr; t.load` pair.
    pub fused: bool,
}

/// A complete mutant module plus the description of its single mutation.
#[derive(Debug, Clone)]
pub struct Mutant {
    /// Position in the deduplicated enumeration; stable for a given
    /// (module, config) pair.
    pub ordinal: usize,
    pub bytes: Vec<u8>,
    pub site: MutationSite,
    /// Text of the replaced instruction span.
    pub original_text: String,
    /// Text of the inserted instruction span.
    pub mutated_text: String,
}

impl Mutant {
    pub fn file_name(&self) -> String {
        format!("mutant_{:04}_{}.wasm", self.ordinal, self.site.rule.label())
    }
}

/// Manifest row, one JSON object per line in `mutants/manifest`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub ordinal: usize,
    pub rule: String,
    pub func_index: u32,
    pub offset: usize,
    pub original: String,
    pub mutated: String,
    pub file: String,
}

impl ManifestRecord {
    pub fn of(m: &Mutant) -> ManifestRecord {
        ManifestRecord {
            ordinal: m.ordinal,
            rule: m.site.rule.label().to_string(),
            func_index: m.site.func_index,
            offset: m.site.offset,
            original: m.original_text.clone(),
            mutated: m.mutated_text.clone(),
            file: m.file_name(),
        }
    }
}

/// The constants Rule 1 and Rule 3 draw replacement immediates from.
#[derive(Debug, Clone)]
pub struct ImmediatePool {
    pub ints: Vec<i64>,
    pub floats: Vec<f64>,
}

impl Default for ImmediatePool {
    fn default() -> Self {
        // Small distinguished constants; the type-maximum positive value is
        // resolved per type in `constants_for`.
        ImmediatePool {
            ints: vec![0, 1, -1, i64::MAX],
            floats: vec![0.0, 1.0, -1.0],
        }
    }
}

impl ImmediatePool {
    /// Pool constants coerced into `ty`, deduplicated, in pool order.
    pub fn constants_for(&self, ty: DataType) -> Vec<Instr> {
        let mut seen = Vec::new();
        let values: Vec<Instr> = match ty {
            DataType::I32 | DataType::I64 => self
                .ints
                .iter()
                .map(|v| {
                    // i64::MAX stands for "type-maximum positive".
                    let v = if *v == i64::MAX && ty == DataType::I32 {
                        i32::MAX as i64
                    } else {
                        *v
                    };
                    const_of(ty, PoolValue::Int(v))
                })
                .collect(),
            DataType::F32 | DataType::F64 => self
                .floats
                .iter()
                .map(|v| const_of(ty, PoolValue::Float(*v)))
                .collect(),
        };
        for instr in values {
            if !seen.contains(&instr) {
                seen.push(instr);
            }
        }
        seen
    }
}

#[derive(Debug, Clone)]
pub struct MutationConfig {
    pub pool: ImmediatePool,
    /// Deterministic truncation ceiling on the emitted mutant set.
    pub mutant_cap: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            pool: ImmediatePool::default(),
            mutant_cap: 2000,
        }
    }
}

fn function_position(model: &InstructionModel, func_index: u32) -> Result<usize> {
    func_index
        .checked_sub(model.num_imported_funcs)
        .map(|p| p as usize)
        .filter(|p| *p < model.functions.len())
        .ok_or_else(|| Error::ConfigError(format!("no defined function with index {func_index}")))
}

/// Find the Rule 3 deletion span ending at the operator at `op_offset`:
/// a contiguous run of operand units (constants, local/global reads, fused
/// constant-address loads) producing exactly the operator's parameters.
fn delete_span(f: &FunctionBody, op_offset: usize) -> Option<(usize, usize)> {
    let rec = f.instructions.get(op_offset)?;
    if rec.category != InstrCategory::Operator {
        return None;
    }
    // Deleting a tee silently rewrites a local; excluded from Rule 3.
    if matches!(rec.instr, Instr::LocalTee(_)) {
        return None;
    }
    let sig = rec.signature.as_ref()?;
    let mut need = sig.params.clone();
    let mut start = op_offset;
    while let Some(want) = need.pop() {
        if start == 0 {
            return None;
        }
        let last = &f.instructions[start - 1];
        let (unit_start, produced) = match last.fused_role {
            FusedRole::FusedLoad => (start.checked_sub(2)?, last.operand_result?),
            FusedRole::AddressConst => return None,
            FusedRole::None => {
                if last.category != InstrCategory::Operand {
                    return None;
                }
                (start - 1, last.operand_result?)
            }
        };
        if produced != want {
            return None;
        }
        start = unit_start;
    }
    Some((start, op_offset - start + 1))
}

/// Every legal mutation site of the model, rule-tagged, in a fixed
/// deterministic order (function, offset, rule).
pub fn enumerate_mutation_sites(model: &InstructionModel) -> Vec<MutationSite> {
    let mut sites = Vec::new();
    for f in &model.functions {
        if !f.mutable {
            continue;
        }
        for rec in &f.instructions {
            match rec.category {
                InstrCategory::Operand => match rec.fused_role {
                    // The fused pair is one logical operand site anchored at
                    // its address constant; the constant itself is not an
                    // independent site.
                    FusedRole::AddressConst => {}
                    FusedRole::FusedLoad => sites.push(MutationSite {
                        func_index: f.func_index,
                        offset: rec.offset - 1,
                        span_len: 2,
                        rule: MutationRule::OperandSubst,
                        fused: true,
                    }),
                    FusedRole::None => sites.push(MutationSite {
                        func_index: f.func_index,
                        offset: rec.offset,
                        span_len: 1,
                        rule: MutationRule::OperandSubst,
                        fused: false,
                    }),
                },
                InstrCategory::Operator => {
                    if let Instr::Numeric(op) = rec.instr {
                        if !substitution_candidates(op).is_empty() {
                            sites.push(MutationSite {
                                func_index: f.func_index,
                                offset: rec.offset,
                                span_len: 1,
                                rule: MutationRule::OperatorSubst,
                                fused: false,
                            });
                        }
                    }
                    if let Some((start, len)) = delete_span(f, rec.offset) {
                        sites.push(MutationSite {
                            func_index: f.func_index,
                            offset: start,
                            span_len: len,
                            rule: MutationRule::OperatorDelete,
                            fused: false,
                        });
                    }
                }
                InstrCategory::Control | InstrCategory::Other => {}
            }
        }
    }
    sites
}

fn negated_const(instr: &Instr) -> Option<Instr> {
    Some(match instr {
        Instr::I32Const(v) => Instr::I32Const(v.wrapping_neg()),
        Instr::I64Const(v) => Instr::I64Const(v.wrapping_neg()),
        Instr::F32Const(bits) => Instr::F32Const((-f32::from_bits(*bits)).to_bits()),
        Instr::F64Const(bits) => Instr::F64Const((-f64::from_bits(*bits)).to_bits()),
        _ => return None,
    })
}

fn span_text(f: &FunctionBody, offset: usize, len: usize) -> String {
    f.instructions[offset..offset + len]
        .iter()
        .map(|r| r.instr.text())
        .collect::<Vec<_>>()
        .join("; ")
}

fn splice_body(f: &FunctionBody, offset: usize, len: usize, replacement: &[Instr]) -> Vec<Instr> {
    let mut body: Vec<Instr> = f.instructions.iter().map(|r| r.instr.clone()).collect();
    body.splice(offset..offset + len, replacement.iter().cloned());
    body
}

fn build_mutant(
    model: &InstructionModel,
    f: &FunctionBody,
    site: &MutationSite,
    replacement: &[Instr],
) -> Result<Mutant> {
    let pos = function_position(model, site.func_index)?;
    let body = splice_body(f, site.offset, site.span_len, replacement);
    let bytes = model::encode_module_with_body(model, Some((pos, &body)))?;
    let mutated_text = if replacement.is_empty() {
        "(removed)".to_string()
    } else {
        replacement
            .iter()
            .map(|i| i.text())
            .collect::<Vec<_>>()
            .join("; ")
    };
    Ok(Mutant {
        ordinal: 0,
        bytes,
        site: site.clone(),
        original_text: span_text(f, site.offset, site.span_len),
        mutated_text,
    })
}

/// Rule 1 — operand instruction substitution.
pub fn apply_rule1(
    model: &InstructionModel,
    site: &MutationSite,
    pool: &ImmediatePool,
) -> Result<Vec<Mutant>> {
    let pos = function_position(model, site.func_index)?;
    let f = &model.functions[pos];
    let no_candidates = || Error::NoCandidates {
        func: site.func_index,
        offset: site.offset,
    };

    let mut replacements: Vec<Vec<Instr>> = Vec::new();
    if site.fused {
        let load = &f.instructions[site.offset + 1];
        let ty = load.operand_result.ok_or_else(no_candidates)?;
        for c in pool.constants_for(ty) {
            replacements.push(vec![c]);
        }
    } else {
        let rec = &f.instructions[site.offset];
        let ty = rec.operand_result.ok_or_else(no_candidates)?;
        match &rec.instr {
            Instr::I32Const(_) | Instr::I64Const(_) | Instr::F32Const(_) | Instr::F64Const(_) => {
                let mut candidates = pool.constants_for(ty);
                // The sign-flipped immediate is always a candidate: flipping
                // the sign of a constant is the smallest value change that
                // reliably perturbs instruction selection.
                if let Some(neg) = negated_const(&rec.instr) {
                    if !candidates.contains(&neg) {
                        candidates.push(neg);
                    }
                }
                for c in candidates {
                    if c != rec.instr {
                        replacements.push(vec![c]);
                    }
                }
                for (k, t) in f.locals.iter().enumerate() {
                    if *t == ty {
                        replacements.push(vec![Instr::LocalGet(k as u32)]);
                    }
                }
                for (k, g) in model.globals.iter().enumerate() {
                    if g.ty == Some(ty) {
                        replacements.push(vec![Instr::GlobalGet(k as u32)]);
                    }
                }
            }
            Instr::LocalGet(_) | Instr::GlobalGet(_) => {
                for c in pool.constants_for(ty) {
                    replacements.push(vec![c]);
                }
            }
            other => {
                return Err(Error::ConfigError(format!(
                    "rule 1 site does not target an operand: {other:?}"
                )))
            }
        }
    }
    if replacements.is_empty() {
        return Err(no_candidates());
    }
    replacements
        .iter()
        .map(|r| build_mutant(model, f, site, r))
        .collect()
}

/// Rule 2 — operator instruction substitution within the signature group.
pub fn apply_rule2(model: &InstructionModel, site: &MutationSite) -> Result<Vec<Mutant>> {
    let pos = function_position(model, site.func_index)?;
    let f = &model.functions[pos];
    let rec = &f.instructions[site.offset];
    let op = match rec.instr {
        Instr::Numeric(op) => op,
        ref other => {
            return Err(Error::ConfigError(format!(
                "rule 2 site does not target a numeric operator: {other:?}"
            )))
        }
    };
    let candidates = substitution_candidates(op);
    if candidates.is_empty() {
        return Err(Error::NoCandidates {
            func: site.func_index,
            offset: site.offset,
        });
    }
    candidates
        .into_iter()
        .map(|c| build_mutant(model, f, site, &[Instr::Numeric(c)]))
        .collect()
}

/// Rule 3 — operator instruction deletion with stack restoration.
pub fn apply_rule3(model: &InstructionModel, site: &MutationSite) -> Result<Mutant> {
    let pos = function_position(model, site.func_index)?;
    let f = &model.functions[pos];
    let op_offset = site.offset + site.span_len - 1;
    match delete_span(f, op_offset) {
        Some((start, len)) if start == site.offset && len == site.span_len => {}
        _ => {
            return Err(Error::IllegalSpan {
                func: site.func_index,
                offset: site.offset,
                reason: "span operands are not all operand-produced".into(),
            })
        }
    }
    let sig = f.instructions[op_offset]
        .signature
        .clone()
        .ok_or_else(|| Error::IllegalSpan {
            func: site.func_index,
            offset: site.offset,
            reason: "span does not end in an operator".into(),
        })?;
    let restore: Vec<Instr> = sig
        .results
        .iter()
        .map(|t| match t {
            DataType::I32 | DataType::I64 => const_of(*t, PoolValue::Int(0)),
            DataType::F32 | DataType::F64 => const_of(*t, PoolValue::Float(0.0)),
        })
        .collect();
    build_mutant(model, f, site, &restore)
}

/// Outcome of full mutant generation.
#[derive(Debug)]
pub struct MutantSet {
    pub mutants: Vec<Mutant>,
    /// Sites enumerated before rule application (for accounting).
    pub site_count: usize,
    /// Mutants dropped because their bytes duplicated an earlier mutant
    /// (or the original module).
    pub duplicates: usize,
    /// True when the cap truncated the enumeration.
    pub truncated: bool,
}

/// Apply every rule at every site, validate, deduplicate by module bytes,
/// and cap deterministically. Pure function of (model, config).
pub fn generate_all_mutants(
    model: &InstructionModel,
    config: &MutationConfig,
) -> Result<MutantSet> {
    let sites = enumerate_mutation_sites(model);
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(model::encode_module(model)?);

    let mut mutants: Vec<Mutant> = Vec::new();
    let mut duplicates = 0usize;
    let mut truncated = false;

    'outer: for site in &sites {
        let produced = match site.rule {
            MutationRule::OperandSubst => apply_rule1(model, site, &config.pool),
            MutationRule::OperatorSubst => apply_rule2(model, site),
            MutationRule::OperatorDelete => apply_rule3(model, site).map(|m| vec![m]),
        };
        let produced = match produced {
            Ok(ms) => ms,
            Err(Error::NoCandidates { .. }) => continue,
            Err(e) => return Err(e),
        };
        for mut m in produced {
            if !seen.insert(m.bytes.clone()) {
                duplicates += 1;
                continue;
            }
            let verdict = model::validate_module(&m.bytes);
            if !verdict.ok {
                return Err(Error::InvalidMutant {
                    site: format!(
                        "{} func {} offset {}",
                        m.site.rule.label(),
                        m.site.func_index,
                        m.site.offset
                    ),
                    message: verdict.message.unwrap_or_default(),
                });
            }
            m.ordinal = mutants.len();
            mutants.push(m);
            if mutants.len() >= config.mutant_cap {
                truncated = true;
                break 'outer;
            }
        }
    }
    Ok(MutantSet {
        mutants,
        site_count: sites.len(),
        duplicates,
        truncated,
    })
}
