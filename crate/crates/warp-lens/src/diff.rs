//! Opcode-level machine-code comparison.
//!
//! Register allocation shifts freely between two compilations of nearly
//! identical programs, so sequences are compared by mnemonic only. The edit
//! script is a maximal longest-common-subsequence alignment; instruction
//! bytes are consulted afterwards to flag constant-pool differences hiding
//! behind identical opcodes, and start addresses to flag pure layout shifts.

use crate::error::{Error, Result};
use crate::harness::{DisassembledFunction, Disassembly};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Mnemonic view of one disassembled function (operands stripped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpcodeSequence {
    pub func_index: u32,
    pub mnemonics: Vec<String>,
    /// Parallel to `mnemonics`.
    pub addresses: Vec<u64>,
}

/// One sequence per function, operands and registers dropped, mnemonics kept
/// verbatim including width suffixes.
pub fn normalize_disassembly(dis: &Disassembly) -> Vec<OpcodeSequence> {
    dis.functions
        .iter()
        .map(|f| OpcodeSequence {
            func_index: f.func_index,
            mnemonics: f.instructions.iter().map(|i| i.mnemonic.clone()).collect(),
            addresses: f.instructions.iter().map(|i| i.address).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditKind {
    Keep,
    DeleteFromOriginal,
    InsertFromMutant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditOp {
    pub kind: EditKind,
    pub mnemonic: String,
    /// Address on the side the op came from (original for Keep/Delete,
    /// mutant for Insert).
    pub address: u64,
    /// Index into the original sequence (None for inserts).
    pub a_idx: Option<usize>,
    /// Index into the mutant sequence (None for deletes).
    pub b_idx: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    pub lcs_length: usize,
}

impl EditScript {
    pub fn deletes(&self) -> usize {
        self.ops
            .iter()
            .filter(|o| o.kind == EditKind::DeleteFromOriginal)
            .count()
    }

    pub fn inserts(&self) -> usize {
        self.ops
            .iter()
            .filter(|o| o.kind == EditKind::InsertFromMutant)
            .count()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.iter().all(|o| o.kind == EditKind::Keep)
    }
}

/// Choose the algorithm by input size: a full table below ~4M cells, the
/// linear-space divide-and-conquer above (required for dumps past 10^4
/// instructions).
const QUADRATIC_CELL_LIMIT: usize = 4_000_000;

/// Maximal-LCS edit script over mnemonics. Tie-breaking is deterministic:
/// prefer Keep, then DeleteFromOriginal, on equal subproblem values.
pub fn lcs_diff(a: &OpcodeSequence, b: &OpcodeSequence) -> EditScript {
    let n = a.mnemonics.len();
    let m = b.mnemonics.len();
    let pairs = if n.max(m) > 10_000 || n.saturating_mul(m) > QUADRATIC_CELL_LIMIT {
        hirschberg(&a.mnemonics, &b.mnemonics)
    } else {
        quadratic(&a.mnemonics, &b.mnemonics)
    };
    script_from_alignment(a, b, &pairs)
}

/// Alignment as the kept index pairs (ai, bi), strictly increasing in both.
fn quadratic(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let n = a.len();
    let m = b.len();
    // dp[i][j] = LCS length of a[i..] vs b[j..].
    let mut dp = vec![0u32; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[idx(i, j)] = if a[i] == b[j] {
                dp[idx(i + 1, j + 1)] + 1
            } else {
                dp[idx(i + 1, j)].max(dp[idx(i, j + 1)])
            };
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] && dp[idx(i, j)] == dp[idx(i + 1, j + 1)] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if dp[idx(i, j)] == dp[idx(i + 1, j)] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

/// Forward LCS score row: lengths of LCS(a, b[..j]) for all j.
fn score_row(a: &[String], b: &[String]) -> Vec<u32> {
    let m = b.len();
    let mut prev = vec![0u32; m + 1];
    let mut cur = vec![0u32; m + 1];
    for ai in a {
        for j in 0..m {
            cur[j + 1] = if *ai == b[j] {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
        cur[0] = 0;
    }
    prev
}

fn rev_strings(xs: &[String]) -> Vec<String> {
    xs.iter().rev().cloned().collect()
}

fn hirschberg(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    hirschberg_rec(a, b, 0, 0, &mut pairs);
    pairs
}

fn hirschberg_rec(
    a: &[String],
    b: &[String],
    a_off: usize,
    b_off: usize,
    pairs: &mut Vec<(usize, usize)>,
) {
    let n = a.len();
    if n == 0 || b.is_empty() {
        return;
    }
    if n == 1 {
        if let Some(j) = b.iter().position(|x| *x == a[0]) {
            pairs.push((a_off, b_off + j));
        }
        return;
    }
    let mid = n / 2;
    let left = score_row(&a[..mid], b);
    let right_rev = score_row(&rev_strings(&a[mid..]), &rev_strings(b));
    let m = b.len();
    let mut best_k = 0;
    let mut best = 0;
    for k in 0..=m {
        let total = left[k] + right_rev[m - k];
        if total > best {
            best = total;
            best_k = k;
        }
    }
    hirschberg_rec(&a[..mid], &b[..best_k], a_off, b_off, pairs);
    hirschberg_rec(&a[mid..], &b[best_k..], a_off + mid, b_off + best_k, pairs);
}

fn script_from_alignment(
    a: &OpcodeSequence,
    b: &OpcodeSequence,
    pairs: &[(usize, usize)],
) -> EditScript {
    let mut ops = Vec::with_capacity(a.mnemonics.len() + b.mnemonics.len() - pairs.len());
    let (mut i, mut j) = (0usize, 0usize);
    for &(ai, bj) in pairs
        .iter()
        .chain(std::iter::once(&(a.mnemonics.len(), b.mnemonics.len())))
    {
        while i < ai {
            ops.push(EditOp {
                kind: EditKind::DeleteFromOriginal,
                mnemonic: a.mnemonics[i].clone(),
                address: a.addresses[i],
                a_idx: Some(i),
                b_idx: None,
            });
            i += 1;
        }
        while j < bj {
            ops.push(EditOp {
                kind: EditKind::InsertFromMutant,
                mnemonic: b.mnemonics[j].clone(),
                address: b.addresses[j],
                a_idx: None,
                b_idx: Some(j),
            });
            j += 1;
        }
        if ai < a.mnemonics.len() {
            ops.push(EditOp {
                kind: EditKind::Keep,
                mnemonic: a.mnemonics[ai].clone(),
                address: a.addresses[ai],
                a_idx: Some(ai),
                b_idx: Some(bj),
            });
            i = ai + 1;
            j = bj + 1;
        }
    }
    EditScript {
        lcs_length: pairs.len(),
        ops,
    }
}

/// A maximal contiguous run of non-Keep operations, with up to three kept
/// instructions of context on each side. All values index `edit.ops`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffRegion {
    pub start: usize,
    pub end: usize,
    pub context_start: usize,
    pub context_end: usize,
}

pub const REGION_CONTEXT: usize = 3;

fn regions_of(script: &EditScript) -> Vec<DiffRegion> {
    let mut regions = Vec::new();
    let ops = &script.ops;
    let mut i = 0;
    while i < ops.len() {
        if ops[i].kind == EditKind::Keep {
            i += 1;
            continue;
        }
        let start = i;
        while i < ops.len() && ops[i].kind != EditKind::Keep {
            i += 1;
        }
        // Context covers only kept instructions, so it never swallows a
        // neighboring region's edits.
        let mut context_start = start;
        while start - context_start < REGION_CONTEXT
            && context_start > 0
            && ops[context_start - 1].kind == EditKind::Keep
        {
            context_start -= 1;
        }
        let mut context_end = i;
        while context_end - i < REGION_CONTEXT
            && context_end < ops.len()
            && ops[context_end].kind == EditKind::Keep
        {
            context_end += 1;
        }
        regions.push(DiffRegion {
            start,
            end: i,
            context_start,
            context_end,
        });
    }
    regions
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionPresence {
    Both,
    OnlyOriginal,
    OnlyMutant,
}

/// Per-function comparison of the buggy runtime's code for original vs
/// mutant.
#[derive(Debug, Clone)]
pub struct FunctionDiff {
    pub func_index: u32,
    pub original_count: usize,
    pub mutant_count: usize,
    pub original_start: u64,
    pub mutant_start: u64,
    pub edit: EditScript,
    pub regions: Vec<DiffRegion>,
    /// Non-Keep operations attributed to the original side: the number of
    /// machine instructions this comparison identifies as suspect.
    pub identified_original_instructions: usize,
    /// Opcode-identical positions whose encoded bytes differ (constant-pool
    /// differences and similar).
    pub bytes_differ: bool,
    /// mutant start − original start.
    pub start_address_delta: i64,
    pub presence: FunctionPresence,
}

impl FunctionDiff {
    /// True when something is worth reporting for this function.
    pub fn noteworthy(&self) -> bool {
        !self.edit.is_identity()
            || self.bytes_differ
            || self.start_address_delta != 0
            || self.presence != FunctionPresence::Both
    }
}

/// Machine-readable per-function summary row (`summary.jsonl`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionDiffSummary {
    pub func_index: u32,
    pub original_count: usize,
    pub mutant_count: usize,
    pub original_start: u64,
    pub mutant_start: u64,
    pub lcs_length: usize,
    pub identified: usize,
    pub bytes_differ: bool,
    pub start_address_delta: i64,
}

impl FunctionDiffSummary {
    pub fn of(d: &FunctionDiff) -> FunctionDiffSummary {
        FunctionDiffSummary {
            func_index: d.func_index,
            original_count: d.original_count,
            mutant_count: d.mutant_count,
            original_start: d.original_start,
            mutant_start: d.mutant_start,
            lcs_length: d.edit.lcs_length,
            identified: d.identified_original_instructions,
            bytes_differ: d.bytes_differ,
            start_address_delta: d.start_address_delta,
        }
    }
}

fn empty_function(func_index: u32) -> DisassembledFunction {
    DisassembledFunction {
        func_index,
        symbol: String::new(),
        start_address: 0,
        instructions: Vec::new(),
    }
}

fn diff_pair(
    original: &DisassembledFunction,
    mutant: &DisassembledFunction,
    presence: FunctionPresence,
) -> FunctionDiff {
    let seqs = normalize_disassembly(&Disassembly {
        functions: vec![original.clone(), mutant.clone()],
    });
    let edit = lcs_diff(&seqs[0], &seqs[1]);

    // Where opcodes align, compare the encoded bytes.
    let mut bytes_differ = false;
    for op in &edit.ops {
        if op.kind == EditKind::Keep {
            let (Some(ai), Some(bi)) = (op.a_idx, op.b_idx) else {
                continue;
            };
            if original.instructions[ai].bytes != mutant.instructions[bi].bytes {
                bytes_differ = true;
                break;
            }
        }
    }

    let regions = regions_of(&edit);
    let identified = edit.deletes();
    FunctionDiff {
        func_index: original.func_index,
        original_count: original.instructions.len(),
        mutant_count: mutant.instructions.len(),
        original_start: original.start_address,
        mutant_start: mutant.start_address,
        identified_original_instructions: identified,
        bytes_differ,
        start_address_delta: mutant.start_address as i64 - original.start_address as i64,
        regions,
        edit,
        presence,
    }
}

/// Compare two dumps from the same (buggy) runtime, pairing functions by
/// module function index. Functions present on only one side are reported
/// as whole-function regions.
pub fn isolate_slow_code(
    original: &Disassembly,
    mutant: &Disassembly,
) -> Result<Vec<FunctionDiff>> {
    let orig_idx: BTreeSet<u32> = original.functions.iter().map(|f| f.func_index).collect();
    let mut_idx: BTreeSet<u32> = mutant.functions.iter().map(|f| f.func_index).collect();
    if !orig_idx.is_empty() && !mut_idx.is_empty() && orig_idx.is_disjoint(&mut_idx) {
        return Err(Error::UnpairableFunctions);
    }
    let mut out = Vec::new();
    for idx in orig_idx.union(&mut_idx) {
        let o = original.function(*idx);
        let m = mutant.function(*idx);
        let diff = match (o, m) {
            (Some(o), Some(m)) => diff_pair(o, m, FunctionPresence::Both),
            (Some(o), None) => {
                let mut d = diff_pair(o, &empty_function(*idx), FunctionPresence::OnlyOriginal);
                d.func_index = *idx;
                d
            }
            (None, Some(m)) => {
                let mut d = diff_pair(&empty_function(*idx), m, FunctionPresence::OnlyMutant);
                d.func_index = *idx;
                d
            }
            (None, None) => unreachable!(),
        };
        out.push(diff);
    }
    Ok(out)
}

/// Total identified machine instructions across all functions.
pub fn total_identified(diffs: &[FunctionDiff]) -> usize {
    diffs
        .iter()
        .map(|d| d.identified_original_instructions)
        .sum()
}
