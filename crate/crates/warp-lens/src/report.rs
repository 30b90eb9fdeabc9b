//! Report rendering: a side-by-side original/mutant view of the Wasm-level
//! edit and the machine-code regions it exposes, plus the score table and
//! raw dumps. Text and HTML output are byte-deterministic for identical
//! bundles; wall-clock metadata goes to run.log only.

use crate::diff::{EditKind, FunctionDiff, FunctionDiffSummary};
use crate::error::{Error, Result};
use crate::harness::Disassembly;
use crate::model::FunctionBody;
use crate::mutate::{ManifestRecord, MutationSite};
use crate::score::{MutantScore, ScoreRow, ScoreWeights};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct RunMetadata {
    pub input_module: String,
    pub buggy_runtime: String,
    pub oracle_runtime: String,
    pub weights: ScoreWeights,
    pub repetitions: usize,
    pub mutants_generated: usize,
    pub mutants_qualified: usize,
    /// Written to run.log only, never into the report body.
    pub timestamp: Option<String>,
}

/// One line of a side-by-side Wasm excerpt.
#[derive(Debug, Clone)]
pub struct ExcerptLine {
    /// Function-relative instruction offset.
    pub offset: usize,
    pub text: String,
    pub highlighted: bool,
}

#[derive(Debug, Clone)]
pub struct WasmDiffExcerpt {
    pub func_index: u32,
    pub original: Vec<ExcerptLine>,
    pub mutant: Vec<ExcerptLine>,
}

/// Build the ±3-instruction excerpt around a mutation site. `mutant_body`
/// is the re-parsed mutant function.
pub fn wasm_excerpt(
    original: &FunctionBody,
    mutant: &FunctionBody,
    site: &MutationSite,
) -> WasmDiffExcerpt {
    const CONTEXT: usize = 3;
    let orig_len = original.instructions.len();
    let mut_len = mutant.instructions.len();
    let span = site.span_len;
    // Replacement length follows from the length delta.
    let replacement = (mut_len + span).saturating_sub(orig_len);

    let lines = |body: &FunctionBody, span_len: usize| -> Vec<ExcerptLine> {
        let start = site.offset.saturating_sub(CONTEXT);
        let end = (site.offset + span_len + CONTEXT).min(body.instructions.len());
        body.instructions[start..end]
            .iter()
            .map(|r| ExcerptLine {
                offset: r.offset,
                text: r.instr.text(),
                highlighted: r.offset >= site.offset && r.offset < site.offset + span_len,
            })
            .collect()
    };
    WasmDiffExcerpt {
        func_index: site.func_index,
        original: lines(original, span),
        mutant: lines(mutant, replacement),
    }
}

#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub rank: usize,
    pub ordinal: usize,
    pub rule: String,
    pub score: MutantScore,
    pub wasm_diff: WasmDiffExcerpt,
    pub machine_diffs: Vec<FunctionDiff>,
    pub mutant_file: String,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub metadata: RunMetadata,
    pub candidates: Vec<CandidateReport>,
    pub score_rows: Vec<ScoreRow>,
    pub manifest: Vec<ManifestRecord>,
    pub original_dump: Disassembly,
    /// (ordinal, dump) for each diffed candidate.
    pub mutant_dumps: Vec<(usize, Disassembly)>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    candidate_rank: usize,
    mutant_ordinal: usize,
    #[serde(flatten)]
    diff: &'a FunctionDiffSummary,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::OutputUnwritable {
        path: path.to_path_buf(),
        source,
    })
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("serializable row"));
        out.push('\n');
    }
    out
}

/// Render every artifact into `out_dir`:
/// report.txt, report.html, scores.jsonl, summary.jsonl, dumps/, mutants/.
pub fn render_report(bundle: &ReportBundle, out_dir: &Path) -> Result<()> {
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|source| Error::OutputUnwritable {
            path: p.to_path_buf(),
            source,
        })
    };
    mkdir(out_dir)?;
    mkdir(&out_dir.join("dumps"))?;
    mkdir(&out_dir.join("mutants"))?;

    write_file(&out_dir.join("report.txt"), &render_text(bundle))?;
    write_file(&out_dir.join("report.html"), &render_html(bundle))?;
    write_file(
        &out_dir.join("scores.jsonl"),
        &jsonl(bundle.score_rows.iter()),
    )?;

    let mut summary_rows = Vec::new();
    for cand in &bundle.candidates {
        for d in &cand.machine_diffs {
            summary_rows.push((cand.rank, cand.ordinal, FunctionDiffSummary::of(d)));
        }
    }
    write_file(
        &out_dir.join("summary.jsonl"),
        &jsonl(summary_rows.iter().map(|(rank, ordinal, diff)| SummaryRow {
            candidate_rank: *rank,
            mutant_ordinal: *ordinal,
            diff,
        })),
    )?;

    write_file(
        &out_dir.join("mutants").join("manifest"),
        &jsonl(bundle.manifest.iter()),
    )?;
    write_file(
        &out_dir.join("dumps").join("original.dis"),
        &bundle.original_dump.serialize_normalized(),
    )?;
    for (ordinal, dump) in &bundle.mutant_dumps {
        write_file(
            &out_dir
                .join("dumps")
                .join(format!("mutant_{ordinal:04}.dis")),
            &dump.serialize_normalized(),
        )?;
    }
    if let Some(ts) = &bundle.metadata.timestamp {
        write_file(&out_dir.join("run.log"), &format!("completed: {ts}\n"))?;
    }
    Ok(())
}

fn render_text(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let meta = &bundle.metadata;
    out.push_str("warp-lens slow-code report\n");
    out.push_str("==========================\n\n");
    let _ = writeln!(out, "input module:   {}", meta.input_module);
    let _ = writeln!(out, "buggy runtime:  {}", meta.buggy_runtime);
    let _ = writeln!(out, "oracle runtime: {}", meta.oracle_runtime);
    let _ = writeln!(
        out,
        "weights:        alpha={} beta={}",
        meta.weights.alpha, meta.weights.beta
    );
    let _ = writeln!(out, "repetitions:    {}", meta.repetitions);
    let _ = writeln!(
        out,
        "mutants:        {} generated, {} qualified",
        meta.mutants_generated, meta.mutants_qualified
    );
    out.push('\n');

    if bundle.candidates.is_empty() {
        out.push_str("no qualified mutant found: every mutant was disqualified.\n");
        out.push_str("disqualification reasons:\n");
        for row in &bundle.score_rows {
            if let Some(reason) = &row.disqualified {
                let _ = writeln!(
                    out,
                    "  mutant {:04} ({}): {}",
                    row.ordinal, row.rule, reason
                );
            }
        }
        return out;
    }

    for cand in &bundle.candidates {
        let _ = writeln!(
            out,
            "== candidate {}: mutant {:04} ({}) ==",
            cand.rank, cand.ordinal, cand.rule
        );
        let s = &cand.score;
        let _ = writeln!(
            out,
            "score: total={:.6}  perf_diff={:.6}  func_sim={:.6}",
            s.total, s.perf_diff_score, s.func_sim_score
        );
        let _ = writeln!(
            out,
            "ratios: Ratio(B)={:.4}  Ratio(O)={:.4}",
            s.perf_diff_ratio, s.func_sim_ratio
        );
        let _ = writeln!(out, "mutant module: mutants/{}", cand.mutant_file);
        out.push('\n');

        let _ = writeln!(out, "wasm diff (function {}):", cand.wasm_diff.func_index);
        render_excerpt_text(&mut out, &cand.wasm_diff);
        out.push('\n');

        for d in &cand.machine_diffs {
            if !d.noteworthy() {
                continue;
            }
            let _ = writeln!(
                out,
                "machine diff, function {}: original {} instrs @{:#x}, mutant {} instrs @{:#x}, lcs {}, identified {}",
                d.func_index,
                d.original_count,
                d.original_start,
                d.mutant_count,
                d.mutant_start,
                d.edit.lcs_length,
                d.identified_original_instructions
            );
            if d.start_address_delta != 0 {
                let _ = writeln!(
                    out,
                    "  ! start address shifted by {} bytes ({:#x} -> {:#x})",
                    d.start_address_delta, d.original_start, d.mutant_start
                );
            }
            if d.bytes_differ {
                out.push_str(
                    "  ! opcode-identical positions differ in encoded bytes (constant/data difference)\n",
                );
            }
            if d.edit.is_identity() && d.regions.is_empty() {
                out.push_str("  opcode sequences are identical\n");
            }
            for region in &d.regions {
                let _ = writeln!(out, "  region (ops {}..{}):", region.start, region.end);
                for op in &d.edit.ops[region.context_start..region.context_end] {
                    let marker = match op.kind {
                        EditKind::Keep => ' ',
                        EditKind::DeleteFromOriginal => '-',
                        EditKind::InsertFromMutant => '+',
                    };
                    let _ = writeln!(out, "    {} {:#06x}  {}", marker, op.address, op.mnemonic);
                }
            }
            out.push('\n');
        }
    }
    out
}

fn render_excerpt_text(out: &mut String, excerpt: &WasmDiffExcerpt) {
    let width = excerpt
        .original
        .iter()
        .map(|l| l.text.len() + 8)
        .max()
        .unwrap_or(16)
        .max(16);
    let rows = excerpt.original.len().max(excerpt.mutant.len());
    for i in 0..rows {
        let left = excerpt.original.get(i);
        let right = excerpt.mutant.get(i);
        let fmt = |l: Option<&ExcerptLine>| -> (char, String) {
            match l {
                Some(line) => (
                    if line.highlighted { '>' } else { ' ' },
                    format!("{:3} | {}", line.offset, line.text),
                ),
                None => (' ', String::new()),
            }
        };
        let (lm, lt) = fmt(left);
        let (rm, rt) = fmt(right);
        let _ = writeln!(out, "  {lm} {lt:width$}  {rm} {rt}");
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn render_html(bundle: &ReportBundle) -> String {
    let meta = &bundle.metadata;
    let mut b = String::new();
    b.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n");
    b.push_str("<title>warp-lens slow-code report</title>\n<style>\n");
    b.push_str(
        "body{font-family:monospace;margin:2em;background:#fafafa;color:#222}\n\
         table{border-collapse:collapse}\n\
         td,th{padding:1px 10px;vertical-align:top;white-space:pre}\n\
         .del{background:#ffd7d5}\n\
         .ins{background:#d7f8d7}\n\
         .hl-orig{background:#ffd7d5;font-weight:bold}\n\
         .hl-mut{background:#d7f8d7;font-weight:bold}\n\
         .flag{color:#a40000;font-weight:bold}\n\
         h2{border-bottom:1px solid #ccc}\n\
         .meta td{padding:0 10px 0 0}\n",
    );
    b.push_str("</style></head><body>\n<h1>warp-lens slow-code report</h1>\n");
    b.push_str("<table class=\"meta\">\n");
    for (k, v) in [
        ("input module", meta.input_module.clone()),
        ("buggy runtime", meta.buggy_runtime.clone()),
        ("oracle runtime", meta.oracle_runtime.clone()),
        (
            "weights",
            format!("alpha={} beta={}", meta.weights.alpha, meta.weights.beta),
        ),
        ("repetitions", meta.repetitions.to_string()),
        (
            "mutants",
            format!(
                "{} generated, {} qualified",
                meta.mutants_generated, meta.mutants_qualified
            ),
        ),
    ] {
        let _ = writeln!(b, "<tr><td>{k}</td><td>{}</td></tr>", escape(&v));
    }
    b.push_str("</table>\n");

    if bundle.candidates.is_empty() {
        b.push_str("<h2>no qualified mutant found</h2>\n<ul>\n");
        for row in &bundle.score_rows {
            if let Some(reason) = &row.disqualified {
                let _ = writeln!(
                    b,
                    "<li>mutant {:04} ({}): {}</li>",
                    row.ordinal,
                    escape(&row.rule),
                    escape(reason)
                );
            }
        }
        b.push_str("</ul>\n</body></html>\n");
        return b;
    }

    for cand in &bundle.candidates {
        let _ = writeln!(
            b,
            "<h2>candidate {}: mutant {:04} ({})</h2>",
            cand.rank,
            cand.ordinal,
            escape(&cand.rule)
        );
        let s = &cand.score;
        let _ = writeln!(
            b,
            "<p>score total={:.6}, perf_diff={:.6}, func_sim={:.6}; Ratio(B)={:.4}, Ratio(O)={:.4}</p>",
            s.total, s.perf_diff_score, s.func_sim_score, s.perf_diff_ratio, s.func_sim_ratio
        );

        let _ = writeln!(
            b,
            "<h3>wasm bytecode (function {})</h3>",
            cand.wasm_diff.func_index
        );
        b.push_str("<table><tr><th>original</th><th>mutant</th></tr>\n");
        let rows = cand
            .wasm_diff
            .original
            .len()
            .max(cand.wasm_diff.mutant.len());
        for i in 0..rows {
            let cell = |l: Option<&ExcerptLine>, class: &str| -> String {
                match l {
                    Some(line) if line.highlighted => format!(
                        "<td class=\"{class}\">{:3} | {}</td>",
                        line.offset,
                        escape(&line.text)
                    ),
                    Some(line) => format!("<td>{:3} | {}</td>", line.offset, escape(&line.text)),
                    None => "<td></td>".into(),
                }
            };
            let _ = writeln!(
                b,
                "<tr>{}{}</tr>",
                cell(cand.wasm_diff.original.get(i), "hl-orig"),
                cell(cand.wasm_diff.mutant.get(i), "hl-mut")
            );
        }
        b.push_str("</table>\n");

        for d in &cand.machine_diffs {
            if !d.noteworthy() {
                continue;
            }
            let _ = writeln!(
                b,
                "<h3>machine code (function {}): original {} instrs @{:#x}, mutant {} instrs @{:#x}, identified {}</h3>",
                d.func_index,
                d.original_count,
                d.original_start,
                d.mutant_count,
                d.mutant_start,
                d.identified_original_instructions
            );
            if d.start_address_delta != 0 {
                let _ = writeln!(
                    b,
                    "<p class=\"flag\">start address shifted by {} bytes ({:#x} &rarr; {:#x})</p>",
                    d.start_address_delta, d.original_start, d.mutant_start
                );
            }
            if d.bytes_differ {
                b.push_str(
                    "<p class=\"flag\">opcode-identical positions differ in encoded bytes (constant/data difference)</p>\n",
                );
            }
            if d.edit.is_identity() && d.regions.is_empty() {
                b.push_str("<p>opcode sequences are identical</p>\n");
            }
            for region in &d.regions {
                b.push_str("<table>\n");
                for op in &d.edit.ops[region.context_start..region.context_end] {
                    let (class, marker) = match op.kind {
                        EditKind::Keep => ("", " "),
                        EditKind::DeleteFromOriginal => ("del", "-"),
                        EditKind::InsertFromMutant => ("ins", "+"),
                    };
                    let _ = writeln!(
                        b,
                        "<tr class=\"{class}\"><td>{marker}</td><td>{:#06x}</td><td>{}</td></tr>",
                        op.address,
                        escape(&op.mnemonic)
                    );
                }
                b.push_str("</table><br>\n");
            }
        }
    }
    b.push_str("</body></html>\n");
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutate::{MutationRule, MutationSite};

    fn mini_bundle(candidates: Vec<CandidateReport>, rows: Vec<ScoreRow>) -> ReportBundle {
        ReportBundle {
            metadata: RunMetadata {
                input_module: "m.wasm".into(),
                buggy_runtime: "buggy".into(),
                oracle_runtime: "oracle".into(),
                weights: ScoreWeights::default(),
                repetitions: 5,
                mutants_generated: 2,
                mutants_qualified: candidates.len(),
                timestamp: None,
            },
            candidates,
            score_rows: rows,
            manifest: vec![],
            original_dump: Disassembly::default(),
            mutant_dumps: vec![],
        }
    }

    fn sample_candidate() -> CandidateReport {
        use crate::diff::isolate_slow_code;
        use crate::harness::{DisassembledFunction, MachineInstr};
        let mk = |mnems: &[&str]| Disassembly {
            functions: vec![DisassembledFunction {
                func_index: 0,
                symbol: "func0".into(),
                start_address: 0,
                instructions: mnems
                    .iter()
                    .enumerate()
                    .map(|(i, m)| MachineInstr {
                        address: i as u64,
                        bytes: vec![i as u8],
                        mnemonic: m.to_string(),
                        operands: String::new(),
                    })
                    .collect(),
            }],
        };
        let diffs = isolate_slow_code(
            &mk(&["push", "div_expand", "div_expand", "ret"]),
            &mk(&["push", "sub", "ret"]),
        )
        .unwrap();
        CandidateReport {
            rank: 1,
            ordinal: 17,
            rule: "rule2".into(),
            score: MutantScore {
                ordinal: 17,
                perf_diff_ratio: 5.08,
                func_sim_ratio: 1.0,
                perf_diff_score: 0.983,
                func_sim_score: 1.0,
                total: 0.9915,
            },
            wasm_diff: WasmDiffExcerpt {
                func_index: 0,
                original: vec![ExcerptLine {
                    offset: 10,
                    text: "i64.div_u".into(),
                    highlighted: true,
                }],
                mutant: vec![ExcerptLine {
                    offset: 10,
                    text: "i64.sub".into(),
                    highlighted: true,
                }],
            },
            machine_diffs: diffs,
            mutant_file: "mutant_0017_rule2.wasm".into(),
        }
    }

    #[test]
    fn deterministic_rendering() {
        let b = mini_bundle(vec![sample_candidate()], vec![]);
        assert_eq!(render_text(&b), render_text(&b));
        assert_eq!(render_html(&b), render_html(&b));
        let text = render_text(&b);
        assert!(text.contains("candidate 1: mutant 0017 (rule2)"));
        assert!(text.contains("original 4 instrs @0x0, mutant 3 instrs @0x0"));
        assert!(text.contains("- 0x0001  div_expand"));
        assert!(text.contains("+ 0x0001  sub"));
        let html = render_html(&b);
        assert!(html.contains("class=\"del\""));
        assert!(html.contains("class=\"ins\""));
    }

    #[test]
    fn empty_bundle_lists_reasons() {
        let rows = vec![ScoreRow {
            ordinal: 0,
            rule: "rule1".into(),
            rank: None,
            perf_diff_ratio: None,
            func_sim_ratio: None,
            perf_diff_score: None,
            func_sim_score: None,
            total: None,
            disqualified: Some("timeout on buggy runtime".into()),
        }];
        let b = mini_bundle(vec![], rows);
        let text = render_text(&b);
        assert!(text.contains("no qualified mutant found"));
        assert!(text.contains("timeout on buggy runtime"));
    }

    #[test]
    fn render_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let b = mini_bundle(vec![sample_candidate()], vec![]);
        render_report(&b, dir.path()).unwrap();
        for f in [
            "report.txt",
            "report.html",
            "scores.jsonl",
            "summary.jsonl",
            "mutants/manifest",
            "dumps/original.dis",
        ] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        // Determinism on disk: render twice, byte-identical.
        let dir2 = tempfile::tempdir().unwrap();
        render_report(&b, dir2.path()).unwrap();
        for f in ["report.txt", "report.html", "scores.jsonl", "summary.jsonl"] {
            assert_eq!(
                std::fs::read(dir.path().join(f)).unwrap(),
                std::fs::read(dir2.path().join(f)).unwrap(),
                "{f} not deterministic"
            );
        }
    }

    #[test]
    fn excerpt_window_and_highlight() {
        let bytes = wat::parse_str(
            "(module (func (result i32)
                i32.const 1 i32.const 2 i32.add
                i32.const 3 i32.add
                i32.const 4 i32.add
                i32.const 5 i32.add))",
        )
        .unwrap();
        let model = crate::model::parse_module(&bytes).unwrap();
        let site = MutationSite {
            func_index: 0,
            offset: 4,
            span_len: 1,
            rule: MutationRule::OperatorSubst,
            fused: false,
        };
        // Mutant: same shape, offset 4 replaced (i32.add -> i32.sub).
        let mutant_bytes = wat::parse_str(
            "(module (func (result i32)
                i32.const 1 i32.const 2 i32.add
                i32.const 3 i32.sub
                i32.const 4 i32.add
                i32.const 5 i32.add))",
        )
        .unwrap();
        let mutant = crate::model::parse_module(&mutant_bytes).unwrap();
        let ex = wasm_excerpt(&model.functions[0], &mutant.functions[0], &site);
        assert_eq!(ex.original.first().unwrap().offset, 1);
        assert_eq!(ex.original.last().unwrap().offset, 7);
        let hl: Vec<usize> = ex
            .original
            .iter()
            .filter(|l| l.highlighted)
            .map(|l| l.offset)
            .collect();
        assert_eq!(hl, vec![4]);
        let hl_m: Vec<&str> = ex
            .mutant
            .iter()
            .filter(|l| l.highlighted)
            .map(|l| l.text.as_str())
            .collect();
        assert_eq!(hl_m, vec!["i32.sub"]);
    }
}
