//! Orchestrator-level behavior: measurement budget accounting, cache-backed
//! resumability, degenerate-input exit codes, and the CLI surface.

mod common;

use common::{bin_path, MockSetup};
use std::process::Command;
use warp_lens::pipeline::{load_config, run_pipeline, PipelineExit};

const LOOP_MODULE: &str = r#"(module (func (export "_start") (result i64)
    (local $i i64) (local $acc i64)
    i64.const 300
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

#[test]
fn budget_accounting_and_resumability() {
    let fx = MockSetup::new();
    fx.write("input.wat", LOOP_MODULE);
    let text = std::fs::read_to_string(fx.write_pipeline_config("input.wat", "")).unwrap();
    let cfg = load_config(&text, &[], fx.path()).unwrap();

    let first = run_pipeline(&cfg).unwrap();
    assert_eq!(first.exit, PipelineExit::ReportProduced);
    let s = &first.stats;
    // Timed budget: (1 original + qualified mutants) x 2 runtimes x reps.
    assert_eq!(
        s.timed_runs_executed,
        (1 + s.qualified) * 2 * cfg.repetitions,
        "timed-run budget violated: {s:?}"
    );
    assert_eq!(s.timed_samples_from_cache, 0);
    // Functional budget: original once per runtime plus every mutant on
    // both runtimes.
    assert_eq!(s.functional_runs, 2 + 2 * s.mutants_generated);

    // Second run in the same working directory: every timing comes from
    // the cache and the ranking is identical.
    let second = run_pipeline(&cfg).unwrap();
    assert_eq!(second.stats.timed_runs_executed, 0);
    assert_eq!(
        second.stats.timed_samples_from_cache,
        (1 + second.stats.qualified) * 2
    );
    let order = |r: &[warp_lens::score::MutantScore]| -> Vec<usize> {
        r.iter().map(|x| x.ordinal).collect()
    };
    assert_eq!(order(&first.ranking), order(&second.ranking));
    for (a, b) in first.ranking.iter().zip(&second.ranking) {
        assert_eq!(a.total, b.total);
    }
}

#[test]
fn module_without_mutable_instructions_exits_2() {
    let fx = MockSetup::new();
    // Only control instructions: nothing to mutate.
    fx.write(
        "input.wat",
        r#"(module (func (export "_start") (block (nop))))"#,
    );
    let text = std::fs::read_to_string(fx.write_pipeline_config("input.wat", "")).unwrap();
    let cfg = load_config(&text, &[], fx.path()).unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    assert_eq!(outcome.exit, PipelineExit::NoQualifiedMutants);
    assert_eq!(outcome.exit.code(), 2);
    assert_eq!(outcome.stats.mutants_generated, 0);
    // The report still exists and explains.
    let report = std::fs::read_to_string(fx.path().join("out/report.txt")).unwrap();
    assert!(report.contains("no qualified mutant found"));
}

#[test]
fn run_subcommand_exit_codes() {
    let fx = MockSetup::new();
    fx.write("input.wat", LOOP_MODULE);
    let config = fx.write_pipeline_config("input.wat", "");

    let status = Command::new(bin_path())
        .args(["run", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(fx.path().join("out/report.html").exists());

    // Operational failure (bad config path) exits 1.
    let status = Command::new(bin_path())
        .args(["run", "--config", "/nonexistent.conf"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn workdir_env_override_is_honored() {
    let fx = MockSetup::new();
    fx.write("input.wat", LOOP_MODULE);
    let config = fx.write_pipeline_config("input.wat", "");
    let custom_work = fx.path().join("custom-work");

    let status = Command::new(bin_path())
        .args(["run", "--config"])
        .arg(&config)
        .env("WARP_LENS_WORKDIR", &custom_work)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(custom_work.join("mutants/manifest").exists());
    assert!(custom_work.join("cache").exists());
    assert!(!fx.path().join("out/work").exists());
}

#[test]
fn mutate_then_score_roundtrip() {
    let fx = MockSetup::new();
    fx.write("input.wat", LOOP_MODULE);
    let config = fx.write_pipeline_config("input.wat", "");

    // mutate: generation only, no measurements.
    let out = Command::new(bin_path())
        .args(["mutate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(fx.path().join("out/work/mutants/manifest")).unwrap();
    assert!(manifest.lines().count() > 10);
    let first: serde_json::Value = serde_json::from_str(manifest.lines().next().unwrap()).unwrap();
    for key in [
        "ordinal",
        "rule",
        "func_index",
        "offset",
        "original",
        "mutated",
    ] {
        assert!(first.get(key).is_some(), "manifest missing {key}");
    }

    // score before any measurement: nothing persisted for the original,
    // so the subcommand refuses with an explanation.
    let out = Command::new(bin_path())
        .args(["score", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no persisted timing"));

    // Full run, then score reproduces the persisted ranking.
    assert!(Command::new(bin_path())
        .args(["run", "--config"])
        .arg(&config)
        .status()
        .unwrap()
        .success());
    let out = Command::new(bin_path())
        .args(["score", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(out.status.success());
    let rescored = String::from_utf8_lossy(&out.stdout);
    let scores_file = std::fs::read_to_string(fx.path().join("out/scores.jsonl")).unwrap();
    let rank_of = |text: &str| -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = text
            .lines()
            .filter_map(|l| serde_json::from_str::<serde_json::Value>(l).ok())
            .filter_map(|row| {
                let rank = row.get("rank")?.as_u64()?;
                Some((row.get("ordinal")?.as_u64()?, rank))
            })
            .collect();
        v.sort();
        v
    };
    assert_eq!(rank_of(&rescored), rank_of(&scores_file));
}

#[test]
fn diff_subcommand_consumes_dump_files() {
    let fx = MockSetup::new();
    let orig = "\
# warp-lens-disasm v1
func\t0\t0\tfunc0
0\t0\t55\tpush\t%rbp
0\t1\t01\tdiv_expand\t-
0\t2\t02\tdiv_expand\t-
0\t3\tc3\tret\t-
";
    let mutant = "\
# warp-lens-disasm v1
func\t0\t0\tfunc0
0\t0\t55\tpush\t%rbp
0\t1\t2b\tsub\t-
0\t2\tc3\tret\t-
";
    let a = fx.write("orig.dis", orig);
    let b = fx.write("mut.dis", mutant);
    let out = Command::new(bin_path())
        .arg("diff")
        .arg(&a)
        .arg(&b)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"identified\":2"), "{text}");
    assert!(text.contains("total identified original-side instructions: 2"));
}

#[test]
fn validate_reduction_subcommand_exit_status() {
    let fx = MockSetup::new();
    fx.write("input.wat", LOOP_MODULE);
    let config = fx.write_pipeline_config("input.wat", "");
    let original = fx.path().join("input.wat");
    let loopless = fx.write(
        "reduced.wat",
        r#"(module (func (export "_start") (result i64) i64.const 900))"#,
    );

    // Identity reduction: exit 0.
    let status = Command::new(bin_path())
        .args(["validate-reduction", "--config"])
        .arg(&config)
        .arg(&original)
        .arg(&original)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Loop-deleted candidate: fails check 1, exit nonzero.
    let out = Command::new(bin_path())
        .args(["validate-reduction", "--config"])
        .arg(&config)
        .arg(&original)
        .arg(&loopless)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"check_buggy_time\": false"), "{text}");
}

#[test]
fn wat_and_wasm_inputs_both_accepted() {
    let fx = MockSetup::new();
    let bytes = wat::parse_str(LOOP_MODULE).unwrap();
    fx.write("input.wasm", &bytes);
    let config = fx.write_pipeline_config("input.wasm", "out = out-bin\nworkdir = work-bin");
    let text = std::fs::read_to_string(&config).unwrap();
    let cfg = load_config(&text, &[], fx.path()).unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    assert_eq!(outcome.exit, PipelineExit::ReportProduced);
}

#[test]
fn top_k_bounds_candidate_count() {
    let fx = MockSetup::new();
    fx.write("input.wat", LOOP_MODULE);
    let config = fx.write_pipeline_config("input.wat", "");
    let text = std::fs::read_to_string(&config).unwrap();
    let overrides = vec![("top-k".to_string(), "1".to_string())];
    let cfg = load_config(&text, &overrides, fx.path()).unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    assert_eq!(outcome.bundle.candidates.len(), 1);
    assert_eq!(outcome.bundle.candidates[0].rank, 1);
    // Exactly one mutant dump accompanies the one candidate.
    assert_eq!(outcome.bundle.mutant_dumps.len(), 1);
}
