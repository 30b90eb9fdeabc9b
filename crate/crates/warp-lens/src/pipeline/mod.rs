//! End-to-end orchestration: measure the original, generate mutants, filter
//! through functional runs, measure the qualified set, score and rank, diff
//! the top candidates' machine code, render the report.
//!
//! Timed measurements are content-addressed (module bytes + runtime
//! identity + repetition plan) in the working directory, so an interrupted
//! run resumes without re-measuring and reproduces the identical ranking.

pub mod config;

pub use config::{load_config, PipelineConfig, WORKDIR_ENV};

use crate::diff::{isolate_slow_code, FunctionDiff};
use crate::error::{Error, Result};
use crate::harness::{
    dump_machine_code, measure_execution, run_with_output, Disassembly, MeasureOptions,
    RuntimeSpec, TimingSample,
};
use crate::model::{self, InstructionModel};
use crate::mutate::{generate_all_mutants, ManifestRecord, Mutant};
use crate::report::{
    render_report, wasm_excerpt, CandidateReport, ReportBundle, RunMetadata, WasmDiffExcerpt,
};
use crate::score::{
    filter_invalid, rank_mutants, score_mutant, MutantScore, OutcomePair, ScoreRow,
};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

/// Accounting the integration tests assert against.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub mutants_generated: usize,
    pub functional_runs: usize,
    /// Recorded (non-warmup) timed invocations actually executed.
    pub timed_runs_executed: usize,
    /// Timing samples served from the working-directory cache.
    pub timed_samples_from_cache: usize,
    pub qualified: usize,
    pub disqualified: usize,
    pub unstable_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineExit {
    /// At least one candidate report was produced.
    ReportProduced,
    /// Every mutant was disqualified (the report explains why).
    NoQualifiedMutants,
}

impl PipelineExit {
    pub fn code(self) -> i32 {
        match self {
            PipelineExit::ReportProduced => 0,
            PipelineExit::NoQualifiedMutants => 2,
        }
    }
}

pub struct PipelineOutcome {
    pub exit: PipelineExit,
    pub stats: RunStats,
    pub ranking: Vec<MutantScore>,
    pub bundle: ReportBundle,
    pub out_dir: PathBuf,
}

struct MeasureCache {
    dir: PathBuf,
}

impl MeasureCache {
    fn new(work_dir: &Path) -> Result<MeasureCache> {
        let dir = work_dir.join("cache");
        std::fs::create_dir_all(&dir)?;
        Ok(MeasureCache { dir })
    }

    fn key(&self, module_bytes: &[u8], spec: &RuntimeSpec, opts: &MeasureOptions) -> PathBuf {
        let module_digest = crate::harness::sha256_hex(module_bytes);
        self.dir.join(format!(
            "{}_{}_{}x{}.json",
            module_digest,
            spec.identity_digest(),
            opts.repetitions,
            opts.warmups
        ))
    }

    fn load(&self, key: &Path) -> Option<TimingSample> {
        let text = std::fs::read_to_string(key).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn store(&self, key: &Path, sample: &TimingSample) -> Result<()> {
        std::fs::write(key, serde_json::to_string_pretty(sample).unwrap())?;
        Ok(())
    }
}

struct Measurer<'a> {
    cache: MeasureCache,
    opts: MeasureOptions,
    stats: &'a Mutex<RunStats>,
}

impl<'a> Measurer<'a> {
    fn measure(
        &self,
        spec: &RuntimeSpec,
        path: &Path,
        module_bytes: &[u8],
    ) -> Result<TimingSample> {
        let key = self.cache.key(module_bytes, spec, &self.opts);
        if let Some(sample) = self.cache.load(&key) {
            let mut stats = self.stats.lock().unwrap();
            stats.timed_samples_from_cache += 1;
            if sample.unstable {
                stats.unstable_samples += 1;
            }
            return Ok(sample);
        }
        let sample = measure_execution(spec, path, &self.opts)?;
        self.cache.store(&key, &sample)?;
        let mut stats = self.stats.lock().unwrap();
        stats.timed_runs_executed += sample.repetitions;
        if sample.unstable {
            stats.unstable_samples += 1;
        }
        Ok(sample)
    }
}

fn with_timeout(spec: &RuntimeSpec, timeout: Duration) -> RuntimeSpec {
    let mut s = spec.clone();
    s.timeout = timeout;
    s
}

/// Functional runs for all mutants on both runtimes, bounded parallelism,
/// deterministic output order.
fn functional_runs(
    mutants: &[Mutant],
    paths: &[PathBuf],
    buggy: &RuntimeSpec,
    oracle: &RuntimeSpec,
    parallelism: usize,
    stats: &Mutex<RunStats>,
) -> Result<Vec<OutcomePair>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<OutcomePair>>>> =
        Mutex::new((0..mutants.len()).map(|_| None).collect());
    let workers = parallelism.clamp(1, mutants.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= mutants.len() {
                    break;
                }
                let run = (|| -> Result<OutcomePair> {
                    let b = run_with_output(buggy, &paths[i])?;
                    let o = run_with_output(oracle, &paths[i])?;
                    Ok(OutcomePair {
                        ordinal: mutants[i].ordinal,
                        buggy: b,
                        oracle: o,
                    })
                })();
                results.lock().unwrap()[i] = Some(run);
            });
        }
    });

    let mut out = Vec::with_capacity(mutants.len());
    for slot in results.into_inner().unwrap() {
        out.push(slot.expect("worker filled every slot")?);
    }
    stats.lock().unwrap().functional_runs += out.len() * 2;
    Ok(out)
}

fn read_input_module(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| {
        Error::ConfigError(format!("cannot read input module {}: {e}", path.display()))
    })?;
    let bytes = model::to_wasm_bytes(&raw)?;
    let verdict = model::validate_module(&bytes);
    if !verdict.ok {
        return Err(Error::ConfigError(format!(
            "input module does not validate: {} (offset {:?})",
            verdict.message.unwrap_or_default(),
            verdict.offset
        )));
    }
    Ok(bytes)
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let work_dir = cfg.effective_work_dir();
    let mutants_dir = work_dir.join("mutants");
    std::fs::create_dir_all(&mutants_dir)?;

    let stats_mutex = Mutex::new(RunStats::default());
    let input_bytes = read_input_module(&cfg.input)?;
    let original_model = model::parse_module(&input_bytes)?;
    let original_path = work_dir.join("original.wasm");
    std::fs::write(&original_path, &input_bytes)?;

    let opts = MeasureOptions {
        repetitions: cfg.repetitions,
        warmups: cfg.warmups,
        instability_threshold: cfg.instability_threshold,
    };
    let measurer = Measurer {
        cache: MeasureCache::new(&work_dir)?,
        opts,
        stats: &stats_mutex,
    };

    // Functional sanity runs of the original on both runtimes; the oracle
    // digest anchors the divergence filter.
    let orig_buggy_outcome = run_with_output(&cfg.buggy, &original_path)?;
    let orig_oracle_outcome = run_with_output(&cfg.oracle, &original_path)?;
    stats_mutex.lock().unwrap().functional_runs += 2;
    for (outcome, which) in [
        (&orig_buggy_outcome, "buggy"),
        (&orig_oracle_outcome, "oracle"),
    ] {
        if !outcome.clean() {
            return Err(Error::MeasurementFailure {
                program: cfg.input.display().to_string(),
                runtime: which.into(),
                reason: format!(
                    "original program does not run cleanly (exit {}, trapped {}, timed out {})",
                    outcome.exit_status, outcome.trapped, outcome.timed_out
                ),
            });
        }
    }

    // Timed originals first: the timeout policy derives from the buggy
    // median.
    let orig_buggy = measurer.measure(&cfg.buggy, &original_path, &input_bytes)?;
    let orig_oracle = measurer.measure(&cfg.oracle, &original_path, &input_bytes)?;
    let timeout = cfg.timeout_floor.max(Duration::from_secs_f64(
        orig_buggy.summary * cfg.timeout_factor,
    ));
    let buggy = with_timeout(&cfg.buggy, timeout);
    let oracle = with_timeout(&cfg.oracle, timeout);

    // Mutant generation, persisted with the manifest.
    let set = generate_all_mutants(&original_model, &cfg.mutation)?;
    stats_mutex.lock().unwrap().mutants_generated = set.mutants.len();
    let manifest: Vec<ManifestRecord> = set.mutants.iter().map(ManifestRecord::of).collect();
    let mut manifest_text = String::new();
    let mut mutant_paths = Vec::with_capacity(set.mutants.len());
    for (m, rec) in set.mutants.iter().zip(&manifest) {
        let path = mutants_dir.join(m.file_name());
        std::fs::write(&path, &m.bytes)?;
        manifest_text.push_str(&serde_json::to_string(rec).unwrap());
        manifest_text.push('\n');
        mutant_paths.push(path);
    }
    std::fs::write(mutants_dir.join("manifest"), &manifest_text)?;

    // Functional runs, then the oracle-behavior filter.
    let outcome_pairs = functional_runs(
        &set.mutants,
        &mutant_paths,
        &buggy,
        &oracle,
        cfg.functional_parallelism,
        &stats_mutex,
    )?;
    let (qualified, disqualified) =
        filter_invalid(&outcome_pairs, &orig_oracle_outcome.stdout_digest);
    let mut reasons: HashMap<usize, String> = disqualified
        .iter()
        .map(|(ordinal, d)| (*ordinal, d.to_string()))
        .collect();

    // Timed runs for the qualified subset, strictly serialized.
    let mut scored: Vec<MutantScore> = Vec::new();
    for ordinal in &qualified {
        let m = &set.mutants[*ordinal];
        let path = &mutant_paths[*ordinal];
        let timings = (|| -> Result<(TimingSample, TimingSample)> {
            let b = measurer.measure(&buggy, path, &m.bytes)?;
            let o = measurer.measure(&oracle, path, &m.bytes)?;
            Ok((b, o))
        })();
        match timings {
            Ok((b, o)) => {
                let score = score_mutant(
                    m.ordinal,
                    (&orig_buggy, &orig_oracle),
                    (&b, &o),
                    &cfg.weights,
                )?;
                scored.push(score);
            }
            Err(Error::MeasurementFailure { reason, .. }) => {
                // Flaky under repetition; drop it rather than abort.
                reasons.insert(m.ordinal, format!("measurement failure: {reason}"));
            }
            Err(e) => return Err(e),
        }
    }
    {
        let mut stats = stats_mutex.lock().unwrap();
        stats.qualified = scored.len();
        stats.disqualified = reasons.len();
    }

    let ranking = rank_mutants(&scored);
    let rank_of: HashMap<usize, usize> = ranking
        .iter()
        .enumerate()
        .map(|(i, s)| (s.ordinal, i + 1))
        .collect();

    // Score table over every mutant.
    let score_by_ordinal: HashMap<usize, &MutantScore> =
        scored.iter().map(|s| (s.ordinal, s)).collect();
    let score_rows: Vec<ScoreRow> = set
        .mutants
        .iter()
        .map(|m| match score_by_ordinal.get(&m.ordinal) {
            Some(s) => ScoreRow {
                ordinal: m.ordinal,
                rule: m.site.rule.label().into(),
                rank: rank_of.get(&m.ordinal).copied(),
                perf_diff_ratio: Some(s.perf_diff_ratio),
                func_sim_ratio: Some(s.func_sim_ratio),
                perf_diff_score: Some(s.perf_diff_score),
                func_sim_score: Some(s.func_sim_score),
                total: Some(s.total),
                disqualified: None,
            },
            None => ScoreRow {
                ordinal: m.ordinal,
                rule: m.site.rule.label().into(),
                rank: None,
                perf_diff_ratio: None,
                func_sim_ratio: None,
                perf_diff_score: None,
                func_sim_score: None,
                total: None,
                disqualified: Some(
                    reasons
                        .get(&m.ordinal)
                        .cloned()
                        .unwrap_or_else(|| "unknown".into()),
                ),
            },
        })
        .collect();

    // Machine-code diffing for the top candidates.
    let top: Vec<&MutantScore> = ranking.iter().take(cfg.top_k).collect();
    let mut candidates = Vec::new();
    let mut mutant_dumps: Vec<(usize, Disassembly)> = Vec::new();
    let mut original_dump = Disassembly::default();
    if !top.is_empty() {
        original_dump = dump_machine_code(&buggy, &original_path)?;
        std::fs::create_dir_all(cfg.out_dir.join("mutants"))?;
        for s in &top {
            let m = &set.mutants[s.ordinal];
            let path = &mutant_paths[s.ordinal];
            let dump = dump_machine_code(&buggy, path)?;
            let diffs: Vec<FunctionDiff> = isolate_slow_code(&original_dump, &dump)?;
            let excerpt = build_excerpt(&original_model, m)?;
            std::fs::copy(path, cfg.out_dir.join("mutants").join(m.file_name()))?;
            candidates.push(CandidateReport {
                rank: rank_of[&s.ordinal],
                ordinal: s.ordinal,
                rule: m.site.rule.label().into(),
                score: (*s).clone(),
                wasm_diff: excerpt,
                machine_diffs: diffs,
                mutant_file: m.file_name(),
            });
            mutant_dumps.push((s.ordinal, dump));
        }
    }

    let stats = stats_mutex.into_inner().unwrap();
    let bundle = ReportBundle {
        metadata: RunMetadata {
            input_module: cfg.input.display().to_string(),
            buggy_runtime: cfg.buggy.name.clone(),
            oracle_runtime: cfg.oracle.name.clone(),
            weights: cfg.weights,
            repetitions: cfg.repetitions,
            mutants_generated: set.mutants.len(),
            mutants_qualified: stats.qualified,
            timestamp: Some(format!("{:?}", std::time::SystemTime::now())),
        },
        candidates,
        score_rows,
        manifest,
        original_dump,
        mutant_dumps,
    };
    render_report(&bundle, &cfg.out_dir)?;

    let exit = if bundle.candidates.is_empty() {
        PipelineExit::NoQualifiedMutants
    } else {
        PipelineExit::ReportProduced
    };
    Ok(PipelineOutcome {
        exit,
        stats,
        ranking,
        bundle,
        out_dir: cfg.out_dir.clone(),
    })
}

fn build_excerpt(original: &InstructionModel, m: &Mutant) -> Result<WasmDiffExcerpt> {
    let mutant_model = model::parse_module(&m.bytes)?;
    let of = original
        .function_by_index(m.site.func_index)
        .ok_or_else(|| Error::ConfigError("mutant function index out of range".into()))?;
    let mf = mutant_model
        .function_by_index(m.site.func_index)
        .ok_or_else(|| Error::ConfigError("mutant function index out of range".into()))?;
    Ok(wasm_excerpt(of, mf, &m.site))
}

/// Re-rank from persisted timings without running anything. Fails if any
/// qualified timing is missing from the cache.
pub fn rescore(cfg: &PipelineConfig) -> Result<Vec<ScoreRow>> {
    cfg.validate()?;
    let work_dir = cfg.effective_work_dir();
    let input_bytes = read_input_module(&cfg.input)?;
    let original_model = model::parse_module(&input_bytes)?;
    let set = generate_all_mutants(&original_model, &cfg.mutation)?;

    let opts = MeasureOptions {
        repetitions: cfg.repetitions,
        warmups: cfg.warmups,
        instability_threshold: cfg.instability_threshold,
    };
    let cache = MeasureCache::new(&work_dir)?;
    let load = |bytes: &[u8], spec: &RuntimeSpec| -> Result<TimingSample> {
        let key = cache.key(bytes, spec, &opts);
        cache.load(&key).ok_or_else(|| {
            Error::ConfigError(format!(
                "no persisted timing at {} — run the pipeline first",
                key.display()
            ))
        })
    };
    let orig_buggy = load(&input_bytes, &cfg.buggy)?;
    let orig_oracle = load(&input_bytes, &cfg.oracle)?;

    let mut scored = Vec::new();
    let mut missing = Vec::new();
    for m in &set.mutants {
        match (load(&m.bytes, &cfg.buggy), load(&m.bytes, &cfg.oracle)) {
            (Ok(b), Ok(o)) => scored.push(score_mutant(
                m.ordinal,
                (&orig_buggy, &orig_oracle),
                (&b, &o),
                &cfg.weights,
            )?),
            _ => missing.push(m.ordinal),
        }
    }
    let ranking = rank_mutants(&scored);
    let rank_of: HashMap<usize, usize> = ranking
        .iter()
        .enumerate()
        .map(|(i, s)| (s.ordinal, i + 1))
        .collect();
    let by_ordinal: HashMap<usize, &MutantScore> = scored.iter().map(|s| (s.ordinal, s)).collect();
    Ok(set
        .mutants
        .iter()
        .map(|m| match by_ordinal.get(&m.ordinal) {
            Some(s) => ScoreRow {
                ordinal: m.ordinal,
                rule: m.site.rule.label().into(),
                rank: rank_of.get(&m.ordinal).copied(),
                perf_diff_ratio: Some(s.perf_diff_ratio),
                func_sim_ratio: Some(s.func_sim_ratio),
                perf_diff_score: Some(s.perf_diff_score),
                func_sim_score: Some(s.func_sim_score),
                total: Some(s.total),
                disqualified: None,
            },
            None => ScoreRow {
                ordinal: m.ordinal,
                rule: m.site.rule.label().into(),
                rank: None,
                perf_diff_ratio: None,
                func_sim_ratio: None,
                perf_diff_score: None,
                func_sim_score: None,
                total: None,
                disqualified: Some("no persisted timing".into()),
            },
        })
        .collect())
}
