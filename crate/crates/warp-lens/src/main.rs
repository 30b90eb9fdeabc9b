use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use warp_lens::harness::PSEUDO_TIME_MARKER;
use warp_lens::pipeline::{load_config, run_pipeline, PipelineConfig};
use warp_lens::{diff, harness, mock, model, mutate, pipeline, reduction};

#[derive(Parser)]
#[command(
    name = "warp-lens",
    about = "Isolate the machine-code slow paths behind Wasm runtime performance issues",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct ConfigArgs {
    /// Pipeline configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Input Wasm module (.wasm or .wat); overrides the config's `input`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Performance-difference weight; overrides `alpha`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Functional-similarity weight; overrides `beta`.
    #[arg(long)]
    beta: Option<f64>,
    /// Timed repetitions per measurement; overrides `reps`.
    #[arg(long)]
    reps: Option<usize>,
    /// Candidates forwarded to machine-code diffing; overrides `top-k`.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    /// Mutant generation ceiling; overrides `mutant-cap`.
    #[arg(long = "mutant-cap")]
    mutant_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: mutate, measure, select, diff, report.
    Run(ConfigArgs),
    /// Generate and persist mutants only.
    Mutate(ConfigArgs),
    /// Re-rank from timings persisted by an earlier run.
    Score(ConfigArgs),
    /// Diff two machine-code dump files and print the per-function summary.
    Diff { original: PathBuf, mutant: PathBuf },
    /// Check that a reduced module preserves the performance issue.
    ValidateReduction {
        #[command(flatten)]
        config: ConfigArgs,
        /// Original bug-inducing module.
        original: PathBuf,
        /// Candidate reduced module.
        reduced: PathBuf,
        /// Log-symmetric tolerance factor for both checks.
        #[arg(long, default_value_t = 2.0)]
        tolerance: f64,
    },
    /// Execute a module on the built-in mock runtime.
    MockRun {
        /// Cost model file (omit for the uniform model).
        #[arg(long = "cost-model")]
        cost_model: Option<PathBuf>,
        /// Entry export; defaults to `_start` or the sole exported function.
        #[arg(long)]
        entry: Option<String>,
        /// Print the synthesized machine-code listing instead of executing.
        #[arg(long)]
        dump: bool,
        module: PathBuf,
    },
}

fn overrides_of(args: &ConfigArgs) -> Vec<(String, String)> {
    let mut kv = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.push((k.to_string(), v));
        }
    };
    push(
        "input",
        args.input.as_ref().map(|p| p.display().to_string()),
    );
    push("out", args.out.as_ref().map(|p| p.display().to_string()));
    push("alpha", args.alpha.map(|v| v.to_string()));
    push("beta", args.beta.map(|v| v.to_string()));
    push("reps", args.reps.map(|v| v.to_string()));
    push("top-k", args.top_k.map(|v| v.to_string()));
    push("mutant-cap", args.mutant_cap.map(|v| v.to_string()));
    kv
}

fn load(args: &ConfigArgs) -> Result<PipelineConfig, warp_lens::Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        warp_lens::Error::ConfigError(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| std::path::Path::new("."))
        .to_path_buf();
    load_config(&text, &overrides_of(args), &dir)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("warp-lens: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, warp_lens::Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let outcome = run_pipeline(&cfg)?;
            let s = &outcome.stats;
            eprintln!(
                "mutants: {} generated, {} qualified, {} disqualified",
                s.mutants_generated, s.qualified, s.disqualified
            );
            eprintln!(
                "runs: {} functional, {} timed executed, {} timed from cache",
                s.functional_runs, s.timed_runs_executed, s.timed_samples_from_cache
            );
            eprintln!("report: {}", outcome.out_dir.join("report.txt").display());
            Ok(ExitCode::from(outcome.exit.code() as u8))
        }
        Command::Mutate(args) => {
            let cfg = load(&args)?;
            let bytes = std::fs::read(&cfg.input)?;
            let bytes = model::to_wasm_bytes(&bytes)?;
            let parsed = model::parse_module(&bytes)?;
            let set = mutate::generate_all_mutants(&parsed, &cfg.mutation)?;
            let dir = cfg.effective_work_dir().join("mutants");
            std::fs::create_dir_all(&dir)?;
            let mut manifest = String::new();
            for m in &set.mutants {
                std::fs::write(dir.join(m.file_name()), &m.bytes)?;
                manifest.push_str(&serde_json::to_string(&mutate::ManifestRecord::of(m)).unwrap());
                manifest.push('\n');
            }
            std::fs::write(dir.join("manifest"), &manifest)?;
            println!(
                "{} mutants ({} sites, {} duplicates dropped{}) -> {}",
                set.mutants.len(),
                set.site_count,
                set.duplicates,
                if set.truncated { ", capped" } else { "" },
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Score(args) => {
            let cfg = load(&args)?;
            let rows = pipeline::rescore(&cfg)?;
            for row in &rows {
                println!("{}", serde_json::to_string(row).unwrap());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Diff { original, mutant } => {
            let parse = |p: &PathBuf| -> Result<harness::Disassembly, warp_lens::Error> {
                let text = std::fs::read_to_string(p)?;
                harness::disasm::parse_any(&text)
            };
            let diffs = diff::isolate_slow_code(&parse(&original)?, &parse(&mutant)?)?;
            for d in &diffs {
                println!(
                    "{}",
                    serde_json::to_string(&diff::FunctionDiffSummary::of(d)).unwrap()
                );
            }
            println!(
                "# total identified original-side instructions: {}",
                diff::total_identified(&diffs)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateReduction {
            config,
            original,
            reduced,
            tolerance,
        } => {
            let cfg = load(&config)?;
            let tolerances = reduction::ReductionTolerances {
                buggy_time: reduction::ToleranceBand { factor: tolerance },
                relative_difference: reduction::ToleranceBand { factor: tolerance },
            };
            let opts = harness::MeasureOptions {
                repetitions: cfg.repetitions,
                warmups: cfg.warmups,
                instability_threshold: cfg.instability_threshold,
            };
            let verdict = reduction::validate_reduction(
                &original,
                &reduced,
                &cfg.buggy,
                &cfg.oracle,
                &tolerances,
                &opts,
            )?;
            println!("{}", serde_json::to_string_pretty(&verdict).unwrap());
            Ok(if verdict.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::MockRun {
            cost_model,
            entry,
            dump,
            module,
        } => {
            let cost = match cost_model {
                Some(path) => mock::CostModel::parse(&std::fs::read_to_string(path)?)?,
                None => mock::CostModel::uniform(),
            };
            let raw = std::fs::read(&module)?;
            let bytes = model::to_wasm_bytes(&raw)?;
            let verdict = model::validate_module(&bytes);
            if !verdict.ok {
                return Err(warp_lens::Error::ConfigError(format!(
                    "module does not validate: {}",
                    verdict.message.unwrap_or_default()
                )));
            }
            let parsed = model::parse_module(&bytes)?;
            if dump {
                let listing = mock::mock_dump(&parsed, &cost)?;
                print!("{}", listing.serialize_normalized());
                return Ok(ExitCode::SUCCESS);
            }
            let entry = mock::resolve_entry(&parsed, entry.as_deref())?;
            match mock::interpret_with_cost(&parsed, &cost, &entry) {
                Ok(run) => {
                    print!("{}", mock::render_observables(&run));
                    eprintln!("{PSEUDO_TIME_MARKER} {}", run.pseudo_time);
                    eprintln!("steps: {}", run.steps);
                    Ok(ExitCode::SUCCESS)
                }
                Err(mock::MockError::Trap(msg)) => {
                    eprintln!("trap: {msg}");
                    Ok(ExitCode::from(134))
                }
                Err(mock::MockError::StepBudgetExceeded(budget)) => {
                    eprintln!("step budget of {budget} exceeded");
                    Ok(ExitCode::from(124))
                }
                Err(mock::MockError::Unsupported(msg)) => {
                    Err(warp_lens::Error::UnsupportedFeature(msg))
                }
            }
        }
    }
}
