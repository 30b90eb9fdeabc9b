//! Process-boundary execution harness.
//!
//! Runtimes are driven through command templates with a `{module}`
//! placeholder. Functional runs record exit status and a stdout digest;
//! timed runs are globally serialized and summarized by the median. A
//! runtime that prints `WARP_LENS_PSEUDO_TIME: <cycles>` on stderr is timed
//! by that value (1 cycle = 1ns) instead of the wall clock, which is how the
//! mock runtime stays deterministic behind the same process boundary.

pub mod disasm;

pub use disasm::{DisassembledFunction, Disassembly, MachineInstr};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Read;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Exit code treated as "timed out" (the coreutils `timeout` convention;
/// the mock runtime exits with it on step-budget exhaustion).
pub const TIMEOUT_EXIT_CODE: i32 = 124;

pub const PSEUDO_TIME_MARKER: &str = "WARP_LENS_PSEUDO_TIME:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuntimeRole {
    Buggy,
    Oracle,
}

impl std::fmt::Display for RuntimeRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RuntimeRole::Buggy => "buggy",
            RuntimeRole::Oracle => "oracle",
        })
    }
}

/// One configured runtime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuntimeSpec {
    pub name: String,
    pub role: RuntimeRole,
    /// Command template with exactly one `{module}` placeholder.
    pub invoke: String,
    /// Machine-code dump template, when the runtime has an adapter.
    pub dump: Option<String>,
    pub timeout: Duration,
    /// Passed to the child verbatim (CPU pinning hints and the like).
    pub env: Vec<(String, String)>,
}

impl RuntimeSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.invoke.matches("{module}").count();
        if n != 1 {
            return Err(Error::ConfigError(format!(
                "invoke template for `{}` must contain exactly one {{module}} placeholder, found {n}",
                self.name
            )));
        }
        if let Some(dump) = &self.dump {
            if dump.matches("{module}").count() != 1 {
                return Err(Error::ConfigError(format!(
                    "dump template for `{}` must contain exactly one {{module}} placeholder",
                    self.name
                )));
            }
        }
        split_command(&self.invoke)
            .map_err(|e| Error::ConfigError(format!("invoke template for `{}`: {e}", self.name)))?;
        Ok(())
    }

    /// Stable identity for timing-cache keys: everything that could change
    /// what a measurement means.
    pub fn identity_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0]);
        h.update(self.invoke.as_bytes());
        h.update([0]);
        for (k, v) in &self.env {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update([0]);
        }
        hex(&h.finalize())
    }
}

/// Observable result of one functional run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub exit_status: i32,
    /// sha256 of raw stdout.
    pub stdout_digest: String,
    pub trapped: bool,
    pub timed_out: bool,
    /// Attached after a timed measurement. Present only for clean runs.
    pub timing: Option<TimingSample>,
}

impl ExecutionOutcome {
    pub fn clean(&self) -> bool {
        !self.trapped && !self.timed_out && self.exit_status == 0
    }

    /// Attach a timing sample, upholding the clean-run invariant.
    pub fn with_timing(mut self, timing: TimingSample) -> Self {
        debug_assert!(self.clean());
        self.timing = Some(timing);
        self
    }
}

/// Robust timing for one (program, runtime) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingSample {
    /// Post-warmup wall (or pseudo) times in seconds.
    pub raw_runs: Vec<f64>,
    /// Median of `raw_runs`.
    pub summary: f64,
    pub repetitions: usize,
    pub warmups_discarded: usize,
    /// Interquartile spread exceeded the instability threshold; the sample
    /// is still usable, just suspect.
    pub unstable: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct MeasureOptions {
    pub repetitions: usize,
    pub warmups: usize,
    /// Flag a sample whose IQR exceeds this fraction of the median.
    pub instability_threshold: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions {
            repetitions: 5,
            warmups: 1,
            instability_threshold: 0.10,
        }
    }
}

/// Split a command template into argv. Supports double/single quotes, no
/// shell interpretation beyond that.
pub fn split_command(template: &str) -> std::result::Result<Vec<String>, String> {
    let mut argv = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut pending = false;
    for c in template.chars() {
        match quote {
            Some(q) => {
                if c == q {
                    quote = None;
                } else {
                    cur.push(c);
                }
            }
            None => match c {
                '"' | '\'' => {
                    quote = Some(c);
                    pending = true;
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() || pending {
                        argv.push(std::mem::take(&mut cur));
                        pending = false;
                    }
                }
                c => cur.push(c),
            },
        }
    }
    if quote.is_some() {
        return Err("unterminated quote".into());
    }
    if !cur.is_empty() || pending {
        argv.push(cur);
    }
    if argv.is_empty() {
        return Err("empty command".into());
    }
    Ok(argv)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

struct RawRun {
    exit_code: i32,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
    wall: Duration,
    killed_on_timeout: bool,
}

fn drain_pipe<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut pipe) = pipe {
            let _ = pipe.read_to_end(&mut buf);
        }
        buf
    })
}

fn wait_with_timeout(child: &mut Child, timeout: Duration) -> std::io::Result<(Option<i32>, bool)> {
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok((status.code(), false));
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok((None, true));
        }
        std::thread::sleep(Duration::from_millis(1));
    }
}

fn run_once(spec: &RuntimeSpec, module: &Path) -> Result<RawRun> {
    let template = spec
        .invoke
        .replace("{module}", &module.display().to_string());
    let argv = split_command(&template).map_err(Error::ConfigError)?;
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in &spec.env {
        cmd.env(k, v);
    }
    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|source| Error::SpawnFailure {
        command: template.clone(),
        source,
    })?;
    let stdout = drain_pipe(child.stdout.take());
    let stderr = drain_pipe(child.stderr.take());
    let (code, killed) = wait_with_timeout(&mut child, spec.timeout)?;
    let wall = start.elapsed();
    Ok(RawRun {
        exit_code: code.unwrap_or(if killed { TIMEOUT_EXIT_CODE } else { -1 }),
        stdout: stdout.join().unwrap_or_default(),
        stderr: stderr.join().unwrap_or_default(),
        wall,
        killed_on_timeout: killed,
    })
}

/// Pseudo-time marker on stderr, in cycles.
fn pseudo_cycles(stderr: &[u8]) -> Option<u64> {
    let text = String::from_utf8_lossy(stderr);
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix(PSEUDO_TIME_MARKER) {
            if let Ok(v) = rest.trim().parse::<u64>() {
                return Some(v);
            }
        }
    }
    None
}

fn run_seconds(run: &RawRun) -> f64 {
    match pseudo_cycles(&run.stderr) {
        Some(cycles) => cycles as f64 * 1e-9,
        None => run.wall.as_secs_f64(),
    }
}

fn outcome_of(run: &RawRun) -> ExecutionOutcome {
    let timed_out = run.killed_on_timeout || run.exit_code == TIMEOUT_EXIT_CODE;
    ExecutionOutcome {
        exit_status: run.exit_code,
        stdout_digest: sha256_hex(&run.stdout),
        trapped: !timed_out && run.exit_code != 0,
        timed_out,
        timing: None,
    }
}

/// One functional (untimed) run. Safe to call concurrently.
pub fn run_with_output(spec: &RuntimeSpec, module: &Path) -> Result<ExecutionOutcome> {
    Ok(outcome_of(&run_once(spec, module)?))
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Tukey-hinge interquartile range: medians of the lower/upper halves,
/// middle element excluded when the length is odd.
fn iqr(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n < 4 {
        return sorted[n - 1] - sorted[0];
    }
    let half = n / 2;
    let q1 = median(&sorted[..half]);
    let q3 = median(&sorted[n - half..]);
    q3 - q1
}

static TIMED_RUN_LOCK: Mutex<()> = Mutex::new(());

/// Timed measurement: `warmups` discarded runs, then `repetitions` recorded
/// runs, all strictly serialized process-wide so two timed runs never
/// overlap. Any failing run aborts the sample.
pub fn measure_execution(
    spec: &RuntimeSpec,
    module: &Path,
    opts: &MeasureOptions,
) -> Result<TimingSample> {
    if opts.repetitions < 3 {
        return Err(Error::ConfigError(format!(
            "repetitions must be at least 3, got {}",
            opts.repetitions
        )));
    }
    let _token = TIMED_RUN_LOCK.lock().unwrap_or_else(|e| e.into_inner());

    let mut raw_runs = Vec::with_capacity(opts.repetitions);
    for i in 0..opts.warmups + opts.repetitions {
        let run = run_once(spec, module)?;
        let outcome = outcome_of(&run);
        if !outcome.clean() {
            return Err(Error::MeasurementFailure {
                program: module.display().to_string(),
                runtime: spec.name.clone(),
                reason: if outcome.timed_out {
                    "timed out".into()
                } else {
                    format!("exit status {}", outcome.exit_status)
                },
            });
        }
        if i >= opts.warmups {
            raw_runs.push(run_seconds(&run));
        }
    }
    let mut sorted = raw_runs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let summary = median(&sorted);
    let unstable = summary > 0.0 && iqr(&sorted) > opts.instability_threshold * summary;
    Ok(TimingSample {
        raw_runs,
        summary,
        repetitions: opts.repetitions,
        warmups_discarded: opts.warmups,
        unstable,
    })
}

/// Extract the runtime's machine code for `module` through its dump adapter.
pub fn dump_machine_code(spec: &RuntimeSpec, module: &Path) -> Result<Disassembly> {
    let template = spec.dump.as_ref().ok_or_else(|| Error::DumpUnsupported {
        runtime: spec.name.clone(),
    })?;
    let template = template.replace("{module}", &module.display().to_string());
    let argv = split_command(&template).map_err(Error::ConfigError)?;
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in &spec.env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().map_err(|source| Error::SpawnFailure {
        command: template.clone(),
        source,
    })?;
    let stdout = drain_pipe(child.stdout.take());
    let stderr = drain_pipe(child.stderr.take());
    let (code, killed) = wait_with_timeout(&mut child, spec.timeout)?;
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();
    if killed || code != Some(0) {
        return Err(Error::DumpParseError(format!(
            "dump command `{template}` failed (exit {code:?}): {}",
            String::from_utf8_lossy(&err)
        )));
    }
    disasm::parse_any(&String::from_utf8_lossy(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn sh_spec(script: &str, timeout_ms: u64) -> RuntimeSpec {
        RuntimeSpec {
            name: "sh".into(),
            role: RuntimeRole::Oracle,
            invoke: format!("sh -c '{script}' sh {{module}}"),
            dump: None,
            timeout: Duration::from_millis(timeout_ms),
            env: vec![],
        }
    }

    #[test]
    fn split_command_handles_quotes() {
        assert_eq!(
            split_command("a 'b c' \"d e\" f").unwrap(),
            vec!["a", "b c", "d e", "f"]
        );
        assert!(split_command("a 'oops").is_err());
        assert!(split_command("   ").is_err());
    }

    #[test]
    fn template_placeholder_enforced() {
        let mut spec = sh_spec("true", 1000);
        spec.invoke = "run module".into();
        assert!(spec.validate().is_err());
        spec.invoke = "run {module} {module}".into();
        assert!(spec.validate().is_err());
        spec.invoke = "run {module}".into();
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn clean_run_and_trap_and_timeout() {
        let dir = tempfile::tempdir().unwrap();
        let module = dir.path().join("m.wasm");
        std::fs::File::create(&module)
            .unwrap()
            .write_all(b"x")
            .unwrap();

        let ok = run_with_output(&sh_spec("echo hi", 2000), &module).unwrap();
        assert!(ok.clean());
        assert_eq!(ok.stdout_digest, sha256_hex(b"hi\n"));

        let trap = run_with_output(&sh_spec("exit 3", 2000), &module).unwrap();
        assert!(trap.trapped && !trap.timed_out);

        let to = run_with_output(&sh_spec("sleep 5", 100), &module).unwrap();
        assert!(to.timed_out && !to.trapped);

        // Exit code 124 is timeout by convention even without a wall kill.
        let to2 = run_with_output(&sh_spec("exit 124", 2000), &module).unwrap();
        assert!(to2.timed_out);
    }

    #[test]
    fn spawn_failure_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let module = dir.path().join("m.wasm");
        std::fs::write(&module, b"x").unwrap();
        let mut spec = sh_spec("true", 1000);
        spec.invoke = "/nonexistent/runtime {module}".into();
        assert!(matches!(
            run_with_output(&spec, &module),
            Err(Error::SpawnFailure { .. })
        ));
    }

    #[test]
    fn pseudo_time_marker_overrides_wall_clock() {
        let dir = tempfile::tempdir().unwrap();
        let module = dir.path().join("m.wasm");
        std::fs::write(&module, b"x").unwrap();
        let spec = sh_spec(
            "echo out; echo \"WARP_LENS_PSEUDO_TIME: 42000000\" >&2",
            2000,
        );
        let sample = measure_execution(
            &spec,
            &module,
            &MeasureOptions {
                repetitions: 3,
                warmups: 1,
                instability_threshold: 0.10,
            },
        )
        .unwrap();
        assert_eq!(sample.raw_runs.len(), 3);
        assert_eq!(sample.warmups_discarded, 1);
        // 42e6 cycles -> 0.042 s, identical on every run.
        assert!((sample.summary - 0.042).abs() < 1e-12);
        assert!(!sample.unstable);
    }

    #[test]
    fn measurement_failure_on_trapping_program() {
        let dir = tempfile::tempdir().unwrap();
        let module = dir.path().join("m.wasm");
        std::fs::write(&module, b"x").unwrap();
        let err = measure_execution(
            &sh_spec("exit 1", 2000),
            &module,
            &MeasureOptions::default(),
        );
        assert!(matches!(err, Err(Error::MeasurementFailure { .. })));
    }

    #[test]
    fn repetitions_floor_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let module = dir.path().join("m.wasm");
        std::fs::write(&module, b"x").unwrap();
        let err = measure_execution(
            &sh_spec("true", 1000),
            &module,
            &MeasureOptions {
                repetitions: 2,
                warmups: 0,
                instability_threshold: 0.1,
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn timed_runs_never_overlap() {
        // Each invocation logs [start, end] nanos to its own file; with the
        // global token, the recorded intervals must be pairwise disjoint.
        let dir = tempfile::tempdir().unwrap();
        let module = dir.path().join("m.wasm");
        std::fs::write(&module, b"x").unwrap();
        let log_dir = dir.path().to_path_buf();

        std::thread::scope(|scope| {
            for t in 0..3 {
                let module = module.clone();
                let log_dir = log_dir.clone();
                scope.spawn(move || {
                    let spec = RuntimeSpec {
                        name: format!("probe{t}"),
                        role: RuntimeRole::Buggy,
                        invoke: format!(
                            "sh -c 'date +%s%N > {0}/run_$$.log; sleep 0.02; date +%s%N >> {0}/run_$$.log' sh {{module}}",
                            log_dir.display()
                        ),
                        dump: None,
                        timeout: Duration::from_secs(5),
                        env: vec![],
                    };
                    measure_execution(
                        &spec,
                        &module,
                        &MeasureOptions {
                            repetitions: 3,
                            warmups: 0,
                            instability_threshold: 10.0,
                        },
                    )
                    .unwrap();
                });
            }
        });

        let mut intervals: Vec<(u128, u128)> = Vec::new();
        for entry in std::fs::read_dir(&log_dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().map(|e| e == "log").unwrap_or(false) {
                let text = std::fs::read_to_string(&path).unwrap();
                let mut lines = text.lines();
                let a: u128 = lines.next().unwrap().trim().parse().unwrap();
                let b: u128 = lines.next().unwrap().trim().parse().unwrap();
                intervals.push((a, b));
            }
        }
        assert_eq!(intervals.len(), 9);
        intervals.sort();
        for w in intervals.windows(2) {
            assert!(
                w[0].1 <= w[1].0,
                "timed runs overlapped: {:?} then {:?}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn median_and_iqr() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        // Tukey hinges: q1 = 1.5, q3 = 51.5.
        assert_eq!(iqr(&[1.0, 2.0, 3.0, 100.0]), 50.0);
    }
}
