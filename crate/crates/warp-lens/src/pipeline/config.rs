//! Pipeline configuration: a flat, line-oriented key-value file with one
//! section per runtime, every key overridable by a same-named CLI flag.
//!
//! ```text
//! input = program.wasm
//! out = out/
//! alpha = 0.5
//! beta = 0.5
//! reps = 5
//! warmups = 1
//! top-k = 5
//! mutant-cap = 2000
//!
//! [runtime.buggy]
//! name = wasmtime-f10d66
//! invoke = /opt/wasmtime run {module}
//! dump = /opt/wasmtime-dump {module}
//! env.WARP_CPU = 3
//!
//! [runtime.oracle]
//! name = wasmedge-dc2f26
//! invoke = /opt/wasmedge {module}
//! ```

use crate::error::{Error, Result};
use crate::harness::{RuntimeRole, RuntimeSpec};
use crate::mutate::{ImmediatePool, MutationConfig};
use crate::score::ScoreWeights;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const WORKDIR_ENV: &str = "WARP_LENS_WORKDIR";

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub buggy: RuntimeSpec,
    pub oracle: RuntimeSpec,
    pub weights: ScoreWeights,
    pub repetitions: usize,
    pub warmups: usize,
    pub instability_threshold: f64,
    /// Wall timeout = max(floor, factor × original buggy median).
    pub timeout_floor: Duration,
    pub timeout_factor: f64,
    pub mutation: MutationConfig,
    pub top_k: usize,
    pub out_dir: PathBuf,
    /// Persistent working directory (mutants, caches). Overridable via
    /// `WARP_LENS_WORKDIR`.
    pub work_dir: Option<PathBuf>,
    /// Bounded parallelism for functional (untimed) runs.
    pub functional_parallelism: usize,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.buggy.validate()?;
        self.oracle.validate()?;
        self.weights.validate()?;
        if self.buggy.role != RuntimeRole::Buggy || self.oracle.role != RuntimeRole::Oracle {
            return Err(Error::ConfigError("runtime roles are swapped".into()));
        }
        if self.buggy.name == self.oracle.name && self.buggy.invoke == self.oracle.invoke {
            return Err(Error::ConfigError(
                "buggy and oracle runtimes must be distinct".into(),
            ));
        }
        if self.top_k < 1 {
            return Err(Error::ConfigError("top-k must be at least 1".into()));
        }
        if self.repetitions < 3 {
            return Err(Error::ConfigError("reps must be at least 3".into()));
        }
        if self.mutation.mutant_cap < 1 {
            return Err(Error::ConfigError("mutant-cap must be at least 1".into()));
        }
        Ok(())
    }

    /// The effective working directory: env override, configured value, or
    /// `<out>/work`.
    pub fn effective_work_dir(&self) -> PathBuf {
        if let Ok(w) = std::env::var(WORKDIR_ENV) {
            if !w.is_empty() {
                return PathBuf::from(w);
            }
        }
        self.work_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("work"))
    }
}

/// Raw parsed file: flat keys plus per-section keys.
#[derive(Debug, Default)]
pub struct RawConfig {
    pub globals: Vec<(String, String)>,
    /// (section name, key, value)
    pub sections: Vec<(String, String, String)>,
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    let mut section: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let bad = |what: &str| {
            Error::ConfigError(format!("config line {}: {what}: {line:?}", lineno + 1))
        };
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(bad("expected key = value"));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        match &section {
            Some(s) => raw.sections.push((s.clone(), key, value)),
            None => raw.globals.push((key, value)),
        }
    }
    Ok(raw)
}

fn runtime_from_section(raw: &RawConfig, section: &str, role: RuntimeRole) -> Result<RuntimeSpec> {
    let mut name = None;
    let mut invoke = None;
    let mut dump = None;
    let mut timeout = Duration::from_secs(10);
    let mut env = Vec::new();
    let mut found = false;
    for (s, key, value) in &raw.sections {
        if s != section {
            continue;
        }
        found = true;
        match key.as_str() {
            "name" => name = Some(value.clone()),
            "invoke" => invoke = Some(value.clone()),
            "dump" => dump = Some(value.clone()),
            "timeout-secs" => {
                let secs: f64 = value.parse().map_err(|_| {
                    Error::ConfigError(format!("[{section}] timeout-secs: bad value {value:?}"))
                })?;
                timeout = Duration::from_secs_f64(secs);
            }
            k if k.starts_with("env.") => {
                env.push((k["env.".len()..].to_string(), value.clone()));
            }
            other => {
                return Err(Error::ConfigError(format!(
                    "[{section}] unknown key {other:?}"
                )))
            }
        }
    }
    if !found {
        return Err(Error::ConfigError(format!("missing [{section}] section")));
    }
    let invoke = invoke
        .ok_or_else(|| Error::ConfigError(format!("[{section}] needs an invoke template")))?;
    let spec = RuntimeSpec {
        name: name.unwrap_or_else(|| section.to_string()),
        role,
        invoke,
        dump,
        timeout,
        env,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_pool_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| Error::ConfigError(format!("bad {what} pool entry {v:?}")))
        })
        .collect()
}

/// Assemble the pipeline config from file text plus CLI overrides
/// (key, value) applied on top of the file's globals.
pub fn load_config(
    text: &str,
    overrides: &[(String, String)],
    config_dir: &Path,
) -> Result<PipelineConfig> {
    let raw = parse_raw(text)?;

    let mut kv: Vec<(String, String)> = raw.globals.clone();
    kv.extend(overrides.iter().cloned());

    let get = |key: &str| -> Option<String> {
        kv.iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
    };
    let parse_num = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::ConfigError(format!("bad value for {key}: {v:?}"))),
            None => Ok(default),
        }
    };

    let input =
        get("input").ok_or_else(|| Error::ConfigError("missing `input` (or --input)".into()))?;
    let input = config_dir.join(input);
    let out_dir = config_dir.join(get("out").unwrap_or_else(|| "warp-lens-out".into()));

    let mut pool = ImmediatePool::default();
    if let Some(v) = get("pool.int") {
        pool.ints = parse_pool_list(&v, "integer")?;
    }
    if let Some(v) = get("pool.float") {
        pool.floats = parse_pool_list(&v, "float")?;
    }

    let config = PipelineConfig {
        input,
        buggy: runtime_from_section(&raw, "runtime.buggy", RuntimeRole::Buggy)?,
        oracle: runtime_from_section(&raw, "runtime.oracle", RuntimeRole::Oracle)?,
        weights: ScoreWeights {
            alpha: parse_num("alpha", 0.5)?,
            beta: parse_num("beta", 0.5)?,
        },
        repetitions: parse_num("reps", 5.0)? as usize,
        warmups: parse_num("warmups", 1.0)? as usize,
        instability_threshold: parse_num("instability-threshold", 0.10)?,
        timeout_floor: Duration::from_secs_f64(parse_num("timeout-floor-secs", 10.0)?),
        timeout_factor: parse_num("timeout-factor", 20.0)?,
        mutation: MutationConfig {
            pool,
            mutant_cap: parse_num("mutant-cap", 2000.0)? as usize,
        },
        top_k: parse_num("top-k", 5.0)? as usize,
        work_dir: get("workdir").map(|w| config_dir.join(w)),
        out_dir,
        functional_parallelism: parse_num("functional-parallelism", 4.0)? as usize,
    };
    config.validate()?;
    Ok(config)
}
