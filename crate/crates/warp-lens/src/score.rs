//! Differential mutant selection.
//!
//! Each mutant gets two ratios from median timings — original/mutant on the
//! buggy runtime and original/mutant on the oracle runtime — mapped into
//! unit-interval component scores and combined as a weighted sum. A high total means
//! "behaves like the original where the bug does not manifest, but escapes
//! the slowdown where it does".

use crate::error::{Error, Result};
use crate::harness::{ExecutionOutcome, TimingSample};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0 && self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::ConfigError(format!(
                "weights must lie in (0,1]: alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Performance-difference component: how much faster the mutant runs on the
/// buggy runtime. 0 at ratio 1, approaching 1 as the mutant escapes the
/// slowdown, falling back toward 1 quadratically when the mutant is slower.
pub fn perf_diff_score(ratio: f64) -> Result<f64> {
    if ratio.is_nan() || ratio <= 0.0 {
        return Err(Error::NonPositiveRatio(ratio));
    }
    Ok(if ratio > 1.0 {
        1.0 - (1.0 - ratio).exp()
    } else {
        1.0 - ratio * ratio
    })
}

/// Functional-similarity component: how close the mutant's oracle-runtime
/// time is to the original's. 1 at ratio 1, decaying toward 0 on both sides.
pub fn func_sim_score(ratio: f64) -> Result<f64> {
    if ratio.is_nan() || ratio <= 0.0 {
        return Err(Error::NonPositiveRatio(ratio));
    }
    Ok(if ratio > 1.0 {
        (1.0 - ratio).exp()
    } else {
        ratio * ratio
    })
}

/// Why a mutant was removed before scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disqualification {
    TrapOnBuggy,
    TrapOnOracle,
    TimeoutOnBuggy,
    TimeoutOnOracle,
    NonzeroExitOnBuggy,
    NonzeroExitOnOracle,
    DivergentOracleOutput,
}

impl std::fmt::Display for Disqualification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Disqualification::TrapOnBuggy => "trap on buggy runtime",
            Disqualification::TrapOnOracle => "trap on oracle runtime",
            Disqualification::TimeoutOnBuggy => "timeout on buggy runtime",
            Disqualification::TimeoutOnOracle => "timeout on oracle runtime",
            Disqualification::NonzeroExitOnBuggy => "nonzero exit on buggy runtime",
            Disqualification::NonzeroExitOnOracle => "nonzero exit on oracle runtime",
            Disqualification::DivergentOracleOutput => "stdout diverges from original on oracle",
        };
        f.write_str(s)
    }
}

/// Algorithm outputs for one mutant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MutantScore {
    pub ordinal: usize,
    pub perf_diff_ratio: f64,
    pub func_sim_ratio: f64,
    pub perf_diff_score: f64,
    pub func_sim_score: f64,
    pub total: f64,
}

fn summary_of(sample: &TimingSample, what: &str) -> Result<f64> {
    if sample.summary > 0.0 {
        Ok(sample.summary)
    } else {
        Err(Error::ZeroTiming(what.to_string()))
    }
}

/// Score one mutant from the four median timings.
pub fn score_mutant(
    ordinal: usize,
    original: (&TimingSample, &TimingSample),
    mutant: (&TimingSample, &TimingSample),
    weights: &ScoreWeights,
) -> Result<MutantScore> {
    weights.validate()?;
    let o_buggy = summary_of(original.0, "original on buggy runtime")?;
    let o_oracle = summary_of(original.1, "original on oracle runtime")?;
    let v_buggy = summary_of(mutant.0, "mutant on buggy runtime")?;
    let v_oracle = summary_of(mutant.1, "mutant on oracle runtime")?;

    let perf_diff_ratio = o_buggy / v_buggy;
    let func_sim_ratio = o_oracle / v_oracle;
    let pd = perf_diff_score(perf_diff_ratio)?;
    let fs = func_sim_score(func_sim_ratio)?;
    Ok(MutantScore {
        ordinal,
        perf_diff_ratio,
        func_sim_ratio,
        perf_diff_score: pd,
        func_sim_score: fs,
        total: weights.alpha * pd + weights.beta * fs,
    })
}

/// Functional-run outcomes for one mutant on both runtimes.
#[derive(Debug, Clone)]
pub struct OutcomePair {
    pub ordinal: usize,
    pub buggy: ExecutionOutcome,
    pub oracle: ExecutionOutcome,
}

/// Split mutants into the qualified subset (forwarded to timed measurement)
/// and the disqualified rest. A mutant is disqualified if it traps, times
/// out, or exits nonzero on either runtime, or if its oracle stdout digest
/// differs from the original's.
pub fn filter_invalid(
    outcomes: &[OutcomePair],
    original_oracle_digest: &str,
) -> (Vec<usize>, Vec<(usize, Disqualification)>) {
    let mut qualified = Vec::new();
    let mut disqualified = Vec::new();
    for pair in outcomes {
        let verdict = classify_pair(pair, original_oracle_digest);
        match verdict {
            None => qualified.push(pair.ordinal),
            Some(d) => disqualified.push((pair.ordinal, d)),
        }
    }
    (qualified, disqualified)
}

fn classify_pair(pair: &OutcomePair, original_oracle_digest: &str) -> Option<Disqualification> {
    if pair.buggy.timed_out {
        return Some(Disqualification::TimeoutOnBuggy);
    }
    if pair.oracle.timed_out {
        return Some(Disqualification::TimeoutOnOracle);
    }
    if pair.buggy.trapped {
        return Some(Disqualification::TrapOnBuggy);
    }
    if pair.oracle.trapped {
        return Some(Disqualification::TrapOnOracle);
    }
    if pair.buggy.exit_status != 0 {
        return Some(Disqualification::NonzeroExitOnBuggy);
    }
    if pair.oracle.exit_status != 0 {
        return Some(Disqualification::NonzeroExitOnOracle);
    }
    if pair.oracle.stdout_digest != original_oracle_digest {
        return Some(Disqualification::DivergentOracleOutput);
    }
    None
}

/// Descending by total; ties by higher functional similarity, then by lower
/// ordinal. Returns a new ordering, highest first.
pub fn rank_mutants(scores: &[MutantScore]) -> Vec<MutantScore> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| {
        b.total
            .partial_cmp(&a.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                b.func_sim_score
                    .partial_cmp(&a.func_sim_score)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.ordinal.cmp(&b.ordinal))
    });
    ranked
}

/// Row of the exported score table (`scores.jsonl`), one JSON object per
/// line, covering qualified and disqualified mutants alike.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub ordinal: usize,
    pub rule: String,
    pub rank: Option<usize>,
    pub perf_diff_ratio: Option<f64>,
    pub func_sim_ratio: Option<f64>,
    pub perf_diff_score: Option<f64>,
    pub func_sim_score: Option<f64>,
    pub total: Option<f64>,
    pub disqualified: Option<String>,
}
