//! Reduction validation: an externally reduced module preserves the
//! performance issue iff (1) its buggy-runtime time stays comparable to the
//! original's and (2) the buggy/oracle relative gap stays similar. The
//! reducer itself is out of scope; this only judges a candidate.

use crate::error::{Error, Result};
use crate::harness::{measure_execution, MeasureOptions, RuntimeSpec, TimingSample};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Log-symmetric tolerance band: a ratio passes iff it lies in
/// [1/factor, factor].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ToleranceBand {
    pub factor: f64,
}

impl ToleranceBand {
    pub fn contains(&self, ratio: f64) -> bool {
        ratio > 0.0 && ratio >= 1.0 / self.factor && ratio <= self.factor
    }
}

impl Default for ToleranceBand {
    fn default() -> Self {
        // "comparable" / "similar" without a stated number: half-to-double.
        ToleranceBand { factor: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ReductionTolerances {
    pub buggy_time: ToleranceBand,
    pub relative_difference: ToleranceBand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionVerdict {
    /// reduced-buggy median / original-buggy median.
    pub buggy_time_ratio: f64,
    /// (reduced buggy/oracle) / (original buggy/oracle).
    pub relative_difference_ratio: f64,
    pub check_buggy_time: bool,
    pub check_relative_difference: bool,
    pub pass: bool,
    pub tolerances: ReductionTolerances,
}

/// The two checks from already-collected timings.
pub fn judge_reduction(
    original_buggy: &TimingSample,
    original_oracle: &TimingSample,
    reduced_buggy: &TimingSample,
    reduced_oracle: &TimingSample,
    tolerances: &ReductionTolerances,
) -> Result<ReductionVerdict> {
    for (s, what) in [
        (original_buggy, "original on buggy"),
        (original_oracle, "original on oracle"),
        (reduced_buggy, "reduced on buggy"),
        (reduced_oracle, "reduced on oracle"),
    ] {
        if s.summary <= 0.0 {
            return Err(Error::ZeroTiming(what.into()));
        }
    }
    let buggy_time_ratio = reduced_buggy.summary / original_buggy.summary;
    let original_gap = original_buggy.summary / original_oracle.summary;
    let reduced_gap = reduced_buggy.summary / reduced_oracle.summary;
    let relative_difference_ratio = reduced_gap / original_gap;
    let check_buggy_time = tolerances.buggy_time.contains(buggy_time_ratio);
    let check_relative_difference = tolerances
        .relative_difference
        .contains(relative_difference_ratio);
    Ok(ReductionVerdict {
        buggy_time_ratio,
        relative_difference_ratio,
        check_buggy_time,
        check_relative_difference,
        pass: check_buggy_time && check_relative_difference,
        tolerances: *tolerances,
    })
}

/// Measure both programs on both runtimes and apply the two checks.
pub fn validate_reduction(
    original: &Path,
    reduced: &Path,
    buggy: &RuntimeSpec,
    oracle: &RuntimeSpec,
    tolerances: &ReductionTolerances,
    opts: &MeasureOptions,
) -> Result<ReductionVerdict> {
    let measure = |spec: &RuntimeSpec, path: &Path| -> Result<TimingSample> {
        measure_execution(spec, path, opts).map_err(|e| Error::MeasurementFailure {
            program: path.display().to_string(),
            runtime: spec.name.clone(),
            reason: e.to_string(),
        })
    };
    let ob = measure(buggy, original)?;
    let oo = measure(oracle, original)?;
    let rb = measure(buggy, reduced)?;
    let ro = measure(oracle, reduced)?;
    judge_reduction(&ob, &oo, &rb, &ro, tolerances)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(summary: f64) -> TimingSample {
        TimingSample {
            raw_runs: vec![summary; 3],
            summary,
            repetitions: 3,
            warmups_discarded: 0,
            unstable: false,
        }
    }

    #[test]
    fn identity_reduction_passes_with_unit_ratios() {
        let v = judge_reduction(
            &sample(4.0),
            &sample(1.0),
            &sample(4.0),
            &sample(1.0),
            &ReductionTolerances::default(),
        )
        .unwrap();
        assert_eq!(v.buggy_time_ratio, 1.0);
        assert_eq!(v.relative_difference_ratio, 1.0);
        assert!(v.pass);
    }

    #[test]
    fn hundredfold_speedup_fails_check_one() {
        let v = judge_reduction(
            &sample(10.0),
            &sample(1.0),
            &sample(0.1),
            &sample(0.01),
            &ReductionTolerances::default(),
        )
        .unwrap();
        assert!(!v.check_buggy_time);
        // The gap itself is preserved (10x both times), so check 2 passes.
        assert!(v.check_relative_difference);
        assert!(!v.pass);
    }

    #[test]
    fn gap_collapse_fails_check_two() {
        // Reduced program keeps its absolute buggy time but loses the
        // buggy/oracle gap (oracle got slower tenfold).
        let v = judge_reduction(
            &sample(7.77),
            &sample(1.0),
            &sample(7.77),
            &sample(10.0),
            &ReductionTolerances::default(),
        )
        .unwrap();
        assert!(v.check_buggy_time);
        assert!(!v.check_relative_difference);
        assert!(!v.pass);
    }

    #[test]
    fn verdict_symmetric_under_swap() {
        let tol = ReductionTolerances::default();
        let (ob, oo, rb, ro) = (sample(5.0), sample(1.1), sample(3.4), sample(1.0));
        let fwd = judge_reduction(&ob, &oo, &rb, &ro, &tol).unwrap();
        let rev = judge_reduction(&rb, &ro, &ob, &oo, &tol).unwrap();
        assert!((fwd.buggy_time_ratio * rev.buggy_time_ratio - 1.0).abs() < 1e-12);
        assert!(
            (fwd.relative_difference_ratio * rev.relative_difference_ratio - 1.0).abs() < 1e-12
        );
        assert_eq!(fwd.pass, rev.pass);
    }

    #[test]
    fn zero_timing_is_rejected() {
        let err = judge_reduction(
            &sample(0.0),
            &sample(1.0),
            &sample(1.0),
            &sample(1.0),
            &ReductionTolerances::default(),
        );
        assert!(matches!(err, Err(Error::ZeroTiming(_))));
    }
}
