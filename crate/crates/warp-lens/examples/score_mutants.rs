//! Score and rank synthetic mutants from their timing ratios.
//!
//! ```sh
//! cargo run --example score_mutants
//! ```

use warp_lens::score::{func_sim_score, perf_diff_score, rank_mutants, MutantScore, ScoreWeights};

fn main() -> warp_lens::Result<()> {
    let weights = ScoreWeights::default();
    // (label, buggy-runtime ratio, oracle-runtime ratio) — the shapes seen
    // in practice: a real fix candidate, a near-tie, and two invalid
    // mutants that only look fast.
    let observations = [
        ("escapes the slowdown, same behavior", 7.77, 1.01),
        ("halves the slowdown, same behavior", 2.00, 1.00),
        ("no performance change", 1.00, 1.00),
        ("fast because it skips the loop", 40.0, 35.0),
        ("slower than the original", 0.50, 1.00),
    ];

    let mut scores = Vec::new();
    for (i, (label, b, o)) in observations.iter().enumerate() {
        let pd = perf_diff_score(*b)?;
        let fs = func_sim_score(*o)?;
        let total = weights.alpha * pd + weights.beta * fs;
        println!(
            "{label:40} Ratio(B)={b:5.2} Ratio(O)={o:5.2}  perf_diff={pd:.6} func_sim={fs:.6} total={total:.6}"
        );
        scores.push(MutantScore {
            ordinal: i,
            perf_diff_ratio: *b,
            func_sim_ratio: *o,
            perf_diff_score: pd,
            func_sim_score: fs,
            total,
        });
    }

    println!("\nranking (best candidate first):");
    for (rank, s) in rank_mutants(&scores).iter().enumerate() {
        println!(
            "  {}. {} (total {:.6})",
            rank + 1,
            observations[s.ordinal].0,
            s.total
        );
    }
    Ok(())
}
