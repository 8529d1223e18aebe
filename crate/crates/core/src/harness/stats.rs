//! Rank statistics for comparing runs: two-sided Mann-Whitney U and the
//! Vargha-Delaney A12 effect size.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Largest sample size (per side) for which the exact null distribution is
/// enumerated; beyond it the normal approximation is used.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("both samples must be non-empty")]
    EmptySample,
    #[error("samples must not contain NaN")]
    NotANumber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

fn check(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    Ok(())
}

/// Doubled midranks of the pooled sample (integers, so ties stay exact),
/// in pooled order `xs ++ ys`, plus the tie-group sizes.
fn doubled_ranks(xs: &[f64], ys: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1, doubled midrank = (i+1)+(j+1)
        let r2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test. Exact permutation distribution of the
/// midrank sum when both samples have at most [`EXACT_LIMIT`] values,
/// otherwise a tie-corrected normal approximation with continuity
/// correction.
pub fn mann_whitney_u(xs: &[f64], ys: &[f64]) -> Result<MannWhitney, StatsError> {
    check(xs, ys)?;
    let (n, m) = (xs.len(), ys.len());
    let (ranks, ties) = doubled_ranks(xs, ys);
    let w2: u64 = ranks[..n].iter().sum();
    let u = w2 as f64 / 2.0 - (n * (n + 1)) as f64 / 2.0;
    if n <= EXACT_LIMIT && m <= EXACT_LIMIT {
        return Ok(MannWhitney { u, p_value: exact_p(&ranks, n, w2), exact: true });
    }
    let big_n = (n + m) as f64;
    let (nf, mf) = (n as f64, m as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term);
    if var <= 0.0 {
        return Ok(MannWhitney { u, p_value: 1.0, exact: false });
    }
    let dev = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney { u, p_value: p, exact: false })
}

/// P(|W - E[W]| >= |w - E[W]|) over all ways of choosing `n` of the pooled
/// ranks, counted with a subset-sum table over doubled ranks.
fn exact_p(ranks: &[u64], n: usize, w2: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    // counts[k][s]: subsets of size k with doubled-rank sum s
    let mut counts = vec![vec![0u64; total as usize + 1]; n + 1];
    counts[0][0] = 1;
    for &r in ranks {
        for k in (1..=n).rev() {
            for s in (r as usize..=total as usize).rev() {
                counts[k][s] += counts[k - 1][s - r as usize];
            }
        }
    }
    let big_n = ranks.len() as i64;
    // doubled expectation of the rank sum: n (N + 1)
    let mean2 = n as i64 * (big_n + 1);
    let observed = (w2 as i64 - mean2).abs();
    let mut extreme = 0u64;
    let mut all = 0u64;
    for (s, &c) in counts[n].iter().enumerate() {
        all += c;
        if (s as i64 - mean2).abs() >= observed {
            extreme += c;
        }
    }
    (extreme as f64 / all as f64).min(1.0)
}

/// Probability that a value drawn from `xs` exceeds one drawn from `ys`,
/// counting ties as half.
pub fn vargha_delaney_a12(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check(xs, ys)?;
    let mut score = 0.0;
    for x in xs {
        for y in ys {
            if x > y {
                score += 1.0;
            } else if x == y {
                score += 0.5;
            }
        }
    }
    Ok(score / (xs.len() * ys.len()) as f64)
}
