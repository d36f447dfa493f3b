//! Weighted level contributions and the level-norm table.

use std::io::Write;

use serde::Serialize;

use crate::chaos_space::{level_contributions, WeightPair};
use crate::multiindex::MultiIndex;
use crate::Result;

/// Weighted level contributions `c_n = sum_{|alpha| = n} w(alpha) ||u_alpha||^2`
/// of one series at one weight pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub weights: WeightPair,
    pub contributions: Vec<f64>,
    /// Partial sums `sum_{m <= n} c_m`.
    pub partial_sums: Vec<f64>,
}

impl DecayReport {
    pub fn new(norms: &[(MultiIndex, f64)], weights: WeightPair, max_order: u32) -> Self {
        let contributions = level_contributions(norms.iter().map(|(a, n)| (a, *n)), weights, max_order);
        let partial_sums = contributions
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        Self {
            weights,
            contributions,
            partial_sums,
        }
    }

    /// `c_{n+1} / c_n` for `n = 0..N-1` (`None` where `c_n = 0`).
    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.contributions
            .windows(2)
            .map(|w| (w[0] > 0.0).then(|| w[1] / w[0]))
            .collect()
    }

    /// Largest ratio `c_{n+1} / c_n` over `n >= from` (infinite if some `c_n = 0`
    /// precedes a positive `c_{n+1}`).
    pub fn max_ratio_from(&self, from: usize) -> f64 {
        self.contributions
            .windows(2)
            .skip(from)
            .map(|w| match (w[0] > 0.0, w[1] > 0.0) {
                (true, _) => w[1] / w[0],
                (false, false) => 0.0,
                (false, true) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Geometric decay with ratio at most `bound` for all `n >= from`.
    pub fn decays(&self, from: usize, bound: f64) -> bool {
        self.contributions.len() > from + 1 && self.max_ratio_from(from) <= bound
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }

    /// `|P_to - P_from| / P_to` for partial sums up to levels `from` and `to`.
    pub fn relative_change(&self, from: usize, to: usize) -> f64 {
        let (a, b) = (self.partial_sums[from], self.partial_sums[to]);
        (b - a).abs() / b.abs()
    }
}

/// Decay reports for each candidate weight pair, keeping those whose
/// contributions decay with ratio at most `bound` from level `from` on.
pub fn admissible_weights(
    norms: &[(MultiIndex, f64)],
    candidates: &[WeightPair],
    max_order: u32,
    from: usize,
    bound: f64,
) -> Vec<DecayReport> {
    candidates
        .iter()
        .map(|&w| DecayReport::new(norms, w, max_order))
        .filter(|r| r.decays(from, bound))
        .collect()
}

/// One row of the level-norm table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelNormRow {
    pub n: u32,
    pub t: f64,
    pub s_n: f64,
    pub oracle_value: Option<f64>,
    pub relative_error: Option<f64>,
}

impl LevelNormRow {
    pub fn new(n: u32, t: f64, s_n: f64, oracle_value: Option<f64>) -> Self {
        let relative_error = oracle_value.map(|o| (s_n - o).abs() / o.abs());
        Self {
            n,
            t,
            s_n,
            oracle_value,
            relative_error,
        }
    }
}

/// CSV with columns `n, t, S_n, oracle_value, relative_error` (empty oracle
/// fields when no oracle applies).
pub fn write_level_norms_csv<W: Write>(rows: &[LevelNormRow], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(["n", "t", "S_n", "oracle_value", "relative_error"])?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
