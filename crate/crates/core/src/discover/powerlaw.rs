use std::collections::HashMap;

use serde::Serialize;

use super::DiscoverError;
use crate::graph::{node_features, Feature, GraphSnapshot, TransactionLog};
use crate::linalg::least_squares;

pub const MIN_SAMPLES: usize = 30;
/// Fraction of the CDF trimmed from each end for the odds regression.
const BODY_TRIM: f64 = 0.02;
/// CDF band used for the CCDF regression.
const TAIL_BAND: (f64, f64) = (0.95, 0.998);
const MIN_TAIL_POINTS: usize = 3;

pub const STATISTIC_NAMES: [&str; 10] = [
    "Transaction Amount",
    "Interval Arriving Time",
    "Pair Amount",
    "Pair Multiplicity",
    "Out Weight",
    "In Weight",
    "Multi Out Degree",
    "Multi In Degree",
    "Unique Out Degree",
    "Unique In Degree",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionFit {
    pub statistic: String,
    pub samples: usize,
    pub unique_values: usize,
    /// Slope of `ln(F / (1 − F))` against `ln x` over the trimmed body.
    pub rho: f64,
    pub rho_r2: f64,
    /// Slope of `ln(1 − F)` against `ln x` (negative for heavy tails).
    pub beta: f64,
    pub beta_r2: f64,
    /// `"tail"`, or `"body"` when the tail has too few distinct values.
    pub beta_support: &'static str,
    /// `||β| − ρ|`.
    pub discrepancy: f64,
}

/// Log-log regressions of the empirical CCDF and odds ratio.
///
/// `F` is evaluated at each distinct value. The odds slope `ρ` uses the
/// support with `F ∈ [0.02, 0.98]`. Over that same body the CCDF of a
/// log-logistic law is not straight (its log-log slope runs from 0 to `−ρ`),
/// so `β` is fitted on the upper tail `F ∈ [0.95, 0.998]`, where
/// `ln(1 − F) ≈ −ρ ln x + c`.
pub fn fit_power_law(statistic: &str, values: &[f64]) -> Result<DistributionFit, DiscoverError> {
    if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(DiscoverError::NonPositive(statistic.to_string()));
    }
    if values.len() < MIN_SAMPLES {
        return Err(DiscoverError::TooFewSamples {
            statistic: statistic.to_string(),
            needed: MIN_SAMPLES,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    // (ln x, F(x)) at each distinct value, excluding the maximum where F = 1
    let mut support = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        support.push((sorted[i].ln(), j as f64 / n));
        i = j;
    }
    let unique_values = support.len();
    support.pop();
    if support.is_empty() {
        return Err(DiscoverError::Degenerate(statistic.to_string()));
    }
    let select = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        support.iter().copied().filter(|&(_, f)| f >= lo && f <= hi).collect()
    };
    let regress = |pts: &[(f64, f64)], y: fn(f64) -> f64| {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| y(p.1)).collect();
        least_squares(&xs, &ys)
    };
    let log_odds = |f: f64| (f / (1.0 - f)).ln();
    let log_ccdf = |f: f64| (1.0 - f).ln();

    let mut body = select(BODY_TRIM, 1.0 - BODY_TRIM);
    if body.len() < 2 {
        body = support.clone();
    }
    let odds = regress(&body, log_odds).ok_or_else(|| DiscoverError::Degenerate(statistic.to_string()))?;

    let tail = select(TAIL_BAND.0, TAIL_BAND.1);
    let (ccdf, beta_support) = match (tail.len() >= MIN_TAIL_POINTS)
        .then(|| regress(&tail, log_ccdf))
        .flatten()
    {
        Some(fit) => (fit, "tail"),
        None => (
            regress(&body, log_ccdf).ok_or_else(|| DiscoverError::Degenerate(statistic.to_string()))?,
            "body",
        ),
    };
    Ok(DistributionFit {
        statistic: statistic.to_string(),
        samples: values.len(),
        unique_values,
        rho: odds.slope,
        rho_r2: odds.r_squared,
        beta: ccdf.slope,
        beta_r2: ccdf.r_squared,
        beta_support,
        discrepancy: (ccdf.slope.abs() - odds.slope).abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statistic {
    pub name: &'static str,
    pub values: Vec<f64>,
}

/// The ten ledger statistics, zeros removed, in [`STATISTIC_NAMES`] order.
///
/// Pair statistics are over ordered `(src, dst)` pairs: "Pair Amount" is the
/// summed amount and "Pair Multiplicity" the transaction count. Account
/// weights are divided by 1000. Degrees ignore self-loops.
pub fn extract_statistics(log: &TransactionLog) -> Vec<Statistic> {
    let txns = log.transactions();
    let amounts: Vec<f64> = txns.iter().map(|t| t.amount).collect();

    let mut pairs: HashMap<(usize, usize), (f64, u64, Vec<i64>)> = HashMap::new();
    for t in txns {
        let e = pairs.entry((t.src, t.dst)).or_default();
        e.0 += t.amount;
        e.1 += 1;
        e.2.push(t.timestamp);
    }
    let mut keys: Vec<_> = pairs.keys().copied().collect();
    keys.sort_unstable();
    let mut intervals = Vec::new();
    let mut pair_amount = Vec::new();
    let mut pair_count = Vec::new();
    for key in keys {
        let (sum, count, times) = &pairs[&key];
        // the log is sorted by time, so each pair's timestamps are too
        intervals.extend(times.windows(2).map(|w| (w[1] - w[0]) as f64));
        pair_amount.push(*sum);
        pair_count.push(*count as f64);
    }

    let table = node_features(&GraphSnapshot::full(log)).unwrap_or_default();
    let column = |f: Feature, scale: f64| -> Vec<f64> { table.raw.iter().map(|r| r[f.index()] / scale).collect() };
    let columns = [
        amounts,
        intervals,
        pair_amount,
        pair_count,
        column(Feature::TotalOutWeight, 1000.0),
        column(Feature::TotalInWeight, 1000.0),
        column(Feature::MultiOutDegree, 1.0),
        column(Feature::MultiInDegree, 1.0),
        column(Feature::UniqueOutDegree, 1.0),
        column(Feature::UniqueInDegree, 1.0),
    ];
    STATISTIC_NAMES
        .iter()
        .zip(columns)
        .map(|(&name, values)| Statistic {
            name,
            values: values.into_iter().filter(|&v| v > 0.0).collect(),
        })
        .collect()
}
