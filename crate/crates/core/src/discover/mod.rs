//! Month × account-pair projections and distribution fits.
//!
//! The activity of every account pair across the twelve months of a year is
//! projected onto the top two singular directions; pairs active in correlated
//! months form "petals" around an origin "stamen" of pairs with no particular
//! seasonality. Separately, ten node and edge statistics are checked for
//! log-logistic behaviour by regressing their CCDF and odds ratio on log axes.

mod petals;
mod powerlaw;

pub use petals::{adjusted_rand_index, cluster_petals, kmeans, silhouette, KMeans, PetalClustering};
pub use powerlaw::{extract_statistics, fit_power_law, DistributionFit, Statistic, STATISTIC_NAMES};

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike};
use serde::Serialize;

use crate::graph::TransactionLog;
use crate::linalg::symmetric_eigen;

pub const MONTHS: usize = 12;

/// Relative size below which the second singular value counts as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum DiscoverError {
    #[error("no transactions in year {0}")]
    NoData(i32),
    #[error("projection needs at least 2 account pairs, got {0}")]
    TooFewRows(usize),
    #[error("{statistic}: need at least {needed} positive samples, got {got}")]
    TooFewSamples {
        statistic: String,
        needed: usize,
        got: usize,
    },
    #[error("{0}: samples must be positive and finite")]
    NonPositive(String),
    #[error("{0}: all samples are equal")]
    Degenerate(String),
    #[error("invalid parameters: {0}")]
    Params(String),
}

/// `log10(1 + count)` of each pair's transactions per calendar month (UTC).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthPairMatrix {
    pub year: i32,
    /// `(src, dst)` account indices in lexicographic order.
    pub pairs: Vec<(usize, usize)>,
    pub rows: Vec<[f64; MONTHS]>,
}

impl MonthPairMatrix {
    pub fn from_rows(year: i32, pairs: Vec<(usize, usize)>, rows: Vec<[f64; MONTHS]>) -> Self {
        assert_eq!(pairs.len(), rows.len());
        Self { year, pairs, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn month_pair_matrix(log: &TransactionLog, year: i32) -> Result<MonthPairMatrix, DiscoverError> {
    let mut counts: BTreeMap<(usize, usize), [u64; MONTHS]> = BTreeMap::new();
    for t in log.transactions() {
        let Some(at) = DateTime::from_timestamp(t.timestamp, 0) else {
            continue;
        };
        if at.year() != year {
            continue;
        }
        counts.entry((t.src, t.dst)).or_insert([0; MONTHS])[at.month0() as usize] += 1;
    }
    if counts.is_empty() {
        return Err(DiscoverError::NoData(year));
    }
    let (pairs, rows) = counts
        .into_iter()
        .map(|(pair, c)| (pair, c.map(|x| (1.0 + x as f64).log10())))
        .unzip();
    Ok(MonthPairMatrix { year, pairs, rows })
}

/// Thin SVD `M = U Σ Vᵀ` of an `m × 12` matrix, components ordered by
/// non-increasing singular value. Only components with `σ > 0` carry a
/// meaningful `U` column; the others are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// `u[i][c]`: row `i`, component `c`.
    pub u: Vec<Vec<f64>>,
    /// `v[c]`: right singular vector of component `c`.
    pub v: Vec<[f64; MONTHS]>,
}

/// Groups (size ≥ 2) of bitwise-identical columns.
fn identical_columns(rows: &[[f64; MONTHS]]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for m in 0..MONTHS {
        let same = |g: &Vec<usize>| rows.iter().all(|r| r[g[0]].to_bits() == r[m].to_bits());
        match groups.iter_mut().find(|g| same(g)) {
            Some(g) => g.push(m),
            None => groups.push(vec![m]),
        }
    }
    groups.retain(|g| g.len() > 1);
    groups
}

/// SVD through the 12 × 12 Gram matrix `MᵀM`. Each right singular vector is
/// sign-fixed so that its largest-magnitude entry is positive; `U` follows.
pub fn svd(rows: &[[f64; MONTHS]]) -> Svd {
    let mut gram = [0.0; MONTHS * MONTHS];
    for row in rows {
        for a in 0..MONTHS {
            if row[a] == 0.0 {
                continue;
            }
            for b in 0..MONTHS {
                gram[a * MONTHS + b] += row[a] * row[b];
            }
        }
    }
    let (values, mut vectors) = symmetric_eigen(&gram, MONTHS);
    // identical columns have identical right singular components; make that
    // exact rather than equal up to rounding
    for group in identical_columns(rows) {
        for vec in vectors.iter_mut() {
            let mean = group.iter().map(|&m| vec[m]).sum::<f64>() / group.len() as f64;
            group.iter().for_each(|&m| vec[m] = mean);
        }
    }
    let top = values[0].max(0.0).sqrt();
    let mut singular_values = Vec::with_capacity(MONTHS);
    let mut v = Vec::with_capacity(MONTHS);
    let mut u = vec![vec![0.0; MONTHS]; rows.len()];
    for (c, (lambda, vec)) in values.iter().zip(&vectors).enumerate() {
        let sigma = lambda.max(0.0).sqrt();
        let mut vc: [f64; MONTHS] = std::array::from_fn(|m| vec[m]);
        let lead = vc
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            vc.iter_mut().for_each(|x| *x = -*x);
        }
        let meaningful = sigma > RANK_TOLERANCE * top;
        singular_values.push(if meaningful { sigma } else { 0.0 });
        if meaningful {
            for (ui, row) in u.iter_mut().zip(rows) {
                ui[c] = row.iter().zip(&vc).map(|(x, y)| x * y).sum::<f64>() / sigma;
            }
        }
        v.push(vc);
    }
    Svd { singular_values, u, v }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    /// Month `m` at `(Vᵀ[0][m], Vᵀ[1][m])`.
    pub month_points: Vec<[f64; 2]>,
    /// Pair `i` at `(U[i][0], U[i][1])`.
    pub pair_points: Vec<[f64; 2]>,
    pub singular_values: Vec<f64>,
    /// Set when the matrix has rank < 2; the second coordinate is then zero.
    pub rank_deficient: bool,
}

pub fn svd_project(matrix: &MonthPairMatrix) -> Result<Projection, DiscoverError> {
    if matrix.len() < 2 {
        return Err(DiscoverError::TooFewRows(matrix.len()));
    }
    let d = svd(&matrix.rows);
    let rank_deficient = d.singular_values[1] == 0.0;
    if rank_deficient {
        log::warn!("month x pair matrix has rank < 2; second coordinate set to zero");
    }
    let second = |x: f64| if rank_deficient { 0.0 } else { x };
    let month_points = (0..MONTHS).map(|m| [d.v[0][m], second(d.v[1][m])]).collect();
    let pair_points = d.u.iter().map(|u| [u[0], second(u[1])]).collect();
    Ok(Projection {
        month_points,
        pair_points,
        singular_values: d.singular_values,
        rank_deficient,
    })
}

/// Tunables for [`run_discover`].
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DiscoverConfig {
    pub year: i32,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl DiscoverConfig {
    pub fn new(year: i32) -> Self {
        Self {
            year,
            k_min: 2,
            k_max: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscoverOutput {
    pub matrix: MonthPairMatrix,
    pub projection: Projection,
    pub petals: PetalClustering,
    pub fits: Vec<(String, Result<DistributionFit, String>)>,
}

/// Projection, petal clustering and the ten distribution fits.
pub fn run_discover(log: &TransactionLog, cfg: &DiscoverConfig) -> Result<DiscoverOutput, DiscoverError> {
    use rayon::prelude::*;
    let matrix = month_pair_matrix(log, cfg.year)?;
    let projection = svd_project(&matrix)?;
    let petals = cluster_petals(&projection.pair_points, cfg.k_min..=cfg.k_max, cfg.seed)?;
    let fits = extract_statistics(log)
        .into_par_iter()
        .map(|s| {
            let fit = fit_power_law(s.name, &s.values).map_err(|e| e.to_string());
            (s.name.to_string(), fit)
        })
        .collect();
    Ok(DiscoverOutput {
        matrix,
        projection,
        petals,
        fits,
    })
}
