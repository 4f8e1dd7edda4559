//! Ledger ingest, sliding windows and adjacency matrices.

mod features;

pub use features::{node_features, node_features_for, Feature, NodeFeatureTable, FEATURE_COUNT};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::Serialize;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("ledger contains no transactions")]
    EmptyLog,
    #[error("{} invalid row(s): {}", .0.len(), summarize_rows(.0))]
    InvalidRows(Vec<RowError>),
    #[error("invalid window parameters: {0}")]
    Window(String),
    #[error("index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("snapshot has no edges")]
    EmptySnapshot,
}

/// One rejected input row. `line` is the 1-based line in the file (header is line 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub reason: String,
}

fn summarize_rows(rows: &[RowError]) -> String {
    let shown: Vec<String> = rows
        .iter()
        .take(10)
        .map(|r| format!("line {} ({})", r.line, r.reason))
        .collect();
    let more = if rows.len() > 10 { ", ..." } else { "" };
    format!("{}{}", shown.join(", "), more)
}

/// A ledger posting between two dense account indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transaction {
    pub src: usize,
    pub dst: usize,
    /// Non-negative amount in currency units.
    pub amount: f64,
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
}

impl Transaction {
    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

/// Time-ordered transactions plus the account-id ↔ dense-index bijection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransactionLog {
    accounts: Vec<String>,
    index: HashMap<String, usize>,
    transactions: Vec<Transaction>,
}

impl TransactionLog {
    /// Builds a log from registered accounts and transactions over them.
    ///
    /// Transactions are stably sorted by timestamp.
    pub fn from_parts(accounts: Vec<String>, mut transactions: Vec<Transaction>) -> Result<Self, GraphError> {
        let n = accounts.len();
        let mut index = HashMap::with_capacity(n);
        for (i, a) in accounts.iter().enumerate() {
            if a.is_empty() {
                return Err(GraphError::Format(format!("account {i} has an empty id")));
            }
            if index.insert(a.clone(), i).is_some() {
                return Err(GraphError::Format(format!("duplicate account id {a:?}")));
            }
        }
        for t in &transactions {
            for idx in [t.src, t.dst] {
                if idx >= n {
                    return Err(GraphError::IndexOutOfRange { index: idx, n });
                }
            }
            if !(t.amount >= 0.0 && t.amount.is_finite()) {
                return Err(GraphError::Format(format!("invalid amount {}", t.amount)));
            }
        }
        transactions.sort_by_key(|t| t.timestamp);
        Ok(Self {
            accounts,
            index,
            transactions,
        })
    }

    /// Number of registered accounts.
    pub fn n(&self) -> usize {
        self.accounts.len()
    }

    pub fn accounts(&self) -> &[String] {
        &self.accounts
    }

    pub fn account_id(&self, index: usize) -> &str {
        &self.accounts[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn self_loop_count(&self) -> usize {
        self.transactions.iter().filter(|t| t.is_self_loop()).count()
    }

    /// First and last timestamps, if any.
    pub fn span(&self) -> Option<(i64, i64)> {
        Some((
            self.transactions.first()?.timestamp,
            self.transactions.last()?.timestamp,
        ))
    }

    /// Consumes the log, returning accounts and transactions.
    pub fn into_parts(self) -> (Vec<String>, Vec<Transaction>) {
        (self.accounts, self.transactions)
    }

    /// Writes the log in the generic CSV format with epoch-second timestamps.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "src,dst,amount,timestamp")?;
        for t in &self.transactions {
            writeln!(
                out,
                "{},{},{},{}",
                self.accounts[t.src], self.accounts[t.dst], t.amount, t.timestamp
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TimestampFormat {
    Epoch,
    Iso,
}

fn parse_iso(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&dt).timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| Utc.from_utc_datetime(&dt).timestamp())
}

fn parse_timestamp(s: &str, format: TimestampFormat) -> Option<i64> {
    match format {
        TimestampFormat::Epoch => s.parse::<i64>().ok(),
        TimestampFormat::Iso => parse_iso(s),
    }
}

/// Loads a generic CSV ledger with header `src,dst,amount,timestamp`.
///
/// Timestamps are either integer epoch seconds or ISO-8601; the format is
/// chosen from the first data row and applied to the whole column. Dense
/// indices follow first appearance (src before dst within a row).
pub fn load_transactions(path: &Path) -> Result<TransactionLog, GraphError> {
    let file = File::open(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_transactions(BufReader::new(file))
}

/// Like [`load_transactions`] but over any reader.
pub fn read_transactions<R: std::io::Read>(reader: R) -> Result<TransactionLog, GraphError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(GraphError::Format(e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(GraphError::EmptyLog);
    }
    let expected = ["src", "dst", "amount", "timestamp"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(GraphError::Format(format!(
            "expected header src,dst,amount,timestamp, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut accounts = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut transactions = Vec::new();
    let mut errors = Vec::new();
    let mut format = None;
    let mut intern = |id: &str, accounts: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(id) {
            return i;
        }
        accounts.push(id.to_string());
        index.insert(id.to_string(), accounts.len() - 1);
        accounts.len() - 1
    };

    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                errors.push(RowError {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            errors.push(RowError {
                line,
                reason: format!("expected 4 fields, found {}", record.len()),
            });
            continue;
        }
        let (src, dst) = (&record[0], &record[1]);
        if src.is_empty() || dst.is_empty() {
            errors.push(RowError {
                line,
                reason: "empty account id".into(),
            });
            continue;
        }
        let amount = match record[2].parse::<f64>() {
            Ok(a) if a.is_finite() && a >= 0.0 => a,
            _ => {
                errors.push(RowError {
                    line,
                    reason: format!("invalid amount {:?}", &record[2]),
                });
                continue;
            }
        };
        let fmt = *format.get_or_insert_with(|| {
            if record[3].parse::<i64>().is_ok() {
                TimestampFormat::Epoch
            } else {
                TimestampFormat::Iso
            }
        });
        let Some(timestamp) = parse_timestamp(&record[3], fmt) else {
            errors.push(RowError {
                line,
                reason: format!("unparseable timestamp {:?}", &record[3]),
            });
            continue;
        };
        let s = intern(src, &mut accounts);
        let d = intern(dst, &mut accounts);
        transactions.push(Transaction {
            src: s,
            dst: d,
            amount,
            timestamp,
        });
    }
    if !errors.is_empty() {
        return Err(GraphError::InvalidRows(errors));
    }
    if transactions.is_empty() {
        return Err(GraphError::EmptyLog);
    }
    let self_loops = transactions.iter().filter(|t| t.is_self_loop()).count();
    if self_loops > 0 {
        log::warn!("{self_loops} self-loop transaction(s) in ledger");
    }
    TransactionLog::from_parts(accounts, transactions)
}

/// Transactions falling in one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    pub window_start: i64,
    /// Exclusive.
    pub window_end: i64,
    /// `(src, dst, amount)` multiset.
    pub edges: Vec<(usize, usize, f64)>,
    /// Sorted dense indices touched by at least one edge.
    pub node_ids: Vec<usize>,
}

impl GraphSnapshot {
    pub fn new(window_start: i64, window_end: i64, edges: Vec<(usize, usize, f64)>) -> Self {
        let mut node_ids: Vec<usize> = edges.iter().flat_map(|&(s, d, _)| [s, d]).collect();
        node_ids.sort_unstable();
        node_ids.dedup();
        Self {
            window_start,
            window_end,
            edges,
            node_ids,
        }
    }

    /// The whole log as a single snapshot.
    pub fn full(log: &TransactionLog) -> Self {
        let (start, end) = log.span().unwrap_or((0, 0));
        let edges = log.transactions().iter().map(|t| (t.src, t.dst, t.amount)).collect();
        Self::new(start, end + 1, edges)
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Splits the log into overlapping windows of `window_days`.
///
/// Windows start at the first timestamp and advance by
/// `window_days·(1 − overlap_fraction)` days. The count is the smallest
/// number of windows whose union reaches the last timestamp; the last window
/// is stretched by at most its closing second so that the final transaction
/// is never dropped, and it may be only partially filled.
pub fn window_split(
    log: &TransactionLog,
    window_days: u32,
    overlap_fraction: f64,
) -> Result<Vec<GraphSnapshot>, GraphError> {
    let bounds = window_bounds(log, window_days, overlap_fraction)?;
    let txns = log.transactions();
    Ok(bounds
        .into_iter()
        .map(|(start, end)| {
            let lo = txns.partition_point(|t| t.timestamp < start);
            let hi = txns.partition_point(|t| t.timestamp < end);
            let edges = txns[lo..hi].iter().map(|t| (t.src, t.dst, t.amount)).collect();
            GraphSnapshot::new(start, end, edges)
        })
        .collect())
}

/// Window `[start, end)` boundaries used by [`window_split`].
pub fn window_bounds(
    log: &TransactionLog,
    window_days: u32,
    overlap_fraction: f64,
) -> Result<Vec<(i64, i64)>, GraphError> {
    if window_days < 1 {
        return Err(GraphError::Window("window_days must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(GraphError::Window(format!(
            "overlap_fraction must be in [0, 1), got {overlap_fraction}"
        )));
    }
    let Some((first, last)) = log.span() else {
        return Ok(Vec::new());
    };
    let width = window_days as i64 * SECONDS_PER_DAY;
    let step = ((width as f64) * (1.0 - overlap_fraction)).round().max(1.0) as i64;
    let span = last - first;
    let count = if span > width {
        1 + (span - width + step - 1) / step
    } else {
        1
    };
    Ok((0..count)
        .map(|i| {
            let start = first + i * step;
            let mut end = start + width;
            if i == count - 1 {
                end = end.max(last + 1);
            }
            (start, end)
        })
        .collect())
}

/// Sparse binary directed adjacency over dense indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
}

impl AdjMatrix {
    /// Builds a binary matrix from `(row, col)` pairs; repeats collapse.
    pub fn new<I>(n: usize, pairs: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
        if let Some(&(r, c)) = pairs.iter().find(|&&(r, c)| r >= n || c >= n) {
            return Err(GraphError::IndexOutOfRange { index: r.max(c), n });
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut row_ptr = vec![0; n + 1];
        for &(r, _) in &pairs {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let cols = pairs.iter().map(|&(_, c)| c).collect();

        let mut by_col: Vec<(usize, usize)> = pairs.iter().map(|&(r, c)| (c, r)).collect();
        by_col.sort_unstable();
        let mut col_ptr = vec![0; n + 1];
        for &(c, _) in &by_col {
            col_ptr[c + 1] += 1;
        }
        for i in 0..n {
            col_ptr[i + 1] += col_ptr[i];
        }
        let rows = by_col.iter().map(|&(_, r)| r).collect();
        Ok(Self {
            n,
            row_ptr,
            cols,
            col_ptr,
            rows,
        })
    }

    /// The binary adjacency of the whole log (self-loops dropped).
    pub fn from_log(log: &TransactionLog) -> Self {
        binary_adjacency(&GraphSnapshot::full(log), log.n()).expect("log indices are always in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nonzeros.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn out_neighbors(&self, row: usize) -> &[usize] {
        &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn in_neighbors(&self, col: usize) -> &[usize] {
        &self.rows[self.col_ptr[col]..self.col_ptr[col + 1]]
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.n && self.out_neighbors(row).binary_search(&col).is_ok()
    }

    /// Nonzeros in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |r| self.out_neighbors(r).iter().map(move |&c| (r, c)))
    }

    /// Rows and columns permuted identically: old index `order[p]` moves to `p`.
    pub fn permute(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n, "order must be a permutation of 0..n");
        let mut position = vec![usize::MAX; self.n];
        for (p, &old) in order.iter().enumerate() {
            position[old] = p;
        }
        assert!(position.iter().all(|&p| p != usize::MAX), "order is not a permutation");
        Self::new(self.n, self.iter().map(|(r, c)| (position[r], position[c])))
            .expect("permutation keeps indices in range")
    }
}

/// Binary adjacency of a snapshot: `(i, j)` is set iff some edge `i → j`
/// exists. Self-loops are dropped.
pub fn binary_adjacency(snapshot: &GraphSnapshot, n: usize) -> Result<AdjMatrix, GraphError> {
    AdjMatrix::new(
        n,
        snapshot
            .edges
            .iter()
            .filter(|&&(s, d, _)| s != d)
            .map(|&(s, d, _)| (s, d)),
    )
}
