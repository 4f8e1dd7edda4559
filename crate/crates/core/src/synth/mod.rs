//! Synthetic ledgers and anomaly injection.
//!
//! Base ledgers put a sparse preferential-attachment skeleton of account
//! relationships under a large number of transactions: the binary adjacency
//! stays sparse while multiplicities, amounts and degrees are heavy-tailed.
//! Injection then plants smurfing structures, decoys and behaviour bursts with
//! known ground truth.

mod inject;

pub use inject::{
    inject_behavior_change, inject_noise_patterns, inject_smurf, Decoy, DecoyKind, InjectionConfig, InjectionMode,
    SmurfInjection,
};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use crate::graph::{Transaction, TransactionLog, SECONDS_PER_DAY};
use crate::rng;

/// 2016-01-01T00:00:00Z.
pub const EPOCH: i64 = 1_451_606_400;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("k = {k} leaves no room for sender and receiver among {n} nodes")]
    TooManyIntermediaries { k: usize, n: usize },
    #[error("could not place a pattern with disjoint roles after {0} attempts")]
    Placement(usize),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Shape of a base ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub nodes: usize,
    pub transactions: usize,
    pub days: u32,
    /// Skeleton edges created per arriving node.
    pub attachment: usize,
    pub seed: u64,
}

impl BaseConfig {
    /// Accounting-scale defaults: 254 accounts, 285,298 transactions, one year.
    pub fn accounting(seed: u64) -> Self {
        Self {
            nodes: 254,
            transactions: 285_298,
            days: 365,
            attachment: 2,
            seed,
        }
    }

    /// Czech-style defaults: 2,000 accounts at the Czech ledger's
    /// transactions-per-account ratio.
    pub fn czech(seed: u64) -> Self {
        Self {
            nodes: 2_000,
            transactions: 48_000,
            days: 365,
            attachment: 2,
            seed,
        }
    }
}

/// Client / customer split of a bipartite ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub clients: Vec<usize>,
    pub customers: Vec<usize>,
}

impl Partition {
    pub const CLIENT_PREFIX: &'static str = "client";

    /// Accounts whose id starts with `client` are clients; all others are
    /// customers.
    pub fn from_ids(log: &TransactionLog) -> Self {
        let (clients, customers) = (0..log.n()).partition(|&i| log.account_id(i).starts_with(Self::CLIENT_PREFIX));
        Self { clients, customers }
    }
}

/// Heavy-tailed amounts: log-normal with median 300.
fn amount_distribution() -> LogNormal<f64> {
    LogNormal::new(300f64.ln(), 1.2).expect("valid log-normal")
}

/// Draws `count` transactions over `edges`, each edge chosen with probability
/// proportional to its Pareto-distributed activity; every edge carries at
/// least one transaction when `count` allows.
fn fill_transactions<R: Rng>(rng: &mut R, edges: &[(usize, usize)], count: usize, days: u32) -> Vec<Transaction> {
    if edges.is_empty() || count == 0 {
        return Vec::new();
    }
    let activity = Pareto::new(1.0, 1.1).expect("valid Pareto");
    let mut cumulative = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    for _ in edges {
        acc += activity.sample(rng);
        cumulative.push(acc);
    }
    let amounts = amount_distribution();
    let span = i64::from(days.max(1)) * SECONDS_PER_DAY;
    let make = |rng: &mut R, (src, dst): (usize, usize)| Transaction {
        src,
        dst,
        amount: (amounts.sample(rng) * 100.0).round() / 100.0,
        timestamp: EPOCH + rng.random_range(0..span),
    };
    let mut out = Vec::with_capacity(count);
    for &e in edges.iter().take(count) {
        out.push(make(rng, e));
    }
    while out.len() < count {
        let x = rng.random::<f64>() * acc;
        let i = cumulative.partition_point(|&c| c <= x).min(edges.len() - 1);
        out.push(make(rng, edges[i]));
    }
    out
}

/// Directed preferential attachment: each arriving node links to
/// `attachment` distinct earlier nodes chosen proportionally to degree + 1,
/// in a random direction.
fn preferential_skeleton<R: Rng>(
    rng: &mut R,
    nodes: &[usize],
    attachment: usize,
    allowed: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    let mut degree = vec![0usize; nodes.len()];
    let mut edges = Vec::new();
    for i in 1..nodes.len() {
        let eligible: Vec<usize> = (0..i).filter(|&j| allowed(nodes[i], nodes[j])).collect();
        let total: usize = eligible.iter().map(|&j| degree[j] + 1).sum();
        let mut chosen: Vec<usize> = Vec::new();
        for _ in 0..attachment.min(eligible.len()) {
            loop {
                let mut x = rng.random_range(0..total);
                let mut pick = eligible[0];
                for &j in &eligible {
                    let w = degree[j] + 1;
                    if x < w {
                        pick = j;
                        break;
                    }
                    x -= w;
                }
                if !chosen.contains(&pick) {
                    chosen.push(pick);
                    break;
                }
            }
        }
        for j in chosen {
            degree[i] += 1;
            degree[j] += 1;
            if rng.random_bool(0.5) {
                edges.push((nodes[i], nodes[j]));
            } else {
                edges.push((nodes[j], nodes[i]));
            }
        }
    }
    edges
}

fn named(prefix: &str, n: usize) -> Vec<String> {
    let width = n.max(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Accounting-style base ledger; all `nodes` accounts are registered even if
/// they carry no transactions.
pub fn generate_base(cfg: &BaseConfig) -> Result<TransactionLog, SynthError> {
    if cfg.nodes < 10 {
        return Err(SynthError::TooFewNodes {
            needed: 10,
            got: cfg.nodes,
        });
    }
    let mut rng = rng::chacha(cfg.seed, &[rng::stream::BASE_GRAPH]);
    let mut order: Vec<usize> = (0..cfg.nodes).collect();
    order.shuffle(&mut rng);
    let edges = if cfg.transactions == 0 {
        Vec::new()
    } else {
        preferential_skeleton(&mut rng, &order, cfg.attachment.max(1), |_, _| true)
    };
    let txns = fill_transactions(&mut rng, &edges, cfg.transactions, cfg.days);
    Ok(TransactionLog::from_parts(named("acct", cfg.nodes), txns)?)
}

/// Czech-style base ledger: 40% clients, 60% outside customers, and every
/// relationship joins a client to a customer.
pub fn generate_bipartite_base(cfg: &BaseConfig) -> Result<(TransactionLog, Partition), SynthError> {
    if cfg.nodes < 10 {
        return Err(SynthError::TooFewNodes {
            needed: 10,
            got: cfg.nodes,
        });
    }
    let n_clients = (cfg.nodes * 2) / 5;
    let partition = Partition {
        clients: (0..n_clients).collect(),
        customers: (n_clients..cfg.nodes).collect(),
    };
    let mut rng = rng::chacha(cfg.seed, &[rng::stream::BASE_GRAPH]);
    let mut order: Vec<usize> = (0..cfg.nodes).collect();
    order.shuffle(&mut rng);
    let edges = if cfg.transactions == 0 {
        Vec::new()
    } else {
        let is_client = |i: usize| i < n_clients;
        preferential_skeleton(&mut rng, &order, cfg.attachment.max(1), |a, b| {
            is_client(a) != is_client(b)
        })
    };
    let txns = fill_transactions(&mut rng, &edges, cfg.transactions, cfg.days);
    let mut ids = named(Partition::CLIENT_PREFIX, n_clients);
    ids.extend(named("customer", cfg.nodes - n_clients));
    Ok((TransactionLog::from_parts(ids, txns)?, partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AdjMatrix;

    #[test]
    fn empty_base_registers_accounts() {
        let log = generate_base(&BaseConfig {
            nodes: 10,
            transactions: 0,
            days: 10,
            attachment: 2,
            seed: 0,
        })
        .unwrap();
        assert_eq!(log.n(), 10);
        assert!(log.is_empty());
    }

    #[test]
    fn base_is_deterministic_and_sized() {
        let cfg = BaseConfig {
            transactions: 20_000,
            ..BaseConfig::accounting(5)
        };
        let a = generate_base(&cfg).unwrap();
        let b = generate_base(&cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.len(), 20_000);
        assert_eq!(a.self_loop_count(), 0);
        let (lo, hi) = a.span().unwrap();
        assert!(lo >= EPOCH && hi < EPOCH + 365 * SECONDS_PER_DAY);
        // sparse skeleton under a dense multigraph
        let adj = AdjMatrix::from_log(&a);
        assert!(adj.nnz() <= 2 * 253);
    }

    #[test]
    fn bipartite_edges_cross_partition() {
        let (log, part) = generate_bipartite_base(&BaseConfig {
            transactions: 5_000,
            ..BaseConfig::czech(1)
        })
        .unwrap();
        let clients: std::collections::HashSet<_> = part.clients.iter().copied().collect();
        assert!(log
            .transactions()
            .iter()
            .all(|t| clients.contains(&t.src) != clients.contains(&t.dst)));
        assert_eq!(Partition::from_ids(&log), part);
    }
}
