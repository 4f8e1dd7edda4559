use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{Partition, SynthError};
use crate::graph::{window_bounds, AdjMatrix, Transaction, TransactionLog, SECONDS_PER_DAY};
use crate::rng;
use crate::smurf::SmurfPattern;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Amounts of planted transfers stay under this reporting threshold.
const REPORTING_THRESHOLD: f64 = 10_000.0;
/// Extra intermediaries carried by each decoy.
pub const DECOY_EXTRA: usize = 20;
/// Interior density of dense decoys and outside-link ratio of camouflaged ones.
pub const DECOY_DENSITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionMode {
    /// Roles drawn from any account.
    AccountingStyle,
    /// Sender and receiver are clients, intermediaries are customers.
    CzechStyle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    pub k: usize,
    pub mode: InjectionMode,
    /// Chance that an intermediary gets one extra link to a normal account.
    pub camouflage_prob: f64,
    /// Chance of each ordered intermediary → intermediary link.
    pub inter_intermediary_prob: f64,
    pub n_noise_patterns: usize,
    /// Intermediaries are drawn from accounts with at most this many distinct
    /// counterparties (mule-like accounts); `None` draws from every account.
    pub max_intermediary_degree: Option<usize>,
    pub seed: u64,
}

impl InjectionConfig {
    pub fn accounting(k: usize, seed: u64) -> Self {
        Self {
            k,
            mode: InjectionMode::AccountingStyle,
            camouflage_prob: 0.02,
            inter_intermediary_prob: 0.0,
            n_noise_patterns: 1,
            max_intermediary_degree: Some(2),
            seed,
        }
    }

    pub fn czech(k: usize, seed: u64) -> Self {
        Self {
            mode: InjectionMode::CzechStyle,
            inter_intermediary_prob: 0.0005,
            ..Self::accounting(k, seed)
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.k < 3 {
            return Err(SynthError::Params(format!("k must be at least 3, got {}", self.k)));
        }
        for p in [self.camouflage_prob, self.inter_intermediary_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Params(format!("probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Ledger with a planted pattern and its ground truth.
#[derive(Debug, Clone)]
pub struct SmurfInjection {
    pub log: TransactionLog,
    pub truth: SmurfPattern,
    /// Intermediary ↔ intermediary links re-added after clearing.
    pub interior_edges: usize,
    pub camouflage_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoyKind {
    /// Interior links among intermediaries at 30% density.
    Dense,
    /// Each intermediary linked to `⌈0.3·k'⌉` normal accounts, so that well
    /// over 30% of its edges leave the structure.
    Camouflaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoy {
    pub kind: DecoyKind,
    pub pattern: SmurfPattern,
}

/// Pools of accounts eligible for each role.
struct Pools {
    ends: Vec<usize>,
    middle: Vec<usize>,
}

fn pools(
    log: &TransactionLog,
    adj: &AdjMatrix,
    cfg: &InjectionConfig,
    k: usize,
    partition: Option<&Partition>,
    reserved: &HashSet<usize>,
) -> Pools {
    let keep = |v: &[usize]| v.iter().copied().filter(|i| !reserved.contains(i)).collect::<Vec<_>>();
    let (ends, middle) = match cfg.mode {
        InjectionMode::AccountingStyle => {
            let all: Vec<usize> = (0..log.n()).collect();
            (keep(&all), keep(&all))
        }
        InjectionMode::CzechStyle => {
            let owned;
            let p = match partition {
                Some(p) => p,
                None => {
                    owned = Partition::from_ids(log);
                    &owned
                }
            };
            (keep(&p.clients), keep(&p.customers))
        }
    };
    let middle = match cfg.max_intermediary_degree {
        None => middle,
        Some(limit) => {
            let counterparties = |i: usize| {
                let mut seen: Vec<usize> = adj
                    .out_neighbors(i)
                    .iter()
                    .chain(adj.in_neighbors(i))
                    .copied()
                    .collect();
                seen.sort_unstable();
                seen.dedup();
                seen.len()
            };
            let mut ranked: Vec<(usize, usize)> = middle.iter().map(|&i| (counterparties(i), i)).collect();
            ranked.sort_unstable();
            // the quietest accounts, topped up past the limit when too few qualify
            let quiet = ranked.iter().take_while(|(d, _)| *d <= limit).count();
            ranked.truncate(quiet.max((k + 2).min(ranked.len())));
            let mut pool: Vec<usize> = ranked.into_iter().map(|(_, i)| i).collect();
            pool.sort_unstable();
            pool
        }
    };
    Pools { ends, middle }
}

fn transfer(rng: &mut ChaCha8Rng, src: usize, dst: usize, span: (i64, i64), out: &mut Vec<Transaction>) {
    for _ in 0..rng.random_range(1..=3) {
        out.push(Transaction {
            src,
            dst,
            amount: (rng.random_range(0.1..0.99) * REPORTING_THRESHOLD).round(),
            timestamp: rng.random_range(span.0..span.1.max(span.0 + 1)),
        });
    }
}

fn log_span(log: &TransactionLog) -> (i64, i64) {
    log.span()
        .map_or((super::EPOCH, super::EPOCH + SECONDS_PER_DAY), |(a, b)| (a, b + 1))
}

/// Picks sender, receiver and `k` intermediaries such that no other account
/// already relays from the sender to the receiver, so the planted block is
/// exactly the candidate for its `(sender, receiver)` pair.
fn place(rng: &mut ChaCha8Rng, adj: &AdjMatrix, pools: &Pools, k: usize) -> Result<SmurfPattern, SynthError> {
    if pools.middle.len() < k || pools.ends.len() < 2 {
        return Err(SynthError::TooManyIntermediaries { k, n: adj.n() });
    }
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let ends: Vec<usize> = pools.ends.choose_multiple(rng, 2).copied().collect();
        let (s, r) = (ends[0], ends[1]);
        let middle: Vec<usize> = pools.middle.iter().copied().filter(|&m| m != s && m != r).collect();
        if middle.len() < k {
            continue;
        }
        let mut inter: Vec<usize> = middle.choose_multiple(rng, k).copied().collect();
        inter.sort_unstable();
        let chosen: HashSet<usize> = inter.iter().copied().collect();
        let relayed = adj
            .out_neighbors(s)
            .iter()
            .any(|&m| m != r && !chosen.contains(&m) && adj.contains(m, r));
        if !relayed {
            return Ok(SmurfPattern::new(s, inter, r));
        }
    }
    Err(SynthError::Placement(MAX_PLACEMENT_ATTEMPTS))
}

/// A random normal account for `m` to link with, in a random direction.
fn camouflage(rng: &mut ChaCha8Rng, m: usize, normal: &[usize], span: (i64, i64), out: &mut Vec<Transaction>) {
    if let Some(&other) = normal.choose(rng) {
        if rng.random_bool(0.5) {
            transfer(rng, m, other, span, out);
        } else {
            transfer(rng, other, m, span, out);
        }
    }
}

fn normal_accounts(n: usize, roles: &HashSet<usize>) -> Vec<usize> {
    (0..n).filter(|i| !roles.contains(i)).collect()
}

/// Plants a sender → k intermediaries → receiver structure.
///
/// Existing intermediary ↔ intermediary transactions are deleted, then each
/// ordered intermediary pair is re-linked with `inter_intermediary_prob`, and
/// each intermediary gains one camouflage link with `camouflage_prob`.
/// Roles listed in `reserved` are never used.
pub fn inject_smurf(
    log: &TransactionLog,
    cfg: &InjectionConfig,
    partition: Option<&Partition>,
    reserved: &[usize],
) -> Result<SmurfInjection, SynthError> {
    cfg.validate()?;
    let n = log.n();
    if cfg.k + 2 > n {
        return Err(SynthError::TooManyIntermediaries { k: cfg.k, n });
    }
    let mut rng = rng::chacha(cfg.seed, &[rng::stream::INJECT]);
    let reserved: HashSet<usize> = reserved.iter().copied().collect();
    let adj = AdjMatrix::from_log(log);
    let pools = pools(log, &adj, cfg, cfg.k, partition, &reserved);
    let truth = place(&mut rng, &adj, &pools, cfg.k)?;
    let inter: HashSet<usize> = truth.intermediaries.iter().copied().collect();
    let mut txns: Vec<Transaction> = log
        .transactions()
        .iter()
        .filter(|t| t.is_self_loop() || !(inter.contains(&t.src) && inter.contains(&t.dst)))
        .cloned()
        .collect();
    let span = log_span(log);
    for &m in &truth.intermediaries {
        transfer(&mut rng, truth.sender, m, span, &mut txns);
        transfer(&mut rng, m, truth.receiver, span, &mut txns);
    }
    let mut interior_edges = 0;
    if cfg.inter_intermediary_prob > 0.0 {
        for &a in &truth.intermediaries {
            for &b in &truth.intermediaries {
                if a != b && rng.random_bool(cfg.inter_intermediary_prob) {
                    transfer(&mut rng, a, b, span, &mut txns);
                    interior_edges += 1;
                }
            }
        }
    }
    let mut roles: HashSet<usize> = truth.indices().collect();
    roles.extend(&reserved);
    let normal = normal_accounts(n, &roles);
    let mut camouflage_edges = 0;
    for &m in &truth.intermediaries {
        if rng.random_bool(cfg.camouflage_prob) {
            camouflage(&mut rng, m, &normal, span, &mut txns);
            camouflage_edges += 1;
        }
    }
    Ok(SmurfInjection {
        log: TransactionLog::from_parts(log.accounts().to_vec(), txns)?,
        truth,
        interior_edges,
        camouflage_edges,
    })
}

/// Adds `cfg.n_noise_patterns` decoys with `k + 20` intermediaries each,
/// alternating at random between dense and camouflaged. Decoy roles avoid
/// `reserved` and each other.
pub fn inject_noise_patterns(
    log: &TransactionLog,
    cfg: &InjectionConfig,
    partition: Option<&Partition>,
    reserved: &[usize],
) -> Result<(TransactionLog, Vec<Decoy>), SynthError> {
    cfg.validate()?;
    if cfg.n_noise_patterns == 0 {
        return Ok((log.clone(), Vec::new()));
    }
    let n = log.n();
    let k = cfg.k + DECOY_EXTRA;
    let mut rng = rng::chacha(cfg.seed, &[rng::stream::DECOY]);
    let mut taken: HashSet<usize> = reserved.iter().copied().collect();
    let adj = AdjMatrix::from_log(log);
    let span = log_span(log);
    let mut txns = log.transactions().to_vec();
    let mut decoys = Vec::with_capacity(cfg.n_noise_patterns);
    for _ in 0..cfg.n_noise_patterns {
        let pools = pools(log, &adj, cfg, k, partition, &taken);
        let pattern = place(&mut rng, &adj, &pools, k)?;
        taken.extend(pattern.indices());
        let kind = if rng.random_bool(0.5) {
            DecoyKind::Dense
        } else {
            DecoyKind::Camouflaged
        };
        for &m in &pattern.intermediaries {
            transfer(&mut rng, pattern.sender, m, span, &mut txns);
            transfer(&mut rng, m, pattern.receiver, span, &mut txns);
        }
        match kind {
            DecoyKind::Dense => {
                for &a in &pattern.intermediaries {
                    for &b in &pattern.intermediaries {
                        if a != b && rng.random_bool(DECOY_DENSITY) {
                            transfer(&mut rng, a, b, span, &mut txns);
                        }
                    }
                }
            }
            DecoyKind::Camouflaged => {
                let links = (DECOY_DENSITY * k as f64).ceil() as usize;
                let normal = normal_accounts(n, &taken);
                for &m in &pattern.intermediaries {
                    for _ in 0..links {
                        camouflage(&mut rng, m, &normal, span, &mut txns);
                    }
                }
            }
        }
        decoys.push(Decoy { kind, pattern });
    }
    Ok((TransactionLog::from_parts(log.accounts().to_vec(), txns)?, decoys))
}

/// Multiplies the outgoing activity of `node_count` random active senders by
/// `magnitude` inside window `window_index`: each gains `(magnitude − 1)·c`
/// transactions to random accounts, where `c` is its count in that window.
/// Returns the new log and the affected nodes.
pub fn inject_behavior_change(
    log: &TransactionLog,
    window_days: u32,
    overlap: f64,
    window_index: usize,
    node_count: usize,
    magnitude: f64,
    seed: u64,
) -> Result<(TransactionLog, Vec<usize>), SynthError> {
    if magnitude.is_nan() || magnitude < 1.0 {
        return Err(SynthError::Params(format!("magnitude must be ≥ 1, got {magnitude}")));
    }
    let bounds = window_bounds(log, window_days, overlap)?;
    let &(start, end) = bounds.get(window_index).ok_or_else(|| {
        SynthError::Params(format!(
            "window {window_index} does not exist ({} windows)",
            bounds.len()
        ))
    })?;
    let mut out_counts = vec![0usize; log.n()];
    let mut out_amounts = vec![Vec::new(); log.n()];
    for t in log
        .transactions()
        .iter()
        .filter(|t| t.timestamp >= start && t.timestamp < end)
    {
        out_counts[t.src] += 1;
        out_amounts[t.src].push(t.amount);
    }
    let mut rng = rng::chacha(seed, &[rng::stream::BURST, window_index as u64]);
    let mut active: Vec<usize> = (0..log.n()).filter(|&i| out_counts[i] > 0).collect();
    active.shuffle(&mut rng);
    active.truncate(node_count);
    active.sort_unstable();
    let mut txns = log.transactions().to_vec();
    let fallback = LogNormal::new(300f64.ln(), 1.2).expect("valid log-normal");
    for &node in &active {
        let extra = ((magnitude - 1.0) * out_counts[node] as f64).round() as usize;
        for _ in 0..extra {
            let mut dst = rng.random_range(0..log.n());
            if dst == node {
                dst = (dst + 1) % log.n();
            }
            let amount = out_amounts[node]
                .choose(&mut rng)
                .copied()
                .unwrap_or_else(|| fallback.sample(&mut rng));
            txns.push(Transaction {
                src: node,
                dst,
                amount,
                timestamp: rng.random_range(start..end),
            });
        }
    }
    Ok((TransactionLog::from_parts(log.accounts().to_vec(), txns)?, active))
}
