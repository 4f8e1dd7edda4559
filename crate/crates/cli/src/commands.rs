//! One function per pipeline; each writes its reports and returns a short
//! human-readable summary.

use std::path::Path;

use serde::Serialize;

use ledgerscope::discover::{run_discover, DiscoverConfig, MONTHS};
use ledgerscope::eval::{run_accuracy_sweep, run_scaling, SweepConfig};
use ledgerscope::focus::run_focus;
use ledgerscope::graph::load_transactions;
use ledgerscope::smurf::{detect, detect_streaming, StreamPoint};
use ledgerscope::synth::{
    generate_base, generate_bipartite_base, inject_noise_patterns, inject_smurf, BaseConfig, DecoyKind,
    InjectionConfig, Partition,
};
use ledgerscope::{AdjMatrix, SmurfPattern, TransactionLog};

use crate::config::{ConfigFile, DiscoverArgs, EvalArgs, FocusArgs, InjectArgs, RunConfig, SmurfArgs, Style};
use crate::output::Output;
use crate::CliError;

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn load(path: &Path) -> Result<TransactionLog, CliError> {
    let log = load_transactions(path).map_err(|e| match e {
        ledgerscope::graph::GraphError::Io { .. } => input_err(e),
        other => CliError::Input(format!("{}: {other}", path.display())),
    })?;
    log::info!(
        "loaded {} transactions over {} accounts from {}",
        log.len(),
        log.n(),
        path.display()
    );
    Ok(log)
}

/// Runs one configuration, then echoes it as `config.json`.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let output = cfg.output();
    // a smurf report may be a single file; its directory holds the config
    let (dir, report_name) = match cfg {
        RunConfig::Smurf(_) if output.extension().is_some_and(|e| e == "json") => (
            output.parent().unwrap_or(Path::new(".")).to_path_buf(),
            output.file_name().map(|n| n.to_string_lossy().into_owned()),
        ),
        _ => (output.to_path_buf(), None),
    };
    let inputs: Vec<&Path> = cfg.input().into_iter().collect();
    let out = Output::new(&dir, &inputs)?;
    let summary = match cfg {
        RunConfig::Smurf(a) => smurf(a, &out, report_name.as_deref().unwrap_or("report.json"))?,
        RunConfig::Focus(a) => focus(a, &out)?,
        RunConfig::Discover(a) => discover(a, &out)?,
        RunConfig::Inject(a) => inject(a, &out)?,
        RunConfig::Eval(a) => eval(a, &out)?,
    };
    out.json(
        "config.json",
        &ConfigFile {
            version: env!("CARGO_PKG_VERSION").to_string(),
            run: cfg.clone(),
        },
    )?;
    Ok(summary)
}

#[derive(Serialize)]
struct NamedPattern {
    sender: String,
    intermediaries: Vec<String>,
    receiver: String,
    k: usize,
}

impl NamedPattern {
    fn new(p: &SmurfPattern, log: &TransactionLog) -> Self {
        Self {
            sender: log.account_id(p.sender).to_string(),
            intermediaries: p
                .intermediaries
                .iter()
                .map(|&i| log.account_id(i).to_string())
                .collect(),
            receiver: log.account_id(p.receiver).to_string(),
            k: p.k(),
        }
    }
}

#[derive(Serialize)]
struct NamedIteration {
    pattern: NamedPattern,
    cost_bits: f64,
    score: f64,
    purity: f64,
    compression: f64,
    reported: bool,
}

#[derive(Serialize)]
struct SmurfReport {
    accounts: usize,
    edges: usize,
    candidates: usize,
    initial_cost_bits: f64,
    final_cost_bits: f64,
    compression_rate: f64,
    patterns: Vec<NamedPattern>,
    iterations: Vec<NamedIteration>,
    /// Account at each position of the reordered matrix.
    permutation: Vec<String>,
    /// `(row, col, value)` nonzeros of the reordered matrix.
    reordered: Vec<(usize, usize, u8)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stream: Option<Vec<StreamPoint>>,
}

fn smurf(a: &SmurfArgs, out: &Output, report_name: &str) -> Result<String, CliError> {
    let log = load(&a.input)?;
    let adj = AdjMatrix::from_log(&log);
    let d = detect(&adj);
    log::info!(
        "{} candidates, {} accepted, {} reported",
        d.candidate_count,
        d.history.len(),
        d.patterns.len()
    );
    let stream = a
        .window_days
        .map(|days| detect_streaming(&log, days, a.overlap))
        .transpose()
        .map_err(input_err)?;
    let report = SmurfReport {
        accounts: log.n(),
        edges: adj.nnz(),
        candidates: d.candidate_count,
        initial_cost_bits: d.initial_cost,
        final_cost_bits: d.final_cost,
        compression_rate: d.compression_rate(),
        patterns: d.patterns.iter().map(|p| NamedPattern::new(p, &log)).collect(),
        iterations: d
            .history
            .iter()
            .enumerate()
            .map(|(i, h)| NamedIteration {
                pattern: NamedPattern::new(&h.pattern, &log),
                cost_bits: h.cost_bits,
                score: h.score,
                purity: h.purity,
                compression: h.compression,
                reported: i < d.patterns.len(),
            })
            .collect(),
        permutation: d.order.iter().map(|&i| log.account_id(i).to_string()).collect(),
        reordered: adj.permute(&d.order).iter().map(|(r, c)| (r, c, 1)).collect(),
        stream,
    };
    let path = out.json(report_name, &report)?;
    Ok(format!("{} pattern(s) reported → {}", d.patterns.len(), path.display()))
}

fn focus(a: &FocusArgs, out: &Output) -> Result<String, CliError> {
    let log = load(&a.input)?;
    let result = run_focus(&log, &a.focus_config()).map_err(input_err)?;
    let rows = result
        .windows
        .iter()
        .zip(&result.report.scores)
        .enumerate()
        .map(|(i, (w, s))| {
            vec![
                i.to_string(),
                w.0.to_string(),
                w.1.to_string(),
                s.map_or_else(String::new, |s| s.to_string()),
            ]
        });
    out.csv(
        "change_scores.csv",
        &["window", "window_start", "window_end", "score"],
        rows,
    )?;
    out.json("explanation.json", &result.explanation)?;
    let e = &result.explanation;
    Ok(format!(
        "window {} (start {}) has the highest change score {:.4}; explained by dimension {} over {:?}",
        e.t_a, e.window_start, e.score, e.dimension, e.plots
    ))
}

#[derive(Serialize)]
struct FitEntry<'a> {
    statistic: &'a str,
    #[serde(flatten)]
    fit: Option<&'a ledgerscope::discover::DistributionFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

fn discover(a: &DiscoverArgs, out: &Output) -> Result<String, CliError> {
    let log = load(&a.input)?;
    let cfg = DiscoverConfig {
        year: a.year,
        k_min: a.k_min,
        k_max: a.k_max,
        seed: a.seed,
    };
    let result = run_discover(&log, &cfg).map_err(input_err)?;
    let p = &result.projection;
    let months = (0..MONTHS).map(|m| {
        let [x, y] = p.month_points[m];
        vec![
            format!("{}-{:02}", a.year, m + 1),
            "month".into(),
            x.to_string(),
            y.to_string(),
            String::new(),
        ]
    });
    let pairs = result.matrix.pairs.iter().enumerate().map(|(i, &(s, d))| {
        let [x, y] = p.pair_points[i];
        vec![
            format!("{}->{}", log.account_id(s), log.account_id(d)),
            "pair".into(),
            x.to_string(),
            y.to_string(),
            result.petals.assignment[i].to_string(),
        ]
    });
    out.csv(
        "projection.csv",
        &["entity", "kind", "x", "y", "cluster"],
        months.chain(pairs),
    )?;
    out.json("petals.json", &result.petals)?;
    let fits: Vec<FitEntry> = result
        .fits
        .iter()
        .map(|(name, fit)| FitEntry {
            statistic: name,
            fit: fit.as_ref().ok(),
            error: fit.as_ref().err().map(String::as_str),
        })
        .collect();
    out.json("powerlaw.json", &fits)?;
    let fitted = result.fits.iter().filter(|(_, f)| f.is_ok()).count();
    Ok(format!(
        "{} pairs projected into {} petal(s) (stamen {}); {fitted}/{} statistics fitted",
        result.matrix.len(),
        result.petals.k,
        result.petals.stamen,
        result.fits.len()
    ))
}

#[derive(Serialize)]
struct NamedDecoy {
    kind: DecoyKind,
    #[serde(flatten)]
    pattern: NamedPattern,
}

#[derive(Serialize)]
struct GroundTruth {
    style: Style,
    #[serde(flatten)]
    pattern: NamedPattern,
    interior_edges: usize,
    camouflage_edges: usize,
    decoys: Vec<NamedDecoy>,
}

fn inject(a: &InjectArgs, out: &Output) -> Result<String, CliError> {
    let mut inj = match a.style {
        Style::Accounting => InjectionConfig::accounting(a.k, a.seed),
        Style::Czech => InjectionConfig::czech(a.k, a.seed),
    };
    inj.n_noise_patterns = a.decoys;
    if let Some(p) = a.camouflage_prob {
        inj.camouflage_prob = p;
    }
    if let Some(p) = a.inter_intermediary_prob {
        inj.inter_intermediary_prob = p;
    }
    let (base, partition) = match &a.input {
        Some(path) => {
            let log = load(path)?;
            let partition = (a.style == Style::Czech).then(|| Partition::from_ids(&log));
            (log, partition)
        }
        None => {
            let mut cfg = match a.style {
                Style::Accounting => BaseConfig::accounting(a.seed),
                Style::Czech => BaseConfig::czech(a.seed),
            };
            cfg.nodes = a.nodes.unwrap_or(cfg.nodes);
            cfg.transactions = a.transactions.unwrap_or(cfg.transactions);
            cfg.days = a.days.unwrap_or(cfg.days);
            match a.style {
                Style::Accounting => (generate_base(&cfg).map_err(input_err)?, None),
                Style::Czech => {
                    let (log, p) = generate_bipartite_base(&cfg).map_err(input_err)?;
                    (log, Some(p))
                }
            }
        }
    };
    let planted = inject_smurf(&base, &inj, partition.as_ref(), &[]).map_err(input_err)?;
    let roles: Vec<usize> = planted.truth.indices().collect();
    let (log, decoys) = inject_noise_patterns(&planted.log, &inj, partition.as_ref(), &roles).map_err(input_err)?;
    let mut csv = Vec::new();
    log.write_csv(&mut csv)
        .map_err(|e| CliError::Internal(format!("cannot format ledger: {e}")))?;
    out.bytes("ledger.csv", &csv)?;
    let truth = GroundTruth {
        style: a.style,
        pattern: NamedPattern::new(&planted.truth, &log),
        interior_edges: planted.interior_edges,
        camouflage_edges: planted.camouflage_edges,
        decoys: decoys
            .iter()
            .map(|d| NamedDecoy {
                kind: d.kind,
                pattern: NamedPattern::new(&d.pattern, &log),
            })
            .collect(),
    };
    out.json("ground_truth.json", &truth)?;
    Ok(format!(
        "{} transactions over {} accounts; planted k = {} pattern {} → … → {} with {} decoy(s)",
        log.len(),
        log.n(),
        a.k,
        truth.pattern.sender,
        truth.pattern.receiver,
        truth.decoys.len()
    ))
}

#[derive(Serialize)]
struct SummaryRow {
    method: &'static str,
    k: usize,
    runs: usize,
    accuracy: f64,
    mean_jaccard: f64,
    mean_wall_ms: f64,
}

fn eval(a: &EvalArgs, out: &Output) -> Result<String, CliError> {
    let mut cfg = match a.preset {
        Style::Accounting => SweepConfig::accounting(a.seed),
        Style::Czech => SweepConfig::czech(a.seed),
    };
    cfg.k_values = a.k_values.clone();
    cfg.runs_per_k = a.runs;
    cfg.injection.n_noise_patterns = a.decoys;
    if a.scaling_sizes.len() == 1 {
        return Err(CliError::Input("--scaling-sizes needs at least two sizes".into()));
    }
    let (results, records) = run_accuracy_sweep(&cfg).map_err(input_err)?;
    let rows = records.iter().map(|r| {
        vec![
            r.method.name().to_string(),
            r.k.to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.correct.to_string(),
            r.jaccard.to_string(),
            format!("{:.3}", r.wall_ms),
        ]
    });
    out.csv(
        "results.csv",
        &["method", "k", "run", "seed", "correct", "jaccard", "wall_ms"],
        rows,
    )?;
    let summary: Vec<SummaryRow> = results
        .iter()
        .map(|r| SummaryRow {
            method: r.method.name(),
            k: r.k,
            runs: r.runs,
            accuracy: r.accuracy,
            mean_jaccard: r.mean_jaccard,
            mean_wall_ms: r.wall_times_ms.iter().sum::<f64>() / r.wall_times_ms.len().max(1) as f64,
        })
        .collect();
    out.json("summary.json", &summary)?;
    if !a.scaling_sizes.is_empty() {
        let report = run_scaling(&a.scaling_sizes, 3);
        out.json("scaling.json", &report)?;
    }
    let line = summary
        .iter()
        .filter(|s| s.method == "full")
        .map(|s| format!("k={}: {:.2}", s.k, s.accuracy))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(format!("full-method accuracy {line}"))
}
