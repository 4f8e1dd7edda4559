//! Accuracy, ablation and scaling experiments on synthetic ledgers.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::focus::{change_scores, make_sketch_spec, sketch_windows, FocusBipartite, FocusError, SketchConfig};
use crate::graph::AdjMatrix;
use crate::linalg::least_squares;
use crate::rng;
use crate::smurf::{detect_candidates, get_sets, max_intermediaries, CandidateSet, ScoreRule, SmurfPattern};
use crate::synth::{
    generate_base, generate_bipartite_base, inject_noise_patterns, inject_smurf, BaseConfig, InjectionConfig,
    InjectionMode, SynthError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Purity × compression.
    Full,
    /// Purity alone.
    NoMdl,
    /// Compression alone.
    NoPurity,
    /// The candidate with the most intermediaries.
    MaxIntermediaries,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Full, Method::NoMdl, Method::NoPurity, Method::MaxIntermediaries];

    pub fn name(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::NoMdl => "no-mdl",
            Method::NoPurity => "no-purity",
            Method::MaxIntermediaries => "max-intermediaries",
        }
    }

    /// The method's single most suspicious pattern.
    pub fn top_pattern(self, adj: &AdjMatrix, candidates: &CandidateSet) -> Option<SmurfPattern> {
        let first_pick = |rule| {
            detect_candidates(adj, candidates, rule)
                .history
                .into_iter()
                .next()
                .map(|h| h.pattern)
        };
        match self {
            Method::Full => detect_candidates(adj, candidates, ScoreRule::Full)
                .patterns
                .into_iter()
                .next(),
            Method::NoMdl => first_pick(ScoreRule::PurityOnly),
            Method::NoPurity => first_pick(ScoreRule::CompressionOnly),
            Method::MaxIntermediaries => max_intermediaries(candidates).cloned(),
        }
    }
}

/// `|a ∩ b| / |a ∪ b|` over all role indices.
pub fn jaccard(a: &SmurfPattern, b: &SmurfPattern) -> f64 {
    let x: std::collections::BTreeSet<usize> = a.indices().collect();
    let y: std::collections::BTreeSet<usize> = b.indices().collect();
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_values: Vec<usize>,
    pub runs_per_k: usize,
    /// Template for every run; `k` and `seed` are overwritten per run.
    pub injection: InjectionConfig,
    /// Template for every run's base ledger; `seed` is overwritten per run.
    pub base: BaseConfig,
    pub seed: u64,
}

impl SweepConfig {
    /// Accounting-scale sweep over k ∈ {10, …, 50} with one decoy per run.
    pub fn accounting(seed: u64) -> Self {
        Self {
            k_values: vec![10, 20, 30, 40, 50],
            runs_per_k: 10,
            injection: InjectionConfig::accounting(10, seed),
            base: BaseConfig::accounting(seed),
            seed,
        }
    }

    pub fn czech(seed: u64) -> Self {
        Self {
            injection: InjectionConfig::czech(10, seed),
            base: BaseConfig::czech(seed),
            ..Self::accounting(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub k: usize,
    pub run: usize,
    pub seed: u64,
    pub correct: bool,
    pub jaccard: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub k: usize,
    pub runs: usize,
    pub accuracy: f64,
    pub mean_jaccard: f64,
    pub wall_times_ms: Vec<f64>,
}

/// Ledger with a planted pattern and its decoys, as used by one run.
pub struct Trial {
    pub adj: AdjMatrix,
    pub truth: SmurfPattern,
    pub decoys: Vec<crate::synth::Decoy>,
}

pub fn build_trial(cfg: &SweepConfig, k: usize, seed: u64) -> Result<Trial, SynthError> {
    let base_cfg = BaseConfig {
        seed,
        ..cfg.base.clone()
    };
    let inj = InjectionConfig {
        k,
        seed,
        ..cfg.injection.clone()
    };
    let (base, partition) = match inj.mode {
        InjectionMode::AccountingStyle => (generate_base(&base_cfg)?, None),
        InjectionMode::CzechStyle => {
            let (log, p) = generate_bipartite_base(&base_cfg)?;
            (log, Some(p))
        }
    };
    let planted = inject_smurf(&base, &inj, partition.as_ref(), &[])?;
    let truth_roles: Vec<usize> = planted.truth.indices().collect();
    let (log, decoys) = inject_noise_patterns(&planted.log, &inj, partition.as_ref(), &truth_roles)?;
    Ok(Trial {
        adj: AdjMatrix::from_log(&log),
        truth: planted.truth,
        decoys,
    })
}

/// Fresh base and injection per `(k, run)`; every method sees the same trial.
/// Records are sorted by `(k, run, method)`.
pub fn run_accuracy_sweep(cfg: &SweepConfig) -> Result<(Vec<ExperimentResult>, Vec<RunRecord>), SynthError> {
    if cfg.runs_per_k == 0 {
        return Err(SynthError::Params("runs_per_k must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize)> = cfg
        .k_values
        .iter()
        .flat_map(|&k| (0..cfg.runs_per_k).map(move |run| (k, run)))
        .collect();
    let per_run: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(k, run)| {
            let seed = rng::derive(cfg.seed, &[rng::stream::EXPERIMENT, k as u64, run as u64]);
            let trial = build_trial(cfg, k, seed)?;
            Ok(Method::ALL
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let candidates = get_sets(&trial.adj);
                    let top = method.top_pattern(&trial.adj, &candidates);
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    RunRecord {
                        method,
                        k,
                        run,
                        seed,
                        correct: top.as_ref().is_some_and(|p| p.same_structure(&trial.truth)),
                        jaccard: top.as_ref().map_or(0.0, |p| jaccard(p, &trial.truth)),
                        wall_ms,
                    }
                })
                .collect())
        })
        .collect::<Result<_, SynthError>>()?;
    let mut records: Vec<RunRecord> = per_run.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.k, r.run, r.method));
    let mut results = Vec::new();
    for &method in &Method::ALL {
        for &k in &cfg.k_values {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| r.method == method && r.k == k).collect();
            let runs = rs.len();
            results.push(ExperimentResult {
                method,
                k,
                runs,
                accuracy: rs.iter().filter(|r| r.correct).count() as f64 / runs as f64,
                mean_jaccard: rs.iter().map(|r| r.jaccard).sum::<f64>() / runs as f64,
                wall_times_ms: rs.iter().map(|r| r.wall_ms).collect(),
            });
        }
    }
    Ok((results, records))
}

/// Groups of candidates that share their intermediaries: each group has
/// `a` senders and `b` receivers around four intermediaries, producing `a·b`
/// candidates of which accepting one prunes the rest.
pub fn scaling_graph(candidates: usize, groups: usize) -> AdjMatrix {
    let per_group = (candidates as f64 / groups.max(1) as f64).max(1.0);
    let a = per_group.sqrt().round().max(1.0) as usize;
    let b = (per_group / a as f64).round().max(1.0) as usize;
    let size = a + 4 + b;
    let mut pairs = Vec::new();
    for g in 0..groups {
        let base = g * size;
        for m in 0..4 {
            let mid = base + a + m;
            pairs.extend((0..a).map(|s| (base + s, mid)));
            pairs.extend((0..b).map(|r| (mid, base + a + 4 + r)));
        }
    }
    AdjMatrix::new(groups * size, pairs).expect("indices in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub requested: usize,
    pub candidates: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln(time)` against `ln |P|`; `None` for fewer
    /// than two distinct sizes.
    pub slope: Option<f64>,
}

/// Fits a log-log slope through `(size, time)` points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    least_squares(&xs, &ys).map(|f| f.slope)
}

/// Times candidate generation plus detection at each size (minimum over
/// `repeats`), on a single worker thread so that the slope reflects the
/// algorithm rather than scheduling.
pub fn run_scaling(sizes: &[usize], repeats: usize) -> ScalingReport {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    let points: Vec<ScalingPoint> = sizes
        .iter()
        .map(|&requested| {
            let adj = scaling_graph(requested, 4);
            let mut best = f64::INFINITY;
            let mut count = 0;
            for _ in 0..repeats.max(1) {
                let (ms, c) = pool.install(|| {
                    let start = Instant::now();
                    let candidates = get_sets(&adj);
                    let d = detect_candidates(&adj, &candidates, ScoreRule::Full);
                    std::hint::black_box(&d);
                    (start.elapsed().as_secs_f64() * 1e3, candidates.len())
                });
                best = best.min(ms);
                count = c;
            }
            ScalingPoint {
                requested,
                candidates: count,
                wall_ms: best,
            }
        })
        .collect();
    let slope = log_log_slope(
        &points
            .iter()
            .map(|p| (p.candidates as f64, p.wall_ms))
            .collect::<Vec<_>>(),
    );
    ScalingReport { points, slope }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimScalingPoint {
    pub dim: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimScalingReport {
    pub points: Vec<DimScalingPoint>,
    pub slope: Option<f64>,
}

/// Times the stages of attention routing that depend on the sketch
/// dimension (sketch construction, evaluation and change scores) over
/// prebuilt bipartites, single-threaded, minimum over `repeats`.
pub fn run_focus_scaling(
    bipartites: &[FocusBipartite],
    dims: &[usize],
    cfg: &SketchConfig,
    history: usize,
    repeats: usize,
) -> Result<DimScalingReport, FocusError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    let mut points = Vec::with_capacity(dims.len());
    for &dim in dims {
        let sketch_cfg = SketchConfig { dim, ..*cfg };
        let mut best = f64::INFINITY;
        for _ in 0..repeats.max(1) {
            let ms = pool.install(|| -> Result<f64, FocusError> {
                let start = Instant::now();
                let spec = make_sketch_spec(bipartites, &sketch_cfg)?;
                let report = change_scores(&sketch_windows(bipartites, &spec), history)?;
                std::hint::black_box(&report);
                Ok(start.elapsed().as_secs_f64() * 1e3)
            })?;
            best = best.min(ms);
        }
        points.push(DimScalingPoint { dim, wall_ms: best });
    }
    let slope = log_log_slope(&points.iter().map(|p| (p.dim as f64, p.wall_ms)).collect::<Vec<_>>());
    Ok(DimScalingReport { points, slope })
}
