//! Isolation forest scoring of small point sets.
//!
//! Each tree is grown on a subsample of `min(max_samples, N)` points with
//! random axis-aligned splits until a node holds one distinct point or the
//! depth reaches `ceil(lg ψ)`. The score of `x` is `2^(−E[h(x)]/c(ψ))`,
//! where `h` is the path length plus `c(size)` at the leaf and `c` is the
//! average unsuccessful-search length of a binary search tree.
//!
//! Subsamples are selected by ranking points on a hash of their coordinates,
//! so the scores do not depend on the order of the input.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnomalyError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("invalid forest parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_samples: 256,
            seed: 0,
        }
    }
}

/// Average path length of an unsuccessful BST search over `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

enum Node<const D: usize> {
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

struct Tree<const D: usize> {
    nodes: Vec<Node<D>>,
}

impl<const D: usize> Tree<D> {
    fn grow(points: &[[f64; D]], mut sample: Vec<usize>, depth_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Tree {
            nodes: Vec::with_capacity(2 * sample.len()),
        };
        tree.build(points, &mut sample, 0, depth_limit, rng);
        tree
    }

    fn build(
        &mut self,
        points: &[[f64; D]],
        sample: &mut [usize],
        depth: usize,
        depth_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: sample.len() });
        if sample.len() <= 1 || depth >= depth_limit {
            return id;
        }
        let mut lo = [f64::INFINITY; D];
        let mut hi = [f64::NEG_INFINITY; D];
        for &i in sample.iter() {
            for a in 0..D {
                lo[a] = lo[a].min(points[i][a]);
                hi[a] = hi[a].max(points[i][a]);
            }
        }
        let mut splittable = [0usize; D];
        let mut count = 0;
        for a in 0..D {
            if hi[a] > lo[a] {
                splittable[count] = a;
                count += 1;
            }
        }
        if count == 0 {
            return id;
        }
        let axis = splittable[rng.random_range(0..count)];
        let value = rng.random_range(lo[axis]..hi[axis]);
        // node contents matter, not their order
        let mut mid = 0;
        for j in 0..sample.len() {
            if points[sample[j]][axis] < value {
                sample.swap(mid, j);
                mid += 1;
            }
        }
        let (left, right) = sample.split_at_mut(mid);
        let l = self.build(points, left, depth + 1, depth_limit, rng);
        let r = self.build(points, right, depth + 1, depth_limit, rng);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left: l,
            right: r,
        };
        id
    }

    fn path_length(&self, x: &[f64; D]) -> f64 {
        let mut id = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[id] {
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    id = if x[axis] < value { left } else { right };
                    depth += 1.0;
                }
                Node::Leaf { size } => return depth + average_path_length(size),
            }
        }
    }
}

fn point_key<const D: usize>(tree_seed: u64, p: &[f64; D]) -> u64 {
    p.iter().fold(rng::mix(tree_seed), |h, x| rng::mix(h ^ x.to_bits()))
}

fn subsample<const D: usize>(points: &[[f64; D]], size: usize, tree_seed: u64) -> Vec<usize> {
    if size >= points.len() {
        return (0..points.len()).collect();
    }
    let mut keyed: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (point_key(tree_seed, p), i))
        .collect();
    // equal keys mean equal points, which are interchangeable in a tree
    keyed.select_nth_unstable_by_key(size, |&(k, _)| k);
    keyed.truncate(size);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Fits a forest on `points` and scores the same points; higher is more anomalous.
pub fn fit_score<const D: usize>(points: &[[f64; D]], params: &ForestParams) -> Result<Vec<f64>, AnomalyError> {
    if params.n_trees < 1 {
        return Err(AnomalyError::Params("n_trees must be at least 1".into()));
    }
    if params.max_samples < 2 {
        return Err(AnomalyError::Params("max_samples must be at least 2".into()));
    }
    if points.len() < 2 {
        return Err(AnomalyError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(AnomalyError::NonFinite(i));
    }
    let psi = params.max_samples.min(points.len());
    let depth_limit = (psi as f64).log2().ceil() as usize;
    let normalizer = average_path_length(psi);

    let per_tree: Vec<Vec<f64>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = rng::derive(params.seed, &[rng::stream::FOREST, t as u64]);
            let sample = subsample(points, psi, tree_seed);
            let mut rng = rng::chacha(tree_seed, &[]);
            let tree = Tree::grow(points, sample, depth_limit, &mut rng);
            points.iter().map(|p| tree.path_length(p)).collect()
        })
        .collect();
    // summed in tree order so the result does not depend on scheduling
    let mut totals = vec![0.0; points.len()];
    for lengths in &per_tree {
        totals.iter_mut().zip(lengths).for_each(|(x, y)| *x += y);
    }
    Ok(totals
        .into_iter()
        .map(|total| {
            let mean = total / params.n_trees as f64;
            2f64.powf(-mean / normalizer)
        })
        .collect())
}
