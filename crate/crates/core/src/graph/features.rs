use std::collections::HashMap;

use serde::Serialize;

use super::{GraphError, GraphSnapshot};

pub const FEATURE_COUNT: usize = 12;

/// Per-node features, in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Feature {
    UniqueInDegree,
    MultiInDegree,
    UniqueOutDegree,
    MultiOutDegree,
    TotalInWeight,
    MeanInWeight,
    MedianInWeight,
    VarianceInWeight,
    TotalOutWeight,
    MeanOutWeight,
    MedianOutWeight,
    VarianceOutWeight,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::UniqueInDegree,
        Feature::MultiInDegree,
        Feature::UniqueOutDegree,
        Feature::MultiOutDegree,
        Feature::TotalInWeight,
        Feature::MeanInWeight,
        Feature::MedianInWeight,
        Feature::VarianceInWeight,
        Feature::TotalOutWeight,
        Feature::MeanOutWeight,
        Feature::MedianOutWeight,
        Feature::VarianceOutWeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::UniqueInDegree => "unique_in_degree",
            Feature::MultiInDegree => "multi_in_degree",
            Feature::UniqueOutDegree => "unique_out_degree",
            Feature::MultiOutDegree => "multi_out_degree",
            Feature::TotalInWeight => "total_in_weight",
            Feature::MeanInWeight => "mean_in_weight",
            Feature::MedianInWeight => "median_in_weight",
            Feature::VarianceInWeight => "variance_in_weight",
            Feature::TotalOutWeight => "total_out_weight",
            Feature::MeanOutWeight => "mean_out_weight",
            Feature::MedianOutWeight => "median_out_weight",
            Feature::VarianceOutWeight => "variance_out_weight",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Twelve features per node, raw and `log10(1 + x)`-transformed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeFeatureTable {
    /// Sorted dense node indices, one per row.
    pub nodes: Vec<usize>,
    pub raw: Vec<[f64; FEATURE_COUNT]>,
    pub log: Vec<[f64; FEATURE_COUNT]>,
}

impl NodeFeatureTable {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Row position of `node`, if present.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    pub fn log_row(&self, node: usize) -> Option<&[f64; FEATURE_COUNT]> {
        self.position(node).map(|p| &self.log[p])
    }
}

#[derive(Default)]
struct Side {
    neighbors: Vec<usize>,
    degree: usize,
    amounts: Vec<f64>,
}

fn weight_stats(amounts: &mut [f64]) -> [f64; 4] {
    if amounts.is_empty() {
        return [0.0; 4];
    }
    let n = amounts.len() as f64;
    let total: f64 = amounts.iter().sum();
    let mean = total / n;
    let variance = amounts.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    amounts.sort_by(f64::total_cmp);
    let mid = amounts.len() / 2;
    let median = if amounts.len().is_multiple_of(2) {
        (amounts[mid - 1] + amounts[mid]) / 2.0
    } else {
        amounts[mid]
    };
    [total, mean, median, variance]
}

/// Features for every node active in the snapshot.
pub fn node_features(snapshot: &GraphSnapshot) -> Result<NodeFeatureTable, GraphError> {
    if snapshot.is_empty() {
        return Err(GraphError::EmptySnapshot);
    }
    Ok(node_features_for(snapshot, &snapshot.node_ids))
}

/// Features for an explicit node list; nodes without edges get all zeros.
///
/// Degrees ignore self-loops, weight statistics include them.
pub fn node_features_for(snapshot: &GraphSnapshot, nodes: &[usize]) -> NodeFeatureTable {
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let mut ins: HashMap<usize, Side> = HashMap::new();
    let mut outs: HashMap<usize, Side> = HashMap::new();
    for &(s, d, amount) in &snapshot.edges {
        let out = outs.entry(s).or_default();
        out.amounts.push(amount);
        let inn = ins.entry(d).or_default();
        inn.amounts.push(amount);
        if s != d {
            let out = outs.get_mut(&s).unwrap();
            out.degree += 1;
            out.neighbors.push(d);
            let inn = ins.get_mut(&d).unwrap();
            inn.degree += 1;
            inn.neighbors.push(s);
        }
    }
    let mut raw = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let mut row = [0.0; FEATURE_COUNT];
        for (side, base_deg, base_w) in [(ins.get_mut(node), 0, 4), (outs.get_mut(node), 2, 8)] {
            let Some(side) = side else { continue };
            side.neighbors.sort_unstable();
            side.neighbors.dedup();
            row[base_deg] = side.neighbors.len() as f64;
            row[base_deg + 1] = side.degree as f64;
            row[base_w..base_w + 4].copy_from_slice(&weight_stats(&mut side.amounts));
        }
        raw.push(row);
    }
    let log = raw.iter().map(|row| row.map(|x: f64| (1.0 + x).log10())).collect();
    NodeFeatureTable { nodes, raw, log }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(row: &[f64; FEATURE_COUNT], feat: Feature) -> f64 {
        row[feat.index()]
    }

    #[test]
    fn single_edge() {
        let snap = GraphSnapshot::new(0, 1, vec![(0, 1, 5.0)]);
        let t = node_features(&snap).unwrap();
        let a = &t.raw[t.position(0).unwrap()];
        assert_eq!(f(a, Feature::UniqueOutDegree), 1.0);
        assert_eq!(f(a, Feature::MultiOutDegree), 1.0);
        assert_eq!(f(a, Feature::TotalOutWeight), 5.0);
        assert_eq!(f(a, Feature::MeanOutWeight), 5.0);
        assert_eq!(f(a, Feature::MedianOutWeight), 5.0);
        assert_eq!(f(a, Feature::VarianceOutWeight), 0.0);
        assert_eq!(f(a, Feature::TotalInWeight), 0.0);
    }

    #[test]
    fn repeated_edge_population_variance() {
        let snap = GraphSnapshot::new(0, 1, vec![(0, 1, 2.0), (0, 1, 4.0)]);
        let t = node_features(&snap).unwrap();
        let a = &t.raw[0];
        assert_eq!(f(a, Feature::UniqueOutDegree), 1.0);
        assert_eq!(f(a, Feature::MultiOutDegree), 2.0);
        assert_eq!(f(a, Feature::TotalOutWeight), 6.0);
        assert_eq!(f(a, Feature::MeanOutWeight), 3.0);
        assert_eq!(f(a, Feature::MedianOutWeight), 3.0);
        assert_eq!(f(a, Feature::VarianceOutWeight), 1.0);
        let b = &t.raw[1];
        assert_eq!(f(b, Feature::MultiInDegree), 2.0);
        assert_eq!(f(b, Feature::UniqueInDegree), 1.0);
    }

    #[test]
    fn isolated_node_is_zero() {
        let snap = GraphSnapshot::new(0, 1, vec![(0, 1, 2.0)]);
        let t = node_features_for(&snap, &[0, 1, 7]);
        let p = t.position(7).unwrap();
        assert_eq!(t.raw[p], [0.0; FEATURE_COUNT]);
        assert_eq!(t.log[p], [0.0; FEATURE_COUNT]);
    }

    #[test]
    fn self_loop_keeps_weight_not_degree() {
        let snap = GraphSnapshot::new(0, 1, vec![(3, 3, 9.0)]);
        let t = node_features(&snap).unwrap();
        let a = &t.raw[0];
        assert_eq!(f(a, Feature::MultiOutDegree), 0.0);
        assert_eq!(f(a, Feature::TotalOutWeight), 9.0);
        assert_eq!(f(a, Feature::TotalInWeight), 9.0);
    }

    #[test]
    fn log_transform() {
        let snap = GraphSnapshot::new(0, 1, vec![(0, 1, 99.0)]);
        let t = node_features(&snap).unwrap();
        assert!((t.log[0][Feature::TotalOutWeight.index()] - 2.0).abs() < 1e-12);
        assert!(node_features(&GraphSnapshot::new(0, 1, vec![])).is_err());
    }
}
