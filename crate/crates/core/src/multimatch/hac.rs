//! Merge order from average-linkage clustering of KG fingerprints.

use super::fingerprint::KgFingerprint;
use super::MultiMatchError;
use crate::model::WikiId;
use serde::Serialize;

/// Cosine distance between unit (or zero) vectors; a zero vector is at
/// distance 1 from everything.
pub fn cosine_distance(a: &KgFingerprint, b: &KgFingerprint) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 1.0;
    }
    (1.0 - a.dot(b)).clamp(0.0, 2.0)
}

/// One merge. Node ids below `leaves.len()` are leaves; step `k` creates
/// node `leaves.len() + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Binary merge tree over wikis, steps in bottom-up order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeTree {
    pub leaves: Vec<WikiId>,
    pub steps: Vec<MergeStep>,
}

impl MergeTree {
    /// Leaf indices under a node.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let n = self.leaves.len();
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let s = &self.steps[x - n];
                stack.push(s.left);
                stack.push(s.right);
            }
        }
        out.sort_unstable();
        out
    }

    /// A left-deep tree merging the leaves in the given order.
    pub fn sequential(leaves: Vec<WikiId>) -> Result<Self, MultiMatchError> {
        let n = leaves.len();
        if n < 2 {
            return Err(MultiMatchError::TooFewGraphs(n));
        }
        let steps = (1..n)
            .map(|i| MergeStep { left: if i == 1 { 0 } else { n + i - 2 }, right: i, distance: 0.0, size: i + 1 })
            .collect();
        Ok(MergeTree { leaves, steps })
    }
}

/// Condensed upper-triangle distance matrix, row-major.
pub fn condensed_distances(fps: &[KgFingerprint]) -> Vec<f64> {
    let n = fps.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(cosine_distance(&fps[i], &fps[j]));
        }
    }
    out
}

/// Average-linkage clustering under cosine distance; the bottom-up merge
/// sequence is the matching order.
pub fn hac_order(fps: &[KgFingerprint]) -> Result<MergeTree, MultiMatchError> {
    let n = fps.len();
    if n < 2 {
        return Err(MultiMatchError::TooFewGraphs(n));
    }
    let mut condensed = condensed_distances(fps);
    let dendrogram = kodama::linkage(&mut condensed, n, kodama::Method::Average);
    let steps = dendrogram
        .steps()
        .iter()
        .map(|s| MergeStep { left: s.cluster1, right: s.cluster2, distance: s.dissimilarity, size: s.size })
        .collect();
    Ok(MergeTree { leaves: fps.iter().map(|f| f.wiki.clone()).collect(), steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn fp(name: &str, v: &[f64]) -> KgFingerprint {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vector = v
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (format!("t{i}"), x / norm))
            .collect();
        KgFingerprint { wiki: WikiId::new(name).unwrap(), vector }
    }

    #[test]
    fn fewer_than_two_is_rejected() {
        assert!(matches!(hac_order(&[fp("a", &[1.0])]), Err(MultiMatchError::TooFewGraphs(1))));
    }

    #[test]
    fn two_graphs_one_merge() {
        let t = hac_order(&[fp("a", &[1.0, 0.0]), fp("b", &[0.0, 1.0])]).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!((t.steps[0].left, t.steps[0].right), (0, 1));
        assert!((t.steps[0].distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_pair_merges_first() {
        let t = hac_order(&[fp("a", &[1.0, 0.1, 0.0]), fp("c", &[0.0, 0.0, 1.0]), fp("b", &[1.0, 0.12, 0.0])]).unwrap();
        let first: BTreeSet<usize> = [t.steps[0].left, t.steps[0].right].into();
        assert_eq!(first, BTreeSet::from([0, 2]));
    }

    /// Textbook O(n³) average linkage over explicit clusters.
    fn naive_hac(d: &[Vec<f64>]) -> Vec<(BTreeSet<usize>, f64)> {
        let mut clusters: Vec<BTreeSet<usize>> = (0..d.len()).map(|i| BTreeSet::from([i])).collect();
        let mut out = Vec::new();
        while clusters.len() > 1 {
            let mut best = (0, 1, f64::INFINITY);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let sum: f64 = clusters[i].iter().flat_map(|&a| clusters[j].iter().map(move |&b| d[a][b])).sum();
                    let avg = sum / (clusters[i].len() * clusters[j].len()) as f64;
                    if avg < best.2 {
                        best = (i, j, avg);
                    }
                }
            }
            let (i, j, dist) = best;
            let merged: BTreeSet<usize> = clusters[i].union(&clusters[j]).copied().collect();
            clusters.remove(j);
            clusters.remove(i);
            out.push((merged.clone(), dist));
            clusters.push(merged);
        }
        out
    }

    #[test]
    fn dendrogram_matches_naive_average_linkage() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for round in 0..50 {
            let n = if round == 0 { 6 } else { rng.gen_range(2..10) };
            let fps: Vec<KgFingerprint> = (0..n)
                .map(|i| fp(&format!("w{i}"), &(0..5).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>()))
                .collect();
            let d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cosine_distance(&fps[i], &fps[j])).collect()).collect();
            let tree = hac_order(&fps).unwrap();
            let want = naive_hac(&d);
            let got: Vec<(BTreeSet<usize>, f64)> = (0..tree.steps.len())
                .map(|k| (tree.members(n + k).into_iter().collect(), tree.steps[k].distance))
                .collect();
            let as_map = |v: &[(BTreeSet<usize>, f64)]| -> BTreeMap<Vec<usize>, f64> {
                v.iter().map(|(s, d)| (s.iter().copied().collect(), *d)).collect()
            };
            let (g, w) = (as_map(&got), as_map(&want));
            assert_eq!(g.keys().collect::<Vec<_>>(), w.keys().collect::<Vec<_>>());
            for (k, dist) in &g {
                assert!((dist - w[k]).abs() < 1e-9);
            }
            assert!(tree.steps.windows(2).all(|p| p[0].distance <= p[1].distance + 1e-12));
        }
    }

    #[test]
    fn sequential_tree_shape() {
        let leaves: Vec<WikiId> = ["a", "b", "c", "d"].iter().map(|w| WikiId::new(w).unwrap()).collect();
        let t = MergeTree::sequential(leaves).unwrap();
        assert_eq!(t.steps.len(), 3);
        assert_eq!(t.members(6), vec![0, 1, 2, 3]);
    }
}
