//! Identity sets under the transitive closure of an alignment.
//!
//! Each connected component of the link graph is assumed to describe one
//! real-world entity, so it may hold at most one entity per wiki. Components
//! violating this are repaired by removing links one at a time in a fixed
//! priority order. Repaired components are then completed with transitive
//! links whose confidence combines max-flow and shortest-path evidence.

mod betweenness;
mod flow;

pub use betweenness::edge_betweenness;
pub use flow::{confidence_from, transitive_confidence, LinkGraph};

use crate::graph::DisjointSet;
use crate::model::{Alignment, Correspondence, EntityRef, LabelIndex, Provenance, WikiId};
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

/// One connected component of an alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCluster {
    /// Sorted by IRI.
    pub members: Vec<EntityRef>,
    pub internal_edges: Vec<Correspondence>,
}

impl IdentityCluster {
    /// True if two members come from the same wiki.
    pub fn has_same_wiki_members(&self) -> bool {
        let mut seen = HashSet::new();
        !self.members.iter().all(|m| seen.insert(m.wiki()))
    }
}

/// Connected components of the alignment (singletons cannot occur since
/// every entity is an endpoint). Clusters are ordered by their first member.
pub fn compute_identity_sets(a: &Alignment) -> Vec<IdentityCluster> {
    let entities: Vec<EntityRef> = a.entities().into_iter().collect();
    let index: BTreeMap<&EntityRef, usize> = entities.iter().enumerate().map(|(i, e)| (e, i)).collect();
    let mut ds = DisjointSet::new(entities.len());
    for c in a {
        ds.union(index[&c.source], index[&c.target]);
    }
    let groups = ds.groups();
    let mut cluster_of = vec![0; entities.len()];
    for (g, members) in groups.iter().enumerate() {
        for &m in members {
            cluster_of[m] = g;
        }
    }
    let mut clusters: Vec<IdentityCluster> = groups
        .iter()
        .map(|members| IdentityCluster {
            members: members.iter().map(|&i| entities[i].clone()).collect(),
            internal_edges: Vec::new(),
        })
        .collect();
    for c in a {
        clusters[cluster_of[index[&c.source]]].internal_edges.push(c.clone());
    }
    clusters
}

/// Error value of a link inside its identity set: the edge betweenness of
/// the link within the cluster graph. `None` if the link is not internal.
pub fn link_error_score(cluster: &IdentityCluster, edge: &Correspondence) -> Option<f64> {
    let g = LinkGraph::from_correspondences(&cluster.internal_edges);
    let pos = cluster
        .internal_edges
        .iter()
        .position(|c| c.source == edge.source && c.target == edge.target)?;
    let scores = edge_betweenness(g.adjacency(), &vec![true; g.edges().len()]);
    Some(scores[pos])
}

/// Result of repairing all identity sets.
#[derive(Debug, Clone, Default)]
pub struct RepairOutcome {
    pub repaired: Alignment,
    /// Removed links, in removal order within each cluster.
    pub removed: Vec<Correspondence>,
    pub violating_clusters: usize,
}

/// Removes links until no identity set holds two entities of one wiki.
///
/// Candidates inside a violating component are ranked by: (1) removing the
/// link alone repairs the component, (2) lower confidence, (3) higher
/// betweenness, (4) larger Levenshtein distance between the endpoint labels,
/// (5) source IRI then target IRI. The top link is removed and components
/// are recomputed before the next pick.
pub fn repair_identity_sets(a: &Alignment, labels: &LabelIndex) -> RepairOutcome {
    let clusters = compute_identity_sets(a);
    let per_cluster: Vec<(Vec<Correspondence>, Vec<Correspondence>, bool)> = clusters
        .into_par_iter()
        .map(|cluster| {
            if !cluster.has_same_wiki_members() {
                return (cluster.internal_edges, Vec::new(), false);
            }
            let removed_idx = repair_cluster(&cluster, labels);
            let removed_set: HashSet<usize> = removed_idx.iter().copied().collect();
            let kept = cluster
                .internal_edges
                .iter()
                .enumerate()
                .filter(|(i, _)| !removed_set.contains(i))
                .map(|(_, c)| c.clone())
                .collect();
            let removed = removed_idx.iter().map(|&i| cluster.internal_edges[i].clone()).collect();
            (kept, removed, true)
        })
        .collect();

    let mut out = RepairOutcome::default();
    for (kept, removed, violating) in per_cluster {
        out.repaired.extend(kept);
        out.removed.extend(removed);
        out.violating_clusters += usize::from(violating);
    }
    out
}

struct RankKey<'a> {
    repairs_alone: bool,
    confidence: f64,
    betweenness: f64,
    label_distance: usize,
    link: &'a Correspondence,
}

impl RankKey<'_> {
    /// `Less` means "remove first".
    fn priority(&self, other: &Self) -> Ordering {
        other
            .repairs_alone
            .cmp(&self.repairs_alone)
            .then(self.confidence.total_cmp(&other.confidence))
            .then(other.betweenness.total_cmp(&self.betweenness))
            .then(other.label_distance.cmp(&self.label_distance))
            .then_with(|| self.link.source.cmp(&other.link.source))
            .then_with(|| self.link.target.cmp(&other.link.target))
    }
}

/// Indexes (into `cluster.internal_edges`) of the links to remove, in order.
fn repair_cluster(cluster: &IdentityCluster, labels: &LabelIndex) -> Vec<usize> {
    let g = LinkGraph::from_correspondences(&cluster.internal_edges);
    let n = g.vertex_count();
    let wiki_of: Vec<&WikiId> = g.vertices().iter().map(|e| e.wiki()).collect();
    let label_distance: Vec<usize> = cluster
        .internal_edges
        .iter()
        .map(|c| {
            strsim::levenshtein(&labels.label(&c.source).to_lowercase(), &labels.label(&c.target).to_lowercase())
        })
        .collect();
    let mut active = vec![true; g.edges().len()];
    let mut removed = Vec::new();

    loop {
        let components = components(g.adjacency(), &active, n);
        let Some(component) = components.iter().find(|c| has_duplicate_wiki(c, &wiki_of)) else {
            break;
        };
        let in_component: HashSet<usize> = component.iter().copied().collect();
        let mut mask = vec![false; active.len()];
        let mut candidates = Vec::new();
        for (e, &(u, _, _)) in g.edges().iter().enumerate() {
            if active[e] && in_component.contains(&u) {
                mask[e] = true;
                candidates.push(e);
            }
        }
        let betweenness = edge_betweenness(g.adjacency(), &mask);
        let bridges = bridges(g.adjacency(), &mask, component);

        let best = candidates
            .iter()
            .map(|&e| {
                let repairs_alone =
                    bridges.contains(&e) && split_is_clean(&g, &mask, e, component, &wiki_of);
                (
                    e,
                    RankKey {
                        repairs_alone,
                        confidence: g.capacity(e),
                        betweenness: betweenness[e],
                        label_distance: label_distance[e],
                        link: &cluster.internal_edges[e],
                    },
                )
            })
            .min_by(|a, b| a.1.priority(&b.1))
            .map(|(e, _)| e)
            .expect("a violating component has at least one edge");
        active[best] = false;
        removed.push(best);
    }
    removed
}

fn has_duplicate_wiki(component: &[usize], wiki_of: &[&WikiId]) -> bool {
    let mut seen = HashSet::with_capacity(component.len());
    !component.iter().all(|&v| seen.insert(wiki_of[v]))
}

/// Connected components over active edges, each sorted, ordered by smallest vertex.
fn components(adjacency: &[Vec<(usize, usize)>], active: &[bool], n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, e) in &adjacency[u] {
                if active[e] && !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Bridges of the subgraph induced by `mask`, found with an iterative
/// low-link DFS from `component[0]`.
fn bridges(adjacency: &[Vec<(usize, usize)>], mask: &[bool], component: &[usize]) -> HashSet<usize> {
    let n = adjacency.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut out = HashSet::new();
    let mut timer = 0;
    let root = component[0];
    // (vertex, edge used to enter it, next adjacency position)
    let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
    disc[root] = timer;
    low[root] = timer;
    timer += 1;
    while let Some(frame) = stack.last_mut() {
        let (u, via, pos) = *frame;
        if pos < adjacency[u].len() {
            frame.2 += 1;
            let (v, e) = adjacency[u][pos];
            if !mask[e] || Some(e) == via {
                continue;
            }
            if disc[v] == usize::MAX {
                disc[v] = timer;
                low[v] = timer;
                timer += 1;
                stack.push((v, Some(e), 0));
            } else {
                low[u] = low[u].min(disc[v]);
            }
        } else {
            stack.pop();
            if let (Some(e), Some(parent)) = (via, stack.last()) {
                let p = parent.0;
                low[p] = low[p].min(low[u]);
                if low[u] > disc[p] {
                    out.insert(e);
                }
            }
        }
    }
    out
}

/// Whether removing bridge `edge` leaves two sides that each hold at most
/// one entity per wiki.
fn split_is_clean(g: &LinkGraph, mask: &[bool], edge: usize, component: &[usize], wiki_of: &[&WikiId]) -> bool {
    let (u, _, _) = g.edges()[edge];
    let mut side = HashSet::from([u]);
    let mut queue = VecDeque::from([u]);
    while let Some(x) = queue.pop_front() {
        for &(y, e) in &g.adjacency()[x] {
            if e != edge && mask[e] && side.insert(y) {
                queue.push_back(y);
            }
        }
    }
    let (a, b): (Vec<usize>, Vec<usize>) = component.iter().partition(|v| side.contains(v));
    !has_duplicate_wiki(&a, wiki_of) && !has_duplicate_wiki(&b, wiki_of)
}

/// Limits for transitive-link generation in very large identity sets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransitiveConfig {
    /// Clusters with more members than this are subject to `max_pairs`.
    pub large_cluster_members: usize,
    pub max_pairs: usize,
}

impl Default for TransitiveConfig {
    fn default() -> Self {
        TransitiveConfig { large_cluster_members: 1_000, max_pairs: 1_000_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TransitiveOutcome {
    pub links: Alignment,
    pub skipped_pairs: usize,
}

/// Adds a transitive link for every cross-wiki pair of a (repaired)
/// identity set that has no direct link. Only direct links feed the flow and
/// path computations; the result holds transitive links only.
pub fn add_transitive_links(a: &Alignment, config: TransitiveConfig) -> TransitiveOutcome {
    let direct: Alignment = a.iter().filter(|c| c.provenance == Provenance::Direct).cloned().collect();
    let clusters = compute_identity_sets(&direct);
    let per_cluster: Vec<(Vec<Correspondence>, usize)> = clusters
        .par_iter()
        .map(|cluster| transitive_for_cluster(cluster, config))
        .collect();
    let mut out = TransitiveOutcome::default();
    for (links, skipped) in per_cluster {
        out.links.extend(links);
        out.skipped_pairs += skipped;
    }
    out
}

fn transitive_for_cluster(cluster: &IdentityCluster, config: TransitiveConfig) -> (Vec<Correspondence>, usize) {
    let mut g = LinkGraph::new();
    for m in &cluster.members {
        g.vertex(m);
    }
    let mut adjacent: HashSet<(usize, usize)> = HashSet::new();
    for c in &cluster.internal_edges {
        let id = g.add_edge(&c.source, &c.target, c.confidence);
        let (u, v, _) = g.edges()[id];
        adjacent.insert((u.min(v), u.max(v)));
    }
    let n = g.vertex_count();
    let capped = n > config.large_cluster_members;
    let mut budget = config.max_pairs;
    let mut skipped = 0;
    let mut out = Vec::new();
    for u in 0..n {
        let distances = g.shortest_paths(u);
        for v in u + 1..n {
            let (eu, ev) = (&g.vertices()[u], &g.vertices()[v]);
            if eu.wiki() == ev.wiki() || adjacent.contains(&(u, v)) {
                continue;
            }
            if capped {
                if budget == 0 {
                    skipped += 1;
                    continue;
                }
                budget -= 1;
            }
            let confidence = confidence_from(g.max_flow(u, v), distances[v]);
            let (source, target) = if eu.wiki() < ev.wiki() { (eu, ev) } else { (ev, eu) };
            out.push(Correspondence {
                source: source.clone(),
                target: target.clone(),
                confidence,
                provenance: Provenance::Transitive,
            });
        }
    }
    (out, skipped)
}

/// Drops links with an endpoint outside the known wikis.
pub fn drop_exterior_links(a: &Alignment, known: &BTreeSet<WikiId>) -> Alignment {
    a.iter()
        .filter(|c| known.contains(c.source.wiki()) && known.contains(c.target.wiki()))
        .cloned()
        .collect()
}

/// Size statistics of the identity sets of an alignment.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClusterStats {
    pub count: usize,
    pub mean_size: f64,
    /// Population standard deviation.
    pub std_size: f64,
    pub max_size: usize,
}

pub fn cluster_stats(a: &Alignment) -> ClusterStats {
    let sizes: Vec<usize> = compute_identity_sets(a).iter().map(|c| c.members.len()).collect();
    if sizes.is_empty() {
        return ClusterStats::default();
    }
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<usize>() as f64 / n;
    let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / n;
    ClusterStats { count: sizes.len(), mean_size: mean, std_size: var.sqrt(), max_size: *sizes.iter().max().unwrap() }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ClosureReport {
    pub input_links: usize,
    pub violating_clusters: usize,
    pub removed_links: usize,
    pub after_repair: usize,
    pub transitive_added: usize,
    pub skipped_pairs: usize,
    pub exterior_removed_direct: usize,
    pub exterior_removed_transitive: usize,
    pub direct_output: usize,
    pub transitive_output: usize,
    /// Identity sets of the final direct + transitive alignment.
    pub clusters: ClusterStats,
}

/// Output of the closure stages: repaired direct links and transitive links.
#[derive(Debug, Clone, Default)]
pub struct ClosureOutput {
    pub repaired: Alignment,
    pub transitive: Alignment,
    pub direct: Alignment,
    pub transitive_kept: Alignment,
    pub report: ClosureReport,
}

/// Repair, transitive addition, then exterior-link removal.
pub fn run_closure(
    refined: &Alignment,
    labels: &LabelIndex,
    known_wikis: &BTreeSet<WikiId>,
    config: TransitiveConfig,
) -> ClosureOutput {
    let mut report = ClosureReport { input_links: refined.len(), ..Default::default() };
    let repair = repair_identity_sets(refined, labels);
    report.violating_clusters = repair.violating_clusters;
    report.removed_links = repair.removed.len();
    report.after_repair = repair.repaired.len();
    let transitive = add_transitive_links(&repair.repaired, config);
    report.transitive_added = transitive.links.len();
    report.skipped_pairs = transitive.skipped_pairs;
    let direct = drop_exterior_links(&repair.repaired, known_wikis);
    let transitive_kept = drop_exterior_links(&transitive.links, known_wikis);
    report.exterior_removed_direct = repair.repaired.len() - direct.len();
    report.exterior_removed_transitive = transitive.links.len() - transitive_kept.len();
    report.direct_output = direct.len();
    report.transitive_output = transitive_kept.len();
    report.clusters = cluster_stats(&direct.merged_with(&transitive_kept));
    ClosureOutput { repaired: repair.repaired, transitive: transitive.links, direct, transitive_kept, report }
}
