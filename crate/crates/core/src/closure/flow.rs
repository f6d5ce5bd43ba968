//! Weighted link graph with max-flow (Edmonds-Karp) and shortest-path
//! (Dijkstra) queries used to score transitive links.

use crate::model::{Correspondence, EntityRef};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

const EPS: f64 = 1e-12;

/// Undirected graph over entities; each correspondence is an edge whose
/// capacity is its confidence and whose length is `1.5 - confidence`.
#[derive(Debug, Clone, Default)]
pub struct LinkGraph {
    vertices: Vec<EntityRef>,
    index: HashMap<EntityRef, usize>,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl LinkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_correspondences<'a>(links: impl IntoIterator<Item = &'a Correspondence>) -> Self {
        let mut g = LinkGraph::new();
        for c in links {
            g.add_edge(&c.source, &c.target, c.confidence);
        }
        g
    }

    pub fn vertex(&mut self, e: &EntityRef) -> usize {
        if let Some(&i) = self.index.get(e) {
            return i;
        }
        let i = self.vertices.len();
        self.vertices.push(e.clone());
        self.index.insert(e.clone(), i);
        self.adjacency.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, a: &EntityRef, b: &EntityRef, confidence: f64) -> usize {
        let (u, v) = (self.vertex(a), self.vertex(b));
        let id = self.edges.len();
        self.edges.push((u, v, confidence));
        self.adjacency[u].push((v, id));
        self.adjacency[v].push((u, id));
        id
    }

    pub fn index_of(&self, e: &EntityRef) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn vertices(&self) -> &[EntityRef] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Edges as `(u, v, confidence)`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adjacency
    }

    pub fn capacity(&self, edge: usize) -> f64 {
        self.edges[edge].2
    }

    pub fn length(&self, edge: usize) -> f64 {
        1.5 - self.edges[edge].2
    }

    /// Maximum flow between `s` and `t` by Edmonds-Karp: repeated BFS
    /// augmenting paths over the residual graph. Every undirected edge is a
    /// pair of opposing arcs with capacity equal to the confidence.
    pub fn max_flow(&self, s: usize, t: usize) -> f64 {
        if s == t {
            return f64::INFINITY;
        }
        let n = self.vertices.len();
        // Arc 2k runs u→v and arc 2k+1 runs v→u; each is the other's reverse.
        let mut residual: Vec<f64> = Vec::with_capacity(self.edges.len() * 2);
        let mut heads: Vec<usize> = Vec::with_capacity(self.edges.len() * 2);
        let mut out_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &(u, v, c)) in self.edges.iter().enumerate() {
            residual.push(c);
            heads.push(v);
            out_arcs[u].push(2 * k);
            residual.push(c);
            heads.push(u);
            out_arcs[v].push(2 * k + 1);
        }

        let mut total = 0.0;
        let mut via: Vec<Option<usize>> = vec![None; n];
        loop {
            via.iter_mut().for_each(|p| *p = None);
            let mut queue = VecDeque::from([s]);
            let mut reached = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &arc in &out_arcs[u] {
                    let v = heads[arc];
                    if v != s && via[v].is_none() && residual[arc] > EPS {
                        via[v] = Some(arc);
                        if v == t {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !reached {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while let Some(arc) = via[v] {
                bottleneck = bottleneck.min(residual[arc]);
                v = heads[arc ^ 1];
            }
            let mut v = t;
            while let Some(arc) = via[v] {
                residual[arc] -= bottleneck;
                residual[arc ^ 1] += bottleneck;
                v = heads[arc ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Dijkstra distances from `s` with edge lengths `1.5 - confidence`;
    /// unreachable vertices get infinity.
    pub fn shortest_paths(&self, s: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.vertices.len()];
        dist[s] = 0.0;
        let mut heap = BinaryHeap::from([Frontier { dist: 0.0, vertex: s }]);
        while let Some(Frontier { dist: d, vertex: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, edge) in &self.adjacency[u] {
                let nd = d + self.length(edge);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Frontier { dist: nd, vertex: v });
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Harmonic mean of `1 - 1/(flow + 1)` and `1 / path_length`.
pub fn confidence_from(max_flow: f64, path_length: f64) -> f64 {
    let flow_term = 1.0 - 1.0 / (max_flow + 1.0);
    let path_term = 1.0 / path_length;
    2.0 * flow_term * path_term / (flow_term + path_term)
}

/// Confidence of an inferred link between `u` and `v`, or `None` when they
/// are disconnected or identical.
pub fn transitive_confidence(g: &LinkGraph, u: usize, v: usize) -> Option<f64> {
    if u == v {
        return None;
    }
    let spl = g.shortest_paths(u)[v];
    if !spl.is_finite() {
        return None;
    }
    Some(confidence_from(g.max_flow(u, v), spl))
}
