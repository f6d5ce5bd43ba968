//! Edge betweenness centrality (Brandes, unweighted, undirected).

/// Betweenness of every edge: the number of shortest paths between
/// unordered vertex pairs that cross it, with ties split evenly between
/// equally short paths. Edges with `active[e] == false` are ignored and
/// score 0.
pub fn edge_betweenness(adjacency: &[Vec<(usize, usize)>], active: &[bool]) -> Vec<f64> {
    let n = adjacency.len();
    let mut score = vec![0.0; active.len()];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();

    for s in 0..n {
        if adjacency[s].iter().all(|&(_, e)| !active[e]) {
            continue;
        }
        sigma.iter_mut().for_each(|x| *x = 0.0);
        dist.iter_mut().for_each(|x| *x = usize::MAX);
        delta.iter_mut().for_each(|x| *x = 0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();

        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, e) in &adjacency[u] {
                if !active[e] {
                    continue;
                }
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push((u, e));
                }
            }
        }
        for &w in order.iter().rev() {
            for &(u, e) in &preds[w] {
                let share = sigma[u] / sigma[w] * (1.0 + delta[w]);
                score[e] += share;
                delta[u] += share;
            }
        }
    }
    // Each unordered pair was counted from both ends.
    score.iter_mut().for_each(|x| *x /= 2.0);
    score
}
