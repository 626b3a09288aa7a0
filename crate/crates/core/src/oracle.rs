//! Brute-force reference implementations for checking the fast paths.
//!
//! Nothing here calls into `distance`, `sketch`, `clustering` or `metrics`;
//! the code only reads the graph's adjacency and attribute data.

use std::collections::{HashSet, VecDeque};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::tuning::EmpiricalCdf;

/// Default node-count ceiling for the quadratic oracles.
pub const DEFAULT_LIMIT_N: usize = 300;

/// BFS ball of radius `l` around `v`, `v` included.
pub fn neighborhood(g: &AttributedGraph, v: usize, l: usize) -> HashSet<usize> {
    let mut seen = HashSet::from([v]);
    let mut queue = VecDeque::from([(v, 0usize)]);
    while let Some((u, depth)) = queue.pop_front() {
        if depth == l {
            continue;
        }
        for &w in g.adjacency(u) {
            if seen.insert(w) {
                queue.push_back((w, depth + 1));
            }
        }
    }
    seen
}

pub fn jaccard_distance_sets<T: std::hash::Hash + Eq>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(b).count() as f64 / union as f64
}

pub fn topological_distance(g: &AttributedGraph, a: usize, b: usize, l: usize) -> f64 {
    jaccard_distance_sets(&neighborhood(g, a, l), &neighborhood(g, b, l))
}

/// Direct evaluation of the semantic distance from the stored tuples.
pub fn semantic_distance(g: &AttributedGraph, a: usize, b: usize) -> f64 {
    let attrs = g.schema().len();
    if attrs == 0 {
        return 0.0;
    }
    let (ta, tb) = (g.attributes(a), g.attributes(b));
    let q = ta.quantitative().len() as f64;
    let mut euclid = 0.0;
    for i in 0..ta.quantitative().len() {
        euclid += (ta.quantitative()[i] - tb.quantitative()[i]).powi(2);
    }
    let mut total = euclid.sqrt() * q.sqrt();
    for i in 0..ta.categorical().len() {
        let x: HashSet<u32> = ta.categorical()[i].iter().copied().collect();
        let y: HashSet<u32> = tb.categorical()[i].iter().copied().collect();
        total += jaccard_distance_sets(&x, &y);
    }
    total / attrs as f64
}

/// Distances over all unordered pairs of distinct nodes.
pub fn exact_pairwise_cdf<F>(g: &AttributedGraph, dist: F, limit_n: usize) -> Result<EmpiricalCdf>
where
    F: Fn(usize, usize) -> f64,
{
    let n = g.node_count();
    if n > limit_n {
        return Err(Error::TooLarge { n, limit: limit_n });
    }
    let mut all = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            all.push(dist(a, b));
        }
    }
    Ok(EmpiricalCdf::from_samples(all))
}

/// Newman modularity as the double sum `1/2m Σ_{v,w} [A_vw − k_v k_w / 2m] δ(c_v, c_w)`.
pub fn modularity_reference(g: &AttributedGraph, assignment: &[usize]) -> Result<f64> {
    let n = g.node_count();
    if assignment.len() != n {
        return Err(Error::ClusteringMismatch("assignment length".into()));
    }
    let arcs: HashSet<(usize, usize)> = (0..n)
        .flat_map(|v| g.adjacency(v).iter().map(move |&w| (v, w)))
        .collect();
    let two_m = arcs.len() as f64;
    if two_m == 0.0 {
        return Err(Error::NoEdges);
    }
    let degree: Vec<f64> = (0..n).map(|v| g.adjacency(v).len() as f64).collect();
    let mut q = 0.0;
    for v in 0..n {
        for w in 0..n {
            if assignment[v] != assignment[w] {
                continue;
            }
            let a = if arcs.contains(&(v, w)) { 1.0 } else { 0.0 };
            q += a - degree[v] * degree[w] / two_m;
        }
    }
    Ok(q / two_m)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Nodes with no (or an out-of-range) cluster id.
    pub unassigned: Vec<usize>,
    /// Nodes listed in more than one cluster, or in a cluster other than
    /// their assignment.
    pub overlapping: Vec<usize>,
    /// `(cluster, node, distance)` for members farther than `τ` from the seed.
    pub too_far: Vec<(usize, usize, f64)>,
    /// `(cluster, node)` for members unreachable from the seed inside the
    /// cluster, or already removed when the cluster was extracted.
    pub disconnected: Vec<(usize, usize)>,
    /// Clusters whose seed is not a member.
    pub seed_missing: Vec<usize>,
    pub enqueue_count_ok: bool,
}

impl ValidationReport {
    pub fn partition_ok(&self) -> bool {
        self.unassigned.is_empty() && self.overlapping.is_empty()
    }

    pub fn closeness_ok(&self) -> bool {
        self.too_far.is_empty() && self.seed_missing.is_empty()
    }

    pub fn connectivity_ok(&self) -> bool {
        self.disconnected.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.partition_ok() && self.closeness_ok() && self.connectivity_ok() && self.enqueue_count_ok
    }
}

/// Checks totality, disjointness, seed-`τ`-closeness under `dist`, and that
/// each cluster was connected among the nodes still unassigned when it was
/// extracted (clusters are replayed in id order).
pub fn validate_clustering<F>(g: &AttributedGraph, clustering: &Clustering, tau: f64, dist: F) -> ValidationReport
where
    F: Fn(usize, usize) -> f64,
{
    let n = g.node_count();
    let mut report = ValidationReport::default();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (idx, cluster) in clustering.clusters.iter().enumerate() {
        for &v in &cluster.members {
            if v >= n {
                continue;
            }
            if owner[v].is_some() {
                report.overlapping.push(v);
            }
            owner[v] = Some(idx);
        }
    }
    for (v, &own) in owner.iter().enumerate() {
        match (own, clustering.assignment.get(v)) {
            (Some(idx), Some(&c)) if c == idx => {}
            (Some(_), Some(&c)) if c < clustering.clusters.len() => report.overlapping.push(v),
            _ => report.unassigned.push(v),
        }
    }
    report.overlapping.sort_unstable();
    report.overlapping.dedup();

    let mut removed = vec![false; n];
    for (idx, cluster) in clustering.clusters.iter().enumerate() {
        let members: HashSet<usize> = cluster.members.iter().copied().filter(|&v| v < n).collect();
        if !members.contains(&cluster.seed) {
            report.seed_missing.push(idx);
        }
        for &v in &members {
            let d = dist(cluster.seed, v);
            if d > tau {
                report.too_far.push((idx, v, d));
            }
        }
        // BFS from the seed through members that were still active
        let mut reached = HashSet::new();
        if members.contains(&cluster.seed) && !removed[cluster.seed] {
            reached.insert(cluster.seed);
            let mut queue = VecDeque::from([cluster.seed]);
            while let Some(u) = queue.pop_front() {
                for &w in g.adjacency(u) {
                    if members.contains(&w) && !removed[w] && reached.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }
        let mut missing: Vec<usize> = members.difference(&reached).copied().collect();
        missing.sort_unstable();
        report.disconnected.extend(missing.into_iter().map(|v| (idx, v)));
        for &v in &members {
            removed[v] = true;
        }
    }
    report.enqueue_count_ok = clustering.enqueued == n;
    report
}
