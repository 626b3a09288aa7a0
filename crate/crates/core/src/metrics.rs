//! Clustering quality: WCSS over a semantic embedding, Newman modularity and
//! the cluster-size histogram.

use std::collections::BTreeMap;

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

/// Dense vectors used for WCSS: the `Q` normalized quantitative values
/// followed by one 0/1 indicator per categorical label in the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEmbedding {
    dim: usize,
    data: Vec<f64>,
}

impl SemanticEmbedding {
    pub fn from_graph(g: &AttributedGraph) -> Self {
        let schema = g.schema();
        let q = schema.quantitative_count();
        let mut offsets = Vec::with_capacity(schema.categorical_count());
        let mut dim = q;
        for attr in schema.categorical() {
            offsets.push(dim);
            dim += attr.categories.len();
        }
        let n = g.node_count();
        let mut data = vec![0.0; n * dim];
        for v in 0..n {
            let row = &mut data[v * dim..(v + 1) * dim];
            let t = g.attributes(v);
            row[..q].copy_from_slice(t.quantitative());
            for (set, &offset) in t.categorical().iter().zip(&offsets) {
                for &label in set {
                    row[offset + label as usize] = 1.0;
                }
            }
        }
        SemanticEmbedding { dim, data }
    }

    /// Embedding from explicit row vectors, all of the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidParameter("embedding rows differ in length".into()));
        }
        Ok(SemanticEmbedding {
            dim,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }
}

/// Within-cluster sum of squared Euclidean distances to the cluster means.
pub fn wcss(clustering: &Clustering, embedding: &SemanticEmbedding) -> Result<f64> {
    let dim = embedding.dim();
    if dim > 0 && embedding.node_count() < clustering.node_count() {
        return Err(Error::ClusteringMismatch(
            "embedding does not cover every node".into(),
        ));
    }
    let mut total = 0.0;
    let mut centroid = vec![0.0; dim];
    for cluster in &clustering.clusters {
        if cluster.members.is_empty() {
            return Err(Error::EmptyCluster(cluster.id));
        }
        if dim == 0 {
            continue;
        }
        centroid.fill(0.0);
        for &v in &cluster.members {
            for (c, x) in centroid.iter_mut().zip(embedding.row(v)) {
                *c += x;
            }
        }
        let size = cluster.members.len() as f64;
        centroid.iter_mut().for_each(|c| *c /= size);
        for &v in &cluster.members {
            total += embedding
                .row(v)
                .iter()
                .zip(&centroid)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>();
        }
    }
    Ok(total)
}

/// Newman modularity `Σ_c [e_c/m − (d_c/2m)²]` in `O(n + m)`.
pub fn modularity(g: &AttributedGraph, clustering: &Clustering) -> Result<f64> {
    if g.is_directed() {
        return Err(Error::Directed);
    }
    let m = g.edge_count();
    if m == 0 {
        return Err(Error::NoEdges);
    }
    if clustering.node_count() != g.node_count() {
        return Err(Error::ClusteringMismatch(format!(
            "clustering covers {} nodes, graph has {}",
            clustering.node_count(),
            g.node_count()
        )));
    }
    let k = clustering.len();
    let mut internal = vec![0usize; k];
    let mut degree = vec![0usize; k];
    for v in 0..g.node_count() {
        let c = clustering.assignment[v];
        degree[c] += g.degree(v);
        internal[c] += g
            .adjacency(v)
            .iter()
            .filter(|&&u| u > v && clustering.assignment[u] == c)
            .count();
    }
    let m = m as f64;
    Ok(internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum())
}

/// `(size, count)` rows sorted by size.
pub fn size_distribution(clustering: &Clustering) -> Vec<(usize, usize)> {
    let mut hist = BTreeMap::new();
    for c in &clustering.clusters {
        *hist.entry(c.members.len()).or_insert(0) += 1;
    }
    hist.into_iter().collect()
}
