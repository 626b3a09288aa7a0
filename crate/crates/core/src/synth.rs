//! Planted-partition generator: stochastic block model edges plus node
//! attributes drawn around per-community centers and labels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

use crate::error::Error;
use crate::graph::{AttributeKind, AttributedGraph, GraphBuilder, RawValue};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible planted spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameters of a planted partition.
///
/// Community `c` has `sizes[c]` nodes, quantitative attribute values drawn
/// uniformly from `centers[c][i] ± spread`, and categorical attribute `j`
/// set to `labels[c][j]` (replaced by a different community's label with
/// probability `noise`).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub centers: Vec<Vec<f64>>,
    pub spread: f64,
    pub labels: Vec<Vec<String>>,
    pub noise: f64,
    pub seed: u64,
}

impl PlantedSpec {
    /// `communities` equal blocks of `size` nodes with `dims` quantitative
    /// attributes and one categorical label per community. Centers sit on a
    /// lattice in `[0.1, 0.9]^dims` (the smallest base `b` with
    /// `b^dims >= communities`); spread is 0.1.
    pub fn equal(communities: usize, size: usize, dims: usize, p_in: f64, p_out: f64, noise: f64, seed: u64) -> Self {
        let mut base = 1usize;
        while dims > 0 && base.pow(dims as u32) < communities {
            base += 1;
        }
        let coord = |digit: usize| {
            if base > 1 {
                0.1 + 0.8 * digit as f64 / (base - 1) as f64
            } else {
                0.5
            }
        };
        let centers = (0..communities)
            .map(|c| {
                let mut rest = c;
                (0..dims)
                    .map(|_| {
                        let digit = rest % base;
                        rest /= base;
                        coord(digit)
                    })
                    .collect()
            })
            .collect();
        PlantedSpec {
            sizes: vec![size; communities],
            p_in,
            p_out,
            centers,
            spread: 0.1,
            labels: (0..communities).map(|c| vec![format!("g{c}")]).collect(),
            noise,
            seed,
        }
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Expected edge count and its variance under the block model.
    pub fn edge_moments(&self) -> (f64, f64) {
        let (mut mean, mut var) = (0.0, 0.0);
        for (a, &sa) in self.sizes.iter().enumerate() {
            for (b, &sb) in self.sizes.iter().enumerate().skip(a) {
                let (pairs, p) = if a == b {
                    ((sa * sa.saturating_sub(1) / 2) as f64, self.p_in)
                } else {
                    ((sa * sb) as f64, self.p_out)
                };
                mean += pairs * p;
                var += pairs * p * (1.0 - p);
            }
        }
        (mean, var)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Infeasible(m));
        let k = self.sizes.len();
        if k == 0 {
            return fail("at least one community is required".into());
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return fail(format!(
                "need 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}",
                self.p_in, self.p_out
            ));
        }
        if self.centers.len() != k || self.labels.len() != k {
            return fail(format!(
                "{k} communities but {} center rows and {} label rows",
                self.centers.len(),
                self.labels.len()
            ));
        }
        let q = self.centers[0].len();
        let c = self.labels[0].len();
        if self.centers.iter().any(|row| row.len() != q) || self.labels.iter().any(|row| row.len() != c) {
            return fail("every community needs the same number of attributes".into());
        }
        if q + c == 0 {
            return fail("at least one attribute is required".into());
        }
        if self.centers.iter().flatten().any(|x| !x.is_finite()) || !(self.spread >= 0.0 && self.spread.is_finite()) {
            return fail("centers and spread must be finite, spread non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail(format!("noise must be in [0, 1], got {}", self.noise));
        }
        Ok(())
    }
}

/// A generated graph together with everything needed to write it out.
#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: AttributedGraph,
    /// Community of each node.
    pub truth: Vec<usize>,
    pub schema: Vec<(String, AttributeKind)>,
    /// Raw attribute values in schema order, one row per node.
    pub rows: Vec<Vec<RawValue>>,
    pub edges: Vec<(usize, usize)>,
}

/// Paths of the files written by [`PlantedGraph::write_files`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedFiles {
    pub edges: PathBuf,
    pub attrs: PathBuf,
    pub schema: PathBuf,
    pub truth: PathBuf,
}

impl PlantedFiles {
    /// `<dir>/<stem>.edges`, `.attrs`, `.schema`, `.truth`.
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        let file = |ext: &str| dir.join(format!("{stem}.{ext}"));
        PlantedFiles {
            edges: file("edges"),
            attrs: file("attrs"),
            schema: file("schema"),
            truth: file("truth"),
        }
    }
}

fn node_id(v: usize) -> String {
    format!("n{v}")
}

/// Calls `emit(i)` for each index in `0..total` kept independently with
/// probability `p`, skipping geometrically between hits.
fn bernoulli_indices<R: Rng>(total: u64, p: f64, rng: &mut R, mut emit: impl FnMut(u64)) {
    if total == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let skip = Geometric::new(p).expect("p in (0, 1)");
    let mut i = 0u64;
    loop {
        i = i.saturating_add(skip.sample(rng));
        if i >= total {
            return;
        }
        emit(i);
        i += 1;
    }
}

/// Inverse of the row-major enumeration of pairs `(i, j)` with `j < i`.
fn lower_triangle_pair(idx: u64) -> (u64, u64) {
    let mut i = ((((8 * idx + 1) as f64).sqrt() + 1.0) / 2.0) as u64;
    while i * (i - 1) / 2 > idx {
        i -= 1;
    }
    while (i + 1) * i / 2 <= idx {
        i += 1;
    }
    (i, idx - i * (i - 1) / 2)
}

pub fn generate(spec: &PlantedSpec) -> Result<PlantedGraph, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let q = spec.centers[0].len();
    let c = spec.labels[0].len();

    let mut starts = Vec::with_capacity(spec.sizes.len());
    let mut truth = Vec::with_capacity(spec.node_count());
    for (community, &size) in spec.sizes.iter().enumerate() {
        starts.push(truth.len());
        truth.extend(std::iter::repeat_n(community, size));
    }

    let mut edges = Vec::new();
    for (a, &sa) in spec.sizes.iter().enumerate() {
        let base_a = starts[a] as u64;
        bernoulli_indices((sa as u64) * (sa as u64).saturating_sub(1) / 2, spec.p_in, &mut rng, |idx| {
            let (i, j) = lower_triangle_pair(idx);
            edges.push(((base_a + i) as usize, (base_a + j) as usize));
        });
        for (b, &sb) in spec.sizes.iter().enumerate().skip(a + 1) {
            let base_b = starts[b] as u64;
            let sb = sb as u64;
            bernoulli_indices(sa as u64 * sb, spec.p_out, &mut rng, |idx| {
                edges.push(((base_a + idx / sb) as usize, (base_b + idx % sb) as usize));
            });
        }
    }

    let mut alternatives: Vec<Vec<Vec<&str>>> = Vec::with_capacity(spec.sizes.len());
    for own in &spec.labels {
        let per_attr = (0..c)
            .map(|j| {
                let mut others: Vec<&str> = spec
                    .labels
                    .iter()
                    .map(|row| row[j].as_str())
                    .filter(|l| *l != own[j])
                    .collect();
                others.sort_unstable();
                others.dedup();
                others
            })
            .collect();
        alternatives.push(per_attr);
    }

    let mut rows = Vec::with_capacity(truth.len());
    for &community in &truth {
        let mut row = Vec::with_capacity(q + c);
        for &center in &spec.centers[community] {
            let x = if spec.spread > 0.0 {
                rng.gen_range(center - spec.spread..=center + spec.spread)
            } else {
                center
            };
            row.push(RawValue::Number(x));
        }
        for (own, others) in spec.labels[community].iter().zip(&alternatives[community]) {
            let own = own.as_str();
            let label = if spec.noise > 0.0 && rng.gen_bool(spec.noise) {
                others.choose(&mut rng).copied().unwrap_or(own)
            } else {
                own
            };
            row.push(RawValue::Labels(vec![label.to_string()]));
        }
        rows.push(row);
    }

    let schema: Vec<(String, AttributeKind)> = (0..q)
        .map(|i| (format!("q{i}"), AttributeKind::Quantitative))
        .chain((0..c).map(|j| (format!("c{j}"), AttributeKind::Categorical)))
        .collect();
    let mut builder = GraphBuilder::new(schema.clone());
    for (v, row) in rows.iter().enumerate() {
        builder.add_node(node_id(v), row.clone())?;
    }
    for &(u, v) in &edges {
        builder.add_edge(u, v)?;
    }
    Ok(PlantedGraph {
        graph: builder.build()?,
        truth,
        schema,
        rows,
        edges,
    })
}

impl PlantedGraph {
    /// Writes the edge list, tab-separated attribute table, schema and
    /// ground-truth (`<id>\t<community>`) files.
    pub fn write_files(&self, files: &PlantedFiles) -> Result<(), SynthError> {
        let mut out = BufWriter::new(File::create(&files.edges)?);
        for &(u, v) in &self.edges {
            writeln!(out, "{} {}", node_id(u), node_id(v))?;
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(&files.attrs)?);
        write!(out, "id")?;
        for (name, _) in &self.schema {
            write!(out, "\t{name}")?;
        }
        writeln!(out)?;
        for (v, row) in self.rows.iter().enumerate() {
            write!(out, "{}", node_id(v))?;
            for value in row {
                match value {
                    RawValue::Number(x) => write!(out, "\t{x}")?,
                    RawValue::Labels(labels) => write!(out, "\t{}", labels.join(";"))?,
                    RawValue::Missing => write!(out, "\t")?,
                }
            }
            writeln!(out)?;
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(&files.schema)?);
        for (name, kind) in &self.schema {
            writeln!(out, "{name} {kind}")?;
        }
        out.flush()?;

        let mut out = BufWriter::new(File::create(&files.truth)?);
        for (v, community) in self.truth.iter().enumerate() {
            writeln!(out, "{}\t{community}", node_id(v))?;
        }
        out.flush()?;
        Ok(())
    }
}
