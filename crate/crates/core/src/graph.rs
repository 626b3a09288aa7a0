//! The attributed graph: CSR adjacency, per-node semantic vectors and the
//! attribute schema, plus loading from edge/attribute/schema text files.

use std::collections::HashMap;
use std::io::{BufRead, Read};
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, LoadError, Result};

/// How an attribute column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeKind {
    Quantitative,
    /// One label per node.
    Categorical,
    /// A set of labels per node, split on `delimiter`.
    CategoricalSet { delimiter: char },
}

impl AttributeKind {
    pub fn is_quantitative(self) -> bool {
        matches!(self, AttributeKind::Quantitative)
    }

    fn parse(token: &str) -> Option<Self> {
        match token {
            "quantitative" => Some(AttributeKind::Quantitative),
            "categorical" => Some(AttributeKind::Categorical),
            _ => {
                let delim = token.strip_prefix("categorical-set:")?;
                let mut chars = delim.chars();
                match (chars.next(), chars.next()) {
                    (Some(delimiter), None) => Some(AttributeKind::CategoricalSet { delimiter }),
                    _ => None,
                }
            }
        }
    }
}

impl std::fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttributeKind::Quantitative => f.write_str("quantitative"),
            AttributeKind::Categorical => f.write_str("categorical"),
            AttributeKind::CategoricalSet { delimiter } => write!(f, "categorical-set:{delimiter}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeDescriptor {
    pub name: String,
    pub kind: AttributeKind,
    /// Observed raw range of a quantitative column; `(0, 0)` for categorical ones.
    pub min: f64,
    pub max: f64,
    /// Interned labels of a categorical column, indexed by label id.
    pub categories: Vec<String>,
}

/// Attribute typing in canonical order: the `Q` quantitative attributes come
/// first, then the categorical ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    attributes: Vec<AttributeDescriptor>,
    quantitative: usize,
}

impl AttributeSchema {
    /// Total attribute count `A`.
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    /// Number of quantitative attributes `Q`.
    pub fn quantitative_count(&self) -> usize {
        self.quantitative
    }

    pub fn categorical_count(&self) -> usize {
        self.attributes.len() - self.quantitative
    }

    pub fn attributes(&self) -> &[AttributeDescriptor] {
        &self.attributes
    }

    pub fn categorical(&self) -> &[AttributeDescriptor] {
        &self.attributes[self.quantitative..]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub(crate) fn conforms(&self, t: &SemanticVector) -> bool {
        t.quantitative.len() == self.quantitative && t.categorical.len() == self.categorical_count()
    }
}

/// Parses a schema source: one `<column-name> <kind>` declaration per line.
/// Blank lines and `#` comments are skipped. Declaration order is preserved.
pub fn parse_schema<R: BufRead>(source: R) -> Result<Vec<(String, AttributeKind)>, LoadError> {
    let mut out: Vec<(String, AttributeKind)> = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(name), Some(kind), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(LoadError::Schema {
                line: lineno,
                message: format!("expected `<column-name> <kind>`, found `{trimmed}`"),
            });
        };
        let kind = AttributeKind::parse(kind).ok_or_else(|| LoadError::Schema {
            line: lineno,
            message: format!("unknown attribute kind `{kind}`"),
        })?;
        if out.iter().any(|(n, _)| n == name) {
            return Err(LoadError::Schema {
                line: lineno,
                message: format!("attribute `{name}` declared twice"),
            });
        }
        out.push((name.to_string(), kind));
    }
    Ok(out)
}

/// A node's attribute tuple. Quantitative values are normalized to `[0, 1]`;
/// categorical values are sorted, deduplicated label ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector {
    pub(crate) quantitative: Vec<f64>,
    pub(crate) categorical: Vec<Vec<u32>>,
}

impl SemanticVector {
    pub fn new(quantitative: Vec<f64>, categorical: Vec<Vec<u32>>) -> Self {
        let categorical = categorical
            .into_iter()
            .map(|mut set| {
                set.sort_unstable();
                set.dedup();
                set
            })
            .collect();
        SemanticVector {
            quantitative,
            categorical,
        }
    }

    pub fn quantitative(&self) -> &[f64] {
        &self.quantitative
    }

    pub fn categorical(&self) -> &[Vec<u32>] {
        &self.categorical
    }
}

/// A raw attribute value handed to [`GraphBuilder`].
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Labels(Vec<String>),
    Missing,
}

/// Incremental construction of an [`AttributedGraph`].
///
/// Attribute values are supplied in declaration order; the builder reorders
/// them canonically, interns categorical labels and (by default) min-max
/// normalizes quantitative columns.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    declared: Vec<(String, AttributeKind)>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    rows: Vec<Vec<RawValue>>,
    edges: Vec<(usize, usize)>,
    directed: bool,
    normalize: bool,
}

impl GraphBuilder {
    pub fn new(declared: Vec<(String, AttributeKind)>) -> Self {
        GraphBuilder {
            declared,
            labels: Vec::new(),
            index: HashMap::new(),
            rows: Vec::new(),
            edges: Vec::new(),
            directed: false,
            normalize: true,
        }
    }

    pub fn directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }

    /// When disabled, quantitative values are kept as given and must already
    /// lie in `[0, 1]`.
    pub fn normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn add_node(&mut self, id: impl Into<String>, values: Vec<RawValue>) -> Result<usize> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::InvalidParameter(format!("duplicate node id `{id}`")));
        }
        if values.len() != self.declared.len() {
            return Err(Error::InvalidParameter(format!(
                "node `{id}` has {} values, schema declares {}",
                values.len(),
                self.declared.len()
            )));
        }
        for ((name, kind), value) in self.declared.iter().zip(&values) {
            let ok = match (kind, value) {
                (AttributeKind::Quantitative, RawValue::Number(x)) => x.is_finite(),
                (AttributeKind::Quantitative, _) => false,
                (_, RawValue::Number(_)) => false,
                _ => true,
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "node `{id}`: invalid value {value:?} for {kind} attribute `{name}`"
                )));
            }
        }
        let v = self.labels.len();
        self.index.insert(id.clone(), v);
        self.labels.push(id);
        self.rows.push(values);
        Ok(v)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        let n = self.labels.len();
        for x in [u, v] {
            if x >= n {
                return Err(Error::NodeOutOfRange { index: x, n });
            }
        }
        self.edges.push((u, v));
        Ok(())
    }

    pub fn add_edge_by_id(&mut self, u: &str, v: &str) -> Result<()> {
        let lookup = |id: &str| {
            self.index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("unknown node id `{id}`")))
        };
        let (u, v) = (lookup(u)?, lookup(v)?);
        self.add_edge(u, v)
    }

    pub fn build(self) -> Result<AttributedGraph> {
        let n = self.labels.len();

        // canonical order: quantitative first, declaration order otherwise
        let mut order: Vec<usize> = (0..self.declared.len()).collect();
        order.sort_by_key(|&i| !self.declared[i].1.is_quantitative());
        let quantitative = order
            .iter()
            .filter(|&&i| self.declared[i].1.is_quantitative())
            .count();

        let mut attributes = Vec::with_capacity(order.len());
        let mut quant_values = vec![Vec::with_capacity(quantitative); n];
        let mut cat_values = vec![Vec::with_capacity(order.len() - quantitative); n];
        for &col in &order {
            let (name, kind) = &self.declared[col];
            if kind.is_quantitative() {
                let column: Vec<f64> = self
                    .rows
                    .iter()
                    .map(|row| match row[col] {
                        RawValue::Number(x) => x,
                        _ => unreachable!("validated in add_node"),
                    })
                    .collect();
                let (min, max) = column
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                        (lo.min(x), hi.max(x))
                    });
                let (min, max) = if n == 0 { (0.0, 0.0) } else { (min, max) };
                if !self.normalize && (min < 0.0 || max > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "attribute `{name}` ranges over [{min}, {max}]; \
                         unnormalized values must lie in [0, 1]"
                    )));
                }
                for (v, x) in column.into_iter().enumerate() {
                    let value = if !self.normalize {
                        x
                    } else if max > min {
                        (x - min) / (max - min)
                    } else {
                        0.0
                    };
                    quant_values[v].push(value);
                }
                attributes.push(AttributeDescriptor {
                    name: name.clone(),
                    kind: *kind,
                    min,
                    max,
                    categories: Vec::new(),
                });
            } else {
                let mut vocab: HashMap<&str, u32> = HashMap::new();
                let mut categories: Vec<String> = Vec::new();
                for (v, row) in self.rows.iter().enumerate() {
                    let set = match &row[col] {
                        RawValue::Labels(labels) => labels
                            .iter()
                            .map(|label| {
                                *vocab.entry(label.as_str()).or_insert_with(|| {
                                    categories.push(label.clone());
                                    (categories.len() - 1) as u32
                                })
                            })
                            .collect(),
                        _ => Vec::new(),
                    };
                    cat_values[v].push(set);
                }
                attributes.push(AttributeDescriptor {
                    name: name.clone(),
                    kind: *kind,
                    min: 0.0,
                    max: 0.0,
                    categories,
                });
            }
        }
        let semantic = quant_values
            .into_iter()
            .zip(cat_values)
            .map(|(q, c)| SemanticVector::new(q, c))
            .collect();

        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, v) in self.edges {
            if u == v {
                continue;
            }
            adjacency[u].push(v);
            if !self.directed {
                adjacency[v].push(u);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut list in adjacency {
            list.sort_unstable();
            list.dedup();
            targets.extend_from_slice(&list);
            offsets.push(targets.len());
        }
        let edge_count = if self.directed {
            targets.len()
        } else {
            targets.len() / 2
        };

        Ok(AttributedGraph {
            offsets,
            targets,
            labels: self.labels,
            index: self.index,
            attributes: semantic,
            schema: AttributeSchema {
                attributes,
                quantitative,
            },
            directed: self.directed,
            edge_count,
        })
    }
}

/// Immutable node-attributed graph with dense node indices `0..n`.
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    attributes: Vec<SemanticVector>,
    schema: AttributeSchema,
    directed: bool,
    edge_count: usize,
}

impl AttributedGraph {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of distinct edges (arcs, for directed graphs).
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn attributes(&self, v: usize) -> &SemanticVector {
        &self.attributes[v]
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Sorted adjacency of `v`. Panics if `v` is out of range.
    #[inline]
    pub fn adjacency(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index: v,
                n: self.node_count(),
            })
        }
    }

    /// `N(v)`, excluding `v`, restricted to the active nodes of `view` when given.
    pub fn neighbors(&self, v: usize, view: Option<&ActiveView>) -> Result<Vec<usize>> {
        self.check(v)?;
        match view {
            None => Ok(self.adjacency(v).to_vec()),
            Some(view) => {
                if !view.is_active(v) {
                    return Err(Error::InactiveNode(v));
                }
                Ok(self
                    .adjacency(v)
                    .iter()
                    .copied()
                    .filter(|&u| view.is_active(u))
                    .collect())
            }
        }
    }

    /// `N_l(v)`: every node reachable from `v` in at most `l` hops, `v` included.
    /// Sorted ascending.
    pub fn exact_l_neighborhood(&self, v: usize, l: usize) -> Result<Vec<usize>> {
        self.check(v)?;
        let mut scratch = BallScratch::new(self.node_count());
        let mut out = Vec::new();
        self.ball_into(v, l, &mut scratch, &mut out);
        Ok(out)
    }

    pub(crate) fn ball_into(&self, v: usize, l: usize, scratch: &mut BallScratch, out: &mut Vec<usize>) {
        scratch.ensure(self.node_count());
        let stamp = scratch.next_epoch();
        out.clear();
        out.push(v);
        scratch.seen[v] = stamp;
        let mut start = 0;
        for _ in 0..l {
            let end = out.len();
            if start == end {
                break;
            }
            for i in start..end {
                let u = out[i];
                for &w in self.adjacency(u) {
                    if scratch.seen[w] != stamp {
                        scratch.seen[w] = stamp;
                        out.push(w);
                    }
                }
            }
            start = end;
        }
        out.sort_unstable();
    }

    /// True when every arc has its reverse. Always holds for undirected loads.
    pub fn is_symmetric(&self) -> bool {
        (0..self.node_count()).all(|u| {
            self.adjacency(u)
                .iter()
                .all(|&v| self.adjacency(v).binary_search(&u).is_ok())
        })
    }

    /// Content digest over node labels and adjacency; keys sketch caches.
    pub fn digest(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.node_count() as u64).to_le_bytes());
        hasher.update([self.directed as u8]);
        for label in &self.labels {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
        }
        for &o in &self.offsets {
            hasher.update((o as u64).to_le_bytes());
        }
        for &t in &self.targets {
            hasher.update((t as u64).to_le_bytes());
        }
        hasher.finalize().into()
    }
}

/// Epoch-stamped visited marks reused across BFS calls.
#[derive(Debug, Default)]
pub(crate) struct BallScratch {
    seen: Vec<u32>,
    epoch: u32,
}

impl BallScratch {
    pub(crate) fn new(n: usize) -> Self {
        BallScratch {
            seen: vec![0; n],
            epoch: 0,
        }
    }

    fn ensure(&mut self, n: usize) {
        if self.seen.len() < n {
            self.seen.resize(n, 0);
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.seen.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }
}

/// The set of not-yet-clustered nodes `V'`.
///
/// Supports O(1) membership, removal, and uniform sampling of an active node.
#[derive(Debug, Clone)]
pub struct ActiveView {
    position: Vec<usize>,
    active: Vec<usize>,
}

const INACTIVE: usize = usize::MAX;

impl ActiveView {
    pub fn new(n: usize) -> Self {
        ActiveView {
            position: (0..n).collect(),
            active: (0..n).collect(),
        }
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.position.get(v).is_some_and(|&p| p != INACTIVE)
    }

    /// Removes `v`; returns false if it was already inactive.
    pub fn deactivate(&mut self, v: usize) -> bool {
        let p = self.position[v];
        if p == INACTIVE {
            return false;
        }
        let last = *self.active.last().expect("active node implies non-empty");
        self.active.swap_remove(p);
        if last != v {
            self.position[last] = p;
        }
        self.position[v] = INACTIVE;
        true
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Active nodes in an unspecified (but deterministic) order.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.active.is_empty() {
            None
        } else {
            Some(self.active[rng.gen_range(0..self.active.len())])
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub directed: bool,
    /// Min-max normalize quantitative columns (default). When off, values
    /// must already be in `[0, 1]`.
    pub normalize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            directed: false,
            normalize: true,
        }
    }
}

/// Loads a graph from an edge list, an attribute table and a schema.
///
/// The attribute table has a header row whose first column is the node id;
/// fields are tab-separated if the header contains a tab, comma-separated
/// otherwise. Nodes are indexed in attribute-row order.
pub fn load_graph<E: BufRead, A: Read, S: BufRead>(
    edges: E,
    mut attrs: A,
    schema: S,
    options: LoadOptions,
) -> Result<AttributedGraph, LoadError> {
    let declared = parse_schema(schema)?;

    let mut text = String::new();
    attrs.read_to_string(&mut text)?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| LoadError::Attributes {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.is_empty() {
        return Err(LoadError::Attributes {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let columns: Vec<&str> = header.iter().skip(1).collect();
    // column index in the row for each declared attribute
    let mut column_of = Vec::with_capacity(declared.len());
    for (name, _) in &declared {
        let pos = columns.iter().position(|c| c == name).ok_or_else(|| LoadError::Attributes {
            line: 1,
            message: format!("schema attribute `{name}` has no column"),
        })?;
        column_of.push(pos + 1);
    }
    if let Some(extra) = columns.iter().find(|c| !declared.iter().any(|(n, _)| n == *c)) {
        return Err(LoadError::Attributes {
            line: 1,
            message: format!("column `{extra}` is not declared in the schema"),
        });
    }

    let mut builder = GraphBuilder::new(declared.clone())
        .directed(options.directed)
        .normalize(options.normalize);
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::Attributes {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != header.len() {
            return Err(LoadError::Attributes {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let id = &record[0];
        if id.is_empty() {
            return Err(LoadError::Attributes {
                line,
                message: "empty node id".into(),
            });
        }
        if builder.index_of(id).is_some() {
            return Err(LoadError::DuplicateNode {
                line,
                id: id.to_string(),
            });
        }
        let mut values = Vec::with_capacity(declared.len());
        for ((name, kind), &col) in declared.iter().zip(&column_of) {
            let field = &record[col];
            let value = match kind {
                AttributeKind::Quantitative => {
                    if field.is_empty() {
                        return Err(LoadError::MissingQuantitative {
                            line,
                            column: name.clone(),
                        });
                    }
                    match field.parse::<f64>() {
                        Ok(x) if x.is_finite() => RawValue::Number(x),
                        _ => {
                            return Err(LoadError::NonNumeric {
                                line,
                                column: name.clone(),
                                value: field.to_string(),
                            })
                        }
                    }
                }
                AttributeKind::Categorical if field.is_empty() => RawValue::Missing,
                AttributeKind::Categorical => RawValue::Labels(vec![field.to_string()]),
                AttributeKind::CategoricalSet { delimiter } => RawValue::Labels(
                    field
                        .split(*delimiter)
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect(),
                ),
            };
            values.push(value);
        }
        builder
            .add_node(id, values)
            .map_err(|e| LoadError::Attributes {
                line,
                message: e.to_string(),
            })?;
    }

    for (i, line) in edges.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(LoadError::MalformedEdge {
                line: lineno,
                content: trimmed.to_string(),
            });
        };
        let lookup = |id: &str| {
            builder.index_of(id).ok_or_else(|| LoadError::UnknownNode {
                line: lineno,
                id: id.to_string(),
            })
        };
        let (u, v) = (lookup(a)?, lookup(b)?);
        builder.add_edge(u, v).expect("indices come from the builder");
    }

    builder.build().map_err(|e| LoadError::Attributes {
        line: 0,
        message: e.to_string(),
    })
}

pub fn load_graph_files(
    edges: &Path,
    attrs: &Path,
    schema: &Path,
    options: LoadOptions,
) -> Result<AttributedGraph, LoadError> {
    use std::fs::File;
    use std::io::BufReader;
    load_graph(
        BufReader::new(File::open(edges)?),
        BufReader::new(File::open(attrs)?),
        BufReader::new(File::open(schema)?),
        options,
    )
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The 8-node, 11-edge example graph with attributes sex / x / y, raw
    /// coordinates (already inside `[0, 1]`).
    pub(crate) fn sample_graph(normalize: bool) -> AttributedGraph {
        let mut b = GraphBuilder::new(vec![
            ("sex".into(), AttributeKind::Categorical),
            ("x".into(), AttributeKind::Quantitative),
            ("y".into(), AttributeKind::Quantitative),
        ])
        .normalize(normalize);
        let rows = [
            ("1", 0.0, 0.1),
            ("1", 0.0, 0.0),
            ("1", 0.1, 0.1),
            ("0", 0.2, 0.0),
            ("0", 0.4, 0.0),
            ("0", 0.55, 0.1),
            ("0", 0.6, 0.0),
            ("1", 0.7, 0.09),
        ];
        for (i, (sex, x, y)) in rows.into_iter().enumerate() {
            b.add_node(
                format!("v{i}"),
                vec![
                    RawValue::Labels(vec![sex.into()]),
                    RawValue::Number(x),
                    RawValue::Number(y),
                ],
            )
            .unwrap();
        }
        for (u, v) in FIGURE_ONE_EDGES {
            b.add_edge(u, v).unwrap();
        }
        b.build().unwrap()
    }

    pub(crate) const FIGURE_ONE_EDGES: [(usize, usize); 11] = [
        (0, 1),
        (0, 2),
        (0, 7),
        (1, 2),
        (1, 3),
        (3, 4),
        (4, 5),
        (4, 6),
        (5, 6),
        (5, 7),
        (6, 7),
    ];

    pub(crate) fn unlabeled(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        let mut b = GraphBuilder::new(vec![("c".into(), AttributeKind::Categorical)]);
        for i in 0..n {
            b.add_node(i.to_string(), vec![RawValue::Labels(vec!["a".into()])])
                .unwrap();
        }
        for &(u, v) in edges {
            b.add_edge(u, v).unwrap();
        }
        b.build().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FIG1_SCHEMA: &str = "sex categorical\nx quantitative\ny quantitative\n";
    const FIG1_ATTRS: &str = "id,sex,x,y\nv0,1,0,0.1\nv1,1,0,0\nv2,1,0.1,0.1\nv3,0,0.2,0\n\
                              v4,0,0.4,0\nv5,0,0.55,0.1\nv6,0,0.6,0\nv7,1,0.7,0.09\n";
    const FIG1_EDGES: &str = "# fig 1\nv0 v1\nv0 v2\nv0 v7\nv1 v2\nv1 v3\nv3 v4\n\
                              v4 v5\nv4 v6\nv5 v6\nv5 v7\nv6 v7\n";

    fn load(edges: &str, attrs: &str, schema: &str) -> Result<AttributedGraph, LoadError> {
        load_graph(edges.as_bytes(), attrs.as_bytes(), schema.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn loads_sample_graph() {
        let g = load(FIG1_EDGES, FIG1_ATTRS, FIG1_SCHEMA).unwrap();
        assert_eq!(g.node_count(), 8);
        assert_eq!(g.edge_count(), 11);
        assert!(g.is_symmetric());
        // canonical order puts x, y before sex
        assert_eq!(g.schema().quantitative_count(), 2);
        assert_eq!(g.schema().attributes()[2].name, "sex");
        // x spans [0, 0.7]; v7 is the max
        assert_eq!(g.attributes(7).quantitative()[0], 1.0);
        assert_eq!(g.attributes(0).quantitative()[0], 0.0);
        assert!((g.attributes(3).quantitative()[0] - 0.2 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn single_node_no_edges() {
        let g = load("", "id,c\nonly,a\n", "c categorical\n").unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert!(g.neighbors(0, None).unwrap().is_empty());
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = load("a b\nb a\na b\na a\n", "id,c\na,x\nb,y\n", "c categorical\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.adjacency(0), &[1]);
        assert_eq!(g.adjacency(1), &[0]);
    }

    #[test]
    fn directed_load_keeps_arcs() {
        let g = load_graph(
            "a b\nb c\n".as_bytes(),
            "id,c\na,x\nb,y\nc,z\n".as_bytes(),
            "c categorical\n".as_bytes(),
            LoadOptions {
                directed: true,
                normalize: true,
            },
        )
        .unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(!g.is_symmetric());
        assert_eq!(g.adjacency(1), &[2]);
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        let schema = "c categorical\nq quantitative\n";
        match load("a b\na zz\n", "id,c,q\na,x,1\nb,y,2\n", schema) {
            Err(LoadError::UnknownNode { line: 2, id }) => assert_eq!(id, "zz"),
            other => panic!("unexpected {other:?}"),
        }
        match load("", "id,c,q\na,x,1\nb,y,oops\n", schema) {
            Err(LoadError::NonNumeric { line: 3, column, .. }) => assert_eq!(column, "q"),
            other => panic!("unexpected {other:?}"),
        }
        match load("", "id,c,q\na,x,\n", schema) {
            Err(LoadError::MissingQuantitative { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match load("", "id,c\na,x\n", schema) {
            Err(LoadError::Attributes { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match load("", "id,c,q,extra\na,x,1,2\n", schema) {
            Err(LoadError::Attributes { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match load("", "id,c,q\na,x,1\n", "c categorical\nq numeric\n") {
            Err(LoadError::Schema { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match load("a\n", "id,c,q\na,x,1\n", schema) {
            Err(LoadError::MalformedEdge { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match load("", "id,c,q\na,x,1\na,y,2\n", schema) {
            Err(LoadError::DuplicateNode { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn categorical_sets_and_missing_values() {
        let g = load(
            "",
            "id\tsectors\tsex\na\tIT;Bank;IT\tF\nb\t\t\n",
            "sectors categorical-set:;\nsex categorical\n",
        )
        .unwrap();
        let a = g.attributes(0);
        assert_eq!(a.categorical()[0].len(), 2);
        let b = g.attributes(1);
        assert!(b.categorical()[0].is_empty());
        assert!(b.categorical()[1].is_empty());
        assert_eq!(g.schema().categorical()[0].categories, vec!["IT", "Bank"]);
    }

    #[test]
    fn constant_column_normalizes_to_zero() {
        let g = load("", "id,q\na,5\nb,5\n", "q quantitative\n").unwrap();
        assert_eq!(g.attributes(0).quantitative(), &[0.0]);
        assert_eq!(g.attributes(1).quantitative(), &[0.0]);
    }

    #[test]
    fn unnormalized_values_must_be_unit_range() {
        let opts = LoadOptions {
            directed: false,
            normalize: false,
        };
        let ok = load_graph("".as_bytes(), "id,q\na,0.25\n".as_bytes(), "q quantitative".as_bytes(), opts);
        assert_eq!(ok.unwrap().attributes(0).quantitative(), &[0.25]);
        let bad = load_graph("".as_bytes(), "id,q\na,3\n".as_bytes(), "q quantitative".as_bytes(), opts);
        assert!(bad.is_err());
    }

    #[test]
    fn sample_graph_neighbors() {
        let g = sample_graph(false);
        assert_eq!(g.neighbors(0, None).unwrap(), vec![1, 2, 7]);
        assert_eq!(g.neighbors(4, None).unwrap(), vec![3, 5, 6]);
        assert!(matches!(g.neighbors(8, None), Err(Error::NodeOutOfRange { .. })));
    }

    #[test]
    fn isolated_node_has_no_neighbors() {
        let g = unlabeled(3, &[(0, 1)]);
        assert!(g.neighbors(2, None).unwrap().is_empty());
    }

    #[test]
    fn neighbors_respect_view() {
        let g = sample_graph(false);
        let mut view = ActiveView::new(8);
        view.deactivate(1);
        assert_eq!(g.neighbors(0, Some(&view)).unwrap(), vec![2, 7]);
        assert!(matches!(g.neighbors(1, Some(&view)), Err(Error::InactiveNode(1))));
    }

    #[test]
    fn sample_graph_neighborhoods() {
        let g = sample_graph(false);
        assert_eq!(g.exact_l_neighborhood(0, 1).unwrap(), vec![0, 1, 2, 7]);
        assert_eq!(g.exact_l_neighborhood(3, 1).unwrap(), vec![1, 3, 4]);
        assert_eq!(g.exact_l_neighborhood(5, 0).unwrap(), vec![5]);
        assert_eq!(g.exact_l_neighborhood(0, 2).unwrap(), vec![0, 1, 2, 3, 5, 6, 7]);
    }

    #[test]
    fn view_removal_and_sampling() {
        let mut view = ActiveView::new(5);
        assert!(view.deactivate(2));
        assert!(!view.deactivate(2));
        assert!(view.deactivate(4));
        assert_eq!(view.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let v = view.pick(&mut rng).unwrap();
            assert!(view.is_active(v) && v != 2 && v != 4);
        }
        for v in [0, 1, 3] {
            view.deactivate(v);
        }
        assert!(view.is_empty());
        assert_eq!(view.pick(&mut rng), None);
    }

    #[test]
    fn digest_tracks_structure() {
        let a = sample_graph(false);
        let b = sample_graph(true);
        assert_eq!(a.digest(), b.digest());
        let c = unlabeled(8, &FIGURE_ONE_EDGES[..10]);
        assert_ne!(a.digest(), c.digest());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_graph() -> impl Strategy<Value = AttributedGraph> {
            (2usize..30).prop_flat_map(|n| {
                proptest::collection::vec((0..n, 0..n), 0..60)
                    .prop_map(move |edges| unlabeled(n, &edges))
            })
        }

        proptest! {
            #[test]
            fn balls_are_monotone(g in random_graph(), l in 0usize..4) {
                for v in 0..g.node_count() {
                    let inner = g.exact_l_neighborhood(v, l).unwrap();
                    let outer = g.exact_l_neighborhood(v, l + 1).unwrap();
                    prop_assert!(inner.iter().all(|x| outer.binary_search(x).is_ok()));
                }
            }

            #[test]
            fn undirected_adjacency_is_symmetric(g in random_graph()) {
                prop_assert!(g.is_symmetric());
                for v in 0..g.node_count() {
                    prop_assert!(!g.adjacency(v).contains(&v));
                    prop_assert!(g.adjacency(v).windows(2).all(|w| w[0] < w[1]));
                }
            }

            #[test]
            fn normalized_column_spans_unit_interval(values in proptest::collection::vec(-50.0f64..50.0, 2..20)) {
                let mut b = GraphBuilder::new(vec![("q".into(), AttributeKind::Quantitative)]);
                for (i, x) in values.iter().enumerate() {
                    b.add_node(i.to_string(), vec![RawValue::Number(*x)]).unwrap();
                }
                let g = b.build().unwrap();
                let col: Vec<f64> = (0..g.node_count()).map(|v| g.attributes(v).quantitative()[0]).collect();
                prop_assert!(col.iter().all(|x| (0.0..=1.0).contains(x)));
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi > lo {
                    prop_assert!(col.contains(&0.0));
                    prop_assert!(col.contains(&1.0));
                } else {
                    prop_assert!(col.iter().all(|&x| x == 0.0));
                }
            }
        }
    }
}
