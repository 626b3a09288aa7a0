//! Semantic, topological and combined node distances.
//!
//! * semantic: `(‖Δq‖₂·√Q + Σ J(cat)) / A` over the normalized quantitative
//!   part and the categorical label sets,
//! * topological: Jaccard distance of the `l`-neighborhoods, either exact
//!   (BFS) or estimated from a [`SketchTable`],
//! * combined: the max of the two.

use std::cell::RefCell;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, AttributedGraph, BallScratch, SemanticVector};
use crate::sketch::SketchTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    Combined,
    SemanticOnly,
    TopologicalOnly,
}

impl DistanceMode {
    pub fn uses_topology(self) -> bool {
        !matches!(self, DistanceMode::SemanticOnly)
    }

    pub fn uses_semantics(self) -> bool {
        !matches!(self, DistanceMode::TopologicalOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologicalBackend {
    Exact,
    Sketch,
}

impl TopologicalBackend {
    /// Node count up to which [`TopologicalBackend::auto`] picks the exact backend.
    pub const EXACT_LIMIT: usize = 10_000;

    pub fn auto(n: usize) -> Self {
        if n <= Self::EXACT_LIMIT {
            TopologicalBackend::Exact
        } else {
            TopologicalBackend::Sketch
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceConfig {
    /// Hop radius of the neighborhoods compared by `d_T`.
    pub l: usize,
    pub mode: DistanceMode,
    /// Compare quantitative values by exact match, as if categorical.
    pub discretize_quantitative: bool,
    pub backend: TopologicalBackend,
}

impl DistanceConfig {
    pub fn new(l: usize, mode: DistanceMode) -> Self {
        DistanceConfig {
            l,
            mode,
            discretize_quantitative: false,
            backend: TopologicalBackend::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.uses_topology() && self.l == 0 {
            return Err(Error::InvalidParameter(
                "topological distance needs l >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// `1 − |X∩Y| / |X∪Y|` over ascending, deduplicated slices; two empty sets
/// are at distance 0.
pub fn jaccard_distance<T: Ord>(x: &[T], y: &[T]) -> f64 {
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = x.len() + y.len() - shared;
    if union == 0 {
        0.0
    } else {
        1.0 - shared as f64 / union as f64
    }
}

fn categorical_sum(t1: &SemanticVector, t2: &SemanticVector) -> f64 {
    t1.categorical
        .iter()
        .zip(&t2.categorical)
        .map(|(a, b)| jaccard_distance(a, b))
        .sum()
}

#[inline]
fn semantic_unchecked(t1: &SemanticVector, t2: &SemanticVector, attribute_count: usize) -> f64 {
    if attribute_count == 0 {
        return 0.0;
    }
    let q = t1.quantitative.len();
    let quantitative = if q == 0 {
        0.0
    } else {
        let squares: f64 = t1
            .quantitative
            .iter()
            .zip(&t2.quantitative)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        squares.sqrt() * (q as f64).sqrt()
    };
    (quantitative + categorical_sum(t1, t2)) / attribute_count as f64
}

#[inline]
fn discretized_unchecked(t1: &SemanticVector, t2: &SemanticVector, attribute_count: usize) -> f64 {
    if attribute_count == 0 {
        return 0.0;
    }
    let mismatches = t1
        .quantitative
        .iter()
        .zip(&t2.quantitative)
        .filter(|(a, b)| a != b)
        .count() as f64;
    (mismatches + categorical_sum(t1, t2)) / attribute_count as f64
}

fn check_conforming(t1: &SemanticVector, t2: &SemanticVector, schema: &AttributeSchema) -> Result<()> {
    if schema.conforms(t1) && schema.conforms(t2) {
        Ok(())
    } else {
        Err(Error::SchemaMismatch)
    }
}

/// `d_S`: Euclidean over quantitative attributes scaled by `√Q`, plus
/// per-attribute Jaccard over categorical ones, averaged over `A`.
pub fn semantic_distance(t1: &SemanticVector, t2: &SemanticVector, schema: &AttributeSchema) -> Result<f64> {
    check_conforming(t1, t2, schema)?;
    Ok(semantic_unchecked(t1, t2, schema.len()))
}

/// `d_S` with every quantitative attribute treated as a singleton label:
/// equal values contribute 0, anything else 1.
pub fn discretized_semantic_distance(
    t1: &SemanticVector,
    t2: &SemanticVector,
    schema: &AttributeSchema,
) -> Result<f64> {
    check_conforming(t1, t2, schema)?;
    Ok(discretized_unchecked(t1, t2, schema.len()))
}

/// Exact `d_T` over BFS neighborhoods.
pub fn topological_distance_exact(g: &AttributedGraph, v1: usize, v2: usize, l: usize) -> Result<f64> {
    let a = g.exact_l_neighborhood(v1, l)?;
    let b = g.exact_l_neighborhood(v2, l)?;
    Ok(jaccard_distance(&a, &b))
}

/// Sketch-estimated `d_T`.
pub fn topological_distance_sketch(table: &SketchTable, v1: usize, v2: usize, l: usize) -> Result<f64> {
    if table.l() != l {
        return Err(Error::SketchRadiusMismatch {
            built: table.l(),
            requested: l,
        });
    }
    let n = table.node_count();
    for v in [v1, v2] {
        if v >= n {
            return Err(Error::NodeOutOfRange { index: v, n });
        }
    }
    Ok(table.distance(v1, v2))
}

/// `d_ST = max(d_S, d_T)`.
#[inline]
pub fn combined_distance(ds: f64, dt: f64) -> f64 {
    ds.max(dt)
}

/// Upper bound on cached neighborhood entries kept by the exact backend.
const BALL_CACHE_BUDGET: usize = 1 << 25;

thread_local! {
    static BFS_SCRATCH: RefCell<(BallScratch, Vec<usize>)> = RefCell::new(Default::default());
}

/// Lazily computed exact `l`-neighborhoods, cached up to a memory budget.
#[derive(Debug)]
struct ExactBalls {
    l: usize,
    cache: Vec<OnceLock<Box<[u32]>>>,
    budget: AtomicUsize,
}

impl ExactBalls {
    fn new(n: usize, l: usize) -> Self {
        ExactBalls {
            l,
            cache: (0..n).map(|_| OnceLock::new()).collect(),
            budget: AtomicUsize::new(BALL_CACHE_BUDGET),
        }
    }

    fn compute(&self, g: &AttributedGraph, v: usize) -> Box<[u32]> {
        BFS_SCRATCH.with(|cell| {
            let (scratch, out) = &mut *cell.borrow_mut();
            g.ball_into(v, self.l, scratch, out);
            out.iter().map(|&u| u as u32).collect()
        })
    }

    fn with_ball<T>(&self, g: &AttributedGraph, v: usize, f: impl FnOnce(&[u32]) -> T) -> T {
        if let Some(ball) = self.cache[v].get() {
            return f(ball);
        }
        let ball = self.compute(g, v);
        let size = ball.len();
        let reserved = self
            .budget
            .fetch_update(Ordering::Relaxed, Ordering::Relaxed, |left| left.checked_sub(size))
            .is_ok();
        if reserved {
            if let Err(ball) = self.cache[v].set(ball) {
                // lost a race; give the budget back
                self.budget.fetch_add(size, Ordering::Relaxed);
                return f(&ball);
            }
            f(self.cache[v].get().expect("just set"))
        } else {
            f(&ball)
        }
    }

    fn distance(&self, g: &AttributedGraph, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        self.with_ball(g, a, |x| self.with_ball(g, b, |y| jaccard_distance(x, y)))
    }
}

#[derive(Debug)]
enum Topology<'a> {
    Exact(ExactBalls),
    Sketch(&'a SketchTable),
}

/// A configured pairwise distance over the nodes of one graph.
///
/// Safe to share across threads; the exact backend fills its neighborhood
/// cache lazily.
#[derive(Debug)]
pub struct Metric<'a> {
    graph: &'a AttributedGraph,
    config: DistanceConfig,
    topology: Topology<'a>,
}

impl<'a> Metric<'a> {
    /// `sketches` is required when the configuration asks for the sketch
    /// backend and uses topology; it must have been built for `config.l`.
    pub fn new(
        graph: &'a AttributedGraph,
        config: DistanceConfig,
        sketches: Option<&'a SketchTable>,
    ) -> Result<Self> {
        config.validate()?;
        let topology = match (config.backend, sketches) {
            (TopologicalBackend::Sketch, Some(table)) if config.mode.uses_topology() => {
                if table.l() != config.l {
                    return Err(Error::SketchRadiusMismatch {
                        built: table.l(),
                        requested: config.l,
                    });
                }
                if table.node_count() != graph.node_count() {
                    return Err(Error::InvalidParameter(
                        "sketch table does not match the graph".into(),
                    ));
                }
                Topology::Sketch(table)
            }
            (TopologicalBackend::Sketch, None) if config.mode.uses_topology() => {
                return Err(Error::MissingSketchTable)
            }
            _ => Topology::Exact(ExactBalls::new(graph.node_count(), config.l)),
        };
        Ok(Metric {
            graph,
            config,
            topology,
        })
    }

    pub fn exact(graph: &'a AttributedGraph, config: DistanceConfig) -> Result<Self> {
        Self::new(
            graph,
            DistanceConfig {
                backend: TopologicalBackend::Exact,
                ..config
            },
            None,
        )
    }

    pub fn graph(&self) -> &'a AttributedGraph {
        self.graph
    }

    pub fn config(&self) -> &DistanceConfig {
        &self.config
    }

    /// `d_S(a, b)`, discretized when so configured.
    #[inline]
    pub fn semantic(&self, a: usize, b: usize) -> f64 {
        let (t1, t2) = (self.graph.attributes(a), self.graph.attributes(b));
        let count = self.graph.schema().len();
        if self.config.discretize_quantitative {
            discretized_unchecked(t1, t2, count)
        } else {
            semantic_unchecked(t1, t2, count)
        }
    }

    /// `d_T(a, b)` with the configured backend.
    #[inline]
    pub fn topological(&self, a: usize, b: usize) -> f64 {
        match &self.topology {
            Topology::Exact(balls) => balls.distance(self.graph, a, b),
            Topology::Sketch(table) => table.distance(a, b),
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match self.config.mode {
            DistanceMode::Combined => combined_distance(self.semantic(a, b), self.topological(a, b)),
            DistanceMode::SemanticOnly => self.semantic(a, b),
            DistanceMode::TopologicalOnly => self.topological(a, b),
        }
    }

    /// `distance(a, b) <= tau`, skipping `d_T` when `d_S` already fails.
    #[inline]
    pub fn within(&self, a: usize, b: usize, tau: f64) -> bool {
        match self.config.mode {
            DistanceMode::Combined => self.semantic(a, b) <= tau && self.topological(a, b) <= tau,
            DistanceMode::SemanticOnly => self.semantic(a, b) <= tau,
            DistanceMode::TopologicalOnly => self.topological(a, b) <= tau,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{sample_graph, unlabeled};
    use crate::graph::{AttributeKind, GraphBuilder, RawValue};
    use crate::sketch::{choose_k, SketchTable};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identical_tuples_are_at_zero() {
        let g = sample_graph(false);
        let s = g.schema();
        for v in 0..8 {
            assert_eq!(semantic_distance(g.attributes(v), g.attributes(v), s).unwrap(), 0.0);
            assert_eq!(discretized_semantic_distance(g.attributes(v), g.attributes(v), s).unwrap(), 0.0);
        }
    }

    #[test]
    fn sample_graph_semantic_values() {
        let g = sample_graph(false);
        let s = g.schema();
        // v0 vs v3: sex differs, dx = 0.2, dy = 0.1
        let expected = ((0.05f64).sqrt() * 2f64.sqrt() + 1.0) / 3.0;
        let d = semantic_distance(g.attributes(0), g.attributes(3), s).unwrap();
        assert!(close(d, expected, 1e-12));
        assert!(close(d, 0.438743, 1e-6));
        // v0 vs v1: dy = 0.1 only
        let d01 = semantic_distance(g.attributes(0), g.attributes(1), s).unwrap();
        assert!(close(d01, 0.1 * 2f64.sqrt() / 3.0, 1e-12));
    }

    #[test]
    fn set_valued_jaccard() {
        let mut b = GraphBuilder::new(vec![(
            "sectors".into(),
            AttributeKind::CategoricalSet { delimiter: ';' },
        )]);
        b.add_node("a", vec![RawValue::Labels(vec!["IT".into(), "Bank".into()])]).unwrap();
        b.add_node("b", vec![RawValue::Labels(vec!["IT".into()])]).unwrap();
        b.add_node("c", vec![RawValue::Missing]).unwrap();
        b.add_node("d", vec![RawValue::Missing]).unwrap();
        let g = b.build().unwrap();
        let s = g.schema();
        assert_eq!(semantic_distance(g.attributes(0), g.attributes(1), s).unwrap(), 0.5);
        // both missing: no evidence of dissimilarity
        assert_eq!(semantic_distance(g.attributes(2), g.attributes(3), s).unwrap(), 0.0);
        assert_eq!(semantic_distance(g.attributes(0), g.attributes(2), s).unwrap(), 1.0);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let g = sample_graph(false);
        let other = SemanticVector::new(vec![0.1], vec![]);
        assert!(matches!(
            semantic_distance(g.attributes(0), &other, g.schema()),
            Err(Error::SchemaMismatch)
        ));
    }

    #[test]
    fn discretized_examples() {
        let mut b = GraphBuilder::new(vec![("q".into(), AttributeKind::Quantitative)]).normalize(false);
        b.add_node("a", vec![RawValue::Number(0.50)]).unwrap();
        b.add_node("b", vec![RawValue::Number(0.51)]).unwrap();
        let g = b.build().unwrap();
        assert_eq!(discretized_semantic_distance(g.attributes(0), g.attributes(1), g.schema()).unwrap(), 1.0);

        let fig = sample_graph(false);
        let d = discretized_semantic_distance(fig.attributes(0), fig.attributes(1), fig.schema()).unwrap();
        assert!(close(d, 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn sample_graph_topological_values() {
        let g = sample_graph(false);
        assert!(close(topological_distance_exact(&g, 0, 2, 1).unwrap(), 0.25, 1e-12));
        assert!(close(topological_distance_exact(&g, 0, 1, 1).unwrap(), 0.4, 1e-12));
        assert!(close(topological_distance_exact(&g, 0, 7, 1).unwrap(), 2.0 / 3.0, 1e-12));
        assert!(close(topological_distance_exact(&g, 0, 3, 1).unwrap(), 5.0 / 6.0, 1e-12));
        assert_eq!(topological_distance_exact(&g, 4, 4, 1).unwrap(), 0.0);
    }

    #[test]
    fn combined_is_max() {
        assert_eq!(combined_distance(0.3, 0.7), 0.7);
        assert_eq!(combined_distance(0.0, 0.0), 0.0);
        for x in [0.0, 0.12, 0.5, 1.0] {
            assert_eq!(combined_distance(x, x), x);
        }
    }

    #[test]
    fn sketch_backend_requires_matching_table() {
        let g = sample_graph(false);
        let table = SketchTable::build(&g, 2, 8, 1).unwrap();
        assert!(matches!(
            topological_distance_sketch(&table, 0, 1, 1),
            Err(Error::SketchRadiusMismatch { built: 2, requested: 1 })
        ));
        let mut cfg = DistanceConfig::new(1, DistanceMode::Combined);
        cfg.backend = TopologicalBackend::Sketch;
        assert!(matches!(Metric::new(&g, cfg, None), Err(Error::MissingSketchTable)));
        assert!(Metric::new(&g, cfg, Some(&table)).is_err());
        assert!(topological_distance_sketch(&table, 3, 3, 2).unwrap() == 0.0);
    }

    #[test]
    fn full_width_sketch_equals_exact() {
        let g = sample_graph(false);
        let table = SketchTable::build(&g, 1, 8, 77).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let exact = topological_distance_exact(&g, a, b, 1).unwrap();
                let est = topological_distance_sketch(&table, a, b, 1).unwrap();
                assert!(close(exact, est, 1e-12));
            }
        }
    }

    #[test]
    fn sketch_estimates_on_random_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 500;
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen::<f64>() < 0.02 {
                    edges.push((u, v));
                }
            }
        }
        let g = unlabeled(n, &edges);
        let k = choose_k(n, 0.3).unwrap();
        let table = SketchTable::build(&g, 2, k, 9).unwrap();
        let good = (0..100)
            .filter(|_| {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let exact = topological_distance_exact(&g, a, b, 2).unwrap();
                let est = topological_distance_sketch(&table, a, b, 2).unwrap();
                (exact - est).abs() <= 0.3
            })
            .count();
        assert!(good >= 90, "{good} of 100 within tolerance");
    }

    #[test]
    fn metric_modes() {
        let g = sample_graph(false);
        let combined = Metric::exact(&g, DistanceConfig::new(1, DistanceMode::Combined)).unwrap();
        let sem = Metric::exact(&g, DistanceConfig::new(1, DistanceMode::SemanticOnly)).unwrap();
        let top = Metric::exact(&g, DistanceConfig::new(1, DistanceMode::TopologicalOnly)).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let ds = sem.distance(a, b);
                let dt = top.distance(a, b);
                assert_eq!(combined.distance(a, b), ds.max(dt));
                for tau in [0.0, 0.3, 0.45, 0.7, 1.0] {
                    assert_eq!(combined.within(a, b, tau), combined.distance(a, b) <= tau);
                }
            }
        }
        assert!(DistanceConfig::new(0, DistanceMode::Combined).validate().is_err());
        assert!(DistanceConfig::new(0, DistanceMode::SemanticOnly).validate().is_ok());
    }

    fn vector_strategy() -> impl Strategy<Value = (SemanticVector, SemanticVector)> {
        let one = (
            proptest::collection::vec(0.0f64..=1.0, 2),
            proptest::collection::btree_set(0u32..6, 0..4),
            proptest::collection::btree_set(0u32..6, 0..4),
        )
            .prop_map(|(q, a, b)| {
                SemanticVector::new(q, vec![a.into_iter().collect(), b.into_iter().collect()])
            });
        (one.clone(), one)
    }

    fn schema_2q_2c() -> AttributeSchema {
        let mut b = GraphBuilder::new(vec![
            ("q1".into(), AttributeKind::Quantitative),
            ("q2".into(), AttributeKind::Quantitative),
            ("c1".into(), AttributeKind::Categorical),
            ("c2".into(), AttributeKind::Categorical),
        ]);
        b.add_node(
            "x",
            vec![RawValue::Number(0.0), RawValue::Number(0.0), RawValue::Missing, RawValue::Missing],
        )
        .unwrap();
        b.build().unwrap().schema().clone()
    }

    proptest! {
        #[test]
        fn semantic_is_symmetric_and_bounded((t1, t2) in vector_strategy()) {
            let s = schema_2q_2c();
            let d = semantic_distance(&t1, &t2, &s).unwrap();
            prop_assert_eq!(d, semantic_distance(&t2, &t1, &s).unwrap());
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
            let dd = discretized_semantic_distance(&t1, &t2, &s).unwrap();
            prop_assert_eq!(dd, discretized_semantic_distance(&t2, &t1, &s).unwrap());
            prop_assert!((0.0..=1.0).contains(&dd));
        }

        #[test]
        fn discretization_dominates(x in 0.0f64..=1.0, y in 0.0f64..=1.0, label in 0u32..3) {
            prop_assume!(x != y);
            let mut b = GraphBuilder::new(vec![
                ("q".into(), AttributeKind::Quantitative),
                ("c".into(), AttributeKind::Categorical),
            ]);
            b.add_node("a", vec![RawValue::Number(0.0), RawValue::Missing]).unwrap();
            let s = b.build().unwrap().schema().clone();
            let t1 = SemanticVector::new(vec![x], vec![vec![label]]);
            let t2 = SemanticVector::new(vec![y], vec![vec![label]]);
            prop_assert!(
                discretized_semantic_distance(&t1, &t2, &s).unwrap()
                    >= semantic_distance(&t1, &t2, &s).unwrap()
            );
        }

        #[test]
        fn topological_is_symmetric(seed in any::<u64>(), l in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 25;
            let edges: Vec<(usize, usize)> = (0..40).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
            let g = unlabeled(n, &edges);
            let table = SketchTable::build(&g, l, 8, seed).unwrap();
            for _ in 0..20 {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let e1 = topological_distance_exact(&g, a, b, l).unwrap();
                prop_assert_eq!(e1, topological_distance_exact(&g, b, a, l).unwrap());
                prop_assert!((0.0..=1.0).contains(&e1));
                let s1 = table.distance(a, b);
                prop_assert_eq!(s1, table.distance(b, a));
                prop_assert!((0.0..=1.0).contains(&s1));
            }
        }
    }
}
