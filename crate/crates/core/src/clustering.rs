//! Seed-anchored cluster extraction.
//!
//! [`sto_query`] grows a connected cluster from a seed by BFS over the active
//! nodes, admitting a neighbor only if its distance *to the seed* is within
//! `τ`. [`stoc`] repeats this from uniformly random active seeds, removing
//! each cluster from the view, until every node is assigned.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::{DistanceConfig, DistanceMode, Metric, TopologicalBackend};
use crate::error::{Error, Result};
use crate::graph::{ActiveView, AttributedGraph};
use crate::sketch::{choose_k, SketchTable};
use crate::tuning::{tune, TuneOptions, TuningReport, DEFAULT_L_MAX};

/// Which distance drives the clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Semantic and topological (`max` of both).
    Stoc,
    /// Semantic only.
    Sc,
    /// Topological only.
    Toc,
}

impl Variant {
    pub fn mode(self) -> DistanceMode {
        match self {
            Variant::Stoc => DistanceMode::Combined,
            Variant::Sc => DistanceMode::SemanticOnly,
            Variant::Toc => DistanceMode::TopologicalOnly,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Stoc => "stoc",
            Variant::Sc => "sc",
            Variant::Toc => "toc",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stoc" => Ok(Variant::Stoc),
            "sc" => Ok(Variant::Sc),
            "toc" => Ok(Variant::Toc),
            _ => Err(Error::InvalidParameter(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub id: usize,
    pub seed: usize,
    /// Members in admission order; the seed comes first.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringParams {
    pub tau: f64,
    pub l: usize,
    pub mode: DistanceMode,
    pub backend: TopologicalBackend,
    pub discretize_quantitative: bool,
    pub epsilon: Option<f64>,
    pub rng_seed: u64,
}

/// A partition of the nodes into clusters, ids dense in extraction order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub params: ClusteringParams,
    /// Total queue insertions over the run; equals `n` for a valid run.
    pub enqueued: usize,
}

impl Clustering {
    /// Number of clusters `k`.
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    /// Builds a clustering from a plain assignment (e.g. read back from a
    /// file). Ids are remapped to be dense in order of first appearance and
    /// each cluster's seed is taken to be its first member.
    pub fn from_assignment(assignment: &[usize], params: ClusteringParams) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut dense = Vec::with_capacity(assignment.len());
        for (v, &c) in assignment.iter().enumerate() {
            let id = *remap.entry(c).or_insert_with(|| {
                clusters.push(Cluster {
                    id: clusters.len(),
                    seed: v,
                    members: Vec::new(),
                });
                clusters.len() - 1
            });
            clusters[id].members.push(v);
            dense.push(id);
        }
        Clustering {
            assignment: dense,
            clusters,
            params,
            enqueued: assignment.len(),
        }
    }
}

/// Reusable per-run marks for [`sto_query`].
#[derive(Debug)]
pub struct QueryScratch {
    seen: Vec<u32>,
    epoch: u32,
    queue: std::collections::VecDeque<usize>,
}

impl QueryScratch {
    pub fn new(n: usize) -> Self {
        QueryScratch {
            seen: vec![0; n],
            epoch: 0,
            queue: Default::default(),
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

/// Extracts the connected `τ`-close cluster around `seed` from the active
/// part of the graph. Returns members in admission order, seed first.
///
/// A candidate whose distance to the seed exceeds `τ` is tested once per
/// query; the distance is anchored at the seed, so the verdict cannot change.
pub fn sto_query(
    view: &ActiveView,
    seed: usize,
    tau: f64,
    metric: &Metric<'_>,
    scratch: &mut QueryScratch,
) -> Result<Vec<usize>> {
    let g = metric.graph();
    if seed >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            index: seed,
            n: g.node_count(),
        });
    }
    if !view.is_active(seed) {
        return Err(Error::InactiveNode(seed));
    }
    if scratch.seen.len() < g.node_count() {
        scratch.seen.resize(g.node_count(), 0);
    }
    let stamp = scratch.next_epoch();
    let mut cluster = vec![seed];
    scratch.seen[seed] = stamp;
    scratch.queue.clear();
    scratch.queue.push_back(seed);
    while let Some(v) = scratch.queue.pop_front() {
        for &x in g.adjacency(v) {
            if scratch.seen[x] == stamp || !view.is_active(x) {
                continue;
            }
            scratch.seen[x] = stamp;
            if metric.within(seed, x, tau) {
                cluster.push(x);
                scratch.queue.push_back(x);
            }
        }
    }
    Ok(cluster)
}

/// Partitions the graph into connected `τ`-close clusters from uniformly
/// random seeds. Deterministic for a given `rng` state.
pub fn stoc<R: Rng + ?Sized>(metric: &Metric<'_>, tau: f64, rng: &mut R) -> Clustering {
    let g = metric.graph();
    let n = g.node_count();
    let mut view = ActiveView::new(n);
    let mut scratch = QueryScratch::new(n);
    let mut assignment = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    let mut enqueued = 0;
    while let Some(seed) = view.pick(rng) {
        let members = sto_query(&view, seed, tau, metric, &mut scratch).expect("seed is active");
        enqueued += members.len();
        let id = clusters.len();
        for &v in &members {
            view.deactivate(v);
            assignment[v] = id;
        }
        clusters.push(Cluster { id, seed, members });
    }
    let config = metric.config();
    Clustering {
        assignment,
        clusters,
        params: ClusteringParams {
            tau,
            l: config.l,
            mode: config.mode,
            backend: config.backend,
            discretize_quantitative: config.discretize_quantitative,
            epsilon: None,
            rng_seed: 0,
        },
        enqueued,
    }
}

/// Parameters of a full tune-then-cluster run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunOptions {
    pub variant: Variant,
    pub alpha_s: f64,
    pub alpha_t: f64,
    pub epsilon: f64,
    pub l_max: usize,
    pub discretize_quantitative: bool,
    /// `None` picks exact up to 10 000 nodes, sketches above.
    pub backend: Option<TopologicalBackend>,
    pub tau: Option<f64>,
    pub l: Option<usize>,
    pub rng_seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            variant: Variant::Stoc,
            alpha_s: 0.4,
            alpha_t: 0.4,
            epsilon: 0.9,
            l_max: DEFAULT_L_MAX,
            discretize_quantitative: false,
            backend: None,
            tau: None,
            l: None,
            rng_seed: 0,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("alpha_s", self.alpha_s), ("alpha_t", self.alpha_t)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {x}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be in (0, 1], got {}",
                self.epsilon
            )));
        }
        if self.l_max == 0 {
            return Err(Error::InvalidParameter("l_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_backend(&self, n: usize) -> TopologicalBackend {
        self.backend.unwrap_or_else(|| TopologicalBackend::auto(n))
    }

    /// Seed of the sketch permutation, derived from the run seed.
    pub fn hash_seed(&self) -> u64 {
        self.rng_seed ^ 0x5eed_5ca1_ab1e_0001
    }
}

/// Tuned parameters and prebuilt structures, reusable across clustering runs
/// with different seeds.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub tau: f64,
    pub config: DistanceConfig,
    pub report: TuningReport,
    pub sketches: Option<SketchTable>,
    pub epsilon: f64,
    pub tuning_time: Duration,
}

impl Prepared {
    pub fn metric<'a>(&'a self, g: &'a AttributedGraph) -> Result<Metric<'a>> {
        Metric::new(g, self.config, self.sketches.as_ref())
    }

    /// One clustering pass seeded with `rng_seed`.
    pub fn cluster(&self, g: &AttributedGraph, rng_seed: u64) -> Result<Clustering> {
        let metric = self.metric(g)?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut clustering = stoc(&metric, self.tau, &mut rng);
        clustering.params.epsilon = Some(self.epsilon);
        clustering.params.rng_seed = rng_seed;
        Ok(clustering)
    }
}

/// Tuning (unless overridden) and sketch construction for a variant.
pub fn prepare(g: &AttributedGraph, opts: &RunOptions) -> Result<Prepared> {
    opts.validate()?;
    let start = Instant::now();
    let n = g.node_count();
    let backend = opts.resolved_backend(n);
    let mode = opts.variant.mode();
    let k = choose_k(n.max(1), opts.epsilon)?;
    let tune_opts = TuneOptions {
        mode,
        alpha_s: if opts.variant == Variant::Toc { opts.alpha_t } else { opts.alpha_s },
        alpha_t: opts.alpha_t,
        epsilon: opts.epsilon,
        l_max: opts.l_max,
        discretize_quantitative: opts.discretize_quantitative,
        backend,
        k,
        hash_seed: opts.hash_seed(),
        tau: opts.tau,
        l: opts.l,
    };
    let (report, sketches) = if n < 2 && opts.tau.is_none() {
        // nothing to sample; any threshold yields the single cluster
        let report = TuningReport {
            tau_hat: 0.0,
            chosen_l: mode.uses_topology().then_some(opts.l.unwrap_or(1)),
            alpha_trace: Vec::new(),
            semantic_cdf: None,
            topological_cdfs: Vec::new(),
            tau_overridden: false,
            l_overridden: opts.l.is_some(),
        };
        let table = match backend {
            TopologicalBackend::Sketch if mode.uses_topology() => {
                Some(SketchTable::build(g, opts.l.unwrap_or(1), k, opts.hash_seed())?)
            }
            _ => None,
        };
        (report, table)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
        tune(g, &tune_opts, &mut rng)?
    };
    let config = DistanceConfig {
        l: report.chosen_l.unwrap_or(0),
        mode,
        discretize_quantitative: opts.discretize_quantitative,
        backend,
    };
    Ok(Prepared {
        tau: report.tau_hat,
        config,
        report,
        sketches,
        epsilon: opts.epsilon,
        tuning_time: start.elapsed(),
    })
}

/// Tunes for the variant, then runs one clustering pass.
pub fn run_variant(g: &AttributedGraph, opts: &RunOptions) -> Result<(Clustering, TuningReport)> {
    let prepared = prepare(g, opts)?;
    let clustering = prepared.cluster(g, opts.rng_seed)?;
    Ok((clustering, prepared.report))
}
