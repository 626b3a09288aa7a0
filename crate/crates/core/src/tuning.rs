//! Auto-tuning of the distance threshold `τ` and the hop radius `l` from the
//! attraction ratios `α_S` and `α_T`.
//!
//! `τ̂` is the `α_S`-quantile of a sampled `d_S` distribution. `l` is then
//! grown from 1 while the sampled fraction `α_l = Pr(d_T ≤ τ̂)` keeps getting
//! closer to `α_T`.

use rand::Rng;
use serde::Serialize;

use crate::distance::{DistanceConfig, DistanceMode, Metric, TopologicalBackend};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::sketch::SketchTable;

pub const DEFAULT_L_MAX: usize = 10;

/// Sorted sample of pairwise distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        EmpiricalCdf { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Lower empirical quantile: the sample at index `⌈q·s⌉ − 1`, clamped.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if self.samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("quantile {q} outside [0, 1]")));
        }
        let s = self.samples.len();
        let idx = ((q * s as f64).ceil() as usize).saturating_sub(1).min(s - 1);
        Ok(self.samples[idx])
    }

    /// Fraction of samples `<= x`.
    pub fn fraction_at_most(&self, x: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.partition_point(|&d| d <= x) as f64 / self.samples.len() as f64
    }

    /// `(distance, cumulative fraction)` at every distinct sampled distance.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        let s = self.samples.len() as f64;
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for (i, &d) in self.samples.iter().enumerate() {
            let frac = (i + 1) as f64 / s;
            match rows.last_mut() {
                Some(last) if last.0 == d => last.1 = frac,
                _ => rows.push((d, frac)),
            }
        }
        rows
    }
}

/// `⌈2·ln n / ε²⌉` pairs.
pub fn sample_size(n: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be in (0, 1], got {epsilon}")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("sampling pairs needs at least two nodes".into()));
    }
    let raw = 2.0 * (n as f64).ln() / (epsilon * epsilon);
    Ok(((raw - 1e-9).ceil() as usize).max(1))
}

/// Uniform ordered pairs of distinct nodes, drawn with replacement.
pub fn sample_pairs<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<(usize, usize)> {
    assert!(n >= 2, "need two nodes to form a pair");
    (0..count)
        .map(|_| {
            let a = rng.gen_range(0..n);
            // shift past `a` to stay uniform over the other n - 1 nodes
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect()
}

/// Empirical distribution of `dist` over `⌈2·ln n / ε²⌉` random pairs.
pub fn sample_distance_cdf<F, R>(n: usize, dist: F, epsilon: f64, rng: &mut R) -> Result<EmpiricalCdf>
where
    F: Fn(usize, usize) -> f64,
    R: Rng + ?Sized,
{
    let s = sample_size(n, epsilon)?;
    let pairs = sample_pairs(n, s, rng);
    Ok(EmpiricalCdf::from_samples(pairs.into_iter().map(|(a, b)| dist(a, b)).collect()))
}

/// `τ̂`: the `α_S` lower quantile of the sampled distribution.
pub fn compute_tau(cdf: &EmpiricalCdf, alpha_s: f64) -> Result<f64> {
    check_ratio("alpha_s", alpha_s)?;
    cdf.quantile(alpha_s)
}

fn check_ratio(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {x}")))
    }
}

/// How `d_T` is evaluated while searching for `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchBackend {
    Exact,
    Sketch { k: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct LSearch {
    pub chosen_l: usize,
    /// `(l, α_l)` for every radius tried.
    pub trace: Vec<(usize, f64)>,
    pub cdfs: Vec<(usize, EmpiricalCdf)>,
    /// Sketch table at `chosen_l` when the sketch backend was used.
    pub table: Option<SketchTable>,
}

fn topological_cdf<R: Rng + ?Sized>(
    g: &AttributedGraph,
    l: usize,
    table: Option<&SketchTable>,
    epsilon: f64,
    rng: &mut R,
) -> Result<EmpiricalCdf> {
    let backend = if table.is_some() {
        TopologicalBackend::Sketch
    } else {
        TopologicalBackend::Exact
    };
    let config = DistanceConfig {
        l,
        mode: DistanceMode::TopologicalOnly,
        discretize_quantitative: false,
        backend,
    };
    let metric = Metric::new(g, config, table)?;
    sample_distance_cdf(g.node_count(), |a, b| metric.topological(a, b), epsilon, rng)
}

/// Picks `l` whose `α_l` is closest to `α_T`, growing `l` from 1 until the
/// distance to `α_T` gets worse or `l_max` is reached.
pub fn compute_l<R: Rng + ?Sized>(
    g: &AttributedGraph,
    tau_hat: f64,
    alpha_t: f64,
    epsilon: f64,
    l_max: usize,
    backend: SearchBackend,
    rng: &mut R,
) -> Result<LSearch> {
    check_ratio("alpha_t", alpha_t)?;
    if l_max == 0 {
        return Err(Error::InvalidParameter("l_max must be at least 1".into()));
    }
    let mut table = match backend {
        SearchBackend::Exact => None,
        SearchBackend::Sketch { k, seed } => Some(SketchTable::build(g, 1, k, seed)?),
    };
    let mut trace = Vec::new();
    let mut cdfs = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut best_table = None;
    let mut previous_gap: Option<f64> = None;
    for l in 1..=l_max {
        if l > 1 {
            table = table.map(|t| t.extend(g));
        }
        let cdf = topological_cdf(g, l, table.as_ref(), epsilon, rng)?;
        let alpha_l = cdf.fraction_at_most(tau_hat);
        let gap = (alpha_l - alpha_t).abs();
        trace.push((l, alpha_l));
        cdfs.push((l, cdf));
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((l, gap));
            best_table = table.clone();
        }
        if previous_gap.is_some_and(|p| gap > p) || gap == 0.0 {
            break;
        }
        previous_gap = Some(gap);
    }
    let (chosen_l, _) = best.expect("loop runs at least once");
    Ok(LSearch {
        chosen_l,
        trace,
        cdfs,
        table: best_table,
    })
}

/// Everything the tuning phase decided, plus the samples it looked at.
#[derive(Debug, Clone, Serialize)]
pub struct TuningReport {
    pub tau_hat: f64,
    /// `None` for the semantic-only variant.
    pub chosen_l: Option<usize>,
    pub alpha_trace: Vec<(usize, f64)>,
    pub semantic_cdf: Option<EmpiricalCdf>,
    pub topological_cdfs: Vec<(usize, EmpiricalCdf)>,
    pub tau_overridden: bool,
    pub l_overridden: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct TuneOptions {
    pub mode: DistanceMode,
    pub alpha_s: f64,
    pub alpha_t: f64,
    pub epsilon: f64,
    pub l_max: usize,
    pub discretize_quantitative: bool,
    pub backend: TopologicalBackend,
    /// Sketch size; only read for the sketch backend.
    pub k: usize,
    pub hash_seed: u64,
    pub tau: Option<f64>,
    pub l: Option<usize>,
}

/// Runs the tuning phase for one distance mode.
///
/// * combined: `τ̂` from `d_S` at `α_S`, then the `l` search against `α_T`;
/// * semantic-only: `τ̂` from `d_S`, no `l`;
/// * topological-only: `τ̂` from `d_T` at `l = 1` and quantile `α_T`, then
///   the `l` search.
///
/// Explicit `tau` / `l` skip the corresponding step. Returns the sketch table
/// for the chosen `l` when the sketch backend is configured.
pub fn tune<R: Rng + ?Sized>(
    g: &AttributedGraph,
    opts: &TuneOptions,
    rng: &mut R,
) -> Result<(TuningReport, Option<SketchTable>)> {
    check_ratio("alpha_s", opts.alpha_s)?;
    check_ratio("alpha_t", opts.alpha_t)?;
    if let Some(tau) = opts.tau {
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::InvalidParameter(format!("tau must be non-negative, got {tau}")));
        }
    }
    if opts.l == Some(0) && opts.mode.uses_topology() {
        return Err(Error::InvalidParameter("l must be at least 1".into()));
    }
    let search_backend = match opts.backend {
        TopologicalBackend::Exact => SearchBackend::Exact,
        TopologicalBackend::Sketch => SearchBackend::Sketch {
            k: opts.k,
            seed: opts.hash_seed,
        },
    };
    let build_table = |l: usize| -> Result<Option<SketchTable>> {
        match search_backend {
            SearchBackend::Exact => Ok(None),
            SearchBackend::Sketch { k, seed } => Ok(Some(SketchTable::build(g, l, k, seed)?)),
        }
    };

    let mut report = TuningReport {
        tau_hat: 0.0,
        chosen_l: None,
        alpha_trace: Vec::new(),
        semantic_cdf: None,
        topological_cdfs: Vec::new(),
        tau_overridden: opts.tau.is_some(),
        l_overridden: opts.l.is_some(),
    };

    // τ̂
    let mut table: Option<SketchTable> = None;
    report.tau_hat = match (opts.tau, opts.mode) {
        (Some(tau), _) => tau,
        (None, DistanceMode::TopologicalOnly) => {
            let l0 = opts.l.unwrap_or(1);
            table = build_table(l0)?;
            let cdf = topological_cdf(g, l0, table.as_ref(), opts.epsilon, rng)?;
            let tau = compute_tau(&cdf, opts.alpha_t)?;
            report.topological_cdfs.push((l0, cdf));
            tau
        }
        (None, _) => {
            let config = DistanceConfig {
                l: 1,
                mode: DistanceMode::SemanticOnly,
                discretize_quantitative: opts.discretize_quantitative,
                backend: TopologicalBackend::Exact,
            };
            let metric = Metric::exact(g, config)?;
            let cdf = sample_distance_cdf(g.node_count(), |a, b| metric.semantic(a, b), opts.epsilon, rng)?;
            let tau = compute_tau(&cdf, opts.alpha_s)?;
            report.semantic_cdf = Some(cdf);
            tau
        }
    };

    // l
    if !opts.mode.uses_topology() {
        report.chosen_l = opts.l;
        return Ok((report, None));
    }
    match opts.l {
        Some(l) => {
            report.chosen_l = Some(l);
            if table.as_ref().map(SketchTable::l) != Some(l) {
                table = build_table(l)?;
            }
        }
        None => {
            let search = compute_l(g, report.tau_hat, opts.alpha_t, opts.epsilon, opts.l_max, search_backend, rng)?;
            report.chosen_l = Some(search.chosen_l);
            report.alpha_trace = search.trace;
            // keep the l = 1 sample the ToC threshold came from
            report.topological_cdfs.extend(search.cdfs);
            table = search.table;
        }
    }
    Ok((report, table))
}
