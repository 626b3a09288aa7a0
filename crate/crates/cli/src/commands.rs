use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use stoc::clustering::{prepare, ClusteringParams, Prepared};
use stoc::graph::{load_graph_files, LoadOptions};
use stoc::metrics::{modularity, size_distribution, wcss, SemanticEmbedding};
use stoc::synth::{generate as generate_planted, PlantedFiles, PlantedSpec};
use stoc::tuning::{sample_distance_cdf, TuningReport};
use stoc::{
    oracle, sketch, AttributedGraph, Clustering, DistanceConfig, DistanceMode, Metric, RunOptions, SketchTable,
    TopologicalBackend, Variant,
};

use crate::{
    BenchArgs, ClusterArgs, CliError, DistanceCdfArgs, DistanceKind, GenerateArgs, GraphArgs, MetricsArgs, TuneArgs,
    VariantArg,
};

type CliResult<T = ()> = Result<T, CliError>;

fn load(args: &GraphArgs) -> CliResult<AttributedGraph> {
    let options = LoadOptions {
        directed: false,
        normalize: !args.no_normalize,
    };
    Ok(load_graph_files(&args.edges, &args.attrs, &args.schema, options)?)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Peak resident set size in KiB, where the platform reports it.
fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Summary {
    mean: f64,
    stdev: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stdev = if values.len() > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, stdev })
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

pub fn generate(args: &GenerateArgs) -> CliResult {
    let mut spec = PlantedSpec::equal(args.communities, args.size, args.dims, args.p_in, args.p_out, args.noise, args.rng_seed);
    spec.spread = args.spread;
    let planted = generate_planted(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let files = PlantedFiles::in_dir(&args.out, &args.name);
    planted.write_files(&files)?;
    eprintln!(
        "wrote {} nodes, {} edges to {}",
        planted.graph.node_count(),
        planted.graph.edge_count(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TuneOutput<'a> {
    variant: Variant,
    mode: DistanceMode,
    backend: TopologicalBackend,
    tau: f64,
    l: Option<usize>,
    epsilon: f64,
    sketch_k: Option<usize>,
    tuning_seconds: f64,
    report: &'a TuningReport,
}

pub fn tune(args: &TuneArgs) -> CliResult {
    let g = load(&args.graph)?;
    let opts = args.tuning.run_options();
    let prepared = prepare(&g, &opts)?;
    let out = TuneOutput {
        variant: opts.variant,
        mode: prepared.config.mode,
        backend: prepared.config.backend,
        tau: prepared.tau,
        l: prepared.report.chosen_l,
        epsilon: prepared.epsilon,
        sketch_k: prepared.sketches.as_ref().map(SketchTable::k),
        tuning_seconds: prepared.tuning_time.as_secs_f64(),
        report: &prepared.report,
    };
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord {
    run: usize,
    rng_seed: u64,
    k: usize,
    modularity: Option<f64>,
    wcss: f64,
    seconds: f64,
    file: PathBuf,
}

#[derive(Serialize)]
struct RunSummary {
    k: Option<Summary>,
    modularity: Option<Summary>,
    wcss: Option<Summary>,
}

impl RunSummary {
    fn of(runs: &[RunRecord]) -> Self {
        let k: Vec<f64> = runs.iter().map(|r| r.k as f64).collect();
        let q: Vec<f64> = runs.iter().filter_map(|r| r.modularity).collect();
        let w: Vec<f64> = runs.iter().map(|r| r.wcss).collect();
        RunSummary {
            k: Summary::of(&k),
            modularity: Summary::of(&q),
            wcss: Summary::of(&w),
        }
    }
}

#[derive(Serialize)]
struct InputRecord<'a> {
    edges: &'a Path,
    attrs: &'a Path,
    schema: &'a Path,
    normalize: bool,
    nodes: usize,
    edge_count: usize,
    digest: String,
}

#[derive(Serialize)]
struct ClusterMetadata<'a> {
    input: InputRecord<'a>,
    options: RunOptions,
    mode: DistanceMode,
    backend: TopologicalBackend,
    tau: f64,
    l: Option<usize>,
    epsilon: f64,
    rng_seed: u64,
    hash_seed: u64,
    sketch_k: Option<usize>,
    tau_overridden: bool,
    l_overridden: bool,
    alpha_trace: &'a [(usize, f64)],
    k: usize,
    modularity: Option<f64>,
    wcss: f64,
    tuning_seconds: f64,
    wall_seconds: f64,
    peak_memory_kib: Option<u64>,
    runs: &'a [RunRecord],
    summary: RunSummary,
}

fn write_clustering(path: &Path, g: &AttributedGraph, c: &Clustering) -> CliResult {
    let mut w = BufWriter::new(File::create(path)?);
    for (v, cluster) in c.assignment.iter().enumerate() {
        writeln!(w, "{}\t{cluster}", g.label(v))?;
    }
    w.flush()?;
    Ok(())
}

fn score(g: &AttributedGraph, embedding: &SemanticEmbedding, c: &Clustering) -> CliResult<(Option<f64>, f64)> {
    let q = match modularity(g, c) {
        Ok(q) => Some(q),
        Err(stoc::Error::NoEdges) => None,
        Err(e) => return Err(e.into()),
    };
    Ok((q, wcss(c, embedding)?))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cluster(args: &ClusterArgs) -> CliResult {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let start = Instant::now();
    let g = load(&args.graph)?;
    let opts = args.tuning.run_options();
    let prepared = prepare(&g, &opts)?;
    let embedding = SemanticEmbedding::from_graph(&g);

    let mut runs = Vec::with_capacity(args.runs);
    for run in 0..args.runs {
        let rng_seed = opts.rng_seed.wrapping_add(run as u64);
        let t = Instant::now();
        let c = prepared.cluster(&g, rng_seed)?;
        let seconds = t.elapsed().as_secs_f64();
        let (q, w) = score(&g, &embedding, &c)?;
        let file = if args.runs == 1 {
            args.out.clone()
        } else {
            with_suffix(&args.out, &format!(".{run}"))
        };
        write_clustering(&file, &g, &c)?;
        runs.push(RunRecord {
            run,
            rng_seed,
            k: c.len(),
            modularity: q,
            wcss: w,
            seconds,
            file,
        });
    }

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "run\trng_seed\tk\tQ\tWCSS\tseconds")?;
    for r in &runs {
        writeln!(
            stdout,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            r.run,
            r.rng_seed,
            r.k,
            fmt_opt(r.modularity),
            r.wcss,
            r.seconds
        )?;
    }
    let summary = RunSummary::of(&runs);
    if args.runs > 1 {
        let pick = |f: fn(&Summary) -> f64| {
            [summary.k, summary.modularity, summary.wcss].map(|s| fmt_opt(s.as_ref().map(f)))
        };
        let [k, q, w] = pick(|s| s.mean);
        writeln!(stdout, "mean\t-\t{k}\t{q}\t{w}\t-")?;
        let [k, q, w] = pick(|s| s.stdev);
        writeln!(stdout, "stdev\t-\t{k}\t{q}\t{w}\t-")?;
    }
    stdout.flush()?;

    let first = &runs[0];
    let meta = ClusterMetadata {
        input: InputRecord {
            edges: &args.graph.edges,
            attrs: &args.graph.attrs,
            schema: &args.graph.schema,
            normalize: !args.graph.no_normalize,
            nodes: g.node_count(),
            edge_count: g.edge_count(),
            digest: hex(&g.digest()),
        },
        options: opts,
        mode: prepared.config.mode,
        backend: prepared.config.backend,
        tau: prepared.tau,
        l: prepared.report.chosen_l,
        epsilon: prepared.epsilon,
        rng_seed: opts.rng_seed,
        hash_seed: opts.hash_seed(),
        sketch_k: prepared.sketches.as_ref().map(SketchTable::k),
        tau_overridden: prepared.report.tau_overridden,
        l_overridden: prepared.report.l_overridden,
        alpha_trace: &prepared.report.alpha_trace,
        k: first.k,
        modularity: first.modularity,
        wcss: first.wcss,
        tuning_seconds: prepared.tuning_time.as_secs_f64(),
        wall_seconds: start.elapsed().as_secs_f64(),
        peak_memory_kib: peak_memory_kib(),
        runs: &runs,
        summary,
    };
    let mut w = BufWriter::new(File::create(with_suffix(&args.out, ".meta.json"))?);
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn placeholder_params() -> ClusteringParams {
    ClusteringParams {
        tau: f64::NAN,
        l: 0,
        mode: DistanceMode::Combined,
        backend: TopologicalBackend::Exact,
        discretize_quantitative: false,
        epsilon: None,
        rng_seed: 0,
    }
}

fn read_clustering(path: &Path, g: &AttributedGraph) -> CliResult<Clustering> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut assignment: Vec<Option<usize>> = vec![None; g.node_count()];
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(id), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CliError::Data(format!(
                "{} line {}: expected `<id> <cluster>`",
                path.display(),
                i + 1
            )));
        };
        let v = g
            .index_of(id)
            .ok_or_else(|| CliError::Data(format!("{} line {}: unknown node id `{id}`", path.display(), i + 1)))?;
        let next = labels.len();
        let c = *labels.entry(label.to_string()).or_insert(next);
        if assignment[v].replace(c).is_some() {
            return Err(CliError::Data(format!(
                "{} line {}: node `{id}` assigned twice",
                path.display(),
                i + 1
            )));
        }
    }
    let assignment = assignment
        .into_iter()
        .enumerate()
        .map(|(v, c)| c.ok_or_else(|| CliError::Data(format!("node `{}` has no cluster", g.label(v)))))
        .collect::<CliResult<Vec<usize>>>()?;
    Ok(Clustering::from_assignment(&assignment, placeholder_params()))
}

#[derive(Serialize)]
struct SizeRow {
    size: usize,
    count: usize,
}

#[derive(Serialize)]
struct MetricsOutput {
    nodes: usize,
    k: usize,
    modularity: Option<f64>,
    wcss: f64,
    size_distribution: Vec<SizeRow>,
}

pub fn metrics(args: &MetricsArgs) -> CliResult {
    let g = load(&args.graph)?;
    let c = read_clustering(&args.clustering, &g)?;
    let embedding = SemanticEmbedding::from_graph(&g);
    let (q, w) = score(&g, &embedding, &c)?;
    let out = MetricsOutput {
        nodes: g.node_count(),
        k: c.len(),
        modularity: q,
        wcss: w,
        size_distribution: size_distribution(&c)
            .into_iter()
            .map(|(size, count)| SizeRow { size, count })
            .collect(),
    };
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn distance_cdf(args: &DistanceCdfArgs) -> CliResult {
    let g = load(&args.graph)?;
    let n = g.node_count();
    let mode = match args.kind {
        DistanceKind::Semantic => DistanceMode::SemanticOnly,
        DistanceKind::Topological => DistanceMode::TopologicalOnly,
        DistanceKind::Combined => DistanceMode::Combined,
    };
    let backend = args.backend.map_or_else(|| TopologicalBackend::auto(n), Into::into);
    let config = DistanceConfig {
        l: args.l,
        mode,
        discretize_quantitative: args.discretize,
        backend,
    };
    config.validate()?;
    let hash_seed = RunOptions {
        rng_seed: args.rng_seed,
        ..RunOptions::default()
    }
    .hash_seed();
    let table = match backend {
        TopologicalBackend::Sketch if mode.uses_topology() && n > 0 => Some(SketchTable::build(
            &g,
            args.l,
            sketch::choose_k(n, args.epsilon)?,
            hash_seed,
        )?),
        _ => None,
    };
    let metric = Metric::new(&g, config, table.as_ref())?;
    let dist = |a: usize, b: usize| match args.kind {
        DistanceKind::Semantic => metric.semantic(a, b),
        DistanceKind::Topological => metric.topological(a, b),
        DistanceKind::Combined => metric.distance(a, b),
    };
    let cdf = if args.all_pairs {
        oracle::exact_pairwise_cdf(&g, dist, args.limit)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.rng_seed);
        sample_distance_cdf(n, dist, args.epsilon, &mut rng)?
    };
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "distance\tfraction")?;
    for (d, frac) in cdf.rows() {
        writeln!(w, "{d:.6}\t{frac:.6}")?;
    }
    w.flush()?;
    Ok(())
}

struct BenchRow {
    label: String,
    alpha: f64,
    tau: f64,
    l: Option<usize>,
    k: Summary,
    modularity: Option<Summary>,
    wcss: Summary,
    seconds: Summary,
}

type RunCell = (f64, Option<f64>, f64, f64);

fn bench_cell(g: &AttributedGraph, embedding: &SemanticEmbedding, prepared: &Prepared, seed: u64, runs: usize)
    -> CliResult<Vec<RunCell>> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let t = Instant::now();
            let c = prepared.cluster(g, seed.wrapping_add(i as u64))?;
            let seconds = t.elapsed().as_secs_f64();
            let (q, w) = score(g, embedding, &c)?;
            Ok((c.len() as f64, q, w, seconds))
        })
        .collect()
}

pub fn bench(args: &BenchArgs) -> CliResult {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    if args.alphas.is_empty() || args.variants.is_empty() {
        return Err(CliError::Usage("need at least one alpha and one variant".into()));
    }
    let g = load(&args.graph)?;
    let embedding = SemanticEmbedding::from_graph(&g);

    let mut configs: Vec<(String, Variant, bool)> = args
        .variants
        .iter()
        .map(|&v| (Variant::from(v).name().to_string(), Variant::from(v), false))
        .collect();
    if args.discretize {
        configs.push(("stoc-discretized".into(), VariantArg::Stoc.into(), true));
    }

    let mut rows = Vec::new();
    for (label, variant, discretize) in &configs {
        for &alpha in &args.alphas {
            let opts = RunOptions {
                variant: *variant,
                alpha_s: alpha,
                alpha_t: alpha,
                epsilon: args.epsilon,
                l_max: args.l_max,
                discretize_quantitative: *discretize,
                backend: args.backend.map(Into::into),
                tau: None,
                l: None,
                rng_seed: args.rng_seed,
            };
            let prepared = prepare(&g, &opts)?;
            let cells = bench_cell(&g, &embedding, &prepared, args.rng_seed, args.runs)?;
            let col = |f: fn(&RunCell) -> Option<f64>| -> Vec<f64> {
                cells.iter().filter_map(f).collect()
            };
            rows.push(BenchRow {
                label: label.clone(),
                alpha,
                tau: prepared.tau,
                l: prepared.report.chosen_l,
                k: Summary::of(&col(|c| Some(c.0))).expect("runs >= 1"),
                modularity: Summary::of(&col(|c| c.1)),
                wcss: Summary::of(&col(|c| Some(c.2))).expect("runs >= 1"),
                seconds: Summary::of(&col(|c| Some(c.3))).expect("runs >= 1"),
            });
        }
    }

    let mut w = output(args.out.as_deref())?;
    writeln!(
        w,
        "variant\talpha\ttau\tl\truns\tk_mean\tk_stdev\tQ_mean\tQ_stdev\tWCSS_mean\tWCSS_stdev\tseconds_mean"
    )?;
    for r in &rows {
        writeln!(
            w,
            "{}\t{}\t{:.6}\t{}\t{}\t{:.3}\t{:.3}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.label,
            r.alpha,
            r.tau,
            r.l.map_or_else(|| "-".to_string(), |l| l.to_string()),
            args.runs,
            r.k.mean,
            r.k.stdev,
            fmt_opt(r.modularity.map(|s| s.mean)),
            fmt_opt(r.modularity.map(|s| s.stdev)),
            r.wcss.mean,
            r.wcss.stdev,
            r.seconds.mean,
        )?;
    }
    w.flush()?;
    Ok(())
}
