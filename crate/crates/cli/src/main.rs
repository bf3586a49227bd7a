use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pivotal_core::harness::{run_experiment_streaming, samples_to_target, SamplerKind};
use pivotal_core::matrix::{read_vector_csv, write_vector_csv};
use pivotal_core::verify::distribution_report;
use pivotal_core::{
    bernoulli_sample, build_partition, build_tree, enumerate_pivotal, leverage_scores, pivotal_sample,
    probability_ceiling, subsample_system, uniform_sample, weighted_least_squares, CompetitionTree,
    ContinuumSampler, DenseMatrix, ExperimentConfig, InclusionProbabilities, LeverageDensity,
    ProblemKind, RngState, SampleSet, SplitMethod,
};
use rand::Rng;
use serde_json::json;

const SCHEMA_VERSION: u32 = 1;

/// Pivotal leverage-score sampling for active linear regression.
#[derive(Debug, Parser)]
#[command(name = "pivotal", version)]
struct Cli {
    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leverage scores of a matrix CSV, or inclusion probabilities with --k.
    Levscores(LevscoresArgs),
    /// Competition tree over the uncertain rows of a coordinate CSV.
    Tree(TreeArgs),
    /// Draw a sample set.
    Sample(SampleArgs),
    /// Weighted least squares on a sampled subsystem.
    Fit(FitArgs),
    /// Exact distribution report for a small pivotal design.
    Verify(VerifyArgs),
    /// Sample-count sweep from a JSON config.
    Experiment(ExperimentArgs),
    /// One point per equal-mass cell of the polynomial leverage density.
    Continuum(ContinuumArgs),
}

#[derive(Debug, Args)]
struct LevscoresArgs {
    /// Matrix CSV, one row per line.
    #[arg(long = "in")]
    input: PathBuf,
    /// Apply the probability ceiling for a sample of this size.
    #[arg(long)]
    k: Option<usize>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Pca,
    Coordinate,
}

#[derive(Debug, Args)]
struct TreeArgs {
    /// Coordinates used for splitting, one row per point.
    #[arg(long)]
    x: PathBuf,
    /// Inclusion probabilities, one per line.
    #[arg(long)]
    probs: PathBuf,
    #[arg(long, value_enum, default_value = "pca")]
    method: Method,
    /// Output JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Design {
    Pivotal,
    Bernoulli,
    Uniform,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Inclusion probabilities, one per line.
    #[arg(long)]
    probs: PathBuf,
    /// Tree JSON; required for the pivotal design.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pivotal")]
    design: Design,
    #[arg(long)]
    seed: u64,
    /// Output CSV with `index,weight` rows (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Design matrix CSV.
    #[arg(long)]
    a: PathBuf,
    /// Targets, one per line.
    #[arg(long)]
    b: PathBuf,
    /// Sample CSV produced by `sample`.
    #[arg(long)]
    sample: PathBuf,
    /// Output coefficients CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TreeShape {
    Random,
    Balanced,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProbsKind {
    Equal,
    Random,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "balanced")]
    tree: TreeShape,
    #[arg(long, value_enum, default_value = "equal")]
    probs: ProbsKind,
    /// Largest conditioning set in the influence sweep (default: n).
    #[arg(long)]
    max_conditioning: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the configured samplers; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    sampler: Vec<SamplerKind>,
    /// Replaces the configured sweep; comma-separated.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Per-trial CSV.
    #[arg(long)]
    trials_out: Option<PathBuf>,
    /// Median-error summary CSV.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContinuumArgs {
    #[arg(long)]
    degree: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
    /// Points CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the cell boundaries here.
    #[arg(long)]
    partition_out: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_matrix(p: &Path) -> anyhow::Result<DenseMatrix> {
    DenseMatrix::read_csv(p).with_context(|| format!("reading {}", p.display()))
}

fn read_vector(p: &Path) -> anyhow::Result<Vec<f64>> {
    read_vector_csv(p).with_context(|| format!("reading {}", p.display()))
}

fn read_probs(p: &Path) -> anyhow::Result<InclusionProbabilities> {
    Ok(InclusionProbabilities::new(read_vector(p)?)?)
}

fn levscores(a: LevscoresArgs) -> anyhow::Result<()> {
    let m = read_matrix(&a.input)?;
    let lev = leverage_scores(&m)?;
    let values = match a.k {
        Some(k) => InclusionProbabilities::from_leverage(&lev, k)?.probs,
        None => lev.scores,
    };
    let mut w = sink(&a.out)?;
    write_vector_csv(&values, &mut w)?;
    w.flush()?;
    Ok(())
}

fn tree(a: TreeArgs) -> anyhow::Result<()> {
    let x = read_matrix(&a.x)?;
    let probs = read_probs(&a.probs)?;
    let method = match a.method {
        Method::Pca => SplitMethod::Pca,
        Method::Coordinate => SplitMethod::Coordinate,
    };
    let t = build_tree(&x, &probs, method)?;
    let mut w = sink(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &json!({"schema_version": SCHEMA_VERSION, "tree": t.to_json()}))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_tree(p: &Path) -> anyhow::Result<CompetitionTree> {
    let v: serde_json::Value = serde_json::from_reader(File::open(p).with_context(|| format!("reading {}", p.display()))?)?;
    let body = v.get("tree").unwrap_or(&v);
    Ok(CompetitionTree::from_json(body)?)
}

fn sample(a: SampleArgs) -> anyhow::Result<()> {
    let probs = read_probs(&a.probs)?;
    let rng = RngState::new(a.seed);
    let s = match a.design {
        Design::Pivotal => {
            let Some(path) = &a.tree else {
                bail!("--tree is required for the pivotal design");
            };
            pivotal_sample(&read_tree(path)?, &probs, &rng)?
        }
        Design::Bernoulli => bernoulli_sample(&probs, &rng),
        Design::Uniform => uniform_sample(probs.len(), probs.k, &rng)?,
    };
    let mut w = sink(&a.out)?;
    s.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let m = read_matrix(&a.a)?;
    let b = read_vector(&a.b)?;
    let s = SampleSet::from_csv_reader(File::open(&a.sample).with_context(|| format!("reading {}", a.sample.display()))?)?;
    let (sub_a, sub_b) = subsample_system(&m, &b, &s)?;
    let sol = weighted_least_squares(&sub_a, &sub_b)?;
    if sol.rank_deficient {
        eprintln!("warning: sampled system is rank deficient, returning the minimum-norm solution");
    }
    let mut w = sink(&a.out)?;
    write_vector_csv(&sol.coefficients, &mut w)?;
    w.flush()?;
    Ok(())
}

fn verify(a: VerifyArgs) -> anyhow::Result<()> {
    if a.k == 0 || a.k >= a.n {
        bail!("--k must satisfy 1 <= k < n");
    }
    let mut rng = RngState::new(a.seed).generator();
    let probs = match a.probs {
        ProbsKind::Equal => InclusionProbabilities::uniform(a.n, a.k)?,
        ProbsKind::Random => {
            let raw: Vec<f64> = (0..a.n).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let init: Vec<f64> = raw.iter().map(|r| r * a.k as f64 / total).collect();
            probability_ceiling(&init, a.k)?
        }
    };
    let leaves: Vec<usize> = probs.uncertain().collect();
    let t = match a.tree {
        TreeShape::Random => CompetitionTree::random(&leaves, &mut rng)?,
        TreeShape::Balanced => CompetitionTree::from_order(&leaves)?,
    };
    let dist = enumerate_pivotal(&t, &probs)?;
    let report = distribution_report(&dist, &probs.probs, a.max_conditioning.unwrap_or(a.n))?;
    let out = json!({
        "schema_version": report.schema_version,
        "n": a.n,
        "k": a.k,
        "seed": a.seed,
        "probs": probs.probs,
        "tree": t.to_json(),
        "outcomes": dist.outcomes.len(),
        "marginal_max_abs_err": report.marginal_max_abs_err,
        "homogeneous": report.homogeneous,
        "d_inf": report.d_inf,
        "negative_correlation_violations": report.negative_correlation_violations,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).context("parsing config")?;
    if let Some(p) = a.problem {
        cfg.problem = p;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(d) = a.degree {
        cfg.degree = d;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if !a.sampler.is_empty() {
        cfg.samplers = a.sampler;
    }
    if !a.k.is_empty() {
        cfg.k_values = a.k;
    }

    let mut trial_writer = match &a.trials_out {
        Some(p) => {
            let mut w = sink(&Some(p.clone()))?;
            writeln!(w, "sampler,k,trial,relative_error,labels_used")?;
            Some(w)
        }
        None => None,
    };
    let result = run_experiment_streaming(&cfg, |block| {
        if let Some(w) = trial_writer.as_mut() {
            for r in block {
                writeln!(w, "{},{},{},{:?},{}", r.sampler, r.k, r.trial, r.relative_error, r.labels_used)?;
            }
        }
        Ok(())
    })?;
    if let Some(mut w) = trial_writer {
        w.flush()?;
    }
    if let Some(p) = &a.summary_out {
        let mut w = sink(&Some(p.clone()))?;
        result.write_summary_csv(&mut w)?;
        w.flush()?;
    }

    let targets: Vec<_> = [2.0, 1.1]
        .iter()
        .map(|&m| {
            let t = samples_to_target(&result, m);
            json!({
                "multiple": t.multiple,
                "threshold": t.threshold,
                "samples": t.rows.iter().map(|(s, v)| (s.name().to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                "efficiency": t.efficiency,
            })
        })
        .collect();
    let out = json!({
        "schema_version": SCHEMA_VERSION,
        "problem": cfg.problem,
        "n": cfg.n,
        "degree": cfg.degree,
        "feature_count": result.feature_count,
        "opt_error": result.opt_error,
        "targets": targets,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn continuum(a: ContinuumArgs) -> anyhow::Result<()> {
    let density = LeverageDensity::new(a.degree, (a.lo, a.hi))?;
    let partition = build_partition(&density, a.k)?;
    if let Some(p) = &a.partition_out {
        let mut w = sink(&Some(p.clone()))?;
        partition.write_csv(&mut w)?;
        w.flush()?;
    }
    let points = ContinuumSampler::new(density, partition).sample(&RngState::new(a.seed));
    let mut w = sink(&a.out)?;
    write_vector_csv(&points, &mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Levscores(a) => levscores(a),
        Command::Tree(a) => tree(a),
        Command::Sample(a) => sample(a),
        Command::Fit(a) => fit(a),
        Command::Verify(a) => verify(a),
        Command::Experiment(a) => experiment(a),
        Command::Continuum(a) => continuum(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
