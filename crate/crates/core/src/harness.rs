//! Experiment runner: sample-size sweeps over repeated trials for each
//! sampler, scored against the full-data least-squares optimum.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::features::{chebyshev_grid, expand, BoxScaling, PolynomialBasisSpec};
use crate::leverage::{leverage_scores, InclusionProbabilities, LeverageScores};
use crate::matrix::{dot, weighted_least_squares, DenseMatrix};
use crate::problems::{evaluate_target, grid_domain, sample_domain, LabelOracle, ProblemKind, TargetProblem};
use crate::rng::RngState;
use crate::sampler::{bernoulli_sample, pivotal_sample, subsample_system, uniform_sample, SampleSet};
use crate::tree::{build_tree, CompetitionTree, SplitMethod};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
/// Absolute error threshold used when the optimum is (numerically) zero.
pub const ZERO_OPT_THRESHOLD: f64 = 1e-10;
const ZERO_OPT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    PivotalPca,
    PivotalCoordinate,
    Bernoulli,
    Uniform,
    ChebyshevGrid,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 5] = [
        SamplerKind::PivotalPca,
        SamplerKind::PivotalCoordinate,
        SamplerKind::Bernoulli,
        SamplerKind::Uniform,
        SamplerKind::ChebyshevGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::PivotalPca => "pivotal_pca",
            SamplerKind::PivotalCoordinate => "pivotal_coordinate",
            SamplerKind::Bernoulli => "bernoulli",
            SamplerKind::Uniform => "uniform",
            SamplerKind::ChebyshevGrid => "chebyshev_grid",
        }
    }

    fn code(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::BadInput(format!("unknown sampler '{s}'")))
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<SamplerKind>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(SamplerKind),
        Many(Vec<SamplerKind>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

/// One sweep over sample sizes for one or more samplers on shared data.
///
/// Raw inputs are always mapped affinely onto `[−1, 1]` per coordinate
/// before the polynomial expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub problem: ProblemKind,
    /// Overrides of the problem's constants.
    #[serde(default)]
    pub fixed_params: BTreeMap<String, f64>,
    pub n: usize,
    pub degree: usize,
    #[serde(alias = "sampler", deserialize_with = "one_or_many")]
    pub samplers: Vec<SamplerKind>,
    /// Empty means the default geometric sweep.
    #[serde(default)]
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Use the tensor grid with `round(n^(1/dim))` points per axis
    /// instead of random points.
    #[serde(default)]
    pub grid: bool,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind, n: usize, degree: usize, samplers: Vec<SamplerKind>, trials: usize, seed: u64) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            problem,
            fixed_params: BTreeMap::new(),
            n,
            degree,
            samplers,
            k_values: Vec::new(),
            trials,
            seed,
            grid: false,
        }
    }

    pub fn target(&self) -> TargetProblem {
        let mut p = TargetProblem::new(self.problem);
        for (k, v) in &self.fixed_params {
            p.fixed_params.insert(k.clone(), *v);
        }
        p
    }
}

/// Sample sizes from `lo` growing by a factor 1.15 while at most `hi`.
pub fn default_k_sweep(lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = lo.max(1);
    while k <= hi {
        out.push(k);
        k = (k + 1).max((k as f64 * 1.15).ceil() as usize);
    }
    out
}

/// Design matrix, labels and optimum shared by every trial.
#[derive(Debug)]
pub struct PreparedData {
    pub problem: TargetProblem,
    pub basis: PolynomialBasisSpec,
    pub raw: DenseMatrix,
    pub scaling: BoxScaling,
    pub design: DenseMatrix,
    pub labels: Vec<f64>,
    pub leverage: LeverageScores,
    pub opt_error: f64,
    pub oracle: LabelOracle,
}

impl PreparedData {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let problem = cfg.target();
        let raw = if cfg.grid {
            let per_axis = (cfg.n as f64).powf(1.0 / problem.dim() as f64).round() as usize;
            grid_domain(&problem, per_axis)?
        } else {
            sample_domain(&problem, cfg.n, &RngState::new(cfg.seed))?
        };
        let oracle = LabelOracle::new(problem.clone(), raw.clone())?;
        let labels = oracle.all_labels()?;
        Self::from_parts(problem, raw, labels, cfg.degree, oracle)
    }

    /// Prepared data for given raw points and labels.
    pub fn from_parts(
        problem: TargetProblem,
        raw: DenseMatrix,
        labels: Vec<f64>,
        degree: usize,
        oracle: LabelOracle,
    ) -> Result<Self> {
        let scaling = match &problem.domain {
            Some(dom) => BoxScaling::new(dom.iter().map(|b| b.0).collect(), dom.iter().map(|b| b.1).collect())?,
            None => BoxScaling::from_data(&raw)?,
        };
        let basis = PolynomialBasisSpec::new(raw.cols(), degree)?;
        let design = expand(&scaling.apply(&raw)?, &basis)?;
        let leverage = leverage_scores(&design)?;
        let opt = weighted_least_squares(&design, &labels)?;
        let opt_error = opt.residual_norm_sq / dot(&labels, &labels);
        Ok(Self {
            problem,
            basis,
            raw,
            scaling,
            design,
            labels,
            leverage,
            opt_error,
            oracle,
        })
    }

    pub fn n(&self) -> usize {
        self.raw.rows()
    }

    pub fn feature_count(&self) -> usize {
        self.basis.term_count()
    }

    /// `‖A x − b‖² / ‖b‖²` on the full pool.
    pub fn relative_error(&self, coef: &[f64]) -> Result<f64> {
        let fit = self.design.matvec(coef)?;
        let res: f64 = fit.iter().zip(&self.labels).map(|(f, y)| (f - y).powi(2)).sum();
        Ok(res / dot(&self.labels, &self.labels))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sampler: SamplerKind,
    pub k: usize,
    pub trial: usize,
    pub relative_error: f64,
    /// Distinct labels the trial observed.
    pub labels_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub sampler: SamplerKind,
    pub k: usize,
    pub median_error: f64,
    pub opt_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub opt_error: f64,
    pub feature_count: usize,
    pub trials: Vec<TrialRecord>,
    pub summary: Vec<SummaryRecord>,
}

impl ExperimentResult {
    /// `(k, median)` pairs of one sampler in sweep order.
    pub fn curve(&self, sampler: SamplerKind) -> Vec<(usize, f64)> {
        self.summary
            .iter()
            .filter(|r| r.sampler == sampler)
            .map(|r| (r.k, r.median_error))
            .collect()
    }

    pub fn write_trials_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sampler", "k", "trial", "relative_error", "labels_used"])?;
        for r in &self.trials {
            out.write_record([
                r.sampler.name(),
                &r.k.to_string(),
                &r.trial.to_string(),
                &format!("{:?}", r.relative_error),
                &r.labels_used.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sampler", "k", "median_error", "opt_error"])?;
        for r in &self.summary {
            out.write_record([
                r.sampler.name(),
                &r.k.to_string(),
                &format!("{:?}", r.median_error),
                &format!("{:?}", r.opt_error),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs the configured sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_streaming(cfg, |_| Ok(()))
}

/// Like [`run_experiment`], handing each block of finished trials to
/// `sink` as soon as it completes.
pub fn run_experiment_streaming(
    cfg: &ExperimentConfig,
    sink: impl FnMut(&[TrialRecord]) -> Result<()>,
) -> Result<ExperimentResult> {
    validate(cfg)?;
    let data = PreparedData::build(cfg)?;
    run_on_data(&data, cfg, sink)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.trials == 0 {
        return Err(Error::BadInput("trials must be at least 1".into()));
    }
    if cfg.samplers.is_empty() {
        return Err(Error::BadInput("no samplers configured".into()));
    }
    if cfg.schema_version != CONFIG_SCHEMA_VERSION {
        return Err(Error::BadInput(format!("unsupported schema_version {}", cfg.schema_version)));
    }
    Ok(())
}

/// Sweep over prepared data; `cfg.problem`, `n` and `degree` are ignored.
pub fn run_on_data(
    data: &PreparedData,
    cfg: &ExperimentConfig,
    mut sink: impl FnMut(&[TrialRecord]) -> Result<()>,
) -> Result<ExperimentResult> {
    validate(cfg)?;
    let n = data.n();
    let d = data.feature_count();
    let ks = if cfg.k_values.is_empty() {
        default_k_sweep(d, n / 10)
    } else {
        cfg.k_values.clone()
    };
    if ks.is_empty() {
        return Err(Error::BadInput(format!("empty k sweep for {d} features and n = {n}")));
    }
    for &k in &ks {
        if k > n {
            return Err(Error::InfeasibleK { k, n });
        }
        if k < d {
            return Err(Error::BadInput(format!("k = {k} is below the feature count {d}")));
        }
    }

    let mut trials = Vec::new();
    let mut summary = Vec::new();
    for &sampler in &cfg.samplers {
        for (ki, &k) in ks.iter().enumerate() {
            let block = run_block(data, sampler, k, cfg, ki)?;
            sink(&block)?;
            let errs: Vec<f64> = block.iter().map(|r| r.relative_error).collect();
            summary.push(SummaryRecord {
                sampler,
                k,
                median_error: median(&errs),
                opt_error: data.opt_error,
            });
            trials.extend(block);
        }
    }
    Ok(ExperimentResult {
        opt_error: data.opt_error,
        feature_count: d,
        trials,
        summary,
    })
}

/// RNG stream of one trial; stream 0 is reserved for data generation.
pub fn trial_stream(sampler: SamplerKind, k_index: usize, trial: usize) -> u64 {
    (sampler.code() << 56) | ((k_index as u64) << 32) | trial as u64
}

fn run_block(
    data: &PreparedData,
    sampler: SamplerKind,
    k: usize,
    cfg: &ExperimentConfig,
    ki: usize,
) -> Result<Vec<TrialRecord>> {
    if sampler == SamplerKind::ChebyshevGrid {
        return Ok(vec![chebyshev_trial(data, k)?]);
    }
    let probs = InclusionProbabilities::from_leverage(&data.leverage, k)?;
    let all_certain = probs.uncertain().next().is_none();
    let tree = match sampler {
        _ if all_certain => None,
        SamplerKind::PivotalPca => Some(tree_for(data, &probs, SplitMethod::Pca)?),
        SamplerKind::PivotalCoordinate => Some(tree_for(data, &probs, SplitMethod::Coordinate)?),
        _ => None,
    };
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let rng = RngState::new(cfg.seed).with_stream(trial_stream(sampler, ki, trial));
            let s = match sampler {
                SamplerKind::Bernoulli => bernoulli_sample(&probs, &rng),
                SamplerKind::Uniform => uniform_sample(data.n(), k, &rng)?,
                _ => match &tree {
                    Some(t) => pivotal_sample(t, &probs, &rng)?,
                    None => SampleSet::from_indices(probs.certain().collect(), &probs.probs, k),
                },
            };
            let relative_error = fit_and_score(data, &s)?;
            Ok(TrialRecord {
                sampler,
                k,
                trial,
                relative_error,
                labels_used: s.len(),
            })
        })
        .collect()
}

/// Competition tree over the raw coordinates of the uncertain rows.
pub fn tree_for(data: &PreparedData, probs: &InclusionProbabilities, method: SplitMethod) -> Result<CompetitionTree> {
    build_tree(&data.raw, probs, method)
}

/// Weighted least squares on the sampled rows, scored on the full pool.
pub fn fit_and_score(data: &PreparedData, s: &SampleSet) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let observed = data.oracle.labels(&s.indices)?;
    let mut b = vec![0.0; data.n()];
    for (&i, v) in s.indices.iter().zip(observed) {
        b[i] = v;
    }
    let (a_sub, b_sub) = subsample_system(&data.design, &b, s)?;
    let sol = weighted_least_squares(&a_sub, &b_sub)?;
    data.relative_error(&sol.coefficients)
}

fn chebyshev_trial(data: &PreparedData, k: usize) -> Result<TrialRecord> {
    let q = data.raw.cols();
    let per_axis = ((k as f64).powf(1.0 / q as f64) + 1e-9).floor().max(1.0) as usize;
    let grid = chebyshev_grid(per_axis, q)?;
    let lo = &data.scaling.lo;
    let hi = &data.scaling.hi;
    let raw = DenseMatrix::from_fn(grid.rows(), q, |i, j| lo[j] + 0.5 * (grid.get(i, j) + 1.0) * (hi[j] - lo[j]))?;
    let labels = (0..raw.rows())
        .into_par_iter()
        .map(|i| evaluate_target(&data.problem, raw.row(i)))
        .collect::<Result<Vec<f64>>>()?;
    let design = expand(&grid, &data.basis)?;
    let sol = weighted_least_squares(&design, &labels)?;
    Ok(TrialRecord {
        sampler: SamplerKind::ChebyshevGrid,
        k,
        trial: 0,
        relative_error: data.relative_error(&sol.coefficients)?,
        labels_used: grid.rows(),
    })
}

/// Sample size needed to reach a target error, per sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTable {
    pub multiple: f64,
    pub threshold: f64,
    /// `None` where the sweep never reaches the threshold.
    pub rows: Vec<(SamplerKind, Option<f64>)>,
    /// Pivotal (PCA tree) over Bernoulli samples, when both are reached.
    pub efficiency: Option<f64>,
}

/// Error threshold for `multiple × OPT`, falling back to an absolute
/// threshold when the optimum is zero.
pub fn target_threshold(opt_error: f64, multiple: f64) -> f64 {
    if opt_error > ZERO_OPT {
        multiple * opt_error
    } else {
        ZERO_OPT_THRESHOLD
    }
}

/// Smallest `k` whose median error is at most `threshold`, interpolating
/// linearly between sweep points.
pub fn crossing(curve: &[(usize, f64)], threshold: f64) -> Result<f64> {
    let pos = curve
        .iter()
        .position(|&(_, m)| m <= threshold)
        .ok_or(Error::TargetNotReached)?;
    if pos == 0 {
        return Ok(curve[0].0 as f64);
    }
    let (k0, m0) = (curve[pos - 1].0 as f64, curve[pos - 1].1);
    let (k1, m1) = (curve[pos].0 as f64, curve[pos].1);
    if m0 == m1 {
        return Ok(k1);
    }
    Ok(k0 + (m0 - threshold) / (m0 - m1) * (k1 - k0))
}

pub fn samples_to_target(result: &ExperimentResult, multiple: f64) -> TargetTable {
    let threshold = if multiple.is_infinite() {
        f64::INFINITY
    } else {
        target_threshold(result.opt_error, multiple)
    };
    let mut samplers: Vec<SamplerKind> = result.summary.iter().map(|r| r.sampler).collect();
    samplers.dedup();
    let rows: Vec<(SamplerKind, Option<f64>)> = samplers
        .into_iter()
        .map(|s| (s, crossing(&result.curve(s), threshold).ok()))
        .collect();
    let find = |k: SamplerKind| rows.iter().find(|r| r.0 == k).and_then(|r| r.1);
    let efficiency = match (find(SamplerKind::PivotalPca), find(SamplerKind::Bernoulli)) {
        (Some(p), Some(b)) if b > 0.0 => Some(p / b),
        _ => None,
    };
    TargetTable {
        multiple,
        threshold,
        rows,
        efficiency,
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64 + 1.0;
            for &t in &idx[i..=j] {
                r[t] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
