//! Test targets whose labels come from numerical ODE/PDE solves.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use dashmap::DashMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::ode::{dopri45, rk4, Step};
use crate::rng::RngState;

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Damped driven oscillator over stiffness `k` and frequency `ω`.
    Oscillator2d,
    /// Damped driven oscillator over `k`, forcing amplitude `f` and `ω`.
    Oscillator3d,
    /// Heat equation over time `t` and initial frequency `ω`.
    Heat,
    /// Surface reaction coverage over two Gaussian coordinates.
    SurfaceReaction,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::Oscillator2d,
        ProblemKind::Oscillator3d,
        ProblemKind::Heat,
        ProblemKind::SurfaceReaction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Oscillator2d => "oscillator2d",
            ProblemKind::Oscillator3d => "oscillator3d",
            ProblemKind::Heat => "heat",
            ProblemKind::SurfaceReaction => "surface_reaction",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::BadInput(format!("unknown problem '{s}'")))
    }
}

/// A target function together with its input domain and constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProblem {
    pub kind: ProblemKind,
    /// Per-coordinate bounds; `None` for the unbounded Gaussian inputs.
    pub domain: Option<Vec<(f64, f64)>>,
    pub fixed_params: BTreeMap<String, f64>,
}

impl TargetProblem {
    pub fn new(kind: ProblemKind) -> Self {
        let (domain, params): (Option<Vec<(f64, f64)>>, &[(&str, f64)]) = match kind {
            ProblemKind::Oscillator2d => (
                Some(vec![(1.0, 3.0), (0.0, 2.0)]),
                &[("c", 0.5), ("f", 0.5), ("horizon", 20.0), ("tol", 1e-8)],
            ),
            ProblemKind::Oscillator3d => (
                Some(vec![(1.0, 3.0), (0.0, 2.0), (0.0, 2.0)]),
                &[("c", 0.5), ("horizon", 20.0), ("tol", 1e-8)],
            ),
            ProblemKind::Heat => (Some(vec![(0.0, 3.0), (0.0, 5.0)]), &[("nodes", 201.0)]),
            ProblemKind::SurfaceReaction => (
                None,
                &[("kappa", 10.0), ("horizon", 4.0), ("sigma", 7.5), ("steps", 4000.0)],
            ),
        };
        Self {
            kind,
            domain,
            fixed_params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Same problem with one constant replaced.
    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.fixed_params.insert(name.to_string(), value);
        self
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ProblemKind::Oscillator3d => 3,
            _ => 2,
        }
    }

    fn param(&self, name: &str) -> Result<f64> {
        self.fixed_params
            .get(name)
            .copied()
            .ok_or_else(|| Error::BadInput(format!("{} is missing parameter '{name}'", self.kind)))
    }
}

impl FromStr for TargetProblem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(Self::new(s.parse()?))
    }
}

/// Quantity of interest at one raw input point.
pub fn evaluate_target(p: &TargetProblem, point: &[f64]) -> Result<f64> {
    if point.len() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} expects {} coordinates, got {}",
            p.kind,
            p.dim(),
            point.len()
        )));
    }
    if let Some(v) = point.iter().find(|v| !v.is_finite()) {
        return Err(Error::OutOfDomain(*v));
    }
    if let Some(dom) = &p.domain {
        for (&v, &(lo, hi)) in point.iter().zip(dom) {
            let slack = 1e-12 * (hi - lo);
            if v < lo - slack || v > hi + slack {
                return Err(Error::OutOfDomain(v));
            }
        }
    }
    match p.kind {
        ProblemKind::Oscillator2d => oscillator_peak(
            point[0],
            p.param("c")?,
            p.param("f")?,
            point[1],
            p.param("horizon")?,
            p.param("tol")?,
        ),
        ProblemKind::Oscillator3d => oscillator_peak(
            point[0],
            p.param("c")?,
            point[1],
            point[2],
            p.param("horizon")?,
            p.param("tol")?,
        ),
        ProblemKind::Heat => heat_peak(point[0], point[1], p.param("nodes")? as usize),
        ProblemKind::SurfaceReaction => surface_coverage(
            point[0],
            point[1],
            p.param("kappa")?,
            p.param("horizon")?,
            p.param("steps")? as usize,
        ),
    }
}

/// `max |x(t)|` over `[0, horizon]` for `x'' + c x' + k x = f cos(ωt)` from rest.
pub fn oscillator_peak(k: f64, c: f64, f: f64, omega: f64, horizon: f64, tol: f64) -> Result<f64> {
    let mut peak = 0.0f64;
    let rhs = |t: f64, y: &[f64; 2]| [y[1], f * (omega * t).cos() - c * y[1] - k * y[0]];
    dopri45(rhs, 0.0, [0.0, 0.0], horizon, tol, tol, |s| {
        peak = peak.max(step_peak(s));
    })?;
    Ok(peak)
}

/// Largest `|x|` on one step from endpoints, ten interior samples and any
/// stationary point of the interpolant.
fn step_peak(s: &Step<2>) -> f64 {
    const SAMPLES: usize = 10;
    let mut best = s.y0[0].abs().max(s.y1[0].abs());
    let mut prev_th = 0.0;
    let mut prev_v = s.hermite_slope(0, 0.0);
    for j in 1..=SAMPLES + 1 {
        let th = j as f64 / (SAMPLES + 1) as f64;
        best = best.max(s.hermite(0, th).abs());
        let v = s.hermite_slope(0, th);
        if prev_v == 0.0 || prev_v.signum() != v.signum() {
            let (mut a, mut b) = (prev_th, th);
            let sa = prev_v.signum();
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if s.hermite_slope(0, m).signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            best = best.max(s.hermite(0, 0.5 * (a + b)).abs());
        }
        prev_th = th;
        prev_v = v;
    }
    best
}

/// `max_x f(x, t)` for `π f_t = f_xx` on `[0, 1]` with `f(0, t) = 0`,
/// `f(x, 0) = sin(ωπx)` and `∂f(1, t)/∂t = −π e^{−t}`.
///
/// Second-order differences on `nodes` points in space. The interior
/// system is linear with constant coefficients, so it is advanced exactly
/// in time through its sine eigenbasis.
pub fn heat_peak(t: f64, omega: f64, nodes: usize) -> Result<f64> {
    let profile = heat_profile(t, omega, nodes)?;
    Ok(refined_max(&profile))
}

/// Grid values `f(x_i, t)`, `x_i = i/(nodes − 1)`.
pub fn heat_profile(t: f64, omega: f64, nodes: usize) -> Result<Vec<f64>> {
    if nodes < 3 {
        return Err(Error::BadInput("heat solver needs at least 3 nodes".into()));
    }
    let n = nodes - 1;
    let h = 1.0 / n as f64;
    let right = |s: f64| (omega * PI).sin() + PI * ((-s).exp() - 1.0);
    let base = (omega * PI).sin() - PI;
    let scale = 1.0 / (PI * h * h);
    // sine table: sin(m i π / n)
    let sines: Vec<f64> = (0..2 * n).map(|j| (j as f64 * PI / n as f64).sin()).collect();
    let s = |m: usize, i: usize| sines[(m * i) % (2 * n)];

    let initial: Vec<f64> = (0..nodes).map(|i| (omega * PI * i as f64 * h).sin()).collect();
    let mut profile = vec![0.0; nodes];
    for m in 1..n {
        let lambda = -4.0 * scale * (m as f64 * PI / (2 * n) as f64).sin().powi(2);
        let a0: f64 = (1..n)
            .map(|i| initial[i] * s(m, i))
            .sum::<f64>()
            * 2.0
            / n as f64;
        let g = scale * s(m, n - 1) * 2.0 / n as f64;
        let decay = (lambda * t).exp();
        let constant_part = (lambda * t).exp_m1() / lambda;
        let transient = if (lambda + 1.0).abs() < 1e-12 {
            t * (-t).exp()
        } else {
            (decay - (-t).exp()) / (lambda + 1.0)
        };
        let am = decay * a0 + g * (base * constant_part + PI * transient);
        for i in 1..n {
            profile[i] += am * s(m, i);
        }
    }
    profile[n] = right(t);
    Ok(profile)
}

/// Grid maximum sharpened by a parabola through its neighbours.
fn refined_max(v: &[f64]) -> f64 {
    let (i, &m) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty profile");
    if i == 0 || i + 1 == v.len() {
        return m;
    }
    let (l, r) = (v[i - 1], v[i + 1]);
    let curv = l - 2.0 * m + r;
    if curv >= 0.0 {
        return m;
    }
    m - (r - l).powi(2) / (8.0 * curv)
}

/// Coverage `ρ(horizon)` for `ρ' = α(1−ρ) − γρ − κ(1−ρ)²ρ`, `ρ(0) = 0.9`.
pub fn surface_coverage(x: f64, y: f64, kappa: f64, horizon: f64, steps: usize) -> Result<f64> {
    let alpha = 0.1 + (0.05 * x).exp();
    let gamma = 0.001 + 0.01 * (0.05 * y).exp();
    let rhs = |_: f64, r: &[f64; 1]| {
        let rho = r[0];
        [alpha * (1.0 - rho) - gamma * rho - kappa * (1.0 - rho).powi(2) * rho]
    };
    Ok(rk4(rhs, 0.0, [0.9], horizon, steps.max(1))?[0])
}

/// Raw inputs: uniform on the box, or iid `N(0, σ²)` for unbounded problems.
pub fn sample_domain(p: &TargetProblem, n: usize, rng: &RngState) -> Result<DenseMatrix> {
    if n == 0 {
        return Err(Error::BadInput("need at least one point".into()));
    }
    let mut gen = rng.generator();
    let d = p.dim();
    let data: Vec<f64> = match &p.domain {
        Some(dom) => (0..n * d)
            .map(|i| {
                let (lo, hi) = dom[i % d];
                lo + (hi - lo) * gen.random::<f64>()
            })
            .collect(),
        None => {
            let normal = Normal::new(0.0, p.param("sigma")?)
                .map_err(|e| Error::BadInput(e.to_string()))?;
            (0..n * d).map(|_| normal.sample(&mut gen)).collect()
        }
    };
    DenseMatrix::new(n, d, data)
}

/// Tensor grid with `points_per_axis` equispaced points per coordinate,
/// last coordinate fastest.
pub fn grid_domain(p: &TargetProblem, points_per_axis: usize) -> Result<DenseMatrix> {
    let dom = p
        .domain
        .as_ref()
        .ok_or_else(|| Error::BadInput(format!("{} has no bounded domain", p.kind)))?;
    if points_per_axis < 2 {
        return Err(Error::BadInput("grid needs at least 2 points per axis".into()));
    }
    let m = points_per_axis;
    let d = dom.len();
    DenseMatrix::from_fn(m.pow(d as u32), d, |r, c| {
        let stride = m.pow((d - 1 - c) as u32);
        let j = (r / stride) % m;
        let (lo, hi) = dom[c];
        lo + (hi - lo) * j as f64 / (m - 1) as f64
    })
}

/// Where an oracle's labels come from.
#[derive(Debug, Clone)]
pub enum LabelSource {
    /// Solve the target problem at each point.
    Solver(TargetProblem),
    /// Look labels up in a precomputed table, one per point.
    Table(Vec<f64>),
}

/// Labels on demand for a fixed pool of raw points, with caching and a
/// count of label lookups.
#[derive(Debug)]
pub struct LabelOracle {
    source: LabelSource,
    points: DenseMatrix,
    cache: DashMap<usize, f64>,
    evaluations: AtomicUsize,
}

impl LabelOracle {
    pub fn new(problem: TargetProblem, points: DenseMatrix) -> Result<Self> {
        if points.cols() != problem.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} coordinates, pool has {}",
                problem.kind,
                problem.dim(),
                points.cols()
            )));
        }
        Ok(Self::with_source(LabelSource::Solver(problem), points))
    }

    /// Oracle over labels computed earlier, e.g. read back from CSV.
    pub fn from_values(points: DenseMatrix, values: Vec<f64>) -> Result<Self> {
        if values.len() != points.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} points",
                values.len(),
                points.rows()
            )));
        }
        Ok(Self::with_source(LabelSource::Table(values), points))
    }

    fn with_source(source: LabelSource, points: DenseMatrix) -> Self {
        Self {
            source,
            points,
            cache: DashMap::new(),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn source(&self) -> &LabelSource {
        &self.source
    }

    pub fn points(&self) -> &DenseMatrix {
        &self.points
    }

    pub fn label(&self, i: usize) -> Result<f64> {
        if i >= self.points.rows() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.points.rows(),
            });
        }
        if let Some(v) = self.cache.get(&i) {
            return Ok(*v);
        }
        let v = match &self.source {
            LabelSource::Solver(p) => evaluate_target(p, self.points.row(i))?,
            LabelSource::Table(values) => values[i],
        };
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.cache.insert(i, v);
        Ok(v)
    }

    /// Labels for `indices`, evaluated in parallel.
    pub fn labels(&self, indices: &[usize]) -> Result<Vec<f64>> {
        indices.par_iter().map(|&i| self.label(i)).collect()
    }

    pub fn all_labels(&self) -> Result<Vec<f64>> {
        self.labels(&(0..self.points.rows()).collect::<Vec<_>>())
    }

    /// Number of labels computed or looked up so far (cache hits excluded).
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Number of distinct points labelled so far.
    pub fn labelled(&self) -> usize {
        self.cache.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Closed-form response of the underdamped oscillator from rest.
    fn exact_peak(k: f64, c: f64, f: f64, w: f64, horizon: f64) -> f64 {
        let den = (k - w * w).powi(2) + (c * w).powi(2);
        let (a, b) = (f * (k - w * w) / den, f * c * w / den);
        let mu = (k - c * c / 4.0).sqrt();
        let c1 = -a;
        let c2 = (c / 2.0 * c1 - b * w) / mu;
        let x = |t: f64| {
            (-c * t / 2.0).exp() * (c1 * (mu * t).cos() + c2 * (mu * t).sin())
                + a * (w * t).cos()
                + b * (w * t).sin()
        };
        let n = 2_000_000;
        let h = horizon / n as f64;
        let (mut best, mut at) = (0.0f64, 0.0);
        for i in 0..=n {
            let v = x(h * i as f64).abs();
            if v > best {
                best = v;
                at = h * i as f64;
            }
        }
        // golden-section polish around the grid maximum
        let (mut lo, mut hi) = ((at - h).max(0.0), (at + h).min(horizon));
        for _ in 0..80 {
            let m1 = lo + 0.382 * (hi - lo);
            let m2 = hi - 0.382 * (hi - lo);
            if x(m1).abs() < x(m2).abs() {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best.max(x(0.5 * (lo + hi)).abs())
    }

    #[test]
    fn oscillator_matches_closed_form() {
        for (k, w) in [(2.0, 1.0), (1.0, 1.0), (3.0, 0.0), (1.5, 1.9), (2.7, 0.3)] {
            let got = evaluate_target(&TargetProblem::new(ProblemKind::Oscillator2d), &[k, w]).unwrap();
            let want = exact_peak(k, 0.5, 0.5, w, 20.0);
            assert!((got - want).abs() <= 1e-5 * want, "k={k} w={w}: {got} vs {want}");
        }
    }

    #[test]
    fn oscillator_tolerance_halving_is_consistent() {
        let p = TargetProblem::new(ProblemKind::Oscillator2d);
        let coarse = evaluate_target(&p, &[2.0, 1.0]).unwrap();
        let fine = evaluate_target(&p.with_param("tol", 5e-9), &[2.0, 1.0]).unwrap();
        assert!((coarse - fine).abs() <= 1e-5 * fine);
    }

    #[test]
    fn unforced_oscillator_stays_at_rest() {
        let p = TargetProblem::new(ProblemKind::Oscillator3d);
        assert_eq!(evaluate_target(&p, &[2.0, 0.0, 1.3]).unwrap(), 0.0);
    }

    #[test]
    fn evaluation_is_bitwise_repeatable() {
        for kind in ProblemKind::ALL {
            let p = TargetProblem::new(kind);
            let pt = vec![1.5; p.dim()];
            assert_eq!(
                evaluate_target(&p, &pt).unwrap().to_bits(),
                evaluate_target(&p, &pt).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn domain_checks() {
        let p = TargetProblem::new(ProblemKind::Oscillator2d);
        assert!(matches!(evaluate_target(&p, &[0.5, 1.0]), Err(Error::OutOfDomain(_))));
        assert!(matches!(evaluate_target(&p, &[2.0]), Err(Error::DimensionMismatch(_))));
        let s = TargetProblem::new(ProblemKind::SurfaceReaction);
        assert!(evaluate_target(&s, &[-40.0, 55.0]).is_ok());
    }

    #[test]
    fn linear_surface_reaction_matches_closed_form() {
        let p = TargetProblem::new(ProblemKind::SurfaceReaction).with_param("kappa", 0.0);
        for (x, y) in [(0.0f64, 0.0f64), (-10.0, 7.0), (12.0, -3.0)] {
            let a: f64 = 0.1 + (0.05 * x).exp();
            let g: f64 = 0.001 + 0.01 * (0.05 * y).exp();
            let inf = a / (a + g);
            let want = inf + (0.9 - inf) * (-(a + g) * 4.0).exp();
            assert_abs_diff_eq!(evaluate_target(&p, &[x, y]).unwrap(), want, epsilon = 1e-6);
        }
    }

    #[test]
    fn heat_initial_profile() {
        // at t = 0 the profile is the initial condition sampled on the grid
        for w in [0.5, 1.0, 2.3, 4.7] {
            let prof = heat_profile(0.0, w, 201).unwrap();
            for (i, v) in prof.iter().enumerate() {
                assert_abs_diff_eq!(*v, (w * PI * i as f64 / 200.0).sin(), epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(heat_peak(0.0, 1.0, 201).unwrap(), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(heat_peak(0.0, 0.5, 201).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn heat_right_boundary_follows_flux() {
        let t = 1.7;
        let prof = heat_profile(t, 2.2, 201).unwrap();
        let want = (2.2 * PI).sin() + PI * ((-t).exp() - 1.0);
        assert_abs_diff_eq!(prof[200], want, epsilon = 1e-14);
        assert_eq!(prof[0], 0.0);
    }

    #[test]
    fn heat_matches_time_stepping() {
        // independent check: the same semi-discrete system advanced by RK4
        let (t_end, w, nodes) = (0.05, 2.5, 41);
        let n = nodes - 1;
        let h = 1.0 / n as f64;
        let mut f: Vec<f64> = (0..nodes).map(|i| (w * PI * i as f64 * h).sin()).collect();
        let steps = 20_000;
        let dt = t_end / steps as f64;
        let deriv = |f: &[f64]| -> Vec<f64> {
            let mut d = vec![0.0; nodes];
            for i in 1..n {
                d[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) / (h * h * PI);
            }
            d
        };
        for s in 0..steps {
            let t = s as f64 * dt;
            let bc = |t: f64| (w * PI).sin() + PI * ((-t).exp() - 1.0);
            let stage = |f: &[f64], d: &[f64], c: f64, tt: f64| -> Vec<f64> {
                let mut g: Vec<f64> = f.iter().zip(d).map(|(a, b)| a + c * dt * b).collect();
                g[n] = bc(tt);
                g
            };
            let k1 = deriv(&f);
            let k2 = deriv(&stage(&f, &k1, 0.5, t + 0.5 * dt));
            let k3 = deriv(&stage(&f, &k2, 0.5, t + 0.5 * dt));
            let k4 = deriv(&stage(&f, &k3, 1.0, t + dt));
            for i in 1..n {
                f[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            f[n] = bc(t + dt);
        }
        let exact = heat_profile(t_end, w, nodes).unwrap();
        for (a, b) in exact.iter().zip(&f) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn heat_spatial_refinement() {
        for (t, w) in [(0.05, 1.0), (0.2, 2.5), (0.5, 0.5), (0.1, 4.5), (0.02, 3.3)] {
            let a = heat_peak(t, w, 201).unwrap();
            let b = heat_peak(t, w, 401).unwrap();
            assert!((a - b).abs() <= 1e-3 * b.abs(), "t={t} w={w}: {a} vs {b}");
        }
    }

    #[test]
    fn sampling_and_grid() {
        let p = TargetProblem::new(ProblemKind::Heat);
        let x = sample_domain(&p, 500, &RngState::new(1)).unwrap();
        for i in 0..500 {
            assert!((0.0..=3.0).contains(&x.get(i, 0)) && (0.0..=5.0).contains(&x.get(i, 1)));
        }
        let g = grid_domain(&TargetProblem::new(ProblemKind::Oscillator3d), 51).unwrap();
        assert_eq!(g.rows(), 51usize.pow(3));
        assert_eq!(g.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(g.row(g.rows() - 1), &[3.0, 2.0, 2.0]);
        let s = TargetProblem::new(ProblemKind::SurfaceReaction);
        let n = 20_000;
        let x = sample_domain(&s, n, &RngState::new(5)).unwrap();
        for c in 0..2 {
            let mean = x.column(c).iter().sum::<f64>() / n as f64;
            assert!(mean.abs() <= 3.0 * 7.5 / (n as f64).sqrt(), "{mean}");
        }
    }

    #[test]
    fn oracle_counts_and_caches() {
        let p = TargetProblem::new(ProblemKind::SurfaceReaction);
        let x = sample_domain(&p, 20, &RngState::new(0)).unwrap();
        let o = LabelOracle::new(p, x).unwrap();
        let a = o.labels(&[3, 4, 3]).unwrap();
        assert_eq!(a[0], a[2]);
        assert!(o.evaluations() <= 3 && o.labelled() == 2);
        let before = o.evaluations();
        o.label(4).unwrap();
        assert_eq!(o.evaluations(), before);
        assert!(matches!(o.label(99), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn table_oracle_counts_lookups() {
        let x = DenseMatrix::new(3, 2, vec![0.0; 6]).unwrap();
        let o = LabelOracle::from_values(x.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(o.labels(&[2, 0]).unwrap(), vec![3.0, 1.0]);
        assert_eq!(o.evaluations(), 2);
        assert!(LabelOracle::from_values(x, vec![1.0]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("pendulum".parse::<ProblemKind>().is_err());
    }
}
