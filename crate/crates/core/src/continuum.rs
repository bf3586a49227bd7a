//! Pivotal sampling in the infinite-point limit for polynomial regression
//! on an interval.
//!
//! With `k` samples the interval splits into `k` cells of equal leverage
//! mass; one point is drawn from each cell with density proportional to
//! `τ(t) = Σ_{i≤d} L_i(t)²`.

use std::io::Write;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::legendre_normalized;
use crate::matrix::{weighted_least_squares, DenseMatrix};
use crate::quad::{integrate, GaussRule};
use crate::rng::RngState;

const QUAD_TOL: f64 = 1e-10;
const CDF_GRID: usize = 512;

/// Leverage density of degree-`d` polynomials on `domain`, pulled back to [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeverageDensity {
    pub degree: usize,
    pub domain: (f64, f64),
}

impl LeverageDensity {
    pub fn new(degree: usize, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::BadInput(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { degree, domain })
    }

    /// Density on the canonical interval [−1, 1].
    pub fn unit(degree: usize) -> Self {
        Self {
            degree,
            domain: (-1.0, 1.0),
        }
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain;
        2.0 * (x - lo) / (hi - lo) - 1.0
    }

    pub fn from_unit(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain;
        lo + 0.5 * (t + 1.0) * (hi - lo)
    }

    /// Normalized density `w = τ / (d + 1)`.
    pub fn w(&self, t: f64) -> Result<f64> {
        Ok(tau(self, t)? / (self.degree + 1) as f64)
    }
}

/// `τ(t) = Σ_{i=0}^{d} L_i(t)²` for `t` in [−1, 1].
pub fn tau(density: &LeverageDensity, t: f64) -> Result<f64> {
    Ok(legendre_normalized(t, density.degree)?.iter().map(|v| v * v).sum())
}

fn tau_unchecked(degree: usize, t: f64) -> f64 {
    legendre_normalized(t.clamp(-1.0, 1.0), degree)
        .expect("clamped")
        .iter()
        .map(|v| v * v)
        .sum()
}

/// Cell boundaries `−1 = b_0 < … < b_k = 1` of equal leverage mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPartition {
    pub boundaries: Vec<f64>,
}

impl IntervalPartition {
    pub fn k(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    /// CSV with a `cell,lo,hi` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell,lo,hi")?;
        for i in 0..self.k() {
            let (a, b) = self.cell(i);
            writeln!(w, "{i},{a:?},{b:?}")?;
        }
        Ok(())
    }
}

/// Equal-mass partition: `∫_{I_i} k·w = 1` for every cell.
pub fn build_partition(density: &LeverageDensity, k: usize) -> Result<IntervalPartition> {
    if k == 0 {
        return Err(Error::BadInput("partition needs k ≥ 1".into()));
    }
    let d = density.degree;
    let scale = k as f64 / (d + 1) as f64;
    let mass = |a: f64, b: f64| -> Result<f64> {
        Ok(scale * integrate(|t| tau_unchecked(d, t), a, b, QUAD_TOL)?)
    };
    let mut boundaries = Vec::with_capacity(k + 1);
    boundaries.push(-1.0);
    let mut lo = -1.0;
    for i in 1..k {
        let target = i as f64;
        let (mut a, mut b) = (lo, 1.0);
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            if mass(-1.0, mid)? < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let cut = 0.5 * (a + b);
        boundaries.push(cut);
        lo = cut;
    }
    boundaries.push(1.0);
    Ok(IntervalPartition { boundaries })
}

/// Precomputed per-cell inverse CDF tables for repeated draws.
#[derive(Debug, Clone)]
pub struct ContinuumSampler {
    density: LeverageDensity,
    partition: IntervalPartition,
    /// Cumulative `τ` mass at each grid point, one table per cell.
    cdf: Vec<Vec<f64>>,
}

impl ContinuumSampler {
    pub fn new(density: LeverageDensity, partition: IntervalPartition) -> Self {
        // τ is a polynomial of degree 2d, so d + 1 nodes per segment are exact
        let rule = GaussRule::new(density.degree + 1);
        let f = |t: f64| tau_unchecked(density.degree, t);
        let cdf = (0..partition.k())
            .map(|c| {
                let (a, b) = partition.cell(c);
                let h = (b - a) / (CDF_GRID - 1) as f64;
                let mut acc = 0.0;
                let mut table = Vec::with_capacity(CDF_GRID);
                table.push(0.0);
                for j in 1..CDF_GRID {
                    let x0 = a + h * (j - 1) as f64;
                    acc += rule.integrate(&f, x0, x0 + h);
                    table.push(acc);
                }
                table
            })
            .collect();
        Self {
            density,
            partition,
            cdf,
        }
    }

    pub fn density(&self) -> &LeverageDensity {
        &self.density
    }

    pub fn partition(&self) -> &IntervalPartition {
        &self.partition
    }

    /// One point per cell in [−1, 1], ascending.
    pub fn sample(&self, rng: &RngState) -> Vec<f64> {
        let mut gen = rng.generator();
        self.cdf
            .iter()
            .enumerate()
            .map(|(c, table)| {
                let (a, b) = self.partition.cell(c);
                let u: f64 = gen.sample(Open01);
                let target = u * table[CDF_GRID - 1];
                let j = table.partition_point(|&v| v < target).clamp(1, CDF_GRID - 1);
                let (f0, f1) = (table[j - 1], table[j]);
                let frac = if f1 > f0 { (target - f0) / (f1 - f0) } else { 0.5 };
                let h = (b - a) / (CDF_GRID - 1) as f64;
                (a + h * ((j - 1) as f64 + frac)).clamp(a, b)
            })
            .collect()
    }
}

/// One draw from each cell of `partition`.
pub fn sample_continuum(
    density: &LeverageDensity,
    partition: &IntervalPartition,
    rng: &RngState,
) -> Vec<f64> {
    ContinuumSampler::new(*density, partition.clone()).sample(rng)
}

fn legendre_series(coeffs: &[f64], t: f64) -> Result<f64> {
    let l = legendre_normalized(t, coeffs.len().saturating_sub(1))?;
    Ok(l.iter().zip(coeffs).map(|(a, b)| a * b).sum())
}

/// Relative error of `Σ ω_i p(t_i)²` as an estimate of `∫₋₁¹ p²`, with `p`
/// given in the normalized Legendre basis.
pub fn weighted_embedding_error(points: &[f64], weights: &[f64], poly_coeffs: &[f64]) -> Result<f64> {
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let norm: f64 = poly_coeffs.iter().map(|c| c * c).sum();
    if norm == 0.0 {
        return Err(Error::ZeroPolynomial);
    }
    let mut est = 0.0;
    for (&t, &w) in points.iter().zip(weights) {
        est += w * legendre_series(poly_coeffs, t)?.powi(2);
    }
    Ok((norm - est).abs() / norm)
}

/// `|∫p² − (1/k) Σ p(t_i)² / w(t_i)| / ∫p²`.
pub fn embedding_error(density: &LeverageDensity, points: &[f64], poly_coeffs: &[f64]) -> Result<f64> {
    let weights = reweighting(density, points)?;
    weighted_embedding_error(points, &weights, poly_coeffs)
}

fn reweighting(density: &LeverageDensity, points: &[f64]) -> Result<Vec<f64>> {
    let k = points.len() as f64;
    points.iter().map(|&t| Ok(1.0 / (k * density.w(t)?))).collect()
}

/// Weighted least-squares fit in the normalized Legendre basis up to
/// `density.degree`, with row weights `1/√(k·w(t_i))`.
pub fn fit_legendre(density: &LeverageDensity, points: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = density.degree;
    let weights = reweighting(density, points)?;
    let mut data = Vec::with_capacity(points.len() * (d + 1));
    let mut rhs = Vec::with_capacity(points.len());
    for ((&t, &w), &y) in points.iter().zip(&weights).zip(values) {
        let s = w.sqrt();
        data.extend(legendre_normalized(t, d)?.into_iter().map(|v| s * v));
        rhs.push(s * y);
    }
    let a = DenseMatrix::new(points.len(), d + 1, data)?;
    Ok(weighted_least_squares(&a, &rhs)?.coefficients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Composite Simpson on `n` panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn tau_closed_forms() {
        for t in [-1.0, -0.4, 0.0, 0.9] {
            assert_abs_diff_eq!(tau(&LeverageDensity::unit(0), t).unwrap(), 0.5, epsilon = 1e-15);
        }
        for d in [1usize, 4, 12] {
            let expect = ((d + 1) * (d + 1)) as f64 / 2.0;
            assert_abs_diff_eq!(tau(&LeverageDensity::unit(d), 1.0).unwrap(), expect, epsilon = 1e-10);
        }
        assert!(matches!(tau(&LeverageDensity::unit(2), 1.5), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn tau_is_the_maximal_pointwise_ratio() {
        // max_p p(t)² / ∫p² over a midpoint discretization with monomials
        let d = 3;
        let m = 2000;
        let h = 2.0 / m as f64;
        let mut gram = nalgebra::DMatrix::<f64>::zeros(d + 1, d + 1);
        for j in 0..m {
            let s = -1.0 + h * (j as f64 + 0.5);
            let phi: Vec<f64> = (0..=d).map(|e| s.powi(e as i32)).collect();
            for a in 0..=d {
                for b in 0..=d {
                    gram[(a, b)] += h * phi[a] * phi[b];
                }
            }
        }
        let phi = nalgebra::DVector::from_iterator(d + 1, (0..=d).map(|e| 0.3f64.powi(e as i32)));
        let oracle = (phi.transpose() * gram.try_inverse().unwrap() * &phi)[(0, 0)];
        let got = tau(&LeverageDensity::unit(d), 0.3).unwrap();
        assert!((got - oracle).abs() <= 0.01 * oracle, "{got} vs {oracle}");
    }

    proptest! {
        #[test]
        fn tau_even_and_positive(t in -1.0f64..=1.0, d in 0usize..15) {
            let den = LeverageDensity::unit(d);
            let (a, b) = (tau(&den, t).unwrap(), tau(&den, -t).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            prop_assert!(a > 0.0);
        }
    }

    #[test]
    fn uniform_partition() {
        let p = build_partition(&LeverageDensity::unit(0), 4).unwrap();
        for (b, e) in p.boundaries.iter().zip([-1.0, -0.5, 0.0, 0.5, 1.0]) {
            assert_abs_diff_eq!(*b, e, epsilon = 1e-11);
        }
        let p = build_partition(&LeverageDensity::unit(7), 1).unwrap();
        assert_eq!(p.boundaries, vec![-1.0, 1.0]);
        assert!(build_partition(&LeverageDensity::unit(2), 0).is_err());
    }

    #[test]
    fn cells_have_equal_mass_and_shrink_at_the_ends() {
        let (d, k) = (5, 20);
        let den = LeverageDensity::unit(d);
        let p = build_partition(&den, k).unwrap();
        assert!(p.boundaries.windows(2).all(|w| w[0] < w[1]));
        for c in 0..k {
            let (a, b) = p.cell(c);
            let m = simpson(|t| k as f64 * den.w(t).unwrap(), a, b, 2000);
            assert_abs_diff_eq!(m, 1.0, epsilon = 1e-8);
        }
        let width = |c: usize| p.cell(c).1 - p.cell(c).0;
        assert!(width(0) < width(k / 2) && width(k - 1) < width(k / 2));
        for c in 0..k {
            assert_abs_diff_eq!(width(c), width(k - 1 - c), epsilon = 1e-10);
        }
    }

    #[test]
    fn draws_are_sorted_and_one_per_cell() {
        let den = LeverageDensity::unit(4);
        let p = build_partition(&den, 15).unwrap();
        let s = ContinuumSampler::new(den, p.clone());
        for seed in 0..50 {
            let pts = s.sample(&RngState::new(seed));
            assert_eq!(pts.len(), 15);
            for (c, t) in pts.iter().enumerate() {
                let (a, b) = p.cell(c);
                assert!(*t >= a && *t <= b && t.abs() <= 1.0);
            }
        }
        assert_eq!(sample_continuum(&den, &p, &RngState::new(3)), s.sample(&RngState::new(3)));
    }

    #[test]
    fn flat_density_draws_pass_ks() {
        let den = LeverageDensity::unit(0);
        let s = ContinuumSampler::new(den, build_partition(&den, 4).unwrap());
        let n = 10_000;
        let mut u: Vec<f64> = (0..n)
            .map(|seed| (s.sample(&RngState::new(seed))[1] + 0.5) / 0.5)
            .collect();
        u.sort_by(f64::total_cmp);
        let dstat = u
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i + 1) as f64 / n as f64 - v).max(v - i as f64 / n as f64))
            .fold(0.0, f64::max);
        // asymptotic Kolmogorov critical value for level 1e-3
        assert!(dstat < 1.9495 / (n as f64).sqrt(), "D = {dstat}");
    }

    #[test]
    fn constant_polynomial_on_flat_density_is_exact() {
        let den = LeverageDensity::unit(0);
        let pts = [-0.9, -0.1, 0.4, 0.77];
        assert_eq!(embedding_error(&den, &pts, &[1.0]).unwrap(), 0.0);
        assert!(matches!(embedding_error(&den, &pts, &[0.0, 0.0]), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn gauss_quadrature_reproduces_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, w) = crate::quad::gauss_legendre(12);
        let c: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(weighted_embedding_error(&x, &w, &c).unwrap() <= 1e-10);
    }

    #[test]
    fn random_quintic_error_is_moderate() {
        let d = 5;
        let den = LeverageDensity::unit(d);
        let s = ContinuumSampler::new(den, build_partition(&den, 40 * (d + 1)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ok = (0..100)
            .filter(|&seed| {
                let c: Vec<f64> = (0..=d).map(|_| StandardNormal.sample(&mut rng)).collect();
                embedding_error(&den, &s.sample(&RngState::new(seed)), &c).unwrap() <= 0.5
            })
            .count();
        assert!(ok >= 95, "{ok}");
    }

    #[test]
    fn empirical_gram_converges() {
        let d = 4;
        let den = LeverageDensity::unit(d);
        let deviation = |k: usize| {
            let s = ContinuumSampler::new(den, build_partition(&den, k).unwrap());
            let mut total = 0.0;
            for seed in 0..20 {
                let pts = s.sample(&RngState::new(seed));
                let wts = reweighting(&den, &pts).unwrap();
                let mut g = vec![0.0; (d + 1) * (d + 1)];
                for (t, w) in pts.iter().zip(&wts) {
                    let l = legendre_normalized(*t, d).unwrap();
                    for a in 0..=d {
                        for b in 0..=d {
                            g[a * (d + 1) + b] += w * l[a] * l[b];
                        }
                    }
                }
                let g = DenseMatrix::new(d + 1, d + 1, g).unwrap();
                total += crate::matrix::spectral_deviation_from_identity(&g).unwrap();
            }
            total / 20.0
        };
        let (coarse, fine) = (deviation(50), deviation(800));
        assert!(fine < 0.25 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn fit_recovers_polynomial() {
        let d = 6;
        let den = LeverageDensity::unit(d);
        let s = ContinuumSampler::new(den, build_partition(&den, 30).unwrap());
        let pts = s.sample(&RngState::new(2));
        let c: Vec<f64> = (0..=d).map(|i| (i as f64 - 2.5) / 3.0).collect();
        let y: Vec<f64> = pts.iter().map(|&t| legendre_series(&c, t).unwrap()).collect();
        let fit = fit_legendre(&den, &pts, &y).unwrap();
        for (a, b) in fit.iter().zip(&c) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn affine_domain_map() {
        let den = LeverageDensity::new(3, (2.0, 6.0)).unwrap();
        assert_eq!(den.to_unit(4.0), 0.0);
        assert_eq!(den.from_unit(-1.0), 2.0);
        assert_eq!(den.from_unit(1.0), 6.0);
        assert!(LeverageDensity::new(3, (1.0, 1.0)).is_err());
    }

    #[test]
    fn partition_csv() {
        let p = IntervalPartition {
            boundaries: vec![-1.0, 0.0, 1.0],
        };
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cell,lo,hi\n0,-1.0,0.0\n1,0.0,1.0\n");
    }
}
