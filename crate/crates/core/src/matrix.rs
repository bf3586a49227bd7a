//! Dense row-major matrices and the factorizations the pipeline relies on.
//!
//! Everything downstream (leverage scores, sampled regression, embedding
//! diagnostics) goes through a Householder QR with column pivoting. Normal
//! equations are never formed for solving.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Real matrix stored row-major: `data[i * cols + j]` is entry `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "data length {} != {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    for (o, &b) in out.iter_mut().zip(other.row(l)) {
                        *o += a * b;
                    }
                }
            }
        }
        DenseMatrix::new(self.rows, other.cols, data)
    }

    /// `selfᵀ · self`, symmetric by construction.
    pub fn gram(&self) -> DenseMatrix {
        let c = self.cols;
        let mut data = vec![0.0; c * c];
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..c {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..c {
                    data[a * c + b] += ra * r[b];
                }
            }
        }
        for a in 0..c {
            for b in 0..a {
                data[a * c + b] = data[b * c + a];
            }
        }
        DenseMatrix {
            rows: c,
            cols: c,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} != {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · y`.
    pub fn t_matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} != {} rows",
                y.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        Ok(out)
    }

    /// Gathers rows `indices`, scaling row `j` of the output by `scales[j]`.
    pub fn select_rows_scaled(&self, indices: &[usize], scales: &[f64]) -> Result<DenseMatrix> {
        if indices.len() != scales.len() {
            return Err(Error::DimensionMismatch("indices and scales differ in length".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for (&i, &s) in indices.iter().zip(scales) {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows,
                });
            }
            data.extend(self.row(i).iter().map(|v| v * s));
        }
        DenseMatrix::new(indices.len(), self.cols, data)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// One row per line, no header, shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Reads a vector stored one value per line (or a single CSV row).
pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = DenseMatrix::read_csv(path)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected a vector, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.data)
}

pub fn write_vector_csv<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    for x in v {
        writeln!(w, "{x:?}")?;
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Householder QR of `A·P` in compact column-major form.
struct HouseholderQr {
    m: usize,
    /// Column-major: R on and above the diagonal, reflector tails below.
    qr: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl HouseholderQr {
    fn factor(a: &DenseMatrix, pivot: bool) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut qr = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                qr[j * m + i] = a.get(i, j);
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| norm2(&qr[j * m..(j + 1) * m])).collect();
        let mut ref_norms = norms.clone();
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        let tol = (m.max(n) as f64) * f64::EPSILON * max_norm;
        let steps = m.min(n);
        let mut tau = vec![0.0; steps];
        let eps_sqrt = f64::EPSILON.sqrt();

        for j in 0..steps {
            if pivot {
                let mut p = j;
                for l in j + 1..n {
                    if norms[l] > norms[p] {
                        p = l;
                    }
                }
                if p != j {
                    for i in 0..m {
                        qr.swap(j * m + i, p * m + i);
                    }
                    norms.swap(j, p);
                    ref_norms.swap(j, p);
                    perm.swap(j, p);
                }
            }

            let (head, tail) = qr.split_at_mut((j + 1) * m);
            let col = &mut head[j * m + j..];
            let xnorm = norm2(col);
            if xnorm == 0.0 {
                tau[j] = 0.0;
                continue;
            }
            let alpha = col[0];
            let beta = if alpha >= 0.0 { -xnorm } else { xnorm };
            let scale = 1.0 / (alpha - beta);
            for v in col[1..].iter_mut() {
                *v *= scale;
            }
            tau[j] = (beta - alpha) / beta;
            col[0] = beta;

            let v_tail = &col[1..];
            for l in j + 1..n {
                let c = &mut tail[(l - j - 1) * m + j..(l - j) * m];
                let s = tau[j] * (c[0] + dot(v_tail, &c[1..]));
                c[0] -= s;
                for (ci, vi) in c[1..].iter_mut().zip(v_tail) {
                    *ci -= s * vi;
                }
                if pivot && norms[l] > 0.0 {
                    let ratio = c[0].abs() / norms[l];
                    let t = (1.0 - ratio * ratio).max(0.0);
                    let t2 = t * (norms[l] / ref_norms[l]).powi(2);
                    if t2 <= eps_sqrt {
                        norms[l] = norm2(&c[1..]);
                        ref_norms[l] = norms[l];
                    } else {
                        norms[l] *= t.sqrt();
                    }
                }
            }
        }

        let rank = (0..steps)
            .take_while(|&j| qr[j * m + j].abs() > tol)
            .count();
        Self {
            m,
            qr,
            tau,
            perm,
            rank,
        }
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> f64 {
        self.qr[j * self.m + i]
    }

    /// Overwrites `b` with `Qᵀ b`.
    fn apply_qt(&self, b: &mut [f64]) {
        for j in 0..self.tau.len() {
            let c = &self.qr[j * self.m + j + 1..(j + 1) * self.m];
            let s = self.tau[j] * (b[j] + dot(c, &b[j + 1..]));
            b[j] -= s;
            for (bi, vi) in b[j + 1..].iter_mut().zip(c) {
                *bi -= s * vi;
            }
        }
    }

    /// First `k` columns of Q as a row-major `m × k` matrix.
    fn thin_q(&self, k: usize) -> DenseMatrix {
        let m = self.m;
        let mut q = vec![0.0; m * k];
        for c in 0..k {
            q[c * m + c] = 1.0;
        }
        for j in (0..self.tau.len()).rev() {
            let v = &self.qr[j * m + j + 1..(j + 1) * m];
            for c in 0..k {
                let col = &mut q[c * m + j..(c + 1) * m];
                let s = self.tau[j] * (col[0] + dot(v, &col[1..]));
                if s == 0.0 {
                    continue;
                }
                col[0] -= s;
                for (qi, vi) in col[1..].iter_mut().zip(v) {
                    *qi -= s * vi;
                }
            }
        }
        let mut data = vec![0.0; m * k];
        for c in 0..k {
            for i in 0..m {
                data[i * k + c] = q[c * m + i];
            }
        }
        DenseMatrix {
            rows: m,
            cols: k,
            data,
        }
    }
}

/// Orthonormal basis for the column span of a full-column-rank matrix.
pub fn orthonormal_basis(a: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows < a.cols {
        return Err(Error::RankDeficient {
            rank: a.rows,
            cols: a.cols,
        });
    }
    let qr = HouseholderQr::factor(a, true);
    if qr.rank < a.cols {
        return Err(Error::RankDeficient {
            rank: qr.rank,
            cols: a.cols,
        });
    }
    Ok(qr.thin_q(a.cols))
}

/// Least-squares solution with the achieved residual.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSolution {
    pub coefficients: Vec<f64>,
    pub residual_norm_sq: f64,
    pub rank: usize,
    /// Set when the system was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

/// Solves `min ‖a x − b‖₂` by pivoted QR.
///
/// Rank-deficient (including underdetermined) systems get the minimum-norm
/// solution with `rank_deficient` set.
pub fn weighted_least_squares(a_sub: &DenseMatrix, b_sub: &[f64]) -> Result<RegressionSolution> {
    if a_sub.rows != b_sub.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} targets",
            a_sub.rows,
            b_sub.len()
        )));
    }
    let n = a_sub.cols;
    let qr = HouseholderQr::factor(a_sub, true);
    let mut qtb = b_sub.to_vec();
    qr.apply_qt(&mut qtb);
    let r = qr.rank;

    let mut y = vec![0.0; n];
    if r == n {
        for i in (0..n).rev() {
            let mut s = qtb[i];
            for l in i + 1..n {
                s -= qr.r(i, l) * y[l];
            }
            y[i] = s / qr.r(i, i);
        }
    } else if r > 0 {
        // Complete orthogonal decomposition: R_top = R2ᵀ Q2ᵀ with
        // R_topᵀ = Q2 R2, then y = Q2 R2⁻ᵀ c is the minimum-norm solution.
        let rt = DenseMatrix::from_fn(n, r, |i, j| if i >= j { qr.r(j, i) } else { 0.0 })?;
        let qr2 = HouseholderQr::factor(&rt, false);
        let mut z = vec![0.0; r];
        for i in 0..r {
            let mut s = qtb[i];
            for l in 0..i {
                s -= qr2.r(l, i) * z[l];
            }
            z[i] = s / qr2.r(i, i);
        }
        let q2 = qr2.thin_q(r);
        y = q2.matvec(&z)?;
    }

    let mut coefficients = vec![0.0; n];
    for (i, &p) in qr.perm.iter().enumerate() {
        coefficients[p] = y[i];
    }
    let fitted = a_sub.matvec(&coefficients)?;
    let residual_norm_sq = fitted
        .iter()
        .zip(b_sub)
        .map(|(f, b)| (f - b) * (f - b))
        .sum();
    Ok(RegressionSolution {
        coefficients,
        residual_norm_sq,
        rank: r,
        rank_deficient: r < n,
    })
}

const POWER_REL_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 10_000;

/// `‖m − I‖₂` for a (symmetrized) square matrix, by power iteration.
pub fn spectral_deviation_from_identity(m: &DenseMatrix) -> Result<f64> {
    if m.rows != m.cols {
        return Err(Error::NonSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = 0.5 * (m.get(i, j) + m.get(j, i)) - if i == j { 1.0 } else { 0.0 };
        }
    }
    if s.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let start: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let (est, converged) = power_norm(&s, n, start);
    if converged {
        return Ok(est);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let restart: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let (est2, _) = power_norm(&s, n, restart);
    Ok(est.max(est2))
}

/// Largest |eigenvalue| of symmetric `s` via power iteration on `s²`.
fn power_norm(s: &[f64], n: usize, mut v: Vec<f64>) -> (f64, bool) {
    let apply = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| dot(&s[i * n..(i + 1) * n], x)).collect() };
    let nv = norm2(&v);
    if nv == 0.0 {
        return (0.0, false);
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let sv = apply(&v);
        let ssv = apply(&sv);
        let mu = dot(&sv, &sv);
        if mu == 0.0 {
            return (0.0, false);
        }
        let resid = ssv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - mu * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let est = mu.sqrt();
        if resid <= POWER_REL_TOL * mu || (est - prev).abs() <= 1e-14 * est {
            return (est, true);
        }
        prev = est;
        let nrm = norm2(&ssv);
        v = ssv.into_iter().map(|x| x / nrm).collect();
    }
    (prev, false)
}
