//! Feature maps: total-degree monomials and normalized Legendre polynomials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Monomials of total degree at most `degree` in `input_dim` variables.
///
/// Terms are in graded-lexicographic order: by total degree, then by
/// descending exponent of the first variable, then the second, and so on.
/// For two variables and degree two this is `1, x, y, x², xy, y²`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BasisShape", into = "BasisShape")]
pub struct PolynomialBasisSpec {
    input_dim: usize,
    degree: usize,
    term_exponents: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct BasisShape {
    input_dim: usize,
    degree: usize,
}

impl TryFrom<BasisShape> for PolynomialBasisSpec {
    type Error = Error;
    fn try_from(s: BasisShape) -> Result<Self> {
        Self::new(s.input_dim, s.degree)
    }
}

impl From<PolynomialBasisSpec> for BasisShape {
    fn from(s: PolynomialBasisSpec) -> Self {
        Self {
            input_dim: s.input_dim,
            degree: s.degree,
        }
    }
}

impl PolynomialBasisSpec {
    pub fn new(input_dim: usize, degree: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::BadInput("polynomial basis needs at least one variable".into()));
        }
        let mut term_exponents = Vec::new();
        let mut scratch = vec![0u32; input_dim];
        for total in 0..=degree as u32 {
            push_terms(&mut scratch, 0, total, &mut term_exponents);
        }
        Ok(Self {
            input_dim,
            degree,
            term_exponents,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn term_exponents(&self) -> &[Vec<u32>] {
        &self.term_exponents
    }

    pub fn term_count(&self) -> usize {
        self.term_exponents.len()
    }
}

fn push_terms(scratch: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(scratch.to_vec());
        return;
    }
    for e in (0..=remaining).rev() {
        scratch[pos] = e;
        push_terms(scratch, pos + 1, remaining - e, out);
    }
}

/// Evaluates every monomial of `spec` at every row of `x`.
pub fn expand(x: &DenseMatrix, spec: &PolynomialBasisSpec) -> Result<DenseMatrix> {
    if x.cols() != spec.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "{} input columns, basis expects {}",
            x.cols(),
            spec.input_dim
        )));
    }
    let (q, p, t) = (spec.input_dim, spec.degree, spec.term_count());
    let mut data = Vec::with_capacity(x.rows() * t);
    let mut powers = vec![0.0; q * (p + 1)];
    for i in 0..x.rows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            let pw = &mut powers[j * (p + 1)..(j + 1) * (p + 1)];
            pw[0] = 1.0;
            for e in 1..=p {
                pw[e] = pw[e - 1] * v;
            }
        }
        for ex in &spec.term_exponents {
            data.push(
                ex.iter()
                    .enumerate()
                    .map(|(j, &e)| powers[j * (p + 1) + e as usize])
                    .product(),
            );
        }
    }
    DenseMatrix::new(x.rows(), t, data)
}

/// `(L_0(t), …, L_max_degree(t))` with `∫₋₁¹ L_i L_j = δ_ij`.
pub fn legendre_normalized(t: f64, max_degree: usize) -> Result<Vec<f64>> {
    if !(t.abs() <= 1.0 + 1e-12) {
        return Err(Error::OutOfDomain(t));
    }
    let t = t.clamp(-1.0, 1.0);
    let mut out = Vec::with_capacity(max_degree + 1);
    let (mut p0, mut p1) = (1.0, t);
    out.push(p0);
    if max_degree >= 1 {
        out.push(p1);
    }
    for n in 1..max_degree {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * t * p1 - nf * p0) / (nf + 1.0);
        out.push(p2);
        p0 = p1;
        p1 = p2;
    }
    for (n, v) in out.iter_mut().enumerate() {
        *v *= (n as f64 + 0.5).sqrt();
    }
    Ok(out)
}

/// Tensor grid of Chebyshev nodes `cos((2i−1)π/(2m))`; the last axis varies fastest.
pub fn chebyshev_grid(points_per_axis: usize, dims: usize) -> Result<DenseMatrix> {
    if points_per_axis == 0 || !(1..=3).contains(&dims) {
        return Err(Error::BadInput(format!(
            "chebyshev grid needs m ≥ 1 and 1 ≤ dims ≤ 3, got m={points_per_axis}, dims={dims}"
        )));
    }
    let m = points_per_axis;
    let mut nodes = vec![0.0; m];
    for i in 0..m / 2 {
        let v = ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos();
        nodes[i] = v;
        nodes[m - 1 - i] = -v;
    }
    let total = m.pow(dims as u32);
    DenseMatrix::from_fn(total, dims, |r, c| {
        let stride = m.pow((dims - 1 - c) as u32);
        nodes[(r / stride) % m]
    })
}

/// Affine map of each column from `[lo_j, hi_j]` onto `[−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxScaling {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxScaling {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) {
            return Err(Error::BadInput("box needs lo < hi in every coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Bounding box of the data columns.
    pub fn from_data(x: &DenseMatrix) -> Result<Self> {
        let mut lo = vec![f64::INFINITY; x.cols()];
        let mut hi = vec![f64::NEG_INFINITY; x.cols()];
        for i in 0..x.rows() {
            for (j, &v) in x.row(i).iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Self::new(lo, hi)
    }

    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.lo.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns, box has {}",
                x.cols(),
                self.lo.len()
            )));
        }
        DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
            2.0 * (x.get(i, j) - self.lo[j]) / (self.hi[j] - self.lo[j]) - 1.0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leverage::leverage_scores;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> usize {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    #[test]
    fn two_variable_quadratic_order() {
        let spec = PolynomialBasisSpec::new(2, 2).unwrap();
        let expected: Vec<Vec<u32>> =
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(spec.term_exponents(), expected.as_slice());
        let x = DenseMatrix::from_rows(&[vec![0.5, -1.0]]).unwrap();
        assert_eq!(expand(&x, &spec).unwrap().row(0), &[1.0, 0.5, -1.0, 0.25, -0.5, 1.0]);
    }

    #[test]
    fn degree_twelve_in_two_variables() {
        assert_eq!(PolynomialBasisSpec::new(2, 12).unwrap().term_count(), 91);
    }

    #[test]
    fn zero_row_and_mismatch() {
        let spec = PolynomialBasisSpec::new(3, 4).unwrap();
        let row = expand(&DenseMatrix::new(1, 3, vec![0.0; 3]).unwrap(), &spec).unwrap();
        assert_eq!(row.get(0, 0), 1.0);
        assert!(row.row(0)[1..].iter().all(|&v| v == 0.0));
        let bad = DenseMatrix::new(1, 2, vec![0.0; 2]).unwrap();
        assert!(matches!(expand(&bad, &spec), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn json_shape() {
        let spec = PolynomialBasisSpec::new(3, 5).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"input_dim":3,"degree":5}"#);
        let back: PolynomialBasisSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    proptest! {
        #[test]
        fn term_count_and_order(q in 1usize..5, p in 0usize..8) {
            let spec = PolynomialBasisSpec::new(q, p).unwrap();
            prop_assert_eq!(spec.term_count(), binom(q + p, q));
            prop_assert!(spec.term_exponents()[0].iter().all(|&e| e == 0));
            let degs: Vec<u32> = spec.term_exponents().iter().map(|e| e.iter().sum()).collect();
            prop_assert!(degs.windows(2).all(|w| w[0] <= w[1]));
            for w in spec.term_exponents().windows(2) {
                if w[0].iter().sum::<u32>() == w[1].iter().sum::<u32>() {
                    prop_assert!(w[0] > w[1]);
                }
            }
        }

        #[test]
        fn legendre_bounded_by_endpoint(t in -1.0f64..=1.0, d in 0usize..30) {
            let l = legendre_normalized(t, d).unwrap();
            prop_assert_eq!(l.len(), d + 1);
            for (n, v) in l.iter().enumerate() {
                prop_assert!(v.abs() <= (n as f64 + 0.5).sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn legendre_constants_and_endpoints() {
        for t in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert_abs_diff_eq!(legendre_normalized(t, 0).unwrap()[0], 0.5f64.sqrt(), epsilon = 1e-15);
        }
        let l = legendre_normalized(1.0, 10).unwrap();
        for (d, v) in l.iter().enumerate() {
            assert_abs_diff_eq!(*v, (d as f64 + 0.5).sqrt(), epsilon = 1e-12);
        }
        assert!(legendre_normalized(1.0 + 1e-13, 2).is_ok());
        assert!(matches!(legendre_normalized(1.001, 2), Err(Error::OutOfDomain(_))));
    }

    /// Gauss–Legendre nodes from the Jacobi matrix eigenproblem.
    fn golub_welsch(n: usize) -> Vec<(f64, f64)> {
        let jac = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                let k = i.max(j) as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = jac.symmetric_eigen();
        (0..n)
            .map(|c| (eig.eigenvalues[c], 2.0 * eig.eigenvectors[(0, c)].powi(2)))
            .collect()
    }

    #[test]
    fn legendre_orthonormal_under_quadrature() {
        let rule = golub_welsch(200);
        let mut gram = [[0.0; 9]; 9];
        for (x, w) in &rule {
            let l = legendre_normalized(*x, 8).unwrap();
            for i in 0..9 {
                for j in 0..9 {
                    gram[i][j] += w * l[i] * l[j];
                }
            }
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                assert_abs_diff_eq!(*g, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn christoffel_sum_integrates_to_dimension() {
        let rule = golub_welsch(60);
        for d in [0usize, 3, 8, 20] {
            let total: f64 = rule
                .iter()
                .map(|(x, w)| w * legendre_normalized(*x, d).unwrap().iter().map(|v| v * v).sum::<f64>())
                .sum();
            assert_abs_diff_eq!(total, (d + 1) as f64, epsilon = 1e-8);
        }
    }

    #[test]
    fn chebyshev_cases() {
        assert_eq!(chebyshev_grid(1, 1).unwrap().data(), &[0.0]);
        let g = chebyshev_grid(2, 1).unwrap();
        assert_abs_diff_eq!(g.get(0, 0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(1, 0), -(0.5f64.sqrt()), epsilon = 1e-15);
        let g = chebyshev_grid(3, 2).unwrap();
        assert_eq!(g.rows(), 9);
        for i in 0..9 {
            let (x, y) = (g.get(i, 0), g.get(i, 1));
            for (sx, sy) in [(-1.0, 1.0), (1.0, -1.0)] {
                assert!((0..9).any(|j| g.get(j, 0) == sx * x && g.get(j, 1) == sy * y));
            }
        }
        assert!(chebyshev_grid(0, 2).is_err());
        assert!(chebyshev_grid(3, 4).is_err());
    }

    #[test]
    fn leverage_symmetric_on_reflected_grid() {
        let m = 7;
        let g = chebyshev_grid(m, 2).unwrap();
        let lev = leverage_scores(&expand(&g, &PolynomialBasisSpec::new(2, 3).unwrap()).unwrap()).unwrap();
        for a in 0..m {
            for b in 0..m {
                let s = lev.scores[a * m + b];
                assert_abs_diff_eq!(s, lev.scores[(m - 1 - a) * m + b], epsilon = 1e-10);
                assert_abs_diff_eq!(s, lev.scores[a * m + (m - 1 - b)], epsilon = 1e-10);
                assert_abs_diff_eq!(s, lev.scores[b * m + a], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn box_scaling_maps_corners() {
        let x = DenseMatrix::from_rows(&[vec![0.0, 10.0], vec![2.0, 30.0], vec![1.0, 20.0]]).unwrap();
        let s = BoxScaling::from_data(&x).unwrap();
        let y = s.apply(&x).unwrap();
        assert_eq!(y.row(0), &[-1.0, -1.0]);
        assert_eq!(y.row(1), &[1.0, 1.0]);
        assert_eq!(y.row(2), &[0.0, 0.0]);
        assert!(BoxScaling::new(vec![1.0], vec![1.0]).is_err());
    }
}
