//! Leverage scores and exact-size inclusion probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{orthonormal_basis, DenseMatrix};

/// Squared row norms of an orthonormal basis of the column span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageScores {
    pub scores: Vec<f64>,
    pub rank: usize,
}

/// Leverage score of every row of a full-column-rank matrix.
pub fn leverage_scores(a: &DenseMatrix) -> Result<LeverageScores> {
    let u = orthonormal_basis(a)?;
    let scores = (0..u.rows())
        .map(|i| u.row(i).iter().map(|x| x * x).sum::<f64>().min(1.0))
        .collect();
    Ok(LeverageScores {
        scores,
        rank: a.cols(),
    })
}

/// Inclusion probabilities of the form `min(1, c · base_i)` summing to `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionProbabilities {
    pub probs: Vec<f64>,
    pub k: usize,
    /// Multiplier `c` relative to the scores the probabilities were built
    /// from (leverage scores for [`InclusionProbabilities::from_leverage`],
    /// the raw input for [`probability_ceiling`]).
    pub ceiling_constant: f64,
}

const SUM_TOL: f64 = 1e-6;

impl InclusionProbabilities {
    /// Wraps arbitrary probabilities in `[0, 1]` whose sum is an integer.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::BadInput("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::BadInput(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        let k = sum.round();
        if (sum - k).abs() > SUM_TOL {
            return Err(Error::NonIntegerMass(sum));
        }
        Ok(Self {
            probs,
            k: k as usize,
            ceiling_constant: 1.0,
        })
    }

    /// Equal probabilities `k / n`.
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        if k > n || n == 0 {
            return Err(Error::InfeasibleK { k, n });
        }
        Ok(Self {
            probs: vec![k as f64 / n as f64; n],
            k,
            ceiling_constant: k as f64 / n as f64,
        })
    }

    /// `min(1, c_k τ_i)` with `Σ = k`, starting from `(k / rank) τ`.
    pub fn from_leverage(scores: &LeverageScores, k: usize) -> Result<Self> {
        let scale = k as f64 / scores.rank as f64;
        let initial: Vec<f64> = scores.scores.iter().map(|t| scale * t).collect();
        let mut out = probability_ceiling(&initial, k)?;
        out.ceiling_constant *= scale;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices that are sampled with certainty.
    pub fn certain(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= 1.0)
            .map(|(i, _)| i)
    }

    /// Indices that take part in a random draw.
    pub fn uncertain(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p < 1.0)
            .map(|(i, _)| i)
    }
}

/// Caps probabilities at one and rescales the rest until none exceed one.
///
/// `initial` must be positive and sum to `k`. Terminates after at most `k`
/// capping passes.
pub fn probability_ceiling(initial: &[f64], k: usize) -> Result<InclusionProbabilities> {
    let n = initial.len();
    if k > n {
        return Err(Error::InfeasibleK { k, n });
    }
    if let Some(p) = initial.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::BadInput(format!("initial value {p} is not positive")));
    }
    let total: f64 = initial.iter().sum();
    if (total - k as f64).abs() > SUM_TOL {
        return Err(Error::BadInput(format!(
            "initial values sum to {total}, expected {k}"
        )));
    }

    let mut probs = initial.to_vec();
    let mut constant = 1.0;
    for _ in 0..=k {
        if !probs.iter().any(|&p| p > 1.0) {
            break;
        }
        probs.iter_mut().filter(|p| **p > 1.0).for_each(|p| *p = 1.0);
        constant *= rescale_remainder(&mut probs, k);
    }
    // final exact renormalization of the sub-1 block
    constant *= rescale_remainder(&mut probs, k);
    if probs.iter().any(|&p| p > 1.0) {
        probs.iter_mut().filter(|p| **p > 1.0).for_each(|p| *p = 1.0);
    }

    Ok(InclusionProbabilities {
        probs,
        k,
        ceiling_constant: constant,
    })
}

/// Scales entries below one so the whole vector sums to `k`; returns the factor.
fn rescale_remainder(probs: &mut [f64], k: usize) -> f64 {
    let fixed = probs.iter().filter(|&&p| p >= 1.0).count();
    let rest: f64 = probs.iter().filter(|&&p| p < 1.0).sum();
    if rest <= 0.0 || fixed >= k {
        return 1.0;
    }
    let factor = (k - fixed) as f64 / rest;
    probs.iter_mut().filter(|p| **p < 1.0).for_each(|p| *p *= factor);
    factor
}
