//! Exact and Monte-Carlo diagnostics of sampling distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::InclusionProbabilities;
use crate::matrix::{dot, spectral_deviation_from_identity, DenseMatrix};
use crate::sampler::{check_tree, compete, subsample_system, Contender, SampleSet, ROOT_MASS_TOL};
use crate::tree::{Child, CompetitionTree};

/// Largest tree [`enumerate_pivotal`] will expand.
pub const MAX_ENUMERATION_LEAVES: usize = 14;
/// Largest ground set for influence computations.
pub const MAX_INFLUENCE_N: usize = 64;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Joint law of the inclusion indicators as a table of outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDistribution {
    pub n: usize,
    /// Sorted index sets with their probabilities, in ascending set order.
    pub outcomes: Vec<(Vec<usize>, f64)>,
}

impl SampleDistribution {
    /// Validates and merges an outcome table.
    pub fn new(n: usize, outcomes: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
        for (mut set, p) in outcomes {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadInput(format!("outcome probability {p}")));
            }
            set.sort_unstable();
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::BadInput("repeated index in outcome".into()));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            merged.entry(set).or_default().push(p);
        }
        let outcomes: Vec<(Vec<usize>, f64)> = merged
            .into_iter()
            .map(|(s, ps)| (s, ascending_sum(ps)))
            .filter(|(_, p)| *p > 0.0)
            .collect();
        let total = ascending_sum(outcomes.iter().map(|o| o.1).collect());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadInput(format!("outcome probabilities sum to {total}")));
        }
        Ok(Self { n, outcomes })
    }

    /// Product law of independent indicators.
    pub fn independent(probs: &[f64]) -> Result<Self> {
        const CAP: usize = 20;
        if probs.len() > CAP {
            return Err(Error::TooLarge {
                leaves: probs.len(),
                cap: CAP,
            });
        }
        let mut table: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::BadInput(format!("probability {p}")));
            }
            let mut next = Vec::with_capacity(table.len() * 2);
            for (set, q) in table {
                if p > 0.0 {
                    let mut with = set.clone();
                    with.push(i);
                    next.push((with, q * p));
                }
                if p < 1.0 {
                    next.push((set, q * (1.0 - p)));
                }
            }
            table = next;
        }
        Self::new(probs.len(), table)
    }

    pub fn marginals(&self) -> Vec<f64> {
        let mut parts = vec![Vec::new(); self.n];
        for (set, p) in &self.outcomes {
            for &i in set {
                parts[i].push(*p);
            }
        }
        parts.into_iter().map(ascending_sum).collect()
    }

    /// Whether every outcome has the same size.
    pub fn is_homogeneous(&self) -> bool {
        self.outcomes.windows(2).all(|w| w[0].0.len() == w[1].0.len())
    }

    /// Probability of the outcome `set`, or zero if it never occurs.
    pub fn probability_of(&self, set: &[usize]) -> f64 {
        let mut key = set.to_vec();
        key.sort_unstable();
        self.outcomes
            .binary_search_by(|o| o.0.cmp(&key))
            .map_or(0.0, |i| self.outcomes[i].1)
    }

    fn masks(&self) -> Result<Vec<(u64, f64)>> {
        if self.n > MAX_INFLUENCE_N {
            return Err(Error::TooLarge {
                leaves: self.n,
                cap: MAX_INFLUENCE_N,
            });
        }
        Ok(self
            .outcomes
            .iter()
            .map(|(s, p)| (s.iter().fold(0u64, |m, &i| m | 1 << i), *p))
            .collect())
    }
}

fn ascending_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    v.into_iter().sum()
}

/// Order in which sibling subtrees are expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOrder {
    /// Left subtree first, left contender first in each match.
    PostOrder,
    /// Right subtree first, right contender first in each match.
    Reversed,
}

/// Partial state of a subtree: indices already selected and the contender
/// still moving up.
type Partial = BTreeMap<(Vec<usize>, Option<usize>), (Option<Contender>, Vec<f64>)>;

/// Exact distribution of [`crate::sampler::pivotal_sample`] over `tree`.
pub fn enumerate_pivotal(tree: &CompetitionTree, probs: &InclusionProbabilities) -> Result<SampleDistribution> {
    enumerate_pivotal_with_order(tree, probs, MatchOrder::PostOrder)
}

pub fn enumerate_pivotal_with_order(
    tree: &CompetitionTree,
    probs: &InclusionProbabilities,
    order: MatchOrder,
) -> Result<SampleDistribution> {
    if tree.leaf_count() > MAX_ENUMERATION_LEAVES {
        return Err(Error::TooLarge {
            leaves: tree.leaf_count(),
            cap: MAX_ENUMERATION_LEAVES,
        });
    }
    check_tree(tree, probs)?;
    let states = expand(tree, probs, tree.root(), order);
    let certain: Vec<usize> = probs.certain().collect();
    let mut outcomes = Vec::new();
    for ((selected, _), (survivor, ps)) in states {
        let p = ascending_sum(ps);
        let mut base = selected;
        base.extend_from_slice(&certain);
        match survivor {
            None => outcomes.push((base, p)),
            Some(c) => {
                if c.mass > ROOT_MASS_TOL && c.mass < 1.0 - ROOT_MASS_TOL {
                    return Err(Error::NonIntegerMass(c.mass));
                }
                // the residual mass is rounding noise around 0 or 1
                if c.mass >= 0.5 {
                    base.push(c.index);
                }
                outcomes.push((base, p));
            }
        }
    }
    SampleDistribution::new(probs.len(), outcomes)
}

fn expand(tree: &CompetitionTree, probs: &InclusionProbabilities, at: Child, order: MatchOrder) -> Partial {
    let mut out = Partial::new();
    match at {
        Child::Leaf(i) => {
            let c = Contender {
                index: i,
                mass: probs.probs[i],
            };
            out.insert((Vec::new(), Some(i)), (Some(c), vec![1.0]));
        }
        Child::Node(id) => {
            let node = tree.nodes()[id];
            let (first, second) = match order {
                MatchOrder::PostOrder => (node.left, node.right),
                MatchOrder::Reversed => (node.right, node.left),
            };
            let a_states = expand(tree, probs, first, order);
            let b_states = expand(tree, probs, second, order);
            for ((sa, _), (ca, pa)) in &a_states {
                let pa = ascending_sum(pa.clone());
                for ((sb, _), (cb, pb)) in &b_states {
                    let p = pa * ascending_sum(pb.clone());
                    let mut sel: Vec<usize> = sa.iter().chain(sb).copied().collect();
                    match (ca, cb) {
                        (Some(x), Some(y)) => {
                            for br in compete(*x, *y) {
                                if br.probability == 0.0 {
                                    continue;
                                }
                                let mut s = sel.clone();
                                s.extend(br.selected);
                                s.sort_unstable();
                                insert(&mut out, s, br.survivor, p * br.probability);
                            }
                        }
                        (x, y) => {
                            sel.sort_unstable();
                            insert(&mut out, sel, x.or(*y), p);
                        }
                    }
                }
            }
        }
    }
    out
}

fn insert(out: &mut Partial, sel: Vec<usize>, survivor: Option<Contender>, p: f64) {
    let entry = out
        .entry((sel, survivor.map(|c| c.index)))
        .or_insert((survivor, Vec::new()));
    entry.1.push(p);
}

/// One-sided influence matrix conditioned on every index of `S` being selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub conditioning_set: Vec<usize>,
    /// Row-major `n × n`; rows for indices in `S` or of conditional
    /// probability zero are left at zero.
    pub matrix: Vec<f64>,
    pub n: usize,
    /// Conditional marginals `q_i = Pr[ξ_i = 1 | S]`.
    pub conditional_marginals: Vec<f64>,
    pub inf_norm: f64,
}

impl InfluenceReport {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.n + j]
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.matrix[i * self.n..(i + 1) * self.n].iter().map(|v| v.abs()).sum()
    }
}

/// `I(i, j) = Pr[ξ_j | ξ_i, ξ_S] − Pr[ξ_j | ξ_S]` from the outcome table.
pub fn influence_report(dist: &SampleDistribution, s: &[usize]) -> Result<InfluenceReport> {
    let masks = dist.masks()?;
    influence_from_masks(dist.n, &masks, s)
}

fn influence_from_masks(n: usize, masks: &[(u64, f64)], s: &[usize]) -> Result<InfluenceReport> {
    if let Some(&i) = s.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let smask = s.iter().fold(0u64, |m, &i| m | 1 << i);
    let mut p_s = 0.0;
    let mut single = vec![0.0; n];
    let mut pair = vec![0.0; n * n];
    for &(m, p) in masks {
        if m & smask != smask {
            continue;
        }
        p_s += p;
        let members: Vec<usize> = (0..n).filter(|&i| m >> i & 1 == 1).collect();
        for &i in &members {
            single[i] += p;
            for &j in &members {
                pair[i * n + j] += p;
            }
        }
    }
    if p_s <= 0.0 {
        return Err(Error::ImpossibleCondition);
    }
    let q: Vec<f64> = single.iter().map(|v| v / p_s).collect();
    let mut matrix = vec![0.0; n * n];
    let mut inf_norm = 0.0f64;
    for i in 0..n {
        if smask >> i & 1 == 1 || single[i] <= 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..n {
            if smask >> j & 1 == 1 {
                continue;
            }
            let v = pair[i * n + j] / single[i] - q[j];
            matrix[i * n + j] = v;
            row += v.abs();
        }
        inf_norm = inf_norm.max(row);
    }
    let mut cond = s.to_vec();
    cond.sort_unstable();
    Ok(InfluenceReport {
        conditioning_set: cond,
        matrix,
        n,
        conditional_marginals: q,
        inf_norm,
    })
}

/// Largest `‖I^S‖∞` over all conditioning sets of size at most
/// `max_conditioning` that have positive probability.
pub fn d_inf(dist: &SampleDistribution, max_conditioning: usize) -> Result<f64> {
    let masks = dist.masks()?;
    let n = dist.n;
    let mut best = 0.0f64;
    let mut set = Vec::new();
    sweep(n, 0, max_conditioning, &mut set, &mut |s| {
        match influence_from_masks(n, &masks, s) {
            Ok(r) => best = best.max(r.inf_norm),
            Err(Error::ImpossibleCondition) => {}
            Err(e) => unreachable!("{e}"),
        }
    });
    Ok(best)
}

fn sweep(n: usize, start: usize, left: usize, set: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    visit(set);
    if left == 0 {
        return;
    }
    for i in start..n {
        set.push(i);
        sweep(n, i + 1, left - 1, set, visit);
        set.pop();
    }
}

/// Positively correlated pairs `Pr[ξ_j | ξ_i] > Pr[ξ_j]` (beyond 1e-12).
pub fn negative_correlation_violations(dist: &SampleDistribution) -> Result<usize> {
    let r = influence_report(dist, &[])?;
    let n = dist.n;
    Ok((0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && r.get(i, j) > 1e-12)
        .count())
}

/// Summary of an exact distribution against target marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub schema_version: u32,
    pub marginal_max_abs_err: f64,
    pub homogeneous: bool,
    pub d_inf: f64,
    pub negative_correlation_violations: usize,
}

pub fn distribution_report(
    dist: &SampleDistribution,
    target: &[f64],
    max_conditioning: usize,
) -> Result<DistributionReport> {
    if target.len() != dist.n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {} indices",
            target.len(),
            dist.n
        )));
    }
    let marginal_max_abs_err = dist
        .marginals()
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(DistributionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        marginal_max_abs_err,
        homogeneous: dist.is_homogeneous(),
        d_inf: d_inf(dist, max_conditioning)?,
        negative_correlation_violations: negative_correlation_violations(dist)?,
    })
}

/// `‖ŨᵀŨ − I‖₂` for the reweighted sampled rows of an orthonormal basis.
pub fn embedding_deviation(u: &DenseMatrix, s: &SampleSet) -> Result<f64> {
    let zeros = vec![0.0; u.rows()];
    let (sub, _) = subsample_system(u, &zeros, s)?;
    spectral_deviation_from_identity(&sub.gram())
}

/// `‖UᵀSᵀS r‖² / ‖r‖²` for a residual `r` orthogonal to the columns of `U`.
pub fn matvec_error(u: &DenseMatrix, residual: &[f64], s: &SampleSet) -> Result<f64> {
    if residual.len() != u.rows() {
        return Err(Error::DimensionMismatch(format!(
            "residual has {} entries, basis {} rows",
            residual.len(),
            u.rows()
        )));
    }
    let rr = dot(residual, residual);
    if rr == 0.0 {
        return Ok(0.0);
    }
    let proj = u.t_matvec(residual)?;
    let leak = dot(&proj, &proj).sqrt() / rr.sqrt();
    if leak > 1e-8 {
        return Err(Error::NotAResidual(leak));
    }
    let mut acc = vec![0.0; u.cols()];
    for (&i, &w) in s.indices.iter().zip(&s.weights) {
        if i >= u.rows() {
            return Err(Error::IndexOutOfRange { index: i, len: u.rows() });
        }
        let c = w * w * residual[i];
        for (a, v) in acc.iter_mut().zip(u.row(i)) {
            *a += c * v;
        }
    }
    Ok(dot(&acc, &acc) / rr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> CompetitionTree {
        CompetitionTree::from_order(&(0..n).collect::<Vec<_>>()).unwrap()
    }

    fn random_probs(rng: &mut ChaCha8Rng, n: usize, k: usize) -> InclusionProbabilities {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let init: Vec<f64> = raw.iter().map(|v| v * k as f64 / total).collect();
        crate::leverage::probability_ceiling(&init, k).unwrap()
    }

    #[test]
    fn single_match_tables() {
        let p = InclusionProbabilities::new(vec![0.5, 0.5]).unwrap();
        let d = enumerate_pivotal(&chain(2), &p).unwrap();
        assert_eq!(d.outcomes, vec![(vec![0], 0.5), (vec![1], 0.5)]);
        let p = InclusionProbabilities::new(vec![0.3, 0.7]).unwrap();
        let d = enumerate_pivotal(&chain(2), &p).unwrap();
        assert_abs_diff_eq!(d.probability_of(&[0]), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probability_of(&[1]), 0.7, epsilon = 1e-15);
        assert_eq!(d.outcomes.len(), 2);
    }

    #[test]
    fn four_halves_are_homogeneous() {
        let p = InclusionProbabilities::new(vec![0.5; 4]).unwrap();
        let d = enumerate_pivotal(&chain(4), &p).unwrap();
        assert!(d.is_homogeneous());
        assert!(d.outcomes.iter().all(|o| o.0.len() == 2));
        assert_abs_diff_eq!(d.outcomes.iter().map(|o| o.1).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn marginals_exact_and_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let n = rng.random_range(2..=12);
            let k = rng.random_range(1..n);
            let probs = random_probs(&mut rng, n, k);
            let leaves: Vec<usize> = probs.uncertain().collect();
            let tree = CompetitionTree::random(&leaves, &mut rng).unwrap();
            let d = enumerate_pivotal(&tree, &probs).unwrap();
            assert!(d.is_homogeneous());
            assert!(d.outcomes.iter().all(|o| o.0.len() == k));
            for (m, p) in d.marginals().iter().zip(&probs.probs) {
                assert_abs_diff_eq!(*m, *p, epsilon = 1e-12);
            }
            let r = enumerate_pivotal_with_order(&tree, &probs, MatchOrder::Reversed).unwrap();
            assert_eq!(r.outcomes.len(), d.outcomes.len());
            for ((sa, pa), (sb, pb)) in d.outcomes.iter().zip(&r.outcomes) {
                assert_eq!(sa, sb);
                assert_abs_diff_eq!(pa, pb, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let p = InclusionProbabilities::new(vec![0.5; 16]).unwrap();
        assert!(matches!(enumerate_pivotal(&chain(16), &p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn independent_influence_is_diagonal() {
        let probs = [0.2, 0.5, 0.9, 0.35, 0.6];
        let d = SampleDistribution::independent(&probs).unwrap();
        assert!(!d.is_homogeneous());
        let r = influence_report(&d, &[]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 - probs[i] } else { 0.0 };
                assert_abs_diff_eq!(r.get(i, j), want, epsilon = 1e-12);
            }
        }
        assert!(d_inf(&d, 5).unwrap() <= 1.0 + 1e-12);
        assert_eq!(negative_correlation_violations(&d).unwrap(), 0);
    }

    #[test]
    fn pivotal_row_sums_and_mass_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..15 {
            let n = rng.random_range(3..=8);
            let k = rng.random_range(1..n);
            let probs = random_probs(&mut rng, n, k);
            let leaves: Vec<usize> = probs.uncertain().collect();
            let tree = CompetitionTree::random(&leaves, &mut rng).unwrap();
            let d = enumerate_pivotal(&tree, &probs).unwrap();
            let mut set = Vec::new();
            sweep(n, 0, n, &mut set, &mut |s| {
                let Ok(r) = influence_report(&d, s) else { return };
                for i in (0..n).filter(|i| !s.contains(i)) {
                    let q = r.conditional_marginals[i];
                    if q <= 0.0 {
                        continue;
                    }
                    assert_abs_diff_eq!(r.row_abs_sum(i), 2.0 - 2.0 * q, epsilon = 1e-9);
                    let off: f64 = (0..n).filter(|&j| j != i && !s.contains(&j)).map(|j| r.get(i, j)).sum();
                    assert_abs_diff_eq!(off, -(1.0 - q), epsilon = 1e-9);
                }
            });
            assert!(d_inf(&d, n).unwrap() <= 2.0 + 1e-9);
            assert_eq!(negative_correlation_violations(&d).unwrap(), 0);
        }
    }

    #[test]
    fn deterministic_distribution_has_no_influence() {
        let d = SampleDistribution::new(3, vec![(vec![0, 1, 2], 1.0)]).unwrap();
        assert_eq!(d_inf(&d, 3).unwrap(), 0.0);
        let d = SampleDistribution::new(2, vec![(vec![0], 0.5), (vec![1], 0.5)]).unwrap();
        assert!(matches!(influence_report(&d, &[0, 1]), Err(Error::ImpossibleCondition)));
    }

    #[test]
    fn report_json_has_schema_version() {
        let p = InclusionProbabilities::new(vec![0.5; 4]).unwrap();
        let d = enumerate_pivotal(&chain(4), &p).unwrap();
        let rep = distribution_report(&d, &p.probs, 3).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert!(rep.homogeneous && rep.marginal_max_abs_err < 1e-12);
    }

    #[test]
    fn full_sample_has_no_embedding_or_matvec_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DenseMatrix::from_fn(30, 4, |_, _| rng.random::<f64>() - 0.5).unwrap();
        let u = crate::matrix::orthonormal_basis(&a).unwrap();
        let full = SampleSet {
            indices: (0..30).collect(),
            weights: vec![1.0; 30],
            k_target: 30,
        };
        assert!(embedding_deviation(&u, &full).unwrap() < 1e-12);
        let g: Vec<f64> = (0..30).map(|_| rng.random::<f64>()).collect();
        let coef = u.t_matvec(&g).unwrap();
        let proj = u.matvec(&coef).unwrap();
        let r: Vec<f64> = g.iter().zip(&proj).map(|(a, b)| a - b).collect();
        assert!(matvec_error(&u, &r, &full).unwrap() < 1e-16);
        assert_eq!(matvec_error(&u, &vec![0.0; 30], &full).unwrap(), 0.0);
        assert!(matches!(matvec_error(&u, &g, &full), Err(Error::NotAResidual(_))));
    }
}
