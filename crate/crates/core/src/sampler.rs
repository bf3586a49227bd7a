//! Row samplers: tree-based pivotal sampling, independent Bernoulli
//! sampling and uniform sampling without replacement.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::leverage::InclusionProbabilities;
use crate::matrix::DenseMatrix;
use crate::rng::RngState;
use crate::tree::{Child, CompetitionTree};

/// Selected rows with their reweighting factors `1/√p̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// Strictly increasing row indices.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub k_target: usize,
}

impl SampleSet {
    /// Sorts `indices` and attaches `1/√probs[i]` weights.
    pub fn from_indices(mut indices: Vec<usize>, probs: &[f64], k_target: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        let weights = indices.iter().map(|&i| 1.0 / probs[i].sqrt()).collect();
        Self {
            indices,
            weights,
            k_target,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// CSV with an `index,weight` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,weight")?;
        for (i, wt) in self.indices.iter().zip(&self.weights) {
            writeln!(w, "{i},{wt:?}")?;
        }
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let idx: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad index in {rec:?}")))?;
            let wt: f64 = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad weight in {rec:?}")))?;
            pairs.push((idx, wt));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse("duplicate index in sample".into()));
        }
        let k_target = pairs.len();
        let (indices, weights) = pairs.into_iter().unzip();
        Ok(Self {
            indices,
            weights,
            k_target,
        })
    }
}

/// An index still competing, carrying its accumulated probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Contender {
    pub index: usize,
    pub mass: f64,
}

/// One branch of a match: who moves up to the parent, who gets selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MatchBranch {
    pub probability: f64,
    pub survivor: Option<Contender>,
    pub selected: Option<usize>,
}

/// The two possible outcomes of a sibling match. Mass is conserved: the
/// survivor carries `p_a + p_b` (when it is at most one) or `p_a + p_b − 1`
/// with the other index selected. A survivor that reaches mass one is
/// selected immediately and nothing moves up.
pub(crate) fn compete(a: Contender, b: Contender) -> [MatchBranch; 2] {
    let total = a.mass + b.mass;
    let finish = |survivor: Contender, selected: Option<usize>, probability: f64| {
        if survivor.mass >= 1.0 {
            debug_assert!(selected.is_none());
            MatchBranch {
                probability,
                survivor: None,
                selected: Some(survivor.index),
            }
        } else {
            MatchBranch {
                probability,
                survivor: Some(survivor),
                selected,
            }
        }
    };
    if total <= 1.0 {
        let pa = if total > 0.0 { a.mass / total } else { 1.0 };
        [
            finish(Contender { index: a.index, mass: total }, None, pa),
            finish(Contender { index: b.index, mass: total }, None, 1.0 - pa),
        ]
    } else {
        let (qa, qb) = (1.0 - a.mass, 1.0 - b.mass);
        let pa = qa / (qa + qb);
        let rest = total - 1.0;
        [
            finish(Contender { index: a.index, mass: rest }, Some(b.index), pa),
            finish(Contender { index: b.index, mass: rest }, Some(a.index), 1.0 - pa),
        ]
    }
}

/// Residual root mass tolerated before it is treated as a broken invariant.
pub(crate) const ROOT_MASS_TOL: f64 = 1e-9;
const LEAF_MASS_TOL: f64 = 1e-6;

/// Checks the tree against the probabilities and returns the leaf mass.
pub(crate) fn check_tree(tree: &CompetitionTree, probs: &InclusionProbabilities) -> Result<()> {
    let expected: Vec<usize> = probs.uncertain().collect();
    if tree.leaves() != expected.as_slice() {
        return Err(Error::BadInput(
            "tree leaves must be exactly the indices with probability below one".into(),
        ));
    }
    let mass: f64 = tree.leaves().iter().map(|&i| probs.probs[i]).sum();
    if (mass - mass.round()).abs() > LEAF_MASS_TOL {
        return Err(Error::NonIntegerMass(mass));
    }
    Ok(())
}

/// Binary-tree pivotal sampling.
///
/// Matches run bottom-up in the tree's post-order. Every index with
/// `p̃ = 1` is included; exactly `Σ p̃` indices are returned.
pub fn pivotal_sample(
    tree: &CompetitionTree,
    probs: &InclusionProbabilities,
    rng: &RngState,
) -> Result<SampleSet> {
    check_tree(tree, probs)?;
    let mut gen = rng.generator();
    let p = &probs.probs;
    let mut selected: Vec<usize> = probs.certain().collect();
    let mut slots: Vec<Option<Contender>> = vec![None; tree.nodes().len()];
    let resolve = |slots: &[Option<Contender>], c: Child| match c {
        Child::Leaf(i) => Some(Contender { index: i, mass: p[i] }),
        Child::Node(id) => slots[id],
    };

    for (id, node) in tree.nodes().iter().enumerate() {
        let a = resolve(&slots, node.left);
        let b = resolve(&slots, node.right);
        slots[id] = match (a, b) {
            (Some(a), Some(b)) => {
                let branches = compete(a, b);
                let u: f64 = gen.random();
                let br = if u < branches[0].probability { branches[0] } else { branches[1] };
                selected.extend(br.selected);
                br.survivor
            }
            (x, None) | (None, x) => x,
        };
    }

    if let Some(last) = resolve(&slots, tree.root()) {
        if last.mass > ROOT_MASS_TOL && last.mass < 1.0 - ROOT_MASS_TOL {
            return Err(Error::NonIntegerMass(last.mass));
        }
        if gen.random::<f64>() < last.mass {
            selected.push(last.index);
        }
    }
    Ok(SampleSet::from_indices(selected, p, probs.k))
}

/// Independent inclusion of each row with probability `probs[i]`.
pub fn bernoulli_sample(probs: &InclusionProbabilities, rng: &RngState) -> SampleSet {
    let mut gen = rng.generator();
    let chosen = probs
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| gen.random::<f64>() < p)
        .map(|(i, _)| i)
        .collect();
    SampleSet::from_indices(chosen, &probs.probs, probs.k)
}

/// `k` distinct rows uniformly at random, each weighted by `√(n/k)`.
pub fn uniform_sample(n: usize, k: usize, rng: &RngState) -> Result<SampleSet> {
    if k > n {
        return Err(Error::InfeasibleK { k, n });
    }
    let mut gen = rng.generator();
    let mut indices = rand::seq::index::sample(&mut gen, n, k).into_vec();
    indices.sort_unstable();
    let w = (n as f64 / k as f64).sqrt();
    Ok(SampleSet {
        weights: vec![w; indices.len()],
        indices,
        k_target: k,
    })
}

/// Reweighted subsystem: row `j` is `weights[j] · a[indices[j]]`, same for `b`.
pub fn subsample_system(a: &DenseMatrix, b: &[f64], s: &SampleSet) -> Result<(DenseMatrix, Vec<f64>)> {
    if a.rows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} targets",
            a.rows(),
            b.len()
        )));
    }
    if s.is_empty() {
        return Err(Error::EmptySample);
    }
    let a_sub = a.select_rows_scaled(&s.indices, &s.weights)?;
    let b_sub = s.indices.iter().zip(&s.weights).map(|(&i, w)| w * b[i]).collect();
    Ok((a_sub, b_sub))
}
