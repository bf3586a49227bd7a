//! Deterministic binary competition trees built from raw coordinates.
//!
//! Each internal node splits its point set at the median of a sort key:
//! either the projection on the top principal direction of the node's
//! points, or a coordinate chosen cyclically by depth. The first
//! `⌊|K|/2⌋` sorted points go left.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::leverage::InclusionProbabilities;
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Pca,
    Coordinate,
}

impl std::str::FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(SplitMethod::Pca),
            "coordinate" | "coord" => Ok(SplitMethod::Coordinate),
            other => Err(Error::Parse(format!("unknown split method {other:?}"))),
        }
    }
}

/// Reference to a tree position: an internal node id or a leaf's row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Child {
    Node(usize),
    Leaf(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub left: Child,
    pub right: Child,
}

/// Full binary tree over the row indices that take part in pivotal matches.
///
/// Internal nodes are stored in post-order (children before parents, left
/// subtree first), so iterating `nodes()` in order is a valid match
/// schedule and the root is the last node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompetitionTree {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
    root: Child,
}

impl CompetitionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Leaf row indices in ascending order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn root(&self) -> Child {
        self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &CompetitionTree, c: Child) -> usize {
            match c {
                Child::Leaf(_) => 0,
                Child::Node(id) => {
                    let n = t.nodes[id];
                    1 + go(t, n.left).max(go(t, n.right))
                }
            }
        }
        go(self, self.root)
    }

    /// Leaves under `c`, in left-to-right order.
    pub fn subtree_leaves(&self, c: Child) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![c];
        while let Some(c) = stack.pop() {
            match c {
                Child::Leaf(i) => out.push(i),
                Child::Node(id) => {
                    stack.push(self.nodes[id].right);
                    stack.push(self.nodes[id].left);
                }
            }
        }
        out
    }

    /// Balanced tree over `order`: the first half of each group goes left.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let mut b = Builder::default();
        if order.is_empty() {
            return Err(Error::EmptyTree);
        }
        let root = b.balanced(order);
        b.finish(root)
    }

    /// Random full binary tree over `leaves` (random arrangement and
    /// random split sizes). Used for exercising order-independent
    /// properties of pivotal sampling.
    pub fn random<R: Rng>(leaves: &[usize], rng: &mut R) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::EmptyTree);
        }
        let mut order = leaves.to_vec();
        order.shuffle(rng);
        let mut b = Builder::default();
        let root = b.random(&order, rng);
        b.finish(root)
    }

    /// Nested `{ "left": …, "right": … }` form with integer leaves.
    pub fn to_json(&self) -> Value {
        fn go(t: &CompetitionTree, c: Child) -> Value {
            match c {
                Child::Leaf(i) => json!(i),
                Child::Node(id) => {
                    let n = t.nodes[id];
                    json!({ "left": go(t, n.left), "right": go(t, n.right) })
                }
            }
        }
        go(self, self.root)
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        fn go(b: &mut Builder, v: &Value) -> Result<Child> {
            if let Some(i) = v.as_u64() {
                return Ok(b.leaf(i as usize));
            }
            let obj = v
                .as_object()
                .ok_or_else(|| Error::Parse(format!("bad tree node: {v}")))?;
            let (Some(l), Some(r)) = (obj.get("left"), obj.get("right")) else {
                return Err(Error::Parse("tree node needs left and right".into()));
            };
            let left = go(b, l)?;
            let right = go(b, r)?;
            Ok(b.node(left, right))
        }
        let mut b = Builder::default();
        let root = go(&mut b, v)?;
        b.finish(root)
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Node>,
    leaves: Vec<usize>,
}

impl Builder {
    fn leaf(&mut self, i: usize) -> Child {
        self.leaves.push(i);
        Child::Leaf(i)
    }

    fn node(&mut self, left: Child, right: Child) -> Child {
        self.nodes.push(Node { left, right });
        Child::Node(self.nodes.len() - 1)
    }

    fn balanced(&mut self, order: &[usize]) -> Child {
        if order.len() == 1 {
            return self.leaf(order[0]);
        }
        let (l, r) = order.split_at(order.len() / 2);
        let left = self.balanced(l);
        let right = self.balanced(r);
        self.node(left, right)
    }

    fn random<R: Rng>(&mut self, order: &[usize], rng: &mut R) -> Child {
        if order.len() == 1 {
            return self.leaf(order[0]);
        }
        let cut = rng.random_range(1..order.len());
        let (l, r) = order.split_at(cut);
        let left = self.random(l, rng);
        let right = self.random(r, rng);
        self.node(left, right)
    }

    fn finish(mut self, root: Child) -> Result<CompetitionTree> {
        let unique: BTreeSet<usize> = self.leaves.iter().copied().collect();
        if unique.len() != self.leaves.len() {
            return Err(Error::BadInput("tree contains a repeated leaf".into()));
        }
        self.leaves.sort_unstable();
        Ok(CompetitionTree {
            nodes: self.nodes,
            leaves: self.leaves,
            root,
        })
    }
}

/// Builds the competition tree over `{i : probs[i] < 1}` from coordinates `x`.
pub fn build_tree(
    x: &DenseMatrix,
    probs: &InclusionProbabilities,
    method: SplitMethod,
) -> Result<CompetitionTree> {
    if x.rows() != probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coordinate rows but {} probabilities",
            x.rows(),
            probs.len()
        )));
    }
    let active: Vec<usize> = probs.uncertain().collect();
    if active.is_empty() {
        return Err(Error::EmptyTree);
    }
    let mut b = Builder::default();
    let root = split(x, active, 0, method, &mut b);
    b.finish(root)
}

fn split(x: &DenseMatrix, group: Vec<usize>, depth: usize, method: SplitMethod, b: &mut Builder) -> Child {
    if group.len() == 1 {
        return b.leaf(group[0]);
    }
    let keys: Vec<f64> = match method {
        SplitMethod::Coordinate => {
            let col = depth % x.cols();
            group.iter().map(|&i| x.get(i, col)).collect()
        }
        SplitMethod::Pca => {
            let dir = principal_direction(x, &group);
            group
                .iter()
                .map(|&i| x.row(i).iter().zip(&dir).map(|(a, d)| a * d).sum())
                .collect()
        }
    };
    let mut order: Vec<(f64, usize)> = keys.into_iter().zip(group).collect();
    order.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    let mut sorted: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();
    let right_half = sorted.split_off(sorted.len() / 2);
    let left = split(x, sorted, depth + 1, method, b);
    let right = split(x, right_half, depth + 1, method, b);
    b.node(left, right)
}

const TIE_REL: f64 = 1e-12;

/// Top eigenvector of the (divisor-|K|) covariance of the group's points,
/// oriented so its first nonzero component is positive.
fn principal_direction(x: &DenseMatrix, group: &[usize]) -> Vec<f64> {
    let d = x.cols();
    let m = group.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in group {
        for (mu, v) in mean.iter_mut().zip(x.row(i)) {
            *mu += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut cov = vec![0.0; d * d];
    for &i in group {
        let r = x.row(i);
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in a..d {
                cov[a * d + b] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a * d + b] /= m;
            cov[b * d + a] = cov[a * d + b];
        }
    }

    let mut dir = if d <= 3 {
        let (vals, vecs) = jacobi_eigen(&cov, d);
        let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cutoff = top - TIE_REL * top.abs();
        (0..d)
            .filter(|&c| vals[c] >= cutoff)
            .map(|c| (0..d).map(|r| vecs[r * d + c]).collect::<Vec<f64>>())
            .min_by_key(|v| dominant_index(v))
            .expect("at least one eigenvector")
    } else {
        power_direction(&cov, d)
    };
    if let Some(&first) = dir.iter().find(|v| v.abs() > 1e-12) {
        if first < 0.0 {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
    }
    dir
}

fn dominant_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    best
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
/// Returns eigenvalues and row-major eigenvectors stored as columns.
fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

fn power_direction(cov: &[f64], d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    // shift keeps the iteration on the largest (not largest-magnitude) eigenvalue
    let shift: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    for _ in 0..2000 {
        let mut w: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| cov[i * d + j] * v[j]).sum::<f64>() + shift * v[i])
            .collect();
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            break;
        }
        w.iter_mut().for_each(|x| *x /= nrm);
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if delta < 1e-14 {
            break;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_probs(n: usize) -> InclusionProbabilities {
        InclusionProbabilities::uniform(n, n / 2).unwrap()
    }

    #[test]
    fn collinear_points_split_at_median() {
        let x = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let t = build_tree(&x, &half_probs(4), SplitMethod::Coordinate).unwrap();
        let root = t.nodes()[t.nodes().len() - 1];
        assert_eq!(t.subtree_leaves(root.left), vec![0, 1]);
        assert_eq!(t.subtree_leaves(root.right), vec![2, 3]);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn pca_grid_first_split_is_along_first_axis() {
        let x = DenseMatrix::from_fn(16, 2, |i, j| if j == 0 { (i / 4) as f64 } else { (i % 4) as f64 }).unwrap();
        let t = build_tree(&x, &half_probs(16), SplitMethod::Pca).unwrap();
        let Child::Node(root) = t.root() else { panic!() };
        let left = t.subtree_leaves(t.nodes()[root].left);
        assert_eq!(left.len(), 8);
        assert!(left.iter().all(|&i| x.get(i, 0) <= 1.0));
    }

    #[test]
    fn odd_group_puts_extra_point_right() {
        let x = DenseMatrix::new(5, 1, vec![4.0, 3.0, 2.0, 1.0, 0.0]).unwrap();
        let p = InclusionProbabilities::new(vec![0.4; 5]).unwrap();
        let t = build_tree(&x, &p, SplitMethod::Pca).unwrap();
        let Child::Node(root) = t.root() else { panic!() };
        assert_eq!(t.subtree_leaves(t.nodes()[root].left).len(), 2);
        assert_eq!(t.subtree_leaves(t.nodes()[root].right).len(), 3);
    }

    #[test]
    fn certain_indices_are_excluded() {
        let x = DenseMatrix::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let p = InclusionProbabilities::new(vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let t = build_tree(&x, &p, SplitMethod::Pca).unwrap();
        assert_eq!(t.leaves(), &[1, 2]);
        let all = InclusionProbabilities::new(vec![1.0; 3]).unwrap();
        let x3 = DenseMatrix::new(3, 1, vec![0.0; 3]).unwrap();
        assert_eq!(build_tree(&x3, &all, SplitMethod::Pca), Err(Error::EmptyTree));
        assert!(matches!(
            build_tree(&x3, &p, SplitMethod::Pca),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn check_balance(t: &CompetitionTree) {
        for n in t.nodes() {
            let l = t.subtree_leaves(n.left).len() as i64;
            let r = t.subtree_leaves(n.right).len() as i64;
            assert!((l - r).abs() <= 1);
        }
    }

    #[test]
    fn random_clouds_give_balanced_shallow_deterministic_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (n, d) in [(37, 2), (64, 3), (100, 5)] {
            let x = DenseMatrix::from_fn(n, d, |_, _| rng.random::<f64>()).unwrap();
            for method in [SplitMethod::Pca, SplitMethod::Coordinate] {
                let t = build_tree(&x, &half_probs(n), method).unwrap();
                check_balance(&t);
                assert_eq!(t.leaves(), (0..n).collect::<Vec<_>>().as_slice());
                let bound = (n as f64).log2().ceil() as usize + 1;
                assert!(t.depth() <= bound);
                let again = build_tree(&x, &half_probs(n), method).unwrap();
                assert_eq!(t.to_json().to_string(), again.to_json().to_string());
            }
        }
    }

    #[test]
    fn pca_on_a_line_gives_contiguous_subtrees() {
        let n = 23;
        let x = DenseMatrix::from_fn(n, 2, |i, j| {
            let s = ((i * 7) % n) as f64;
            if j == 0 { s } else { 0.5 * s + 1.0 }
        })
        .unwrap();
        let t = build_tree(&x, &half_probs(n), SplitMethod::Pca).unwrap();
        for id in 0..t.nodes().len() {
            let mut pos: Vec<f64> = t
                .subtree_leaves(Child::Node(id))
                .iter()
                .map(|&i| x.get(i, 0))
                .collect();
            pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(pos.last().unwrap() - pos[0], (pos.len() - 1) as f64);
        }
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = CompetitionTree::random(&[3, 5, 8, 9, 11], &mut rng).unwrap();
        let back = CompetitionTree::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        let dup = serde_json::json!({"left": 1, "right": 1});
        assert!(CompetitionTree::from_json(&dup).is_err());
    }

    #[test]
    fn jacobi_recovers_known_eigenpairs() {
        let (vals, vecs) = jacobi_eigen(&[2.0, 1.0, 1.0, 2.0], 2);
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((sorted[0] - 1.0).abs() < 1e-14 && (sorted[1] - 3.0).abs() < 1e-14);
        let top = if vals[0] > vals[1] { 0 } else { 1 };
        assert!((vecs[top].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }
}
