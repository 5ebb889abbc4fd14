//! Finite prelaminates: binary trees of barycentric rank-one splits.
//!
//! Nodes live in a flat arena (index 0 is the root) so that deep staircases
//! serialize without recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMat2;
use crate::measures::{lambda_eps, mu_eps, AtomicMeasure, CompositeLaminate, Family, Piece};
use crate::params::Params;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NodeKind {
    Leaf,
    /// `matrix = weight * first + (1 - weight) * second`. `axis` names the
    /// diagonal entry in which the children differ, when they differ in
    /// exactly one diagonal entry.
    Split { weight: f64, axis: Option<usize>, first: usize, second: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub matrix: SymMat2,
    #[serde(flatten)]
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrelaminateTree {
    nodes: Vec<TreeNode>,
}

fn split_axis(b: &SymMat2, c: &SymMat2) -> Option<usize> {
    if b.a12 != 0.0 || c.a12 != 0.0 {
        return None;
    }
    match (b.a11 != c.a11, b.a22 != c.a22) {
        (true, false) => Some(0),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Summary of the check performed by [`PrelaminateTree::validate`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TreeCertificate {
    pub splits: usize,
    pub leaves: usize,
    pub depth: usize,
    pub max_barycenter_defect: f64,
    /// Largest `|det(B - C)|`; exactly zero for axis-aligned diagonal trees.
    pub max_abs_det: f64,
}

impl PrelaminateTree {
    pub fn leaf(a: SymMat2) -> Self {
        Self { nodes: vec![TreeNode { matrix: a, kind: NodeKind::Leaf }] }
    }

    pub fn root(&self) -> SymMat2 {
        self.nodes[0].matrix
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    /// Replaces leaf `at` by a split into two new leaves; returns their
    /// indices.
    pub fn split(&mut self, at: usize, weight: f64, first: SymMat2, second: SymMat2) -> Result<(usize, usize)> {
        if !matches!(self.nodes.get(at).map(|n| &n.kind), Some(NodeKind::Leaf)) {
            return Err(Error::InvalidParameter(format!("node {at} is not a leaf")));
        }
        if !(weight > 0.0 && weight < 1.0) {
            return Err(Error::InvalidParameter(format!("split weight {weight} outside (0, 1)")));
        }
        let b = self.nodes.len();
        self.nodes.push(TreeNode { matrix: first, kind: NodeKind::Leaf });
        self.nodes.push(TreeNode { matrix: second, kind: NodeKind::Leaf });
        self.nodes[at].kind =
            NodeKind::Split { weight, axis: split_axis(&first, &second), first: b, second: b + 1 };
        Ok((b, b + 1))
    }

    /// Replaces leaf `at` by a copy of `sub`, whose root must equal the leaf.
    pub fn graft(&mut self, at: usize, sub: &PrelaminateTree) -> Result<()> {
        if !matches!(self.nodes.get(at).map(|n| &n.kind), Some(NodeKind::Leaf)) {
            return Err(Error::InvalidParameter(format!("node {at} is not a leaf")));
        }
        if (self.nodes[at].matrix - sub.root()).frobenius() > 1e-12 {
            return Err(Error::InvalidParameter("graft root differs from the leaf".into()));
        }
        let offset = self.nodes.len() - 1;
        let remap = |i: usize| if i == 0 { at } else { i + offset };
        for (i, n) in sub.nodes.iter().enumerate() {
            let kind = match n.kind {
                NodeKind::Leaf => NodeKind::Leaf,
                NodeKind::Split { weight, axis, first, second } => {
                    NodeKind::Split { weight, axis, first: remap(first), second: remap(second) }
                }
            };
            let node = TreeNode { matrix: n.matrix, kind };
            if i == 0 {
                self.nodes[at] = node;
            } else {
                self.nodes.push(node);
            }
        }
        Ok(())
    }

    /// Leaves with their path weights, in depth-first order.
    pub fn leaves(&self) -> Vec<(f64, SymMat2)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((i, w)) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Leaf => out.push((w, self.nodes[i].matrix)),
                NodeKind::Split { weight, first, second, .. } => {
                    stack.push((second, w * (1.0 - weight)));
                    stack.push((first, w * weight));
                }
            }
        }
        out
    }

    /// Order of the prelaminate: the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Leaf => best = best.max(d),
                NodeKind::Split { first, second, .. } => {
                    stack.push((first, d + 1));
                    stack.push((second, d + 1));
                }
            }
        }
        best
    }

    pub fn validate(&self, tol: f64) -> Result<TreeCertificate> {
        let mut cert =
            TreeCertificate { splits: 0, leaves: 0, depth: self.depth(), max_barycenter_defect: 0.0, max_abs_det: 0.0 };
        for n in &self.nodes {
            match n.kind {
                NodeKind::Leaf => cert.leaves += 1,
                NodeKind::Split { weight, first, second, .. } => {
                    cert.splits += 1;
                    let (b, c) = (self.nodes[first].matrix, self.nodes[second].matrix);
                    let defect = (weight * b + (1.0 - weight) * c - n.matrix).frobenius();
                    let scale = 1.0 + n.matrix.frobenius();
                    if defect > tol * scale {
                        return Err(Error::InvalidParameter(format!(
                            "split at {:?} is not barycentric (defect {defect:e})",
                            n.matrix
                        )));
                    }
                    let d = b - c;
                    if d.det().abs() > tol * d.frobenius().powi(2) {
                        return Err(Error::NotRankOne(d.det()));
                    }
                    cert.max_barycenter_defect = cert.max_barycenter_defect.max(defect / scale);
                    cert.max_abs_det = cert.max_abs_det.max(d.det().abs());
                }
            }
        }
        Ok(cert)
    }

    /// Smallest box `[a_lo, a_hi] x [b_lo, b_hi]` containing the diagonals of
    /// all leaves.
    pub fn support_box(&self) -> [f64; 4] {
        self.leaves().iter().fold(
            [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
            |b, (_, a)| [b[0].min(a.a11), b[1].max(a.a11), b[2].min(a.a22), b[3].max(a.a22)],
        )
    }

    /// Index of the first leaf (depth-first) whose matrix equals `a`.
    pub fn find_leaf(&self, a: &SymMat2) -> Option<usize> {
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Leaf if self.nodes[i].matrix == *a => return Some(i),
                NodeKind::Leaf => {}
                NodeKind::Split { first, second, .. } => {
                    stack.push(second);
                    stack.push(first);
                }
            }
        }
        None
    }
}

/// `0 = 1/2 diag(0,1) + 1/2 diag(0,-1)`, then
/// `diag(0,1) = 1/2 diag(1,1) + 1/2 diag(-1,1)`.
pub fn example_prelaminate() -> PrelaminateTree {
    let mut t = PrelaminateTree::leaf(SymMat2::ZERO);
    let (top, _) = t.split(0, 0.5, SymMat2::diag(0.0, 1.0), SymMat2::diag(0.0, -1.0)).unwrap();
    t.split(top, 0.5, SymMat2::diag(1.0, 1.0), SymMat2::diag(-1.0, 1.0)).unwrap();
    t
}

/// Staircase approximation of the continuous laminate on the grid
/// `t_i = N^{i/M}`. Root `diag(s, 1)`, one leaf per split plus the terminal
/// atom `diag(s N, N)`.
pub fn build_staircase(params: &Params, n: f64, steps: usize, family: Family) -> Result<PrelaminateTree> {
    if steps < 1 {
        return Err(Error::InvalidParameter("staircase needs at least one step".into()));
    }
    if !(n.is_finite() && n > 1.0) {
        return Err(Error::InvalidParameter(format!("N must be > 1, got {n}")));
    }
    let k = params.k_lam;
    let s = family.sign();
    let grid: Vec<f64> =
        (0..=steps).map(|i| if i == steps { n } else { n.powf(i as f64 / steps as f64) }).collect();
    let mut tree = PrelaminateTree::leaf(SymMat2::diag(s, 1.0));
    let mut at = 0;
    let mut path = 1.0f64;
    for i in 0..steps {
        let (t, t1) = (grid[i], grid[i + 1]);
        let eps = t1 - t;
        let l = lambda_eps(k, t, eps);
        let m = mu_eps(k, t, eps);
        for w in [l, m, 1.0 - l, 1.0 - m] {
            if !(w.is_normal() && w > 0.0) {
                return Err(Error::Underflow { stage: i, weight: w });
            }
        }
        let (mid, _) = tree.split(at, l, SymMat2::diag(s * t, t1), SymMat2::diag(s * t, k * t))?;
        let (next, _) = tree.split(mid, m, SymMat2::diag(s * t1, t1), SymMat2::diag(s * k * t1, t1))?;
        let shed = path * l * (1.0 - m);
        path *= l * m;
        if !(path.is_normal() && shed.is_normal()) {
            return Err(Error::Underflow { stage: i, weight: path.min(shed) });
        }
        at = next;
    }
    Ok(tree)
}

pub fn leaf_measure(tree: &PrelaminateTree) -> Result<AtomicMeasure> {
    AtomicMeasure::new(tree.leaves())
}

/// `weight * leaves(tree) + sum of extra atoms`; all weights must sum to 1.
pub fn compose(weight: f64, tree: &PrelaminateTree, extra: &[(f64, SymMat2)]) -> Result<CompositeLaminate> {
    let mut pieces = vec![(weight, Piece::Atomic(leaf_measure(tree)?))];
    for &(w, a) in extra {
        pieces.push((w, Piece::Atomic(AtomicMeasure::dirac(a))));
    }
    CompositeLaminate::new(pieces)
}

/// The completion of a staircase to barycenter zero:
/// `1/4 tree + 1/4 δ_diag(-s,1) + 1/2 δ_diag(0,-1)`.
pub fn nu_recipe(tree: &PrelaminateTree, family: Family) -> Result<CompositeLaminate> {
    let s = family.sign();
    compose(0.25, tree, &[(0.25, SymMat2::diag(-s, 1.0)), (0.5, SymMat2::diag(0.0, -1.0))])
}

/// The example prelaminate with the leaf `diag(s, 1)` replaced by the
/// staircase: one tree with barycenter zero whose leaves are those of
/// [`nu_recipe`].
pub fn nu_tree(params: &Params, n: f64, steps: usize, family: Family) -> Result<PrelaminateTree> {
    let stair = build_staircase(params, n, steps, family)?;
    let mut t = example_prelaminate();
    let at = t
        .find_leaf(&stair.root())
        .ok_or_else(|| Error::InvalidParameter("no leaf matches the staircase root".into()))?;
    t.graft(at, &stair)?;
    Ok(t)
}
