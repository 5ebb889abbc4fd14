//! Grid functions whose Hessians are distributed like a diagonal
//! prelaminate.
//!
//! A split of `A` along axis `s` into `B` (weight λ) and `C` over the
//! rectangle `R` adds `χ(x_t) g(x_s)` to `u`, where `g` is `K`-periodic with
//! `g''` piecewise constant on the symmetric pattern `outer | inner | outer`
//! (widths `w_o P/2, w_m P, w_o P/2`), so that `g` and `g'` vanish at both
//! ends of every period. `χ` is a quintic smoothstep cutoff in the
//! transverse variable. Children are realized on the pieces of the pattern.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction2D;
use crate::matrix::SymMat2;
use crate::measures::{phi1, phi2, AtomicMeasure};
use crate::params::Params;
use crate::staircase::{NodeKind, PrelaminateTree};

/// Number of zero rows guaranteed at the edge of the grid.
const FRAME_CELLS: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizeConfig {
    pub n: usize,
    pub half_width: f64,
    /// Radius of the balls around the atoms used for the fraction report.
    pub r: f64,
    /// Budget for `max|u| + max|∇u|`.
    pub delta: f64,
    /// Cutoff layers take this fraction of the transverse extent of each
    /// node's rectangle (subject to `min_margin_cells`).
    pub layer_fraction: f64,
    pub min_piece_cells: f64,
    pub min_margin_cells: f64,
    /// Lower bound for the cutoff layer width in units of the period, which
    /// keeps `χ'' g` comparable to the curvature jumps.
    pub margin_per_period: f64,
    /// One pass of the 3x3 binomial smoothing stencil.
    pub mollify: bool,
    /// Cut the tree at the deepest level that fits the grid instead of
    /// failing.
    pub truncate: bool,
}

impl Default for RealizeConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            half_width: 1.0,
            r: 0.2,
            delta: 0.05,
            layer_fraction: 0.03,
            min_piece_cells: 16.0,
            min_margin_cells: 3.0,
            margin_per_period: 0.0,
            mollify: false,
            truncate: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealizeReport {
    /// Depth of the tree that was realized.
    pub depth: usize,
    pub original_depth: usize,
    /// Leaf mass of the original tree lying below the truncation level.
    pub truncated_mass: f64,
    pub max_abs: f64,
    pub max_gradient: f64,
    /// Smallest grid size for which the full tree fits.
    pub required_n: usize,
}

#[derive(Clone, Debug)]
pub struct Realization {
    pub u: GridFunction2D,
    /// The tree actually realized (the input, unless truncated).
    pub tree: PrelaminateTree,
    pub report: RealizeReport,
}

fn smoothstep(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        1.0
    } else {
        z * z * z * (10.0 + z * (-15.0 + 6.0 * z))
    }
}

fn entry(a: &SymMat2, axis: usize) -> f64 {
    if axis == 0 {
        a.a11
    } else {
        a.a22
    }
}

/// `g` on one period `[0, P)` for the pattern `d_o | d_m | d_o` with break
/// points `a < b`.
#[derive(Clone, Copy, Debug)]
struct Profile {
    period: f64,
    a: f64,
    b: f64,
    d_outer: f64,
    d_inner: f64,
}

impl Profile {
    fn eval(&self, tau: f64) -> f64 {
        let (a, b, dout, din) = (self.a, self.b, self.d_outer, self.d_inner);
        if tau < a {
            return 0.5 * dout * tau * tau;
        }
        let ga = 0.5 * dout * a * a;
        let sa = dout * a;
        if tau < b {
            let s = tau - a;
            return ga + sa * s + 0.5 * din * s * s;
        }
        let w = b - a;
        let gb = ga + sa * w + 0.5 * din * w * w;
        let sb = sa + din * w;
        let s = tau - b;
        gb + sb * s + 0.5 * dout * s * s
    }
}

#[derive(Clone, Copy, Debug)]
struct Need {
    along: f64,
    trans: f64,
}

struct Planner<'a> {
    tree: &'a PrelaminateTree,
    cfg: &'a RealizeConfig,
    h: f64,
    needs: Vec<Option<Need>>,
}

impl<'a> Planner<'a> {
    fn new(tree: &'a PrelaminateTree, cfg: &'a RealizeConfig, h: f64) -> Result<Self> {
        let mut p = Self { tree, cfg, h, needs: vec![None; tree.nodes().len()] };
        let mut order = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            order.push(i);
            if let NodeKind::Split { first, second, .. } = tree.node(i).kind {
                stack.push(first);
                stack.push(second);
            }
        }
        for &i in order.iter().rev() {
            p.needs[i] = p.compute(i)?;
        }
        Ok(p)
    }

    fn axis(&self, i: usize) -> Result<Option<usize>> {
        let node = self.tree.node(i);
        match node.kind {
            NodeKind::Leaf => {
                if !node.matrix.is_diagonal() {
                    return Err(Error::NonDiagonal(format!("{:?}", node.matrix)));
                }
                Ok(None)
            }
            NodeKind::Split { axis, .. } => match axis {
                Some(a) if node.matrix.is_diagonal() => Ok(Some(a)),
                _ => Err(Error::NonDiagonal(format!("split of {:?} is not axis-aligned", node.matrix))),
            },
        }
    }

    /// Width the child `c` of a node splitting along `s` needs along `s`.
    fn child_width(&self, c: usize, s: usize) -> Result<f64> {
        Ok(match (self.axis(c)?, self.needs[c]) {
            (None, _) => self.cfg.min_piece_cells * self.h,
            (Some(a), Some(nd)) if a == s => nd.along,
            (Some(_), Some(nd)) => nd.trans,
            _ => unreachable!("children are planned first"),
        })
    }

    /// Width the child needs across `s`.
    fn child_span(&self, c: usize, s: usize) -> Result<f64> {
        Ok(match (self.axis(c)?, self.needs[c]) {
            (None, _) => 0.0,
            (Some(a), Some(nd)) if a == s => nd.trans,
            (Some(_), Some(nd)) => nd.along,
            _ => unreachable!("children are planned first"),
        })
    }

    /// Which child sits in the middle of each period: the one with the
    /// larger demand.
    fn arrangement(&self, i: usize) -> Result<(usize, usize, f64)> {
        let NodeKind::Split { weight, first, second, .. } = self.tree.node(i).kind else {
            unreachable!()
        };
        let s = self.axis(i)?.unwrap();
        let (wf, ws) = (self.child_width(first, s)?, self.child_width(second, s)?);
        let deep = |c: usize| self.tree.node(c).kind != NodeKind::Leaf;
        let first_inner = (deep(first), wf) >= (deep(second), ws);
        Ok(if first_inner { (first, second, weight) } else { (second, first, 1.0 - weight) })
    }

    fn min_period(&self, i: usize) -> Result<f64> {
        let s = self.axis(i)?.unwrap();
        let (inner, outer, wm) = self.arrangement(i)?;
        let wo = 1.0 - wm;
        Ok((self.child_width(inner, s)? / wm).max(2.0 * self.child_width(outer, s)? / wo))
    }

    fn compute(&self, i: usize) -> Result<Option<Need>> {
        let Some(s) = self.axis(i)? else { return Ok(None) };
        let NodeKind::Split { first, second, .. } = self.tree.node(i).kind else { unreachable!() };
        let along = self.min_period(i)?;
        let margin = (self.cfg.min_margin_cells * self.h).max(2.0 * self.cfg.margin_per_period * along);
        let trans = (2.0 * margin / self.cfg.layer_fraction)
            .max(self.child_span(first, s)?)
            .max(self.child_span(second, s)?);
        Ok(Some(Need { along, trans }))
    }

    fn need(&self, i: usize) -> Option<Need> {
        self.needs[i]
    }
}

/// Copy of `tree` with every node at `depth` turned into a leaf.
pub fn truncate_tree(tree: &PrelaminateTree, depth: usize) -> Result<(PrelaminateTree, f64)> {
    let mut out = PrelaminateTree::leaf(tree.root());
    let mut cut_mass = 0.0;
    let mut stack = vec![(0usize, 0usize, 0usize, 1.0f64)];
    while let Some((src, dst, d, w)) = stack.pop() {
        if let NodeKind::Split { weight, first, second, .. } = tree.node(src).kind {
            if d == depth {
                cut_mass += w;
                continue;
            }
            let (b, c) = out.split(dst, weight, tree.node(first).matrix, tree.node(second).matrix)?;
            stack.push((first, b, d + 1, w * weight));
            stack.push((second, c, d + 1, w * (1.0 - weight)));
        }
    }
    Ok((out, cut_mass))
}

/// Rectangle `[lo0, hi0] x [lo1, hi1]`.
type Rect = [f64; 4];

fn add_term(u: &mut GridFunction2D, rect: Rect, s: usize, margin: f64, k: usize, prof: Profile) {
    let n = u.n();
    let h = u.h();
    let l = u.half_width();
    let (slo, shi) = (rect[2 * s], rect[2 * s + 1]);
    let t = 1 - s;
    let (tlo, thi) = (rect[2 * t], rect[2 * t + 1]);
    let idx = |x: f64| ((x + l) / h).ceil().max(0.0) as usize;
    let idx_hi = |x: f64| (((x + l) / h).floor() as usize).min(n - 1);
    let (i0, i1) = (idx(rect[0]), idx_hi(rect[1]));
    let (j0, j1) = (idx(rect[2]), idx_hi(rect[3]));
    if i0 > i1 || j0 > j1 {
        return;
    }
    let period = prof.period;
    let g = |x: f64| {
        let off = (x - slo).max(0.0);
        let m = ((off / period).floor() as usize).min(k - 1);
        if x > shi {
            0.0
        } else {
            prof.eval(off - m as f64 * period)
        }
    };
    let chi = |x: f64| smoothstep((x - tlo) / margin) * smoothstep((thi - x) / margin);
    u.values_mut().par_chunks_mut(n).enumerate().skip(i0).take(i1 - i0 + 1).for_each(|(i, row)| {
        let x1 = -l + i as f64 * h;
        for (j, v) in row.iter_mut().enumerate().take(j1 + 1).skip(j0) {
            let x2 = -l + j as f64 * h;
            let (xs, xt) = if s == 0 { (x1, x2) } else { (x2, x1) };
            *v += chi(xt) * g(xs);
        }
    });
}

fn build(tree: &PrelaminateTree, planner: &Planner, cfg: &RealizeConfig, u: &mut GridFunction2D, root: Rect) -> Result<()> {
    let h = u.h();
    let mut stack = vec![(0usize, root)];
    while let Some((i, rect)) = stack.pop() {
        let Some(s) = planner.axis(i)? else { continue };
        let node = tree.node(i);
        let (inner, outer, wm) = planner.arrangement(i)?;
        let wo = 1.0 - wm;
        let t = 1 - s;
        let len = rect[2 * s + 1] - rect[2 * s];
        let span = rect[2 * t + 1] - rect[2 * t];
        let pmin = planner.min_period(i)?;
        let k = (len / pmin).floor() as usize;
        if k == 0 {
            return Err(Error::Realization(format!("node {i} needs length {pmin:.3e} along axis {s}, has {len:.3e}")));
        }
        let period = len / k as f64;
        let a = 0.5 * wo * period;
        let b = a + wm * period;
        let a_here = entry(&node.matrix, s);
        let prof = Profile {
            period,
            a,
            b,
            d_outer: entry(&tree.node(outer).matrix, s) - a_here,
            d_inner: entry(&tree.node(inner).matrix, s) - a_here,
        };
        let margin = (cfg.min_margin_cells * h)
            .max(0.5 * cfg.layer_fraction * span)
            .max(cfg.margin_per_period * period)
            .min(0.5 * span);
        add_term(u, rect, s, margin, k, prof);
        let lo = rect[2 * s];
        let with_s = |x0: f64, x1: f64| {
            let mut r = rect;
            r[2 * s] = x0;
            r[2 * s + 1] = x1;
            r
        };
        for m in 0..k {
            let base = lo + m as f64 * period;
            stack.push((inner, with_s(base + a, base + b)));
            let start = if m == 0 { base } else { base - a };
            stack.push((outer, with_s(start, base + a)));
        }
        stack.push((outer, with_s(lo + len - a, lo + len)));
    }
    Ok(())
}

fn mollify(u: &mut GridFunction2D) {
    let n = u.n();
    let src = u.values().to_vec();
    let w = [1.0, 2.0, 1.0];
    u.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        if i == 0 || i + 1 == n {
            return;
        }
        for j in 1..n - 1 {
            let mut acc = 0.0;
            for (di, wi) in w.iter().enumerate() {
                for (dj, wj) in w.iter().enumerate() {
                    acc += wi * wj * src[(i + di - 1) * n + j + dj - 1];
                }
            }
            row[j] = acc / 16.0;
        }
    });
}

/// Smallest grid for which `tree` fits with this configuration.
fn required_n(tree: &PrelaminateTree, cfg: &RealizeConfig) -> Result<usize> {
    let mut n = cfg.n.max(32);
    for _ in 0..40 {
        let h = 2.0 * cfg.half_width / (n - 1) as f64;
        if fits(tree, cfg, h)? {
            return Ok(n);
        }
        n *= 2;
    }
    Ok(usize::MAX)
}

fn root_rect(tree: &PrelaminateTree, cfg: &RealizeConfig, h: f64) -> Rect {
    let mut inset = FRAME_CELLS * h;
    if tree.root() != SymMat2::ZERO {
        inset += (cfg.min_margin_cells * h).max(cfg.layer_fraction * cfg.half_width);
    }
    let e = cfg.half_width - inset;
    [-e, e, -e, e]
}

fn fits(tree: &PrelaminateTree, cfg: &RealizeConfig, h: f64) -> Result<bool> {
    let planner = Planner::new(tree, cfg, h)?;
    let rect = root_rect(tree, cfg, h);
    let side = rect[1] - rect[0];
    Ok(planner.need(0).map_or(side > 0.0, |nd| nd.along <= side && nd.trans <= side))
}

/// Builds `u` on `[-L, L]^2` whose Hessian takes the values of the leaves
/// of `tree` on sets of area close to their weights.
pub fn realize(tree: &PrelaminateTree, cfg: &RealizeConfig) -> Result<Realization> {
    if !(cfg.r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be positive, got {}", cfg.r)));
    }
    if !(cfg.layer_fraction > 0.0 && cfg.layer_fraction <= 0.2) {
        return Err(Error::InvalidParameter(format!("layer fraction {} outside (0, 0.2]", cfg.layer_fraction)));
    }
    let scale = 1.0 + tree.leaves().iter().fold(0.0f64, |m, (_, a)| m.max(a.frobenius()));
    let r_min = 1e-8 * scale;
    if cfg.r < r_min {
        return Err(Error::Realization(format!("r = {} below the resolvable minimum {r_min:.1e}", cfg.r)));
    }
    let mut u = GridFunction2D::zeros(cfg.n, cfg.half_width)?;
    let h = u.h();
    Planner::new(tree, cfg, h)?;
    let original_depth = tree.depth();
    let req_n = required_n(tree, cfg)?;
    let (work, truncated_mass) = if fits(tree, cfg, h)? {
        (tree.clone(), 0.0)
    } else if cfg.truncate {
        let mut d = original_depth;
        loop {
            d = d.saturating_sub(1);
            let (t, m) = truncate_tree(tree, d)?;
            if fits(&t, cfg, h)? {
                break (t, m);
            }
        }
    } else {
        return Err(Error::Realization(format!(
            "tree of depth {original_depth} does not fit an n = {} grid; needs n >= {req_n}",
            cfg.n
        )));
    };
    let rect = root_rect(&work, cfg, h);
    let a0 = work.root();
    if a0 != SymMat2::ZERO {
        let l = cfg.half_width;
        let inner = l - FRAME_CELLS * h;
        let collar = inner - rect[1];
        let cut = |x: f64| smoothstep((inner - x.abs()) / collar);
        let n = cfg.n;
        u.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let x1 = -l + i as f64 * h;
            for (j, v) in row.iter_mut().enumerate() {
                let x2 = -l + j as f64 * h;
                *v += cut(x1) * cut(x2) * 0.5 * (a0.a11 * x1 * x1 + 2.0 * a0.a12 * x1 * x2 + a0.a22 * x2 * x2);
            }
        });
    }
    let planner = Planner::new(&work, cfg, h)?;
    build(&work, &planner, cfg, &mut u, rect)?;
    if cfg.mollify {
        mollify(&mut u);
    }
    u.boundary_flag = u.vanishes_on_frame(2);
    let max_abs = u.max_abs();
    let max_gradient = u.max_gradient();
    if max_abs + max_gradient > cfg.delta {
        return Err(Error::DeltaInfeasible { requested: cfg.delta, attainable: max_abs + max_gradient });
    }
    Ok(Realization {
        u,
        report: RealizeReport {
            depth: work.depth(),
            original_depth,
            truncated_mass,
            max_abs,
            max_gradient,
            required_n: req_n,
        },
        tree: work,
    })
}

/// Centered second differences at the interior points, row-major over
/// `(n-2)^2` points.
#[derive(Clone, Debug)]
pub struct HessianSample {
    pub n: usize,
    pub h: f64,
    pub entries: Vec<SymMat2>,
}

impl HessianSample {
    pub fn at(&self, i: usize, j: usize) -> SymMat2 {
        self.entries[(i - 1) * (self.n - 2) + (j - 1)]
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }
}

pub fn hessian(u: &GridFunction2D) -> HessianSample {
    let n = u.n();
    let h = u.h();
    let h2 = h * h;
    let entries: Vec<SymMat2> = (1..n - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            (1..n - 1).map(move |j| {
                let c = u.get(i, j);
                let d11 = (u.get(i + 1, j) - 2.0 * c + u.get(i - 1, j)) / h2;
                let d22 = (u.get(i, j + 1) - 2.0 * c + u.get(i, j - 1)) / h2;
                let d12 = (u.get(i + 1, j + 1) - u.get(i + 1, j - 1) - u.get(i - 1, j + 1) + u.get(i - 1, j - 1))
                    / (4.0 * h2);
                SymMat2::new(d11, d12, d22)
            })
        })
        .collect();
    HessianSample { n, h, entries }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PushforwardMoments {
    pub phi1: f64,
    pub phi2: f64,
    pub ratio: f64,
}

pub fn pushforward_moments(hs: &HessianSample, params: &Params) -> Result<PushforwardMoments> {
    let a = hs.cell_area();
    let s1: f64 = hs.entries.par_iter().map(|m| phi1(params, m)).collect::<Vec<_>>().iter().sum::<f64>() * a;
    let s2: f64 = hs.entries.par_iter().map(|m| phi2(params, m)).collect::<Vec<_>>().iter().sum::<f64>() * a;
    if s2 <= 0.0 {
        return Err(Error::ZeroDenominator("integral of phi2(D²u)"));
    }
    Ok(PushforwardMoments { phi1: s1, phi2: s2, ratio: s1 / s2 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomFraction {
    pub matrix: SymMat2,
    pub weight: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentComparison {
    pub name: String,
    pub measure: f64,
    pub realized: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionReport {
    pub r: f64,
    pub atoms: Vec<AtomFraction>,
    /// Fraction of interior points within `r` of no atom.
    pub exceptional: f64,
    pub moments: Vec<MomentComparison>,
}

impl DistributionReport {
    pub fn max_fraction_error(&self) -> f64 {
        self.atoms.iter().map(|a| (a.fraction - a.weight).abs()).fold(0.0, f64::max)
    }
}

/// Assigns each interior point to the nearest atom within Frobenius
/// distance `r` and compares moments of the Hessian distribution (normalized
/// by the number of points) with those of `m`.
pub fn compare_distribution(hs: &HessianSample, m: &AtomicMeasure, r: f64, params: &Params) -> DistributionReport {
    let atoms = m.atoms();
    let counts = hs
        .entries
        .par_iter()
        .fold(
            || vec![0usize; atoms.len() + 1],
            |mut acc, d| {
                let mut best = (atoms.len(), r);
                for (k, (_, a)) in atoms.iter().enumerate() {
                    let dist = (*d - *a).frobenius();
                    if dist < best.1 {
                        best = (k, dist);
                    }
                }
                acc[best.0] += 1;
                acc
            },
        )
        .reduce(
            || vec![0usize; atoms.len() + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = hs.entries.len() as f64;
    let fractions: Vec<AtomFraction> = atoms
        .iter()
        .zip(&counts)
        .map(|((w, a), c)| AtomFraction { matrix: *a, weight: *w, fraction: *c as f64 / total })
        .collect();
    type Moment = (&'static str, fn(&Params, &SymMat2) -> f64);
    let tests: [Moment; 6] = [
        ("phi1", |p, a| phi1(p, a)),
        ("phi2", |p, a| phi2(p, a)),
        ("a11", |_, a| a.a11),
        ("a22", |_, a| a.a22),
        ("a12", |_, a| a.a12),
        ("a11*a22", |_, a| a.a11 * a.a22),
    ];
    let moments = tests
        .iter()
        .map(|(name, f)| {
            let measure = m.expect(|a| f(params, a));
            let parts: Vec<f64> = hs.entries.par_iter().map(|a| f(params, a)).collect();
            let realized = parts.iter().sum::<f64>() / total;
            let denom = measure.abs().max(1e-12);
            MomentComparison { name: name.to_string(), measure, realized, relative_error: (realized - measure).abs() / denom }
        })
        .collect();
    DistributionReport { r, atoms: fractions, exceptional: counts[atoms.len()] as f64 / total, moments }
}
