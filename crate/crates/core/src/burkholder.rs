//! The Burkholder-type functions `u`, `v` and the majorant `U`.
//!
//! All evaluators work in x-coordinates; the rotated variant takes
//! y-coordinates with `x1 = y1 + y2`, `x2 = y1 - y2`. In these coordinates the
//! degenerate cones of the majorant are
//!
//! ```text
//! C1 = { |y1| <= -y2 } ∩ {U = u},   C2 = { |y2| <= y1 } ∩ {U = u}
//! ```
//!
//! and the lines where `U` touches `v` are `y2 = -k y1` and `y2 = -y1/k`
//! with `k = p/|p-2|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Params, PlanePoint};

/// Absolute plus relative tolerance, `|err| <= abs + rel * scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-9 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn bound(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale.abs()
    }
}

/// The square `[lo, hi]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareBox {
    pub lo: f64,
    pub hi: f64,
}

impl SquareBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::DegenerateRegion(format!("box [{lo}, {hi}]^2")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(half: f64) -> Result<Self> {
        Self::new(-half, half)
    }

    pub fn spacing(&self, n: usize) -> f64 {
        (self.hi - self.lo) / (n - 1) as f64
    }

    pub fn coord(&self, n: usize, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing(n)
    }
}

pub fn eval_v(params: &Params, pt: PlanePoint) -> f64 {
    let (a, b) = (pt.x1.abs(), pt.x2.abs());
    let t2 = params.tau * params.tau;
    (t2 * a * a + b * b).powf(params.p / 2.0) - params.c_b * a.powf(params.p)
}

pub fn eval_u(params: &Params, pt: PlanePoint) -> f64 {
    let (a, b) = (pt.x1.abs(), pt.x2.abs());
    params.alpha_p * (a + b).powf(params.p - 1.0) * (b - params.p_star_minus_1 * a)
}

/// `u` on pairs of planar (complex) variables, through their moduli.
pub fn eval_u_pair(params: &Params, x: [f64; 2], y: [f64; 2]) -> f64 {
    eval_u(params, PlanePoint::from_x(x[0].hypot(x[1]), y[0].hypot(y[1])))
}

/// `v` on pairs of planar (complex) variables, through their moduli.
pub fn eval_v_pair(params: &Params, x: [f64; 2], y: [f64; 2]) -> f64 {
    eval_v(params, PlanePoint::from_x(x[0].hypot(x[1]), y[0].hypot(y[1])))
}

/// True where the majorant uses the `u` branch.
pub fn on_u_branch(params: &Params, pt: PlanePoint) -> bool {
    let steep = pt.x2.abs() >= params.p_star_minus_1 * pt.x1.abs();
    if params.p < 2.0 {
        !steep
    } else {
        steep
    }
}

/// The majorant `U`. At `p = 2` both branches share the closed form
/// `x2^2 - x1^2`, which is returned directly.
pub fn eval_majorant(params: &Params, pt: PlanePoint) -> f64 {
    if params.p == 2.0 {
        return pt.x2 * pt.x2 - pt.x1 * pt.x1;
    }
    if on_u_branch(params, pt) {
        eval_u(params, pt)
    } else {
        eval_v(params, pt)
    }
}

/// The majorant in y-coordinates.
pub fn eval_majorant_y(params: &Params, y1: f64, y2: f64) -> f64 {
    eval_majorant(params, PlanePoint::from_y(y1, y2))
}

/// `v` in y-coordinates.
pub fn eval_v_y(params: &Params, y1: f64, y2: f64) -> f64 {
    eval_v(params, PlanePoint::from_y(y1, y2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZigzagScan {
    /// Largest centered second difference over points away from the kinks.
    pub max_second_difference: f64,
    /// Same quantity divided by `1 + |U(y)|`.
    pub max_normalized: f64,
    pub argmax: (f64, f64),
    /// Worst `f(y+he) + f(y-he) - 2 f(y)` over stencils crossing a kink,
    /// divided by `1 + |U(y)|`.
    pub max_tube_excess: f64,
    pub tube_argmax: (f64, f64),
    pub tube_points: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn kink_signs(params: &Params, y1: f64, y2: f64) -> [f64; 3] {
    let pt = PlanePoint::from_y(y1, y2);
    [pt.x1, pt.x2, pt.x2.abs() - params.p_star_minus_1 * pt.x1.abs()]
}

fn crosses_kink(params: &Params, pts: [(f64, f64); 3]) -> bool {
    let s: Vec<[f64; 3]> = pts.iter().map(|&(a, b)| kink_signs(params, a, b)).collect();
    (0..3).any(|j| {
        let (a, b, c) = (s[0][j], s[1][j], s[2][j]);
        a == 0.0 || b == 0.0 || c == 0.0 || a.signum() != b.signum() || b.signum() != c.signum()
    })
}

/// Grid scan for positive second differences of `U` along the two
/// y-coordinate directions over `bx` (given in y-coordinates).
///
/// Stencils that straddle `x1 = 0`, `x2 = 0` or the branch boundary are
/// judged by the one-sided criterion `f(y+he) + f(y-he) <= 2 f(y) + tol`
/// instead of the scaled second difference.
pub fn scan_zigzag_concavity(
    params: &Params,
    bx: SquareBox,
    n: usize,
    h: f64,
    tol: f64,
) -> Result<ZigzagScan> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!("grid resolution {n} < 16")));
    }
    if !(h > 0.0 && h < bx.spacing(n)) {
        return Err(Error::InvalidParameter(format!(
            "step {h} must be positive and below the grid spacing {}",
            bx.spacing(n)
        )));
    }
    #[derive(Clone, Copy)]
    struct Acc {
        raw: f64,
        norm: f64,
        at: (f64, f64),
        tube: f64,
        tube_at: (f64, f64),
        tube_n: usize,
    }
    let empty = Acc {
        raw: f64::NEG_INFINITY,
        norm: f64::NEG_INFINITY,
        at: (f64::NAN, f64::NAN),
        tube: f64::NEG_INFINITY,
        tube_at: (f64::NAN, f64::NAN),
        tube_n: 0,
    };
    let merge = |a: Acc, b: Acc| {
        let mut out = a;
        if b.norm > a.norm {
            out.raw = b.raw;
            out.norm = b.norm;
            out.at = b.at;
        }
        if b.tube > a.tube {
            out.tube = b.tube;
            out.tube_at = b.tube_at;
        }
        out.tube_n = a.tube_n + b.tube_n;
        out
    };
    let rows: Vec<Acc> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y1 = bx.coord(n, i);
            let mut acc = empty;
            for j in 0..n {
                let y2 = bx.coord(n, j);
                let f0 = eval_majorant_y(params, y1, y2);
                let scale = 1.0 + f0.abs();
                for dir in 0..2 {
                    let (dy1, dy2) = if dir == 0 { (h, 0.0) } else { (0.0, h) };
                    let plus = (y1 + dy1, y2 + dy2);
                    let minus = (y1 - dy1, y2 - dy2);
                    let fp = eval_majorant_y(params, plus.0, plus.1);
                    let fm = eval_majorant_y(params, minus.0, minus.1);
                    let excess = fp + fm - 2.0 * f0;
                    if crosses_kink(params, [minus, (y1, y2), plus]) {
                        let cur = Acc {
                            tube: excess / scale,
                            tube_at: (y1, y2),
                            tube_n: 1,
                            ..empty
                        };
                        acc = merge(acc, cur);
                    } else {
                        let d2 = excess / (h * h);
                        let cur = Acc { raw: d2, norm: d2 / scale, at: (y1, y2), ..empty };
                        acc = merge(acc, cur);
                    }
                }
            }
            acc
        })
        .collect();
    let acc = rows.into_iter().fold(empty, merge);
    let passed = acc.norm <= tol && acc.tube <= tol;
    Ok(ZigzagScan {
        max_second_difference: acc.raw,
        max_normalized: acc.norm,
        argmax: acc.at,
        max_tube_excess: acc.tube,
        tube_argmax: acc.tube_at,
        tube_points: acc.tube_n,
        tolerance: tol,
        passed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MajorantReport {
    /// `min (U - v)` over the grid.
    pub min_slack: f64,
    pub argmin: (f64, f64),
    /// `max |U - v| / (1 + |v|)` over the touching lines (absent at `p = 2`).
    pub max_line_defect: Option<f64>,
    /// Same quantity over the branch boundary `|x2| = (p*-1)|x1|`.
    pub max_boundary_defect: f64,
}

/// Checks `U >= v` on the grid `bx` (x-coordinates) and the touching sets.
pub fn verify_majorant(params: &Params, bx: SquareBox, n: usize) -> Result<MajorantReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("grid resolution < 2".into()));
    }
    let rows: Vec<(f64, (f64, f64))> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x1 = bx.coord(n, i);
            let mut best = (f64::INFINITY, (f64::NAN, f64::NAN));
            for j in 0..n {
                let x2 = bx.coord(n, j);
                let pt = PlanePoint::from_x(x1, x2);
                let s = eval_majorant(params, pt) - eval_v(params, pt);
                if s < best.0 {
                    best = (s, (x1, x2));
                }
            }
            best
        })
        .collect();
    let (min_slack, argmin) =
        rows.into_iter().fold((f64::INFINITY, (f64::NAN, f64::NAN)), |a, b| if b.0 < a.0 { b } else { a });

    let radius = bx.hi.abs().max(bx.lo.abs());
    let defect = |pt: PlanePoint| {
        let v = eval_v(params, pt);
        (eval_majorant(params, pt) - v).abs() / (1.0 + v.abs())
    };
    let samples = n.max(16);
    let mut max_line = None;
    if let Some(k) = params.k_cone {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let s = -radius + 2.0 * radius * i as f64 / (samples - 1) as f64;
            for &(y1, y2) in &[(s, -k * s), (s, -s / k)] {
                worst = worst.max(defect(PlanePoint::from_y(y1, y2)));
            }
        }
        max_line = Some(worst);
    }
    let mut boundary: f64 = 0.0;
    for i in 0..samples {
        let a = radius * i as f64 / (samples - 1) as f64;
        let b = params.p_star_minus_1 * a;
        for &(s1, s2) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let pt = PlanePoint::from_x(s1 * a, s2 * b);
            let gap = (eval_u(params, pt) - eval_v(params, pt)).abs() / (1.0 + eval_v(params, pt).abs());
            boundary = boundary.max(gap);
        }
    }
    Ok(MajorantReport { min_slack, argmin, max_line_defect: max_line, max_boundary_defect: boundary })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UPropertiesReport {
    /// `v >= 0` on the cones (`v <= 0` for `p < 2`, where the cones sit in
    /// the region `|x2| <= (p*-1)|x1|`).
    pub v_sign_on_cones: bool,
    pub origin: bool,
    pub lines: bool,
    pub degenerate_linearity: bool,
    pub worst_sign_violation: f64,
    pub worst_line_defect: f64,
    pub worst_linearity_defect: f64,
    pub cone_samples: usize,
}

impl UPropertiesReport {
    pub fn all(&self) -> bool {
        self.v_sign_on_cones && self.origin && self.lines && self.degenerate_linearity
    }
}

/// Which degenerate cone (if any) contains the y-point.
fn cone_of(params: &Params, y1: f64, y2: f64) -> Option<u8> {
    if !on_u_branch(params, PlanePoint::from_y(y1, y2)) {
        return None;
    }
    if y1.abs() <= -y2 {
        Some(1)
    } else if y2.abs() <= y1 {
        Some(2)
    } else {
        None
    }
}

/// Samples the four structural properties of `U` in y-coordinates on a
/// polar grid of radius up to 3: sign of `v` on the cones, `U(0) = v(0) = 0`,
/// `U = v` on the touching lines, and linearity of `U` in `y1` inside `C1`
/// and in `y2` inside `C2`.
pub fn verify_u_properties(params: &Params, n: usize, tol: f64) -> Result<UPropertiesReport> {
    let k = params.cone_slope()?;
    if n < 4 {
        return Err(Error::InvalidParameter("sample count < 4".into()));
    }
    let radius = 3.0;
    let sign = if params.p > 2.0 { 1.0 } else { -1.0 };
    let mut worst_sign: f64 = 0.0;
    let mut worst_lin: f64 = 0.0;
    let mut count = 0usize;
    let h = 1e-3;
    for i in 1..=n {
        let r = radius * i as f64 / n as f64;
        for j in 0..(4 * n) {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / (4 * n) as f64;
            let (y1, y2) = (r * theta.cos(), r * theta.sin());
            let Some(cone) = cone_of(params, y1, y2) else { continue };
            count += 1;
            let v = eval_v_y(params, y1, y2);
            worst_sign = worst_sign.max((-sign * v) / (1.0 + v.abs()));
            let (dy1, dy2) = if cone == 1 { (h, 0.0) } else { (0.0, h) };
            let (a, b) = ((y1 - dy1, y2 - dy2), (y1 + dy1, y2 + dy2));
            if cone_of(params, a.0, a.1) == Some(cone) && cone_of(params, b.0, b.1) == Some(cone) {
                let f0 = eval_majorant_y(params, y1, y2);
                let d = eval_majorant_y(params, a.0, a.1) + eval_majorant_y(params, b.0, b.1) - 2.0 * f0;
                worst_lin = worst_lin.max(d.abs() / (h * h * (1.0 + f0.abs())));
            }
        }
    }
    let origin = eval_majorant_y(params, 0.0, 0.0) == 0.0 && eval_v_y(params, 0.0, 0.0) == 0.0;
    let mut worst_line: f64 = 0.0;
    for i in 0..=(4 * n) {
        let s = -radius + 2.0 * radius * i as f64 / (4 * n) as f64;
        for &(y1, y2) in &[(s, -k * s), (s, -s / k)] {
            let v = eval_v_y(params, y1, y2);
            worst_line = worst_line.max((eval_majorant_y(params, y1, y2) - v).abs() / (1.0 + v.abs()));
        }
    }
    Ok(UPropertiesReport {
        v_sign_on_cones: worst_sign <= tol,
        origin,
        lines: worst_line <= tol,
        degenerate_linearity: worst_lin <= tol.max(1e-6),
        worst_sign_violation: worst_sign,
        worst_line_defect: worst_line,
        worst_linearity_defect: worst_lin,
        cone_samples: count,
    })
}

/// One sample `(x, y, h, k)` of planar pairs for the second-order identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub h: [f64; 2],
    pub k: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HessianIdentityReport {
    pub ratios: Vec<f64>,
    /// Estimate of `-c_{p,tau}`: the median ratio.
    pub constant: f64,
    pub max_relative_deviation: f64,
    pub skipped: usize,
}

impl HessianIdentityReport {
    pub fn is_constant(&self, rel_tol: f64) -> bool {
        !self.ratios.is_empty() && self.constant < 0.0 && self.max_relative_deviation <= rel_tol
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// The closed form `A + B + C`.
pub fn abc_terms(params: &Params, s: &PairSample) -> f64 {
    let p = params.p;
    let (a, b) = (norm(s.x), norm(s.y));
    let xp = [s.x[0] / a, s.x[1] / a];
    let yp = [s.y[0] / b, s.y[1] / b];
    let big_a = p * (p - 1.0) * (dot(s.h, s.h) - dot(s.k, s.k)) * (a + b).powf(p - 2.0);
    let big_b = p * (p - 2.0) * (dot(s.k, s.k) - dot(yp, s.k).powi(2)) / b * (a + b).powf(p - 1.0);
    let big_c = p * (p - 1.0) * (p - 2.0) * (dot(xp, s.h) + dot(yp, s.k)).powi(2) * a * (a + b).powf(p - 3.0);
    big_a + big_b + big_c
}

/// Second derivative of `e -> u(x + e h, y + e k)` at 0 by Richardson
/// extrapolated central differences.
pub fn directional_form(params: &Params, s: &PairSample) -> f64 {
    let scale = norm(s.x).min(norm(s.y));
    let dir = (dot(s.h, s.h) + dot(s.k, s.k)).sqrt();
    if dir == 0.0 {
        return 0.0;
    }
    let f = |e: f64| {
        eval_u_pair(
            params,
            [s.x[0] + e * s.h[0], s.x[1] + e * s.h[1]],
            [s.y[0] + e * s.k[0], s.y[1] + e * s.k[1]],
        )
    };
    let d2 = |e: f64| (f(e) - 2.0 * f(0.0) + f(-e)) / (e * e);
    let e = 2e-3 * scale / dir;
    (4.0 * d2(e / 2.0) - d2(e)) / 3.0
}

/// Ratio of the directional second-order form of `u` to the closed form
/// `A + B + C`; the ratios should all equal one negative constant.
/// Defined for `p >= 2`.
pub fn verify_hessian_identity(
    params: &Params,
    samples: &[PairSample],
    eps: f64,
) -> Result<HessianIdentityReport> {
    if params.p < 2.0 {
        return Err(Error::UnsupportedRange(format!(
            "second-order identity holds for p >= 2, got p = {}",
            params.p
        )));
    }
    let mut ratios = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for s in samples {
        if norm(s.x) * norm(s.y) == 0.0 {
            return Err(Error::InvalidParameter("sample with |x||y| = 0".into()));
        }
        let abc = abc_terms(params, s);
        if abc.abs() <= eps {
            skipped += 1;
            continue;
        }
        ratios.push(directional_form(params, s) / abc);
    }
    let constant = crate::stats::median(&ratios).unwrap_or(f64::NAN);
    let max_relative_deviation = ratios
        .iter()
        .map(|r| ((r - constant) / constant).abs())
        .fold(0.0, f64::max);
    Ok(HessianIdentityReport { ratios, constant, max_relative_deviation, skipped })
}
