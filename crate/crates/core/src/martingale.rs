//! Heat martingales on the periodic cell and their transform by
//! `A1 - A2 = diag(1, -1)`.
//!
//! For a start point `z0` and horizon `T`, `X_t = ∫ ∇U_φ(Z_s, T - s) · dZ_s`
//! and `Y_t = ∫ (A1 - A2) ∇U_φ(Z_s, T - s) · dZ_s`, where `U_φ(·, s)` is the
//! heat extension of `φ` and `Z` is a standard planar Brownian motion
//! wrapped onto the torus `[0, 2L)^2`.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burkholder::eval_v_pair;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::spectral::SpectralField;
use crate::stats::{batch_means, Estimate};

pub const MIN_ASSERT_PATHS: usize = 1000;
pub const MIN_BATCHES: usize = 30;

/// Starting points with the weights of the cells they represent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartGrid {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl StartGrid {
    /// Cell centers of an `m x m` partition of `[0, 2L)^2`.
    pub fn uniform(m: usize, half_period: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("empty start grid".into()));
        }
        let c = 2.0 * half_period / m as f64;
        let mut points = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                points.push([(i as f64 + 0.5) * c, (j as f64 + 0.5) * c]);
            }
        }
        Ok(Self { weights: vec![c * c; m * m], points })
    }

    pub fn single(z: [f64; 2]) -> Self {
        Self { points: vec![z], weights: vec![1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Total number of paths, assigned to start points round-robin.
    pub n_paths: usize,
    pub seed: u64,
    pub start_grid: StartGrid,
    /// Number of heat-extension times in the geometric ladder.
    pub ladder_levels: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {}", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon / 100.0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("dt {} must be in (0, T/100]", self.dt)));
        }
        if self.n_paths == 0 || self.start_grid.points.is_empty() {
            return Err(Error::InvalidParameter("no paths".into()));
        }
        if self.start_grid.points.len() != self.start_grid.weights.len() {
            return Err(Error::InvalidParameter("start grid weights mismatch".into()));
        }
        if self.ladder_levels < 2 {
            return Err(Error::InvalidParameter("ladder needs at least two levels".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Gradient of the space-time function driving the martingale.
pub trait GradientSource: Sync {
    /// `∇U(z, s)` at position `z` with `s` time remaining.
    fn gradient(&self, z: [f64; 2], s: f64) -> [Complex64; 2];
    /// Period of the torus, if positions wrap.
    fn period(&self) -> Option<f64>;
}

/// A spatially constant gradient on the whole plane.
pub struct ConstantGradient(pub [Complex64; 2]);

impl GradientSource for ConstantGradient {
    fn gradient(&self, _z: [f64; 2], _s: f64) -> [Complex64; 2] {
        self.0
    }
    fn period(&self) -> Option<f64> {
        None
    }
}

/// `∇(heat(s) φ)` on a geometric ladder of times, bilinear in space and
/// nearest (in `log s`) in time.
pub struct HeatGradient {
    n: usize,
    period: f64,
    times: Vec<f64>,
    fields: Vec<[Vec<Complex64>; 2]>,
}

impl HeatGradient {
    pub fn new(phi: &SpectralField, s_min: f64, s_max: f64, levels: usize) -> Result<Self> {
        if !(s_min > 0.0 && s_max >= s_min && levels >= 2) {
            return Err(Error::InvalidParameter(format!("ladder [{s_min}, {s_max}] x {levels}")));
        }
        let ratio = (s_max / s_min).ln() / (levels - 1) as f64;
        let times: Vec<f64> = (0..levels).map(|k| s_min * (ratio * k as f64).exp()).collect();
        let fields = times
            .iter()
            .map(|&s| {
                let d = |j: usize| {
                    phi.apply(move |a, b| {
                        let xi = if j == 1 { a } else { b };
                        Complex64::new(0.0, xi) * (-(a * a + b * b) * s / 2.0).exp()
                    })
                    .values()
                    .to_vec()
                };
                [d(1), d(2)]
            })
            .collect();
        Ok(Self { n: phi.n(), period: 2.0 * phi.half_period(), times, fields })
    }

    fn level(&self, s: f64) -> usize {
        let last = self.times.len() - 1;
        let step = (self.times[last] / self.times[0]).ln() / last as f64;
        if step == 0.0 {
            return 0;
        }
        let k = ((s / self.times[0]).ln() / step).round();
        k.clamp(0.0, last as f64) as usize
    }
}

impl GradientSource for HeatGradient {
    fn gradient(&self, z: [f64; 2], s: f64) -> [Complex64; 2] {
        let n = self.n;
        let h = self.period / n as f64;
        let f = &self.fields[self.level(s)];
        let (u, v) = (z[0].rem_euclid(self.period) / h, z[1].rem_euclid(self.period) / h);
        let (i0, j0) = (u.floor() as usize % n, v.floor() as usize % n);
        let (fu, fv) = (u - u.floor(), v - v.floor());
        let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
        let interp = |g: &Vec<Complex64>| {
            g[i0 * n + j0] * ((1.0 - fu) * (1.0 - fv))
                + g[i1 * n + j0] * (fu * (1.0 - fv))
                + g[i0 * n + j1] * ((1.0 - fu) * fv)
                + g[i1 * n + j1] * (fu * fv)
        };
        [interp(&f[0]), interp(&f[1])]
    }
    fn period(&self) -> Option<f64> {
        Some(self.period)
    }
}

/// Terminal state of one path. Complex quantities are `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTerminal {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub z0: [f64; 2],
    pub weight: f64,
    pub qv_x: f64,
    pub qv_y: f64,
}

impl PathTerminal {
    pub fn abs_x(&self) -> f64 {
        self.x[0].hypot(self.x[1])
    }
    pub fn abs_y(&self) -> f64 {
        self.y[0].hypot(self.y[1])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimResult {
    pub terminals: Vec<PathTerminal>,
    /// Paths dropped because the gradient lookup was not finite.
    pub flagged: usize,
    pub n_starts: usize,
}

fn run_path(src: &dyn GradientSource, cfg: &SimConfig, index: usize) -> Option<PathTerminal> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let starts = &cfg.start_grid;
    let k = index % starts.points.len();
    let z0 = starts.points[k];
    let mut z = z0;
    let (mut x, mut y) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let (mut qx, mut qy) = (0.0, 0.0);
    let steps = cfg.steps();
    let sq = cfg.dt.sqrt();
    for step in 0..steps {
        let s = cfg.horizon - step as f64 * cfg.dt;
        let g = src.gradient(z, s);
        let d1: f64 = StandardNormal.sample(&mut rng);
        let d2: f64 = StandardNormal.sample(&mut rng);
        let (dz1, dz2) = (sq * d1, sq * d2);
        let t = [g[0], -g[1]];
        x += g[0] * dz1 + g[1] * dz2;
        y += t[0] * dz1 + t[1] * dz2;
        qx += (g[0].norm_sqr() + g[1].norm_sqr()) * cfg.dt;
        qy += (t[0].norm_sqr() + t[1].norm_sqr()) * cfg.dt;
        z = [z[0] + dz1, z[1] + dz2];
        if let Some(p) = src.period() {
            z = [z[0].rem_euclid(p), z[1].rem_euclid(p)];
        }
    }
    if !(x.re.is_finite() && x.im.is_finite() && y.re.is_finite() && y.im.is_finite()) {
        return None;
    }
    Some(PathTerminal { x: [x.re, x.im], y: [y.re, y.im], z, z0, weight: starts.weights[k], qv_x: qx, qv_y: qy })
}

/// Euler–Maruyama simulation; path `i` draws from stream `i` of the seeded
/// generator, so results do not depend on scheduling.
pub fn simulate_with(src: &dyn GradientSource, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let runs: Vec<Option<PathTerminal>> = (0..cfg.n_paths).into_par_iter().map(|i| run_path(src, cfg, i)).collect();
    let flagged = runs.iter().filter(|r| r.is_none()).count();
    Ok(SimResult { terminals: runs.into_iter().flatten().collect(), flagged, n_starts: cfg.start_grid.points.len() })
}

/// Heat martingale of `φ` with the gradient ladder spanning `[dt, T]`.
pub fn simulate_paths(phi: &SpectralField, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let src = HeatGradient::new(phi, cfg.dt, cfg.horizon, cfg.ladder_levels)?;
    simulate_with(&src, cfg)
}

/// Largest `|qv_X - qv_Y|` over the paths.
pub fn verify_subordination(terminals: &[PathTerminal]) -> f64 {
    terminals.iter().map(|t| (t.qv_x - t.qv_y).abs()).fold(0.0, f64::max)
}

/// Largest quadratic variation, the scale for [`verify_subordination`].
pub fn qv_scale(terminals: &[PathTerminal]) -> f64 {
    terminals.iter().map(|t| t.qv_x.max(t.qv_y)).fold(0.0, f64::max)
}

fn weighted_estimate(terminals: &[PathTerminal], f: impl Fn(&PathTerminal) -> f64) -> Result<Estimate> {
    if terminals.len() < MIN_ASSERT_PATHS {
        return Err(Error::InsufficientSamples(format!("{} paths < {MIN_ASSERT_PATHS}", terminals.len())));
    }
    let v: Vec<f64> = terminals.iter().map(f).collect();
    let w: Vec<f64> = terminals.iter().map(|t| t.weight).collect();
    batch_means(&v, &w, MIN_BATCHES)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InequalityReport {
    /// `‖(τ²|X|² + |Y|²)^{1/2}‖_p`, normalized by the start weights.
    pub lhs: f64,
    /// `((p*-1)² + τ²)^{1/2} ‖X‖_p`.
    pub rhs: f64,
    /// Mean and standard error of `rhs^p − lhs^p` per path.
    pub gap: Estimate,
    /// `gap.mean / gap.se`.
    pub margin_se: f64,
    /// Whether `(p, τ)` lies in the range where the bound is claimed.
    pub asserted: bool,
    pub holds: bool,
}

pub fn empirical_inequality(terminals: &[PathTerminal], params: &Params) -> Result<InequalityReport> {
    let p = params.p;
    let t2 = params.tau * params.tau;
    let c = params.norm_target();
    let left = |t: &PathTerminal| (t2 * t.abs_x().powi(2) + t.abs_y().powi(2)).powf(p / 2.0);
    let right = |t: &PathTerminal| c.powf(p) * t.abs_x().powf(p);
    let l = weighted_estimate(terminals, left)?;
    let r = weighted_estimate(terminals, right)?;
    let gap = weighted_estimate(terminals, |t| right(t) - left(t))?;
    if gap.se > 0.1 * r.mean {
        return Err(Error::InsufficientSamples(format!("standard error {} above 10% of {}", gap.se, r.mean)));
    }
    let margin_se = if gap.se > 0.0 { gap.mean / gap.se } else { f64::INFINITY * gap.mean.signum() };
    Ok(InequalityReport {
        lhs: l.mean.powf(1.0 / p),
        rhs: r.mean.powf(1.0 / p),
        gap,
        margin_se,
        asserted: params.in_t,
        holds: gap.mean >= -3.0 * gap.se,
    })
}

/// Mean of `v(|X_T|, |Y_T|)` with its standard error.
pub fn expected_v_nonpositive(terminals: &[PathTerminal], params: &Params) -> Result<Estimate> {
    let e = weighted_estimate(terminals, |t| eval_v_pair(params, t.x, t.y))?;
    let scale = weighted_estimate(terminals, |t| params.c_b * t.abs_x().powf(params.p))?;
    if e.se > 0.1 * scale.mean.max(f64::MIN_POSITIVE) {
        return Err(Error::InsufficientSamples(format!("standard error {} too large", e.se)));
    }
    Ok(e)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BinnedExpectation {
    pub bins: usize,
    pub period: f64,
    pub counts: Vec<usize>,
    pub mean_x: Vec<[f64; 2]>,
    pub mean_y: Vec<[f64; 2]>,
}

impl BinnedExpectation {
    pub fn empty_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }

    pub fn center(&self, b: usize) -> [f64; 2] {
        let c = self.period / self.bins as f64;
        [((b / self.bins) as f64 + 0.5) * c, ((b % self.bins) as f64 + 0.5) * c]
    }
}

/// Per-bin weighted means of `X_T` and `Y_T` given `Z_T`.
pub fn binned_conditional_expectation(terminals: &[PathTerminal], bins: usize, period: f64) -> Result<BinnedExpectation> {
    if bins == 0 {
        return Err(Error::InvalidParameter("zero bins".into()));
    }
    let nb = bins * bins;
    let mut w = vec![0.0; nb];
    let mut counts = vec![0usize; nb];
    let mut sx = vec![[0.0; 2]; nb];
    let mut sy = vec![[0.0; 2]; nb];
    let c = period / bins as f64;
    for t in terminals {
        let i = ((t.z[0].rem_euclid(period) / c) as usize).min(bins - 1);
        let j = ((t.z[1].rem_euclid(period) / c) as usize).min(bins - 1);
        let b = i * bins + j;
        counts[b] += 1;
        w[b] += t.weight;
        for k in 0..2 {
            sx[b][k] += t.weight * t.x[k];
            sy[b][k] += t.weight * t.y[k];
        }
    }
    let norm = |s: [f64; 2], w: f64| if w > 0.0 { [s[0] / w, s[1] / w] } else { [0.0, 0.0] };
    Ok(BinnedExpectation {
        bins,
        period,
        mean_x: sx.iter().zip(&w).map(|(s, w)| norm(*s, *w)).collect(),
        mean_y: sy.iter().zip(&w).map(|(s, w)| norm(*s, *w)).collect(),
        counts,
    })
}

/// Exact conditional expectations at horizon `T` for Lebesgue-distributed
/// start points: `E[X_T | Z_T] = (1 - e^{-|ξ|²T}) φ̂` and
/// `E[Y_T | Z_T] = ((ξ1² − ξ2²)/|ξ|²)(1 - e^{-|ξ|²T}) φ̂`, which tend to
/// `φ - mean(φ) = −(R1² + R2²)φ` and `−(R1² − R2²)φ`.
pub fn conditional_oracle(phi: &SpectralField, horizon: f64) -> (SpectralField, SpectralField) {
    let damp = move |a: f64, b: f64| 1.0 - (-(a * a + b * b) * horizon).exp();
    let ex = phi.apply_real(damp);
    let ey = phi.apply_real(move |a, b| {
        let r = a * a + b * b;
        if r == 0.0 {
            0.0
        } else {
            (a * a - b * b) / r * damp(a, b)
        }
    });
    (ex, ey)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Pairing {
    /// Monte Carlo estimate of `∫ E[·|Z_T = z] ψ(z) dz` (real part).
    pub estimate: Estimate,
    /// The same pairing against the spectral oracle.
    pub oracle: f64,
}

impl Pairing {
    pub fn within(&self, k: f64) -> bool {
        self.estimate.within(self.oracle, k)
    }
}

/// Pairs the real parts of `X_T` (`which = 'x'`) or `Y_T` (`'y'`) with the
/// test weight `ψ(Z_T)`; the oracle pairing integrates the field against
/// `ψ` over the cell.
pub fn pairing(
    terminals: &[PathTerminal],
    which: char,
    psi: impl Fn([f64; 2]) -> f64,
    oracle: &SpectralField,
) -> Result<Pairing> {
    let comp = |t: &PathTerminal| if which == 'x' { t.x[0] } else { t.y[0] };
    let estimate = weighted_estimate(terminals, |t| comp(t) * psi(t.z))?;
    let area = (2.0 * oracle.half_period()).powi(2);
    let scaled = Estimate { mean: estimate.mean * area, se: estimate.se * area };
    let h = oracle.spacing();
    let n = oracle.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += oracle.values()[i * n + j].re * psi([i as f64 * h, j as f64 * h]);
        }
    }
    Ok(Pairing { estimate: scaled, oracle: s * h * h })
}

/// Pearson correlation of the binned means of `Y_T` (real parts) with the
/// oracle sampled at the bin centers, over bins with at least `min_count`
/// samples.
pub fn binned_correlation(b: &BinnedExpectation, oracle: &SpectralField, use_y: bool, min_count: usize) -> Option<f64> {
    let n = oracle.n();
    let h = oracle.spacing();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..b.counts.len() {
        if b.counts[k] < min_count {
            continue;
        }
        let c = b.center(k);
        let (i, j) = (((c[0] / h).round() as usize) % n, ((c[1] / h).round() as usize) % n);
        xs.push(if use_y { b.mean_y[k][0] } else { b.mean_x[k][0] });
        ys.push(oracle.values()[i * n + j].re);
    }
    if xs.len() < 3 {
        return None;
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Binary dump: a header line `TERMINALS count 11`, then per path the
/// little-endian `f64` fields `x, y, z, z0` (two each), `weight, qv_x, qv_y`.
pub fn write_terminals<W: Write>(terminals: &[PathTerminal], mut w: W) -> Result<()> {
    writeln!(w, "TERMINALS {} 11", terminals.len())?;
    let mut buf = Vec::with_capacity(terminals.len() * 88);
    for t in terminals {
        for v in t.x.iter().chain(&t.y).chain(&t.z).chain(&t.z0).chain([t.weight, t.qv_x, t.qv_y].iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_paths: usize) -> SimConfig {
        SimConfig {
            horizon: 1.0,
            dt: 0.01,
            n_paths,
            seed: 7,
            start_grid: StartGrid::single([0.0, 0.0]),
            ladder_levels: 8,
        }
    }

    #[test]
    fn constant_first_axis() {
        let src = ConstantGradient([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let r = simulate_with(&src, &cfg(50)).unwrap();
        for t in &r.terminals {
            assert!((t.x[0] - t.z[0]).abs() < 1e-12);
            assert_eq!(t.x, t.y);
        }
    }

    #[test]
    fn constant_second_axis() {
        let src = ConstantGradient([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let r = simulate_with(&src, &cfg(50)).unwrap();
        for t in &r.terminals {
            assert_eq!(t.y[0], -t.x[0]);
        }
        assert_eq!(verify_subordination(&r.terminals), 0.0);
    }

    #[test]
    fn deterministic() {
        let src = ConstantGradient([Complex64::new(0.3, 0.1), Complex64::new(-1.0, 2.0)]);
        let a = simulate_with(&src, &cfg(40)).unwrap();
        let b = simulate_with(&src, &cfg(40)).unwrap();
        assert_eq!(a.terminals, b.terminals);
    }

    #[test]
    fn detects_scaled_traces() {
        let mut t = PathTerminal { x: [0.0; 2], y: [0.0; 2], z: [0.0; 2], z0: [0.0; 2], weight: 1.0, qv_x: 2.0, qv_y: 2.0 };
        assert_eq!(verify_subordination(&[t]), 0.0);
        t.qv_y *= 0.25;
        assert!(verify_subordination(&[t]) > 1.0);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(10);
        c.dt = 0.5;
        assert!(c.validate().is_err());
        let src = ConstantGradient([Complex64::new(1.0, 0.0); 2]);
        let r = simulate_with(&src, &cfg(10)).unwrap();
        assert!(empirical_inequality(&r.terminals, &Params::new(2.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn zero_field() {
        let phi = SpectralField::from_real(16, 1.0, &[0.0; 256]).unwrap();
        let mut c = cfg(1200);
        c.start_grid = StartGrid::uniform(4, 1.0).unwrap();
        let r = simulate_paths(&phi, &c).unwrap();
        let e = expected_v_nonpositive(&r.terminals, &Params::new(4.0, 0.0).unwrap());
        assert!(r.terminals.iter().all(|t| t.x == [0.0; 2] && t.y == [0.0; 2]));
        assert!(e.is_err() || e.unwrap().mean == 0.0);
        let b = binned_conditional_expectation(&r.terminals, 4, 2.0).unwrap();
        assert!(b.mean_y.iter().all(|m| *m == [0.0; 2]));
    }
}
