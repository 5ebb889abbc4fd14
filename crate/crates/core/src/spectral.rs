//! Fourier multipliers on the periodic cell `[0, 2L)^2`.
//!
//! Frequencies are `pi m / L` with `m` in the symmetric FFT layout
//! `0, 1, .., n/2, -(n/2 - 1), .., -1`. The zero frequency of every
//! `xi_j^2/|xi|^2` multiplier is set to 0.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction2D;
use crate::params::Params;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n: usize,
    half_period: f64,
    values: Vec<Complex64>,
}

fn fft2(values: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn Fft<f64>> = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let rows = |buf: &mut [Complex64]| {
        buf.par_chunks_mut(n).for_each(|row| fft.process(row));
    };
    rows(values);
    let mut t = transpose(values, n);
    rows(&mut t);
    let back = transpose(&t, n);
    values.copy_from_slice(&back);
    if inverse {
        let s = 1.0 / (n * n) as f64;
        values.iter_mut().for_each(|v| *v *= s);
    }
}

fn transpose(v: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(j, row)| {
        for (i, x) in row.iter_mut().enumerate() {
            *x = v[i * n + j];
        }
    });
    out
}

fn p_norm(vals: impl Iterator<Item = f64>, p: f64, cell: f64) -> f64 {
    (vals.map(|v| v.abs().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

impl SpectralField {
    pub fn new(n: usize, half_period: f64, values: Vec<Complex64>) -> Result<Self> {
        if n < 2 || values.len() != n * n {
            return Err(Error::InvalidParameter(format!("{} values for an {n}x{n} field", values.len())));
        }
        if !(half_period.is_finite() && half_period > 0.0) {
            return Err(Error::InvalidParameter(format!("half period {half_period}")));
        }
        Ok(Self { n, half_period, values })
    }

    pub fn from_real(n: usize, half_period: f64, values: &[f64]) -> Result<Self> {
        Self::new(n, half_period, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples `f` at `(x1, x2) = (i, j) * 2L/n`.
    pub fn from_fn(n: usize, half_period: f64, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let h = 2.0 * half_period / n as f64;
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                v.push(f(i as f64 * h, j as f64 * h));
            }
        }
        Self::new(n, half_period, v)
    }

    /// A grid function as one period of length `n h`.
    pub fn from_grid(u: &GridFunction2D) -> Self {
        let n = u.n();
        Self::from_real(n, 0.5 * n as f64 * u.h(), u.values()).expect("grid dimensions are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_period / self.n as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, c| m.max(c.im.abs()))
    }

    /// Angular frequency of FFT index `m`.
    pub fn frequency(&self, m: usize) -> f64 {
        let n = self.n;
        let s = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        std::f64::consts::PI * s / self.half_period
    }

    pub fn forward(&self) -> Vec<Complex64> {
        let mut v = self.values.clone();
        fft2(&mut v, self.n, false);
        v
    }

    pub fn from_hat(&self, mut hat: Vec<Complex64>) -> Self {
        fft2(&mut hat, self.n, true);
        Self { n: self.n, half_period: self.half_period, values: hat }
    }

    pub fn apply(&self, mult: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let mut hat = self.forward();
        let n = self.n;
        let xi: Vec<f64> = (0..n).map(|m| self.frequency(m)).collect();
        hat.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
            for (b, v) in row.iter_mut().enumerate() {
                *v *= mult(xi[a], xi[b]);
            }
        });
        self.from_hat(hat)
    }

    pub fn apply_real(&self, mult: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        self.apply(|a, b| Complex64::new(mult(a, b), 0.0))
    }

    /// `R_j^2` with multiplier `-xi_j^2/|xi|^2`, `j` in `{1, 2}`.
    pub fn riesz_square(&self, j: usize) -> Result<Self> {
        if j != 1 && j != 2 {
            return Err(Error::InvalidParameter(format!("Riesz index {j}")));
        }
        Ok(self.apply_real(move |a, b| {
            let r = a * a + b * b;
            if r == 0.0 {
                0.0
            } else if j == 1 {
                -a * a / r
            } else {
                -b * b / r
            }
        }))
    }

    pub fn laplacian(&self) -> Self {
        self.apply_real(|a, b| -(a * a + b * b))
    }

    /// `∂_j` with multiplier `i xi_j`; the Nyquist mode is kept.
    pub fn derivative(&self, j: usize) -> Self {
        self.apply(move |a, b| Complex64::new(0.0, if j == 1 { a } else { b }))
    }

    /// Solution at time `t` of `∂_t U = ΔU/2`.
    pub fn heat_extension(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("heat time {t}")));
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        Ok(self.apply_real(move |a, b| (-(a * a + b * b) * t / 2.0).exp()))
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / (self.n * self.n) as f64
    }

    /// Subtracts the mean; returns the removed value.
    pub fn remove_mean(&mut self) -> Complex64 {
        let m = self.mean();
        self.values.iter_mut().for_each(|v| *v -= m);
        m
    }

    /// `L^2` energy of the samples within `fraction * L` of the cell edge,
    /// relative to the total.
    pub fn frame_energy(&self, fraction: f64) -> f64 {
        let n = self.n;
        let w = (fraction * n as f64 / 2.0).ceil() as usize;
        let mut total = 0.0;
        let mut frame = 0.0;
        for i in 0..n {
            for j in 0..n {
                let e = self.values[i * n + j].norm_sqr();
                total += e;
                if i < w || j < w || i + w >= n || j + w >= n {
                    frame += e;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            frame / total
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NormRatio {
    /// `‖((R1²φ − R2²φ)² + τ²(R1²φ + R2²φ)²)^{1/2}‖_p / ‖R1²φ + R2²φ‖_p`.
    pub ratio: f64,
    /// Same numerator over `‖φ‖_p`; equal to `ratio` in exact arithmetic.
    pub ratio_via_phi: f64,
    /// Modulus of the mean removed before applying the multipliers.
    pub mean_correction: f64,
}

pub fn norm_ratio(params: &Params, phi: &SpectralField) -> Result<NormRatio> {
    let mut f = phi.clone();
    let mean = f.remove_mean().norm();
    let r1 = f.riesz_square(1)?;
    let r2 = f.riesz_square(2)?;
    let tau2 = params.tau * params.tau;
    let cell = f.spacing().powi(2);
    let p = params.p;
    let num = p_norm(
        r1.values.iter().zip(&r2.values).map(|(a, b)| ((a - b).norm_sqr() + tau2 * (a + b).norm_sqr()).sqrt()),
        p,
        cell,
    );
    let den = p_norm(r1.values.iter().zip(&r2.values).map(|(a, b)| (a + b).norm()), p, cell);
    let den_phi = p_norm(f.values.iter().map(|v| v.norm()), p, cell);
    if den <= 0.0 || den_phi <= 0.0 {
        return Err(Error::ZeroDenominator("p-norm of R1²φ + R2²φ"));
    }
    Ok(NormRatio { ratio: num / den, ratio_via_phi: num / den_phi, mean_correction: mean })
}

/// Richardson-extrapolated second difference `(4 D_h - D_2h)/3` along one
/// axis; zero within two points of the edge.
fn fd_second(u: &GridFunction2D, axis: usize) -> Vec<f64> {
    let n = u.n();
    let h = u.h();
    let mut out = vec![0.0; n * n];
    for i in 2..n - 2 {
        for j in 2..n - 2 {
            let at = |d: isize| {
                if axis == 0 {
                    u.get((i as isize + d) as usize, j)
                } else {
                    u.get(i, (j as isize + d) as usize)
                }
            };
            let c = at(0);
            let d1 = (at(1) - 2.0 * c + at(-1)) / (h * h);
            let d2 = (at(2) - 2.0 * c + at(-2)) / (4.0 * h * h);
            out[i * n + j] = (4.0 * d1 - d2) / 3.0;
        }
    }
    out
}

/// Relative `L^2` distance between `(R1² − R2²)(−Δu)` computed spectrally
/// and `∂11 u − ∂22 u` from finite differences.
pub fn cross_check_identity(u: &GridFunction2D) -> Result<f64> {
    let width = (0.1 * u.half_width() / u.h()).ceil() as usize;
    if !u.vanishes_on_frame(width) {
        return Err(Error::Wraparound(format!("u does not vanish on a frame of {width} points")));
    }
    let field = SpectralField::from_grid(u);
    let spec = field.apply_real(|a, b| b * b - a * a).real_parts();
    let d11 = fd_second(u, 0);
    let d22 = fd_second(u, 1);
    let mut err = 0.0;
    let mut norm = 0.0;
    for k in 0..spec.len() {
        let fd = d11[k] - d22[k];
        err += (spec[k] - fd).powi(2);
        norm += spec[k].powi(2);
    }
    if norm == 0.0 {
        return Ok(if err == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((err / norm).sqrt())
}
