//! Real samples on a uniform grid over `[-L, L]^2` and the `GRID2D` file
//! format: a text line `GRID2D n L` followed by `n^2` little-endian `f64`
//! values, row-major.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID: usize = 32;

/// `values[i * n + j]` is the sample at `(x1, x2) = (-L + i h, -L + j h)`
/// with `h = 2L/(n-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction2D {
    n: usize,
    half_width: f64,
    values: Vec<f64>,
    /// Set once the values and first differences are known to vanish on a
    /// frame of width at least `2h`.
    pub boundary_flag: bool,
}

impl GridFunction2D {
    pub fn new(n: usize, half_width: f64, values: Vec<f64>) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::InvalidParameter(format!("grid size {n} < {MIN_GRID}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!("half width {half_width}")));
        }
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!("{} values for an {n}x{n} grid", values.len())));
        }
        Ok(Self { n, half_width, values, boundary_flag: false })
    }

    pub fn zeros(n: usize, half_width: f64) -> Result<Self> {
        Self::new(n, half_width, vec![0.0; n * n])
    }

    pub fn from_fn(n: usize, half_width: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut g = Self::zeros(n, half_width)?;
        for i in 0..n {
            let x1 = g.coord(i);
            for j in 0..n {
                g.values[i * n + j] = f(x1, g.coord(j));
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest centered-difference gradient norm over interior points.
    pub fn max_gradient(&self) -> f64 {
        let (n, h) = (self.n, self.h());
        let mut best: f64 = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let g1 = (self.get(i + 1, j) - self.get(i - 1, j)) / (2.0 * h);
                let g2 = (self.get(i, j + 1) - self.get(i, j - 1)) / (2.0 * h);
                best = best.max(g1.hypot(g2));
            }
        }
        best
    }

    /// Whether every sample within `width` points of the edge is zero.
    pub fn vanishes_on_frame(&self, width: usize) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let inner = i >= width && j >= width && i + width < n && j + width < n;
                inner || self.values[i * n + j] == 0.0
            })
        })
    }

    /// Surrounds the grid with `extra` zero rows and columns on every side,
    /// keeping the spacing.
    pub fn padded(&self, extra: usize) -> Result<Self> {
        let m = self.n + 2 * extra;
        let mut values = vec![0.0; m * m];
        for i in 0..self.n {
            let row = (i + extra) * m + extra;
            values[row..row + self.n].copy_from_slice(&self.values[i * self.n..(i + 1) * self.n]);
        }
        let mut g = Self::new(m, 0.5 * self.h() * (m - 1) as f64, values)?;
        g.boundary_flag = g.vanishes_on_frame(2);
        Ok(g)
    }

    pub fn write_grid2d<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "GRID2D {} {}", self.n, self.half_width)?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_grid2d<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("GRID2D") {
            return Err(Error::Format("missing GRID2D header".into()));
        }
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad grid size".into()))?;
        let half_width: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad half width".into()))?;
        let mut bytes = vec![0u8; 8 * n * n];
        r.read_exact(&mut bytes).map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut g = Self::new(n, half_width, values)?;
        g.boundary_flag = g.vanishes_on_frame(2);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction() {
        assert!(GridFunction2D::zeros(16, 1.0).is_err());
        assert!(GridFunction2D::new(32, 1.0, vec![0.0; 10]).is_err());
        let g = GridFunction2D::from_fn(33, 2.0, |x, y| x + 10.0 * y).unwrap();
        assert_eq!(g.h(), 0.125);
        assert_eq!(g.get(32, 0), 2.0 - 20.0);
        assert!((g.max_gradient() - 101f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn frame() {
        let g = GridFunction2D::from_fn(40, 1.0, |x, y| if x.abs() < 0.5 && y.abs() < 0.5 { 1.0 } else { 0.0 })
            .unwrap();
        assert!(g.vanishes_on_frame(5));
        assert!(!g.vanishes_on_frame(15));
    }

    #[test]
    fn padding_keeps_spacing() {
        let g = GridFunction2D::from_fn(33, 1.0, |x, y| 1.0 + x * y).unwrap();
        let p = g.padded(4).unwrap();
        assert_eq!(p.n(), 41);
        assert!((p.h() - g.h()).abs() < 1e-15);
        assert_eq!(p.get(4 + 7, 4 + 3), g.get(7, 3));
        assert!(p.vanishes_on_frame(4) && p.boundary_flag);
    }

    #[test]
    fn grid2d_round_trip() {
        let g = GridFunction2D::from_fn(32, 1.5, |x, y| (x * y).sin()).unwrap();
        let mut buf = Vec::new();
        g.write_grid2d(&mut buf).unwrap();
        assert!(buf.starts_with(b"GRID2D 32 1.5\n"));
        let back = GridFunction2D::read_grid2d(&buf[..]).unwrap();
        assert_eq!(back.values(), g.values());
        assert!(GridFunction2D::read_grid2d(&buf[..100]).is_err());
        assert!(GridFunction2D::read_grid2d(&b"GRID3D 2 1\n"[..]).is_err());
    }
}
