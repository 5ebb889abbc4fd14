//! Real symmetric 2x2 matrices.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// `[[a11, a12], [a12, a22]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub const ZERO: Self = Self { a11: 0.0, a12: 0.0, a22: 0.0 };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn diag(a11: f64, a22: f64) -> Self {
        Self { a11, a12: 0.0, a22 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn frobenius(&self) -> f64 {
        (self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22).sqrt()
    }

    pub fn is_diagonal(&self) -> bool {
        self.a12 == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }

    /// Relative size of `det(self - other)`; zero when the difference has
    /// rank at most one.
    pub fn rank_one_defect(&self, other: &Self) -> f64 {
        let d = *self - *other;
        let s = d.frobenius();
        if s == 0.0 {
            0.0
        } else {
            d.det().abs() / (s * s)
        }
    }

    /// Whether `self - other` is a multiple of `e_axis ⊗ e_axis`.
    pub fn differs_along(&self, other: &Self, axis: usize, tol: f64) -> bool {
        let d = *self - *other;
        let scale = tol * (1.0 + self.frobenius().max(other.frobenius()));
        let off = if axis == 0 { d.a22 } else { d.a11 };
        d.a12.abs() <= scale && off.abs() <= scale
    }
}

impl Add for SymMat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl Sub for SymMat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }
}

impl Neg for SymMat2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a11, -self.a12, -self.a22)
    }
}

impl Mul<SymMat2> for f64 {
    type Output = SymMat2;
    fn mul(self, m: SymMat2) -> SymMat2 {
        SymMat2::new(self * m.a11, self * m.a12, self * m.a22)
    }
}
