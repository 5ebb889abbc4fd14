use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The exponent `p` and perturbation `tau` together with every constant
/// derived from them.
///
/// `tau` only enters through `tau^2`; a negative input is stored as `|tau|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub tau: f64,
    /// `p* - 1 = max(p - 1, 1/(p - 1))`.
    pub p_star_minus_1: f64,
    /// Slope of the laminate rays, `1 - 2/p`, in `(-1, 1)`.
    pub k_lam: f64,
    /// Slope of the degenerate cones, `p/|p - 2|`; `None` at `p = 2`.
    pub k_cone: Option<f64>,
    /// Burkholder constant `((p*-1)^2 + tau^2)^{p/2}`.
    pub c_b: f64,
    pub alpha_p: f64,
    /// Membership in the set where the quadratic perturbation is sharp.
    pub in_t: bool,
}

impl Params {
    pub fn new(p: f64, tau: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
        }
        if !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be finite, got {tau}")));
        }
        let tau = tau.abs();
        let psm1 = (p - 1.0).max(1.0 / (p - 1.0));
        let p_star = psm1 + 1.0;
        let k_lam = 1.0 - 2.0 / p;
        let k_cone = if p == 2.0 { None } else { Some(p / (p - 2.0).abs()) };
        let c_b = (psm1 * psm1 + tau * tau).powf(p / 2.0);
        let alpha_p = p
            * (1.0 - 1.0 / p_star).powf(p - 1.0)
            * (1.0 + tau * tau / (psm1 * psm1)).powf((p - 2.0) / 2.0);
        let in_t = (p < 2.0 && tau * tau <= psm1) || p >= 2.0;
        Ok(Self { p, tau, p_star_minus_1: psm1, k_lam, k_cone, c_b, alpha_p, in_t })
    }

    /// `k_cone`, or an error at `p = 2` where the cones collapse.
    pub fn cone_slope(&self) -> Result<f64> {
        self.k_cone.ok_or(Error::DegenerateAtTwo("cone slope p/(p-2)"))
    }

    /// The operator-norm target `((p*-1)^2 + tau^2)^{1/2} = c_B^{1/p}`.
    pub fn norm_target(&self) -> f64 {
        (self.p_star_minus_1.powi(2) + self.tau * self.tau).sqrt()
    }
}

/// A point of the plane, stored in x-coordinates.
///
/// The rotated y-coordinates are `y1 = (x1 + x2)/2`, `y2 = (x1 - x2)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x1: f64,
    pub x2: f64,
}

impl PlanePoint {
    pub fn from_x(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn from_y(y1: f64, y2: f64) -> Self {
        Self { x1: y1 + y2, x2: y1 - y2 }
    }

    pub fn y(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.x1 - self.x2) / 2.0)
    }
}
