//! Small statistics helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// A mean with its batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|mean - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Weighted mean over consecutive batches; the standard error is the
/// spread of the batch means divided by `sqrt(batches)`.
pub fn batch_means(values: &[f64], weights: &[f64], batches: usize) -> Result<Estimate> {
    if values.len() != weights.len() {
        return Err(Error::InvalidParameter("values and weights differ in length".into()));
    }
    if batches < 2 || values.len() < batches {
        return Err(Error::InsufficientSamples(format!(
            "{} samples for {batches} batches",
            values.len()
        )));
    }
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::ZeroDenominator("total weight"));
    }
    let mean = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
    let size = values.len() / batches;
    let mut bm = Vec::with_capacity(batches);
    for b in 0..batches {
        let lo = b * size;
        let hi = if b + 1 == batches { values.len() } else { lo + size };
        let w: f64 = weights[lo..hi].iter().sum();
        if w > 0.0 {
            let s: f64 = values[lo..hi].iter().zip(&weights[lo..hi]).map(|(v, w)| v * w).sum();
            bm.push(s / w);
        }
    }
    let m = bm.len() as f64;
    if bm.len() < 2 {
        return Err(Error::InsufficientSamples("fewer than two weighted batches".into()));
    }
    let bmean = bm.iter().sum::<f64>() / m;
    let var = bm.iter().map(|x| (x - bmean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(Estimate { mean, se: (var / m).sqrt() })
}
