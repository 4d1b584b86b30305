//! Error-variance estimators and the heteroscedastic scale function.

use alloc::vec::Vec;

use crate::data::{argsort, mean, Dataset};
use crate::error::Result;
use crate::estimator::LinearSmoother;
use crate::kernel::Kernel;

/// Raw residuals `Yᵢ − ĝ(Xᵢ)` and their centered version.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub raw: Vec<f64>,
    pub centered: Vec<f64>,
}

impl Residuals {
    pub fn new(y: &[f64], fitted: &[f64]) -> Self {
        Self::from_raw(y.iter().zip(fitted).map(|(y, f)| y - f).collect())
    }

    pub fn from_raw(raw: Vec<f64>) -> Self {
        let m = mean(&raw);
        let centered = raw.iter().map(|r| r - m).collect();
        Self { raw, centered }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Difference-based σ̂²: half the mean squared successive difference of the
/// responses once the pairs are sorted by x. Ties in x keep input order.
pub fn rice_variance(data: &Dataset) -> f64 {
    rice_variance_of(&argsort(data.x()), data.y())
}

/// [`rice_variance`] for responses `y` under a precomputed ascending design order.
pub fn rice_variance_of(order: &[usize], y: &[f64]) -> f64 {
    let n = order.len();
    let ss: f64 = order
        .windows(2)
        .map(|w| {
            let d = y[w[1]] - y[w[0]];
            d * d
        })
        .sum();
    ss / (2.0 * (n as f64 - 1.0))
}

/// Mean of squared centered residuals.
pub fn residual_variance(resid: &Residuals) -> f64 {
    resid.centered.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64
}

/// σ̂(x) = sqrt(max(0, m̂(x))) with m̂ the local linear smooth of squared centered residuals.
pub fn hetero_scale(data: &Dataset, resid: &Residuals, h: f64, kernel: Kernel, grid: &[f64]) -> Result<Vec<f64>> {
    let smoother = LinearSmoother::local_linear(data.x(), h, kernel, grid)?;
    Ok(hetero_scale_with(&smoother, &resid.centered))
}

pub(crate) fn hetero_scale_with(smoother: &LinearSmoother, centered: &[f64]) -> Vec<f64> {
    let sq: Vec<f64> = centered.iter().map(|e| e * e).collect();
    smoother.apply(&sq).into_iter().map(|m| libm::sqrt(m.max(0.0))).collect()
}
