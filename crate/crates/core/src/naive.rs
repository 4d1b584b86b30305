//! Symmetric normal-template bands and their limiting coverage under bias.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::estimator::CurveEstimate;
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    NormalSymmetric,
    Percentile,
}

/// Pointwise band on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandResult {
    pub grid: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nominal miscoverage level the envelopes were built at.
    pub alpha: f64,
    pub kind: BandKind,
}

impl BandResult {
    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn mean_width(&self) -> f64 {
        (0..self.grid.len()).map(|j| self.width(j)).sum::<f64>() / self.grid.len() as f64
    }

    pub fn covers(&self, j: usize, y: f64) -> bool {
        self.lower[j] <= y && y <= self.upper[j]
    }
}

/// `center ± unit · z_{1−α/2}` for α ∈ [0, 1]; α = 0 yields infinite envelopes.
pub(crate) fn symmetric_band(grid: &[f64], center: &[f64], unit: &[f64], alpha: f64) -> BandResult {
    let z = normal::two_sided_z(alpha);
    let half: Vec<f64> = unit.iter().map(|u| if *u == 0.0 { 0.0 } else { u * z }).collect();
    BandResult {
        grid: grid.to_vec(),
        center: center.to_vec(),
        lower: center.iter().zip(&half).map(|(c, h)| c - h).collect(),
        upper: center.iter().zip(&half).map(|(c, h)| c + h).collect(),
        alpha,
        kind: BandKind::NormalSymmetric,
    }
}

pub(crate) fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(alloc::format!("level must lie in (0, 1], got {alpha}")))
    }
}

/// Band `ĝ ± s(X) σ̂ z_{1−α/2}`. α = 1 collapses the band onto ĝ.
pub fn build_naive_band(est: &CurveEstimate, alpha: f64) -> Result<BandResult> {
    check_level(alpha)?;
    let sigma = est.sigma_hat();
    let unit: Vec<f64> = est.scale.iter().map(|s| s * sigma).collect();
    if unit.iter().any(|u| !u.is_finite()) {
        return Err(invalid("band scale must be finite"));
    }
    Ok(symmetric_band(&est.grid, &est.ghat, &unit, alpha))
}

/// Band `ĝ ± s(X)(x) σ̂(x) z_{1−α/2}` with a pointwise error scale.
pub fn build_hetero_band(est: &CurveEstimate, sigma_x: &[f64], alpha: f64) -> Result<BandResult> {
    check_level(alpha)?;
    if sigma_x.len() != est.grid.len() {
        return Err(invalid("sigma(x) must have one value per grid point"));
    }
    let unit: Vec<f64> = est.scale.iter().zip(sigma_x).map(|(s, v)| s * v).collect();
    Ok(symmetric_band(&est.grid, &est.ghat, &unit, alpha))
}

/// Limiting coverage `Φ(z + b) − Φ(−z + b)` of the naive band when bias shifts
/// the standardized estimator by `b`, with `z = z_{1−α/2}`.
pub fn asymptotic_coverage(b: f64, alpha: f64) -> f64 {
    let z = normal::two_sided_z(alpha);
    // Φ(z + b) − Φ(b − z), written with the symmetric argument |b| to keep tails accurate.
    let b = b.abs();
    normal::sf(b - z) - normal::sf(b + z)
}
