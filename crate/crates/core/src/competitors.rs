//! Baseline bands: undersmoothing and explicit bias correction.

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::estimator::{fit_curve, local_poly_deriv2, CurveEstimate, FitConfig};
use crate::naive::{build_naive_band, BandResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Competitor {
    /// Naive band at bandwidth `γ h`.
    Undersmooth,
    /// Naive half-width around `ĝ − bias`, bias from a pilot at bandwidth `h / λ`.
    BiasCorrect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompetitorConfig {
    pub method: Competitor,
    /// γ for undersmoothing, λ for bias correction; in (0, 1].
    pub factor: f64,
    pub base_h: f64,
}

impl CompetitorConfig {
    pub fn new(method: Competitor, factor: f64, base_h: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(invalid(alloc::format!("factor must lie in (0, 1], got {factor}")));
        }
        if !(base_h > 0.0 && base_h.is_finite()) {
            return Err(invalid("base bandwidth must be positive"));
        }
        Ok(Self { method, factor, base_h })
    }
}

/// Naive band of the fit at bandwidth `γ h`, with `s(X)` recomputed for `γ h`.
pub fn undersmooth_band(
    data: &Dataset,
    fit: &FitConfig,
    config: &CompetitorConfig,
    grid: &[f64],
    alpha: f64,
) -> Result<BandResult> {
    let est = fit_curve(data, &fit.with_bandwidth(config.factor * config.base_h), grid)?;
    build_naive_band(&est, alpha)
}

/// `(κ₂/2) h² g̃''(x)` with g̃'' from a local cubic fit at the pilot bandwidth `h / λ`.
pub fn estimate_bias(data: &Dataset, fit: &FitConfig, config: &CompetitorConfig, grid: &[f64]) -> Result<Vec<f64>> {
    let h = config.base_h;
    let curvature = local_poly_deriv2(data, h / config.factor, fit.kernel, grid)?;
    let c = 0.5 * fit.kernel.second_moment() * h * h;
    Ok(curvature.into_iter().map(|g2| c * g2).collect())
}

/// Bias-corrected band: center `ĝ − bias`, naive half-width at bandwidth `h`.
pub fn bias_corrected_band(
    data: &Dataset,
    fit: &FitConfig,
    config: &CompetitorConfig,
    grid: &[f64],
    alpha: f64,
) -> Result<BandResult> {
    let est = fit_curve(data, &fit.with_bandwidth(config.base_h), grid)?;
    let bias = estimate_bias(data, fit, config, grid)?;
    bias_corrected_from(&est, &bias, alpha)
}

/// Shift a naive band built from `est` by `−bias`.
pub fn bias_corrected_from(est: &CurveEstimate, bias: &[f64], alpha: f64) -> Result<BandResult> {
    let mut band = build_naive_band(est, alpha)?;
    for (j, b) in bias.iter().enumerate() {
        band.center[j] -= b;
        band.lower[j] -= b;
        band.upper[j] -= b;
    }
    Ok(band)
}
