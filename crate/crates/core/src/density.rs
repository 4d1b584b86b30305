//! Pointwise bands for a univariate density with smoothed-bootstrap calibration.
//!
//! The naive band is `f̂ ± [κ f̂(x) / (n h)]^{1/2} z_{1−α/2}`. Bootstrap samples
//! are drawn from f̂ itself (a resampled point plus `h` times kernel noise), the
//! density is re-estimated at the same bandwidth, and the calibration machinery
//! of [`crate::calibration`] turns the standardized distances into α̂_ξ(α₀).

use alloc::vec::Vec;

use rand::Rng;

use crate::calibration::{calibrate, BootstrapEnsemble, CalibrationProfile, ReplicateRow};
use crate::error::{invalid, Result};
use crate::estimator::kde;
use crate::exec::{Executor, Sequential};
use crate::kernel::Kernel;
use crate::naive::check_level;
use crate::normal;
use crate::rng::{substream, tag, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityBand {
    pub grid: Vec<f64>,
    pub fhat: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub alpha: f64,
    pub h: f64,
    /// Lower envelope was clamped at zero.
    pub lower_clamped: bool,
}

impl DensityBand {
    pub fn covers(&self, j: usize, f: f64) -> bool {
        self.lower[j] <= f && f <= self.upper[j]
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 || sample.iter().any(|v| !v.is_finite()) {
        return Err(invalid("density sample needs at least 2 finite values"));
    }
    Ok(())
}

/// Standard-error unit `[κ f(x) / (n h)]^{1/2}`.
fn unit(kappa: f64, f: f64, n: usize, h: f64) -> f64 {
    libm::sqrt(kappa * f.max(0.0) / (n as f64 * h))
}

fn band_from(grid: &[f64], fhat: Vec<f64>, n: usize, h: f64, kernel: Kernel, alpha: f64, clamp: bool) -> DensityBand {
    let z = normal::two_sided_z(alpha);
    let kappa = kernel.roughness();
    let half: Vec<f64> = fhat
        .iter()
        .map(|&f| {
            let u = unit(kappa, f, n, h);
            if u == 0.0 {
                0.0
            } else {
                u * z
            }
        })
        .collect();
    let lower = fhat.iter().zip(&half).map(|(f, w)| if clamp { (f - w).max(0.0) } else { f - w }).collect();
    let upper = fhat.iter().zip(&half).map(|(f, w)| f + w).collect();
    DensityBand { grid: grid.to_vec(), fhat, lower, upper, alpha, h, lower_clamped: clamp }
}

/// Naive band `f̂ ± [κ f̂ / (n h)]^{1/2} z_{1−α/2}`; `clamp_lower` floors the lower envelope at 0.
pub fn density_naive_band(
    sample: &[f64],
    h: f64,
    kernel: Kernel,
    grid: &[f64],
    alpha: f64,
    clamp_lower: bool,
) -> Result<DensityBand> {
    check_sample(sample)?;
    check_level(alpha)?;
    let fhat = kde(sample, h, kernel, grid)?;
    Ok(band_from(grid, fhat, sample.len(), h, kernel, alpha, clamp_lower))
}

/// One draw of size n from f̂: `X*_i = X_{J_i} + h W_i`, `J_i` uniform, `W_i ~ K`.
pub fn smoothed_bootstrap_sample_from(rng: &mut StreamRng, sample: &[f64], h: f64, kernel: Kernel) -> Result<Vec<f64>> {
    let n = sample.len();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let j = rng.random_range(0..n);
        out.push(sample[j] + h * kernel.sample(rng)?);
    }
    Ok(out)
}

/// Smoothed-bootstrap resample keyed by `seed`.
pub fn smoothed_bootstrap_sample(sample: &[f64], h: f64, kernel: Kernel, seed: u64) -> Result<Vec<f64>> {
    check_sample(sample)?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(invalid("bandwidth must be finite and nonnegative"));
    }
    smoothed_bootstrap_sample_from(&mut substream(seed, &[tag::SMOOTHED_BOOTSTRAP]), sample, h, kernel)
}

/// Calibrated density band and the ingredients that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCalibration {
    pub band: DensityBand,
    pub profile: CalibrationProfile,
    pub ensemble: BootstrapEnsemble,
    /// Number of `(b, x)` cells where f̂* vanished while f̂ did not.
    pub zero_density_cells: usize,
}

/// Settings for [`density_band_calibrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCalibrationConfig {
    pub h: f64,
    pub kernel: Kernel,
    pub alpha0: f64,
    pub xi: f64,
    pub replicates: usize,
    pub seed: u64,
    pub clamp_lower: bool,
}

pub fn density_band_calibrate(
    sample: &[f64],
    grid: &[f64],
    cfg: &DensityCalibrationConfig,
) -> Result<DensityCalibration> {
    density_band_calibrate_with(&Sequential, sample, grid, cfg)
}

/// Smoothed-bootstrap calibration: replicate `b` (substream `(seed, b)`) draws
/// from f̂, re-estimates f̂* at the same `h`, and records
/// `T_b(x) = |f̂*(x) − f̂(x)| / [κ f̂*(x)/(n h)]^{1/2}`. A vanishing f̂* where f̂ > 0
/// gives `T = +∞`. β̂, α̂_ξ and the final band follow the regression recipe.
pub fn density_band_calibrate_with<E: Executor>(
    exec: &E,
    sample: &[f64],
    grid: &[f64],
    cfg: &DensityCalibrationConfig,
) -> Result<DensityCalibration> {
    check_sample(sample)?;
    if cfg.replicates == 0 {
        return Err(invalid("bootstrap needs at least one replicate"));
    }
    // Surface an unsamplable kernel before spawning replicates.
    cfg.kernel.sample(&mut substream(cfg.seed, &[]))?;
    let n = sample.len();
    let fhat = kde(sample, cfg.h, cfg.kernel, grid)?;
    let kappa = cfg.kernel.roughness();
    let rows: Vec<Result<ReplicateRow>> = exec.map(cfg.replicates, |b| {
        let mut rng = substream(cfg.seed, &[tag::SMOOTHED_BOOTSTRAP, b as u64]);
        let star = smoothed_bootstrap_sample_from(&mut rng, sample, cfg.h, cfg.kernel)?;
        let estimates = kde(&star, cfg.h, cfg.kernel, grid)?;
        let units = estimates.iter().map(|&f| unit(kappa, f, n, cfg.h)).collect();
        Ok(ReplicateRow { estimates, units, sigma2: f64::NAN })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let ensemble = BootstrapEnsemble::from_rows(grid, &fhat, cfg.seed, rows);
    let zero_density_cells =
        ensemble.estimates.iter().enumerate().filter(|(k, &f)| f <= 0.0 && fhat[k % grid.len()] > 0.0).count();
    let profile = calibrate(&ensemble, cfg.alpha0, cfg.xi)?;
    let band = band_from(grid, fhat, n, cfg.h, cfg.kernel, profile.alpha_hat_xi, cfg.clamp_lower);
    Ok(DensityCalibration { band, profile, ensemble, zero_density_cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_band_arithmetic() {
        // kde of a point mass with the Epanechnikov kernel at its center: 0.75 / h
        let sample = [0.0, 0.0];
        let b = density_naive_band(&sample, 1.5, Kernel::Epanechnikov, &[0.0, 5.0], 0.05, false).unwrap();
        let f = 0.75 / 1.5;
        let expected = libm::sqrt(0.6 * f / (2.0 * 1.5)) * normal::two_sided_z(0.05);
        assert!((b.upper[0] - b.fhat[0] - expected).abs() < 1e-14);
        assert_eq!(b.upper[1], 0.0);
        assert_eq!(b.lower[1], 0.0);
    }

    #[test]
    fn zero_bandwidth_resample_reuses_points() {
        let sample = [0.3, -1.2, 4.0, 2.5];
        let star = smoothed_bootstrap_sample(&sample, 0.0, Kernel::Gaussian, 3).unwrap();
        assert!(star.iter().all(|v| sample.contains(v)));
        assert_eq!(star, smoothed_bootstrap_sample(&sample, 0.0, Kernel::Gaussian, 3).unwrap());
        assert!(smoothed_bootstrap_sample(&sample, 0.2, Kernel::Biweight, 3).is_err());
    }
}
