//! Bootstrap calibration of the symmetric band's nominal level.
//!
//! The residual bootstrap keeps the design fixed, resamples centered residuals
//! onto ĝ, refits at the original bandwidth and records, per replicate `b` and
//! grid point `x`, the standardized distance
//! `T_b(x) = |ĝ*_b(x) − ĝ(x)| / (s(X)(x) σ̂*_b)`. The bootstrap band at level α
//! covers `(x, ĝ(x))` exactly when `T_b(x) ≤ z_{1−α/2}`, so the coverage
//! estimate π̂(x, α), its level solution β̂(x, α₀) and the ξ-quantile α̂_ξ(α₀)
//! all derive from the `T` matrix.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::{argsort, Dataset};
use crate::error::{invalid, Error, Result};
use crate::estimator::{CurveEstimate, FitConfig, LinearSmoother, VarianceEstimator};
use crate::exec::{Executor, Sequential};
use crate::naive::{symmetric_band, BandResult};
use crate::normal;
use crate::rng::{substream, tag, StreamRng};
use crate::variance::{hetero_scale_with, residual_variance, rice_variance_of, Residuals};

/// Order-statistic rank `⌈p·m⌉` clamped to `[1, len]`.
///
/// A slack of 1e-9 absorbs representation error in `p·m`, so that for example
/// `p = 0.95, m = 20` yields rank 19.
pub fn ceil_rank(p: f64, m: f64, len: usize) -> usize {
    let r = libm::ceil(p * m - 1e-9);
    if r < 1.0 {
        1
    } else {
        (r as usize).min(len)
    }
}

/// Empirical quantile by the bootstrap rank rule `⌈p (B + 1)⌉` of ascending `sorted` data.
pub fn bootstrap_quantile(sorted: &[f64], p: f64) -> f64 {
    let b = sorted.len();
    sorted[ceil_rank(p, (b + 1) as f64, b) - 1]
}

/// Bootstrap replicates summarized on an evaluation grid.
///
/// Matrices are stored replicate-major: entry `(b, j)` lives at `b * N + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub grid: Vec<f64>,
    /// Estimate being calibrated (ĝ or f̂) on the grid.
    pub center: Vec<f64>,
    pub replicates: usize,
    /// Bootstrap estimates ĝ*_b(x).
    pub estimates: Vec<f64>,
    /// Standard-error unit of the bootstrap band, e.g. `s(X)(x) σ̂*_b`.
    pub units: Vec<f64>,
    /// `T_b(x) = |estimate − center| / unit`, 0 when both vanish, +∞ for a zero unit.
    pub tstat: Vec<f64>,
    /// Per-replicate σ̂*² (residual-variance of the resample on the heteroscedastic path; NaN for density ensembles).
    pub sigma2star: Vec<f64>,
    pub seed: u64,
}

impl BootstrapEnsemble {
    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn t(&self, b: usize, j: usize) -> f64 {
        self.tstat[b * self.grid.len() + j]
    }

    /// `T_1(x_j), …, T_B(x_j)`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.replicates).map(|b| self.t(b, j)).collect()
    }

    /// Literal membership of `(x_j, center_j)` in the `b`th bootstrap band at level α.
    pub fn covers_literal(&self, b: usize, j: usize, alpha: f64) -> bool {
        let k = b * self.grid.len() + j;
        let half = self.units[k] * normal::two_sided_z(alpha);
        let half = if self.units[k] == 0.0 { 0.0 } else { half };
        self.estimates[k] - half <= self.center[j] && self.center[j] <= self.estimates[k] + half
    }

    pub(crate) fn from_rows(grid: &[f64], center: &[f64], seed: u64, rows: Vec<ReplicateRow>) -> Self {
        let n = grid.len();
        let b = rows.len();
        let mut ens = Self {
            grid: grid.to_vec(),
            center: center.to_vec(),
            replicates: b,
            estimates: Vec::with_capacity(b * n),
            units: Vec::with_capacity(b * n),
            tstat: Vec::with_capacity(b * n),
            sigma2star: Vec::with_capacity(b),
            seed,
        };
        for row in rows {
            for j in 0..n {
                ens.tstat.push(standardized_distance(row.estimates[j], center[j], row.units[j]));
            }
            ens.estimates.extend(row.estimates);
            ens.units.extend(row.units);
            ens.sigma2star.push(row.sigma2);
        }
        ens
    }
}

pub(crate) struct ReplicateRow {
    pub estimates: Vec<f64>,
    pub units: Vec<f64>,
    pub sigma2: f64,
}

/// `|estimate − center| / unit` with `0/0 = 0` and `d/0 = +∞`.
pub(crate) fn standardized_distance(estimate: f64, center: f64, unit: f64) -> f64 {
    let d = (estimate - center).abs();
    if d == 0.0 {
        0.0
    } else if unit > 0.0 {
        d / unit
    } else {
        f64::INFINITY
    }
}

fn check_estimate(data: &Dataset, cfg: &FitConfig, est: &CurveEstimate) -> Result<()> {
    if est.ghat.len() != est.grid.len() || est.scale.len() != est.grid.len() {
        return Err(invalid("curve estimate sequences must match the grid length"));
    }
    if est.bandwidth != cfg.bandwidth {
        return Err(invalid("bootstrap must reuse the bandwidth of the original fit"));
    }
    if data.is_empty() {
        return Err(invalid("empty dataset"));
    }
    Ok(())
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates == 0 {
        Err(invalid("bootstrap needs at least one replicate"))
    } else {
        Ok(())
    }
}

/// Draws `Y*_i = fitted_i + innovations[J_i]` with `J_i` uniform on `0..n`,
/// for `i = 0..n` in order, from `rng`.
pub(crate) fn resample_responses(rng: &mut StreamRng, fitted: &[f64], innovations: &[f64], out: &mut [f64]) {
    let n = innovations.len();
    for (o, f) in out.iter_mut().zip(fitted) {
        *o = f + innovations[rng.random_range(0..n)];
    }
}

/// The substream of replicate `b` of the residual bootstrap under `seed`.
pub fn replicate_stream(seed: u64, b: usize) -> StreamRng {
    substream(seed, &[tag::RESIDUAL_BOOTSTRAP, b as u64])
}

/// Residual bootstrap of ĝ at its own bandwidth.
///
/// Replicate `b` draws `n` residual indices from [`replicate_stream`]`(seed, b)`,
/// forms `Y*_i = ĝ(X_i) + ε̂_{J_i}`, refits ĝ* with the same kernel and bandwidth,
/// and computes σ̂*² with the same estimator as σ̂². Design points are never resampled.
pub fn make_residual_bootstrap(
    data: &Dataset,
    cfg: &FitConfig,
    est: &CurveEstimate,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    make_residual_bootstrap_with(&Sequential, data, cfg, est, replicates, seed)
}

pub fn make_residual_bootstrap_with<E: Executor>(
    exec: &E,
    data: &Dataset,
    cfg: &FitConfig,
    est: &CurveEstimate,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    check_estimate(data, cfg, est)?;
    check_replicates(replicates)?;
    let grid_smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, &est.grid)?;
    let design_smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, data.x())?;
    let fitted = design_smoother.apply(data.y());
    let resid = Residuals::new(data.y(), &fitted);
    let order = argsort(data.x());
    let n = data.len();

    let rows = exec.map(replicates, |b| {
        let mut rng = replicate_stream(seed, b);
        let mut ystar = vec![0.0; n];
        resample_responses(&mut rng, &fitted, &resid.centered, &mut ystar);
        let estimates = grid_smoother.apply(&ystar);
        let sigma2 = match cfg.variance {
            VarianceEstimator::Rice => rice_variance_of(&order, &ystar),
            VarianceEstimator::Residual => {
                let refit = design_smoother.apply(&ystar);
                residual_variance(&Residuals::new(&ystar, &refit))
            }
        };
        let sigma = libm::sqrt(sigma2);
        let units = est.scale.iter().map(|s| s * sigma).collect();
        ReplicateRow { estimates, units, sigma2 }
    });
    Ok(BootstrapEnsemble::from_rows(&est.grid, &est.ghat, seed, rows))
}

/// Heteroscedastic residual bootstrap: `Y*_i = ĝ(X_i) + σ̂(X_i) e*_i`.
///
/// `sigma_design` holds σ̂ at the design points. Residuals are standardized by
/// σ̂(X_i), re-centered and rescaled to unit variance before resampling. Each
/// replicate re-estimates σ̂*(x) by smoothing its own squared centered
/// residuals, and `T` uses `s(X)(x) σ̂*(x)`. Index draws coincide with
/// [`make_residual_bootstrap`] under the same seed.
pub fn make_hetero_bootstrap(
    data: &Dataset,
    cfg: &FitConfig,
    est: &CurveEstimate,
    sigma_design: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    make_hetero_bootstrap_with(&Sequential, data, cfg, est, sigma_design, replicates, seed)
}

/// Tolerance below which σ̂(X_i) counts as zero.
pub const ZERO_SCALE_TOL: f64 = 1e-12;

/// Residuals divided by σ̂(X_i), re-centered and scaled to unit variance.
pub fn standardize_residuals(centered: &[f64], sigma_design: &[f64]) -> Result<Vec<f64>> {
    let mut e = Vec::with_capacity(centered.len());
    for (i, (&r, &s)) in centered.iter().zip(sigma_design).enumerate() {
        if s > ZERO_SCALE_TOL {
            e.push(r / s);
        } else if r == 0.0 {
            e.push(0.0);
        } else {
            return Err(Error::ZeroScale { index: i });
        }
    }
    let m = e.iter().sum::<f64>() / e.len() as f64;
    e.iter_mut().for_each(|v| *v -= m);
    let sd = libm::sqrt(e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64);
    if sd > 0.0 {
        e.iter_mut().for_each(|v| *v /= sd);
    }
    Ok(e)
}

pub fn make_hetero_bootstrap_with<E: Executor>(
    exec: &E,
    data: &Dataset,
    cfg: &FitConfig,
    est: &CurveEstimate,
    sigma_design: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<BootstrapEnsemble> {
    check_estimate(data, cfg, est)?;
    check_replicates(replicates)?;
    let n = data.len();
    if sigma_design.len() != n || sigma_design.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(invalid("sigma at design points must be n finite nonnegative values"));
    }
    let grid_smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, &est.grid)?;
    let design_smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, data.x())?;
    let fitted = design_smoother.apply(data.y());
    let resid = Residuals::new(data.y(), &fitted);
    let standardized = standardize_residuals(&resid.centered, sigma_design)?;

    let rows = exec.map(replicates, |b| {
        let mut rng = replicate_stream(seed, b);
        let mut draws = vec![0.0; n];
        resample_responses(&mut rng, &vec![0.0; n], &standardized, &mut draws);
        let ystar: Vec<f64> = fitted.iter().zip(sigma_design).zip(&draws).map(|((f, s), e)| f + s * e).collect();
        let estimates = grid_smoother.apply(&ystar);
        let refit = design_smoother.apply(&ystar);
        let star_resid = Residuals::new(&ystar, &refit);
        let sigma_star = hetero_scale_with(&grid_smoother, &star_resid.centered);
        let units = est.scale.iter().zip(&sigma_star).map(|(s, v)| s * v).collect();
        ReplicateRow { estimates, units, sigma2: residual_variance(&star_resid) }
    });
    Ok(BootstrapEnsemble::from_rows(&est.grid, &est.ghat, seed, rows))
}

/// π̂(x_j, α): fraction of replicates whose band covers `(x_j, ĝ(x_j))`.
pub fn pi_hat(ens: &BootstrapEnsemble, j: usize, alpha: f64) -> f64 {
    let z = normal::two_sided_z(alpha);
    let covered = (0..ens.replicates).filter(|&b| ens.t(b, j) <= z).count();
    covered as f64 / ens.replicates as f64
}

/// Level β̂ solving π̂(x, β) = 1 − α₀ on the conservative side.
///
/// With `q` the order statistic of rank `⌈(1 − α₀)(B + 1)⌉` (clamped to `[1, B]`)
/// of `T_1(x), …, T_B(x)`, β̂ = 2(1 − Φ(q)), nudged down by ulps if rounding
/// would put `z_{1−β̂/2}` below `q`. Hence π̂(x, β̂) ≥ 1 − α₀ always.
pub fn beta_hat(ens: &BootstrapEnsemble, j: usize, alpha0: f64) -> f64 {
    let mut col = ens.column(j);
    col.sort_by(f64::total_cmp);
    level_for_quantile(bootstrap_quantile(&col, 1.0 - alpha0))
}

/// Largest level whose critical value is at least `q`.
pub(crate) fn level_for_quantile(q: f64) -> f64 {
    let mut beta = normal::two_sided_level(q);
    while beta > 0.0 && normal::two_sided_z(beta) < q {
        beta = f64::from_bits(beta.to_bits() - 1);
    }
    beta
}

/// Level solutions β̂ and their ξ-quantile on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    pub grid: Vec<f64>,
    pub beta_hat: Vec<f64>,
    /// Calibrated level α̂_ξ(α₀).
    pub alpha_hat_xi: f64,
    pub alpha0: f64,
    pub xi: f64,
}

impl CalibrationProfile {
    /// Rebuild the profile for another ξ.
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        profile_from_levels(&self.grid, self.beta_hat.clone(), self.alpha0, xi)
    }
}

pub(crate) fn check_targets(alpha0: f64, xi: f64) -> Result<()> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(invalid(alloc::format!("alpha0 must lie in (0, 1), got {alpha0}")));
    }
    if !(xi > 0.0 && xi <= 0.5) {
        return Err(invalid(alloc::format!("xi must lie in (0, 1/2], got {xi}")));
    }
    Ok(())
}

/// Lower empirical ξ-quantile (rank `⌈ξN⌉`) of the level solutions.
pub fn xi_quantile(levels: &[f64], xi: f64) -> f64 {
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[ceil_rank(xi, sorted.len() as f64, sorted.len()) - 1]
}

pub(crate) fn profile_from_levels(
    grid: &[f64],
    beta_hat: Vec<f64>,
    alpha0: f64,
    xi: f64,
) -> Result<CalibrationProfile> {
    check_targets(alpha0, xi)?;
    if beta_hat.is_empty() {
        return Err(invalid("calibration needs at least one grid point"));
    }
    let alpha_hat_xi = xi_quantile(&beta_hat, xi);
    Ok(CalibrationProfile { grid: grid.to_vec(), beta_hat, alpha_hat_xi, alpha0, xi })
}

/// β̂ at every grid point and the calibrated level α̂_ξ(α₀).
pub fn calibrate(ens: &BootstrapEnsemble, alpha0: f64, xi: f64) -> Result<CalibrationProfile> {
    check_targets(alpha0, xi)?;
    let beta: Vec<f64> = (0..ens.grid_len()).map(|j| beta_hat(ens, j, alpha0)).collect();
    profile_from_levels(&ens.grid, beta, alpha0, xi)
}

/// Symmetric band at the calibrated level α̂_ξ(α₀).
pub fn final_band(est: &CurveEstimate, profile: &CalibrationProfile) -> Result<BandResult> {
    if est.grid != profile.grid {
        return Err(invalid("calibration profile was computed on a different grid"));
    }
    let sigma = est.sigma_hat();
    let unit: Vec<f64> = est.scale.iter().map(|s| s * sigma).collect();
    Ok(symmetric_band(&est.grid, &est.ghat, &unit, profile.alpha_hat_xi))
}

/// Heteroscedastic band `ĝ ± s(X)(x) σ̂(x) z` at the calibrated level.
pub fn final_hetero_band(est: &CurveEstimate, sigma_grid: &[f64], profile: &CalibrationProfile) -> Result<BandResult> {
    if est.grid != profile.grid || sigma_grid.len() != est.grid.len() {
        return Err(invalid("calibration profile was computed on a different grid"));
    }
    let unit: Vec<f64> = est.scale.iter().zip(sigma_grid).map(|(s, v)| s * v).collect();
    Ok(symmetric_band(&est.grid, &est.ghat, &unit, profile.alpha_hat_xi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canned(columns: &[&[f64]]) -> BootstrapEnsemble {
        let n = columns.len();
        let b = columns[0].len();
        let rows = (0..b)
            .map(|r| ReplicateRow {
                estimates: (0..n).map(|j| columns[j][r]).collect(),
                units: vec![1.0; n],
                sigma2: 1.0,
            })
            .collect();
        BootstrapEnsemble::from_rows(&vec![0.0; n], &vec![0.0; n], 0, rows)
    }

    #[test]
    fn rank_arithmetic() {
        assert_eq!(ceil_rank(0.95, 20.0, 19), 19);
        assert_eq!(ceil_rank(0.95, 100.0, 99), 95);
        assert_eq!(ceil_rank(0.1, 10.0, 10), 1);
        assert_eq!(ceil_rank(0.0, 10.0, 10), 1);
        assert_eq!(ceil_rank(1.0, 11.0, 10), 10);
        assert_eq!(ceil_rank(0.3, 10.0, 9), 3);
    }

    #[test]
    fn pi_hat_enumeration() {
        let ens = canned(&[&[0.5, 1.0, 2.0, 3.0]]);
        assert_eq!(pi_hat(&ens, 0, 0.05), 0.5);
        assert_eq!(pi_hat(&ens, 0, 1e-9), 1.0);
        assert_eq!(pi_hat(&ens, 0, 1.0), 0.0);
    }

    #[test]
    fn beta_hat_cases() {
        let zero = canned(&[&[0.0; 9]]);
        assert_eq!(beta_hat(&zero, 0, 0.05), 1.0);

        let t: Vec<f64> = (1..=19).map(|b| b as f64 * 0.1).collect();
        let ens = canned(&[&t]);
        let beta = beta_hat(&ens, 0, 0.05);
        assert!(normal::two_sided_z(beta) >= 1.9);
        assert_eq!(pi_hat(&ens, 0, beta), 1.0);

        let t: Vec<f64> = (1..=99).map(|b| b as f64 / 10.0).collect();
        let beta = beta_hat(&canned(&[&t]), 0, 0.05);
        assert!(beta < 1e-20);
    }

    #[test]
    fn xi_quantile_rank() {
        let levels: Vec<f64> = (1..=10).map(|i| i as f64 / 100.0).collect();
        assert_eq!(xi_quantile(&levels, 0.1), 0.01);
        assert_eq!(xi_quantile(&[0.03; 7], 0.37), 0.03);
    }

    #[test]
    fn targets_validated() {
        let ens = canned(&[&[0.5, 1.0]]);
        assert!(calibrate(&ens, 0.05, 0.6).is_err());
        assert!(calibrate(&ens, 0.05, 0.0).is_err());
        assert!(calibrate(&ens, 1.0, 0.1).is_err());
        assert!(calibrate(&ens, 0.05, 0.5).is_ok());
    }

    #[test]
    fn standardization_and_zero_scale() {
        let e = standardize_residuals(&[1.0, -1.0, 2.0, -2.0], &[1.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(standardize_residuals(&[1.0, -1.0], &[1.0, 0.0]), Err(Error::ZeroScale { index: 1 }));
        assert_eq!(standardize_residuals(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }
}
