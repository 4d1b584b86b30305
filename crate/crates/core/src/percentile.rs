//! Equal-tailed percentile bands calibrated by a double bootstrap.
//!
//! The first-level residual bootstrap gives signed standardized deviations
//! `D_b(x) = (ĝ*_b(x) − ĝ(x)) / s(X)(x)` whose empirical quantiles ẑ_β(x)
//! define the band `[ĝ + s ẑ_{α/2}, ĝ + s ẑ_{1−α/2}]`. For each first-level
//! replicate a second-level bootstrap around ĝ*_b produces the bootstrap-world
//! critical values ẑ*_β, and the bootstrap-world band covers `(x, ĝ(x))` iff
//! `ẑ*_{α/2} ≤ (ĝ(x) − ĝ*_b(x)) / s ≤ ẑ*_{1−α/2}`.
//!
//! Ranks follow the bootstrap convention `⌈β (B + 1)⌉` clamped to `[1, B]`, so
//! coverage is a step function of α with breakpoints on the lattice
//! `2k / (B₂ + 1)`. The level solution β̂ is taken on that lattice (plus α = 1).

use alloc::vec;
use alloc::vec::Vec;

use crate::calibration::{ceil_rank, profile_from_levels, replicate_stream, resample_responses, CalibrationProfile};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::estimator::{CurveEstimate, FitConfig, LinearSmoother};
use crate::exec::{Executor, Sequential};
use crate::naive::{BandKind, BandResult};
use crate::rng::{substream, tag};
use crate::variance::Residuals;

/// Default ceiling on `B₁ · B₂`.
pub const DEFAULT_MAX_COST: u64 = 1_000_000;

/// Percentile band and its per-point critical values.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileBand {
    pub band: BandResult,
    pub zhat_lo: Vec<f64>,
    pub zhat_hi: Vec<f64>,
}

/// Order statistic of rank `⌈β (B + 1)⌉` of ascending `sorted`.
fn rank_quantile(sorted: &[f64], beta: f64) -> f64 {
    let b = sorted.len();
    sorted[ceil_rank(beta, (b + 1) as f64, b) - 1]
}

/// ẑ_β(x) for each β in `betas`, from replicate-major signed deviations
/// (`deviations[b * N + j]`). Returns one vector per β.
pub fn percentile_critical_values(deviations: &[f64], grid_len: usize, betas: &[f64]) -> Result<Vec<Vec<f64>>> {
    if grid_len == 0 || deviations.is_empty() || deviations.len() % grid_len != 0 {
        return Err(invalid("deviations must hold B >= 1 full rows of the grid"));
    }
    let b = deviations.len() / grid_len;
    let mut out = vec![vec![0.0; grid_len]; betas.len()];
    let mut col = vec![0.0; b];
    for j in 0..grid_len {
        for (r, c) in col.iter_mut().enumerate() {
            *c = deviations[r * grid_len + j];
        }
        col.sort_by(f64::total_cmp);
        for (k, &beta) in betas.iter().enumerate() {
            out[k][j] = rank_quantile(&col, beta);
        }
    }
    Ok(out)
}

/// Band `[ĝ + s ẑ_{α/2}, ĝ + s ẑ_{1−α/2}]` from first-level deviations.
pub fn percentile_band(est: &CurveEstimate, deviations: &[f64], alpha: f64) -> Result<PercentileBand> {
    let n = est.grid.len();
    let mut z = percentile_critical_values(deviations, n, &[0.5 * alpha, 1.0 - 0.5 * alpha])?;
    let zhat_hi = z.pop().unwrap_or_default();
    let zhat_lo = z.pop().unwrap_or_default();
    let lower = (0..n).map(|j| est.ghat[j] + est.scale[j] * zhat_lo[j]).collect();
    let upper = (0..n).map(|j| est.ghat[j] + est.scale[j] * zhat_hi[j]).collect();
    Ok(PercentileBand {
        band: BandResult {
            grid: est.grid.clone(),
            center: est.ghat.clone(),
            lower,
            upper,
            alpha,
            kind: BandKind::Percentile,
        },
        zhat_lo,
        zhat_hi,
    })
}

/// Candidate levels `2k/(B₂ + 1) < 1` followed by 1, ascending.
pub fn level_lattice(inner: usize) -> Vec<f64> {
    let m = (inner + 1) as f64;
    let mut levels: Vec<f64> = (1..).map(|k| 2.0 * k as f64 / m).take_while(|&a| a < 1.0).collect();
    levels.push(1.0);
    levels
}

/// Whether `[o_{lo}, o_{hi}]` of ascending `sorted` at level α contains `d`.
pub fn equal_tailed_covers(sorted: &[f64], alpha: f64, d: f64) -> bool {
    rank_quantile(sorted, 0.5 * alpha) <= d && d <= rank_quantile(sorted, 1.0 - 0.5 * alpha)
}

/// Intermediate output of the double bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleBootstrapTrace {
    /// First-level deviations `(ĝ*_b − ĝ)/s`, replicate-major.
    pub deviations: Vec<f64>,
    /// Per first-level replicate and grid point, the largest lattice level at
    /// which the bootstrap-world band covers `(x, ĝ(x))`; 0 when none does.
    pub critical_levels: Vec<f64>,
    pub lattice: Vec<f64>,
    pub outer: usize,
    pub inner: usize,
}

impl DoubleBootstrapTrace {
    /// Double-bootstrap coverage estimate π̂(x_j, α) at a lattice level.
    pub fn pi_hat(&self, j: usize, alpha: f64) -> f64 {
        let n = self.deviations.len() / self.outer;
        let hits = (0..self.outer).filter(|&b| self.critical_levels[b * n + j] >= alpha).count();
        hits as f64 / self.outer as f64
    }
}

/// Result of [`double_bootstrap_calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleBootstrapResult {
    pub profile: CalibrationProfile,
    pub band: PercentileBand,
    pub trace: DoubleBootstrapTrace,
}

/// Settings for the double bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleBootstrapConfig {
    pub outer: usize,
    pub inner: usize,
    pub alpha0: f64,
    pub xi: f64,
    pub seed: u64,
    pub max_cost: u64,
}

/// Percentile band at level α̂_ξ(α₀) calibrated by a double bootstrap.
///
/// First-level replicate `b` uses the draws of
/// [`crate::calibration::make_residual_bootstrap`]; its `c`th second-level
/// resample is keyed by `(seed, b, c)`. The bandwidth stays fixed throughout.
pub fn double_bootstrap_calibrate(
    data: &Dataset,
    cfg: &FitConfig,
    est: &CurveEstimate,
    settings: &DoubleBootstrapConfig,
) -> Result<DoubleBootstrapResult> {
    double_bootstrap_calibrate_with(&Sequential, data, cfg, est, settings)
}

pub fn double_bootstrap_calibrate_with<E: Executor>(
    exec: &E,
    data: &Dataset,
    cfg: &FitConfig,
    est: &CurveEstimate,
    settings: &DoubleBootstrapConfig,
) -> Result<DoubleBootstrapResult> {
    let DoubleBootstrapConfig { outer, inner, alpha0, xi, seed, max_cost } = *settings;
    if outer == 0 || inner == 0 {
        return Err(invalid("double bootstrap needs B1, B2 >= 1"));
    }
    let cost = (outer as u64).saturating_mul(inner as u64);
    if cost > max_cost {
        return Err(Error::CostGuard { cost, limit: max_cost });
    }
    crate::calibration::check_targets(alpha0, xi)?;
    if est.bandwidth != cfg.bandwidth || est.scale.len() != est.grid.len() {
        return Err(invalid("estimate must come from the same bandwidth and grid"));
    }
    let n = data.len();
    let grid_len = est.grid.len();
    let grid_smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, &est.grid)?;
    let design_smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, data.x())?;
    let fitted = design_smoother.apply(data.y());
    let resid = Residuals::new(data.y(), &fitted);
    let lattice = level_lattice(inner);
    let standardize = |value: f64, center: f64, j: usize| {
        let s = est.scale[j];
        if value == center {
            0.0
        } else {
            (value - center) / s
        }
    };

    let rows: Vec<(Vec<f64>, Vec<f64>)> = exec.map(outer, |b| {
        let mut rng = replicate_stream(seed, b);
        let mut ystar = vec![0.0; n];
        resample_responses(&mut rng, &fitted, &resid.centered, &mut ystar);
        let gstar = grid_smoother.apply(&ystar);
        let gstar_design = design_smoother.apply(&ystar);
        let star_resid = Residuals::new(&ystar, &gstar_design);

        let mut inner_dev = vec![0.0; inner * grid_len];
        let mut ystar2 = vec![0.0; n];
        let mut gstar2 = vec![0.0; grid_len];
        for c in 0..inner {
            let mut rng2 = substream(seed, &[tag::DOUBLE_INNER, b as u64, c as u64]);
            resample_responses(&mut rng2, &gstar_design, &star_resid.centered, &mut ystar2);
            grid_smoother.apply_into(&ystar2, &mut gstar2);
            for j in 0..grid_len {
                inner_dev[c * grid_len + j] = standardize(gstar2[j], gstar[j], j);
            }
        }

        let mut critical = vec![0.0; grid_len];
        let mut col = vec![0.0; inner];
        for j in 0..grid_len {
            for (c, v) in col.iter_mut().enumerate() {
                *v = inner_dev[c * grid_len + j];
            }
            col.sort_by(f64::total_cmp);
            let d = standardize(est.ghat[j], gstar[j], j);
            critical[j] = lattice.iter().rev().copied().find(|&a| equal_tailed_covers(&col, a, d)).unwrap_or(0.0);
        }
        let dev = (0..grid_len).map(|j| standardize(gstar[j], est.ghat[j], j)).collect();
        (dev, critical)
    });

    let mut deviations = Vec::with_capacity(outer * grid_len);
    let mut critical_levels = Vec::with_capacity(outer * grid_len);
    for (d, c) in rows {
        deviations.extend(d);
        critical_levels.extend(c);
    }
    // β̂(x): the largest level reached by at least ⌈(1 − α₀)(B₁ + 1)⌉ replicates.
    let need = ceil_rank(1.0 - alpha0, (outer + 1) as f64, outer);
    let mut col = vec![0.0; outer];
    let beta_hat: Vec<f64> = (0..grid_len)
        .map(|j| {
            for (b, v) in col.iter_mut().enumerate() {
                *v = critical_levels[b * grid_len + j];
            }
            col.sort_by(|a, b| b.total_cmp(a));
            col[need - 1]
        })
        .collect();
    let profile = profile_from_levels(&est.grid, beta_hat, alpha0, xi)?;
    let band = percentile_band(est, &deviations, profile.alpha_hat_xi)?;
    Ok(DoubleBootstrapResult {
        profile,
        band,
        trace: DoubleBootstrapTrace { deviations, critical_levels, lattice, outer, inner },
    })
}
