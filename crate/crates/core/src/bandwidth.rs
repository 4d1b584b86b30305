//! Empirical bandwidth choice for the local linear estimator.

use alloc::vec::Vec;

use crate::data::{mean, Dataset};
use crate::error::{invalid, Error, Result};
use crate::estimator::{sorted_pairs, weighted_polyfit, LinearSmoother};
use crate::exec::{Executor, Sequential};
use crate::kernel::Kernel;
use crate::variance::{residual_variance, Residuals};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMethod {
    PlugIn,
    CrossValidation,
}

/// Intermediate quantities of a bandwidth choice.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    PlugIn {
        /// Residual variance of the blocked quartic pilot.
        sigma2: f64,
        /// Mean squared pilot second derivative at the design points.
        theta22: f64,
        blocks: usize,
        /// The curvature estimate vanished and `range · n^{-1/5}` was used.
        fallback: bool,
    },
    CrossValidation {
        /// `(h, leave-one-out mean squared error)`; degenerate candidates score `+∞`.
        curve: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthResult {
    pub h: f64,
    pub method: BandwidthMethod,
    pub diagnostics: Diagnostics,
}

/// Largest number of equal-count blocks for the quartic pilot: `max(1, min(5, ⌊n/20⌋))`.
pub fn pilot_blocks(n: usize) -> usize {
    (n / 20).clamp(1, 5)
}

/// Blocked quartic least-squares fit of x-sorted data.
struct QuarticPilot {
    fitted: Vec<f64>,
    curvature: Vec<f64>,
    rss: f64,
    degenerate: bool,
}

fn quartic_pilot(xs: &[f64], ys: &[f64], blocks: usize) -> QuarticPilot {
    let n = xs.len();
    let mut fitted = Vec::with_capacity(n);
    let mut curvature = Vec::with_capacity(n);
    let mut degenerate = false;
    for b in 0..blocks {
        let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
        let (bx, by) = (&xs[lo..hi], &ys[lo..hi]);
        let center = 0.5 * (bx[0] + bx[bx.len() - 1]);
        let half = 0.5 * (bx[bx.len() - 1] - bx[0]);
        let coef = if half > 0.0 {
            let rows: Vec<(f64, f64, f64)> = bx.iter().zip(by).map(|(&x, &y)| ((x - center) / half, y, 1.0)).collect();
            weighted_polyfit(&rows, 4)
        } else {
            None
        };
        match coef {
            Some(c) => {
                for &x in bx {
                    let t = (x - center) / half;
                    fitted.push(c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4]))));
                    curvature.push((2.0 * c[2] + t * (6.0 * c[3] + 12.0 * c[4] * t)) / (half * half));
                }
            }
            None => {
                degenerate = true;
                let m = mean(by);
                fitted.extend(core::iter::repeat(m).take(bx.len()));
                curvature.extend(core::iter::repeat(0.0).take(bx.len()));
            }
        }
    }
    let rss = ys.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
    QuarticPilot { fitted, curvature, rss, degenerate }
}

/// Block count in `1..=pilot_blocks(n)` minimizing Mallows' `C_p`,
/// `RSS(N) / [RSS(N_max) / (n − 5 N_max)] − (n − 10 N)`.
fn choose_blocks(xs: &[f64], ys: &[f64]) -> (usize, QuarticPilot) {
    let n = xs.len();
    let n_max = pilot_blocks(n);
    let mut pilots: Vec<QuarticPilot> = (1..=n_max).map(|b| quartic_pilot(xs, ys, b)).collect();
    let scale = pilots[n_max - 1].rss / (n - 5 * n_max) as f64;
    let mut best = 0;
    if scale > 0.0 {
        let cp = |k: usize| pilots[k].rss / scale - (n as f64 - 10.0 * (k + 1) as f64);
        for k in 1..n_max {
            if !pilots[k].degenerate && cp(k) < cp(best) {
                best = k;
            }
        }
    }
    (best + 1, pilots.swap_remove(best))
}

/// Rule-of-thumb plug-in bandwidth for local linear regression.
///
/// A quartic is fitted by least squares within each of `N` equal-count blocks
/// of x-sorted data, `N` chosen by Mallows' `C_p` up to [`pilot_blocks`]. The
/// pilot supplies σ̂² (mean squared centered residual) and θ̂₂₂ (mean squared
/// second derivative at the design points); then
/// `h = [κ/κ₂² · σ̂² · range / (n θ̂₂₂)]^{1/5}`.
pub fn plug_in_bandwidth(data: &Dataset, kernel: Kernel) -> Result<BandwidthResult> {
    let n = data.len();
    if n < 20 {
        return Err(invalid(alloc::format!("plug-in bandwidth needs n >= 20, got {n}")));
    }
    let (xs, ys) = sorted_pairs(data);
    let range = xs[n - 1] - xs[0];
    if !(range > 0.0) {
        return Err(invalid("plug-in bandwidth needs at least two distinct design points"));
    }
    let (blocks, pilot) = choose_blocks(&xs, &ys);
    let sigma2 = residual_variance(&Residuals::new(&ys, &pilot.fitted));
    let theta22 = pilot.curvature.iter().map(|c| c * c).sum::<f64>() / n as f64;
    let y_mean = mean(&ys);
    let y_var = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / n as f64;
    let nf = n as f64;
    let flat = !(theta22 * libm::pow(range, 4.0) > 1e-10 * y_var) || !(sigma2 > 0.0);
    let (h, fallback) = if pilot.degenerate || flat {
        (range * libm::pow(nf, -0.2), true)
    } else {
        let c_k = kernel.roughness() / (kernel.second_moment() * kernel.second_moment());
        (libm::pow(c_k * sigma2 * range / (nf * theta22), 0.2), false)
    };
    Ok(BandwidthResult {
        h,
        method: BandwidthMethod::PlugIn,
        diagnostics: Diagnostics::PlugIn { sigma2, theta22, blocks, fallback },
    })
}

/// Leave-one-out squared prediction error of the local linear fit at bandwidth `h`,
/// or `None` when some deleted fit is degenerate.
pub fn loo_score(data: &Dataset, h: f64, kernel: Kernel) -> Option<f64> {
    let smoother = LinearSmoother::local_linear(data.x(), h, kernel, data.x()).ok()?;
    let fitted = smoother.apply(data.y());
    let mut total = 0.0;
    for (i, (&y, &f)) in data.y().iter().zip(&fitted).enumerate() {
        let leverage = smoother.row(i)[i];
        let denom = 1.0 - leverage;
        if !(denom > 1e-10) {
            return None;
        }
        let e = (y - f) / denom;
        total += e * e;
    }
    Some(total / data.len() as f64)
}

/// Cross-validated bandwidth over `h_grid`; ties resolve to the smallest `h`.
pub fn cv_bandwidth(data: &Dataset, kernel: Kernel, h_grid: &[f64]) -> Result<BandwidthResult> {
    cv_bandwidth_with(&Sequential, data, kernel, h_grid)
}

pub fn cv_bandwidth_with<E: Executor>(
    exec: &E,
    data: &Dataset,
    kernel: Kernel,
    h_grid: &[f64],
) -> Result<BandwidthResult> {
    if h_grid.is_empty() || h_grid.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(invalid("candidate bandwidths must be a nonempty list of positive values"));
    }
    let scores = exec.map(h_grid.len(), |j| loo_score(data, h_grid[j], kernel));
    let best = scores.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::AllDegenerate);
    }
    // Scores equal up to rounding count as ties.
    let y_mean = mean(data.y());
    let y_var = data.y().iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / data.len() as f64;
    let tol = 1e-10 * best + 1e-14 * y_var + f64::MIN_POSITIVE;
    let h = h_grid
        .iter()
        .zip(&scores)
        .filter(|(_, s)| matches!(s, Some(s) if *s <= best + tol))
        .map(|(&h, _)| h)
        .fold(f64::INFINITY, f64::min);
    let curve = h_grid.iter().zip(&scores).map(|(&h, s)| (h, s.unwrap_or(f64::INFINITY))).collect();
    Ok(BandwidthResult {
        h,
        method: BandwidthMethod::CrossValidation,
        diagnostics: Diagnostics::CrossValidation { curve },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn design(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn block_rule() {
        assert_eq!(pilot_blocks(20), 1);
        assert_eq!(pilot_blocks(45), 2);
        assert_eq!(pilot_blocks(100), 5);
        assert_eq!(pilot_blocks(400), 5);
        assert_eq!(pilot_blocks(3), 1);
    }

    #[test]
    fn linear_truth_falls_back() {
        let x = design(60);
        let data = Dataset::new(x.clone(), x.clone()).unwrap();
        let r = plug_in_bandwidth(&data, Kernel::Epanechnikov).unwrap();
        assert!(matches!(r.diagnostics, Diagnostics::PlugIn { fallback: true, .. }));
        let range = x[59] - x[0];
        assert!((r.h - range * libm::pow(60.0, -0.2)).abs() < 1e-12);
    }

    #[test]
    fn plug_in_needs_twenty_points() {
        let x = design(19);
        let data = Dataset::new(x.clone(), x).unwrap();
        assert!(plug_in_bandwidth(&data, Kernel::Epanechnikov).is_err());
    }

    #[test]
    fn cv_tie_and_singleton() {
        let x = design(30);
        let data = Dataset::new(x.clone(), x.iter().map(|v| 3.0 * v - 1.0).collect()).unwrap();
        let grid = [0.5, 0.3, 0.01, 0.9];
        let r = cv_bandwidth(&data, Kernel::Epanechnikov, &grid).unwrap();
        assert_eq!(r.h, 0.3, "0.01 is degenerate, the rest tie at zero error");
        let r = cv_bandwidth(&data, Kernel::Epanechnikov, &[0.42]).unwrap();
        assert_eq!(r.h, 0.42);
        assert_eq!(cv_bandwidth(&data, Kernel::Epanechnikov, &[0.001]), Err(Error::AllDegenerate));
        assert!(cv_bandwidth(&data, Kernel::Epanechnikov, &[]).is_err());
        assert!(cv_bandwidth(&data, Kernel::Epanechnikov, &[vec![-1.0][0]]).is_err());
    }
}
