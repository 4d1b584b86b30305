//! Local polynomial regression and kernel density estimation on a univariate design.
//!
//! The local linear estimator is linear in the responses: at every evaluation
//! point `x` it is `ĝ(x) = Σᵢ wᵢ(x) Yᵢ` with weights depending only on the
//! design, the kernel and the bandwidth. [`LinearSmoother`] materializes those
//! weights once so that bootstrap refits at a fixed bandwidth cost a single
//! matrix-vector product.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::{argsort, quantile_sorted, std_dev, Dataset};
use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::variance::{residual_variance, rice_variance, Residuals};

/// Relative tolerance on `S₀S₂ − S₁²` below which a kernel window is degenerate.
pub const DEGENERATE_WINDOW_TOL: f64 = 1e-12;

/// Design density values at or below this are treated as zero.
pub const ZERO_DENSITY_TOL: f64 = 1e-12;

fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(invalid(alloc::format!("bandwidth must be positive and finite, got {h}")))
    }
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(invalid("evaluation points must be finite"))
    }
}

/// Weight matrix of the local linear estimator at a fixed set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSmoother {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl LinearSmoother {
    /// Local linear weights `wᵢ(x) = n⁻¹ Aᵢ(x)` for every `x` in `points`.
    pub fn local_linear(x: &[f64], h: f64, kernel: Kernel, points: &[f64]) -> Result<Self> {
        check_bandwidth(h)?;
        check_points(points)?;
        let n = x.len();
        let nf = n as f64;
        let mut weights = vec![0.0; n * points.len()];
        let mut k = vec![0.0; n];
        let mut u = vec![0.0; n];
        for (row, &x0) in weights.chunks_exact_mut(n).zip(points) {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let ui = (x0 - x[i]) / h;
                let ki = kernel.eval(ui) / h;
                u[i] = ui;
                k[i] = ki;
                s0 += ki;
                s1 += ui * ki;
                s2 += ui * ui * ki;
            }
            s0 /= nf;
            s1 /= nf;
            s2 /= nf;
            let den = s0 * s2 - s1 * s1;
            if !(s0 > 0.0) || !(den > DEGENERATE_WINDOW_TOL * s0 * s2) {
                return Err(Error::DegenerateWindow { x: x0, h });
            }
            for i in 0..n {
                row[i] = (s2 - u[i] * s1) * k[i] / (nf * den);
            }
        }
        Ok(Self { n, points: points.to_vec(), weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weights `w₁(x_j), …, w_n(x_j)` for evaluation point `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.n..(j + 1) * self.n]
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.points.len()];
        self.apply_into(y, &mut out);
        out
    }

    pub fn apply_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n);
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.n)) {
            *o = row.iter().zip(y).map(|(w, v)| w * v).sum();
        }
    }
}

/// Local linear estimate ĝ on `grid`.
pub fn local_linear_fit(data: &Dataset, h: f64, kernel: Kernel, grid: &[f64]) -> Result<Vec<f64>> {
    Ok(LinearSmoother::local_linear(data.x(), h, kernel, grid)?.apply(data.y()))
}

/// Second-derivative estimate `2 β̂₂` from a local cubic weighted fit at each point.
pub fn local_poly_deriv2(data: &Dataset, h: f64, kernel: Kernel, grid: &[f64]) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    check_points(grid)?;
    if data.len() < 5 {
        return Err(invalid("second-derivative estimation needs n >= 5"));
    }
    grid.iter()
        .map(|&x0| {
            let rows: Vec<(f64, f64, f64)> = data
                .x()
                .iter()
                .zip(data.y())
                .filter_map(|(&xi, &yi)| {
                    let d = (xi - x0) / h;
                    let w = kernel.eval(d);
                    (w > 0.0).then(|| (d, yi, libm::sqrt(w)))
                })
                .collect();
            let coef = weighted_polyfit(&rows, 3).ok_or(Error::DegenerateWindow { x: x0, h })?;
            Ok(2.0 * coef[2] / (h * h))
        })
        .collect()
}

/// Weighted least-squares polynomial fit of `degree` to `(t, y, sqrt_w)` rows.
///
/// Returns `None` when the weighted design is rank deficient.
pub(crate) fn weighted_polyfit(rows: &[(f64, f64, f64)], degree: usize) -> Option<Vec<f64>> {
    let p = degree + 1;
    if rows.len() < p {
        return None;
    }
    let design = DMatrix::from_fn(rows.len(), p, |i, j| rows[i].2 * libm::pow(rows[i].0, j as f64));
    let mut rhs = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2 * r.1));
    let qr = design.qr();
    let r = qr.r();
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if !(diag_max > 0.0) || (0..p).any(|j| !(r[(j, j)].abs() > 1e-10 * diag_max)) {
        return None;
    }
    qr.q_tr_mul(&mut rhs);
    let top = rhs.rows(0, p).into_owned();
    let coef = r.solve_upper_triangular(&top)?;
    Some(coef.iter().copied().collect())
}

/// Kernel density estimate `(nh)⁻¹ Σ K((x − Xᵢ)/h)` on `grid`.
pub fn kde(points: &[f64], h: f64, kernel: Kernel, grid: &[f64]) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    check_points(grid)?;
    if points.is_empty() {
        return Err(invalid("density estimation needs at least one point"));
    }
    let scale = 1.0 / (points.len() as f64 * h);
    Ok(grid.iter().map(|&x0| scale * points.iter().map(|&xi| kernel.eval((x0 - xi) / h)).sum::<f64>()).collect())
}

/// Silverman's rule of thumb `0.9 min(sd, IQR/1.34) n^{-1/5}`.
///
/// Falls back to the standard deviation when the IQR vanishes, and to
/// `n^{-1/5}` when the points carry no spread at all.
pub fn silverman_bandwidth(points: &[f64]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 1.0;
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = std_dev(points);
    let iqr = (quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        _ => 1.0 / 0.9,
    };
    0.9 * spread * libm::pow(n as f64, -0.2)
}

/// Standard-error scale `s(X)(x) = sqrt(κ / (n h f̂_X(x)))` on `grid`.
pub fn scale_function(n: usize, h: f64, kernel: Kernel, fhat_x: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let kappa = kernel.roughness();
    fhat_x
        .iter()
        .zip(grid)
        .map(|(&f, &x)| {
            if f > ZERO_DENSITY_TOL {
                Ok(libm::sqrt(kappa / (n as f64 * h * f)))
            } else {
                Err(Error::ZeroDensity { x })
            }
        })
        .collect()
}

/// Which error-variance estimator supplies σ̂².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VarianceEstimator {
    /// Difference-based estimator on x-sorted responses.
    #[default]
    Rice,
    /// Mean squared centered residual of the fit.
    Residual,
}

impl VarianceEstimator {
    pub fn name(self) -> &'static str {
        match self {
            VarianceEstimator::Rice => "rice",
            VarianceEstimator::Residual => "residual",
        }
    }
}

impl core::str::FromStr for VarianceEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rice" => Ok(Self::Rice),
            "residual" => Ok(Self::Residual),
            _ => Err(invalid(alloc::format!("unknown variance estimator '{s}'"))),
        }
    }
}

/// Smoothing configuration for a curve fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub kernel: Kernel,
    /// Bandwidth `h` of ĝ.
    pub bandwidth: f64,
    /// Kernel `K₁` of the design density estimate.
    pub design_kernel: Kernel,
    /// Bandwidth `h₁` of the design density estimate; Silverman's rule when `None`.
    pub design_bandwidth: Option<f64>,
    pub variance: VarianceEstimator,
}

impl FitConfig {
    pub fn new(kernel: Kernel, bandwidth: f64) -> Self {
        Self {
            kernel,
            bandwidth,
            design_kernel: Kernel::Gaussian,
            design_bandwidth: None,
            variance: VarianceEstimator::Rice,
        }
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Self {
        Self { bandwidth, ..self.clone() }
    }
}

/// ĝ, its standard-error scale and σ̂² on an evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate {
    pub grid: Vec<f64>,
    pub ghat: Vec<f64>,
    /// `s(X)(x)`: standard deviation of ĝ(x) per unit σ.
    pub scale: Vec<f64>,
    pub sigma2hat: f64,
    pub bandwidth: f64,
}

impl CurveEstimate {
    pub fn sigma_hat(&self) -> f64 {
        libm::sqrt(self.sigma2hat)
    }
}

/// Design density estimate f̂_X on `points` with the configured `K₁`, `h₁`.
pub fn design_density(data: &Dataset, cfg: &FitConfig, points: &[f64]) -> Result<Vec<f64>> {
    let h1 = cfg.design_bandwidth.unwrap_or_else(|| silverman_bandwidth(data.x()));
    kde(data.x(), h1, cfg.design_kernel, points)
}

/// Full fit on `grid`: ĝ, `s(X)` from f̂_X, and σ̂² from the configured estimator.
pub fn fit_curve(data: &Dataset, cfg: &FitConfig, grid: &[f64]) -> Result<CurveEstimate> {
    let smoother = LinearSmoother::local_linear(data.x(), cfg.bandwidth, cfg.kernel, grid)?;
    let ghat = smoother.apply(data.y());
    let fx = design_density(data, cfg, grid)?;
    let scale = scale_function(data.len(), cfg.bandwidth, cfg.kernel, &fx, grid)?;
    let sigma2hat = match cfg.variance {
        VarianceEstimator::Rice => rice_variance(data),
        VarianceEstimator::Residual => {
            let fitted = local_linear_fit(data, cfg.bandwidth, cfg.kernel, data.x())?;
            residual_variance(&Residuals::new(data.y(), &fitted))
        }
    };
    Ok(CurveEstimate { grid: grid.to_vec(), ghat, scale, sigma2hat, bandwidth: cfg.bandwidth })
}

/// Design points in ascending order paired with their responses.
pub(crate) fn sorted_pairs(data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let idx = argsort(data.x());
    (idx.iter().map(|&i| data.x()[i]).collect(), idx.iter().map(|&i| data.y()[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line_data() -> Dataset {
        let x: Vec<f64> = (0..10).map(|i| -1.0 + 0.23 * i as f64 + 0.01 * (i * i) as f64).collect();
        let y = x.iter().map(|v| 2.0 * v + 1.0).collect();
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn reproduces_affine_data() {
        let data = line_data();
        let grid: Vec<f64> = (0..21).map(|i| -0.9 + 0.09 * i as f64).collect();
        for k in Kernel::ALL {
            let g = local_linear_fit(&data, 0.6, k, &grid).unwrap();
            for (x, v) in grid.iter().zip(&g) {
                assert!((v - (2.0 * x + 1.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_data() {
        let x = vec![0.0, 0.1, 0.3, 0.35, 0.7];
        let data = Dataset::new(x, vec![3.0; 5]).unwrap();
        let g = local_linear_fit(&data, 0.5, Kernel::Epanechnikov, &[0.1, 0.4, 0.6]).unwrap();
        assert!(g.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn empty_window_is_degenerate() {
        let data = Dataset::new(vec![0.0, 0.1, 0.2], vec![1.0, 2.0, 3.0]).unwrap();
        let err = local_linear_fit(&data, 0.05, Kernel::Epanechnikov, &[0.05, 5.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateWindow { x, .. } if x == 0.05 || x == 5.0));
        // a single point in the window is collinear too
        let err = local_linear_fit(&data, 0.05, Kernel::Epanechnikov, &[0.0]).unwrap_err();
        assert_eq!(err, Error::DegenerateWindow { x: 0.0, h: 0.05 });
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let data = line_data();
        assert!(local_linear_fit(&data, 0.0, Kernel::Gaussian, &[0.0]).is_err());
        assert!(local_linear_fit(&data, f64::NAN, Kernel::Gaussian, &[0.0]).is_err());
        assert!(kde(&[0.0], -1.0, Kernel::Gaussian, &[0.0]).is_err());
    }

    #[test]
    fn deriv2_of_quadratic_and_line() {
        let x: Vec<f64> = (0..30).map(|i| -1.0 + 2.0 * i as f64 / 29.0).collect();
        let quad = Dataset::new(x.clone(), x.iter().map(|v| v * v).collect()).unwrap();
        let line = Dataset::new(x.clone(), x.iter().map(|v| 1.0 - 3.0 * v).collect()).unwrap();
        let grid = [-0.5, 0.0, 0.3, 0.8];
        for v in local_poly_deriv2(&quad, 1.5, Kernel::Epanechnikov, &grid).unwrap() {
            assert!((v - 2.0).abs() < 1e-6);
        }
        for v in local_poly_deriv2(&line, 1.5, Kernel::Gaussian, &grid).unwrap() {
            assert!(v.abs() < 1e-6);
        }
        assert!(matches!(
            local_poly_deriv2(&quad, 0.05, Kernel::Epanechnikov, &[0.0]),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn kde_point_mass() {
        let h = 0.7;
        let single = kde(&[0.0], h, Kernel::Gaussian, &[0.0]).unwrap()[0];
        let phi0 = 1.0 / libm::sqrt(2.0 * core::f64::consts::PI);
        assert!((single - phi0 / h).abs() < 1e-15);
        let many = kde(&[0.0; 17], h, Kernel::Gaussian, &[0.0]).unwrap()[0];
        assert!((many - single).abs() < 1e-15);
    }

    #[test]
    fn kde_hand_sum() {
        // Epanechnikov, h = 0.5, grid point 0.1, sample (-0.3, 0, 0.2, 0.9)
        // u = 0.8, 0.2, -0.2, -1.6 -> K = 0.27, 0.72, 0.72, 0
        let f = kde(&[-0.3, 0.0, 0.2, 0.9], 0.5, Kernel::Epanechnikov, &[0.1]).unwrap()[0];
        let expected = (0.27 + 0.72 + 0.72) / (4.0 * 0.5);
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn scale_identities() {
        let k = Kernel::Epanechnikov;
        let n = 100;
        let h = 0.2;
        let s = scale_function(n, h, k, &[0.6 / (100.0 * 0.2), 0.5], &[0.0, 1.0]).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14);
        assert!((s[1] - libm::sqrt(0.06)).abs() < 1e-15);
        let doubled = scale_function(n, h, k, &[1.0], &[0.0]).unwrap()[0];
        let base = scale_function(n, h, k, &[0.5], &[0.0]).unwrap()[0];
        assert!((base * base / (doubled * doubled) - 2.0).abs() < 1e-12);
        assert_eq!(scale_function(n, h, k, &[0.5, 0.0], &[0.0, 3.0]), Err(Error::ZeroDensity { x: 3.0 }));
    }

    #[test]
    fn silverman_fallbacks() {
        assert!(silverman_bandwidth(&[1.0; 10]) > 0.0);
        let h = silverman_bandwidth(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(h > 0.0 && h < 2.0);
    }
}
