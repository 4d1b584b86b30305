//! Monte Carlo coverage studies on the three test curves.
//!
//! Dataset `s` of a study draws from substream `(seed, STUDY_DATA, s)` and its
//! bootstraps are keyed by `derive_seed(seed, [STUDY_BOOT, s])`, so results do
//! not depend on how datasets are distributed over threads.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bandwidth::plug_in_bandwidth;
use crate::calibration::{calibrate, final_band, make_residual_bootstrap};
use crate::competitors::{bias_corrected_band, undersmooth_band, Competitor, CompetitorConfig};
use crate::data::{uniform_grid, Dataset};
use crate::error::{invalid, Error, Result};
use crate::estimator::{fit_curve, local_linear_fit, CurveEstimate, FitConfig};
use crate::exec::{Executor, Sequential};
use crate::kernel::Kernel;
use crate::naive::{build_naive_band, BandResult};
use crate::normal;
use crate::percentile::{double_bootstrap_calibrate, DoubleBootstrapConfig, DEFAULT_MAX_COST};
use crate::rng::{derive_seed, substream, tag};

/// Largest tolerated fraction of failed datasets per method and setting.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Coverage counts as reaching the target when within this distance below it.
pub const COVERAGE_TOL: f64 = 1e-12;

/// Test curve `g₁`, `g₂` or `g₃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestCurve {
    G1,
    G2,
    G3,
}

impl TestCurve {
    pub const ALL: [TestCurve; 3] = [TestCurve::G1, TestCurve::G2, TestCurve::G3];

    pub fn from_index(g: u8) -> Result<Self> {
        match g {
            1 => Ok(Self::G1),
            2 => Ok(Self::G2),
            3 => Ok(Self::G3),
            _ => Err(invalid(format!("g_index: expected 1, 2 or 3, got {g}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::G1 => 1,
            Self::G2 => 2,
            Self::G3 => 3,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::G1 => x + 5.0 * normal::pdf(10.0 * x),
            Self::G2 => libm::sin(1.5 * PI * x) / (1.0 + 18.0 * x * x * (sgn(x) + 1.0)),
            Self::G3 => libm::sin(0.5 * PI * x) / (1.0 + 2.0 * x * x * (sgn(x) + 1.0)),
        }
    }

    /// Second derivative; analytic for `g₁`, Richardson-extrapolated central
    /// differences with step `1e-4` otherwise.
    pub fn deriv2(self, x: f64) -> f64 {
        match self {
            Self::G1 => {
                let u = 10.0 * x;
                500.0 * (u * u - 1.0) * normal::pdf(u)
            }
            _ => {
                let d = |h: f64| (self.eval(x + h) - 2.0 * self.eval(x) + self.eval(x - h)) / (h * h);
                let h = 1e-4;
                (4.0 * d(h / 2.0) - d(h)) / 3.0
            }
        }
    }
}

/// Sign with `sgn(0) = 0`.
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `g(x)` for curve index 1, 2 or 3.
pub fn truth(g_index: u8, x: f64) -> Result<f64> {
    Ok(TestCurve::from_index(g_index)?.eval(x))
}

/// `g''(x)` for curve index 1, 2 or 3.
pub fn truth_deriv2(g_index: u8, x: f64) -> Result<f64> {
    Ok(TestCurve::from_index(g_index)?.deriv2(x))
}

/// Bandwidth rule applied to every simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyBandwidth {
    PlugIn,
    Fixed(f64),
}

/// One band-construction method of a study.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    /// Bootstrap-calibrated band, one setting per ξ.
    Ours,
    /// Normal band at the nominal level.
    Naive,
    Undersmooth {
        gammas: Vec<f64>,
    },
    BiasCorrect {
        lambdas: Vec<f64>,
    },
    /// Double-bootstrap percentile band, one setting per ξ.
    DoubleBootstrap {
        outer: usize,
        inner: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Ours,
    Naive,
    Undersmooth,
    BiasCorrect,
    DoubleBootstrap,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ours => "ours",
            Self::Naive => "naive",
            Self::Undersmooth => "undersmooth",
            Self::BiasCorrect => "bias_correct",
            Self::DoubleBootstrap => "double_bootstrap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub curve: TestCurve,
    pub n: usize,
    pub sigma: f64,
    pub n_sims: usize,
    /// Bootstrap replicates B.
    pub boot: usize,
    pub alpha0: f64,
    pub xi_list: Vec<f64>,
    pub region: (f64, f64),
    pub grid_len: usize,
    pub seed: u64,
    pub kernel: Kernel,
    pub bandwidth: StudyBandwidth,
    pub methods: Vec<MethodSpec>,
}

impl StudyConfig {
    /// Desk-scale defaults: 200 datasets, B = 499, 91 points on [−0.9, 0.9], ξ = 0.1.
    pub fn desk(curve: TestCurve, n: usize, sigma: f64, seed: u64) -> Self {
        Self {
            curve,
            n,
            sigma,
            n_sims: 200,
            boot: 499,
            alpha0: 0.05,
            xi_list: vec![0.1],
            region: (-0.9, 0.9),
            grid_len: 91,
            seed,
            kernel: Kernel::Epanechnikov,
            bandwidth: StudyBandwidth::PlugIn,
            methods: vec![MethodSpec::Ours],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < Dataset::MIN_LEN {
            return Err(invalid(format!("n: must be at least {}", Dataset::MIN_LEN)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma: must be finite and nonnegative"));
        }
        if self.n_sims == 0 {
            return Err(invalid("n_sims: must be positive"));
        }
        if self.boot == 0 {
            return Err(invalid("boot: must be positive"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(invalid("alpha0: must lie in (0, 1)"));
        }
        if self.xi_list.is_empty() || self.xi_list.iter().any(|&xi| !(xi > 0.0 && xi <= 0.5)) {
            return Err(invalid("xi_list: must be nonempty with entries in (0, 1/2]"));
        }
        let (a, b) = self.region;
        if !(a >= -1.0 && a < b && b <= 1.0) {
            return Err(invalid("region: must satisfy -1 <= a < b <= 1"));
        }
        if self.grid_len < 2 {
            return Err(invalid("grid: must have at least 2 points"));
        }
        if let StudyBandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("bandwidth: must be positive"));
            }
        }
        if self.methods.is_empty() {
            return Err(invalid("methods: must not be empty"));
        }
        for m in &self.methods {
            match m {
                MethodSpec::Undersmooth { gammas: f } | MethodSpec::BiasCorrect { lambdas: f } => {
                    if f.is_empty() || f.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
                        return Err(invalid("methods: factor grids must be nonempty with entries in (0, 1]"));
                    }
                }
                MethodSpec::DoubleBootstrap { outer, inner } => {
                    if *outer == 0 || *inner == 0 {
                        return Err(invalid("methods: double bootstrap needs outer, inner >= 1"));
                    }
                }
                MethodSpec::Ours | MethodSpec::Naive => {}
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        uniform_grid(self.region.0, self.region.1, self.grid_len)
    }

    /// `(kind, setting)` pairs in output order.
    pub fn settings(&self) -> Vec<(MethodKind, Option<f64>)> {
        let mut out = Vec::new();
        for m in &self.methods {
            match m {
                MethodSpec::Ours => out.extend(self.xi_list.iter().map(|&xi| (MethodKind::Ours, Some(xi)))),
                MethodSpec::Naive => out.push((MethodKind::Naive, None)),
                MethodSpec::Undersmooth { gammas } => {
                    out.extend(gammas.iter().map(|&g| (MethodKind::Undersmooth, Some(g))))
                }
                MethodSpec::BiasCorrect { lambdas } => {
                    out.extend(lambdas.iter().map(|&l| (MethodKind::BiasCorrect, Some(l))))
                }
                MethodSpec::DoubleBootstrap { .. } => {
                    out.extend(self.xi_list.iter().map(|&xi| (MethodKind::DoubleBootstrap, Some(xi))))
                }
            }
        }
        out
    }
}

/// `X_i ~ U(−1, 1)`, `Y_i = g(X_i) + σ Z_i`, keyed by `(seed, study_index)`.
pub fn generate_dataset(cfg: &StudyConfig, study_index: usize, seed: u64) -> Result<Dataset> {
    generate_from(cfg, &mut substream(seed, &[tag::STUDY_DATA, study_index as u64]))
}

fn generate_from(cfg: &StudyConfig, rng: &mut crate::rng::StreamRng) -> Result<Dataset> {
    let mut x = Vec::with_capacity(cfg.n);
    let mut y = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let xi: f64 = rng.random_range(-1.0..1.0);
        let z: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(cfg.curve.eval(xi) + cfg.sigma * z);
    }
    Dataset::new(x, y)
}

/// Aggregate metrics of one method at one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub kind: MethodKind,
    /// ξ for calibrated methods, γ or λ for competitors, none for the naive band.
    pub setting: Option<f64>,
    /// Per-grid-point Monte Carlo coverage of the true curve.
    pub coverage: Vec<f64>,
    pub covered_proportion: f64,
    pub avg_abs_cov_error: f64,
    pub avg_width: f64,
    pub completed: usize,
    pub failed: usize,
    /// Completed datasets whose bandwidth for this setting had to be widened.
    pub widened: usize,
    /// Set when more than [`MAX_FAILURE_RATE`] of the datasets failed; metrics are then NaN.
    pub aborted: Option<Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub results: Vec<MethodResult>,
    /// α̂_ξ(α₀) per ξ (outer) and dataset (inner); NaN where the dataset failed.
    pub alpha_hat: Vec<Vec<f64>>,
    /// Bandwidth used per dataset; NaN where selection failed.
    pub bandwidths: Vec<f64>,
    /// Datasets whose plug-in bandwidth had to be widened.
    pub widened: usize,
    pub alpha0: f64,
}

impl StudyResult {
    pub fn find(&self, kind: MethodKind, setting: Option<f64>) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.kind == kind && r.setting == setting)
    }

    /// Setting of `kind` with the largest covered proportion; ties go to the
    /// smaller coverage error, then to the earlier setting.
    pub fn best(&self, kind: MethodKind) -> Option<&MethodResult> {
        let mut best: Option<&MethodResult> = None;
        for r in self.results.iter().filter(|r| r.kind == kind && r.aborted.is_none()) {
            best = match best {
                Some(b)
                    if b.covered_proportion > r.covered_proportion
                        || (b.covered_proportion == r.covered_proportion
                            && b.avg_abs_cov_error <= r.avg_abs_cov_error) =>
                {
                    Some(b)
                }
                _ => Some(r),
            };
        }
        best
    }
}

/// Coverage indicators and mean width of one band, and whether its bandwidth was widened.
type BandSummary = (Vec<bool>, f64, bool);

/// Outcome of one dataset: per setting, the band (or failure), plus α̂ per ξ and h.
struct DatasetOutcome {
    bands: Vec<Option<BandSummary>>,
    alpha_hat: Vec<f64>,
    h: f64,
    widened: bool,
}

/// Step by which a plug-in bandwidth is widened after a degenerate window.
pub const WIDEN_FACTOR: f64 = 1.1;

/// Most widening steps tried before the dataset counts as failed.
pub const MAX_WIDENINGS: usize = 25;

/// Widening steps allowed for the configured bandwidth rule; none for a fixed bandwidth.
fn widen_limit(cfg: &StudyConfig) -> usize {
    match cfg.bandwidth {
        StudyBandwidth::PlugIn => MAX_WIDENINGS,
        StudyBandwidth::Fixed(_) => 0,
    }
}

/// Runs `attempt` at `h`, multiplying `h` by [`WIDEN_FACTOR`] after each
/// degenerate window, at most `limit` times. Also returns the steps taken.
fn widening<T>(mut h: f64, limit: usize, attempt: impl Fn(f64) -> Result<T>) -> Result<(T, usize)> {
    let mut steps = 0;
    loop {
        match attempt(h) {
            Ok(v) => return Ok((v, steps)),
            Err(Error::DegenerateWindow { .. }) if steps < limit => {
                h *= WIDEN_FACTOR;
                steps += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Fit at the study bandwidth. A plug-in bandwidth that leaves an empty or
/// collinear window on the grid or at a design point is widened until the fit
/// succeeds; a fixed bandwidth is used as given.
fn study_fit(cfg: &StudyConfig, data: &Dataset, grid: &[f64]) -> Result<((FitConfig, CurveEstimate), usize)> {
    let h = match cfg.bandwidth {
        StudyBandwidth::PlugIn => plug_in_bandwidth(data, cfg.kernel)?.h,
        StudyBandwidth::Fixed(h) => h,
    };
    widening(h, widen_limit(cfg), |h| {
        let fit = FitConfig::new(cfg.kernel, h);
        local_linear_fit(data, h, cfg.kernel, data.x())?;
        let est = fit_curve(data, &fit, grid)?;
        Ok((fit, est))
    })
}

fn summarize(band: &BandResult, truth: &[f64], widened: bool) -> BandSummary {
    let hits = truth.iter().enumerate().map(|(j, &g)| band.covers(j, g)).collect();
    (hits, band.mean_width(), widened)
}

fn run_dataset(cfg: &StudyConfig, s: usize, grid: &[f64], truth: &[f64], n_settings: usize) -> DatasetOutcome {
    let n_xi = cfg.xi_list.len();
    let mut out = DatasetOutcome {
        bands: Vec::with_capacity(n_settings),
        alpha_hat: vec![f64::NAN; n_xi],
        h: f64::NAN,
        widened: false,
    };
    let prepared = generate_dataset(cfg, s, cfg.seed).and_then(|data| {
        let ((fit, est), steps) = study_fit(cfg, &data, grid)?;
        Ok((data, fit, est, steps))
    });
    let (data, fit, est, steps) = match prepared {
        Ok(p) => p,
        Err(_) => {
            out.bands.resize(n_settings, None);
            return out;
        }
    };
    out.h = fit.bandwidth;
    out.widened = steps > 0;
    let boot_seed = derive_seed(cfg.seed, &[tag::STUDY_BOOT, s as u64]);
    for m in &cfg.methods {
        match m {
            MethodSpec::Ours => {
                let profile = make_residual_bootstrap(&data, &fit, &est, cfg.boot, boot_seed)
                    .and_then(|ens| calibrate(&ens, cfg.alpha0, cfg.xi_list[0]));
                for (k, &xi) in cfg.xi_list.iter().enumerate() {
                    let band = profile.as_ref().map_err(Clone::clone).and_then(|p| {
                        let p = p.with_xi(xi)?;
                        out.alpha_hat[k] = p.alpha_hat_xi;
                        final_band(&est, &p)
                    });
                    out.bands.push(band.ok().map(|b| summarize(&b, truth, out.widened)));
                }
            }
            MethodSpec::Naive => {
                out.bands.push(build_naive_band(&est, cfg.alpha0).ok().map(|b| summarize(&b, truth, out.widened)));
            }
            MethodSpec::Undersmooth { gammas } => {
                for &g in gammas {
                    let band = widening(fit.bandwidth, widen_limit(cfg), |h| {
                        let c = CompetitorConfig::new(Competitor::Undersmooth, g, h)?;
                        undersmooth_band(&data, &fit, &c, grid, cfg.alpha0)
                    });
                    out.bands.push(band.ok().map(|(b, k)| summarize(&b, truth, out.widened || k > 0)));
                }
            }
            MethodSpec::BiasCorrect { lambdas } => {
                for &l in lambdas {
                    let band = widening(fit.bandwidth, widen_limit(cfg), |h| {
                        let c = CompetitorConfig::new(Competitor::BiasCorrect, l, h)?;
                        bias_corrected_band(&data, &fit, &c, grid, cfg.alpha0)
                    });
                    out.bands.push(band.ok().map(|(b, k)| summarize(&b, truth, out.widened || k > 0)));
                }
            }
            MethodSpec::DoubleBootstrap { outer, inner } => {
                let settings = DoubleBootstrapConfig {
                    outer: *outer,
                    inner: *inner,
                    alpha0: cfg.alpha0,
                    xi: cfg.xi_list[0],
                    seed: boot_seed,
                    max_cost: DEFAULT_MAX_COST.max((*outer as u64) * (*inner as u64)),
                };
                let result = double_bootstrap_calibrate(&data, &fit, &est, &settings);
                for &xi in &cfg.xi_list {
                    let band = result.as_ref().map_err(Clone::clone).and_then(|r| {
                        let p = r.profile.with_xi(xi)?;
                        let deviations = &r.trace.deviations;
                        crate::percentile::percentile_band(&est, deviations, p.alpha_hat_xi)
                    });
                    out.bands.push(band.ok().map(|b| summarize(&b.band, truth, out.widened)));
                }
            }
        }
    }
    out
}

/// Run a study on the calling thread.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    run_study_with(&Sequential, cfg)
}

/// Run a study, distributing datasets over `exec`.
///
/// A failed dataset (bandwidth selection, fit or band construction) is
/// counted against each setting it affects. Settings with more than 5% failures
/// are reported with [`Error::StudyAborted`] and NaN metrics.
pub fn run_study_with<E: Executor>(exec: &E, cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let truth: Vec<f64> = grid.iter().map(|&x| cfg.curve.eval(x)).collect();
    let settings = cfg.settings();
    let outcomes = exec.map(cfg.n_sims, |s| run_dataset(cfg, s, &grid, &truth, settings.len()));

    let n_grid = grid.len();
    let target = 1.0 - cfg.alpha0;
    let mut results = Vec::with_capacity(settings.len());
    for (k, &(kind, setting)) in settings.iter().enumerate() {
        let mut hits = vec![0usize; n_grid];
        let mut width = 0.0;
        let mut completed = 0;
        let mut widened = 0;
        for o in &outcomes {
            if let Some((covered, w, wide)) = &o.bands[k] {
                completed += 1;
                widened += *wide as usize;
                width += w;
                for (h, &c) in hits.iter_mut().zip(covered) {
                    *h += c as usize;
                }
            }
        }
        let failed = cfg.n_sims - completed;
        let aborted = (failed as f64 > MAX_FAILURE_RATE * cfg.n_sims as f64)
            .then_some(Error::StudyAborted { failed, total: cfg.n_sims });
        let (coverage, covered_proportion, avg_abs_cov_error, avg_width) = if aborted.is_some() || completed == 0 {
            (vec![f64::NAN; n_grid], f64::NAN, f64::NAN, f64::NAN)
        } else {
            let coverage: Vec<f64> = hits.iter().map(|&h| h as f64 / completed as f64).collect();
            let prop = coverage.iter().filter(|&&c| c >= target - COVERAGE_TOL).count() as f64 / n_grid as f64;
            let err = coverage.iter().map(|c| (c - target).abs()).sum::<f64>() / n_grid as f64;
            (coverage, prop, err, width / completed as f64)
        };
        results.push(MethodResult {
            kind,
            setting,
            coverage,
            covered_proportion,
            avg_abs_cov_error,
            avg_width,
            completed,
            failed,
            widened,
            aborted,
        });
    }
    let alpha_hat = (0..cfg.xi_list.len()).map(|k| outcomes.iter().map(|o| o.alpha_hat[k]).collect()).collect();
    let bandwidths = outcomes.iter().map(|o| o.h).collect();
    let widened = outcomes.iter().filter(|o| o.widened).count();
    Ok(StudyResult { grid, truth, results, alpha_hat, bandwidths, widened, alpha0: cfg.alpha0 })
}

/// Curvature below this fraction of the largest |g''| on the grid counts as zero.
pub const FLAT_CURVATURE_TOL: f64 = 1e-9;

/// Indices of the `round(ξ N)` grid points with the largest `|g''|`.
///
/// Points with negligible curvature are never returned, so an affine curve
/// yields the empty set. Equal curvatures are ranked by grid index.
pub fn exceptional_set_from_curvature(g2: &[f64], xi: f64) -> Vec<usize> {
    let abs: Vec<f64> = g2.iter().map(|v| v.abs()).collect();
    let max = abs.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let k = libm::round(xi.clamp(0.0, 1.0) * abs.len() as f64) as usize;
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(k).filter(|&j| abs[j] > FLAT_CURVATURE_TOL * max).collect();
    picked.sort_unstable();
    picked
}

/// Grid points of the study region where the curvature-driven bias is largest.
pub fn exceptional_set(cfg: &StudyConfig, xi: f64) -> Result<Vec<f64>> {
    let grid = cfg.grid()?;
    let g2: Vec<f64> = grid.iter().map(|&x| cfg.curve.deriv2(x)).collect();
    Ok(exceptional_set_from_curvature(&g2, xi).into_iter().map(|j| grid[j]).collect())
}

/// Number of candidate datasets scanned for a typical band.
pub const TYPICAL_CANDIDATES: usize = 101;

/// Bands on the dataset whose integrated squared error is the median among
/// [`TYPICAL_CANDIDATES`] draws.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalBands {
    pub index: usize,
    pub data: Dataset,
    pub ise: f64,
    pub truth: Vec<f64>,
    /// Calibrated band at the first ξ of the configuration.
    pub calibrated: BandResult,
    pub naive: BandResult,
}

pub fn typical_bands(cfg: &StudyConfig) -> Result<TypicalBands> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let truth: Vec<f64> = grid.iter().map(|&x| cfg.curve.eval(x)).collect();
    let dx = (cfg.region.1 - cfg.region.0) / (grid.len() - 1) as f64;
    let mut scored = Vec::with_capacity(TYPICAL_CANDIDATES);
    for s in 0..TYPICAL_CANDIDATES {
        let data = generate_from(cfg, &mut substream(cfg.seed, &[tag::TYPICAL_DATA, s as u64]))?;
        let ((fit, est), _) = study_fit(cfg, &data, &grid)?;
        let sq: Vec<f64> = est.ghat.iter().zip(&truth).map(|(g, t)| (g - t) * (g - t)).collect();
        let ise = dx * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[sq.len() - 1]));
        scored.push((ise, s, data, fit));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (ise, index, data, fit) = scored.swap_remove(TYPICAL_CANDIDATES / 2);
    let est = fit_curve(&data, &fit, &grid)?;
    let seed = derive_seed(cfg.seed, &[tag::TYPICAL_DATA, index as u64, 1]);
    let ens = make_residual_bootstrap(&data, &fit, &est, cfg.boot, seed)?;
    let calibrated = final_band(&est, &calibrate(&ens, cfg.alpha0, cfg.xi_list[0])?)?;
    let naive = build_naive_band(&est, cfg.alpha0)?;
    Ok(TypicalBands { index, data, ise, truth, calibrated, naive })
}

/// Coverage study of calibrated density bands on standard normal samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityStudyConfig {
    pub n: usize,
    pub n_sims: usize,
    pub boot: usize,
    pub alpha0: f64,
    pub xi: f64,
    pub region: (f64, f64),
    pub grid_len: usize,
    pub kernel: Kernel,
    /// Fixed bandwidth, or Silverman's rule per sample when `None`.
    pub bandwidth: Option<f64>,
    pub seed: u64,
}

impl DensityStudyConfig {
    /// n = 200, B = 499, α₀ = 0.05, ξ = 0.1, 61 points on [−1.5, 1.5], Gaussian kernel.
    pub fn desk(seed: u64) -> Self {
        Self {
            n: 200,
            n_sims: 200,
            boot: 499,
            alpha0: 0.05,
            xi: 0.1,
            region: (-1.5, 1.5),
            grid_len: 61,
            kernel: Kernel::Gaussian,
            bandwidth: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityStudyResult {
    pub grid: Vec<f64>,
    pub coverage: Vec<f64>,
    pub covered_proportion: f64,
    pub avg_width: f64,
    pub alpha_hat: Vec<f64>,
    pub failed: usize,
}

pub fn run_density_study_with<E: Executor>(exec: &E, cfg: &DensityStudyConfig) -> Result<DensityStudyResult> {
    use crate::density::{density_band_calibrate, DensityCalibrationConfig};
    use crate::estimator::silverman_bandwidth;
    if cfg.n < 2 || cfg.n_sims == 0 || cfg.boot == 0 {
        return Err(invalid("density study needs n >= 2, n_sims >= 1 and boot >= 1"));
    }
    crate::calibration::check_targets(cfg.alpha0, cfg.xi)?;
    let grid = uniform_grid(cfg.region.0, cfg.region.1, cfg.grid_len)?;
    let truth: Vec<f64> = grid.iter().map(|&x| normal::pdf(x)).collect();
    let outcomes = exec.map(cfg.n_sims, |s| {
        let mut rng = substream(cfg.seed, &[tag::STUDY_DATA, s as u64]);
        let sample: Vec<f64> = (0..cfg.n).map(|_| rng.sample(StandardNormal)).collect();
        let settings = DensityCalibrationConfig {
            h: cfg.bandwidth.unwrap_or_else(|| silverman_bandwidth(&sample)),
            kernel: cfg.kernel,
            alpha0: cfg.alpha0,
            xi: cfg.xi,
            replicates: cfg.boot,
            seed: derive_seed(cfg.seed, &[tag::STUDY_BOOT, s as u64]),
            clamp_lower: false,
        };
        density_band_calibrate(&sample, &grid, &settings).ok().map(|r| {
            let hits: Vec<bool> = truth.iter().enumerate().map(|(j, &f)| r.band.covers(j, f)).collect();
            let width = (0..grid.len()).map(|j| r.band.upper[j] - r.band.lower[j]).sum::<f64>() / grid.len() as f64;
            (hits, width, r.profile.alpha_hat_xi)
        })
    });
    let done: Vec<_> = outcomes.iter().flatten().collect();
    let failed = cfg.n_sims - done.len();
    if failed as f64 > MAX_FAILURE_RATE * cfg.n_sims as f64 {
        return Err(Error::StudyAborted { failed, total: cfg.n_sims });
    }
    let m = done.len() as f64;
    let coverage: Vec<f64> = (0..grid.len()).map(|j| done.iter().filter(|o| o.0[j]).count() as f64 / m).collect();
    let target = 1.0 - cfg.alpha0;
    let covered_proportion =
        coverage.iter().filter(|&&c| c >= target - COVERAGE_TOL).count() as f64 / grid.len() as f64;
    let avg_width = done.iter().map(|o| o.1).sum::<f64>() / m;
    let alpha_hat = done.iter().map(|o| o.2).collect();
    Ok(DensityStudyResult { grid, coverage, covered_proportion, avg_width, alpha_hat, failed })
}
