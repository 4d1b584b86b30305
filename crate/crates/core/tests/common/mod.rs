//! Straight-line reference implementations shared by the integration tests.
//! Nothing here calls into the library's numerical code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

pub fn gaussian(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// `z_{1−α/2}`.
pub fn z_two_sided(alpha: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - alpha / 2.0)
}

/// Intercept of the weighted least-squares line through `(x_i − at, y_i)`.
pub fn wls_line(x: &[f64], y: &[f64], w: &[f64], at: f64) -> Option<f64> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let d = x[i] - at;
        s0 += w[i];
        s1 += w[i] * d;
        s2 += w[i] * d * d;
        t0 += w[i] * y[i];
        t1 += w[i] * d * y[i];
    }
    let det = s0 * s2 - s1 * s1;
    if det <= 1e-13 * s0 * s2 || s0 <= 0.0 {
        return None;
    }
    Some((s2 * t0 - s1 * t1) / det)
}

/// Local linear estimate at `at` with kernel `k` and bandwidth `h`.
pub fn local_linear(x: &[f64], y: &[f64], h: f64, k: fn(f64) -> f64, at: f64) -> Option<f64> {
    let w: Vec<f64> = x.iter().map(|&xi| k((at - xi) / h)).collect();
    wls_line(x, y, &w, at)
}

/// Local linear weights `w_i(at)` with `ĝ(at) = Σ w_i y_i`.
pub fn local_linear_weights(x: &[f64], h: f64, k: fn(f64) -> f64, at: f64) -> Option<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            let e: Vec<f64> = (0..x.len()).map(|m| if m == i { 1.0 } else { 0.0 }).collect();
            local_linear(x, &e, h, k, at)
        })
        .collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation.
pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Type-7 quantile.
pub fn quantile7(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = p * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

pub fn silverman(v: &[f64]) -> f64 {
    let spread = sd(v).min((quantile7(v, 0.75) - quantile7(v, 0.25)) / 1.34);
    0.9 * spread * (v.len() as f64).powf(-0.2)
}

/// Gaussian-kernel density estimate at `at`.
pub fn kde_gauss(v: &[f64], h: f64, at: f64) -> f64 {
    v.iter().map(|&xi| gaussian((at - xi) / h)).sum::<f64>() / (v.len() as f64 * h)
}

/// Half the mean squared successive difference of `y` ordered by `x`.
pub fn rice(x: &[f64], y: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let ss: f64 = idx.windows(2).map(|w| (y[w[1]] - y[w[0]]).powi(2)).sum();
    ss / (2.0 * (x.len() - 1) as f64)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator of the substream at `path` below `seed`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut s = mix(seed);
    for &p in path {
        s = mix(s ^ mix(p.wrapping_add(0x2545_F491_4F6C_DD1D)));
    }
    ChaCha8Rng::seed_from_u64(s)
}

/// Order statistic of rank `⌈num/den · m⌉` (integer arithmetic), clamped to `[1, len]`.
pub fn rank(num: usize, den: usize, m: usize, len: usize) -> usize {
    (num * m).div_ceil(den).clamp(1, len)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    let scale = 1.0_f64.max(a.abs()).max(b.abs());
    assert!((a - b).abs() <= tol * scale, "{what}: {a} vs {b}");
}

/// Fit ingredients shared by both bootstrap traces.
pub struct Reference {
    pub ghat_grid: Vec<f64>,
    pub ghat_design: Vec<f64>,
    pub centered: Vec<f64>,
    pub scale: Vec<f64>,
    pub sigma2: f64,
}

/// Epanechnikov local linear fit, Gaussian-Silverman design density and Rice σ̂².
pub fn reference(x: &[f64], y: &[f64], h: f64, grid: &[f64]) -> Reference {
    let n = x.len();
    let ghat_grid: Vec<f64> = grid.iter().map(|&g| local_linear(x, y, h, epanechnikov, g).unwrap()).collect();
    let ghat_design: Vec<f64> = x.iter().map(|&g| local_linear(x, y, h, epanechnikov, g).unwrap()).collect();
    let raw: Vec<f64> = y.iter().zip(&ghat_design).map(|(a, b)| a - b).collect();
    let m = mean(&raw);
    let centered = raw.iter().map(|r| r - m).collect();
    let h1 = silverman(x);
    let scale = grid.iter().map(|&g| (0.6 / (n as f64 * h * kde_gauss(x, h1, g))).sqrt()).collect();
    Reference { ghat_grid, ghat_design, centered, scale, sigma2: rice(x, y) }
}

/// Residual bootstrap written out replicate by replicate.
pub struct ResidualTrace {
    pub fit: Reference,
    /// `[b][j]`
    pub estimates: Vec<Vec<f64>>,
    pub sigma2star: Vec<f64>,
    /// `[b][j]`
    pub t: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub alpha_hat: f64,
}

/// `alpha0` and `xi` are given as integer fractions so ranks use exact integer arithmetic.
pub fn residual_trace(
    x: &[f64],
    y: &[f64],
    h: f64,
    grid: &[f64],
    seed: u64,
    boot: usize,
    alpha0: (usize, usize),
    xi: (usize, usize),
) -> ResidualTrace {
    let n = x.len();
    let fit = reference(x, y, h, grid);
    let mut estimates = Vec::new();
    let mut sigma2star = Vec::new();
    let mut t = Vec::new();
    for b in 0..boot {
        let mut rng = stream(seed, &[1, b as u64]);
        let ystar: Vec<f64> = (0..n).map(|i| fit.ghat_design[i] + fit.centered[rng.random_range(0..n)]).collect();
        let s2 = rice(x, &ystar);
        let gstar: Vec<f64> = grid.iter().map(|&g| local_linear(x, &ystar, h, epanechnikov, g).unwrap()).collect();
        t.push((0..grid.len()).map(|j| (gstar[j] - fit.ghat_grid[j]).abs() / (fit.scale[j] * s2.sqrt())).collect());
        estimates.push(gstar);
        sigma2star.push(s2);
    }
    let mut beta = Vec::new();
    for j in 0..grid.len() {
        let mut col: Vec<f64> = t.iter().map(|row: &Vec<f64>| row[j]).collect();
        col.sort_by(f64::total_cmp);
        let q = col[rank(alpha0.1 - alpha0.0, alpha0.1, boot + 1, boot) - 1];
        beta.push(2.0 * (1.0 - std_normal().cdf(q)));
    }
    let mut sorted = beta.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha_hat = sorted[rank(xi.0, xi.1, grid.len(), grid.len()) - 1];
    ResidualTrace { fit, estimates, sigma2star, t, beta, alpha_hat }
}

/// Double bootstrap with `inner = 3`, whose lattice is {1/2, 1}.
pub struct DoubleTrace {
    pub fit: Reference,
    /// `[j][b]`
    pub deviations: Vec<Vec<f64>>,
    /// `[j][b]`
    pub critical: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub alpha_hat: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Two first-level replicates, three second-level resamples each, α₀ = 0.05, ξ = 1/2.
pub fn double_trace(x: &[f64], y: &[f64], h: f64, grid: &[f64], seed: u64) -> DoubleTrace {
    let (outer, inner) = (2usize, 3usize);
    let n = x.len();
    let fit = reference(x, y, h, grid);
    let mut deviations = vec![vec![0.0; outer]; grid.len()];
    let mut critical = vec![vec![0.0; outer]; grid.len()];
    for b in 0..outer {
        let mut rng = stream(seed, &[1, b as u64]);
        let ystar: Vec<f64> = (0..n).map(|i| fit.ghat_design[i] + fit.centered[rng.random_range(0..n)]).collect();
        let gstar_design: Vec<f64> = x.iter().map(|&g| local_linear(x, &ystar, h, epanechnikov, g).unwrap()).collect();
        let raw: Vec<f64> = ystar.iter().zip(&gstar_design).map(|(a, b)| a - b).collect();
        let m = mean(&raw);
        let star_resid: Vec<f64> = raw.iter().map(|v| v - m).collect();
        let gstar: Vec<f64> = grid.iter().map(|&g| local_linear(x, &ystar, h, epanechnikov, g).unwrap()).collect();

        let mut inner_dev = vec![Vec::new(); grid.len()];
        for c in 0..inner {
            let mut rng2 = stream(seed, &[3, b as u64, c as u64]);
            let y2: Vec<f64> = (0..n).map(|i| gstar_design[i] + star_resid[rng2.random_range(0..n)]).collect();
            for (j, &g) in grid.iter().enumerate() {
                let g2 = local_linear(x, &y2, h, epanechnikov, g).unwrap();
                inner_dev[j].push((g2 - gstar[j]) / fit.scale[j]);
            }
        }
        for j in 0..grid.len() {
            deviations[j][b] = (gstar[j] - fit.ghat_grid[j]) / fit.scale[j];
            let mut col = inner_dev[j].clone();
            col.sort_by(f64::total_cmp);
            let d = (fit.ghat_grid[j] - gstar[j]) / fit.scale[j];
            // Lattice levels 1/2 and 1: ranks ⌈(α/2)·4⌉ and ⌈(1 − α/2)·4⌉, i.e. (1, 3) and (2, 2).
            let covers = |lo: usize, hi: usize| col[lo - 1] <= d && d <= col[hi - 1];
            critical[j][b] = if covers(2, 2) {
                1.0
            } else if covers(1, 3) {
                0.5
            } else {
                0.0
            };
        }
    }
    // ⌈0.95 · 3⌉ = 3 clamped to 2: the smaller critical level.
    let beta: Vec<f64> = critical.iter().map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let mut sorted = beta.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha_hat = sorted[rank(1, 2, grid.len(), grid.len()) - 1];
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for j in 0..grid.len() {
        let mut col = deviations[j].clone();
        col.sort_by(f64::total_cmp);
        let lo_rank = ((alpha_hat / 2.0) * 3.0 - 1e-9).ceil().clamp(1.0, 2.0) as usize;
        let hi_rank = ((1.0 - alpha_hat / 2.0) * 3.0 - 1e-9).ceil().clamp(1.0, 2.0) as usize;
        lower.push(fit.ghat_grid[j] + fit.scale[j] * col[lo_rank - 1]);
        upper.push(fit.ghat_grid[j] + fit.scale[j] * col[hi_rank - 1]);
    }
    DoubleTrace { fit, deviations, critical, beta, alpha_hat, lower, upper }
}
