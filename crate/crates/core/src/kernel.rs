//! Second-order kernels used for smoothing and density estimation.

use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Symmetric probability-density kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kernel {
    /// `0.75 (1 - u²)` on `[-1, 1]`.
    Epanechnikov,
    /// Standard normal density.
    Gaussian,
    /// `(15/16) (1 - u²)²` on `[-1, 1]`.
    Biweight,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Epanechnikov, Kernel::Gaussian, Kernel::Biweight];

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => libm::exp(-0.5 * u * u) / libm::sqrt(2.0 * PI),
            Kernel::Biweight => {
                if u.abs() < 1.0 {
                    let t = 1.0 - u * u;
                    0.9375 * t * t
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed support interval, or `None` for unbounded support.
    pub fn support(self) -> Option<(f64, f64)> {
        match self {
            Kernel::Gaussian => None,
            _ => Some((-1.0, 1.0)),
        }
    }

    /// κ = ∫ K².
    pub fn roughness(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
            Kernel::Gaussian => 0.5 / libm::sqrt(PI),
            Kernel::Biweight => 5.0 / 7.0,
        }
    }

    /// κ₂ = ∫ u² K(u) du.
    pub fn second_moment(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.2,
            Kernel::Gaussian => 1.0,
            Kernel::Biweight => 1.0 / 7.0,
        }
    }

    /// Draw one variate with density `K`.
    ///
    /// Epanechnikov uses the median-of-three-uniforms construction; Biweight
    /// has no registered sampler.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> Result<f64> {
        match self {
            Kernel::Gaussian => Ok(rng.sample(StandardNormal)),
            Kernel::Epanechnikov => {
                let u1: f64 = rng.random_range(-1.0..1.0);
                let u2: f64 = rng.random_range(-1.0..1.0);
                let u3: f64 = rng.random_range(-1.0..1.0);
                if u3.abs() >= u2.abs() && u3.abs() >= u1.abs() {
                    Ok(u2)
                } else {
                    Ok(u3)
                }
            }
            Kernel::Biweight => Err(Error::UnsamplableKernel(self)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
            Kernel::Biweight => "biweight",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "biweight" | "quartic" => Ok(Kernel::Biweight),
            _ => Err(crate::error::invalid(alloc::format!("unknown kernel '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    /// Composite Simpson rule on [a, b] with `m` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        let mut s = f(a) + f(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn range(k: Kernel) -> (f64, f64) {
        k.support().unwrap_or((-12.0, 12.0))
    }

    #[test]
    fn moments_match_quadrature() {
        for k in Kernel::ALL {
            let (a, b) = range(k);
            let mass = simpson(|u| k.eval(u), a, b, 20_000);
            let rough = simpson(|u| k.eval(u).powi(2), a, b, 20_000);
            let m2 = simpson(|u| u * u * k.eval(u), a, b, 20_000);
            assert!((mass - 1.0).abs() < 1e-8, "{k}: mass {mass}");
            assert!((rough - k.roughness()).abs() < 1e-8, "{k}: kappa {rough}");
            assert!((m2 - k.second_moment()).abs() < 1e-8, "{k}: kappa2 {m2}");
        }
    }

    #[test]
    fn symmetric() {
        for k in Kernel::ALL {
            for i in 0..200 {
                let u = -3.0 + i as f64 * 0.03;
                assert_eq!(k.eval(u), k.eval(-u));
            }
        }
    }

    #[test]
    fn sampler_moments() {
        let n = 200_000;
        for k in [Kernel::Gaussian, Kernel::Epanechnikov] {
            let mut rng = substream(11, &[k as u64]);
            let draws: alloc::vec::Vec<f64> = (0..n).map(|_| k.sample(&mut rng).unwrap()).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| d * d).sum::<f64>() / n as f64;
            let se = libm::sqrt(k.second_moment() / n as f64);
            assert!(mean.abs() < 4.0 * se, "{k}: mean {mean}");
            assert!((var - k.second_moment()).abs() < 0.02 * k.second_moment(), "{k}: var {var}");
            if let Some((a, b)) = k.support() {
                assert!(draws.iter().all(|&d| d >= a && d <= b));
            }
        }
        let mut rng = substream(1, &[]);
        assert_eq!(Kernel::Biweight.sample(&mut rng), Err(Error::UnsamplableKernel(Kernel::Biweight)));
    }

    #[test]
    fn parse_names() {
        for k in Kernel::ALL {
            assert_eq!(k.name().parse::<Kernel>().unwrap(), k);
        }
        assert!("triangle".parse::<Kernel>().is_err());
    }
}
