//! JSON configuration of simulation studies.

use bandforge_core::kernel::Kernel;
use bandforge_core::sim::{MethodSpec, StudyBandwidth, StudyConfig, TestCurve};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSetting {
    Fixed(f64),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodEntry {
    Ours,
    Naive,
    Undersmooth { gammas: Vec<f64> },
    BiasCorrect { lambdas: Vec<f64> },
    DoubleBootstrap { outer: usize, inner: usize },
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_n_sims() -> usize {
    200
}
fn default_boot() -> usize {
    499
}
fn default_alpha0() -> f64 {
    0.05
}
fn default_xi() -> Vec<f64> {
    vec![0.1]
}
fn default_region() -> [f64; 2] {
    [-0.9, 0.9]
}
fn default_grid() -> usize {
    91
}
fn default_kernel() -> String {
    "epanechnikov".to_owned()
}
fn default_bandwidth() -> BandwidthSetting {
    BandwidthSetting::Rule("plugin".to_owned())
}

/// Simulation config; `g_index` and `sigma` may list several values, and one
/// study runs per combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub g_index: OneOrMany<u8>,
    pub n: usize,
    pub sigma: OneOrMany<f64>,
    #[serde(default = "default_n_sims")]
    pub n_sims: usize,
    #[serde(default = "default_boot")]
    pub boot: usize,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    #[serde(default = "default_xi")]
    pub xi_list: Vec<f64>,
    #[serde(default = "default_region")]
    pub region: [f64; 2],
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: BandwidthSetting,
    pub methods: Vec<MethodEntry>,
}

/// Schema or value error, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("field '{field}': {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.to_owned(), message: message.into() }
    }
}

pub fn parse_simulate_config(text: &str) -> Result<SimulateConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        // A missing field is reported on its parent.
        let field = match extract_quoted(&msg).filter(|_| msg.starts_with("missing field")) {
            Some(f) if path == "." => f,
            Some(f) => format!("{path}.{f}"),
            None => path,
        };
        ConfigError::new(&field, msg)
    })
}

fn extract_quoted(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_owned())
}

impl SimulateConfig {
    /// One study config per `(sigma, g_index)` combination, sigma-major.
    pub fn studies(&self, seed: u64) -> Result<Vec<StudyConfig>, ConfigError> {
        if self.schema_version != CONFIG_VERSION {
            return Err(ConfigError::new("schema_version", format!("unsupported version {}", self.schema_version)));
        }
        let kernel: Kernel =
            self.kernel.parse().map_err(|e: bandforge_core::error::Error| ConfigError::new("kernel", e.to_string()))?;
        let bandwidth = match &self.bandwidth {
            BandwidthSetting::Fixed(h) => StudyBandwidth::Fixed(*h),
            BandwidthSetting::Rule(r) if r == "plugin" => StudyBandwidth::PlugIn,
            BandwidthSetting::Rule(r) => {
                return Err(ConfigError::new("bandwidth", format!("expected \"plugin\" or a number, got \"{r}\"")))
            }
        };
        let methods = self
            .methods
            .iter()
            .map(|m| match m {
                MethodEntry::Ours => MethodSpec::Ours,
                MethodEntry::Naive => MethodSpec::Naive,
                MethodEntry::Undersmooth { gammas } => MethodSpec::Undersmooth { gammas: gammas.clone() },
                MethodEntry::BiasCorrect { lambdas } => MethodSpec::BiasCorrect { lambdas: lambdas.clone() },
                MethodEntry::DoubleBootstrap { outer, inner } => {
                    MethodSpec::DoubleBootstrap { outer: *outer, inner: *inner }
                }
            })
            .collect::<Vec<_>>();
        let sigmas = self.sigma.to_vec();
        let curves = self.g_index.to_vec();
        if sigmas.is_empty() {
            return Err(ConfigError::new("sigma", "must not be empty"));
        }
        if curves.is_empty() {
            return Err(ConfigError::new("g_index", "must not be empty"));
        }
        let mut out = Vec::new();
        for &sigma in &sigmas {
            for &g in &curves {
                let curve = TestCurve::from_index(g).map_err(|e| ConfigError::new("g_index", e.to_string()))?;
                let cfg = StudyConfig {
                    curve,
                    n: self.n,
                    sigma,
                    n_sims: self.n_sims,
                    boot: self.boot,
                    alpha0: self.alpha0,
                    xi_list: self.xi_list.clone(),
                    region: (self.region[0], self.region[1]),
                    grid_len: self.grid,
                    seed,
                    kernel,
                    bandwidth,
                    methods: methods.clone(),
                };
                cfg.validate().map_err(|e| {
                    let msg = match e {
                        bandforge_core::error::Error::InvalidInput(m) => m,
                        other => other.to_string(),
                    };
                    let (field, rest) = msg.split_once(": ").unwrap_or(("config", msg.as_str()));
                    ConfigError::new(field, rest)
                })?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"g_index": 3, "n": 40, "sigma": 1.0, "methods": [{"method": "ours"}]}"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_simulate_config(MINIMAL).unwrap();
        let studies = cfg.studies(1).unwrap();
        assert_eq!(studies.len(), 1);
        assert_eq!(studies[0].n_sims, 200);
        assert_eq!(studies[0].grid_len, 91);
    }

    #[test]
    fn errors_name_the_field() {
        let e =
            parse_simulate_config(r#"{"g_index": 3, "n": 40, "sigma": 1.0, "methods": [], "bogus": 1}"#).unwrap_err();
        assert_eq!(e.field, "bogus");
        let e = parse_simulate_config(r#"{"g_index": 3, "sigma": 1.0, "methods": []}"#).unwrap_err();
        assert_eq!(e.field, "n");
        let e = parse_simulate_config(r#"{"g_index": 3, "n": "many", "sigma": 1.0, "methods": []}"#).unwrap_err();
        assert_eq!(e.field, "n");
        let cfg = parse_simulate_config(r#"{"g_index": 3, "n": 40, "sigma": 1.0, "methods": []}"#).unwrap();
        assert_eq!(cfg.studies(1).unwrap_err().field, "methods");
        let cfg =
            parse_simulate_config(r#"{"g_index": [1, 7], "n": 40, "sigma": 1.0, "methods": [{"method": "naive"}]}"#)
                .unwrap();
        assert_eq!(cfg.studies(1).unwrap_err().field, "g_index");
    }
}
