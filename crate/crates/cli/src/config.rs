//! Experiment configuration documents (JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

pub const KINDS: [&str; 7] = ["analyze-kernel", "ledger", "decompose", "clt-rate", "random-env", "mixing-times", "skew-corr"];

#[derive(Debug, Clone)]
pub enum ExperimentConfig {
    AnalyzeKernel(AnalyzeKernelConfig),
    Ledger(LedgerConfig),
    Decompose(DecomposeConfig),
    CltRate(CltRateConfig),
    RandomEnv(RandomEnvConfig),
    MixingTimes(MixingTimesConfig),
    SkewCorr(SkewCorrConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::AnalyzeKernel(_) => "analyze-kernel",
            Self::Ledger(_) => "ledger",
            Self::Decompose(_) => "decompose",
            Self::CltRate(_) => "clt-rate",
            Self::RandomEnv(_) => "random-env",
            Self::MixingTimes(_) => "mixing-times",
            Self::SkewCorr(_) => "skew-corr",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::CltRate(c) => c.seed,
            Self::RandomEnv(c) => c.seed,
            Self::MixingTimes(c) => c.seed,
            Self::SkewCorr(c) => c.seed,
            _ => 0,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::CltRate(c) => c.seed = seed,
            Self::RandomEnv(c) => c.seed = seed,
            Self::MixingTimes(c) => c.seed = seed,
            Self::SkewCorr(c) => c.seed = seed,
            _ => {}
        }
    }
}

/// A matrix given inline or as a `.json`/`.csv` file next to the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub kernels: Vec<MatrixSource>,
    /// Repeat `kernels` over all of ℤ; otherwise a window from `start`.
    #[serde(default = "yes")]
    pub periodic: bool,
    #[serde(default)]
    pub start: i64,
    /// Defaults to the stationary law of a single periodic kernel, else
    /// uniform.
    #[serde(default)]
    pub initial_law: Option<Vec<f64>>,
    #[serde(default)]
    pub law_index: Option<i64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ObservableConfig {
    /// `f_j`, one vector per kernel slot (a single vector is repeated).
    Values(Vec<Vec<f64>>),
    /// `f_j(X_j, X_{j+1}) = g_j(X_j) − g_{j+1}(X_{j+1})`, run on the pair chain.
    Telescoping(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeKernelConfig {
    pub kernel: MatrixSource,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_max_lag() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerConfig {
    pub chain: ChainConfig,
    pub target: i64,
    pub max_length: usize,
    #[serde(default = "default_limit_tolerance")]
    pub tolerance: f64,
}

fn default_limit_tolerance() -> f64 {
    1e-13
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum TruncationConfig {
    Fixed(usize),
    Adaptive(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub chain: ChainConfig,
    pub observable: ObservableConfig,
    pub first: i64,
    pub last: i64,
    #[serde(default)]
    pub truncation: Option<TruncationConfig>,
    pub variance_horizon: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpConfig {
    pub rho: f64,
    /// `None` stands for −∞.
    #[serde(default)]
    pub lower: Option<f64>,
    /// `None` stands for +∞.
    #[serde(default)]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltRateConfig {
    pub chain: ChainConfig,
    pub observable: ObservableConfig,
    pub horizons: Vec<usize>,
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub weighted_s: Vec<f64>,
    #[serde(default)]
    pub lq: Vec<f64>,
    #[serde(default)]
    pub mdp: Option<MdpConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum BaseConfig {
    Iid(Vec<f64>),
    Markov {
        kernel: MatrixSource,
        #[serde(default)]
        start: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub alphabet: Vec<String>,
    pub base: BaseConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentConfig {
    pub kernels: BTreeMap<String, MatrixSource>,
    #[serde(default)]
    pub observables: Option<BTreeMap<String, Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodSetConfig {
    pub delta: f64,
    #[serde(default = "one")]
    pub m: usize,
    /// Symbols flagged good; absent means membership by certificate search.
    #[serde(default)]
    pub good_symbols: Option<Vec<String>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub size: usize,
    pub horizon: usize,
    pub past: usize,
    #[serde(default = "default_limit_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RegimeConfig {
    Polynomial(f64),
    Stretched(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchedCltConfig {
    pub environments: usize,
    pub horizons: Vec<usize>,
    pub paths: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomEnvConfig {
    pub environment: EnvironmentConfig,
    pub assignment: AssignmentConfig,
    pub good_set: GoodSetConfig,
    pub ensemble: EnsembleConfig,
    pub regime: RegimeConfig,
    #[serde(default)]
    pub seed: u64,
    /// Environments whose full series go to `quenched.csv`; all when absent.
    #[serde(default)]
    pub series_limit: Option<usize>,
    #[serde(default)]
    pub clt: Option<QuenchedCltConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingTimesConfig {
    pub environment: EnvironmentConfig,
    pub assignment: AssignmentConfig,
    pub good_set: GoodSetConfig,
    pub ensemble: EnsembleConfig,
    pub regime: RegimeConfig,
    #[serde(default)]
    pub seed: u64,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_moment")]
    pub p: f64,
}

fn default_moment() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewCorrConfig {
    pub environment: EnvironmentConfig,
    pub assignment: AssignmentConfig,
    pub good_set: GoodSetConfig,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub seed: u64,
    pub f: BTreeMap<String, Vec<f64>>,
    pub g: BTreeMap<String, Vec<f64>>,
    pub max_lag: usize,
}

fn section<T: DeserializeOwned>(value: serde_json::Value, origin: &Path) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| CliError::config(origin, e.path().to_string(), e.inner().to_string()))
}

/// Parses a config document; `kind` selects the schema and every other
/// key must belong to it.
pub fn parse(text: &str, origin: &Path) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: serde_json::Value =
        serde_path_to_error::deserialize(de).map_err(|e| CliError::config(origin, e.path().to_string(), e.inner().to_string()))?;
    let serde_json::Value::Object(mut map) = value else {
        return Err(CliError::config(origin, ".", "config must be a JSON object"));
    };
    let kind = match map.remove("kind") {
        Some(serde_json::Value::String(k)) => k,
        Some(_) => return Err(CliError::config(origin, "kind", "must be a string")),
        None => return Err(CliError::config(origin, "kind", format!("missing field `kind` (one of {})", KINDS.join(", ")))),
    };
    let rest = serde_json::Value::Object(map);
    Ok(match kind.as_str() {
        "analyze-kernel" => ExperimentConfig::AnalyzeKernel(section(rest, origin)?),
        "ledger" => ExperimentConfig::Ledger(section(rest, origin)?),
        "decompose" => ExperimentConfig::Decompose(section(rest, origin)?),
        "clt-rate" => ExperimentConfig::CltRate(section(rest, origin)?),
        "random-env" => ExperimentConfig::RandomEnv(section(rest, origin)?),
        "mixing-times" => ExperimentConfig::MixingTimes(section(rest, origin)?),
        "skew-corr" => ExperimentConfig::SkewCorr(section(rest, origin)?),
        other => return Err(CliError::config(origin, "kind", format!("unknown kind `{other}` (one of {})", KINDS.join(", ")))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> PathBuf {
        PathBuf::from("test.json")
    }

    #[test]
    fn parses_analyze_kernel() {
        let c = parse(r#"{"kind": "analyze-kernel", "kernel": [[0.9, 0.1], [0.2, 0.8]]}"#, &origin()).unwrap();
        let ExperimentConfig::AnalyzeKernel(a) = c else { panic!("wrong kind") };
        assert_eq!(a.max_lag, 64);
        assert!(matches!(a.kernel, MatrixSource::Inline(ref m) if m.len() == 2));
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"kind": "clt-rate", "chain": {"kernels": [[[1.0]]]}, "observable": {"values": [[1.0]]}, "paths": 10}"#;
        let err = parse(text, &origin()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("horizons"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = r#"{"kind": "ledger", "chain": {"kernels": [[[1.0]]], "perodic": true}, "target": 0, "max_length": 3}"#;
        let err = parse(text, &origin()).unwrap_err().to_string();
        assert!(err.contains("chain") && err.contains("perodic"), "{err}");
        let err = parse(r#"{"kind": "nope"}"#, &origin()).unwrap_err().to_string();
        assert!(err.contains("unknown kind"), "{err}");
    }

    #[test]
    fn nested_errors_carry_paths() {
        let text = r#"{"kind": "ledger", "chain": {"kernels": [[[1.0]], [[1.0, "x"]]]}, "target": 0, "max_length": 3}"#;
        let err = parse(text, &origin()).unwrap_err().to_string();
        assert!(err.contains("chain.kernels"), "{err}");
    }
}
