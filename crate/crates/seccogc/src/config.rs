//! One experiment configuration shared by every entry point.
//!
//! A single TOML or JSON document describes the code, keys, network, privacy
//! parameters, and training run; each command reads the sections it needs.
//! Cross-section consistency (one K everywhere) is validated up front so a
//! typo fails fast instead of three subcommands deep.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{Arithmetic, CodingScheme};
use crate::fltrain::{Dataset, ModelSpec, Scheme, TrainingConfig};
use crate::keys::KeySchedule;
use crate::netsim::{MatrixOrScalar, NetworkConfig, NetworkConfigFile, ProbSemantics, VectorOrScalar};
use crate::privacy::{DeltaTargets, PrivacyParams, RadiusMethod};
use crate::rng::mix64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("config field {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed; every stream in the experiment derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    /// Aggregation schemes to run/compare.
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    pub code: CodeSection,
    #[serde(default)]
    pub keys: KeysSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    #[serde(default)]
    pub training: TrainingSection,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_schemes() -> Vec<String> {
    Scheme::ALL.iter().map(|s| s.name().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSection {
    #[serde(rename = "K")]
    pub k: usize,
    pub s: usize,
    #[serde(default = "default_arithmetic")]
    pub arithmetic: Arithmetic,
}

fn default_arithmetic() -> Arithmetic {
    Arithmetic::ExactRational
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeysSection {
    pub lambda: f64,
}

impl Default for KeysSection {
    fn default() -> Self {
        KeysSection { lambda: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub p_client_relay: MatrixOrScalar,
    pub p_relay_server: VectorOrScalar,
    #[serde(default)]
    pub prob_semantics: ProbSemantics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub zeta: f64,
    /// Model dimension used by standalone privacy reports.
    pub dim: usize,
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta6: f64,
    pub delta7: f64,
    pub delta_prime: f64,
    pub radius_method: RadiusMethodName,
    pub radius_draws: u64,
}

impl Default for PrivacySection {
    fn default() -> Self {
        PrivacySection {
            zeta: 1.0,
            dim: 64,
            delta0: 0.5,
            delta1: 0.01,
            delta2: 0.01,
            delta3: 0.01,
            delta6: 0.01,
            delta7: 0.01,
            delta_prime: 0.05,
            radius_method: RadiusMethodName::McQuantile,
            radius_draws: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMethodName {
    McQuantile,
    BernsteinAnalytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub rounds: usize,
    pub local_iters: usize,
    pub learning_rate: f64,
    /// Defaults to all-ones of length `local_iters` (plain SGD accumulation).
    #[serde(default)]
    pub accumulation: Option<Vec<f64>>,
    pub batch_size: usize,
    pub model: ModelSpec,
    pub eval_every: usize,
    pub max_attempts: u32,
    pub dataset: DatasetSection,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            rounds: 300,
            local_iters: 1,
            learning_rate: 0.02,
            accumulation: None,
            batch_size: 64,
            model: ModelSpec::Logistic,
            eval_every: 1,
            max_attempts: 50,
            dataset: DatasetSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum DatasetSection {
    Synthetic {
        train_size: usize,
        test_size: usize,
        dim: usize,
        classes: usize,
        mean_scale: f64,
        noise_std: f64,
        gamma: f64,
    },
    Csv {
        train_path: String,
        test_path: String,
        gamma: f64,
    },
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection::Synthetic {
            train_size: 10_000,
            test_size: 2_000,
            dim: 32,
            classes: 10,
            mean_scale: 1.0,
            noise_std: 1.0,
            gamma: 0.2,
        }
    }
}

impl DatasetSection {
    pub fn gamma(&self) -> f64 {
        match self {
            DatasetSection::Synthetic { gamma, .. } => *gamma,
            DatasetSection::Csv { gamma, .. } => *gamma,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let by_ext = path.extension().and_then(|e| e.to_str());
        let cfg = match by_ext {
            Some("json") => Self::from_json(&text)?,
            Some("toml") => Self::from_toml(&text)?,
            // no or unknown extension: try TOML first, then JSON
            _ => Self::from_toml(&text).or_else(|_| Self::from_json(&text))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// TOML integers are signed 64-bit; seeds above `i64::MAX` only
    /// round-trip through JSON.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let k = self.code.k;
        if k == 0 {
            return Err(invalid("code.K", "must be positive"));
        }
        if self.code.s >= k {
            return Err(invalid(
                "code.s",
                format!("must satisfy s <= K-1 = {}", k - 1),
            ));
        }
        if self.keys.lambda < 0.0 {
            return Err(invalid("keys.lambda", "must be nonnegative"));
        }
        if let MatrixOrScalar::Matrix(rows) = &self.network.p_client_relay {
            if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                return Err(invalid(
                    "network.p_client_relay",
                    format!("matrix must be {k}x{k} to match code.K"),
                ));
            }
        }
        if let VectorOrScalar::Vector(v) = &self.network.p_relay_server {
            if v.len() != k {
                return Err(invalid(
                    "network.p_relay_server",
                    format!("vector must have length {k} to match code.K"),
                ));
            }
        }
        self.network().map_err(|e| invalid("network", e.to_string()))?;
        self.privacy_params()
            .validate()
            .map_err(|e| invalid("privacy", e.to_string()))?;
        if !(0.0 < self.privacy.delta_prime && self.privacy.delta_prime < 1.0) {
            return Err(invalid("privacy.delta_prime", "must lie in (0,1)"));
        }
        if self.privacy.radius_draws == 0 {
            return Err(invalid("privacy.radius_draws", "must be positive"));
        }
        self.training_config()
            .validate()
            .map_err(|e| invalid("training", e.to_string()))?;
        if self.training.dataset.gamma() <= 0.0 {
            return Err(invalid("training.dataset.gamma", "must be positive"));
        }
        for s in &self.schemes {
            s.parse::<Scheme>()
                .map_err(|e| invalid("schemes", e))?;
        }
        Ok(())
    }

    pub fn scheme_list(&self) -> Vec<Scheme> {
        self.schemes
            .iter()
            .map(|s| s.parse().expect("validated"))
            .collect()
    }

    pub fn coding_scheme(&self) -> Result<CodingScheme, crate::codes::CodesError> {
        CodingScheme::build(self.code.k, self.code.s, self.code.arithmetic)
    }

    /// Key schedule for a given model dimension.
    pub fn key_schedule(&self, dim: usize) -> Result<KeySchedule, crate::keys::KeysError> {
        KeySchedule::build(self.code.k, self.keys.lambda, dim)
    }

    pub fn network(&self) -> Result<NetworkConfig, crate::netsim::NetsimError> {
        NetworkConfigFile {
            k: self.code.k,
            p_client_relay: self.network.p_client_relay.clone(),
            p_relay_server: self.network.p_relay_server.clone(),
            seed: mix64(self.seed ^ 0x006e_6574_776f_726b), // "network"
            prob_semantics: self.network.prob_semantics,
        }
        .build()
    }

    pub fn privacy_params(&self) -> PrivacyParams {
        PrivacyParams {
            zeta: self.privacy.zeta,
            lambda: self.keys.lambda,
            dim: self.privacy.dim,
            delta0: self.privacy.delta0,
            deltas: DeltaTargets {
                d1: self.privacy.delta1,
                d2: self.privacy.delta2,
                d3: self.privacy.delta3,
                d6: self.privacy.delta6,
                d7: self.privacy.delta7,
            },
        }
    }

    pub fn radius_method(&self) -> RadiusMethod {
        match self.privacy.radius_method {
            RadiusMethodName::McQuantile => RadiusMethod::McQuantile {
                draws: self.privacy.radius_draws,
            },
            RadiusMethodName::BernsteinAnalytic => RadiusMethod::BernsteinAnalytic,
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            rounds: t.rounds,
            local_iters: t.local_iters,
            learning_rate: t.learning_rate,
            accumulation: t
                .accumulation
                .clone()
                .unwrap_or_else(|| vec![1.0; t.local_iters]),
            batch_size: t.batch_size,
            model: t.model,
            eval_every: t.eval_every,
            max_attempts: t.max_attempts,
            seed: self.seed,
        }
    }

    /// Loads or generates the train/test datasets.
    pub fn datasets(&self) -> Result<(Dataset, Dataset), ConfigError> {
        match &self.training.dataset {
            DatasetSection::Synthetic {
                train_size,
                test_size,
                dim,
                classes,
                mean_scale,
                noise_std,
                ..
            } => Ok(Dataset::synthetic_split(
                *train_size,
                *test_size,
                *dim,
                *classes,
                *mean_scale,
                *noise_std,
                mix64(self.seed ^ 0x6461_7461), // "data"
            )),
            DatasetSection::Csv {
                train_path,
                test_path,
                ..
            } => {
                let read = |p: &str| -> Result<Dataset, ConfigError> {
                    let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                        path: p.to_string(),
                        source,
                    })?;
                    Dataset::from_csv(&text).map_err(|e| ConfigError::Parse(e.to_string()))
                };
                Ok((read(train_path)?, read(test_path)?))
            }
        }
    }
}

/// A ready-to-edit configuration mirroring the symmetric-network benchmark.
pub fn example_config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 42,
        out_dir: "out".into(),
        schemes: default_schemes(),
        code: CodeSection {
            k: 10,
            s: 7,
            arithmetic: Arithmetic::ExactRational,
        },
        keys: KeysSection { lambda: 0.01 },
        network: NetworkSection {
            p_client_relay: MatrixOrScalar::Scalar(0.9),
            p_relay_server: VectorOrScalar::Scalar(0.7),
            prob_semantics: ProbSemantics::Success,
        },
        privacy: PrivacySection::default(),
        training: TrainingSection::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_is_identity() {
        let cfg = example_config();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        // and once more through the serializer
        assert_eq!(text, back.to_toml());
    }

    #[test]
    fn json_parses_too() {
        let cfg = example_config();
        let json = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn cross_section_k_mismatch_rejected() {
        let mut cfg = example_config();
        cfg.network.p_relay_server = VectorOrScalar::Vector(vec![0.7; 9]);
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { field, .. } if field == "network.p_relay_server"));
    }

    #[test]
    fn invalid_s_rejected() {
        let mut cfg = example_config();
        cfg.code.s = 10;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_scheme_rejected() {
        let mut cfg = example_config();
        cfg.schemes = vec!["turbo-hfl".into()];
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("turbo-hfl"));
    }

    #[test]
    fn minimal_toml_uses_defaults() {
        let text = r#"
            [code]
            K = 5
            s = 2

            [network]
            p_client_relay = 0.9
            p_relay_server = 0.7
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.code.k, 5);
        assert_eq!(cfg.schemes.len(), 4);
        assert_eq!(cfg.privacy.dim, 64);
    }

    #[test]
    fn csv_dataset_section_loads_files() {
        let dir = std::env::temp_dir().join(format!("seccogc-cfg-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let train = dir.join("train.csv");
        let test = dir.join("test.csv");
        std::fs::write(&train, "0,1.0,0.0\n1,0.0,1.0\n0,0.9,0.1\n1,0.1,0.9\n").unwrap();
        std::fs::write(&test, "0,1.0,0.2\n1,0.2,1.0\n").unwrap();
        let mut cfg = example_config();
        cfg.training.dataset = DatasetSection::Csv {
            train_path: train.to_string_lossy().into_owned(),
            test_path: test.to_string_lossy().into_owned(),
            gamma: 0.5,
        };
        let (tr, te) = cfg.datasets().unwrap();
        assert_eq!((tr.len(), tr.dim, tr.classes), (4, 2, 2));
        assert_eq!(te.len(), 2);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        let text = r#"
            typo_field = 1
            [code]
            K = 5
            s = 2
            [network]
            p_client_relay = 0.9
            p_relay_server = 0.7
        "#;
        assert!(ExperimentConfig::from_toml(text).is_err());
    }
}
