//! Two-hop unreliable network model.
//!
//! Links are independent Bernoulli: either a transmission arrives perfectly or
//! it is lost. Each link state is a pure function of
//! `(seed, round, attempt, link)` via a counter-based stream, so adding
//! metrics, reordering evaluation, or rerunning a single round never changes
//! what the network did.
//!
//! Probabilities are stored as *success* probabilities internally; every
//! constructor and accessor says which convention it uses. Config files carry
//! an explicit `prob_semantics` field ("success" or "outage") because the two
//! conventions are one careless negation apart.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat::Mat;
use crate::rng::{tag, unit_uniform};

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("probability out of range at {context}: {value}")]
    BadProbability { context: String, value: f64 },
    #[error("network config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProbSemantics {
    /// Values are P(link delivers).
    #[default]
    Success,
    /// Values are the Bernoulli outage parameter, P(link fails).
    Outage,
}

/// Outage/success probabilities for every link plus the sampling seed.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    k: usize,
    /// success_client_relay[(j, k)] = P(client k's upload to relay j arrives)
    success_client_relay: Mat<f64>,
    /// success_relay_server[j] = P(relay j's upload to the server arrives)
    success_relay_server: Vec<f64>,
    seed: u64,
}

/// One attempt's sampled link states. `true` = delivered.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub tau_client_relay: Mat<bool>,
    pub tau_relay_server: Vec<bool>,
    pub attempt: u32,
}

impl NetworkConfig {
    /// Uniform success probabilities on both hops.
    pub fn symmetric(k: usize, success_cr: f64, success_rs: f64, seed: u64) -> Self {
        Self::from_success(
            Mat::from_fn(k, k, |_, _| success_cr),
            vec![success_rs; k],
            seed,
        )
        .expect("uniform probabilities validated by caller")
    }

    /// Builds from success probabilities (P(delivered)).
    pub fn from_success(
        success_client_relay: Mat<f64>,
        success_relay_server: Vec<f64>,
        seed: u64,
    ) -> Result<Self, NetsimError> {
        let k = success_relay_server.len();
        if success_client_relay.rows() != k || success_client_relay.cols() != k {
            return Err(NetsimError::BadConfig(format!(
                "client-relay matrix is {}x{}, expected {k}x{k}",
                success_client_relay.rows(),
                success_client_relay.cols()
            )));
        }
        for j in 0..k {
            for kk in 0..k {
                check_prob(success_client_relay[(j, kk)], || format!("p[{j},{kk}]"))?;
            }
            check_prob(success_relay_server[j], || format!("p[{j}]"))?;
        }
        Ok(NetworkConfig {
            k,
            success_client_relay,
            success_relay_server,
            seed,
        })
    }

    /// Builds from outage probabilities (P(lost)), the convention of the
    /// analytical formulas.
    pub fn from_outage(
        outage_client_relay: Mat<f64>,
        outage_relay_server: Vec<f64>,
        seed: u64,
    ) -> Result<Self, NetsimError> {
        Self::from_success(
            outage_client_relay.map(|p| 1.0 - p),
            outage_relay_server.iter().map(|p| 1.0 - p).collect(),
            seed,
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn success_client_relay(&self, j: usize, k: usize) -> f64 {
        self.success_client_relay[(j, k)]
    }
    pub fn success_relay_server(&self, j: usize) -> f64 {
        self.success_relay_server[j]
    }
    /// Outage probability p_{j,k} of the client->relay link.
    pub fn outage_client_relay(&self, j: usize, k: usize) -> f64 {
        1.0 - self.success_client_relay[(j, k)]
    }
    /// Outage probability p_j of the relay->server link.
    pub fn outage_relay_server(&self, j: usize) -> f64 {
        1.0 - self.success_relay_server[j]
    }

    /// Samples every link state for `(round, attempt)`. Pure function of its
    /// arguments and the config.
    pub fn sample_links(&self, round: u64, attempt: u32) -> LinkRealization {
        let k = self.k;
        let tau_client_relay = Mat::from_fn(k, k, |j, kk| {
            let u = unit_uniform(&[
                self.seed,
                tag::LINK_CLIENT_RELAY,
                round,
                attempt as u64,
                (j * k + kk) as u64,
            ]);
            u < self.success_client_relay[(j, kk)]
        });
        let tau_relay_server = (0..k)
            .map(|j| {
                let u = unit_uniform(&[
                    self.seed,
                    tag::LINK_RELAY_SERVER,
                    round,
                    attempt as u64,
                    j as u64,
                ]);
                u < self.success_relay_server[j]
            })
            .collect();
        LinkRealization {
            tau_client_relay,
            tau_relay_server,
            attempt,
        }
    }

    pub fn to_file_repr(&self) -> NetworkConfigFile {
        NetworkConfigFile {
            k: self.k,
            p_client_relay: MatrixOrScalar::Matrix(
                (0..self.k)
                    .map(|j| self.success_client_relay.row(j).to_vec())
                    .collect(),
            ),
            p_relay_server: VectorOrScalar::Vector(self.success_relay_server.clone()),
            seed: self.seed,
            prob_semantics: ProbSemantics::Success,
        }
    }
}

fn check_prob(p: f64, context: impl Fn() -> String) -> Result<(), NetsimError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(NetsimError::BadProbability {
            context: context(),
            value: p,
        });
    }
    Ok(())
}

/// On-disk form: scalars broadcast, and `prob_semantics` says whether the
/// numbers mean success or outage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfigFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub p_client_relay: MatrixOrScalar,
    pub p_relay_server: VectorOrScalar,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prob_semantics: ProbSemantics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixOrScalar {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorOrScalar {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl NetworkConfigFile {
    pub fn build(&self) -> Result<NetworkConfig, NetsimError> {
        let k = self.k;
        if k == 0 {
            return Err(NetsimError::BadConfig("K must be positive".into()));
        }
        let cr = match &self.p_client_relay {
            MatrixOrScalar::Scalar(p) => Mat::from_fn(k, k, |_, _| *p),
            MatrixOrScalar::Matrix(rows) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(NetsimError::BadConfig(format!(
                        "p_client_relay must be {k}x{k}"
                    )));
                }
                Mat::from_rows(rows.clone())
            }
        };
        let rs = match &self.p_relay_server {
            VectorOrScalar::Scalar(p) => vec![*p; k],
            VectorOrScalar::Vector(v) => {
                if v.len() != k {
                    return Err(NetsimError::BadConfig(format!(
                        "p_relay_server must have length {k}"
                    )));
                }
                v.clone()
            }
        };
        match self.prob_semantics {
            ProbSemantics::Success => NetworkConfig::from_success(cr, rs, self.seed),
            ProbSemantics::Outage => NetworkConfig::from_outage(cr, rs, self.seed),
        }
    }
}
