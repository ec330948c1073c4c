//! Per-layer local differential privacy accounting.
//!
//! Everything here is a closed form or a concentration statement about the
//! protocol's observables: the masked update a relay sees (client level), the
//! partial sum the server sees (relay level, protecting both a client's
//! participation and its value), and the decoded aggregate (server level,
//! where the other clients' own randomness is the noise). Link outages enter
//! through the effective delta and through the randomness of the aggregated
//! noise variance `nu = ||Lambda A||^2`, which is handled with a
//! high-probability radius around its mean.
//!
//! All logarithms are natural; leakage is reported in nats.

use serde::Serialize;
use thiserror::Error;

use crate::codes::CodingScheme;
use crate::keys::KeySchedule;
use crate::netsim::NetworkConfig;
use crate::rng::{run_chunked, stream, tag};

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("tail slack delta0 must be positive, got {0}")]
    BadTailSlack(f64),
    #[error("infinite leakage: lambda = 0 with zeta > 0 over a link that can deliver")]
    InfiniteLeakage,
    #[error(
        "radius {r} >= mean noise variance {nu_bar} (relay {j}, exclude {exclude:?}); \
         raise delta_prime or lambda"
    )]
    RadiusExceedsMean {
        j: usize,
        exclude: Option<usize>,
        r: f64,
        nu_bar: f64,
    },
    #[error("client {k} is not assigned to relay {j}")]
    NotAssigned { j: usize, k: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// One delta target per reported bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaTargets {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d6: f64,
    pub d7: f64,
}

impl Default for DeltaTargets {
    fn default() -> Self {
        DeltaTargets {
            d1: 0.01,
            d2: 0.01,
            d3: 0.01,
            d6: 0.01,
            d7: 0.01,
        }
    }
}

/// Source-model and key parameters shared by every bound.
#[derive(Debug, Clone, Serialize)]
pub struct PrivacyParams {
    /// Per-coordinate std of a local update, `Delta ~ N(0, zeta^2 I_D)`.
    pub zeta: f64,
    /// Per-coordinate std of a secret key.
    pub lambda: f64,
    /// Model dimension D.
    pub dim: usize,
    /// Chi-squared tail slack delta_0 > 0.
    pub delta0: f64,
    pub deltas: DeltaTargets,
}

impl PrivacyParams {
    /// High-probability update-norm bound `R = zeta sqrt(D (1 + delta0))`.
    pub fn radius(&self) -> f64 {
        self.zeta * ((self.dim as f64) * (1.0 + self.delta0)).sqrt()
    }

    pub fn validate(&self) -> Result<(), PrivacyError> {
        if self.delta0 <= 0.0 {
            return Err(PrivacyError::BadTailSlack(self.delta0));
        }
        if self.zeta < 0.0 || self.lambda < 0.0 {
            return Err(PrivacyError::BadParameter(
                "zeta and lambda must be nonnegative".into(),
            ));
        }
        if self.dim == 0 {
            return Err(PrivacyError::BadParameter("dim must be positive".into()));
        }
        for (name, d) in [
            ("delta1", self.deltas.d1),
            ("delta2", self.deltas.d2),
            ("delta3", self.deltas.d3),
            ("delta6", self.deltas.d6),
            ("delta7", self.deltas.d7),
        ] {
            if !(0.0 < d && d <= 1.0) {
                return Err(PrivacyError::BadParameter(format!(
                    "{name} must lie in (0, 1], got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// One (epsilon, delta, probability-guarantee) entry.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LdpTriple {
    pub epsilon: f64,
    pub delta: f64,
    pub prob_guarantee: f64,
}

/// Lower bound on `P(||Delta|| <= zeta sqrt(D (1 + delta0)))` for a Gaussian
/// update: `1 - exp(-(D/2) (delta0 - ln(1 + delta0)))`.
pub fn chi_square_tail_bound(dim: usize, delta0: f64) -> Result<f64, PrivacyError> {
    if delta0 <= 0.0 {
        return Err(PrivacyError::BadTailSlack(delta0));
    }
    let d = dim as f64;
    Ok(1.0 - (-(d / 2.0) * (delta0 - (1.0 + delta0).ln())).exp())
}

/// Worst-case mutual-information leakage of a masked update over one link,
/// `(1 - p_outage) (D/2) ln(1 + zeta^2 / lambda^2)` nats.
pub fn worst_case_leakage(
    p_outage: f64,
    dim: usize,
    zeta: f64,
    lambda: f64,
) -> Result<f64, PrivacyError> {
    if !(0.0..=1.0).contains(&p_outage) {
        return Err(PrivacyError::BadParameter(format!(
            "p_outage must lie in [0,1], got {p_outage}"
        )));
    }
    if zeta == 0.0 || p_outage == 1.0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Err(PrivacyError::InfiniteLeakage);
    }
    let snr = (zeta / lambda) * (zeta / lambda);
    Ok((1.0 - p_outage) * (dim as f64 / 2.0) * (1.0 + snr).ln())
}

/// Gaussian-mechanism constant `sqrt(2 ln(1.25 / delta))`.
fn eps_base(delta: f64) -> f64 {
    (2.0 * (1.25 / delta).ln()).sqrt()
}

/// Client-level LDP of the masked update over one unreliable link.
pub fn client_ldp(params: &PrivacyParams, p_outage: f64) -> Result<LdpTriple, PrivacyError> {
    params.validate()?;
    if !(0.0..=1.0).contains(&p_outage) {
        return Err(PrivacyError::BadParameter(format!(
            "p_outage must lie in [0,1], got {p_outage}"
        )));
    }
    let r = params.radius();
    let epsilon = if r == 0.0 {
        0.0
    } else if params.lambda == 0.0 {
        f64::INFINITY
    } else {
        (r / params.lambda) * eps_base(params.deltas.d1)
    };
    Ok(LdpTriple {
        epsilon,
        delta: (1.0 - p_outage) * params.deltas.d1,
        prob_guarantee: chi_square_tail_bound(params.dim, params.delta0)?,
    })
}

/// Mean of the aggregated-noise variance at a relay: the exact expectation
/// of `||Lambda A||^2` over the link states, plus the mean-field closed form
/// it is compared against (Gram form of the expectation vector plus a full
/// diagonal power term, which double-counts the diagonal).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NuMean {
    pub exact: f64,
    pub mean_field_formula: f64,
}

/// `E[nu_j]` (or `E[nu_j^{-k}]` when `exclude` is set): term-by-term
/// expectation using `E[tau_m]` for the diagonal and `E[tau_m] E[tau_n]` for
/// the independent cross terms.
pub fn aggregated_noise_variance_mean(
    scheme: &CodingScheme,
    schedule: &KeySchedule,
    net: &NetworkConfig,
    j: usize,
    exclude: Option<usize>,
) -> NuMean {
    let gram = schedule.gram();
    let lambda2 = schedule.lambda() * schedule.lambda();
    let support = relay_support(scheme, net, j, exclude);
    let mut exact = 0.0;
    for &(m, g_m, q_m) in &support {
        exact += q_m * g_m * g_m * gram[(m, m)];
        for &(n, g_n, q_n) in &support {
            if n != m {
                exact += q_m * q_n * g_m * g_n * gram[(m, n)];
            }
        }
    }
    // mean-field form: diagonal power over all assigned clients (no
    // exclusion), plus the full quadratic form of the expectation vector
    let full_support = relay_support(scheme, net, j, None);
    let mut mean_field = 0.0;
    for &(_, g_m, q_m) in &full_support {
        mean_field += lambda2 * q_m * g_m * g_m;
    }
    for &(m, g_m, q_m) in &support {
        for &(n, g_n, q_n) in &support {
            mean_field += (q_m * g_m) * (q_n * g_n) * gram[(m, n)];
        }
    }
    NuMean {
        exact,
        mean_field_formula: mean_field,
    }
}

/// `(client index, g coefficient, link success probability)` for each client
/// assigned to relay j, minus the excluded one.
fn relay_support(
    scheme: &CodingScheme,
    net: &NetworkConfig,
    j: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64, f64)> {
    scheme
        .relay_clients(j)
        .into_iter()
        .filter(|&m| Some(m) != exclude)
        .map(|m| (m, scheme.g()[(j, m)], net.success_client_relay(j, m)))
        .collect()
}

/// One draw of `nu = ||Lambda A||^2` over the given support.
fn sample_nu(support: &[(usize, f64, f64)], gram: &crate::mat::Mat<f64>, uniforms: &[f64]) -> f64 {
    debug_assert_eq!(uniforms.len(), support.len());
    let mut nu = 0.0;
    for (a, &(m, g_m, q_m)) in support.iter().enumerate() {
        if uniforms[a] >= q_m {
            continue;
        }
        nu += g_m * g_m * gram[(m, m)];
        for (b, &(n, g_n, q_n)) in support.iter().enumerate() {
            if b != a && uniforms[b] < q_n {
                nu += g_m * g_n * gram[(m, n)];
            }
        }
    }
    nu
}

/// How the high-probability radius around the variance mean is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusMethod {
    /// Empirical `(1 - delta')` quantile of `|nu - nu_bar|` over `draws`
    /// samples, inflated by 1.05 against finite-sample error.
    McQuantile { draws: u64 },
    /// Martingale Bernstein (Freedman) bound with exact per-link ranges and a
    /// variance proxy; conservative but sample-free.
    BernsteinAnalytic,
}

impl Default for RadiusMethod {
    fn default() -> Self {
        RadiusMethod::McQuantile { draws: 1_000_000 }
    }
}

/// Mean, radius, and confidence of the aggregated-noise variance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarianceStats {
    pub nu_bar: f64,
    pub r: f64,
    pub delta_prime: f64,
}

/// Radius `r` with `P(|nu - nu_bar| >= r) <= delta_prime`.
pub fn bernstein_radius(
    scheme: &CodingScheme,
    schedule: &KeySchedule,
    net: &NetworkConfig,
    j: usize,
    exclude: Option<usize>,
    delta_prime: f64,
    method: RadiusMethod,
) -> Result<VarianceStats, PrivacyError> {
    if !(0.0 < delta_prime && delta_prime < 1.0) {
        return Err(PrivacyError::BadParameter(format!(
            "delta_prime must lie in (0,1), got {delta_prime}"
        )));
    }
    let nu_bar = aggregated_noise_variance_mean(scheme, schedule, net, j, exclude).exact;
    let support = relay_support(scheme, net, j, exclude);
    let gram = schedule.gram();
    let r = match method {
        RadiusMethod::McQuantile { draws } => {
            let chunks = 64u64;
            let per_chunk = draws.div_ceil(chunks);
            let exclude_word = exclude.map_or(u64::MAX, |k| k as u64);
            let mut devs: Vec<Vec<f64>> = run_chunked(chunks, |chunk| {
                let mut rng = stream(&[
                    net.seed(),
                    tag::MC_ORACLE,
                    j as u64,
                    exclude_word,
                    chunk,
                ]);
                let mut out = Vec::with_capacity(per_chunk as usize);
                let mut uniforms = vec![0.0f64; support.len()];
                for _ in 0..per_chunk {
                    for u in uniforms.iter_mut() {
                        *u = rand::Rng::gen::<f64>(&mut rng);
                    }
                    out.push((sample_nu(&support, gram, &uniforms) - nu_bar).abs());
                }
                out
            });
            let mut all: Vec<f64> = devs.drain(..).flatten().collect();
            let n = all.len();
            let idx = (((1.0 - delta_prime) * n as f64).ceil() as usize)
                .clamp(1, n)
                - 1;
            let (_, q, _) = all.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
            1.05 * *q
        }
        RadiusMethod::BernsteinAnalytic => freedman_radius(&support, gram, delta_prime),
    };
    if r > 0.0 && r >= nu_bar {
        return Err(PrivacyError::RadiusExceedsMean {
            j,
            exclude,
            r,
            nu_bar,
        });
    }
    Ok(VarianceStats {
        nu_bar,
        r,
        delta_prime,
    })
}

/// Freedman's martingale Bernstein inequality on the Doob decomposition of
/// `nu` along the link order: each link's increment is bounded by the exact
/// range of its conditional coefficient, and deterministic links contribute
/// nothing.
fn freedman_radius(support: &[(usize, f64, f64)], gram: &crate::mat::Mat<f64>, dp: f64) -> f64 {
    let n = support.len();
    let mut sigma2 = 0.0f64;
    let mut b = 0.0f64;
    for a in 0..n {
        let (m, g_m, q_m) = support[a];
        // w_a(tau_<a) = a_m + 2 sum_{b<a} beta tau_b + 2 sum_{b>a} beta q_b
        let mut base = g_m * g_m * gram[(m, m)];
        let mut max_w = 0.0f64;
        let mut min_w = 0.0f64;
        for (bb, &(nn, g_n, q_n)) in support.iter().enumerate() {
            if bb == a {
                continue;
            }
            let beta = 2.0 * g_m * g_n * gram[(m, nn)];
            if bb < a {
                if beta > 0.0 {
                    max_w += beta;
                } else {
                    min_w += beta;
                }
            } else {
                base += beta * q_n;
            }
        }
        let w_bound = (base + max_w).abs().max((base + min_w).abs());
        let rho = if q_m <= 0.0 || q_m >= 1.0 {
            0.0
        } else {
            q_m.max(1.0 - q_m)
        };
        sigma2 += q_m * (1.0 - q_m) * w_bound * w_bound;
        b = b.max(rho * w_bound);
    }
    let l = (2.0 / dp).ln();
    b * l / 3.0 + ((b * l / 3.0) * (b * l / 3.0) + 2.0 * sigma2 * l).sqrt()
}

/// Relay-level LDP protecting the *participation* of client k in relay j's
/// partial sum.
#[allow(clippy::too_many_arguments)]
pub fn relay_identity_ldp(
    params: &PrivacyParams,
    scheme: &CodingScheme,
    schedule: &KeySchedule,
    net: &NetworkConfig,
    j: usize,
    k: usize,
    delta_prime: f64,
    method: RadiusMethod,
) -> Result<LdpTriple, PrivacyError> {
    params.validate()?;
    let g_jk = scheme.g()[(j, k)];
    if g_jk == 0.0 {
        return Err(PrivacyError::NotAssigned { j, k });
    }
    let p_jk = net.outage_client_relay(j, k);
    let tail = chi_square_tail_bound(params.dim, params.delta0)?;
    let delta = (1.0 - p_jk) * (delta_prime + params.deltas.d2);
    let prob_guarantee = tail * tail;
    if p_jk == 0.0 {
        // printed case split: a link that can never fail contributes eps = 0
        return Ok(LdpTriple {
            epsilon: 0.0,
            delta,
            prob_guarantee,
        });
    }
    let sensitivity = g_jk.abs()
        * (params.zeta + params.lambda)
        * ((params.dim as f64) * (1.0 + params.delta0)).sqrt();
    let epsilon = if params.lambda == 0.0 {
        f64::INFINITY
    } else {
        let stats = bernstein_radius(scheme, schedule, net, j, Some(k), delta_prime, method)?;
        let denom = stats.nu_bar - stats.r;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            eps_base(params.deltas.d2) * sensitivity / denom.sqrt()
        }
    };
    Ok(LdpTriple {
        epsilon,
        delta,
        prob_guarantee,
    })
}

/// Relay-level LDP protecting the *value* of client k's update in relay j's
/// partial sum.
#[allow(clippy::too_many_arguments)]
pub fn relay_value_ldp(
    params: &PrivacyParams,
    scheme: &CodingScheme,
    schedule: &KeySchedule,
    net: &NetworkConfig,
    j: usize,
    k: usize,
    delta_prime: f64,
    method: RadiusMethod,
) -> Result<LdpTriple, PrivacyError> {
    params.validate()?;
    let g_jk = scheme.g()[(j, k)];
    if g_jk == 0.0 {
        return Err(PrivacyError::NotAssigned { j, k });
    }
    let p_jk = net.outage_client_relay(j, k);
    let tail = chi_square_tail_bound(params.dim, params.delta0)?;
    let delta = (1.0 - p_jk) * (delta_prime + params.deltas.d3);
    let prob_guarantee = tail * tail;
    if p_jk == 0.0 {
        return Ok(LdpTriple {
            epsilon: 0.0,
            delta,
            prob_guarantee,
        });
    }
    let epsilon = if params.radius() == 0.0 {
        0.0
    } else if params.lambda == 0.0 {
        f64::INFINITY
    } else {
        let stats = bernstein_radius(scheme, schedule, net, j, None, delta_prime, method)?;
        let denom = stats.nu_bar - stats.r;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            2.0 * eps_base(params.deltas.d3) * g_jk.abs() * params.radius() / denom.sqrt()
        }
    };
    Ok(LdpTriple {
        epsilon,
        delta,
        prob_guarantee,
    })
}

/// Server-level LDP of the decoded aggregate: the other K-1 clients' own
/// Gaussian randomness is what hides client k.
pub struct ServerLdp {
    /// Protecting participation (drop-one neighboring).
    pub participation: LdpTriple,
    /// Protecting the value (substitution neighboring).
    pub value: LdpTriple,
}

pub fn server_ldp(params: &PrivacyParams, k: usize) -> Result<ServerLdp, PrivacyError> {
    params.validate()?;
    let tail = chi_square_tail_bound(params.dim, params.delta0)?;
    let prob_guarantee = tail * tail;
    let crowd = ((params.dim as f64) * (1.0 + params.delta0) / (k as f64 - 1.0)).sqrt();
    let participation = LdpTriple {
        epsilon: if k <= 1 {
            f64::INFINITY
        } else {
            crowd * eps_base(params.deltas.d6)
        },
        delta: params.deltas.d6,
        prob_guarantee,
    };
    let value = LdpTriple {
        epsilon: if k <= 1 {
            f64::INFINITY
        } else {
            2.0 * crowd * eps_base(params.deltas.d7)
        },
        delta: params.deltas.d7,
        prob_guarantee,
    };
    Ok(ServerLdp {
        participation,
        value,
    })
}

/// Which observation point an [`LdpEntry`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Client,
    RelayIdentity,
    RelayValue,
    ServerParticipation,
    ServerValue,
}

impl Layer {
    pub fn layer_name(&self) -> &'static str {
        match self {
            Layer::Client => "client",
            Layer::RelayIdentity | Layer::RelayValue => "relay",
            Layer::ServerParticipation | Layer::ServerValue => "server",
        }
    }
    pub fn label(&self) -> &'static str {
        match self {
            Layer::Client => "masked-update",
            Layer::RelayIdentity => "identity",
            Layer::RelayValue => "value",
            Layer::ServerParticipation => "participation",
            Layer::ServerValue => "value",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpEntry {
    pub layer: Layer,
    pub j: Option<usize>,
    pub k: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub prob_guarantee: f64,
}

/// The full per-link accounting table plus the worst-case leakage.
#[derive(Debug, Clone, Serialize)]
pub struct LdpReport {
    pub entries: Vec<LdpEntry>,
    /// Max over links of the closed-form mutual-information leakage (nats).
    pub leakage_nats: f64,
    /// Links whose variance radius exceeded the mean: their epsilon is an
    /// infinite sentinel and a finite bound needs a larger delta_prime.
    pub warnings: Vec<String>,
}

impl LdpReport {
    /// `layer,label,j,k,epsilon,delta,prob_guarantee` rows, one per entry.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,label,j,k,epsilon,delta,prob_guarantee\n");
        for e in &self.entries {
            let j = e.j.map_or(String::new(), |v| v.to_string());
            let k = e.k.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.layer.layer_name(),
                e.layer.label(),
                j,
                k,
                e.epsilon,
                e.delta,
                e.prob_guarantee
            ));
        }
        out
    }

    /// Worst (largest-epsilon) entry per layer kind, plus leakage.
    pub fn to_json_summary(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            leakage_nats: f64,
            worst: Vec<&'a LdpEntry>,
        }
        let mut worst: Vec<&LdpEntry> = Vec::new();
        for layer in [
            Layer::Client,
            Layer::RelayIdentity,
            Layer::RelayValue,
            Layer::ServerParticipation,
            Layer::ServerValue,
        ] {
            if let Some(e) = self
                .entries
                .iter()
                .filter(|e| e.layer == layer)
                .max_by(|a, b| a.epsilon.partial_cmp(&b.epsilon).unwrap())
            {
                worst.push(e);
            }
        }
        serde_json::to_string_pretty(&Summary {
            leakage_nats: self.leakage_nats,
            worst,
        })
        .expect("summary serializes")
    }
}

/// Runs every bound for every assigned (relay, client) link plus the server
/// level. Deterministic given the network seed.
pub fn full_report(
    params: &PrivacyParams,
    scheme: &CodingScheme,
    schedule: &KeySchedule,
    net: &NetworkConfig,
    delta_prime: f64,
    method: RadiusMethod,
) -> Result<LdpReport, PrivacyError> {
    params.validate()?;
    let k_total = scheme.k();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    let mut leakage: f64 = 0.0;
    let tail = chi_square_tail_bound(params.dim, params.delta0)?;
    for j in 0..k_total {
        for k in scheme.relay_clients(j) {
            let p_outage = net.outage_client_relay(j, k);
            let client = client_ldp(params, p_outage)?;
            entries.push(LdpEntry {
                layer: Layer::Client,
                j: Some(j),
                k: Some(k),
                epsilon: client.epsilon,
                delta: client.delta,
                prob_guarantee: client.prob_guarantee,
            });
            for (layer, delta_target, result) in [
                (
                    Layer::RelayIdentity,
                    params.deltas.d2,
                    relay_identity_ldp(params, scheme, schedule, net, j, k, delta_prime, method),
                ),
                (
                    Layer::RelayValue,
                    params.deltas.d3,
                    relay_value_ldp(params, scheme, schedule, net, j, k, delta_prime, method),
                ),
            ] {
                let triple = match result {
                    Ok(t) => t,
                    Err(PrivacyError::RadiusExceedsMean { r, nu_bar, .. }) => {
                        warnings.push(format!(
                            "relay {j} client {k} ({}): radius {r:.6e} >= mean {nu_bar:.6e}; \
                             epsilon unbounded at delta_prime = {delta_prime}",
                            layer.label()
                        ));
                        LdpTriple {
                            epsilon: f64::INFINITY,
                            delta: (1.0 - p_outage) * (delta_prime + delta_target),
                            prob_guarantee: tail * tail,
                        }
                    }
                    Err(e) => return Err(e),
                };
                entries.push(LdpEntry {
                    layer,
                    j: Some(j),
                    k: Some(k),
                    epsilon: triple.epsilon,
                    delta: triple.delta,
                    prob_guarantee: triple.prob_guarantee,
                });
            }
            leakage = leakage.max(match worst_case_leakage(
                p_outage,
                params.dim,
                params.zeta,
                params.lambda,
            ) {
                Ok(v) => v,
                Err(PrivacyError::InfiniteLeakage) => f64::INFINITY,
                Err(e) => return Err(e),
            });
        }
    }
    let server = server_ldp(params, k_total)?;
    entries.push(LdpEntry {
        layer: Layer::ServerParticipation,
        j: None,
        k: None,
        epsilon: server.participation.epsilon,
        delta: server.participation.delta,
        prob_guarantee: server.participation.prob_guarantee,
    });
    entries.push(LdpEntry {
        layer: Layer::ServerValue,
        j: None,
        k: None,
        epsilon: server.value.epsilon,
        delta: server.value.delta,
        prob_guarantee: server.value.prob_guarantee,
    });
    Ok(LdpReport {
        entries,
        leakage_nats: leakage,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::Arithmetic;

    fn params(zeta: f64, lambda: f64, dim: usize, delta0: f64) -> PrivacyParams {
        PrivacyParams {
            zeta,
            lambda,
            dim,
            delta0,
            deltas: DeltaTargets::default(),
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn chi_tail_limits_and_frozen_value() {
        // delta0 -> 0+ drives the bound to 0
        let tiny = chi_square_tail_bound(100, 1e-9).unwrap();
        assert!(tiny.abs() < 1e-10, "{tiny}");
        // frozen high-precision evaluation of 1 - exp(-50 (1 - ln 2))
        let v = chi_square_tail_bound(100, 1.0).unwrap();
        assert!((v - 0.99999978284207258547).abs() < 1e-13, "{v}");
        assert!(chi_square_tail_bound(10, 0.0).is_err());
        assert!(chi_square_tail_bound(10, -0.5).is_err());
    }

    #[test]
    fn chi_tail_bound_is_valid_by_monte_carlo() {
        // empirical frequency of ||Delta|| <= zeta sqrt(D(1+delta0)) >= bound
        let dim = 1000;
        let delta0 = 0.5;
        let bound = chi_square_tail_bound(dim, delta0).unwrap();
        let threshold2 = (dim as f64) * (1.0 + delta0);
        let n = 100_000u64;
        let hits: u64 = run_chunked(50, |chunk| {
            let mut rng = stream(&[tag::MC_ORACLE, 1111, chunk]);
            let mut h = 0u64;
            for _ in 0..n / 50 {
                let norm2: f64 = (0..dim)
                    .map(|_| {
                        let z: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                        z * z
                    })
                    .sum();
                if norm2 <= threshold2 {
                    h += 1;
                }
            }
            h
        })
        .into_iter()
        .sum();
        let freq = hits as f64 / n as f64;
        assert!(freq >= bound, "frequency {freq} below bound {bound}");
    }

    #[test]
    fn leakage_degeneracies_and_ln2() {
        assert_eq!(worst_case_leakage(1.0, 10, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(worst_case_leakage(0.3, 10, 0.0, 0.5).unwrap(), 0.0);
        // D=2, zeta=lambda, p=0 -> ln 2 nats
        let v = worst_case_leakage(0.0, 2, 1.0, 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(
            worst_case_leakage(0.0, 2, 1.0, 0.0),
            Err(PrivacyError::InfiniteLeakage)
        ));
        // strictly decreasing in lambda
        let mut prev = f64::INFINITY;
        for lam in [0.5, 1.0, 2.0, 4.0] {
            let v = worst_case_leakage(0.2, 8, 1.0, lam).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn client_ldp_closed_form() {
        // R/lambda = 1, delta1 = 0.0125 -> eps = sqrt(2 ln 100)
        let mut p = params(1.0, 1.0, 1, 1e-12);
        p.delta0 = 1e-12; // R ~= zeta = 1... use exact: R = sqrt(1*(1+d0))
        p.lambda = p.radius();
        p.deltas.d1 = 0.0125;
        let out = client_ldp(&p, 0.0).unwrap();
        assert!(
            (out.epsilon - 3.0348542587702927017).abs() < 1e-12,
            "{}",
            out.epsilon
        );
        // p_outage = 1 -> delta_eff = 0
        let out = client_ldp(&p, 1.0).unwrap();
        assert_eq!(out.delta, 0.0);
        // lambda = 0 -> infinite epsilon sentinel
        let mut p0 = params(1.0, 0.0, 4, 0.5);
        p0.deltas.d1 = 0.01;
        assert!(client_ldp(&p0, 0.2).unwrap().epsilon.is_infinite());
        // zeta = 0 -> nothing to leak
        let pz = params(0.0, 0.0, 4, 0.5);
        assert_eq!(client_ldp(&pz, 0.2).unwrap().epsilon, 0.0);
    }

    fn fixture(k: usize, s: usize, lambda: f64, p_success: f64) -> (CodingScheme, KeySchedule, NetworkConfig) {
        let scheme = CodingScheme::build(k, s, Arithmetic::ExactRational).unwrap();
        let schedule = KeySchedule::build(k, lambda, 4).unwrap();
        let net = NetworkConfig::symmetric(k, p_success, 0.7, 2024);
        (scheme, schedule, net)
    }

    #[test]
    fn nu_mean_sure_links_equal_gram_form() {
        // all links surely up: nu is deterministic, exact mean = ||g_row A||^2
        let (scheme, schedule, _) = fixture(5, 2, 1.5, 1.0);
        let net = NetworkConfig::symmetric(5, 1.0, 1.0, 7);
        let j = 2;
        let nu = aggregated_noise_variance_mean(&scheme, &schedule, &net, j, None);
        let mut expected = 0.0;
        for m in scheme.relay_clients(j) {
            for n in scheme.relay_clients(j) {
                expected += scheme.g()[(j, m)] * scheme.g()[(j, n)] * schedule.gram()[(m, n)];
            }
        }
        assert!((nu.exact - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }

    #[test]
    fn nu_mean_single_bernoulli() {
        // a relay with one assigned client: nu_bar = q g^2 lambda^2
        let scheme = CodingScheme::build(3, 0, Arithmetic::ExactRational).unwrap();
        let schedule = KeySchedule::build(3, 2.0, 4).unwrap();
        let net = NetworkConfig::symmetric(3, 0.8, 1.0, 3);
        let nu = aggregated_noise_variance_mean(&scheme, &schedule, &net, 1, None);
        let g = scheme.g()[(1, 1)];
        let expected = 0.8 * g * g * 4.0;
        assert!((nu.exact - expected).abs() < 1e-12);
        // the mean-field form double-counts: q g^2 l^2 + q^2 g^2 l^2
        let mean_field = 0.8 * g * g * 4.0 + 0.64 * g * g * 4.0;
        assert!((nu.mean_field_formula - mean_field).abs() < 1e-12);
    }

    #[test]
    fn nu_mean_matches_monte_carlo() {
        let (scheme, schedule, net) = fixture(10, 7, 0.9, 0.9);
        for j in [0usize, 4] {
            for exclude in [None, Some((j + 1) % 10)] {
                let nu = aggregated_noise_variance_mean(&scheme, &schedule, &net, j, exclude);
                let support = relay_support(&scheme, &net, j, exclude);
                let draws = 200_000u64;
                let sums: Vec<(f64, f64)> = run_chunked(40, |chunk| {
                    let mut rng =
                        stream(&[net.seed(), tag::MC_ORACLE, 55, j as u64, chunk]);
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    let mut uniforms = vec![0.0f64; support.len()];
                    for _ in 0..draws / 40 {
                        for u in uniforms.iter_mut() {
                            *u = rand::Rng::gen::<f64>(&mut rng);
                        }
                        let v = sample_nu(&support, schedule.gram(), &uniforms);
                        s += v;
                        s2 += v * v;
                    }
                    (s, s2)
                });
                let total: f64 = sums.iter().map(|(s, _)| s).sum();
                let total2: f64 = sums.iter().map(|(_, s2)| s2).sum();
                let mean = total / draws as f64;
                let var = total2 / draws as f64 - mean * mean;
                let se = (var / draws as f64).sqrt();
                assert!(
                    (mean - nu.exact).abs() <= 3.0 * se + 1e-12,
                    "relay {j} exclude {exclude:?}: MC {mean} vs exact {} (se {se})",
                    nu.exact
                );
            }
        }
    }

    #[test]
    fn radius_zero_for_deterministic_links() {
        let (scheme, schedule, _) = fixture(5, 2, 1.0, 1.0);
        let net = NetworkConfig::symmetric(5, 1.0, 1.0, 4);
        for method in [RadiusMethod::McQuantile { draws: 10_000 }, RadiusMethod::BernsteinAnalytic] {
            let stats =
                bernstein_radius(&scheme, &schedule, &net, 0, None, 0.05, method).unwrap();
            assert_eq!(stats.r, 0.0, "{method:?}");
        }
    }

    #[test]
    fn radius_single_bernoulli_enumeration() {
        // one random link: |nu - nu_bar| takes two values; quantiles known exactly
        let scheme = CodingScheme::build(3, 0, Arithmetic::ExactRational).unwrap();
        let schedule = KeySchedule::build(3, 1.0, 4).unwrap();
        let q = 0.8;
        let net = NetworkConfig::symmetric(3, q, 1.0, 6);
        let g = scheme.g()[(0, 0)];
        let nu_up = g * g * schedule.gram()[(0, 0)];
        let nu_bar = q * nu_up;
        // X = |nu - nu_bar|: (1-q) nu_up w.p. q, q nu_up w.p. 1-q
        // For delta' = 0.05 < min(q, 1-q): quantile = max value = q nu_up... but
        // P(X >= q nu_up) = 0.2 > 0.05 only if q nu_up is the larger dev; here
        // (1-q) nu_up = 0.2 nu_up < q nu_up = 0.8 nu_up, so the 0.95-quantile is
        // the larger of the two = 0.8 nu_up.
        let exact_quantile = q * nu_up;
        let stats = bernstein_radius(
            &scheme,
            &schedule,
            &net,
            0,
            None,
            0.05,
            RadiusMethod::McQuantile { draws: 200_000 },
        );
        // r = 1.05 * quantile might exceed nu_bar -> RadiusExceedsMean is the
        // correct verdict here since quantile (0.8 nu_up) >= nu_bar (0.8 nu_up)
        match stats {
            Err(PrivacyError::RadiusExceedsMean { r, nu_bar: nb, .. }) => {
                assert!((r - 1.05 * exact_quantile).abs() < 1e-9, "r {r}");
                assert!((nb - nu_bar).abs() < 1e-12);
            }
            other => panic!("expected RadiusExceedsMean, got {other:?}"),
        }
        // with delta' = 0.25 > 1-q = 0.2: the quantile drops to the smaller dev
        let stats = bernstein_radius(
            &scheme,
            &schedule,
            &net,
            0,
            None,
            0.25,
            RadiusMethod::McQuantile { draws: 200_000 },
        )
        .unwrap();
        assert!(
            (stats.r - 1.05 * (1.0 - q) * nu_up).abs() < 1e-9,
            "r {}",
            stats.r
        );
    }

    /// The radius contract is about the tail probability; it is checkable
    /// even when r >= nu_bar (where the epsilon formula has no finite value).
    fn radius_even_if_unusable(res: Result<VarianceStats, PrivacyError>) -> (f64, f64) {
        match res {
            Ok(s) => (s.nu_bar, s.r),
            Err(PrivacyError::RadiusExceedsMean { r, nu_bar, .. }) => (nu_bar, r),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }

    #[test]
    fn radius_contract_holds_on_holdout() {
        let (scheme, schedule, net) = fixture(10, 7, 1.0, 0.9);
        let j = 3;
        for method in [
            RadiusMethod::McQuantile { draws: 300_000 },
            RadiusMethod::BernsteinAnalytic,
        ] {
            let delta_prime = 0.05;
            let (nu_bar, r) = radius_even_if_unusable(bernstein_radius(
                &scheme,
                &schedule,
                &net,
                j,
                None,
                delta_prime,
                method,
            ));
            // fresh hold-out batch with a different stream tag
            let support = relay_support(&scheme, &net, j, None);
            let n = 200_000u64;
            let violations: u64 = run_chunked(40, |chunk| {
                let mut rng = stream(&[9898, tag::MC_ORACLE, j as u64, chunk]);
                let mut v = 0u64;
                let mut uniforms = vec![0.0f64; support.len()];
                for _ in 0..n / 40 {
                    for u in uniforms.iter_mut() {
                        *u = rand::Rng::gen::<f64>(&mut rng);
                    }
                    let nu = sample_nu(&support, schedule.gram(), &uniforms);
                    if (nu - nu_bar).abs() >= r {
                        v += 1;
                    }
                }
                v
            })
            .into_iter()
            .sum();
            let rate = violations as f64 / n as f64;
            assert!(
                rate <= delta_prime + 0.003,
                "{method:?}: violation rate {rate} > {delta_prime}"
            );
        }
    }

    #[test]
    fn relay_ldp_formula_and_ratio() {
        // reliable enough links that the radius stays below the mean
        let (scheme, schedule, net) = fixture(3, 1, 10.0, 0.99);
        let mut p = params(1.0, 10.0, 100, 0.5);
        p.deltas.d2 = 0.01;
        p.deltas.d3 = 0.01;
        let dp = 0.2;
        let method = RadiusMethod::McQuantile { draws: 100_000 };
        let (j, k) = (0usize, 0usize);
        let e2 = relay_identity_ldp(&p, &scheme, &schedule, &net, j, k, dp, method).unwrap();
        let e3 = relay_value_ldp(&p, &scheme, &schedule, &net, j, k, dp, method).unwrap();
        assert!(e2.epsilon.is_finite() && e2.epsilon > 0.0);
        assert!(e3.epsilon.is_finite() && e3.epsilon > 0.0);
        // cross-check the ratio algebraically for equal delta targets
        let nu_k = bernstein_radius(&scheme, &schedule, &net, j, Some(k), dp, method).unwrap();
        let nu = bernstein_radius(&scheme, &schedule, &net, j, None, dp, method).unwrap();
        let expected_ratio = 2.0 * p.radius() / ((p.zeta + p.lambda) * ((p.dim as f64) * 1.5).sqrt())
            * ((nu_k.nu_bar - nu_k.r) / (nu.nu_bar - nu.r)).sqrt();
        let ratio = e3.epsilon / e2.epsilon;
        assert!(
            (ratio - expected_ratio).abs() < 1e-10,
            "{ratio} vs {expected_ratio}"
        );
        // delta_eff = (1 - p_jk)(delta' + delta_target)
        let q = net.success_client_relay(j, k);
        assert!((e2.delta - q * (dp + 0.01)).abs() < 1e-15);
        // probability guarantee is the squared tail bound
        let tail = chi_square_tail_bound(100, 0.5).unwrap();
        assert!((e2.prob_guarantee - tail * tail).abs() < 1e-15);
    }

    #[test]
    fn relay_ldp_epsilon_decreases_in_lambda() {
        let scheme = CodingScheme::build(3, 1, Arithmetic::ExactRational).unwrap();
        let net = NetworkConfig::symmetric(3, 0.99, 0.7, 99);
        let method = RadiusMethod::McQuantile { draws: 50_000 };
        let mut prev2 = f64::INFINITY;
        let mut prev3 = f64::INFINITY;
        for lambda in [0.5, 1.0, 4.0, 16.0] {
            let schedule = KeySchedule::build(3, lambda, 4).unwrap();
            let p = params(1.0, lambda, 50, 0.5);
            let e2 = relay_identity_ldp(&p, &scheme, &schedule, &net, 0, 0, 0.2, method).unwrap();
            let e3 = relay_value_ldp(&p, &scheme, &schedule, &net, 0, 0, 0.2, method).unwrap();
            assert!(e2.epsilon < prev2, "eps2 {} at lambda {lambda}", e2.epsilon);
            assert!(e3.epsilon < prev3, "eps3 {} at lambda {lambda}", e3.epsilon);
            prev2 = e2.epsilon;
            prev3 = e3.epsilon;
        }
    }

    #[test]
    fn relay_ldp_rejects_unassigned_pair() {
        let (scheme, schedule, net) = fixture(5, 1, 1.0, 0.9);
        // client 3 is not in relay 0's window {0, 1}
        let p = params(1.0, 1.0, 10, 0.5);
        assert!(matches!(
            relay_identity_ldp(
                &p, &scheme, &schedule, &net, 0, 3, 0.05,
                RadiusMethod::BernsteinAnalytic
            ),
            Err(PrivacyError::NotAssigned { j: 0, k: 3 })
        ));
    }

    #[test]
    fn relay_value_zeta_zero_gives_zero_epsilon() {
        let (scheme, schedule, net) = fixture(3, 1, 1.0, 0.9);
        let p = params(0.0, 1.0, 10, 0.5);
        let e3 = relay_value_ldp(
            &p, &scheme, &schedule, &net, 0, 0, 0.05,
            RadiusMethod::BernsteinAnalytic,
        )
        .unwrap();
        assert_eq!(e3.epsilon, 0.0);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn server_ldp_closed_form_and_ratio() {
        let mut p = params(1.0, 0.0, 100, 0.5);
        p.deltas.d6 = 0.01;
        p.deltas.d7 = 0.01;
        let out = server_ldp(&p, 10).unwrap();
        // frozen: sqrt(150/9) * sqrt(2 ln 125)
        assert!(
            (out.participation.epsilon - 12.686362411795196601).abs() < 1e-12,
            "{}",
            out.participation.epsilon
        );
        // equal deltas -> eps7 = 2 eps6
        assert!((out.value.epsilon - 2.0 * out.participation.epsilon).abs() < 1e-12);
        // anonymity grows with the cohort
        let mut prev = f64::INFINITY;
        for k in [2, 5, 10, 100, 1000] {
            let e = server_ldp(&p, k).unwrap().participation.epsilon;
            assert!(e < prev);
            prev = e;
        }
        // K = 1: no crowd to hide in
        assert!(server_ldp(&p, 1).unwrap().participation.epsilon.is_infinite());
    }

    #[test]
    fn full_report_shape_and_symmetry() {
        let (scheme, schedule, net) = fixture(10, 7, 1.0, 0.9);
        let p = params(1.0, 1.0, 64, 0.5);
        let report = full_report(
            &p,
            &scheme,
            &schedule,
            &net,
            0.05,
            RadiusMethod::BernsteinAnalytic,
        )
        .unwrap();
        // 8 clients per relay row x 10 relays = 80 entries per relay-level kind
        let count = |layer: Layer| report.entries.iter().filter(|e| e.layer == layer).count();
        assert_eq!(count(Layer::Client), 80);
        assert_eq!(count(Layer::RelayIdentity), 80);
        assert_eq!(count(Layer::RelayValue), 80);
        assert_eq!(count(Layer::ServerParticipation), 1);
        assert_eq!(count(Layer::ServerValue), 1);
        // symmetric network: all client-level entries identical
        let eps: Vec<f64> = report
            .entries
            .iter()
            .filter(|e| e.layer == Layer::Client)
            .map(|e| e.epsilon)
            .collect();
        assert!(eps.iter().all(|&e| (e - eps[0]).abs() < 1e-12));
        assert!(report.leakage_nats.is_finite());
        let csv = report.to_csv();
        assert!(csv.starts_with("layer,label,j,k,epsilon,delta,prob_guarantee\n"));
        assert_eq!(csv.lines().count(), 1 + 80 * 3 + 2);
    }

    #[test]
    fn full_report_lambda_zero_gives_infinite_sentinels() {
        let scheme = CodingScheme::build(3, 1, Arithmetic::ExactRational).unwrap();
        let schedule = KeySchedule::build(3, 0.0, 4).unwrap();
        let net = NetworkConfig::symmetric(3, 0.9, 0.7, 12);
        let p = params(1.0, 0.0, 16, 0.5);
        let report = full_report(
            &p,
            &scheme,
            &schedule,
            &net,
            0.05,
            RadiusMethod::BernsteinAnalytic,
        )
        .unwrap();
        for e in report
            .entries
            .iter()
            .filter(|e| matches!(e.layer, Layer::Client | Layer::RelayIdentity | Layer::RelayValue))
        {
            assert!(e.epsilon.is_infinite(), "{e:?}");
        }
        assert!(report.leakage_nats.is_infinite());
        // CSV serializes the sentinel as "inf"
        assert!(report.to_csv().contains(",inf,"));
    }

    #[test]
    fn dp_audit_relay_level_partial_sums() {
        // neighboring partial-sum worlds (with vs without client k), projected
        // to one coordinate; the empirical interval test must not refute the
        // claimed (epsilon, delta) at this resolution
        let (scheme, schedule, _) = fixture(3, 1, 10.0, 0.9);
        let net = NetworkConfig::symmetric(3, 0.9, 1.0, 313);
        let p = {
            let mut p = params(1.0, 10.0, 4, 0.5);
            p.deltas.d2 = 0.01;
            p
        };
        let dp = 0.2; // above the single-excluded-link failure mass 0.1
        let (j, k) = (0usize, 0usize);
        let out = relay_identity_ldp(
            &p, &scheme, &schedule, &net, j, k, dp,
            RadiusMethod::McQuantile { draws: 100_000 },
        )
        .unwrap();
        assert!(out.epsilon.is_finite());
        // union-bound the probability-guarantee failure into delta
        let delta_total = out.delta + (1.0 - out.prob_guarantee);

        let support = relay_support(&scheme, &net, j, None);
        let n = 400_000u64;
        let thresholds: Vec<f64> = (-30..=30).map(|t| t as f64 * 2.0).collect();
        let counts: Vec<(Vec<u64>, Vec<u64>)> = run_chunked(50, |chunk| {
            let mut rng = stream(&[tag::MC_ORACLE, 0xA4D1, chunk]);
            let mut with_k = vec![0u64; thresholds.len()];
            let mut without_k = vec![0u64; thresholds.len()];
            for _ in 0..n / 50 {
                // one coordinate of each key: keys = A z with fresh z
                let m = schedule.sources();
                let z: Vec<f64> = (0..m)
                    .map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal))
                    .collect();
                let key = |kk: usize| -> f64 {
                    schedule
                        .a()
                        .row(kk)
                        .iter()
                        .zip(&z)
                        .map(|(&w, &zv)| w * zv)
                        .sum()
                };
                let mut s_with = 0.0f64;
                let mut s_without = 0.0f64;
                for &(mm, g_m, q_m) in &support {
                    if rand::Rng::gen::<f64>(&mut rng) >= q_m {
                        continue;
                    }
                    let delta_m: f64 =
                        rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
                            * p.zeta;
                    let contrib = g_m * (delta_m + key(mm));
                    s_with += contrib;
                    if mm != k {
                        s_without += contrib;
                    }
                }
                for (i, &t) in thresholds.iter().enumerate() {
                    if s_with <= t {
                        with_k[i] += 1;
                    }
                    if s_without <= t {
                        without_k[i] += 1;
                    }
                }
            }
            (with_k, without_k)
        });
        let mut cw = vec![0u64; thresholds.len()];
        let mut cwo = vec![0u64; thresholds.len()];
        for (a, b) in counts {
            for i in 0..thresholds.len() {
                cw[i] += a[i];
                cwo[i] += b[i];
            }
        }
        let total = (n / 50 * 50) as f64;
        let margin = 4.0 / total.sqrt();
        let e_eps = out.epsilon.exp();
        for i in 0..thresholds.len() {
            let (pw, pwo) = (cw[i] as f64 / total, cwo[i] as f64 / total);
            // claimed direction: P(S^{-k} in S) <= e^eps P(S in S) + delta
            assert!(
                pwo <= e_eps * pw + delta_total + margin,
                "lower interval refuted at t={}",
                thresholds[i]
            );
            let (gw, gwo) = (1.0 - pw, 1.0 - pwo);
            assert!(
                gwo <= e_eps * gw + delta_total + margin,
                "upper interval refuted at t={}",
                thresholds[i]
            );
        }
    }

    #[test]
    fn dp_audit_client_level_gaussian() {
        // D = 1: masked update Y = u + N(0, lambda^2); worst-case pair at
        // distance 2R. Empirical interval test must not refute (eps, delta).
        let lambda = 1.0;
        let delta0 = 1.0;
        let p = params(1.0, lambda, 1, delta0);
        let out = client_ldp(&p, 0.0).unwrap();
        let (eps, delta) = (out.epsilon, p.deltas.d1);
        let r = p.radius();
        let (u, u_prime) = (r, -r);
        let n = 1_000_000u64;
        let thresholds: Vec<f64> = (-40..=40).map(|t| t as f64 * 0.25).collect();
        let counts: Vec<(Vec<u64>, Vec<u64>)> = run_chunked(50, |chunk| {
            let mut rng = stream(&[tag::MC_ORACLE, 4242, chunk]);
            let mut c1 = vec![0u64; thresholds.len()];
            let mut c2 = vec![0u64; thresholds.len()];
            for _ in 0..n / 50 {
                let z: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                let y1 = u + lambda * z;
                let z2: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                let y2 = u_prime + lambda * z2;
                for (i, &t) in thresholds.iter().enumerate() {
                    if y1 <= t {
                        c1[i] += 1;
                    }
                    if y2 <= t {
                        c2[i] += 1;
                    }
                }
            }
            (c1, c2)
        });
        let mut p1 = vec![0u64; thresholds.len()];
        let mut p2 = vec![0u64; thresholds.len()];
        for (c1, c2) in counts {
            for i in 0..thresholds.len() {
                p1[i] += c1[i];
                p2[i] += c2[i];
            }
        }
        let margin = 4.0 / (n as f64).sqrt();
        for i in 0..thresholds.len() {
            let (f1, f2) = (p1[i] as f64 / n as f64, p2[i] as f64 / n as f64);
            // both sided-interval families: (-inf, t] and (t, inf)
            assert!(
                f1 <= eps.exp() * f2 + delta + margin,
                "lower interval violated at t={}",
                thresholds[i]
            );
            let (g1, g2) = (1.0 - f1, 1.0 - f2);
            assert!(
                g2 <= eps.exp() * g1 + delta + margin,
                "upper interval violated at t={}",
                thresholds[i]
            );
        }
    }
}
