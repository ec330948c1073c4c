//! One global round of each aggregation scheme.
//!
//! The secure coded round (`run_round_h_seccogc`) is all-or-nothing: clients
//! mask their updates, every relay forwards a partial sum only when it heard
//! from *all* of its assigned clients, and the server decodes with a
//! combination row matched to the surviving relays. A successful decode
//! recovers the exact full-participation mean (the masks cancel through
//! `C*G = 1` and the zero-sum key construction); anything less triggers a
//! full retransmission with fresh links and fresh keys.
//!
//! The three benchmarks: plain unreliable HFL (partial participation, no
//! noise), private HFL (zero-sum noise that only cancels under full
//! participation), and the ideal lossless aggregate.

use thiserror::Error;

use crate::codes::CodingScheme;
use crate::keys::KeySchedule;
use crate::netsim::{LinkRealization, NetworkConfig};
use crate::rng::{stream, tag};

#[derive(Debug, Error)]
pub enum RoundError {
    #[error("no usable combination row after {attempts} attempts")]
    MaxAttemptsExceeded {
        attempts: u32,
        log: Vec<AttemptRecord>,
    },
    #[error("no client delivered end-to-end this round")]
    EmptyRound,
}

/// What happened in one retransmission attempt.
#[derive(Debug, Clone)]
pub struct AttemptRecord {
    pub links: LinkRealization,
    /// `relay_complete[j]`: relay j assembled a complete partial sum.
    pub relay_complete: Vec<bool>,
    /// `delivered[j]`: complete AND the relay->server link was up.
    pub delivered: Vec<bool>,
    pub chosen_row: Option<usize>,
}

/// A successful secure round.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub attempts: u32,
    pub chosen_row: usize,
    /// `(1/K) sum_j c_j S_j`, which equals the mean of the deltas.
    pub global_update: Vec<f64>,
    pub log: Vec<AttemptRecord>,
}

/// Outcome of a benchmark round under partial participation.
#[derive(Debug, Clone)]
pub struct PartialRoundOutcome {
    /// Mean over delivered clients (masked, for the private variant).
    pub update: Vec<f64>,
    /// `delivered[k]`: client k's update reached the server end-to-end.
    pub delivered: Vec<bool>,
    /// l2 norm of the uncancelled key mass in `update` (0 for the plain variant).
    pub residual_noise_norm: f64,
}

/// Arithmetic mean of the deltas; the reference every scheme is judged against.
pub fn run_round_ideal(deltas: &[Vec<f64>]) -> Vec<f64> {
    let k = deltas.len();
    let d = deltas[0].len();
    let mut mean = vec![0.0f64; d];
    for delta in deltas {
        for (m, v) in mean.iter_mut().zip(delta) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= k as f64;
    }
    mean
}

/// Executes one H-SecCoGC round, retrying with fresh links and keys until the
/// server can decode or the attempt budget runs out.
pub fn run_round_h_seccogc(
    scheme: &CodingScheme,
    schedule: &KeySchedule,
    net: &NetworkConfig,
    deltas: &[Vec<f64>],
    round: u64,
    max_attempts: u32,
) -> Result<RoundOutcome, RoundError> {
    let k = scheme.k();
    assert_eq!(deltas.len(), k, "one delta per client");
    assert_eq!(schedule.k(), k, "key schedule size");
    assert_eq!(net.k(), k, "network size");
    assert!(max_attempts >= 1);
    let d = deltas[0].len();
    assert_eq!(schedule.dim(), d, "key dimension");

    let mut log = Vec::new();
    for attempt in 1..=max_attempts {
        // fresh masks each attempt keeps every attempt's leakage profile identical
        let mut key_rng = stream(&[net.seed(), tag::ROUND_KEYS, round, attempt as u64]);
        let keys = schedule.sample_keys(&mut key_rng, round);
        let links = net.sample_links(round, attempt);

        let masked: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                deltas[c]
                    .iter()
                    .zip(&keys.keys[c])
                    .map(|(dv, nv)| dv + nv)
                    .collect()
            })
            .collect();

        // relay j forms S_j only if all of W_j arrived this attempt
        let mut partial_sums: Vec<Option<Vec<f64>>> = vec![None; k];
        let mut relay_complete = vec![false; k];
        for j in 0..k {
            let assigned = scheme.relay_clients(j);
            let complete = assigned.iter().all(|&c| links.tau_client_relay[(j, c)]);
            relay_complete[j] = complete;
            if complete {
                let mut s = vec![0.0f64; d];
                for &c in &assigned {
                    let w = scheme.g()[(j, c)];
                    for (sv, yv) in s.iter_mut().zip(&masked[c]) {
                        *sv += w * yv;
                    }
                }
                partial_sums[j] = Some(s);
            }
        }

        let delivered: Vec<bool> = (0..k)
            .map(|j| relay_complete[j] && links.tau_relay_server[j])
            .collect();
        let chosen_row = scheme.select_combination_row(&delivered);
        log.push(AttemptRecord {
            links,
            relay_complete,
            delivered: delivered.clone(),
            chosen_row,
        });

        if let Some(row) = chosen_row {
            let mut update = vec![0.0f64; d];
            for (j, delivered_j) in delivered.iter().enumerate() {
                let c = scheme.c()[(row, j)];
                if c == 0.0 {
                    continue;
                }
                debug_assert!(delivered_j, "row selection covers every down relay");
                let s = partial_sums[j].as_ref().expect("complete partial sum");
                for (uv, sv) in update.iter_mut().zip(s) {
                    *uv += c * sv;
                }
            }
            for uv in update.iter_mut() {
                *uv /= k as f64;
            }
            return Ok(RoundOutcome {
                attempts: attempt,
                chosen_row: row,
                global_update: update,
                log,
            });
        }
    }
    Err(RoundError::MaxAttemptsExceeded {
        attempts: max_attempts,
        log,
    })
}

/// Plain relay-assisted HFL under unreliable links: each client reports to
/// one relay, relays aggregate whatever arrived, the server averages over
/// delivered clients. No retries, no noise.
pub fn run_round_hfl_unreliable(
    net: &NetworkConfig,
    deltas: &[Vec<f64>],
    cluster_assignment: &[usize],
    round: u64,
) -> Result<PartialRoundOutcome, RoundError> {
    partial_participation_round(net, deltas, cluster_assignment, round, None)
}

/// Private relay-assisted HFL: like [`run_round_hfl_unreliable`] but every
/// client adds its zero-sum key. Under partial participation the surviving
/// key mass does not cancel and is carried into the update.
pub fn run_round_private_hfl(
    net: &NetworkConfig,
    deltas: &[Vec<f64>],
    schedule: &KeySchedule,
    cluster_assignment: &[usize],
    round: u64,
) -> Result<PartialRoundOutcome, RoundError> {
    partial_participation_round(net, deltas, cluster_assignment, round, Some(schedule))
}

fn partial_participation_round(
    net: &NetworkConfig,
    deltas: &[Vec<f64>],
    cluster_assignment: &[usize],
    round: u64,
    schedule: Option<&KeySchedule>,
) -> Result<PartialRoundOutcome, RoundError> {
    let k = deltas.len();
    assert_eq!(cluster_assignment.len(), k, "one relay per client");
    assert_eq!(net.k(), k, "network size");
    let d = deltas[0].len();

    let keys = schedule.map(|sched| {
        assert_eq!(sched.dim(), d, "key dimension");
        let mut rng = stream(&[net.seed(), tag::ROUND_KEYS, round, 1]);
        sched.sample_keys(&mut rng, round)
    });

    let links = net.sample_links(round, 1);
    let delivered: Vec<bool> = (0..k)
        .map(|c| {
            let relay = cluster_assignment[c];
            links.tau_client_relay[(relay, c)] && links.tau_relay_server[relay]
        })
        .collect();
    let n_delivered = delivered.iter().filter(|&&b| b).count();
    if n_delivered == 0 {
        return Err(RoundError::EmptyRound);
    }

    let mut update = vec![0.0f64; d];
    let mut residual = vec![0.0f64; d];
    for c in 0..k {
        if !delivered[c] {
            continue;
        }
        for (i, uv) in update.iter_mut().enumerate() {
            *uv += deltas[c][i];
        }
        if let Some(kr) = &keys {
            for (i, (uv, rv)) in update.iter_mut().zip(residual.iter_mut()).enumerate() {
                *uv += kr.keys[c][i];
                *rv += kr.keys[c][i];
            }
        }
    }
    let scale = 1.0 / n_delivered as f64;
    for uv in update.iter_mut() {
        *uv *= scale;
    }
    let residual_noise_norm =
        scale * residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(PartialRoundOutcome {
        update,
        delivered,
        residual_noise_norm,
    })
}

/// Unit-norm pseudo-random local updates, one per client, keyed by
/// `(seed, round, client)`. Simulation stand-ins for real training deltas.
pub fn unit_deltas(seed: u64, round: u64, k: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            let mut rng = stream(&[seed, 0x6465_6c74, round, c as u64]); // "delt"
            let mut v: Vec<f64> = (0..dim)
                .map(|_| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            v
        })
        .collect()
}

/// Relative error of `update` against the ideal mean, `|u - m| / (1 + |m|)`.
pub fn relative_update_error(update: &[f64], deltas: &[Vec<f64>]) -> f64 {
    let mean = run_round_ideal(deltas);
    let diff: f64 = update
        .iter()
        .zip(&mean)
        .map(|(u, m)| (u - m) * (u - m))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / (1.0 + norm)
}
