//! Desk-scale federated training harness.
//!
//! Clients run local SGD from the shared global model; a round's deltas are
//! combined by whichever aggregation scheme is under test, and the loop logs
//! loss/accuracy per round. Deltas depend only on `(seed, round, client)`,
//! never on the scheme, so schemes can be compared on identical trajectories.

pub mod data;
pub mod model;

use serde::Serialize;
use thiserror::Error;

pub use data::{dirichlet_partition, Dataset, DatasetPartition};
pub use model::{ModelArch, ModelSpec};

use crate::codes::CodingScheme;
use crate::keys::KeySchedule;
use crate::netsim::NetworkConfig;
use crate::protocol::{
    run_round_h_seccogc, run_round_hfl_unreliable, run_round_ideal, run_round_private_hfl,
    RoundError,
};
use crate::rng::{stream, tag};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("class {class:?} has too few samples for the partition draw")]
    TooFewSamples { class: Option<usize> },
    #[error("non-finite loss at round {round}, client {client}")]
    NonFiniteLoss { round: u64, client: usize },
    #[error("secure round {round} exceeded the attempt budget; network too lossy")]
    MaxAttemptsExceeded { round: u64, partial: Vec<RoundRow> },
    #[error("bad dataset: {0}")]
    BadData(String),
    #[error("bad training config: {0}")]
    BadConfig(String),
}

/// Which aggregation runs at the end of each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ideal,
    HSecCoGc,
    HflUnreliable,
    PrivateHfl,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Ideal => "ideal",
            Scheme::HSecCoGc => "h-seccogc",
            Scheme::HflUnreliable => "hfl-unreliable",
            Scheme::PrivateHfl => "private-hfl",
        }
    }

    pub const ALL: [Scheme; 4] = [
        Scheme::Ideal,
        Scheme::HSecCoGc,
        Scheme::HflUnreliable,
        Scheme::PrivateHfl,
    ];
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(Scheme::Ideal),
            "h-seccogc" => Ok(Scheme::HSecCoGc),
            "hfl-unreliable" => Ok(Scheme::HflUnreliable),
            "private-hfl" => Ok(Scheme::PrivateHfl),
            other => Err(format!(
                "unknown scheme '{other}' (expected ideal | h-seccogc | hfl-unreliable | private-hfl)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingConfig {
    /// Global rounds T.
    pub rounds: usize,
    /// Local iterations I per round.
    pub local_iters: usize,
    /// Learning rate eta.
    pub learning_rate: f64,
    /// Gradient accumulation weights, one per local iteration.
    pub accumulation: Vec<f64>,
    /// Minibatch size n_p.
    pub batch_size: usize,
    pub model: ModelSpec,
    /// Evaluate loss/accuracy every this many rounds (always on the last).
    pub eval_every: usize,
    /// Retry budget for the secure round.
    pub max_attempts: u32,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            rounds: 300,
            local_iters: 1,
            learning_rate: 0.02,
            accumulation: vec![1.0],
            batch_size: 64,
            model: ModelSpec::Logistic,
            eval_every: 1,
            max_attempts: 50,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.accumulation.len() != self.local_iters {
            return Err(TrainError::BadConfig(format!(
                "accumulation has {} entries, expected local_iters = {}",
                self.accumulation.len(),
                self.local_iters
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::BadConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.rounds == 0 || self.batch_size == 0 || self.local_iters == 0 {
            return Err(TrainError::BadConfig(
                "rounds, batch_size, and local_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One CSV row of the training log.
#[derive(Debug, Clone, Serialize)]
pub struct RoundRow {
    pub round: u64,
    pub scheme: &'static str,
    pub lambda: f64,
    /// Train loss; NaN when the round was not evaluated.
    pub loss: f64,
    /// Test accuracy; NaN when the round was not evaluated.
    pub acc: f64,
    pub attempts: u32,
    pub delivered_frac: f64,
    pub residual_noise_norm: f64,
}

/// Everything `train` needs for one scheme run.
pub struct TrainSetup<'a> {
    pub train_data: &'a Dataset,
    pub test_data: &'a Dataset,
    pub partition: &'a DatasetPartition,
    pub scheme: Scheme,
    pub coding: &'a CodingScheme,
    pub keys: &'a KeySchedule,
    pub net: &'a NetworkConfig,
    pub config: &'a TrainingConfig,
}

#[derive(Debug, Clone)]
pub struct TrainLog {
    pub rows: Vec<RoundRow>,
    /// Global model after each round (index 0 = after round 1).
    pub trajectory: Vec<Vec<f64>>,
    pub final_model: Vec<f64>,
    pub final_loss: f64,
    pub final_acc: f64,
}

impl TrainLog {
    pub const CSV_HEADER: &'static str =
        "round,scheme,lambda,loss,acc,attempts,delivered_frac,residual_noise_norm";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let fmt = |v: f64| {
                if v.is_nan() {
                    String::new()
                } else {
                    v.to_string()
                }
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.round,
                r.scheme,
                r.lambda,
                fmt(r.loss),
                fmt(r.acc),
                r.attempts,
                r.delivered_frac,
                r.residual_noise_norm
            ));
        }
        out
    }
}

/// Runs local SGD for one client and returns its model delta.
///
/// Iteration i draws its own minibatch from `(seed, round, client, i)` and
/// steps `theta -= eta * a_i * grad`; the returned delta is the sum of the
/// weighted steps.
pub fn local_update(
    arch: &ModelArch,
    params: &[f64],
    dataset: &Dataset,
    client_indices: &[usize],
    config: &TrainingConfig,
    round: u64,
    client: usize,
) -> Result<Vec<f64>, TrainError> {
    let mut theta = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for iter in 0..config.local_iters {
        let batch = batch_indices(
            config.seed,
            round,
            client,
            iter as u64,
            client_indices,
            config.batch_size,
        );
        let loss = arch.loss_grad(&theta, dataset, &batch, &mut grad);
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { round, client });
        }
        let step = config.learning_rate * config.accumulation[iter];
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step * g;
        }
    }
    for (t, p) in theta.iter_mut().zip(params) {
        *t -= p;
    }
    Ok(theta)
}

/// Deterministic without-replacement minibatch.
fn batch_indices(
    seed: u64,
    round: u64,
    client: usize,
    iter: u64,
    pool: &[usize],
    batch_size: usize,
) -> Vec<usize> {
    if batch_size >= pool.len() {
        return pool.to_vec();
    }
    let mut rng = stream(&[seed, tag::BATCH, round, client as u64, iter]);
    let mut scratch: Vec<usize> = (0..pool.len()).collect();
    let mut out = Vec::with_capacity(batch_size);
    for i in 0..batch_size {
        let j = i + rand::Rng::gen_range(&mut rng, 0..pool.len() - i);
        scratch.swap(i, j);
        out.push(pool[scratch[i]]);
    }
    out
}

/// Runs the full training loop for one scheme.
pub fn train(setup: &TrainSetup) -> Result<TrainLog, TrainError> {
    let cfg = setup.config;
    cfg.validate()?;
    let k = setup.partition.client_indices.len();
    assert_eq!(setup.coding.k(), k, "coding scheme size");
    assert_eq!(setup.net.k(), k, "network size");
    let arch = ModelArch::new(cfg.model, setup.train_data);
    assert_eq!(
        setup.keys.dim(),
        arch.param_count(),
        "key dimension must match the model dimension"
    );
    let cluster: Vec<usize> = (0..k).collect();
    let lambda = setup.keys.lambda();

    let mut model = arch.init_params(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.rounds);
    let mut trajectory = Vec::with_capacity(cfg.rounds);

    for round in 1..=cfg.rounds as u64 {
        let mut deltas = Vec::with_capacity(k);
        for client in 0..k {
            deltas.push(local_update(
                &arch,
                &model,
                setup.train_data,
                &setup.partition.client_indices[client],
                cfg,
                round,
                client,
            )?);
        }

        let (update, attempts, delivered_frac, residual) = match setup.scheme {
            Scheme::Ideal => (Some(run_round_ideal(&deltas)), 1, 1.0, 0.0),
            Scheme::HSecCoGc => {
                match run_round_h_seccogc(
                    setup.coding,
                    setup.keys,
                    setup.net,
                    &deltas,
                    round,
                    cfg.max_attempts,
                ) {
                    Ok(out) => (Some(out.global_update), out.attempts, 1.0, 0.0),
                    Err(RoundError::MaxAttemptsExceeded { .. }) => {
                        return Err(TrainError::MaxAttemptsExceeded {
                            round,
                            partial: rows,
                        })
                    }
                    Err(RoundError::EmptyRound) => unreachable!("secure round never skips"),
                }
            }
            Scheme::HflUnreliable => {
                match run_round_hfl_unreliable(setup.net, &deltas, &cluster, round) {
                    Ok(out) => {
                        let frac = fraction(&out.delivered);
                        (Some(out.update), 1, frac, 0.0)
                    }
                    Err(RoundError::EmptyRound) => (None, 1, 0.0, 0.0),
                    Err(e) => unreachable!("unexpected round error: {e}"),
                }
            }
            Scheme::PrivateHfl => {
                match run_round_private_hfl(setup.net, &deltas, setup.keys, &cluster, round) {
                    Ok(out) => {
                        let frac = fraction(&out.delivered);
                        (Some(out.update), 1, frac, out.residual_noise_norm)
                    }
                    Err(RoundError::EmptyRound) => (None, 1, 0.0, 0.0),
                    Err(e) => unreachable!("unexpected round error: {e}"),
                }
            }
        };

        if let Some(u) = update {
            for (m, uv) in model.iter_mut().zip(&u) {
                *m += uv;
            }
        }
        trajectory.push(model.clone());

        let evaluate_now =
            (round as usize).is_multiple_of(cfg.eval_every) || round as usize == cfg.rounds;
        let (loss, acc) = if evaluate_now {
            let (train_loss, _) = arch.evaluate(&model, setup.train_data);
            let (_, test_acc) = arch.evaluate(&model, setup.test_data);
            (train_loss, test_acc)
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(RoundRow {
            round,
            scheme: setup.scheme.name(),
            lambda,
            loss,
            acc,
            attempts,
            delivered_frac,
            residual_noise_norm: residual,
        });
    }

    let (final_loss, final_acc) = {
        let last = rows.last().expect("at least one round");
        (last.loss, last.acc)
    };
    Ok(TrainLog {
        rows,
        trajectory,
        final_model: model,
        final_loss,
        final_acc,
    })
}

fn fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::Arithmetic;

    fn small_world(
        k: usize,
        lambda: f64,
        success: (f64, f64),
    ) -> (Dataset, Dataset, DatasetPartition, CodingScheme, KeySchedule, NetworkConfig) {
        let (train, test) = Dataset::synthetic_split(600, 200, 6, 3, 2.0, 1.0, 40);
        let partition = dirichlet_partition(&train, k, 0.5, 7).unwrap();
        let coding = CodingScheme::build(k, k.saturating_sub(2), Arithmetic::ExactRational).unwrap();
        let arch = ModelArch::new(ModelSpec::Logistic, &train);
        let keys = KeySchedule::build(k, lambda, arch.param_count()).unwrap();
        let net = NetworkConfig::symmetric(k, success.0, success.1, 2025);
        (train, test, partition, coding, keys, net)
    }

    #[test]
    fn zero_learning_rate_gives_zero_delta() {
        let train = Dataset::synthetic(100, 4, 3, 2.0, 1.0, 1);
        let arch = ModelArch::new(ModelSpec::Logistic, &train);
        let cfg = TrainingConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let params = arch.init_params(1);
        let idx: Vec<usize> = (0..50).collect();
        let delta = local_update(&arch, &params, &train, &idx, &cfg, 1, 0).unwrap();
        assert!(delta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_iteration_is_one_gradient_step() {
        let train = Dataset::synthetic(100, 4, 3, 2.0, 1.0, 2);
        let arch = ModelArch::new(ModelSpec::Logistic, &train);
        let cfg = TrainingConfig {
            learning_rate: 0.1,
            batch_size: 32,
            ..Default::default()
        };
        let params: Vec<f64> = (0..arch.param_count()).map(|i| 0.01 * i as f64).collect();
        let idx: Vec<usize> = (0..100).collect();
        let delta = local_update(&arch, &params, &train, &idx, &cfg, 3, 1).unwrap();
        // reference: recompute the same batch and gradient by hand
        let batch = batch_indices(cfg.seed, 3, 1, 0, &idx, 32);
        let mut grad = vec![0.0; params.len()];
        arch.loss_grad(&params, &train, &batch, &mut grad);
        for (d, g) in delta.iter().zip(&grad) {
            assert!((d + 0.1 * g).abs() < 1e-14);
        }
    }

    #[test]
    fn two_iterations_match_unrolled_reference() {
        let train = Dataset::synthetic(100, 4, 3, 2.0, 1.0, 2);
        let arch = ModelArch::new(ModelSpec::Logistic, &train);
        let cfg = TrainingConfig {
            learning_rate: 0.05,
            local_iters: 2,
            accumulation: vec![1.0, 1.0],
            batch_size: 16,
            ..Default::default()
        };
        let params = vec![0.02; arch.param_count()];
        let idx: Vec<usize> = (0..100).collect();
        let delta = local_update(&arch, &params, &train, &idx, &cfg, 9, 2).unwrap();
        // unrolled two-step reference
        let mut theta = params.clone();
        let mut grad = vec![0.0; params.len()];
        for iter in 0..2u64 {
            let batch = batch_indices(cfg.seed, 9, 2, iter, &idx, 16);
            arch.loss_grad(&theta, &train, &batch, &mut grad);
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= 0.05 * g;
            }
        }
        for ((d, t), p) in delta.iter().zip(&theta).zip(&params) {
            assert!((d - (t - p)).abs() < 1e-14);
        }
    }

    #[test]
    fn central_training_separates_synthetic_data() {
        // single "client" owning everything approximates centralized SGD
        let (train, test, _, _, _, _) = small_world(3, 0.0, (1.0, 1.0));
        let arch = ModelArch::new(ModelSpec::Logistic, &train);
        let cfg = TrainingConfig {
            rounds: 200,
            learning_rate: 0.1,
            batch_size: 64,
            ..Default::default()
        };
        let idx: Vec<usize> = (0..train.len()).collect();
        let mut model = arch.init_params(cfg.seed);
        for round in 1..=200u64 {
            let delta = local_update(&arch, &model, &train, &idx, &cfg, round, 0).unwrap();
            for (m, d) in model.iter_mut().zip(&delta) {
                *m += d;
            }
        }
        let (_, acc) = arch.evaluate(&model, &test);
        assert!(acc >= 0.95, "central accuracy {acc}");
    }

    #[test]
    fn trajectories_ideal_equals_h_seccogc() {
        let (train_d, test, partition, coding, keys, net) = small_world(5, 0.7, (0.9, 0.7));
        let cfg = TrainingConfig {
            rounds: 30,
            ..Default::default()
        };
        let mk = |scheme| TrainSetup {
            train_data: &train_d,
            test_data: &test,
            partition: &partition,
            scheme,
            coding: &coding,
            keys: &keys,
            net: &net,
            config: &cfg,
        };
        let ideal = train_log_or_panic(&mk(Scheme::Ideal));
        let secure = train_log_or_panic(&mk(Scheme::HSecCoGc));
        for (a, b) in ideal.trajectory.iter().zip(&secure.trajectory) {
            let num: f64 = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let den: f64 = 1.0 + a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(num / den < 1e-6, "trajectory diverged: {}", num / den);
        }
    }

    fn train_log_or_panic(setup: &TrainSetup) -> TrainLog {
        train(setup).expect("training completes")
    }

    #[test]
    fn empty_rounds_skip_and_log() {
        // relay -> server always down: unreliable HFL skips every round
        let (train_d, test, partition, coding, keys, net) = small_world(4, 0.0, (1.0, 0.0));
        let cfg = TrainingConfig {
            rounds: 5,
            ..Default::default()
        };
        let setup = TrainSetup {
            train_data: &train_d,
            test_data: &test,
            partition: &partition,
            scheme: Scheme::HflUnreliable,
            coding: &coding,
            keys: &keys,
            net: &net,
            config: &cfg,
        };
        let log = train(&setup).unwrap();
        assert!(log.rows.iter().all(|r| r.delivered_frac == 0.0));
        // model never moved
        assert!(log.final_model.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn secure_round_budget_exhaustion_aborts() {
        let (train_d, test, partition, coding, keys, net) = small_world(4, 0.5, (1.0, 0.0));
        let cfg = TrainingConfig {
            rounds: 5,
            max_attempts: 3,
            ..Default::default()
        };
        let setup = TrainSetup {
            train_data: &train_d,
            test_data: &test,
            partition: &partition,
            scheme: Scheme::HSecCoGc,
            coding: &coding,
            keys: &keys,
            net: &net,
            config: &cfg,
        };
        match train(&setup) {
            Err(TrainError::MaxAttemptsExceeded { round: 1, .. }) => {}
            other => panic!("expected MaxAttemptsExceeded, got {other:?}"),
        }
    }

    #[test]
    fn mlp_trains_above_chance() {
        let (train_d, test, _, _, _, _) = small_world(3, 0.0, (1.0, 1.0));
        let arch = ModelArch::new(ModelSpec::Mlp { hidden: 16 }, &train_d);
        let cfg = TrainingConfig {
            rounds: 150,
            learning_rate: 0.1,
            batch_size: 64,
            model: ModelSpec::Mlp { hidden: 16 },
            seed: 4,
            ..Default::default()
        };
        let idx: Vec<usize> = (0..train_d.len()).collect();
        let mut model = arch.init_params(cfg.seed);
        for round in 1..=cfg.rounds as u64 {
            let delta = local_update(&arch, &model, &train_d, &idx, &cfg, round, 0).unwrap();
            for (m, d) in model.iter_mut().zip(&delta) {
                *m += d;
            }
        }
        let (_, acc) = arch.evaluate(&model, &test);
        assert!(acc >= 0.90, "MLP accuracy {acc}");
    }

    #[test]
    fn training_log_is_deterministic() {
        let (train_d, test, partition, coding, keys, net) = small_world(5, 0.3, (0.9, 0.7));
        let cfg = TrainingConfig {
            rounds: 10,
            ..Default::default()
        };
        let setup = TrainSetup {
            train_data: &train_d,
            test_data: &test,
            partition: &partition,
            scheme: Scheme::PrivateHfl,
            coding: &coding,
            keys: &keys,
            net: &net,
            config: &cfg,
        };
        let a = train(&setup).unwrap();
        let b = train(&setup).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.final_model, b.final_model);
    }
}
