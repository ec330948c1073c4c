//! Datasets and non-IID partitioning.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::rng::{stream, tag};

use super::TrainError;

/// A labeled dataset with dense features.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Train/test splits of the same mixture: identical class means, disjoint
    /// sample noise.
    pub fn synthetic_split(
        n_train: usize,
        n_test: usize,
        dim: usize,
        classes: usize,
        mean_scale: f64,
        noise_std: f64,
        seed: u64,
    ) -> (Dataset, Dataset) {
        let all = Dataset::synthetic(n_train + n_test, dim, classes, mean_scale, noise_std, seed);
        let test = Dataset {
            features: all.features[n_train..].to_vec(),
            labels: all.labels[n_train..].to_vec(),
            classes,
            dim,
        };
        let train = Dataset {
            features: all.features[..n_train].to_vec(),
            labels: all.labels[..n_train].to_vec(),
            classes,
            dim,
        };
        (train, test)
    }

    /// Gaussian-mixture classification task: one spherical cluster per class,
    /// means drawn once from `N(0, mean_scale^2 I)`, equal class counts in
    /// round-robin order. Deterministic per seed.
    pub fn synthetic(
        n: usize,
        dim: usize,
        classes: usize,
        mean_scale: f64,
        noise_std: f64,
        seed: u64,
    ) -> Dataset {
        let mut means = Vec::with_capacity(classes);
        for c in 0..classes {
            let mut rng = stream(&[seed, tag::DATASET, c as u64]);
            let mu: Vec<f64> = (0..dim)
                .map(|_| mean_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            means.push(mu);
        }
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % classes;
            let mut rng = stream(&[seed, tag::DATASET, 0xfeed, i as u64]);
            let x: Vec<f64> = means[y]
                .iter()
                .map(|&m| m + noise_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            features.push(x);
            labels.push(y);
        }
        Dataset {
            features,
            labels,
            classes,
            dim,
        }
    }

    /// Parses `label,feature,...` lines. Lines starting with `#` are skipped.
    pub fn from_csv(text: &str) -> Result<Dataset, TrainError> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut dim = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let label: usize = parts
                .next()
                .unwrap()
                .trim()
                .parse()
                .map_err(|_| TrainError::BadData(format!("line {}: bad label", lineno + 1)))?;
            let feats: Result<Vec<f64>, _> = parts.map(|p| p.trim().parse::<f64>()).collect();
            let feats = feats
                .map_err(|_| TrainError::BadData(format!("line {}: bad feature", lineno + 1)))?;
            match dim {
                None => dim = Some(feats.len()),
                Some(d) if d != feats.len() => {
                    return Err(TrainError::BadData(format!(
                        "line {}: {} features, expected {d}",
                        lineno + 1,
                        feats.len()
                    )))
                }
                _ => {}
            }
            labels.push(label);
            features.push(feats);
        }
        if features.is_empty() {
            return Err(TrainError::BadData("empty dataset".into()));
        }
        let classes = labels.iter().max().unwrap() + 1;
        Ok(Dataset {
            dim: dim.unwrap(),
            features,
            labels,
            classes,
        })
    }
}

/// Which samples each client holds.
#[derive(Debug, Clone)]
pub struct DatasetPartition {
    pub client_indices: Vec<Vec<usize>>,
    pub gamma: f64,
}

impl DatasetPartition {
    /// Per-client class histogram, as fractions.
    pub fn class_histogram(&self, dataset: &Dataset, client: usize) -> Vec<f64> {
        let mut hist = vec![0.0; dataset.classes];
        for &i in &self.client_indices[client] {
            hist[dataset.labels[i]] += 1.0;
        }
        let n = self.client_indices[client].len().max(1) as f64;
        for h in hist.iter_mut() {
            *h /= n;
        }
        hist
    }
}

/// Splits a dataset across `k` clients with per-class proportions drawn from
/// `Dirichlet(gamma * 1_k)`, then rebalances so every client holds exactly
/// `floor(n / k)` samples (overflow reassigned round-robin; the remainder of
/// the dataset is dropped).
pub fn dirichlet_partition(
    dataset: &Dataset,
    k: usize,
    gamma: f64,
    seed: u64,
) -> Result<DatasetPartition, TrainError> {
    assert!(k >= 1);
    if gamma <= 0.0 {
        return Err(TrainError::BadData(format!(
            "dirichlet concentration must be positive, got {gamma}"
        )));
    }
    let usable = (dataset.len() / k) * k;
    let target = usable / k;
    if target == 0 {
        return Err(TrainError::TooFewSamples { class: None });
    }

    // per-class index pools over the usable prefix
    let mut class_pools: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes];
    for i in 0..usable {
        class_pools[dataset.labels[i]].push(i);
    }
    if let Some(empty) = class_pools.iter().position(|p| p.is_empty()) {
        return Err(TrainError::TooFewSamples {
            class: Some(empty),
        });
    }

    let mut clients: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, pool) in class_pools.iter().enumerate() {
        let mut rng = stream(&[seed, tag::PARTITION, c as u64]);
        let gamma_dist = Gamma::new(gamma, 1.0).expect("valid shape");
        let mut weights: Vec<f64> = (0..k).map(|_| gamma_dist.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            // astronomically unlikely underflow; fall back to uniform
            weights = vec![1.0; k];
        }
        let counts = largest_remainder(&weights, pool.len());
        let mut cursor = 0;
        for (client, &cnt) in counts.iter().enumerate() {
            clients[client].extend_from_slice(&pool[cursor..cursor + cnt]);
            cursor += cnt;
        }
    }

    // rebalance: collect overflow from clients above target (popping from the
    // back), hand it out round-robin to clients below target
    let mut pool: Vec<usize> = Vec::new();
    for c in clients.iter_mut() {
        while c.len() > target {
            pool.push(c.pop().unwrap());
        }
    }
    pool.reverse(); // donors processed in client order; keep that order stable
    let mut pi = 0;
    while pi < pool.len() {
        for c in clients.iter_mut() {
            if pi >= pool.len() {
                break;
            }
            if c.len() < target {
                c.push(pool[pi]);
                pi += 1;
            }
        }
    }
    debug_assert!(clients.iter().all(|c| c.len() == target));
    Ok(DatasetPartition {
        client_indices: clients,
        gamma,
    })
}

/// Apportions `total` items proportionally to `weights` (largest remainder).
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / wsum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}
