//! Zero-sum Gaussian secret-key schedules.
//!
//! Each round, every client adds a fresh mask `N_k` to its update. The masks
//! are linear images of shared randomness through a generator matrix `A` with
//! zero column sums, so they always cancel in a full aggregate, and with row
//! norms all equal to `lambda`, so each mask is marginally `N(0, lambda^2 I)`
//! (the distribution that minimizes worst-case leakage under the per-key
//! power constraint). The privacy accountant consumes `A` itself; any matrix
//! with those two properties is interchangeable here.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat::Mat;

#[derive(Debug, Error)]
pub enum KeysError {
    #[error("key schedule needs at least 2 clients, got {0}")]
    DegenerateSchedule(usize),
    #[error("key schedule serialization: {0}")]
    Serialization(String),
}

/// Generator matrix plus the scale and model dimension it serves.
#[derive(Debug, Clone)]
pub struct KeySchedule {
    k: usize,
    lambda: f64,
    dim: usize,
    /// K x m, m = K(K-1)/2 shared randomness sources.
    a: Mat<f64>,
    /// Cached Gram matrix A * A^T (K x K).
    gram: Mat<f64>,
}

/// The K secret keys of one round.
#[derive(Debug, Clone)]
pub struct KeyRealization {
    pub keys: Vec<Vec<f64>>,
    pub round: u64,
}

impl KeySchedule {
    /// Signed pairwise-incidence construction: column (i, j), i < j, has
    /// `+lambda/sqrt(K-1)` at row i and `-lambda/sqrt(K-1)` at row j. Column
    /// sums are zero and every row norm is exactly `lambda`.
    pub fn build(k: usize, lambda: f64, dim: usize) -> Result<Self, KeysError> {
        if k < 2 {
            return Err(KeysError::DegenerateSchedule(k));
        }
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        assert!(dim >= 1, "model dimension must be positive");
        let m = k * (k - 1) / 2;
        let scale = lambda / ((k - 1) as f64).sqrt();
        let mut a = Mat::zeros(k, m);
        let mut col = 0;
        for i in 0..k {
            for j in (i + 1)..k {
                a[(i, col)] = scale;
                a[(j, col)] = -scale;
                col += 1;
            }
        }
        let gram = gram_of(&a);
        Ok(KeySchedule {
            k,
            lambda,
            dim,
            a,
            gram,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sources(&self) -> usize {
        self.a.cols()
    }
    pub fn a(&self) -> &Mat<f64> {
        &self.a
    }
    /// `A * A^T`; entry (k, l) is the per-coordinate covariance of keys k and l.
    pub fn gram(&self) -> &Mat<f64> {
        &self.gram
    }

    /// Draws one round of keys: `keys[k] = (row k of A) . Z` with Z a fresh
    /// matrix of i.i.d. standard Gaussians from the caller's stream.
    pub fn sample_keys<R: Rng>(&self, rng: &mut R, round: u64) -> KeyRealization {
        let m = self.a.cols();
        let d = self.dim;
        // shared sources, sampled source-major so the layout is stream-stable
        let mut z = vec![0.0f64; m * d];
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let keys = (0..self.k)
            .map(|kk| {
                let row = self.a.row(kk);
                let mut key = vec![0.0f64; d];
                for (c, &w) in row.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src = &z[c * d..(c + 1) * d];
                    for (kd, &zd) in key.iter_mut().zip(src) {
                        *kd += w * zd;
                    }
                }
                key
            })
            .collect();
        KeyRealization { keys, round }
    }

    pub fn to_json(&self) -> String {
        let doc = ScheduleJson {
            k: self.k,
            lambda: self.lambda,
            d: self.dim,
            a: self.a.data().to_vec(),
        };
        serde_json::to_string_pretty(&doc).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KeysError> {
        let doc: ScheduleJson =
            serde_json::from_str(text).map_err(|e| KeysError::Serialization(e.to_string()))?;
        let k = doc.k;
        if k < 2 {
            return Err(KeysError::DegenerateSchedule(k));
        }
        let m = k * (k - 1) / 2;
        if doc.a.len() != k * m {
            return Err(KeysError::Serialization(format!(
                "A has {} entries, expected {}",
                doc.a.len(),
                k * m
            )));
        }
        let a = Mat::from_rows(doc.a.chunks(m).map(|r| r.to_vec()).collect());
        let gram = gram_of(&a);
        Ok(KeySchedule {
            k,
            lambda: doc.lambda,
            dim: doc.d,
            a,
            gram,
        })
    }
}

fn gram_of(a: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.rows(), a.rows(), |r, c| {
        a.row(r).iter().zip(a.row(c)).map(|(&x, &y)| x * y).sum()
    })
}

#[derive(Serialize, Deserialize)]
struct ScheduleJson {
    #[serde(rename = "K")]
    k: usize,
    lambda: f64,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "A")]
    a: Vec<f64>,
}
