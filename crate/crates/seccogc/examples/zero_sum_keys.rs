//! Sample zero-sum secret keys and check their statistics.
//!
//! ```bash
//! cargo run -p seccogc --example zero_sum_keys
//! ```

use seccogc::keys::KeySchedule;
use seccogc::rng::{stream, tag};

fn main() {
    let (k, lambda, dim) = (5, 1.0, 1000);
    let schedule = KeySchedule::build(k, lambda, dim).unwrap();
    println!(
        "K={k}, lambda={lambda}, D={dim}: {} shared randomness sources",
        schedule.sources()
    );

    // one round of keys: they cancel exactly
    let mut rng = stream(&[7, tag::ROUND_KEYS, 0]);
    let real = schedule.sample_keys(&mut rng, 0);
    let worst = (0..dim)
        .map(|d| real.keys.iter().map(|key| key[d]).sum::<f64>().abs())
        .fold(0.0f64, f64::max)
        ;
    println!("zero-sum residual across {dim} coordinates: {worst:e}");

    // empirical marginal variance and pairwise covariance over many rounds
    let rounds = 2000u64;
    let mut var = 0.0;
    let mut cov = 0.0;
    for r in 0..rounds {
        let mut rng = stream(&[7, tag::ROUND_KEYS, r]);
        let real = schedule.sample_keys(&mut rng, r);
        var += real.keys[0].iter().map(|v| v * v).sum::<f64>();
        cov += real.keys[0]
            .iter()
            .zip(&real.keys[1])
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    let n = (rounds * dim as u64) as f64;
    println!(
        "empirical Var[N_0] = {:.4} (expect {:.4}), Cov[N_0, N_1] = {:.4} (expect {:.4})",
        var / n,
        lambda * lambda,
        cov / n,
        -lambda * lambda / (k as f64 - 1.0)
    );
}
