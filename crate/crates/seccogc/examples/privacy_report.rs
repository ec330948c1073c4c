//! Evaluate the per-layer local differential privacy bounds for a small
//! secure aggregation deployment.
//!
//! ```bash
//! cargo run -p seccogc --example privacy_report
//! ```

use seccogc::codes::{Arithmetic, CodingScheme};
use seccogc::keys::KeySchedule;
use seccogc::netsim::NetworkConfig;
use seccogc::privacy::{
    chi_square_tail_bound, full_report, worst_case_leakage, DeltaTargets, PrivacyParams,
    RadiusMethod,
};

fn main() {
    let (k, s, dim) = (5, 2, 100);
    let lambda = 2.0;
    let scheme = CodingScheme::build(k, s, Arithmetic::ExactRational).unwrap();
    let schedule = KeySchedule::build(k, lambda, dim).unwrap();
    // very reliable uplinks keep the variance radius below its mean
    let net = NetworkConfig::symmetric(k, 0.99, 0.7, 11);
    let params = PrivacyParams {
        zeta: 1.0,
        lambda,
        dim,
        delta0: 0.5,
        deltas: DeltaTargets::default(),
    };

    println!(
        "norm bound R = {:.4}, holds w.p. >= {:.6}",
        params.radius(),
        chi_square_tail_bound(dim, params.delta0).unwrap()
    );
    println!(
        "worst-case leakage of one masked upload: {:.4} nats",
        worst_case_leakage(0.01, dim, params.zeta, lambda).unwrap()
    );

    let report = full_report(
        &params,
        &scheme,
        &schedule,
        &net,
        0.25,
        RadiusMethod::McQuantile { draws: 200_000 },
    )
    .unwrap();

    println!("\n{}", report.to_csv());
    println!("summary:\n{}", report.to_json_summary());
    for w in &report.warnings {
        println!("warning: {w}");
    }
}
