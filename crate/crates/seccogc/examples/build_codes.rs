//! Construct (K, s)-cyclic gradient codes, verify their invariants, and show
//! row selection under relay outages.
//!
//! ```bash
//! cargo run -p seccogc --example build_codes
//! ```

use seccogc::codes::{Arithmetic, CodingScheme};

fn main() {
    // the small reference scenario: 3 relays tolerating any 1 straggler
    let scheme = CodingScheme::build(3, 1, Arithmetic::ExactRational).unwrap();
    println!(
        "(K=3, s=1): f = {} combination rows, report: {}",
        scheme.f(),
        scheme.verify()
    );
    for j in 0..3 {
        println!("  relay {j} serves clients {:?}", scheme.relay_clients(j));
    }

    // relay 1 down: the server picks the row whose zeros cover {1}
    let row = scheme
        .select_combination_row(&[true, false, true])
        .expect("one straggler is tolerable");
    println!(
        "  relay 1 down -> row {row} (zero pattern {:?}), coefficients {:?}",
        scheme.row_pattern(row),
        scheme.c().row(row)
    );
    // two relays down exceeds s = 1
    assert_eq!(scheme.select_combination_row(&[true, false, false]), None);
    println!("  two relays down -> no usable row, round must retry");

    // the benchmark-scale code
    let big = CodingScheme::build(10, 7, Arithmetic::ExactRational).unwrap();
    println!(
        "\n(K=10, s=7): f = {} rows, each relay serves {} clients, report: {}",
        big.f(),
        big.relay_clients(0).len(),
        big.verify()
    );

    // schemes serialize to JSON (exact rationals as "num/den" strings)
    let json = scheme.to_json();
    let back = CodingScheme::from_json(&json).unwrap();
    assert!(back.verify().is_ok());
    println!("\nJSON round-trip OK ({} bytes); first lines:", json.len());
    for line in json.lines().take(6) {
        println!("  {line}");
    }
}
