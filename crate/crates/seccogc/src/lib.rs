//! Deterministic simulator and analysis library for coding-enforced secure
//! aggregation in hierarchical federated learning (H-SecCoGC).
//!
//! Clients mask their local model updates with zero-sum Gaussian secret keys
//! and upload them through relays over unreliable links. Cyclic gradient codes
//! give the relays redundant client assignments, so the server can recombine
//! any large-enough set of complete partial sums into the *exact*
//! full-participation aggregate; the masks cancel in the same step. The crate
//! covers the whole pipeline:
//!
//! - [`codes`]: (K, s)-cyclic gradient codes, `C * G = 1` exactly.
//! - [`keys`]: zero-sum Gaussian secret-key schedules.
//! - [`netsim`]: Bernoulli link outages with counter-based determinism.
//! - [`protocol`]: the secure aggregation round plus three benchmark schemes.
//! - [`privacy`]: per-layer local differential privacy accounting and
//!   worst-case leakage.
//! - [`fltrain`]: a desk-scale federated training harness.
//! - [`config`]: one experiment config shared by every entry point.
//!
//! Everything is seeded and reproducible: rerunning any computation with the
//! same configuration yields byte-identical artifacts. See the crate examples
//! for a runnable tour of each capability.
//!
//! ```
//! use seccogc::codes::{Arithmetic, CodingScheme};
//! use seccogc::keys::KeySchedule;
//! use seccogc::netsim::NetworkConfig;
//! use seccogc::protocol::{relative_update_error, run_round_h_seccogc, unit_deltas};
//!
//! let scheme = CodingScheme::build(5, 2, Arithmetic::ExactRational)?;
//! let keys = KeySchedule::build(5, 0.5, 16)?;
//! let net = NetworkConfig::symmetric(5, 0.9, 0.7, 42);
//! let deltas = unit_deltas(42, 0, 5, 16);
//!
//! let round = run_round_h_seccogc(&scheme, &keys, &net, &deltas, 0, 50)?;
//! assert!(relative_update_error(&round.global_update, &deltas) <= 1e-8);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod codes;
pub mod config;
pub mod fltrain;
pub mod keys;
pub mod mat;
pub mod netsim;
pub mod privacy;
pub mod protocol;
pub mod rng;

pub use codes::{Arithmetic, CodingScheme};
pub use keys::{KeyRealization, KeySchedule};
pub use netsim::{LinkRealization, NetworkConfig};
pub use protocol::{RoundError, RoundOutcome};
