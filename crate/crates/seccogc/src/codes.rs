//! Construction and validation of (K, s)-cyclic gradient codes.
//!
//! A scheme pairs a coefficient matrix `G` (row j = relay j's weights over its
//! assigned clients, supported on the cyclic window {j, .., j+s} mod K) with a
//! combination matrix `C` whose rows neutralize every possible s-subset of
//! failed relays while recombining to the all-ones vector: `C * G = 1`. That
//! identity is what lets the server recover the exact full-participation
//! aggregate (and cancel the zero-sum secret keys) from any K-s complete
//! partial sums.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat::{solve_overdetermined, solve_square, Field, Mat};
use crate::rng::mix64;

/// How many deterministic coefficient re-draws to try before giving up.
const MAX_CONSTRUCTION_ATTEMPTS: u64 = 32;

/// Entrywise tolerance for `C * G = 1` in float mode.
pub const FLOAT_PRODUCT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    /// Exact `BigRational` construction; `C * G = 1` holds with no tolerance.
    ExactRational,
    /// `f64` construction for larger K; product holds within [`FLOAT_PRODUCT_TOL`].
    Float,
}

#[derive(Debug, Error)]
pub enum CodesError {
    #[error("s must satisfy 0 <= s <= K-1, got K={k}, s={s}")]
    InvalidParams { k: usize, s: usize },
    #[error("no feasible coefficient assignment for K={k}, s={s} after {attempts} attempts")]
    InfeasibleCode { k: usize, s: usize, attempts: u64 },
    #[error("scheme serialization: {0}")]
    Serialization(String),
}

/// Matrices in the arithmetic used to build them.
#[derive(Debug, Clone)]
enum SchemeMatrices {
    Rational { g: Mat<BigRational>, c: Mat<BigRational> },
    Float { g: Mat<f64>, c: Mat<f64> },
}

/// A constructed (K, s)-cyclic gradient code.
#[derive(Debug, Clone)]
pub struct CodingScheme {
    k: usize,
    s: usize,
    matrices: SchemeMatrices,
    /// f64 views of G and C for the protocol hot path.
    g_f64: Mat<f64>,
    c_f64: Mat<f64>,
    /// Zero pattern of each combination row, sorted ascending.
    patterns: Vec<Vec<usize>>,
    /// s-subset of down relays -> index of the row zeroed exactly there.
    straggler_index: HashMap<Vec<usize>, usize>,
}

impl CodingScheme {
    /// Builds the scheme for `k` relays tolerating any `s` stragglers.
    ///
    /// The coefficients are chosen deterministically from (k, s): an integer
    /// parity matrix drawn from a fixed counter-based stream, re-drawn (still
    /// deterministically) if any straggler pattern turns out infeasible.
    pub fn build(k: usize, s: usize, arithmetic: Arithmetic) -> Result<Self, CodesError> {
        if k == 0 || s >= k {
            return Err(CodesError::InvalidParams { k, s });
        }
        for attempt in 0..MAX_CONSTRUCTION_ATTEMPTS {
            let built = match arithmetic {
                Arithmetic::ExactRational => try_build::<BigRational>(k, s, attempt)
                    .map(|(g, c)| SchemeMatrices::Rational { g, c }),
                Arithmetic::Float => {
                    try_build::<f64>(k, s, attempt).map(|(g, c)| SchemeMatrices::Float { g, c })
                }
            };
            if let Some(matrices) = built {
                return Ok(Self::assemble(k, s, matrices));
            }
        }
        Err(CodesError::InfeasibleCode {
            k,
            s,
            attempts: MAX_CONSTRUCTION_ATTEMPTS,
        })
    }

    fn assemble(k: usize, s: usize, matrices: SchemeMatrices) -> Self {
        let (g_f64, c_f64) = match &matrices {
            SchemeMatrices::Rational { g, c } => (g.map(Field::to_f64), c.map(Field::to_f64)),
            SchemeMatrices::Float { g, c } => (g.clone(), c.clone()),
        };
        let patterns: Vec<Vec<usize>> = subsets(k, s);
        let straggler_index = patterns
            .iter()
            .enumerate()
            .map(|(row, p)| (p.clone(), row))
            .collect();
        CodingScheme {
            k,
            s,
            matrices,
            g_f64,
            c_f64,
            patterns,
            straggler_index,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Number of combination rows, `binomial(K, s)`.
    pub fn f(&self) -> usize {
        self.patterns.len()
    }

    pub fn arithmetic(&self) -> Arithmetic {
        match self.matrices {
            SchemeMatrices::Rational { .. } => Arithmetic::ExactRational,
            SchemeMatrices::Float { .. } => Arithmetic::Float,
        }
    }

    /// Coefficient matrix as f64, row j = relay j's client weights.
    pub fn g(&self) -> &Mat<f64> {
        &self.g_f64
    }

    /// Combination matrix as f64.
    pub fn c(&self) -> &Mat<f64> {
        &self.c_f64
    }

    /// The exact matrices, when the scheme was built in rational mode.
    pub fn rational_matrices(&self) -> Option<(&Mat<BigRational>, &Mat<BigRational>)> {
        match &self.matrices {
            SchemeMatrices::Rational { g, c } => Some((g, c)),
            SchemeMatrices::Float { .. } => None,
        }
    }

    /// Clients assigned to relay j: the nonzero support of row j of G.
    pub fn relay_clients(&self, j: usize) -> Vec<usize> {
        (0..self.k).filter(|&c| self.g_f64[(j, c)] != 0.0).collect()
    }

    /// Zero pattern (down-relay set) of a combination row.
    pub fn row_pattern(&self, row: usize) -> &[usize] {
        &self.patterns[row]
    }

    /// Picks a combination row usable under the given relay availability:
    /// a row whose zero pattern covers every down relay. Smallest row index
    /// wins; `None` means no usable row (more than s relays down, or no
    /// matching pattern) and the round must be retried.
    pub fn select_combination_row(&self, relay_up: &[bool]) -> Option<usize> {
        assert_eq!(relay_up.len(), self.k, "relay_up length");
        let down: Vec<usize> = (0..self.k).filter(|&j| !relay_up[j]).collect();
        if down.len() > self.s {
            return None;
        }
        if down.len() == self.s {
            return self.straggler_index.get(&down).copied();
        }
        self.patterns
            .iter()
            .position(|pattern| is_subset(&down, pattern))
    }

    /// Checks every structural invariant and reports each violation.
    pub fn verify(&self) -> ValidationReport {
        let mut failures = Vec::new();
        let k = self.k;
        let s = self.s;

        if self.f() != binomial(k, s) {
            failures.push(InvariantViolation::RowCount {
                expected: binomial(k, s),
                actual: self.f(),
            });
        }

        // cyclic support of G
        for j in 0..k {
            let expected: Vec<usize> = {
                let mut w: Vec<usize> = (0..=s).map(|d| (j + d) % k).collect();
                w.sort_unstable();
                w
            };
            let actual: Vec<usize> = (0..k).filter(|&c| !self.g_is_zero(j, c)).collect();
            if actual != expected {
                failures.push(InvariantViolation::CyclicSupport { row: j });
            }
        }

        // zero patterns of C enumerate every s-subset, each with exactly s zeros
        for (row, pattern) in self.patterns.iter().enumerate() {
            let zeros: Vec<usize> = (0..k).filter(|&c| self.c_is_zero(row, c)).collect();
            if &zeros != pattern {
                failures.push(InvariantViolation::ZeroPattern { row });
            }
        }

        // C * G = 1
        match &self.matrices {
            SchemeMatrices::Rational { g, c } => {
                let prod = c.matmul(g);
                let one: BigRational = Field::one();
                for r in 0..prod.rows() {
                    for col in 0..prod.cols() {
                        if prod[(r, col)] != one {
                            failures.push(InvariantViolation::ProductMismatch {
                                row: r,
                                col,
                                error: (prod[(r, col)].clone() - &one).to_f64().abs(),
                            });
                        }
                    }
                }
            }
            SchemeMatrices::Float { g, c } => {
                let prod = c.matmul(g);
                for r in 0..prod.rows() {
                    for col in 0..prod.cols() {
                        let err = (prod[(r, col)] - 1.0).abs();
                        if err > FLOAT_PRODUCT_TOL {
                            failures.push(InvariantViolation::ProductMismatch {
                                row: r,
                                col,
                                error: err,
                            });
                        }
                    }
                }
            }
        }

        ValidationReport { failures }
    }

    fn g_is_zero(&self, r: usize, c: usize) -> bool {
        match &self.matrices {
            SchemeMatrices::Rational { g, .. } => Field::is_zero(&g[(r, c)]),
            SchemeMatrices::Float { g, .. } => g[(r, c)] == 0.0,
        }
    }

    fn c_is_zero(&self, r: usize, c: usize) -> bool {
        match &self.matrices {
            SchemeMatrices::Rational { c: cm, .. } => Field::is_zero(&cm[(r, c)]),
            SchemeMatrices::Float { c: cm, .. } => cm[(r, c)] == 0.0,
        }
    }

    /// Deliberately zeroes one G entry; used by tests to exercise `verify`.
    #[doc(hidden)]
    pub fn corrupt_g_entry(&mut self, r: usize, c: usize) {
        match &mut self.matrices {
            SchemeMatrices::Rational { g, .. } => g[(r, c)] = Field::zero(),
            SchemeMatrices::Float { g, .. } => g[(r, c)] = 0.0,
        }
        self.g_f64[(r, c)] = 0.0;
    }

    pub fn to_json(&self) -> String {
        let rational_entries =
            |m: &Mat<BigRational>| -> Vec<JsonEntry> {
                m.data()
                    .iter()
                    .map(|v| JsonEntry::Rational(format!("{}/{}", v.numer(), v.denom())))
                    .collect()
            };
        let float_entries =
            |m: &Mat<f64>| -> Vec<JsonEntry> { m.data().iter().copied().map(JsonEntry::Float).collect() };
        let (g, c) = match &self.matrices {
            SchemeMatrices::Rational { g, c } => (rational_entries(g), rational_entries(c)),
            SchemeMatrices::Float { g, c } => (float_entries(g), float_entries(c)),
        };
        let doc = SchemeJson {
            version: 1,
            k: self.k,
            s: self.s,
            arithmetic: Some(self.arithmetic()),
            g,
            c,
        };
        serde_json::to_string_pretty(&doc).expect("scheme serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CodesError> {
        let doc: SchemeJson =
            serde_json::from_str(text).map_err(|e| CodesError::Serialization(e.to_string()))?;
        if doc.version != 1 {
            return Err(CodesError::Serialization(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        let k = doc.k;
        let s = doc.s;
        let f = binomial(k, s);
        if doc.g.len() != k * k || doc.c.len() != f * k {
            return Err(CodesError::Serialization(
                "matrix payload has the wrong length".into(),
            ));
        }
        // documents may omit the arithmetic tag; the entry type decides
        let arithmetic = doc.arithmetic.unwrap_or(match doc.g.first() {
            Some(JsonEntry::Rational(_)) => Arithmetic::ExactRational,
            _ => Arithmetic::Float,
        });
        match arithmetic {
            Arithmetic::ExactRational => {
                let parse = |entries: &[JsonEntry], rows: usize| -> Result<Mat<BigRational>, CodesError> {
                    let mut vals = Vec::with_capacity(entries.len());
                    for e in entries {
                        vals.push(e.to_rational()?);
                    }
                    Ok(Mat::from_rows(
                        vals.chunks(k).take(rows).map(|c| c.to_vec()).collect(),
                    ))
                };
                let g = parse(&doc.g, k)?;
                let c = parse(&doc.c, f)?;
                Ok(Self::assemble(k, s, SchemeMatrices::Rational { g, c }))
            }
            Arithmetic::Float => {
                let parse = |entries: &[JsonEntry], rows: usize| -> Result<Mat<f64>, CodesError> {
                    let mut vals = Vec::with_capacity(entries.len());
                    for e in entries {
                        vals.push(e.to_float()?);
                    }
                    Ok(Mat::from_rows(
                        vals.chunks(k).take(rows).map(|c| c.to_vec()).collect(),
                    ))
                };
                let g = parse(&doc.g, k)?;
                let c = parse(&doc.c, f)?;
                Ok(Self::assemble(k, s, SchemeMatrices::Float { g, c }))
            }
        }
    }
}

/// One coefficient draw. The parity matrix H (s x K, integer entries, zero row
/// sums) pins G's rows to its null space; each combination row then solves an
/// overdetermined but consistent system. Any singular window, rank-deficient
/// survivor set, or accidental zero coefficient rejects the whole attempt.
fn try_build<T: Field>(k: usize, s: usize, attempt: u64) -> Option<(Mat<T>, Mat<T>)> {
    let g = build_g::<T>(k, s, attempt)?;
    // every window entry must be nonzero for the cyclic-support invariant
    for j in 0..k {
        for d in 0..=s {
            if g[(j, (j + d) % k)].is_zero() {
                return None;
            }
        }
    }
    let mut c_rows: Vec<Vec<T>> = Vec::with_capacity(binomial(k, s));
    for down in subsets(k, s) {
        let survivors: Vec<usize> = (0..k).filter(|j| !down.contains(j)).collect();
        // c restricted to survivors: sum_j c_j G[j][col] = 1 for every col
        let a = Mat::from_fn(k, survivors.len(), |col, si| g[(survivors[si], col)].clone());
        let b = vec![T::one(); k];
        let c = solve_overdetermined(&a, &b)?;
        if c.iter().any(Field::is_zero) {
            return None; // row must have exactly s zeros
        }
        let mut row = vec![T::zero(); k];
        for (si, &j) in survivors.iter().enumerate() {
            row[j] = c[si].clone();
        }
        c_rows.push(row);
    }
    Some((g, Mat::from_rows(c_rows)))
}

fn build_g<T: Field>(k: usize, s: usize, attempt: u64) -> Option<Mat<T>> {
    let mut g = Mat::zeros(k, k);
    if s == 0 {
        for j in 0..k {
            g[(j, j)] = T::one();
        }
        return Some(g);
    }
    // deterministic integer parity matrix with zero row sums
    let base = mix64(
        (k as u64).wrapping_mul(0x100_0003) ^ (s as u64).wrapping_mul(0x9e37) ^ attempt,
    );
    let mut counter = 0u64;
    let mut draw = || {
        counter += 1;
        1 + (mix64(base ^ counter) % 64) as i64
    };
    let mut h = Mat::zeros(s, k);
    for i in 0..s {
        let mut sum = 0i64;
        for col in 0..k - 1 {
            let v = draw();
            sum += v;
            h[(i, col)] = T::from_i64(v);
        }
        h[(i, k - 1)] = T::from_i64(-sum);
    }
    // row j: entry 1 at j, rest of the window solves H_window x = -H_col_j
    for j in 0..k {
        let window: Vec<usize> = (1..=s).map(|d| (j + d) % k).collect();
        let a = Mat::from_fn(s, s, |i, wi| h[(i, window[wi])].clone());
        let b: Vec<T> = (0..s).map(|i| h[(i, j)].neg()).collect();
        let x = solve_square(&a, &b)?;
        g[(j, j)] = T::one();
        for (wi, &col) in window.iter().enumerate() {
            g[(j, col)] = x[wi].clone();
        }
    }
    Some(g)
}

/// All s-subsets of {0..k-1} in lexicographic order.
pub fn subsets(k: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(k, s));
    let mut cur = Vec::with_capacity(s);
    fn rec(start: usize, k: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s {
            out.push(cur.clone());
            return;
        }
        for v in start..k {
            cur.push(v);
            rec(v + 1, k, s, cur, out);
            cur.pop();
        }
    }
    rec(0, k, s, &mut cur, &mut out);
    out
}

pub fn binomial(n: usize, r: usize) -> usize {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Both slices sorted ascending.
fn is_subset(needle: &[usize], haystack: &[usize]) -> bool {
    let mut it = haystack.iter();
    'outer: for n in needle {
        for h in it.by_ref() {
            if h == n {
                continue 'outer;
            }
            if h > n {
                return false;
            }
        }
        return false;
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvariantViolation {
    CyclicSupport { row: usize },
    ZeroPattern { row: usize },
    ProductMismatch { row: usize, col: usize, error: f64 },
    RowCount { expected: usize, actual: usize },
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantViolation::CyclicSupport { row } => {
                write!(f, "G row {row}: support is not the cyclic window")
            }
            InvariantViolation::ZeroPattern { row } => {
                write!(f, "C row {row}: zero pattern does not match its straggler set")
            }
            InvariantViolation::ProductMismatch { row, col, error } => {
                write!(f, "C*G != 1 at ({row}, {col}), |error| = {error:e}")
            }
            InvariantViolation::RowCount { expected, actual } => {
                write!(f, "C has {actual} rows, expected binomial(K,s) = {expected}")
            }
        }
    }
}

/// Outcome of [`CodingScheme::verify`]; empty = all invariants hold.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub failures: Vec<InvariantViolation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            write!(f, "all invariants hold")
        } else {
            writeln!(f, "{} invariant violation(s):", self.failures.len())?;
            for v in &self.failures {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SchemeJson {
    version: u32,
    #[serde(rename = "K")]
    k: usize,
    s: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arithmetic: Option<Arithmetic>,
    #[serde(rename = "G")]
    g: Vec<JsonEntry>,
    #[serde(rename = "C")]
    c: Vec<JsonEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonEntry {
    Rational(String),
    Float(f64),
}

impl JsonEntry {
    fn to_rational(&self) -> Result<BigRational, CodesError> {
        match self {
            JsonEntry::Rational(s) => {
                let (n, d) = s
                    .split_once('/')
                    .ok_or_else(|| CodesError::Serialization(format!("bad rational '{s}'")))?;
                let n: BigInt = n
                    .parse()
                    .map_err(|_| CodesError::Serialization(format!("bad numerator '{n}'")))?;
                let d: BigInt = d
                    .parse()
                    .map_err(|_| CodesError::Serialization(format!("bad denominator '{d}'")))?;
                Ok(BigRational::new(n, d))
            }
            JsonEntry::Float(_) => Err(CodesError::Serialization(
                "float entry in rational-mode scheme".into(),
            )),
        }
    }

    fn to_float(&self) -> Result<f64, CodesError> {
        match self {
            JsonEntry::Float(v) => Ok(*v),
            JsonEntry::Rational(_) => Err(CodesError::Serialization(
                "string entry in float-mode scheme".into(),
            )),
        }
    }
}
