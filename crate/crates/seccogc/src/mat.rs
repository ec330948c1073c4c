//! Small dense matrices over an exact or floating-point field.
//!
//! The code constructions need linear solves in two arithmetics: exact
//! rationals (the correctness linchpin `C*G = 1` must be checkable with no
//! tolerance) and `f64` for larger instances. Both go through the same
//! elimination routines via the [`Field`] trait.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Field operations needed by Gaussian elimination.
pub trait Field: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// Pivot preference; larger is better. Exact fields only distinguish zero.
    fn pivot_score(&self) -> f64;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Field for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn pivot_score(&self) -> f64 {
        if Zero::is_zero(self) {
            0.0
        } else {
            1.0
        }
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn is_zero(&self) -> bool {
        self.abs() < 1e-12
    }
    fn pivot_score(&self) -> f64 {
        self.abs()
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Converts without overflowing on large numerators: scales down both parts.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    let (n, d) = (r.numer(), r.denom());
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    // keep both mantissas under 2^52 and track the shift
    let shift_n = (nb - 52).max(0);
    let shift_d = (db - 52).max(0);
    let nf = (n >> shift_n)
        .to_string()
        .parse::<f64>()
        .unwrap_or(f64::NAN);
    let df = (d >> shift_d)
        .to_string()
        .parse::<f64>()
        .unwrap_or(f64::NAN);
    nf / df * 2f64.powi((shift_n - shift_d) as i32)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Mat<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Field> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        Mat::from_fn(self.rows, other.cols, |r, c| {
            let mut acc = T::zero();
            for i in 0..self.cols {
                acc = acc.add(&self[(r, i)].mul(&other[(i, c)]));
            }
            acc
        })
    }
}

/// Solves the square system `A x = b`. `None` if singular.
pub fn solve_square<T: Field>(a: &Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut m = Mat::from_fn(n, n + 1, |r, c| {
        if c < n {
            a[(r, c)].clone()
        } else {
            b[r].clone()
        }
    });
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| {
            m[(r1, col)]
                .pivot_score()
                .partial_cmp(&m[(r2, col)].pivot_score())
                .unwrap()
        })?;
        if m[(piv, col)].is_zero() {
            return None;
        }
        swap_rows(&mut m, col, piv);
        normalize_and_eliminate(&mut m, col, col);
    }
    Some((0..n).map(|r| m[(r, n)].clone()).collect())
}

/// Solves the overdetermined system `A x = b` (more equations than unknowns).
/// Returns `None` if the system is rank-deficient or inconsistent.
pub fn solve_overdetermined<T: Field>(a: &Mat<T>, b: &[T]) -> Option<Vec<T>> {
    let (m_eq, n) = (a.rows(), a.cols());
    assert!(m_eq >= n);
    assert_eq!(b.len(), m_eq);
    let mut m = Mat::from_fn(m_eq, n + 1, |r, c| {
        if c < n {
            a[(r, c)].clone()
        } else {
            b[r].clone()
        }
    });
    let mut rank = 0usize;
    for col in 0..n {
        let piv = (rank..m_eq).max_by(|&r1, &r2| {
            m[(r1, col)]
                .pivot_score()
                .partial_cmp(&m[(r2, col)].pivot_score())
                .unwrap()
        })?;
        if m[(piv, col)].is_zero() {
            return None; // rank-deficient: no unique solution
        }
        swap_rows(&mut m, rank, piv);
        normalize_and_eliminate(&mut m, rank, col);
        rank += 1;
    }
    // remaining rows must have vanished entirely for the system to be consistent
    for r in rank..m_eq {
        if !m[(r, n)].is_zero() {
            return None;
        }
    }
    Some((0..n).map(|r| m[(r, n)].clone()).collect())
}

fn swap_rows<T: Clone>(m: &mut Mat<T>, r1: usize, r2: usize) {
    if r1 == r2 {
        return;
    }
    for c in 0..m.cols() {
        let tmp = m[(r1, c)].clone();
        m[(r1, c)] = m[(r2, c)].clone();
        m[(r2, c)] = tmp;
    }
}

fn normalize_and_eliminate<T: Field>(m: &mut Mat<T>, pivot_row: usize, col: usize) {
    let pv = m[(pivot_row, col)].clone();
    for c in 0..m.cols() {
        m[(pivot_row, c)] = m[(pivot_row, c)].div(&pv);
    }
    for r in 0..m.rows() {
        if r != pivot_row && !m[(r, col)].is_zero() {
            let f = m[(r, col)].clone();
            for c in 0..m.cols() {
                let delta = f.mul(&m[(pivot_row, c)]);
                m[(r, c)] = m[(r, c)].sub(&delta);
            }
        }
    }
}
