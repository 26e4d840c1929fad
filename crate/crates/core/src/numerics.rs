//! Exact rational scalars and dense exact linear algebra.
//!
//! Every quantity in the laboratory (rewards, probabilities, values, appeals,
//! reduced costs) is a [`Rational`]. Linear systems are solved by plain
//! Gaussian elimination over the rationals, which is exact and fast enough for
//! the sparse, desk-scale matrices produced by the MDP constructions.

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors raised by the numeric layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    /// Elimination met a column with no usable nonzero pivot.
    #[error("singular matrix: no nonzero pivot in column {column}")]
    SingularMatrix { column: usize },
    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// A string could not be parsed as an exact fraction.
    #[error("cannot parse '{0}' as an exact fraction")]
    Parse(String),
    /// Division by an exact zero.
    #[error("division by zero")]
    DivisionByZero,
}

/// Arbitrary-precision exact fraction, always kept in canonical form
/// (positive denominator, coprime numerator and denominator).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds `num/den` from machine integers. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "Rational::new with zero denominator");
        Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Builds `num/den` from big integers, rejecting a zero denominator.
    pub fn from_bigints(num: BigInt, den: BigInt) -> Result<Self, NumericsError> {
        if den.is_zero() {
            return Err(NumericsError::DivisionByZero);
        }
        Ok(Rational(BigRational::new(num, den)))
    }

    /// The integer `n` as a rational.
    pub fn integer(n: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `2^k` exactly.
    pub fn pow2(k: u32) -> Self {
        Rational(BigRational::from_integer(BigInt::from(2u8).pow(k)))
    }

    /// `3^k` exactly.
    pub fn pow3(k: u32) -> Self {
        Rational(BigRational::from_integer(BigInt::from(3u8).pow(k)))
    }

    /// `self^e` for a signed exponent; panics on `0^negative`.
    pub fn powi(&self, e: i32) -> Self {
        Rational(Pow::pow(&self.0, e))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Multiplicative inverse; errors on zero.
    pub fn recip(&self) -> Result<Self, NumericsError> {
        if self.is_zero() {
            return Err(NumericsError::DivisionByZero);
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    /// Largest integer not exceeding `self`.
    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Lossy conversion for diagnostics only; never used in comparisons.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Borrow the underlying `num-rational` value.
    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Default for Rational {
    fn default() -> Self {
        Rational::zero()
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::integer(n)
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Rational::integer(i64::from(n))
    }
}

impl From<usize> for Rational {
    fn from(n: usize) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }
}

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Rational(BigRational::from_integer(n))
    }
}

impl From<BigRational> for Rational {
    fn from(r: BigRational) -> Self {
        Rational(r)
    }
}

/// Always renders as `p/q`, including integers (`5/1`), so every emitted
/// number has one uniform exact shape.
impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `p/q`, a bare integer `p`, or a finite decimal such as `3.1`
/// (converted exactly to `31/10`).
impl FromStr for Rational {
    type Err = NumericsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || NumericsError::Parse(s.to_string());
        if let Some((p, q)) = t.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| err())?;
            let q: BigInt = q.trim().parse().map_err(|_| err())?;
            return Rational::from_bigints(p, q).map_err(|_| err());
        }
        if let Some((whole, frac)) = t.split_once('.') {
            if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let negative = whole.trim_start().starts_with('-');
            let whole_digits = whole.trim_start_matches(['-', '+']);
            let w: BigInt = if whole_digits.is_empty() {
                BigInt::zero()
            } else {
                whole_digits.parse().map_err(|_| err())?
            };
            let f: BigInt = frac.parse().map_err(|_| err())?;
            let scale = BigInt::from(10u8).pow(frac.len() as u32);
            let mag = Rational::from_bigints(w * &scale + f, scale).map_err(|_| err())?;
            return Ok(if negative { -mag } else { mag });
        }
        let p: BigInt = t.parse().map_err(|_| err())?;
        Ok(Rational::from(p))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(n) => Ok(Rational::integer(n)),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational((self.0).$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
        impl $assign_trait<Rational> for Rational {
            fn $assign_method(&mut self, rhs: Rational) {
                (self.0).$assign_method(rhs.0);
            }
        }
        impl<'a> $assign_trait<&'a Rational> for Rational {
            fn $assign_method(&mut self, rhs: &'a Rational) {
                (self.0).$assign_method(&rhs.0);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);
binop!(Div, div, DivAssign, div_assign);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl<'a> Neg for &'a Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::one(), |acc, x| acc * x)
    }
}

/// Dense row-major matrix of rationals.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, entries: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self, NumericsError> {
        if entries.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, entries })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self, NumericsError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(NumericsError::DimensionMismatch("ragged rows".into()));
        }
        Matrix::from_entries(r, c, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> &Rational {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Rational] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Rational> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix, NumericsError> {
        if self.cols != rhs.rows {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let b = rhs.get(k, c);
                    if !b.is_zero() {
                        let idx = r * out.cols + c;
                        out.entries[idx] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self · x`.
    pub fn mul_vec(&self, x: &[Rational]) -> Result<Vec<Rational>, NumericsError> {
        if self.cols != x.len() {
            return Err(NumericsError::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    fn require_square(&self) -> Result<usize, NumericsError> {
        if self.rows != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(self.rows)
    }
}

/// Reduces the augmented system `[a | rhs]` in place to `[I | a⁻¹·rhs]`.
///
/// `rhs` is stored as rows of `width` entries. Zero multipliers are skipped,
/// which keeps the work proportional to the fill-in on sparse inputs.
fn gauss_jordan(a: &mut Matrix, rhs: &mut [Vec<Rational>]) -> Result<(), NumericsError> {
    let n = a.rows;
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a.get(r, col).is_zero()).ok_or(NumericsError::SingularMatrix { column: col })?;
        if pivot != col {
            for c in 0..n {
                a.entries.swap(pivot * n + c, col * n + c);
            }
            rhs.swap(pivot, col);
        }
        let inv = a.get(col, col).recip()?;
        if !inv.is_one() {
            for c in col..n {
                let idx = col * n + c;
                if !a.entries[idx].is_zero() {
                    a.entries[idx] *= &inv;
                }
            }
            for v in rhs[col].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
        }
        let pivot_row: Vec<(usize, Rational)> =
            (col..n).filter(|&c| !a.get(col, c).is_zero()).map(|c| (c, a.get(col, c).clone())).collect();
        let pivot_rhs = rhs[col].clone();
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a.get(r, col).clone();
            if factor.is_zero() {
                continue;
            }
            for (c, v) in &pivot_row {
                let idx = r * n + c;
                a.entries[idx] -= &factor * v;
            }
            for (dst, src) in rhs[r].iter_mut().zip(&pivot_rhs) {
                if !src.is_zero() {
                    *dst -= &factor * src;
                }
            }
        }
    }
    Ok(())
}

/// Solves `a·x = b` exactly for square nonsingular `a`.
pub fn solve_linear_system(a: &Matrix, b: &[Rational]) -> Result<Vec<Rational>, NumericsError> {
    let n = a.require_square()?;
    if b.len() != n {
        return Err(NumericsError::DimensionMismatch(format!("{n}x{n} system with right-hand side of length {}", b.len())));
    }
    let mut work = a.clone();
    let mut rhs: Vec<Vec<Rational>> = b.iter().map(|v| vec![v.clone()]).collect();
    gauss_jordan(&mut work, &mut rhs)?;
    Ok(rhs.into_iter().map(|mut row| row.pop().expect("one column")).collect())
}

/// Exact inverse of a square nonsingular matrix.
pub fn inverse(a: &Matrix) -> Result<Matrix, NumericsError> {
    let n = a.require_square()?;
    let mut work = a.clone();
    let mut rhs: Vec<Vec<Rational>> = (0..n)
        .map(|r| (0..n).map(|c| if r == c { Rational::one() } else { Rational::zero() }).collect())
        .collect();
    gauss_jordan(&mut work, &mut rhs)?;
    Matrix::from_rows(rhs)
}
