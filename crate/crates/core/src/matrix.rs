//! Dense real matrices, (quasi-)norms and row-sparsity classes.
//!
//! Sparsity is a property that is checked, never a storage format: every
//! matrix is a dense row-major buffer of finite reals.

use std::fmt::Write as _;
use std::fs;
use std::ops::{Add, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `n1 x n2` real matrix with finite entries, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct RealMatrix {
    n1: usize,
    n2: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    n1: usize,
    n2: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawMatrix> for RealMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        RealMatrix::new(raw.n1, raw.n2, raw.entries)
    }
}

impl RealMatrix {
    pub fn new(n1: usize, n2: usize, entries: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::domain(format!(
                "matrix dimensions must be positive, got {n1}x{n2}"
            )));
        }
        if entries.len() != n1 * n2 {
            return Err(Error::Parse(format!(
                "{n1}x{n2} matrix needs {} entries, got {}",
                n1 * n2,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "entry ({}, {}) is not finite",
                pos / n2,
                pos % n2
            )));
        }
        Ok(RealMatrix { n1, n2, entries })
    }

    pub fn zeros(n1: usize, n2: usize) -> Self {
        assert!(n1 > 0 && n2 > 0, "matrix dimensions must be positive");
        RealMatrix {
            n1,
            n2,
            entries: vec![0.0; n1 * n2],
        }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n1 = rows.len();
        let n2 = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(n1 * n2);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n2 {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {n2}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        RealMatrix::new(n1, n2, entries)
    }

    /// Wraps a buffer produced by a finite computation. Callers guarantee
    /// dimensions and finiteness.
    pub(crate) fn from_parts_unchecked(n1: usize, n2: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n1 * n2);
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        RealMatrix { n1, n2, entries }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n2 + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n2..(i + 1) * self.n2]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n2)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        RealMatrix::new(
            self.n1,
            self.n2,
            self.entries.iter().map(|v| v * c).collect(),
        )
    }

    pub(crate) fn check_same_dims(&self, other: &RealMatrix) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    /// Elementwise difference `self - other`.
    pub fn try_sub(&self, other: &RealMatrix) -> Result<Self> {
        self.check_same_dims(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        RealMatrix::new(self.n1, self.n2, entries)
    }

    /// Elementwise sum `self + other`.
    pub fn try_add(&self, other: &RealMatrix) -> Result<Self> {
        self.check_same_dims(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        RealMatrix::new(self.n1, self.n2, entries)
    }

    /// Squared Frobenius norm, `||A||_2^2`.
    pub fn sq_frobenius(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: {:?}: {e}", lineno + 1, tok.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty matrix file".into()));
        }
        Self::from_rows(&rows)
    }

    /// CSV text, one matrix row per line, 17 significant digits per entry.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.len() * 24);
        for row in self.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{}", fmt_real(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads CSV or JSON depending on the file extension (`.json` is JSON,
    /// anything else is CSV).
    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if is_json(path) {
            Self::read_json(path)
        } else {
            Self::read_csv(path)
        }
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if is_json(path) {
            self.write_json(path)
        } else {
            self.write_csv(path)
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Decimal form with 17 significant digits; parses back to the same bits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

impl Add for &RealMatrix {
    type Output = RealMatrix;

    fn add(self, rhs: &RealMatrix) -> RealMatrix {
        self.try_add(rhs).expect("matrix addition")
    }
}

impl Sub for &RealMatrix {
    type Output = RealMatrix;

    fn sub(self, rhs: &RealMatrix) -> RealMatrix {
        self.try_sub(rhs).expect("matrix subtraction")
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!(
            "{name} must be a positive finite real, got {v}"
        )));
    }
    Ok(())
}

/// Elementwise l_q (quasi-)norm `(sum |a_ij|^q)^(1/q)`.
pub fn norm_lq(a: &RealMatrix, q: f64) -> Result<f64> {
    check_exponent("q", q)?;
    let sum: f64 = a.entries().iter().map(|v| v.abs().powf(q)).sum();
    Ok(sum.powf(1.0 / q))
}

/// Number of exactly nonzero entries.
pub fn l0_count(a: &RealMatrix) -> usize {
    a.entries().iter().filter(|&&v| v != 0.0).count()
}

/// `||A||_{2,p}`: the l_p aggregate of the row l_2 norms.
pub fn norm_2p(a: &RealMatrix, p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    if p == 2.0 {
        return Ok(a.sq_frobenius().sqrt());
    }
    let sum: f64 = a
        .rows()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Row-wise l_q ball `B_q(s)`; `q = 0` counts nonzeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityClass {
    q: f64,
    s: f64,
}

impl SparsityClass {
    pub fn new(q: f64, s: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&q) {
            return Err(Error::domain(format!("q must lie in [0, 2], got {q}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::domain(format!("s must be positive, got {s}")));
        }
        if q == 0.0 && (s.fract() != 0.0 || s < 1.0) {
            return Err(Error::domain(format!(
                "hard sparsity needs an integer s >= 1, got {s}"
            )));
        }
        Ok(SparsityClass { q, s })
    }

    /// The hard-sparsity class `A(s)`.
    pub fn hard(s: usize) -> Result<Self> {
        Self::new(0.0, s as f64)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn contains_row(&self, row: &[f64]) -> bool {
        if self.q == 0.0 {
            row.iter().filter(|&&v| v != 0.0).count() as f64 <= self.s
        } else {
            row.iter().map(|v| v.abs().powf(self.q)).sum::<f64>() <= self.s
        }
    }
}

/// True iff every row of `a` lies in the class ball.
pub fn in_class(a: &RealMatrix, class: &SparsityClass) -> bool {
    a.rows().all(|row| class.contains_row(row))
}

/// Keeps the `s_prime` largest-magnitude entries of each row and zeroes the
/// rest. Ties keep the lower column index.
pub fn truncate_rows(m: &RealMatrix, s_prime: usize) -> Result<RealMatrix> {
    let n2 = m.n2();
    if s_prime == 0 || s_prime > n2 {
        return Err(Error::domain(format!(
            "s' must lie in [1, {n2}], got {s_prime}"
        )));
    }
    let mut out = vec![0.0; m.len()];
    let mut order: Vec<usize> = Vec::with_capacity(n2);
    for (i, row) in m.rows().enumerate() {
        order.clear();
        order.extend(0..n2);
        order.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()).then(a.cmp(&b)));
        for &j in &order[..s_prime] {
            out[i * n2 + j] = row[j];
        }
    }
    Ok(RealMatrix::from_parts_unchecked(m.n1(), n2, out))
}
