use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense square real matrix with signed weights.
///
/// Used for adjacency matrices `B`, shifted matrices `C = B + D` and system
/// matrices `E`. `zero_diag` is set only by [`SignedMatrix::adjacency`], which
/// rejects nonzero diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMatrix {
    entries: DMatrix<f64>,
    zero_diag: bool,
}

impl SignedMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        for c in 0..entries.ncols() {
            for r in 0..entries.nrows() {
                if !entries[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self {
            entries,
            zero_diag: false,
        })
    }

    /// Adjacency matrix: square, finite, exactly zero diagonal.
    pub fn adjacency(entries: DMatrix<f64>) -> Result<Self> {
        let mut m = Self::new(entries)?;
        if let Some(i) = (0..m.n()).find(|&i| m.entries[(i, i)] != 0.0) {
            return Err(Error::NonZeroDiagonal(i));
        }
        m.zero_diag = true;
        Ok(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, cols, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
            zero_diag: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            zero_diag: n == 0,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn zero_diag(&self) -> bool {
        self.zero_diag
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            zero_diag: self.zero_diag,
        }
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: d.len(),
            });
        }
        let mut e = self.entries.clone();
        for (i, v) in d.iter().enumerate() {
            e[(i, i)] += v;
        }
        Self::new(e)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|&v| v >= 0.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let v = &self.entries * DVector::from_column_slice(x);
        v.iter().copied().collect()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for SignedMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.entries[idx]
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: Vec<Vec<f64>>,
    zero_diag: bool,
}

impl Serialize for SignedMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.to_rows(),
            zero_diag: self.zero_diag,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SignedMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        let refs: Vec<&[f64]> = repr.rows.iter().map(|r| r.as_slice()).collect();
        let m = SignedMatrix::from_rows(&refs).map_err(serde::de::Error::custom)?;
        if repr.zero_diag {
            SignedMatrix::adjacency(m.into_entries()).map_err(serde::de::Error::custom)
        } else {
            Ok(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(matches!(
            SignedMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(matches!(
            SignedMatrix::new(m),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn adjacency_requires_zero_diagonal() {
        assert!(matches!(
            SignedMatrix::adjacency(DMatrix::identity(2, 2)),
            Err(Error::NonZeroDiagonal(0))
        ));
        let b =
            SignedMatrix::adjacency(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        assert!(b.zero_diag());
    }

    #[test]
    fn json_round_trip_keeps_flag() {
        let b =
            SignedMatrix::adjacency(DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -1.0, 0.0])).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: SignedMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
    }
}
