//! Dense row-major matrices used for embeddings and logits.

use serde::{Deserialize, Serialize};
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                format!("{} values for {rows}x{cols}", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::shape(
                    format!("row {i} with {cols} columns"),
                    format!("{} columns", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero width
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Index of the first non-finite entry, as (row, col).
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols.max(1), i % self.cols.max(1)))
    }

    pub fn mean_row(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        if self.rows == 0 {
            return out;
        }
        for row in self.iter_rows() {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let n = self.rows as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }
}

macro_rules! finite_matrix {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Matrix", into = "Matrix")]
        pub struct $name(Matrix);

        impl $name {
            pub fn new(matrix: Matrix) -> Result<Self> {
                if let Some((r, c)) = matrix.first_non_finite() {
                    return Err(Error::validation(format!(
                        concat!("non-finite ", $what, " entry at row {}, column {}"),
                        r, c
                    )));
                }
                Ok(Self(matrix))
            }

            pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
                Self::new(Matrix::from_rows(rows)?)
            }

            pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
                Self::new(Matrix::from_vec(rows, cols, data)?)
            }

            pub fn zeros(rows: usize, cols: usize) -> Self {
                Self(Matrix::zeros(rows, cols))
            }

            pub fn into_inner(self) -> Matrix {
                self.0
            }

            pub(crate) fn from_matrix_unchecked(matrix: Matrix) -> Self {
                Self(matrix)
            }
        }

        impl Deref for $name {
            type Target = Matrix;
            fn deref(&self) -> &Matrix {
                &self.0
            }
        }

        impl TryFrom<Matrix> for $name {
            type Error = Error;
            fn try_from(m: Matrix) -> Result<Self> {
                Self::new(m)
            }
        }

        impl From<$name> for Matrix {
            fn from(m: $name) -> Matrix {
                m.0
            }
        }
    };
}

finite_matrix!(
    /// Sequence of embedding vectors, one row per token. Entries are finite
    /// and the shape is fixed at construction.
    EmbeddingMatrix,
    "embedding"
);

finite_matrix!(
    /// Unnormalised per-position scores over the vocabulary.
    LogitsMatrix,
    "logit"
);

// Logits are adjusted in place by guidance; embeddings stay immutable.
impl DerefMut for LogitsMatrix {
    fn deref_mut(&mut self) -> &mut Matrix {
        &mut self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L2-normalise in place. Returns the original norm.
pub(crate) fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Cosine similarity; `None` when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Numerically stable softmax of `logits / temperature`.
pub fn softmax_with_temperature(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().map(|l| l / temperature).fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l / temperature - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_embeddings() {
        let err = EmbeddingMatrix::from_rows(&[vec![1.0, f64::NAN]]).unwrap_err();
        assert!(err.to_string().contains("row 0, column 1"));
        assert!(LogitsMatrix::from_rows(&[vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn ragged_rows_are_a_shape_error() {
        let err = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let p = softmax_with_temperature(&[1.0, 2.0, 3.0], 0.5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = softmax_with_temperature(&[101.0, 102.0, 103.0], 0.5);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_of_zero_vector_is_undefined() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), None);
        assert_eq!(cosine(&[2.0, 0.0], &[1.0, 0.0]), Some(1.0));
    }
}
