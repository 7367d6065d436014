//! Compressed sparse row matrices over `f64` and `Complex64`.

use std::ops::{Add, AddAssign, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub trait Scalar:
    Copy
    + Default
    + Send
    + Sync
    + Add<Output = Self>
    + AddAssign
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Csr<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    /// Sums duplicate `(row, col)` entries.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(u32, u32, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Same sparsity pattern, new values.
    pub fn with_values<U: Scalar>(&self, values: Vec<U>) -> Csr<U> {
        assert_eq!(values.len(), self.values.len());
        Csr {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k] as usize
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.row_range(i)
            .map(move |k| (self.col_idx[k] as usize, self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    /// `y = x A` (row vector times matrix).
    pub fn left_mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); self.cols];
        for (i, &xi) in x.iter().enumerate().take(self.rows) {
            for k in self.row_range(i) {
                y[self.col_idx[k] as usize] += xi * self.values[k];
            }
        }
        y
    }

    /// `y = A x`.
    pub fn right_mul(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| {
                let mut acc = T::default();
                for k in self.row_range(i) {
                    acc += self.values[k] * x[self.col_idx[k] as usize];
                }
                acc
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| {
                let mut acc = T::default();
                for k in self.row_range(i) {
                    acc += self.values[k];
                }
                acc
            })
            .collect()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                self.row_range(i)
                    .map(|k| self.values[k].modulus())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::default(); self.cols]; self.rows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        out
    }
}
