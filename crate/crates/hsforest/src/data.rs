//! Column-major covariate matrix.

use crate::error::{Error, Result};

/// Dense `n x p` matrix stored column-major; split searches walk columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build from columns laid end to end.
    pub fn from_columns(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let p = columns.len();
        let mut data = Vec::with_capacity(n * p);
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column {j} has {} entries, expected {n}",
                    col.len()
                )));
            }
            data.extend_from_slice(&col);
        }
        Ok(Self { n, p, data })
    }

    /// Build from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut data = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Ok(Self { n, p, data })
    }

    /// All-zero matrix.
    pub fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            data: vec![0.0; n * p],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.n && col < self.p);
        self.data[col * self.n + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.n + row] = value;
    }

    /// View of one column.
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.n..(col + 1) * self.n]
    }

    /// Copy of one row.
    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(row, j)).collect()
    }

    /// New matrix with one extra column appended on the right.
    pub fn with_appended_column(&self, col: &[f64]) -> Result<Self> {
        if col.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "appended column has {} entries, expected {}",
                col.len(),
                self.n
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(col);
        Ok(Self {
            n: self.n,
            p: self.p + 1,
            data,
        })
    }

    /// New matrix keeping only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.p);
        for (i, &r) in rows.iter().enumerate() {
            for j in 0..self.p {
                out.set(i, j, self.get(r, j));
            }
        }
        out
    }
}
