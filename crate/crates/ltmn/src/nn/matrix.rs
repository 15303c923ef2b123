//! Dense row-major `f64` matrix with exactly the operations the hand-written
//! layers need: matrix-vector products, transposed products, and rank-one
//! gradient accumulation.

use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Rejects NaN and infinite entries
    /// so that corrupt external data cannot enter the numeric pipeline.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix {}x{} needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite matrix entry {} at index {}",
                data[bad], bad
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Entries drawn independently from the half-open interval `[lo, hi)`.
    pub fn uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// `out = A x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "mul_vec_into: x length");
        assert_eq!(out.len(), self.rows, "mul_vec_into: out length");
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }

    /// `out += A x`
    pub fn mul_vec_acc(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "mul_vec_acc: x length");
        assert_eq!(out.len(), self.rows, "mul_vec_acc: out length");
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += A^T y`
    pub fn mul_t_vec_acc(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.rows, "mul_t_vec_acc: y length");
        assert_eq!(out.len(), self.cols, "mul_t_vec_acc: out length");
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if *yi != 0.0 {
                for (o, r) in out.iter_mut().zip(row) {
                    *o += yi * r;
                }
            }
        }
    }

    /// `A += y x^T`, the outer-product form every weight gradient takes here.
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        assert_eq!(y.len(), self.rows, "add_outer: y length");
        assert_eq!(x.len(), self.cols, "add_outer: x length");
        for (yi, row) in y.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if *yi != 0.0 {
                for (r, xj) in row.iter_mut().zip(x) {
                    *r += yi * xj;
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::from_vec(2, 2, vec![0.0; 4]).is_ok());
    }

    #[test]
    fn products_match_manual_expansion() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = [1.0, 0.5, -1.0];
        let mut out = [0.0; 2];
        a.mul_vec_into(&x, &mut out);
        assert_eq!(out, [-1.0, 0.5]);

        let y = [2.0, -1.0];
        let mut t = [0.0; 3];
        a.mul_t_vec_acc(&y, &mut t);
        assert_eq!(t, [-2.0, -1.0, 0.0]);

        let mut g = Matrix::zeros(2, 3);
        g.add_outer(&y, &x);
        assert_eq!(g.data(), &[2.0, 1.0, -2.0, -1.0, -0.5, 1.0]);
    }
}
