//! Small dense complex matrices.
//!
//! Only what the precoder needs: column-major storage, Gram products and a
//! Cholesky solve for Hermitian positive definite systems.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// Column-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::LengthMismatch {
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Sum of squared magnitudes of all entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// Submatrix made of the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.cols);
        for j in 0..self.cols {
            let src = self.column(j);
            for (dst, &r) in out.column_mut(j).iter_mut().zip(rows) {
                *dst = src[r];
            }
        }
        out
    }

    /// `selfᴴ · other`.
    pub fn adjoint_mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.rows != other.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let b = other.column(j);
            for i in 0..self.cols {
                out[(i, j)] = dot_conj(self.column(i), b);
            }
        }
        Ok(out)
    }

    /// `self · other`.
    pub fn mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let s = other[(k, j)];
                if s == C64::new(0.0, 0.0) {
                    continue;
                }
                let a = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, &x) in out.column_mut(j).iter_mut().zip(a) {
                    *o += x * s;
                }
            }
        }
        Ok(out)
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[j * self.rows + i]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[j * self.rows + i]
    }
}

/// `aᴴ b`.
pub fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Relative pivot size below which a matrix is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > PIVOT_TOLERANCE * a[(j, j)].re.abs()) {
            return Err(Error::Singular);
        }
        let ljj = diag.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn cholesky_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let l = cholesky(a)?;
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: b.rows(),
        });
    }
    let mut x = b.clone();
    for j in 0..x.cols() {
        let col = x.column_mut(j);
        // L y = b
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[(i, k)] * col[k];
            }
            col[i] = s / l[(i, i)].re;
        }
        // Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * col[k];
            }
            col[i] = s / l[(i, i)].re;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn solve_recovers_known_solution() {
        let h = CMatrix::from_columns(&[
            vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.7, -1.0)],
            vec![c(0.1, 0.0), c(2.0, 1.0), c(-0.4, 0.3)],
        ])
        .unwrap();
        let mut g = h.adjoint_mul(&h).unwrap();
        g[(0, 0)] += 0.1;
        g[(1, 1)] += 0.1;
        let x_true = CMatrix::from_columns(&[vec![c(1.0, -2.0), c(0.5, 0.25)]]).unwrap();
        let b = g.mul(&x_true).unwrap();
        let x = cholesky_solve(&g, &b).unwrap();
        for i in 0..2 {
            assert!((x[(i, 0)] - x_true[(i, 0)]).norm() < 1e-12);
        }
    }

    #[test]
    fn non_positive_definite_is_rejected() {
        let mut a = CMatrix::identity(2);
        a[(1, 1)] = c(-1.0, 0.0);
        assert_eq!(cholesky(&a), Err(Error::Singular));
    }

    #[test]
    fn select_rows_keeps_order() {
        let m = CMatrix::from_columns(&[vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]]).unwrap();
        let s = m.select_rows(&[2, 0]);
        assert_eq!(s.column(0), &[c(3.0, 0.0), c(1.0, 0.0)]);
    }
}
