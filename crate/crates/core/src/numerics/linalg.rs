//! Small dense linear algebra: row-major matrices, Cholesky, Householder.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Domain("columns have unequal lengths".into()));
        }
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (k, &j) in idx.iter().enumerate() {
                m[(i, k)] = self[(i, j)];
            }
        }
        m
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self' v`.
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    /// `self' self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                for b in a..self.cols {
                    g.data[a * self.cols + b] += r[a] * r[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g.data[a * self.cols + b] = g.data[b * self.cols + a];
            }
        }
        g
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Domain("Cholesky needs a square matrix".into()));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut s = a[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            if !(s > 0.0) {
                return Err(Error::Degenerate("matrix is not positive definite".into()));
            }
            let d = s.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `b' A^{-1} b`.
    pub fn quad_form_inv(&self, b: &[f64]) -> f64 {
        let y = self.forward(b);
        dot(&y, &y)
    }
}

/// Householder QR of a tall `n x p` matrix, keeping the reflectors so that
/// the full orthogonal factor can be applied without being formed.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    n: usize,
    reflectors: Vec<Vec<f64>>,
    r_diag: Vec<f64>,
}

impl HouseholderQr {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (n, p) = (a.rows(), a.cols());
        if p > n {
            return Err(Error::Domain(format!("QR needs rows >= cols, got {n}x{p}")));
        }
        let mut work = a.clone();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut reflectors = Vec::with_capacity(p);
        let mut r_diag = Vec::with_capacity(p);
        for k in 0..p {
            let x: Vec<f64> = (k..n).map(|i| work[(i, k)]).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= 1e-12 * scale * (n as f64).sqrt() {
                return Err(Error::Degenerate(format!("column {k} is linearly dependent")));
            }
            let alpha = if x[0] > 0.0 { -norm } else { norm };
            let mut v = x;
            v[0] -= alpha;
            let vnorm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            v.iter_mut().for_each(|t| *t /= vnorm);
            for j in k..p {
                let s: f64 = (k..n).map(|i| v[i - k] * work[(i, j)]).sum();
                for i in k..n {
                    work[(i, j)] -= 2.0 * v[i - k] * s;
                }
            }
            r_diag.push(alpha);
            reflectors.push(v);
        }
        Ok(Self { n, reflectors, r_diag })
    }

    pub fn r_diagonal(&self) -> &[f64] {
        &self.r_diag
    }

    /// `Q' y` for the full `n x n` orthogonal factor.
    pub fn apply_qt(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for (k, v) in self.reflectors.iter().enumerate() {
            let s: f64 = v.iter().zip(&out[k..]).map(|(a, b)| a * b).sum();
            for (o, a) in out[k..].iter_mut().zip(v) {
                *o -= 2.0 * a * s;
            }
        }
        out
    }

    /// `Q y` for the full orthogonal factor.
    pub fn apply_q(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for (k, v) in self.reflectors.iter().enumerate().rev() {
            let s: f64 = v.iter().zip(&out[k..]).map(|(a, b)| a * b).sum();
            for (o, a) in out[k..].iter_mut().zip(v) {
                *o -= 2.0 * a * s;
            }
        }
        out
    }

    /// Columns `p..n` of `Q`: an orthonormal basis of the orthogonal
    /// complement of the column space.
    pub fn complement_basis(&self) -> Matrix {
        let p = self.reflectors.len();
        let mut cols = Vec::with_capacity(self.n - p);
        for j in p..self.n {
            let mut e = vec![0.0; self.n];
            e[j] = 1.0;
            cols.push(self.apply_q(&e));
        }
        Matrix::from_columns(&cols).unwrap_or_else(|_| Matrix::zeros(self.n, 0))
    }
}
