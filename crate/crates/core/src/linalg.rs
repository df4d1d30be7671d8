//! Dense matrices over a [`Scalar`] field.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::formal::{Polynomial, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<C> {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl<C: Scalar> Matrix<C> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { expected: c, found: bad.len() });
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<C>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = a.clone() * &other[(k, j)];
                    out[(i, j)] += t;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C]) -> Result<Vec<C>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(C::zero(), |acc, (a, b)| acc + a.clone() * b))
            .collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b).collect() }
    }

    pub fn scale(&self, c: &C) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.clone() * c).collect() }
    }

    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_norm();
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)].clone() - &self[(j, i)]).negligible(scale)))
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|c| c.to_c64().norm()).fold(0.0, f64::max)
    }

    /// Determinant by fraction-free (Bareiss) elimination with pivoting.
    pub fn determinant(&self) -> Result<C> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(C::one());
        }
        let mut a = self.clone();
        let mut prev = C::one();
        let mut sign = false;
        for k in 0..n - 1 {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].pivot_score().total_cmp(&a[(y, k)].pivot_score()).then(y.cmp(&x)))
                .expect("nonempty");
            if a[(p, k)].is_zero() {
                return Ok(C::zero());
            }
            if p != k {
                a.swap_rows(p, k);
                sign = !sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (a[(i, j)].clone() * &a[(k, k)] - a[(i, k)].clone() * &a[(k, j)]) / prev.clone();
                    a[(i, j)] = v;
                }
                a[(i, k)] = C::zero();
            }
            prev = a[(k, k)].clone();
        }
        let d = a[(n - 1, n - 1)].clone();
        Ok(if sign { -d } else { d })
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        let scale = self.max_norm();
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[(x, k)].pivot_score().total_cmp(&a[(y, k)].pivot_score()).then(y.cmp(&x)))
                .expect("nonempty");
            if a[(p, k)].negligible(scale) {
                return Err(Error::SingularMatrix);
            }
            a.swap_rows(p, k);
            inv.swap_rows(p, k);
            let piv = a[(k, k)].recip();
            for j in 0..n {
                a[(k, j)] = a[(k, j)].clone() * &piv;
                inv[(k, j)] = inv[(k, j)].clone() * &piv;
            }
            for i in 0..n {
                if i == k || a[(i, k)].is_zero() {
                    continue;
                }
                let f = a[(i, k)].clone();
                for j in 0..n {
                    let t = f.clone() * &a[(k, j)];
                    a[(i, j)] -= t;
                    let t = f.clone() * &inv[(k, j)];
                    inv[(i, j)] -= t;
                }
            }
        }
        Ok(inv)
    }

    /// Solves `self * x = b` for square nonsingular `self`.
    pub fn solve(&self, b: &[C]) -> Result<Vec<C>> {
        self.inverse()?.mul_vec(b)
    }

    /// Reduced row echelon form and pivot columns. Float entries below
    /// `1e-13` times the largest entry count as zero.
    pub fn row_reduce(&self) -> (Self, Vec<usize>) {
        let mut a = self.clone();
        let scale = self.max_norm().max(f64::MIN_POSITIVE);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let p = (r..self.rows)
                .max_by(|&x, &y| a[(x, c)].pivot_score().total_cmp(&a[(y, c)].pivot_score()).then(y.cmp(&x)))
                .expect("nonempty");
            if a[(p, c)].negligible(scale) {
                continue;
            }
            a.swap_rows(p, r);
            let inv = a[(r, c)].recip();
            for j in 0..self.cols {
                a[(r, j)] = a[(r, j)].clone() * &inv;
            }
            for i in 0..self.rows {
                if i != r && !a[(i, c)].is_zero() {
                    let f = a[(i, c)].clone();
                    for j in 0..self.cols {
                        let v = a[(i, j)].clone() - f.clone() * &a[(r, j)];
                        a[(i, j)] = v;
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (a, pivots)
    }

    pub fn rank(&self) -> usize {
        self.row_reduce().1.len()
    }

    /// Basis of `{v : self · v = 0}`.
    pub fn nullspace(&self) -> Vec<Vec<C>> {
        let (a, pivots) = self.row_reduce();
        (0..self.cols)
            .filter(|c| !pivots.contains(c))
            .map(|free| {
                let mut v = vec![C::zero(); self.cols];
                v[free] = C::one();
                for (r, &p) in pivots.iter().enumerate() {
                    v[p] = -a[(r, free)].clone();
                }
                v
            })
            .collect()
    }

    /// Submatrix keeping the listed rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])].clone())
    }

    pub fn map<D: Scalar>(&self, f: impl Fn(&C) -> D) -> Matrix<D> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    /// Real parts as an nalgebra matrix.
    pub fn to_real_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].to_c64().re)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.clone() - b).to_c64().norm()).fold(0.0, f64::max)
    }
}

impl<C> Index<(usize, usize)> for Matrix<C> {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[i * self.cols + j]
    }
}

impl<C> IndexMut<(usize, usize)> for Matrix<C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[i * self.cols + j]
    }
}

/// Determinant of a square matrix of polynomials by cofactor expansion, with
/// products truncated at total degree `max_degree`.
pub fn poly_determinant<C: Scalar>(m: &[Vec<Polynomial<C>>], max_degree: Option<u32>) -> Result<Polynomial<C>> {
    let n = m.len();
    if let Some(bad) = m.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    let dim = m.first().and_then(|r| r.first()).map_or(0, |p| p.dim());
    let cols: Vec<usize> = (0..n).collect();
    Ok(cofactor(m, 0, &cols, dim, max_degree))
}

fn cofactor<C: Scalar>(m: &[Vec<Polynomial<C>>], row: usize, cols: &[usize], dim: usize, max_degree: Option<u32>) -> Polynomial<C> {
    if cols.is_empty() {
        return Polynomial::one(dim);
    }
    let mut acc = Polynomial::zero(dim);
    for (k, &c) in cols.iter().enumerate() {
        let entry = &m[row][c];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = cofactor(m, row + 1, &rest, dim, max_degree);
        let term = entry.mul_truncated(&minor, max_degree);
        if k % 2 == 0 {
            acc += &term;
        } else {
            acc = &acc - &term;
        }
    }
    acc
}
