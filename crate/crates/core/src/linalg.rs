//! Dense Gaussian elimination over exact rationals or `f64`, and Schur complements.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::{to_f64, Rational};

/// Field operations shared by the exact and floating-point solvers.
pub trait Scalar:
    Clone
    + PartialEq
    + std::fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_rational(q: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    /// The exact value, when the scalar carries one.
    fn as_rational(&self) -> Option<Rational>;
    /// Pivot quality: larger is better, zero means unusable.
    fn pivot_weight(&self) -> f64;
    /// Whether elimination should search for the largest pivot.
    const PARTIAL_PIVOTING: bool;
    /// Largest dense system the graph solvers accept for this scalar.
    const SOLVE_CAP: usize;
}

impl Scalar for Rational {
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
    fn to_f64(&self) -> f64 {
        to_f64(self)
    }
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
    fn pivot_weight(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }
    const PARTIAL_PIVOTING: bool = false;
    const SOLVE_CAP: usize = 500;
}

impl Scalar for f64 {
    fn from_rational(q: &Rational) -> Self {
        to_f64(q)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn as_rational(&self) -> Option<Rational> {
        None
    }
    fn pivot_weight(&self) -> f64 {
        self.abs()
    }
    const PARTIAL_PIVOTING: bool = true;
    const SOLVE_CAP: usize = 4000;
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let idx = i * self.cols + j;
        let cur = std::mem::replace(&mut self.data[idx], T::zero());
        self.data[idx] = cur + v;
    }
}

/// Solves `A X = B` for square `A` by Gaussian elimination; `B` may hold several columns.
pub fn solve<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    assert_eq!(a.rows, a.cols, "solve needs a square matrix");
    assert_eq!(a.rows, b.rows, "right-hand side has the wrong height");
    let n = a.rows;
    let m = b.cols;
    let w = n + m;
    // Augmented [A | B]
    let mut aug: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(w);
            row.extend((0..n).map(|j| a.get(i, j).clone()));
            row.extend((0..m).map(|j| b.get(i, j).clone()));
            row
        })
        .collect();

    for col in 0..n {
        let pivot = if T::PARTIAL_PIVOTING {
            (col..n)
                .max_by(|&x, &y| aug[x][col].pivot_weight().total_cmp(&aug[y][col].pivot_weight()))
                .filter(|&r| aug[r][col].pivot_weight() > 0.0)
        } else {
            (col..n).find(|&r| aug[r][col].pivot_weight() > 0.0)
        }
        .ok_or(Error::Singular)?;
        aug.swap(col, pivot);

        let inv = T::one() / aug[col][col].clone();
        for v in aug[col][col..].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        let (head, tail) = aug.split_at_mut(col + 1);
        let prow = &head[col];
        for row in tail.iter_mut() {
            let f = row[col].clone();
            if f.is_zero() {
                continue;
            }
            for j in col..w {
                if !prow[j].is_zero() {
                    row[j] = row[j].clone() - f.clone() * prow[j].clone();
                }
            }
        }
    }

    // Back substitution on the unit upper-triangular system.
    for col in (0..n).rev() {
        let (head, tail) = aug.split_at_mut(col);
        let prow = &tail[0];
        for row in head.iter_mut() {
            let f = row[col].clone();
            if f.is_zero() {
                continue;
            }
            for j in n..w {
                row[j] = row[j].clone() - f.clone() * prow[j].clone();
            }
            row[col] = T::zero();
        }
    }

    let mut x = DenseMatrix::zeros(n, m);
    for (i, row) in aug.into_iter().enumerate() {
        for (j, v) in row.into_iter().skip(n).enumerate() {
            x.set(i, j, v);
        }
    }
    Ok(x)
}

/// Schur complement of the `keep` block: `S = A_kk − A_ke A_ee⁻¹ A_ek`.
///
/// Applied to a weighted graph Laplacian this gives the Kron-reduced Laplacian on `keep`.
pub fn schur_complement<T: Scalar>(a: &DenseMatrix<T>, keep: &[usize]) -> Result<DenseMatrix<T>> {
    let n = a.rows;
    let mut is_kept = vec![false; n];
    for &k in keep {
        is_kept[k] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).collect();
    let sub = |rows: &[usize], cols: &[usize]| {
        let mut m = DenseMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m.set(i, j, a.get(r, c).clone());
            }
        }
        m
    };
    let akk = sub(keep, keep);
    if elim.is_empty() {
        return Ok(akk);
    }
    let ake = sub(keep, &elim);
    let aee = sub(&elim, &elim);
    let aek = sub(&elim, keep);
    let y = solve(&aee, &aek)?;
    let mut s = akk;
    for i in 0..keep.len() {
        for j in 0..keep.len() {
            let mut acc = T::zero();
            for l in 0..elim.len() {
                acc = acc + ake.get(i, l).clone() * y.get(l, j).clone();
            }
            let v = s.get(i, j).clone() - acc;
            s.set(i, j, v);
        }
    }
    Ok(s)
}

/// Largest absolute entry, used for float residual checks.
pub fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}
