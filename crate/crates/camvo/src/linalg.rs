//! Minimal dense linear algebra over row-major `Vec<f64>` square matrices.
//!
//! Sized for this crate's needs: ridge-regression state up to a few hundred
//! dimensions and correlation matrices up to ~20 arms. Cholesky covers the
//! SPD paths; a cyclic Jacobi sweep covers symmetric eigendecomposition.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Square matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "rows must form a square");
        Self { n, data: rows.concat() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            out[i] = dot(self.row(i), x);
        }
        out
    }

    /// x' M x for symmetric M.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    *out.at_mut(i, j) += a * other.at(k, j);
                }
            }
        }
        out
    }

    /// M += scale * x x'.
    pub fn add_outer(&mut self, x: &[f64], scale: f64) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let xi = scale * x[i];
            for j in 0..self.n {
                self.data[i * self.n + j] += xi * x[j];
            }
        }
    }

    /// Rank-one downdate of a maintained inverse after `A += x x'`
    /// (Sherman-Morrison).
    pub fn sherman_morrison_update(&mut self, x: &[f64]) {
        let ax = self.matvec(x);
        let denom = 1.0 + dot(x, &ax);
        if !denom.is_finite() || denom <= 1e-300 {
            return;
        }
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] -= ax[i] * ax[j] / denom;
            }
        }
    }

    /// Lower-triangular Cholesky factor of an SPD matrix.
    pub fn cholesky(&self) -> Result<Matrix> {
        let n = self.n;
        let mut l = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if !s.is_finite() || s <= 0.0 {
                        return Err(Error::Factorization(format!(
                            "non-positive pivot {s} at row {i}"
                        )));
                    }
                    *l.at_mut(i, j) = s.sqrt();
                } else {
                    *l.at_mut(i, j) = s / l.at(j, j);
                }
            }
        }
        Ok(l)
    }

    /// Solve M x = b through a Cholesky factorization of self.
    pub fn cholesky_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let l = self.cholesky()?;
        Ok(l.solve_with_factor(b))
    }

    /// Forward/back substitution with self as the lower Cholesky factor.
    fn solve_with_factor(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Full inverse of an SPD matrix via Cholesky.
    pub fn cholesky_inverse(&self) -> Result<Matrix> {
        let l = self.cholesky()?;
        let n = self.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = l.solve_with_factor(&e);
            e[j] = 0.0;
            for i in 0..n {
                *inv.at_mut(i, j) = col[i];
            }
        }
        // Symmetrize to kill round-off skew.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv.at(i, j) + inv.at(j, i));
                *inv.at_mut(i, j) = v;
                *inv.at_mut(j, i) = v;
            }
        }
        Ok(inv)
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns (eigenvalues, V) with eigenvectors in the columns of V.
    pub fn jacobi_eigen(&self) -> Result<(Vec<f64>, Matrix)> {
        if !self.is_finite() {
            return Err(Error::Factorization("non-finite entries".into()));
        }
        let n = self.n;
        let mut a = self.clone();
        // Work on the symmetrized copy.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (a.at(i, j) + a.at(j, i));
                *a.at_mut(i, j) = v;
                *a.at_mut(j, i) = v;
            }
        }
        let mut v = Matrix::identity(n);
        let scale: f64 = (0..n)
            .map(|i| a.row(i).iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
            .max(1e-300);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a.at(i, j) * a.at(i, j);
                }
            }
            if off.sqrt() <= 1e-14 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.at(p, q);
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a.at(p, p);
                    let aqq = a.at(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.at(k, p);
                        let akq = a.at(k, q);
                        *a.at_mut(k, p) = c * akp - s * akq;
                        *a.at_mut(k, q) = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a.at(p, k);
                        let aqk = a.at(q, k);
                        *a.at_mut(p, k) = c * apk - s * aqk;
                        *a.at_mut(q, k) = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v.at(k, p);
                        let vkq = v.at(k, q);
                        *v.at_mut(k, p) = c * vkp - s * vkq;
                        *v.at_mut(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
        let vals = (0..n).map(|i| a.at(i, i)).collect();
        Ok((vals, v))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
