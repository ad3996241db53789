//! Rank-1 truncation of short, wide non-negative matrices.
//!
//! The leading left singular vector is found by power iteration on the
//! `rows x rows` Gram matrix `M Mᵀ`. Each step squares the iterated operator,
//! so the effective power doubles per step and nearly degenerate spectra
//! still converge in a few dozen steps.

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidFactor(format!(
                "matrix {rows}x{cols} cannot hold {} entries",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Copy divided by the largest entry (unchanged if all zero).
    pub fn max_normalized(&self) -> Matrix {
        let max = self.data.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            self.scaled(1.0 / max)
        } else {
            self.clone()
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖M − q qᵀ M‖_F` for a vector `q` over the rows.
    pub fn projection_residual(&self, q: &[f64]) -> f64 {
        assert_eq!(q.len(), self.rows);
        let mut acc = 0.0;
        for c in 0..self.cols {
            let dot: f64 = q
                .iter()
                .enumerate()
                .map(|(r, qr)| qr * self.get(r, c))
                .sum();
            for (r, qr) in q.iter().enumerate() {
                let d = self.get(r, c) - qr * dot;
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    fn gram(&self) -> Vec<f64> {
        let n = self.rows;
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let s: f64 = self
                    .row(a)
                    .iter()
                    .zip(self.row(b))
                    .map(|(x, y)| x * y)
                    .sum();
                g[a * n + b] = s;
                g[b * n + a] = s;
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Result {
    /// Leading left singular vector: unit norm, entrywise non-negative.
    pub r: Vec<f64>,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const RANK1_TOLERANCE: f64 = 1e-12;
pub const RANK1_MAX_ITERATIONS: usize = 10_000;

/// Leading left singular vector of a non-negative matrix.
pub fn rank1_truncate(m: &Matrix) -> Result<Rank1Result> {
    if m.data.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFiniteMatrix);
    }
    let n = m.rows;
    let mut unit = vec![0.0; n];
    unit[0] = 1.0;
    if m.data.iter().all(|&v| v == 0.0) {
        return Ok(Rank1Result {
            r: unit,
            sigma: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let gram = m.max_normalized().gram();
    let mut op = gram.clone();
    normalize_max(&mut op);
    let mut v = normalized(&matvec(&op, &vec![1.0; n], n));
    let mut iterations = 1;
    let mut converged = n == 1;

    while !converged && iterations < RANK1_MAX_ITERATIONS {
        op = matmul(&op, &op, n);
        normalize_max(&mut op);
        let next = normalized(&matvec(&op, &vec![1.0; n], n));
        iterations += 1;
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        converged = delta < RANK1_TOLERANCE;
    }

    orient(&mut v);
    let gv = matvec(&gram, &v, n);
    let rayleigh: f64 = v.iter().zip(&gv).map(|(a, b)| a * b).sum();
    let max = m.data.iter().cloned().fold(0.0, f64::max);
    Ok(Rank1Result {
        r: v,
        sigma: rayleigh.max(0.0).sqrt() * max,
        iterations,
        converged,
    })
}

fn matvec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|r| {
            a[r * n..(r + 1) * n]
                .iter()
                .zip(x)
                .map(|(p, q)| p * q)
                .sum()
        })
        .collect()
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn normalize_max(a: &mut [f64]) {
    let max = a.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        a.iter_mut().for_each(|v| *v /= max);
    }
}

fn normalized(x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return x.to_vec();
    }
    x.iter().map(|v| v / norm).collect()
}

/// Largest-magnitude entry positive, tiny negatives clamped to zero.
fn orient(v: &mut [f64]) {
    let lead = v
        .iter()
        .cloned()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
}
