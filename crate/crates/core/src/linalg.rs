//! Dense vectors and symmetric matrices.
//!
//! Problem dimensions here are tens, not thousands, so vectors are plain
//! `Vec<f64>` and symmetric matrices store the full square. Nothing below is
//! tuned; it is written to be obviously correct and deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// y += c * x
pub fn axpy(y: &mut [f64], c: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Symmetric matrix in full row-major storage.
///
/// Writes go through [`SymMatrix::set`] / [`SymMatrix::add`], which mirror the
/// entry across the diagonal, so the invariant `m[i][j] == m[j][i]` holds by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Set entry (i, j) and its mirror (j, i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Add to entry (i, j) and its mirror (j, i).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                want: self.dim,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            out[i] = dot(row, x);
        }
        Ok(out)
    }

    pub fn scale_mut(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// self += c * other
    pub fn axpy_mat(&mut self, c: f64, other: &SymMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn diff(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch {
                want: a.dim,
                got: b.dim,
            });
        }
        let mut out = a.clone();
        out.axpy_mat(-1.0, b);
        Ok(out)
    }

    /// Gershgorin upper bound on the largest eigenvalue:
    /// max_i (a_ii + sum_{j != i} |a_ij|).
    pub fn gershgorin_upper(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                let mut r = 0.0;
                for j in 0..self.dim {
                    if j != i {
                        r += self.get(i, j).abs();
                    }
                }
                self.get(i, i) + r
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Smallest eigenvalue of a symmetric matrix, within ±tol.
///
/// Cyclic Jacobi: rotate each off-diagonal entry to zero in turn until the
/// off-diagonal Frobenius norm drops below tol; the diagonal is then within
/// tol of the true spectrum (Wielandt–Hoffman). Unlike power-type methods
/// there is no eigengap in the convergence rate — a clustered or fully
/// degenerate spectrum (a Hessian near −I, say) is the easy case, not a
/// stall — and the reduction is deterministic with no starting vector.
pub fn min_eigenvalue(h: &SymMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let d = h.dim();
    if d == 0 {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: "matrix must be at least 1x1".into(),
        });
    }
    if d == 1 {
        return Ok(h.get(0, 0));
    }
    let mut a = h.data.clone();
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                s += a[i * d + j] * a[i * d + j];
            }
        }
        (2.0 * s).sqrt()
    };
    // Quadratic convergence once sweeps start landing; 64 is far beyond
    // what any d in the tens can need.
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        if off(&a) <= tol {
            return Ok((0..d).map(|i| a[i * d + i]).fold(f64::INFINITY, f64::min));
        }
        for p in 0..d - 1 {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                // Smaller-root tangent of the annihilating rotation keeps
                // |t| ≤ 1. If θ overflows, t degrades to ±0 and zeroing the
                // entry outright injects error |apq| ≤ 5e−309·|aqq − app|.
                let theta = (aqq - app) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for i in 0..d {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    let nip = c * aip - s * aiq;
                    let niq = s * aip + c * aiq;
                    a[i * d + p] = nip;
                    a[p * d + i] = nip;
                    a[i * d + q] = niq;
                    a[q * d + i] = niq;
                }
            }
        }
    }
    Err(Error::EigenNoConvergence {
        max_iters: max_sweeps,
    })
}
