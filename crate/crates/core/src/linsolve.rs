//! Sparse symmetric positive definite solves for the Newton steps.
//!
//! The Newton systems are assembled into compressed sparse rows over the
//! free vertices. They are solved with conjugate gradients preconditioned
//! by incomplete Cholesky (zero fill); if the factorization breaks down the
//! diagonal is shifted and retried, falling back to Jacobi as a last
//! resort. Every step is sequential and deterministic, so repeated runs
//! produce bitwise identical iterates.

use crate::error::{MgError, Result};

/// Symmetric sparse matrix in CSR form. Both triangles are stored; the
/// sparsity pattern is built once per domain and values are rewritten on
/// every Newton iteration.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the pattern from undirected edges between unknowns (diagonal
    /// entries are always present). Edges may repeat.
    pub fn from_edges(n: usize, edges: impl Iterator<Item = (u32, u32)>) -> CsrMatrix {
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (a, b) in edges {
            debug_assert!(a != b);
            neighbors[a as usize].push(b);
            neighbors[b as usize].push(a);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for (i, ns) in neighbors.iter_mut().enumerate() {
            ns.push(i as u32);
            ns.sort_unstable();
            ns.dedup();
            col.extend_from_slice(ns);
            row_ptr.push(col.len());
        }
        let nnz = col.len();
        CsrMatrix {
            n,
            row_ptr,
            col,
            val: vec![0.0; nnz],
        }
    }

    pub fn zero_values(&mut self) {
        self.val.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds into entry (i, j); the pair must be in the pattern.
    pub fn add(&mut self, i: u32, j: u32, value: f64) {
        let lo = self.row_ptr[i as usize];
        let hi = self.row_ptr[i as usize + 1];
        match self.col[lo..hi].binary_search(&j) {
            Ok(k) => self.val[lo + k] += value,
            Err(_) => panic!("entry ({i},{j}) outside sparsity pattern"),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            if let Ok(k) = self.col[lo..hi].binary_search(&(i as u32)) {
                d[i] = self.val[lo + k];
            }
        }
        d
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            y[i] = acc;
        }
    }
}

/// Lower-triangular incomplete Cholesky factor sharing the lower part of
/// the CSR pattern.
struct IncompleteCholesky {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
    diag_idx: Vec<usize>,
}

impl IncompleteCholesky {
    /// Attempts IC(0) on A + shift * diag(A). Fails when a pivot is not
    /// safely positive.
    fn factor(a: &CsrMatrix, shift: f64) -> Option<IncompleteCholesky> {
        let n = a.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.col[k] as usize <= i {
                    col.push(a.col[k]);
                }
            }
            row_ptr.push(col.len());
        }
        let mut val = vec![0.0; col.len()];
        let mut diag_idx = vec![0usize; n];
        for i in 0..n {
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col[k] as usize;
                if j <= i {
                    let lo = row_ptr[i];
                    let hi = row_ptr[i + 1];
                    let p = lo + col[lo..hi].binary_search(&(j as u32)).unwrap();
                    val[p] = a.val[k] * if j == i { 1.0 + shift } else { 1.0 };
                    if j == i {
                        diag_idx[i] = p;
                    }
                }
            }
        }

        // standard up-looking IC(0): for each row i and each stored (i, j),
        // subtract the inner product of rows i and j over columns < j.
        let mut col_of_row = vec![0.0f64; n]; // scatter buffer for row i
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            for k in lo..hi {
                col_of_row[col[k] as usize] = val[k];
            }
            for k in lo..hi {
                let j = col[k] as usize;
                let (jlo, jhi) = (row_ptr[j], row_ptr[j + 1]);
                let mut sum = col_of_row[j];
                for kj in jlo..jhi {
                    let c = col[kj] as usize;
                    if c < j {
                        // only pairs present in row i contribute in IC(0)
                        sum -= col_of_row[c] * val[kj];
                    }
                }
                if j < i {
                    let dj = val[diag_idx[j]];
                    let lij = sum / dj;
                    val[k] = lij;
                    col_of_row[j] = lij;
                } else {
                    // diagonal pivot
                    if !(sum > 1e-300) || !sum.is_finite() {
                        for k in lo..hi {
                            col_of_row[col[k] as usize] = 0.0;
                        }
                        return None;
                    }
                    val[k] = sum.sqrt();
                }
            }
            for k in lo..hi {
                col_of_row[col[k] as usize] = 0.0;
            }
        }
        Some(IncompleteCholesky {
            n,
            row_ptr,
            col,
            val,
            diag_idx,
        })
    }

    /// Solves L L^T z = r.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.n;
        // forward: L y = r
        for i in 0..n {
            let mut acc = r[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k] as usize;
                if j < i {
                    acc -= self.val[k] * z[j];
                }
            }
            z[i] = acc / self.val[self.diag_idx[i]];
        }
        // backward: L^T z = y (column sweep)
        for i in (0..n).rev() {
            z[i] /= self.val[self.diag_idx[i]];
            let zi = z[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k] as usize;
                if j < i {
                    z[j] -= self.val[k] * zi;
                }
            }
        }
    }
}

enum Preconditioner {
    Ic(IncompleteCholesky),
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    fn build(a: &CsrMatrix) -> Preconditioner {
        let mut shift = 0.0;
        for _ in 0..8 {
            if let Some(ic) = IncompleteCholesky::factor(a, shift) {
                return Preconditioner::Ic(ic);
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 10.0 };
        }
        let inv: Vec<f64> = a
            .diagonal()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Preconditioner::Jacobi(inv)
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Ic(ic) => ic.apply(r, z),
            Preconditioner::Jacobi(inv) => {
                for i in 0..r.len() {
                    z[i] = inv[i] * r[i];
                }
            }
        }
    }
}

pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from a zero initial guess.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], rtol: f64, max_iters: usize) -> Result<PcgOutcome> {
    let n = a.n;
    assert_eq!(b.len(), n);
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        return Ok(PcgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let pre = Preconditioner::build(a);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best = f64::INFINITY;
    for it in 1..=max_iters {
        a.mul(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(MgError::NoConvergence {
                iterations: it,
                residual: best,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / norm_b;
        best = best.min(rel);
        if rel <= rtol {
            return Ok(PcgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(MgError::NoConvergence {
        iterations: max_iters,
        residual: best,
    })
}
