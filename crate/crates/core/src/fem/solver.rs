//! Sparse symmetric positive definite solves.
//!
//! A sparse Cholesky factorization is the primary path; preconditioned
//! conjugate gradients takes over when factorization fails or its residual
//! misses the tolerance.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Col, Side};

use super::assembly::{LinearSystem, SparseMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Reusable factorization of one constrained matrix.
pub struct Factorization {
    matrix: SparseMatrix,
    llt: Option<Llt<usize, f64>>,
    rel_tol: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("dim", &self.matrix.dim())
            .field("direct", &self.llt.is_some())
            .field("rel_tol", &self.rel_tol)
            .finish()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

impl Factorization {
    pub fn new(matrix: &SparseMatrix, rel_tol: f64) -> Self {
        let llt = match matrix.as_faer().sp_cholesky(Side::Lower) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("sparse Cholesky failed ({e:?}); using conjugate gradients");
                None
            }
        };
        Factorization {
            matrix: matrix.clone(),
            llt,
            rel_tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Solves `A x = b` to relative residual `rel_tol`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: b.len(),
            });
        }
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = vec![0.0; n];
        if let Some(llt) = &self.llt {
            x = self.direct(llt, b);
            // One step of iterative refinement absorbs round-off on stiff systems.
            let mut r = residual(&self.matrix, &x, b);
            if norm(&r) > self.rel_tol * bnorm {
                let dx = self.direct(llt, &r);
                x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                r = residual(&self.matrix, &x, b);
            }
            if norm(&r) <= self.rel_tol * bnorm {
                return Ok(x);
            }
            log::warn!(
                "direct solve residual {:e} above tolerance; continuing with conjugate gradients",
                norm(&r) / bnorm
            );
        }
        pcg(&self.matrix, b, x, self.rel_tol, 20 * n + 1000)
    }

    fn direct(&self, llt: &Llt<usize, f64>, b: &[f64]) -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
        let sol = llt.solve(&rhs);
        (0..b.len()).map(|i| sol[i]).collect()
    }
}

/// Solves a constrained system once.
pub fn solve(system: &LinearSystem, rel_tol: f64) -> Result<Vec<f64>> {
    Factorization::new(&system.matrix, rel_tol).solve(&system.rhs)
}

/// Jacobi-preconditioned conjugate gradients from the initial guess `x`.
pub fn pcg(a: &SparseMatrix, b: &[f64], mut x: Vec<f64>, rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Solver {
            reason: format!("non-positive diagonal entry at {i}"),
            residual: f64::NAN,
        });
    }
    let mut r = residual(a, &x, b);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let rn = norm(&r);
        if rn <= rel_tol * bnorm {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Solver {
                reason: "matrix is not positive definite".into(),
                residual: rn / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm(&residual(a, &x, b)) / bnorm;
    if res <= rel_tol {
        Ok(x)
    } else {
        Err(Error::Solver {
            reason: format!("conjugate gradients did not converge in {max_iter} iterations"),
            residual: res,
        })
    }
}
