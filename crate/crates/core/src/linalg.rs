//! Dense kernels shared by the solvers and the oracles: a Cholesky
//! factorization for the symmetric positive-definite systems and a cyclic
//! Jacobi eigenvalue routine for definiteness checks.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub fn norm2(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn max_abs_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn max_abs_diff_mat(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn is_symmetric(a: ArrayView2<f64>) -> bool {
    let (r, c) = a.dim();
    r == c && (0..r).all(|i| (0..i).all(|j| a[[i, j]] == a[[j, i]]))
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: ArrayView2<f64>, what: &'static str) -> Result<Self> {
        let (n, c) = a.dim();
        if n != c {
            return Err(Error::dims(what, n, c));
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { what });
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, rhs: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        debug_assert_eq!(rhs.len(), n);
        let l = &self.l;
        let mut y = rhs.to_owned();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        y
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations. Only the lower triangle's symmetry partner is assumed equal;
/// callers pass exactly symmetric input.
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Result<Array1<f64>> {
    let (n, c) = a.dim();
    if n != c {
        return Err(Error::dims("eigenvalue input (square)", n, c));
    }
    let mut w: Vec<f64> = a.iter().copied().collect();
    let frob = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let stop = f64::EPSILON * 1e-3 * frob;

    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[p * n + q] * w[p * n + q];
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = w[p * n + p];
                let aqq = w[q * n + q];
                let g = 100.0 * apq.abs();
                // negligible against both diagonal entries: drop it
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    w[p * n + q] = 0.0;
                    w[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = w[k * n + p];
                    let akq = w[k * n + q];
                    w[k * n + p] = cs * akp - sn * akq;
                    w[k * n + q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = w[p * n + k];
                    let aqk = w[q * n + k];
                    w[p * n + k] = cs * apk - sn * aqk;
                    w[q * n + k] = sn * apk + cs * aqk;
                }
                w[p * n + q] = 0.0;
                w[q * n + p] = 0.0;
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| w[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    Ok(Array1::from(eig))
}

/// `(λmin, λmax)` of a symmetric matrix.
pub fn eigen_range(a: ArrayView2<f64>) -> Result<(f64, f64)> {
    let eig = symmetric_eigenvalues(a)?;
    match (eig.first(), eig.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::param("matrix", "empty matrix has no eigenvalues")),
    }
}
