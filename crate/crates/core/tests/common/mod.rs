//! Shared fixtures and independent reference solvers for the integration
//! tests. Dense linear algebra here goes through nalgebra so that none of
//! the checks lean on the library's own factorizations.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use pcpmkit::{IterateState, ProblemInstance, ProxFunction};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut StdRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

pub fn gaussian_vec(rng: &mut StdRng, len: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.sample(StandardNormal))
}

pub fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn to_na_vec(v: ArrayView1<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}

pub fn from_na_vec(v: &DVector<f64>) -> Array1<f64> {
    Array1::from_iter(v.iter().copied())
}

/// Largest singular value via nalgebra's SVD.
pub fn svd_norm(a: ArrayView2<f64>) -> f64 {
    to_na(a)
        .singular_values()
        .iter()
        .fold(0.0_f64, |m, v| m.max(*v))
}

/// Smallest eigenvalue of a symmetric matrix via nalgebra.
pub fn sym_min_eigenvalue(a: ArrayView2<f64>) -> f64 {
    to_na(a)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(*v))
}

pub fn max_abs(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// A random splitting-form problem with strongly convex quadratic f and g.
pub fn random_quad_problem(rng: &mut StdRng, n: usize, m: usize) -> ProblemInstance {
    let quad = |rng: &mut StdRng, k: usize| {
        let mut c = gaussian(rng, k, k) / (k as f64).sqrt();
        c.diag_mut().mapv_inplace(|v| v + 1.0);
        ProxFunction::quad_affine(c, gaussian_vec(rng, k)).unwrap()
    };
    let a = gaussian(rng, m, n) / (m as f64).sqrt();
    let f = quad(rng, n);
    let g = quad(rng, m);
    ProblemInstance::splitting(f, g, a).unwrap()
}

pub fn random_start(rng: &mut StdRng, p: &ProblemInstance) -> IterateState {
    IterateState::new(
        gaussian_vec(rng, p.n()),
        gaussian_vec(rng, p.z_dim()),
        gaussian_vec(rng, p.m()),
    )
}

/// Solves the equality-constrained QP `min ½uᵀHu + qᵀu` s.t. `Mu = c` through
/// its KKT system `[[H, Mᵀ], [M, 0]] (u, y) = (−q, c)` with a dense LU.
/// The multiplier sign matches `L = θ(u) + ⟨y, Mu − c⟩`.
pub fn kkt_solve(
    h: ArrayView2<f64>,
    q: ArrayView1<f64>,
    m_mat: ArrayView2<f64>,
    c: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let (k, nu) = m_mat.dim();
    let mut kkt = DMatrix::<f64>::zeros(nu + k, nu + k);
    let mut rhs = DVector::<f64>::zeros(nu + k);
    for i in 0..nu {
        for j in 0..nu {
            kkt[(i, j)] = h[[i, j]];
        }
        rhs[i] = -q[i];
    }
    for r in 0..k {
        for j in 0..nu {
            kkt[(nu + r, j)] = m_mat[[r, j]];
            kkt[(j, nu + r)] = m_mat[[r, j]];
        }
        rhs[nu + r] = c[r];
    }
    let sol = kkt.lu().solve(&rhs).expect("KKT system is nonsingular");
    let u = Array1::from_iter(sol.iter().take(nu).copied());
    let y = Array1::from_iter(sol.iter().skip(nu).copied());
    (u, y)
}

/// Block-diagonal Hessian and stacked linear term of `f(x) + g(z)` for
/// quadratic f and g.
pub fn stacked_quadratic(p: &ProblemInstance) -> (Array2<f64>, Array1<f64>) {
    let (hf, qf) = p.f().quadratic_model().expect("quadratic f");
    let (hg, qg) = p.g().quadratic_model().expect("quadratic g");
    let (n, l) = (hf.nrows(), hg.nrows());
    let mut h = Array2::zeros((n + l, n + l));
    h.slice_mut(ndarray::s![..n, ..n]).assign(&hf);
    h.slice_mut(ndarray::s![n.., n..]).assign(&hg);
    let q = ndarray::concatenate![ndarray::Axis(0), qf, qg];
    (h, q)
}

/// Accelerated proximal gradient with adaptive restart for
/// `½‖Cx − d‖² + μ‖x‖₁`. Returns the minimizer estimate and its objective.
pub fn fista_lasso(
    c: ArrayView2<f64>,
    d: ArrayView1<f64>,
    mu: f64,
    iters: usize,
) -> (Array1<f64>, f64) {
    let lip = svd_norm(c).powi(2);
    let step = 1.0 / lip;
    let n = c.ncols();
    let objective = |x: &Array1<f64>| {
        let r = c.dot(x) - d;
        0.5 * r.dot(&r) + mu * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let soft = |v: f64| v.signum() * (v.abs() - step * mu).max(0.0);
    let mut x = Array1::<f64>::zeros(n);
    let mut w = x.clone();
    let mut t = 1.0_f64;
    let mut best = objective(&x);
    for _ in 0..iters {
        let grad = c.t().dot(&(c.dot(&w) - d));
        let x_next = (&w - &(grad * step)).mapv(soft);
        let val = objective(&x_next);
        if val > best {
            // restart momentum when the objective goes up
            t = 1.0;
            w = x.clone();
            continue;
        }
        best = val;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = &x_next + &((&x_next - &x) * ((t - 1.0) / t_next));
        x = x_next;
        t = t_next;
    }
    let obj = objective(&x);
    (x, obj)
}
