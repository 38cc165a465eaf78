//! Proximal augmented Lagrangian oracles.
//!
//! A PCPM pass is exactly the proximal ALM step
//!
//! ```text
//! u⁺ = argmin θ(u) + ⟨y, Mu⟩ + (λ/2)‖Mu‖² + ½‖u − u^k‖²_P
//! ```
//!
//! with `P = [[(1/λ)I − λAᵀA, λAᵀ], [λA, (1/λ − λ)I]] = (1/λ)I − λMᵀM`. This
//! module builds those proximal matrices explicitly and runs a dense
//! reference proximal ALM on quadratic programs so the equivalence can be
//! checked iterate by iterate.

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{eigen_range, is_symmetric, max_abs_diff_mat, Cholesky};
use crate::problem::{reformulate, stack, Form, ProblemInstance};
use crate::solvers::{
    iterate, IterateState, Iteration, LoopSettings, RunReport, SolverConfig, Stepper,
};
use crate::stepsize::{check_gamma, idp_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    /// Block assembly `[[(1/λ)I − λAᵀA, λAᵀ], [λA, (1/λ − λ)I]]`.
    PcpmExplicit,
    /// `(1/λ)I − λMᵀM` from the block reformulation.
    LinearizedIdentity,
    /// `[[(1/τ)I − λAᵀA, −λAᵀB], [−λBᵀA, (1/σ)I − λBᵀB]]`.
    GeneralExplicit,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximalMatrix {
    matrix: Array2<f64>,
    source: MatrixSource,
    eigen_range: (f64, f64),
}

impl ProximalMatrix {
    fn with_source(matrix: Array2<f64>, source: MatrixSource) -> Result<Self> {
        let eigen_range = eigen_range(matrix.view())?;
        Ok(ProximalMatrix {
            matrix,
            source,
            eigen_range,
        })
    }

    /// Any exactly symmetric square matrix, e.g. `ηI − λMᵀM` for a general η.
    pub fn user_supplied(matrix: Array2<f64>) -> Result<Self> {
        if !is_symmetric(matrix.view()) {
            return Err(Error::param(
                "P",
                "proximal matrix must be square and exactly symmetric",
            ));
        }
        Self::with_source(matrix, MatrixSource::UserSupplied)
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn source(&self) -> MatrixSource {
        self.source
    }

    /// `(λmin, λmax)`.
    pub fn eigen_range(&self) -> (f64, f64) {
        self.eigen_range
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigen_range.0
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigen_range.0 > 0.0
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "lambda",
            format!("must be positive and finite, got {lambda}"),
        ))
    }
}

/// The PCPM proximal matrix assembled block by block.
pub fn build_pcpm_matrix(a: ArrayView2<f64>, lambda: f64) -> Result<ProximalMatrix> {
    check_lambda(lambda)?;
    let (m, n) = a.dim();
    let inv = 1.0 / lambda;
    let mut p = Array2::<f64>::zeros((n + m, n + m));
    {
        let mut tl = p.slice_mut(s![..n, ..n]);
        tl.assign(&(a.t().dot(&a) * (-lambda)));
        tl.diag_mut().mapv_inplace(|v| v + inv);
    }
    p.slice_mut(s![..n, n..]).assign(&(&a.t() * lambda));
    p.slice_mut(s![n.., ..n]).assign(&(&a * lambda));
    for i in 0..m {
        p[[n + i, n + i]] = inv - lambda;
    }
    ProximalMatrix::with_source(p, MatrixSource::PcpmExplicit)
}

/// `(1/λ)I − λMᵀM` with `M = (A, −I)`.
pub fn build_linearized_matrix(a: ArrayView2<f64>, lambda: f64) -> Result<ProximalMatrix> {
    check_lambda(lambda)?;
    let gram = reformulate(&a.to_owned()).gram();
    let mut p = gram * (-lambda);
    p.diag_mut().mapv_inplace(|v| v + 1.0 / lambda);
    ProximalMatrix::with_source(p, MatrixSource::LinearizedIdentity)
}

/// Proximal matrix of the two-block scheme with primal parameters τ, σ.
pub fn build_general_matrix(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    lambda: f64,
    tau: f64,
    sigma: f64,
) -> Result<ProximalMatrix> {
    check_lambda(lambda)?;
    for (name, v) in [("tau", tau), ("sigma", sigma)] {
        if !(v > 0.0) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    check_dim("rows of B vs rows of A", a.nrows(), b.nrows())?;
    let (n, l) = (a.ncols(), b.ncols());
    let mut p = Array2::<f64>::zeros((n + l, n + l));
    {
        let mut tl = p.slice_mut(s![..n, ..n]);
        tl.assign(&(a.t().dot(&a) * (-lambda)));
        tl.diag_mut().mapv_inplace(|v| v + 1.0 / tau);
    }
    let atb = a.t().dot(&b) * (-lambda);
    p.slice_mut(s![..n, n..]).assign(&atb);
    p.slice_mut(s![n.., ..n]).assign(&atb.t());
    {
        let mut br = p.slice_mut(s![n.., n..]);
        br.assign(&(b.t().dot(&b) * (-lambda)));
        br.diag_mut().mapv_inplace(|v| v + 1.0 / sigma);
    }
    ProximalMatrix::with_source(p, MatrixSource::GeneralExplicit)
}

/// Largest entrywise gap between the block-assembled PCPM matrix and
/// `(1/λ)I − λMᵀM`.
pub fn verify_linearized_identity(a: ArrayView2<f64>, lambda: f64) -> Result<f64> {
    let explicit = build_pcpm_matrix(a, lambda)?;
    let linearized = build_linearized_matrix(a, lambda)?;
    Ok(max_abs_diff_mat(
        explicit.matrix.view(),
        linearized.matrix.view(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub record_history: bool,
}

impl Default for AlmSettings {
    fn default() -> Self {
        AlmSettings {
            tol: 1e-8,
            max_iter: 20_000,
            record_history: false,
        }
    }
}

/// Dense proximal ALM on `min ½uᵀHu + qᵀu` s.t. `Mu = c`, stepped one
/// iteration at a time. `M = (A, −I), c = 0` in splitting form and
/// `M = (A, B), c = b` in general form.
#[derive(Debug)]
pub struct ProximalAlm<'a> {
    problem: &'a ProblemInstance,
    p: &'a ProximalMatrix,
    lambda: f64,
    gamma: f64,
    m_mat: Array2<f64>,
    c: Array1<f64>,
    /// `−q + λMᵀc`, the constant part of the right-hand side.
    rhs_const: Array1<f64>,
    system: Cholesky,
    state: IterateState,
}

impl<'a> ProximalAlm<'a> {
    pub fn new(
        problem: &'a ProblemInstance,
        p: &'a ProximalMatrix,
        lambda: f64,
        gamma: f64,
        start: IterateState,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        check_gamma(gamma)?;
        problem.check_point(start.x.view(), start.z.view(), start.y.view())?;
        let (hf, qf) = problem.f().quadratic_model().ok_or(Error::NotQuadratic {
            what: "proximal ALM oracle (f)",
            kind: problem.f().kind().as_str(),
        })?;
        let (hg, qg) = problem.g().quadratic_model().ok_or(Error::NotQuadratic {
            what: "proximal ALM oracle (g)",
            kind: problem.g().kind().as_str(),
        })?;
        let (n, l) = (problem.n(), problem.z_dim());
        check_dim("proximal matrix order", n + l, p.matrix.nrows())?;

        let (m_mat, c) = match problem.form() {
            Form::Splitting => (
                reformulate(problem.a()).matrix().clone(),
                Array1::zeros(problem.m()),
            ),
            Form::General => {
                let mut m_mat = Array2::<f64>::zeros((problem.m(), n + l));
                m_mat.slice_mut(s![.., ..n]).assign(problem.a());
                m_mat
                    .slice_mut(s![.., n..])
                    .assign(problem.b_matrix().expect("general form"));
                (m_mat, problem.rhs().expect("general form").clone())
            }
        };

        let mut h = Array2::<f64>::zeros((n + l, n + l));
        h.slice_mut(s![..n, ..n]).assign(&hf);
        h.slice_mut(s![n.., n..]).assign(&hg);
        let system = h + &(m_mat.t().dot(&m_mat) * lambda) + &p.matrix;
        let system = Cholesky::factor(system.view(), "H + λMᵀM + P")?;
        let q = stack(qf.view(), qg.view());
        let rhs_const = &(m_mat.t().dot(&c) * lambda) - &q;

        Ok(ProximalAlm {
            problem,
            p,
            lambda,
            gamma,
            m_mat,
            c,
            rhs_const,
            system,
            state: start,
        })
    }

    pub fn state(&self) -> &IterateState {
        &self.state
    }

    pub fn step(&mut self) -> Result<&IterateState> {
        let n = self.problem.n();
        let s = &self.state;
        let u = stack(s.x.view(), s.z.view());
        let rhs = &self.rhs_const - &self.m_mat.t().dot(&s.y) + &self.p.matrix.dot(&u);
        let u_next = self.system.solve(rhs.view());
        let r = self.m_mat.dot(&u_next) - &self.c;
        let y = &s.y + &(r * (self.gamma * self.lambda));
        self.state = IterateState {
            x: u_next.slice(s![..n]).to_owned(),
            z: u_next.slice(s![n..]).to_owned(),
            y,
            p: self.state.p.clone(),
            k: self.state.k + 1,
        };
        Ok(&self.state)
    }
}

impl Iteration for ProximalAlm<'_> {
    fn advance(&mut self) -> Result<()> {
        self.step().map(|_| ())
    }

    fn current(&self) -> &IterateState {
        &self.state
    }
}

/// Runs the reference proximal ALM (`y⁺ = y + γλ(Mu⁺ − c)`) to convergence.
pub fn run_proximal_alm(
    problem: &ProblemInstance,
    p: &ProximalMatrix,
    lambda: f64,
    gamma: f64,
    settings: &AlmSettings,
    start: IterateState,
) -> Result<RunReport> {
    let mut alm = ProximalAlm::new(problem, p, lambda, gamma, start)?;
    let outcome = iterate(
        problem,
        &mut alm,
        &LoopSettings {
            tol: settings.tol,
            max_iter: settings.max_iter,
            record_history: settings.record_history,
        },
    )?;
    let mut warnings = Vec::new();
    if !p.is_positive_definite() {
        warnings.push(format!(
            "proximal matrix is indefinite (lambda_min = {})",
            p.lambda_min()
        ));
    }
    Ok(RunReport::assemble(
        "proximal_alm",
        lambda,
        gamma,
        outcome,
        warnings,
        alm.state,
    ))
}

/// A certified indefiniteness factor `τ₃ ∈ ((2+γ)/4, 1)` with
/// `D = (1/λ)I − τ₃λMᵀM ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdpParams {
    pub tau3: f64,
    /// Open interval of admissible τ₃.
    pub interval: (f64, f64),
    pub d: Array2<f64>,
    pub d_min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdpAdmissibility {
    Admissible(IdpParams),
    /// No factor in `((2+γ)/4, 1)` keeps `D` positive definite.
    NoWitness {
        /// `(2+γ)/4`.
        lower: f64,
        /// `min(1, 1/(λ²‖MᵀM‖))`.
        upper: f64,
    },
}

impl IdpAdmissibility {
    pub fn is_admissible(&self) -> bool {
        matches!(self, IdpAdmissibility::Admissible(_))
    }
}

/// Searches for an indefiniteness factor τ₃ that makes the PCPM proximal
/// matrix admissible for the relaxed-dual proximal ALM.
///
/// `D ≻ 0` iff `τ₃ < 1/(λ²‖MᵀM‖)`, so the admissible set is the interval
/// `((2+γ)/4, min(1, 1/(λ²‖MᵀM‖)))`; the midpoint is returned and `D` is
/// certified by an eigensolve.
pub fn check_idp_admissibility(
    a: ArrayView2<f64>,
    lambda: f64,
    gamma: f64,
) -> Result<IdpAdmissibility> {
    check_lambda(lambda)?;
    check_gamma(gamma)?;
    let gram = reformulate(&a.to_owned()).gram();
    let (_, gram_max) = eigen_range(gram.view())?;
    let lower = idp_threshold(gamma);
    let upper = (1.0 / (lambda * lambda * gram_max)).min(1.0);
    if !(lower < upper) {
        return Ok(IdpAdmissibility::NoWitness { lower, upper });
    }
    let tau3 = 0.5 * (lower + upper);
    let mut d = gram * (-tau3 * lambda);
    d.diag_mut().mapv_inplace(|v| v + 1.0 / lambda);
    let (d_min, _) = eigen_range(d.view())?;
    if d_min > 0.0 {
        Ok(IdpAdmissibility::Admissible(IdpParams {
            tau3,
            interval: (lower, upper),
            d,
            d_min_eigenvalue: d_min,
        }))
    } else {
        Ok(IdpAdmissibility::NoWitness { lower, upper })
    }
}

/// Per-iterate agreement between PCPM and the proximal ALM with the explicit
/// PCPM proximal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceTrace {
    pub iterations: usize,
    /// Largest coordinate gap in `(x, z, y)` over all iterates.
    pub max_deviation: f64,
    /// Largest `‖(x, z, y)‖∞` seen, for judging the deviation's scale.
    pub max_magnitude: f64,
}

/// Steps PCPM and the reference proximal ALM side by side from `start` for
/// `iters` iterations. Requires a splitting-form quadratic problem.
pub fn trace_pcpm_equivalence(
    problem: &ProblemInstance,
    lambda: f64,
    iters: usize,
    start: IterateState,
) -> Result<EquivalenceTrace> {
    problem.require(Form::Splitting)?;
    let p = build_pcpm_matrix(problem.a().view(), lambda)?;
    let cfg = SolverConfig::pcpm(lambda)?;
    let mut pcpm = Stepper::new(problem, &cfg, start.clone())?;
    let mut alm = ProximalAlm::new(problem, &p, lambda, 1.0, start)?;
    let mut trace = EquivalenceTrace {
        iterations: 0,
        max_deviation: 0.0,
        max_magnitude: 0.0,
    };
    for _ in 0..iters {
        let a = pcpm.step()?;
        let b = alm.step()?;
        trace.max_deviation = trace.max_deviation.max(a.max_abs_diff(b));
        let mag = [&a.x, &a.z, &a.y]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        trace.max_magnitude = trace.max_magnitude.max(mag);
        trace.iterations += 1;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProxFunction;
    use crate::stepsize::bound_new;
    use ndarray::array;

    #[test]
    fn scalar_pcpm_matrix() {
        let p = build_pcpm_matrix(array![[1.0]].view(), 0.5).unwrap();
        assert_eq!(p.matrix(), &array![[1.5, 0.5], [0.5, 1.5]]);
        let (lo, hi) = p.eigen_range();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 2.0).abs() < 1e-15);
        assert_eq!(p.source(), MatrixSource::PcpmExplicit);
        assert_eq!(
            verify_linearized_identity(array![[1.0]].view(), 0.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn indefinite_below_new_bound() {
        let p = build_linearized_matrix(array![[1.0]].view(), 0.75).unwrap();
        let (lo, hi) = p.eigen_range();
        assert!((hi - 4.0 / 3.0).abs() < 1e-14);
        assert!((lo - (4.0 / 3.0 - 1.5)).abs() < 1e-14);
        assert!(!p.is_positive_definite());
        assert!(0.75 < bound_new(1.0, 1.0).unwrap());
    }

    #[test]
    fn zero_a_with_unit_lambda() {
        let a = Array2::<f64>::zeros((2, 3));
        let want = {
            let mut w = Array2::<f64>::zeros((5, 5));
            for i in 0..3 {
                w[[i, i]] = 1.0;
            }
            w
        };
        assert_eq!(build_pcpm_matrix(a.view(), 1.0).unwrap().matrix(), &want);
        assert_eq!(
            build_linearized_matrix(a.view(), 1.0).unwrap().matrix(),
            &want
        );
        assert_eq!(verify_linearized_identity(a.view(), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn nonpositive_lambda_rejected() {
        let a = array![[1.0]];
        assert!(build_pcpm_matrix(a.view(), 0.0).is_err());
        assert!(verify_linearized_identity(a.view(), -1.0).is_err());
        assert!(check_idp_admissibility(a.view(), 0.0, 1.0).is_err());
        assert!(check_idp_admissibility(a.view(), 0.5, 2.0).is_err());
    }

    #[test]
    fn user_supplied_must_be_symmetric() {
        assert!(ProximalMatrix::user_supplied(array![[1.0, 2.0], [0.0, 1.0]]).is_err());
        let p = ProximalMatrix::user_supplied(array![[2.0, 0.0], [0.0, -1.0]]).unwrap();
        assert_eq!(p.eigen_range(), (-1.0, 2.0));
    }

    #[test]
    fn idp_examples() {
        let a = array![[1.0]];
        match check_idp_admissibility(a.view(), 0.8, 1.0).unwrap() {
            IdpAdmissibility::Admissible(w) => {
                assert!((w.interval.0 - 0.75).abs() < 1e-15);
                assert!((w.interval.1 - 0.78125).abs() < 1e-12);
                assert!(w.tau3 > 0.75 && w.tau3 < 0.78125);
                assert!(w.d_min_eigenvalue > 0.0);
            }
            other => panic!("expected a witness, got {other:?}"),
        }
        assert!(!check_idp_admissibility(a.view(), 0.83, 1.0)
            .unwrap()
            .is_admissible());
        for gamma in [0.1, 1.0, 1.9] {
            assert!(check_idp_admissibility(a.view(), 1e-6, gamma)
                .unwrap()
                .is_admissible());
        }
    }

    #[test]
    fn non_quadratic_problem_rejected_by_alm() {
        let p = ProblemInstance::splitting(
            ProxFunction::l1(1.0, 1).unwrap(),
            ProxFunction::zero(1),
            array![[1.0]],
        )
        .unwrap();
        let pm = build_pcpm_matrix(array![[1.0]].view(), 0.5).unwrap();
        let err = ProximalAlm::new(&p, &pm, 0.5, 1.0, IterateState::zeros(&p)).unwrap_err();
        assert!(matches!(err, Error::NotQuadratic { .. }));
    }

    #[test]
    fn alm_kkt_start_is_stationary() {
        // min ½(x − 1)² + ½(z − 1)² s.t. x = z: KKT point x = z = 1, y = 0
        let p = ProblemInstance::splitting(
            ProxFunction::quad_affine(array![[1.0]], array![1.0]).unwrap(),
            ProxFunction::quad_affine(array![[1.0]], array![1.0]).unwrap(),
            array![[1.0]],
        )
        .unwrap();
        let pm = build_pcpm_matrix(array![[1.0]].view(), 0.5).unwrap();
        let start = IterateState::new(array![1.0], array![1.0], array![0.0]);
        let mut alm = ProximalAlm::new(&p, &pm, 0.5, 1.0, start.clone()).unwrap();
        for _ in 0..20 {
            alm.step().unwrap();
            assert!(alm.state().max_abs_diff(&start) < 1e-15);
        }
    }
}
