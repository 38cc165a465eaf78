//! The predictor-corrector proximal multiplier method and its three
//! generalizations, driven by one shared iteration loop.
//!
//! One PCPM pass from `(x, z, y)`:
//!
//! ```text
//! p  = y + λ(Ax − z)
//! x⁺ = prox_{λf}(x − λAᵀp)
//! z⁺ = prox_{λg}(z + λp)
//! y⁺ = y + λ(Ax⁺ − z⁺)
//! ```
//!
//! GPCPM1 scales the last step by γ. GPCPM2 takes the pass output `w̃` and
//! moves to `w − γ(w − w̃)` on the stacked `w = (x, z, y)`. GPCPM3 handles
//! `Ax + Bz = b` with separate primal parameters τ and σ.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{residuals, Form, ProblemInstance, SaddlePointResidual};
use crate::stepsize::{
    bound_he, bound_new, check_gamma, check_general_condition, spectral_norm_default,
};

/// `‖(x, z, y)‖` above which a run is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pcpm,
    Gpcpm1,
    Gpcpm2,
    Gpcpm3,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Pcpm => "pcpm",
            Algorithm::Gpcpm1 => "gpcpm1",
            Algorithm::Gpcpm2 => "gpcpm2",
            Algorithm::Gpcpm3 => "gpcpm3",
        }
    }

    pub fn form(self) -> Form {
        match self {
            Algorithm::Gpcpm3 => Form::General,
            _ => Form::Splitting,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcpm" => Ok(Algorithm::Pcpm),
            "gpcpm1" => Ok(Algorithm::Gpcpm1),
            "gpcpm2" => Ok(Algorithm::Gpcpm2),
            "gpcpm3" => Ok(Algorithm::Gpcpm3),
            other => Err(Error::param(
                "algorithm",
                format!("unknown algorithm `{other}` (expected pcpm, gpcpm1, gpcpm2 or gpcpm3)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    algorithm: Algorithm,
    lambda: f64,
    gamma: f64,
    tau: Option<f64>,
    sigma: Option<f64>,
    tol: f64,
    max_iter: usize,
    record_history: bool,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl SolverConfig {
    pub const DEFAULT_TOL: f64 = 1e-8;
    pub const DEFAULT_MAX_ITER: usize = 20_000;

    /// Checks algorithm/parameter consistency: γ is fixed to 1 for PCPM and
    /// τ, σ are accepted (and required) only for GPCPM3.
    pub fn new(
        algorithm: Algorithm,
        lambda: f64,
        gamma: f64,
        tau: Option<f64>,
        sigma: Option<f64>,
    ) -> Result<Self> {
        positive("lambda", lambda)?;
        check_gamma(gamma)?;
        if algorithm == Algorithm::Pcpm && gamma != 1.0 {
            return Err(Error::param(
                "gamma",
                "PCPM has no relaxation factor (gamma = 1)",
            ));
        }
        match (algorithm, tau, sigma) {
            (Algorithm::Gpcpm3, Some(t), Some(s)) => {
                positive("tau", t)?;
                positive("sigma", s)?;
            }
            (Algorithm::Gpcpm3, _, _) => {
                return Err(Error::param("tau/sigma", "GPCPM3 needs both tau and sigma"));
            }
            (_, None, None) => {}
            (alg, _, _) => {
                return Err(Error::param("tau/sigma", format!("not accepted by {alg}")));
            }
        }
        Ok(SolverConfig {
            algorithm,
            lambda,
            gamma,
            tau,
            sigma,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
            record_history: false,
        })
    }

    pub fn pcpm(lambda: f64) -> Result<Self> {
        Self::new(Algorithm::Pcpm, lambda, 1.0, None, None)
    }

    pub fn gpcpm1(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(Algorithm::Gpcpm1, lambda, gamma, None, None)
    }

    pub fn gpcpm2(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(Algorithm::Gpcpm2, lambda, gamma, None, None)
    }

    pub fn gpcpm3(lambda: f64, gamma: f64, tau: f64, sigma: f64) -> Result<Self> {
        Self::new(Algorithm::Gpcpm3, lambda, gamma, Some(tau), Some(sigma))
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = positive("tol", tol)?;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Result<Self> {
        if max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        self.max_iter = max_iter;
        Ok(self)
    }

    pub fn with_history(mut self, record: bool) -> Self {
        self.record_history = record;
        self
    }

    /// Same settings with a different λ (τ, σ untouched).
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = positive("lambda", lambda)?;
        Ok(self)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn record_history(&self) -> bool {
        self.record_history
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateState {
    #[serde(with = "crate::serde_arrays::array1")]
    pub x: Array1<f64>,
    #[serde(with = "crate::serde_arrays::array1")]
    pub z: Array1<f64>,
    #[serde(with = "crate::serde_arrays::array1")]
    pub y: Array1<f64>,
    /// Predictor of the last completed iteration (zero before the first).
    #[serde(with = "crate::serde_arrays::array1")]
    pub p: Array1<f64>,
    pub k: usize,
}

impl IterateState {
    pub fn new(x: Array1<f64>, z: Array1<f64>, y: Array1<f64>) -> Self {
        let m = y.len();
        IterateState {
            x,
            z,
            y,
            p: Array1::zeros(m),
            k: 0,
        }
    }

    /// `x⁰ = 0, z⁰ = 0, y⁰ = 0`.
    pub fn zeros(problem: &ProblemInstance) -> Self {
        Self::new(
            Array1::zeros(problem.n()),
            Array1::zeros(problem.z_dim()),
            Array1::zeros(problem.m()),
        )
    }

    pub fn norm(&self) -> f64 {
        let sq = |v: &Array1<f64>| v.dot(v);
        (sq(&self.x) + sq(&self.z) + sq(&self.y)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.z)
            .chain(&self.y)
            .all(|v| v.is_finite())
    }

    /// Largest coordinate difference over `(x, z, y)`.
    pub fn max_abs_diff(&self, other: &IterateState) -> f64 {
        use crate::linalg::max_abs_diff;
        max_abs_diff(self.x.view(), other.x.view())
            .max(max_abs_diff(self.z.view(), other.z.view()))
            .max(max_abs_diff(self.y.view(), other.y.view()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `pcpm`, `gpcpm1`, `gpcpm2`, `gpcpm3` or `proximal_alm`.
    pub algorithm: String,
    pub lambda: f64,
    pub gamma: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_residuals: SaddlePointResidual,
    pub objective_trace: Vec<f64>,
    pub primal_residual_trace: Vec<f64>,
    pub divergence_flag: bool,
    pub warnings: Vec<String>,
    pub final_state: IterateState,
}

/// Advances one scheme by single iterations; the building block of every run.
#[derive(Debug)]
pub struct Stepper<'a> {
    problem: &'a ProblemInstance,
    cfg: &'a SolverConfig,
    state: IterateState,
}

impl<'a> Stepper<'a> {
    pub fn new(
        problem: &'a ProblemInstance,
        cfg: &'a SolverConfig,
        start: IterateState,
    ) -> Result<Self> {
        problem.require(cfg.algorithm.form())?;
        problem.check_point(start.x.view(), start.z.view(), start.y.view())?;
        crate::error::check_dim("length of p", problem.m(), start.p.len())?;
        Ok(Stepper {
            problem,
            cfg,
            state: start,
        })
    }

    pub fn state(&self) -> &IterateState {
        &self.state
    }

    pub fn into_state(self) -> IterateState {
        self.state
    }

    pub fn step(&mut self) -> Result<&IterateState> {
        match self.cfg.algorithm {
            Algorithm::Pcpm | Algorithm::Gpcpm1 => self.step_dual_relaxed()?,
            Algorithm::Gpcpm2 => self.step_ppa_relaxed()?,
            Algorithm::Gpcpm3 => self.step_general()?,
        }
        self.state.k += 1;
        Ok(&self.state)
    }

    /// Predictor and the two parallel primal prox steps of a PCPM pass.
    fn primal_pass(&self) -> Result<(Array1<f64>, Array1<f64>, Array1<f64>)> {
        let (p, s) = (self.problem, &self.state);
        let lambda = self.cfg.lambda;
        let a = p.a();
        let pred = &s.y + &(p.constraint_residual(s.x.view(), s.z.view()) * lambda);
        let x_arg = &s.x - &(a.t().dot(&pred) * lambda);
        let z_arg = &s.z + &(&pred * lambda);
        let x = p.f().prox(x_arg.view(), lambda)?;
        let z = p.g().prox(z_arg.view(), lambda)?;
        Ok((pred, x, z))
    }

    fn step_dual_relaxed(&mut self) -> Result<()> {
        let (pred, x, z) = self.primal_pass()?;
        let r = self.problem.constraint_residual(x.view(), z.view());
        let y = &self.state.y + &(r * (self.cfg.gamma * self.cfg.lambda));
        self.state.p = pred;
        self.state.x = x;
        self.state.z = z;
        self.state.y = y;
        Ok(())
    }

    fn step_ppa_relaxed(&mut self) -> Result<()> {
        let (pred, xt, zt) = self.primal_pass()?;
        let r = self.problem.constraint_residual(xt.view(), zt.view());
        let yt = &self.state.y + &(r * self.cfg.lambda);
        let gamma = self.cfg.gamma;
        let relax = |w: &mut Array1<f64>, wt: &Array1<f64>| {
            Zip::from(w)
                .and(wt)
                .for_each(|w, &t| *w -= gamma * (*w - t));
        };
        relax(&mut self.state.x, &xt);
        relax(&mut self.state.z, &zt);
        relax(&mut self.state.y, &yt);
        self.state.p = pred;
        Ok(())
    }

    fn step_general(&mut self) -> Result<()> {
        let (p, s) = (self.problem, &self.state);
        let (lambda, gamma) = (self.cfg.lambda, self.cfg.gamma);
        let tau = self.cfg.tau.expect("validated at construction");
        let sigma = self.cfg.sigma.expect("validated at construction");
        let b = p.b_matrix().expect("general form checked in Stepper::new");
        let pred = &s.y + &(p.constraint_residual(s.x.view(), s.z.view()) * lambda);
        let x_arg = &s.x - &(p.a().t().dot(&pred) * tau);
        let z_arg = &s.z - &(b.t().dot(&pred) * sigma);
        let x = p.f().prox(x_arg.view(), tau)?;
        let z = p.g().prox(z_arg.view(), sigma)?;
        let r = p.constraint_residual(x.view(), z.view());
        let y = &s.y + &(r * (gamma * lambda));
        self.state = IterateState {
            x,
            z,
            y,
            p: pred,
            k: s.k,
        };
        Ok(())
    }
}

/// Bound checks for the configured λ; violations become warnings, not errors.
pub fn parameter_warnings(problem: &ProblemInstance, cfg: &SolverConfig) -> Result<Vec<String>> {
    problem.require(cfg.algorithm.form())?;
    let mut warnings = Vec::new();
    let norm = spectral_norm_default(problem.a().view())?;
    if !norm.converged {
        warnings.push(format!(
            "spectral norm of A did not converge in {} iterations; bound checks use {}",
            norm.iterations, norm.value
        ));
    }
    let lambda = cfg.lambda;
    match cfg.algorithm {
        Algorithm::Pcpm | Algorithm::Gpcpm1 => {
            let bound = bound_new(norm.value, cfg.gamma)?;
            if !(lambda < bound) {
                warnings.push(format!(
                    "lambda = {lambda} violates the step-size bound {bound} (gamma = {})",
                    cfg.gamma
                ));
            }
        }
        Algorithm::Gpcpm2 => {
            let bound = bound_he(norm.value);
            if !(lambda < bound) {
                warnings.push(format!(
                    "lambda = {lambda} leaves the positive-definite proximal regime (bound {bound})"
                ));
            }
        }
        Algorithm::Gpcpm3 => {
            let b = problem.b_matrix().expect("general form");
            let nb = spectral_norm_default(b.view())?;
            let (tau, sigma) = (cfg.tau.unwrap_or(lambda), cfg.sigma.unwrap_or(lambda));
            let ata = norm.value * norm.value;
            let btb = nb.value * nb.value;
            if !check_general_condition(lambda, tau, sigma, cfg.gamma, ata, btb)? {
                warnings.push(format!(
                    "lambda*tau*|A'A| + lambda*sigma*|B'B| = {} is not below 4/(2+gamma) = {}",
                    lambda * tau * ata + lambda * sigma * btb,
                    4.0 / (2.0 + cfg.gamma)
                ));
            }
        }
    }
    Ok(warnings)
}

/// One scheme seen by the shared iteration loop.
pub(crate) trait Iteration {
    fn advance(&mut self) -> Result<()>;
    fn current(&self) -> &IterateState;
}

impl Iteration for Stepper<'_> {
    fn advance(&mut self) -> Result<()> {
        self.step().map(|_| ())
    }

    fn current(&self) -> &IterateState {
        &self.state
    }
}

pub(crate) struct LoopSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub record_history: bool,
}

pub(crate) struct LoopOutcome {
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub last: SaddlePointResidual,
    pub objective_trace: Vec<f64>,
    pub primal_residual_trace: Vec<f64>,
}

/// Iterate until `max(primal, dual_x, dual_z) ≤ tol`, the divergence guard
/// trips, or `max_iter` is spent.
pub(crate) fn iterate<I: Iteration>(
    problem: &ProblemInstance,
    it: &mut I,
    settings: &LoopSettings,
) -> Result<LoopOutcome> {
    let cap = if settings.record_history {
        settings.max_iter.min(1 << 16)
    } else {
        0
    };
    let mut out = LoopOutcome {
        converged: false,
        diverged: false,
        iterations: 0,
        last: SaddlePointResidual {
            primal: f64::NAN,
            dual_x: f64::NAN,
            dual_z: f64::NAN,
            objective: f64::NAN,
        },
        objective_trace: Vec::with_capacity(cap),
        primal_residual_trace: Vec::with_capacity(cap),
    };
    while out.iterations < settings.max_iter {
        it.advance()?;
        out.iterations += 1;
        let s = it.current();
        out.diverged = !s.is_finite() || s.norm() > DIVERGENCE_GUARD;
        let res = residuals(problem, s.x.view(), s.z.view(), s.y.view())?;
        if settings.record_history {
            out.objective_trace.push(res.objective);
            out.primal_residual_trace.push(res.primal);
        }
        out.last = res;
        if out.diverged {
            break;
        }
        if res.max() <= settings.tol {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

impl RunReport {
    pub(crate) fn assemble(
        algorithm: &str,
        lambda: f64,
        gamma: f64,
        outcome: LoopOutcome,
        warnings: Vec<String>,
        final_state: IterateState,
    ) -> Self {
        RunReport {
            algorithm: algorithm.to_string(),
            lambda,
            gamma,
            converged: outcome.converged,
            iterations: outcome.iterations,
            final_residuals: outcome.last,
            objective_trace: outcome.objective_trace,
            primal_residual_trace: outcome.primal_residual_trace,
            divergence_flag: outcome.diverged,
            warnings,
            final_state,
        }
    }
}

fn drive(problem: &ProblemInstance, cfg: &SolverConfig, start: IterateState) -> Result<RunReport> {
    let mut stepper = Stepper::new(problem, cfg, start)?;
    let warnings = parameter_warnings(problem, cfg)?;
    let settings = LoopSettings {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        record_history: cfg.record_history,
    };
    let outcome = iterate(problem, &mut stepper, &settings)?;
    Ok(RunReport::assemble(
        cfg.algorithm.as_str(),
        cfg.lambda,
        cfg.gamma,
        outcome,
        warnings,
        stepper.into_state(),
    ))
}

fn expect_algorithm(cfg: &SolverConfig, want: Algorithm) -> Result<()> {
    if cfg.algorithm == want {
        Ok(())
    } else {
        Err(Error::param(
            "algorithm",
            format!("configuration is for {}, not {want}", cfg.algorithm),
        ))
    }
}

pub fn run_pcpm(p: &ProblemInstance, cfg: &SolverConfig, start: IterateState) -> Result<RunReport> {
    expect_algorithm(cfg, Algorithm::Pcpm)?;
    drive(p, cfg, start)
}

pub fn run_gpcpm1(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    start: IterateState,
) -> Result<RunReport> {
    expect_algorithm(cfg, Algorithm::Gpcpm1)?;
    drive(p, cfg, start)
}

pub fn run_gpcpm2(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    start: IterateState,
) -> Result<RunReport> {
    expect_algorithm(cfg, Algorithm::Gpcpm2)?;
    drive(p, cfg, start)
}

pub fn run_gpcpm3(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    start: IterateState,
) -> Result<RunReport> {
    expect_algorithm(cfg, Algorithm::Gpcpm3)?;
    drive(p, cfg, start)
}

/// Runs whichever scheme `cfg` names.
pub fn run(p: &ProblemInstance, cfg: &SolverConfig, start: IterateState) -> Result<RunReport> {
    drive(p, cfg, start)
}
