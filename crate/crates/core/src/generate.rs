//! Seeded random test problems.
//!
//! Same spec, same seed, same instance: every draw comes from one
//! `StdRng` in a fixed order.

use ndarray::{Array1, Array2};
use rand::{rngs::StdRng, Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::prox::ProxFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `½‖Cx − d‖² + μ‖z‖₁` with `Ax = z`.
    Lasso,
    /// Quadratic f and g, random A (splitting form).
    RandomQuadSplit,
    /// Quadratic f and g, `Ax + Bz = b` with `b` built from a witness.
    GeneralTwoBlock,
}

/// Constraint matrix of the lasso family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LassoCoupling {
    /// `A = I_n`, the plain lasso.
    Identity,
    /// Gaussian `l×n` analysis operator.
    Gaussian,
}

/// Dimensions by kind:
///
/// * `lasso`: `C` is `m×n`; `A` is `I_n` or Gaussian `l×n`.
/// * `random_quad_split`: `A` is `m×n`; `f` lives on `Rⁿ`, `g` on `Rᵐ`.
/// * `general_two_block`: `A` is `m×n`, `B` is `m×l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub l: usize,
    pub seed: u64,
    #[serde(default)]
    pub mu_l1: f64,
    /// Fraction of nonzero entries in random matrices.
    #[serde(default = "one")]
    pub density: f64,
    /// Entries are `N(0, scale²/rows)`.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "identity")]
    pub coupling: LassoCoupling,
}

fn one() -> f64 {
    1.0
}

fn identity() -> LassoCoupling {
    LassoCoupling::Identity
}

impl GeneratorSpec {
    fn base(kind: GeneratorKind, n: usize, m: usize, l: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            m,
            l,
            seed,
            mu_l1: 0.0,
            density: 1.0,
            scale: 1.0,
            coupling: LassoCoupling::Identity,
        }
    }

    /// `m` samples, `n` features, `A = I`.
    pub fn lasso(n: usize, m: usize, mu_l1: f64, seed: u64) -> Self {
        GeneratorSpec {
            mu_l1,
            ..Self::base(GeneratorKind::Lasso, n, m, 0, seed)
        }
    }

    pub fn random_quad_split(n: usize, m: usize, seed: u64) -> Self {
        Self::base(GeneratorKind::RandomQuadSplit, n, m, 0, seed)
    }

    pub fn general_two_block(n: usize, m: usize, l: usize, seed: u64) -> Self {
        Self::base(GeneratorKind::GeneralTwoBlock, n, m, l, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::param("dims", "n and m must be positive"));
        }
        let needs_l = self.kind == GeneratorKind::GeneralTwoBlock
            || (self.kind == GeneratorKind::Lasso && self.coupling == LassoCoupling::Gaussian);
        if needs_l && self.l == 0 {
            return Err(Error::param("l", "must be positive for this generator"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::param(
                "density",
                format!("must lie in (0, 1], got {}", self.density),
            ));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::param(
                "scale",
                format!("must be positive, got {}", self.scale),
            ));
        }
        if !(self.mu_l1 >= 0.0) || !self.mu_l1.is_finite() {
            return Err(Error::param(
                "mu_l1",
                format!("must be finite and >= 0, got {}", self.mu_l1),
            ));
        }
        Ok(())
    }
}

struct Draw {
    rng: StdRng,
    density: f64,
    scale: f64,
}

impl Draw {
    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn vector(&mut self, len: usize) -> Array1<f64> {
        Array1::from_shape_simple_fn(len, || self.normal())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        let s = self.scale / (rows as f64).sqrt();
        let mut m = Array2::zeros((rows, cols));
        for v in m.iter_mut() {
            let keep = self.density >= 1.0 || self.rng.gen::<f64>() < self.density;
            let x = self.normal();
            if keep {
                *v = s * x;
            }
        }
        m
    }

    /// `½‖Cu − d‖²` on `Rᵏ` with a well-conditioned square `C`.
    fn quadratic(&mut self, k: usize) -> Result<ProxFunction> {
        let mut c = self.matrix(k, k);
        c.diag_mut().mapv_inplace(|v| v + 1.0);
        let d = self.vector(k);
        ProxFunction::quad_affine(c, d)
    }
}

/// A generated general-form instance with the point used to build `b`.
#[derive(Debug, Clone)]
pub struct WitnessedProblem {
    pub problem: ProblemInstance,
    pub x_hat: Array1<f64>,
    pub z_hat: Array1<f64>,
}

pub fn generate_general_with_witness(spec: &GeneratorSpec) -> Result<WitnessedProblem> {
    spec.validate()?;
    if spec.kind != GeneratorKind::GeneralTwoBlock {
        return Err(Error::param(
            "kind",
            "witness only exists for general_two_block",
        ));
    }
    let mut d = Draw {
        rng: StdRng::seed_from_u64(spec.seed),
        density: spec.density,
        scale: spec.scale,
    };
    let (n, m, l) = (spec.n, spec.m, spec.l);
    let a = d.matrix(m, n);
    let b = d.matrix(m, l);
    let f = d.quadratic(n)?;
    let g = d.quadratic(l)?;
    let x_hat = d.vector(n);
    let z_hat = d.vector(l);
    let rhs = a.dot(&x_hat) + b.dot(&z_hat);
    Ok(WitnessedProblem {
        problem: ProblemInstance::general(f, g, a, b, rhs)?,
        x_hat,
        z_hat,
    })
}

pub fn generate_problem(spec: &GeneratorSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut d = Draw {
        rng: StdRng::seed_from_u64(spec.seed),
        density: spec.density,
        scale: spec.scale,
    };
    let (n, m) = (spec.n, spec.m);
    match spec.kind {
        GeneratorKind::Lasso => {
            let c = d.matrix(m, n);
            // sparse ground truth with about a tenth of the features active
            let active = (n / 10).max(1);
            let mut x_true = Array1::<f64>::zeros(n);
            for _ in 0..active {
                let i = d.rng.gen_range(0..n);
                x_true[i] = d.normal();
            }
            let noise = d.vector(m) * 0.01;
            let rhs = c.dot(&x_true) + noise;
            let a = match spec.coupling {
                LassoCoupling::Identity => Array2::eye(n),
                LassoCoupling::Gaussian => d.matrix(spec.l, n),
            };
            let g = ProxFunction::l1(spec.mu_l1, a.nrows())?;
            ProblemInstance::splitting(ProxFunction::quad_affine(c, rhs)?, g, a)
        }
        GeneratorKind::RandomQuadSplit => {
            let a = d.matrix(m, n);
            let f = d.quadratic(n)?;
            let g = d.quadratic(m)?;
            ProblemInstance::splitting(f, g, a)
        }
        GeneratorKind::GeneralTwoBlock => generate_general_with_witness(spec).map(|w| w.problem),
    }
}
