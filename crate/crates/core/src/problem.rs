//! The separable program `min f(x) + g(z)` subject to `Ax = z` (splitting
//! form) or `Ax + Bz = b` (general form), plus the block view
//! `u = (x; z)`, `M = (A, −I)` used by the augmented Lagrangian oracles.

use ndarray::{s, Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::norm2;
pub use crate::prox::ProxFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    Splitting,
    General,
}

impl Form {
    pub fn as_str(self) -> &'static str {
        match self {
            Form::Splitting => "splitting",
            Form::General => "general",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Coupling {
    Splitting,
    General { b: Array2<f64>, rhs: Array1<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    f: ProxFunction,
    g: ProxFunction,
    a: Array2<f64>,
    coupling: Coupling,
}

impl ProblemInstance {
    /// `min f(x) + g(z)` s.t. `Ax = z`.
    pub fn splitting(f: ProxFunction, g: ProxFunction, a: Array2<f64>) -> Result<Self> {
        check_dim("columns of A vs dim(f)", f.dim(), a.ncols())?;
        check_dim("rows of A vs dim(g)", g.dim(), a.nrows())?;
        check_finite("A", a.iter())?;
        Ok(ProblemInstance {
            f,
            g,
            a,
            coupling: Coupling::Splitting,
        })
    }

    /// `min f(x) + g(z)` s.t. `Ax + Bz = b`.
    pub fn general(
        f: ProxFunction,
        g: ProxFunction,
        a: Array2<f64>,
        b: Array2<f64>,
        rhs: Array1<f64>,
    ) -> Result<Self> {
        check_dim("columns of A vs dim(f)", f.dim(), a.ncols())?;
        check_dim("columns of B vs dim(g)", g.dim(), b.ncols())?;
        check_dim("rows of B vs rows of A", a.nrows(), b.nrows())?;
        check_dim("length of b vs rows of A", a.nrows(), rhs.len())?;
        check_finite("A", a.iter())?;
        check_finite("B", b.iter())?;
        check_finite("b", rhs.iter())?;
        Ok(ProblemInstance {
            f,
            g,
            a,
            coupling: Coupling::General { b, rhs },
        })
    }

    /// The same program written as `Ax + (−I)z = 0`.
    pub fn to_general(&self) -> ProblemInstance {
        match &self.coupling {
            Coupling::General { .. } => self.clone(),
            Coupling::Splitting => {
                let m = self.m();
                ProblemInstance {
                    f: self.f.clone(),
                    g: self.g.clone(),
                    a: self.a.clone(),
                    coupling: Coupling::General {
                        b: -Array2::<f64>::eye(m),
                        rhs: Array1::zeros(m),
                    },
                }
            }
        }
    }

    pub fn form(&self) -> Form {
        match self.coupling {
            Coupling::Splitting => Form::Splitting,
            Coupling::General { .. } => Form::General,
        }
    }

    pub fn f(&self) -> &ProxFunction {
        &self.f
    }

    pub fn g(&self) -> &ProxFunction {
        &self.g
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b_matrix(&self) -> Option<&Array2<f64>> {
        match &self.coupling {
            Coupling::General { b, .. } => Some(b),
            Coupling::Splitting => None,
        }
    }

    pub fn rhs(&self) -> Option<&Array1<f64>> {
        match &self.coupling {
            Coupling::General { rhs, .. } => Some(rhs),
            Coupling::Splitting => None,
        }
    }

    /// Dimension of x.
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Number of constraint rows (dimension of y).
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Dimension of z (`m` in splitting form, `l` in general form).
    pub fn z_dim(&self) -> usize {
        self.g.dim()
    }

    pub fn objective(&self, x: ArrayView1<f64>, z: ArrayView1<f64>) -> f64 {
        self.f.value(x) + self.g.value(z)
    }

    /// `Ax − z` or `Ax + Bz − b`.
    pub fn constraint_residual(&self, x: ArrayView1<f64>, z: ArrayView1<f64>) -> Array1<f64> {
        let ax = self.a.dot(&x);
        match &self.coupling {
            Coupling::Splitting => ax - z,
            Coupling::General { b, rhs } => ax + &b.dot(&z) - rhs,
        }
    }

    pub(crate) fn require(&self, expected: Form) -> Result<()> {
        let found = self.form();
        if found == expected {
            Ok(())
        } else {
            Err(Error::UnsupportedForm {
                expected: expected.as_str(),
                found: found.as_str(),
            })
        }
    }

    pub(crate) fn check_point(
        &self,
        x: ArrayView1<f64>,
        z: ArrayView1<f64>,
        y: ArrayView1<f64>,
    ) -> Result<()> {
        check_dim("length of x", self.n(), x.len())?;
        check_dim("length of z", self.z_dim(), z.len())?;
        check_dim("length of y", self.m(), y.len())
    }
}

fn check_finite<'a>(what: &'static str, mut it: impl Iterator<Item = &'a f64>) -> Result<()> {
    if it.all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::param(what, "entries must be finite"))
    }
}

/// `M = (A, −I)` acting on `u = (x; z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReformulation {
    m_mat: Array2<f64>,
    n: usize,
}

impl BlockReformulation {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.m_mat
    }

    /// `n + m`, the length of `u`.
    pub fn theta_dim(&self) -> usize {
        self.m_mat.ncols()
    }

    pub fn x_dim(&self) -> usize {
        self.n
    }

    /// `M·u` for `u = (x; z)`.
    pub fn apply(&self, x: ArrayView1<f64>, z: ArrayView1<f64>) -> Array1<f64> {
        self.m_mat.dot(&stack(x, z))
    }

    /// `MᵀM = [[AᵀA, −Aᵀ], [−A, I]]`.
    pub fn gram(&self) -> Array2<f64> {
        self.m_mat.t().dot(&self.m_mat)
    }
}

pub fn build_reformulation(p: &ProblemInstance) -> Result<BlockReformulation> {
    p.require(Form::Splitting)?;
    check_dim("rows of A vs dim(g)", p.m(), p.g.dim())?;
    Ok(reformulate(p.a()))
}

pub(crate) fn reformulate(a: &Array2<f64>) -> BlockReformulation {
    let (m, n) = a.dim();
    let mut m_mat = Array2::<f64>::zeros((m, n + m));
    m_mat.slice_mut(s![.., ..n]).assign(a);
    for i in 0..m {
        m_mat[[i, n + i]] = -1.0;
    }
    BlockReformulation { m_mat, n }
}

pub(crate) fn stack(x: ArrayView1<f64>, z: ArrayView1<f64>) -> Array1<f64> {
    let mut u = Array1::zeros(x.len() + z.len());
    u.slice_mut(s![..x.len()]).assign(&x);
    u.slice_mut(s![x.len()..]).assign(&z);
    u
}

/// Prox fixed-point step used for the dual residuals.
pub const RESIDUAL_REFERENCE_STEP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddlePointResidual {
    pub primal: f64,
    pub dual_x: f64,
    pub dual_z: f64,
    pub objective: f64,
}

impl SaddlePointResidual {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual_x).max(self.dual_z)
    }
}

/// Primal feasibility plus prox fixed-point residuals of the two blocks.
///
/// `dual_x = ‖x − prox_f(x − Aᵀy, t₀)‖/t₀`, and for z the shift is `+y`
/// (splitting) or `−Bᵀy` (general), with `t₀ = 1`.
pub fn residuals(
    p: &ProblemInstance,
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> Result<SaddlePointResidual> {
    p.check_point(x, z, y)?;
    let t0 = RESIDUAL_REFERENCE_STEP;
    let primal = norm2(p.constraint_residual(x, z).view());

    let x_shift = &x - &(p.a.t().dot(&y) * t0);
    let dual_x = norm2((&x - &p.f.prox(x_shift.view(), t0)?).view()) / t0;

    let z_shift = match &p.coupling {
        Coupling::Splitting => &z + &(&y * t0),
        Coupling::General { b, .. } => &z - &(b.t().dot(&y) * t0),
    };
    let dual_z = norm2((&z - &p.g.prox(z_shift.view(), t0)?).view()) / t0;

    Ok(SaddlePointResidual {
        primal,
        dual_x,
        dual_z,
        objective: p.objective(x, z),
    })
}
