//! Closed-form proximal operators.
//!
//! Every prox here uses the penalty `(1/(2t))‖u − v‖²`, so a solver with
//! proximal parameter λ passes `t = λ` unchanged.

use std::fmt;
use std::sync::{Arc, Mutex};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Cholesky;

fn check_step(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "t",
            format!("prox step must be positive and finite, got {t}"),
        ))
    }
}

/// Soft threshold `sign(vᵢ)·max(|vᵢ| − tμ, 0)`.
pub fn prox_l1(v: ArrayView1<f64>, t: f64, mu: f64) -> Result<Array1<f64>> {
    check_step(t)?;
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::param(
            "mu",
            format!("l1 weight must be finite and >= 0, got {mu}"),
        ));
    }
    let k = t * mu;
    Ok(v.mapv(|vi| vi.signum() * (vi.abs() - k).max(0.0)))
}

/// Projection onto `{u : ‖u‖∞ ≤ radius}`.
pub fn proj_linf_ball(v: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    v.mapv(|vi| vi.clamp(-radius, radius))
}

/// `(I + t·CᵀC)⁻¹ (v + t·Cᵀd)`, the prox of `½‖Cu − d‖²`.
pub fn prox_quad_affine(
    v: ArrayView1<f64>,
    t: f64,
    c: ArrayView2<f64>,
    d: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_step(t)?;
    check_dim(
        "quad_affine: columns of C vs length of v",
        c.ncols(),
        v.len(),
    )?;
    check_dim("quad_affine: rows of C vs length of d", c.nrows(), d.len())?;
    let system = shifted_gram(c, t);
    let chol = Cholesky::factor(system.view(), "I + t·CᵀC")?;
    let rhs = &v + &(c.t().dot(&d) * t);
    Ok(chol.solve(rhs.view()))
}

fn shifted_gram(c: ArrayView2<f64>, t: f64) -> Array2<f64> {
    let mut m = c.t().dot(&c) * t;
    m.diag_mut().mapv_inplace(|x| x + 1.0);
    m
}

/// Componentwise clamp into `[lo, hi]`; the step `t` only has to be valid.
pub fn prox_box(
    v: ArrayView1<f64>,
    t: f64,
    lo: ArrayView1<f64>,
    hi: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_step(t)?;
    check_dim("box: length of lo vs v", v.len(), lo.len())?;
    check_dim("box: length of hi vs v", v.len(), hi.len())?;
    if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i])) {
        return Err(Error::param(
            "box",
            format!("lo[{i}] = {} exceeds hi[{i}] = {}", lo[i], hi[i]),
        ));
    }
    let mut out = v.to_owned();
    Zip::from(&mut out)
        .and(&lo)
        .and(&hi)
        .for_each(|u, &l, &h| *u = u.clamp(l, h));
    Ok(out)
}

/// User-provided convex function, exposed only through value and prox.
pub trait ProxOperator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, v: ArrayView1<f64>) -> f64;
    /// `argmin_u f(u) + (1/(2t))‖u − v‖²`; `t > 0` is checked by the caller.
    fn prox(&self, v: ArrayView1<f64>, t: f64) -> Array1<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    Zero,
    L1,
    QuadAffine,
    Box,
    Custom,
}

impl ProxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProxKind::Zero => "zero",
            ProxKind::L1 => "l1",
            ProxKind::QuadAffine => "quad_affine",
            ProxKind::Box => "box",
            ProxKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ProxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Norm {
    mu: f64,
    dim: usize,
}

impl L1Norm {
    pub fn new(mu: f64, dim: usize) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::param(
                "mu",
                format!("l1 weight must be finite and >= 0, got {mu}"),
            ));
        }
        Ok(L1Norm { mu, dim })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxIndicator {
    lo: Array1<f64>,
    hi: Array1<f64>,
}

impl BoxIndicator {
    pub fn new(lo: Array1<f64>, hi: Array1<f64>) -> Result<Self> {
        check_dim("box: length of hi vs lo", lo.len(), hi.len())?;
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::param(
                    "box",
                    format!("bounds at index {i} are not finite"),
                ));
            }
            if lo[i] > hi[i] {
                return Err(Error::param(
                    "box",
                    format!("lo[{i}] = {} exceeds hi[{i}] = {}", lo[i], hi[i]),
                ));
            }
        }
        Ok(BoxIndicator { lo, hi })
    }

    pub fn lo(&self) -> &Array1<f64> {
        &self.lo
    }

    pub fn hi(&self) -> &Array1<f64> {
        &self.hi
    }
}

/// Cached factorizations of `I + t·CᵀC`, keyed by the bits of `t`.
const FACTOR_CACHE_SLOTS: usize = 4;

#[derive(Debug)]
struct QuadAffineData {
    c: Array2<f64>,
    d: Array1<f64>,
    gram: Array2<f64>,
    ctd: Array1<f64>,
    factors: Mutex<Vec<(u64, Arc<Cholesky>)>>,
}

/// `½‖Cu − d‖²`.
#[derive(Debug, Clone)]
pub struct QuadAffine(Arc<QuadAffineData>);

impl QuadAffine {
    pub fn new(c: Array2<f64>, d: Array1<f64>) -> Result<Self> {
        check_dim("quad_affine: rows of C vs length of d", c.nrows(), d.len())?;
        if c.iter().chain(d.iter()).any(|x| !x.is_finite()) {
            return Err(Error::param("quad_affine", "C and d must be finite"));
        }
        let gram = c.t().dot(&c);
        let ctd = c.t().dot(&d);
        Ok(QuadAffine(Arc::new(QuadAffineData {
            c,
            d,
            gram,
            ctd,
            factors: Mutex::new(Vec::new()),
        })))
    }

    pub fn c(&self) -> &Array2<f64> {
        &self.0.c
    }

    pub fn d(&self) -> &Array1<f64> {
        &self.0.d
    }

    /// Hessian `CᵀC`.
    pub fn gram(&self) -> &Array2<f64> {
        &self.0.gram
    }

    /// `Cᵀd`; the gradient is `CᵀC u − Cᵀd`.
    pub fn ctd(&self) -> &Array1<f64> {
        &self.0.ctd
    }

    pub fn dim(&self) -> usize {
        self.0.c.ncols()
    }

    pub fn value(&self, v: ArrayView1<f64>) -> f64 {
        let r = self.0.c.dot(&v) - &self.0.d;
        0.5 * r.dot(&r)
    }

    fn factor_for(&self, t: f64) -> Result<Arc<Cholesky>> {
        let key = t.to_bits();
        let mut cache = self.0.factors.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((_, f)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(Arc::clone(f));
        }
        let mut system = &self.0.gram * t;
        system.diag_mut().mapv_inplace(|x| x + 1.0);
        let f = Arc::new(Cholesky::factor(system.view(), "I + t·CᵀC")?);
        if cache.len() == FACTOR_CACHE_SLOTS {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&f)));
        Ok(f)
    }

    pub fn prox(&self, v: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
        check_step(t)?;
        check_dim("quad_affine: length of v", self.dim(), v.len())?;
        let f = self.factor_for(t)?;
        let rhs = &v + &(&self.0.ctd * t);
        Ok(f.solve(rhs.view()))
    }
}

impl PartialEq for QuadAffine {
    fn eq(&self, other: &Self) -> bool {
        self.0.c == other.0.c && self.0.d == other.0.d
    }
}

/// A closed proper convex function reachable only through `value` and `prox`.
#[derive(Debug, Clone)]
pub enum ProxFunction {
    Zero { dim: usize },
    L1(L1Norm),
    QuadAffine(QuadAffine),
    Box(BoxIndicator),
    Custom(Arc<dyn ProxOperator>),
}

impl ProxFunction {
    pub fn zero(dim: usize) -> Self {
        ProxFunction::Zero { dim }
    }

    pub fn l1(mu: f64, dim: usize) -> Result<Self> {
        L1Norm::new(mu, dim).map(ProxFunction::L1)
    }

    pub fn quad_affine(c: Array2<f64>, d: Array1<f64>) -> Result<Self> {
        QuadAffine::new(c, d).map(ProxFunction::QuadAffine)
    }

    pub fn boxed(lo: Array1<f64>, hi: Array1<f64>) -> Result<Self> {
        BoxIndicator::new(lo, hi).map(ProxFunction::Box)
    }

    pub fn custom(op: Arc<dyn ProxOperator>) -> Self {
        ProxFunction::Custom(op)
    }

    pub fn kind(&self) -> ProxKind {
        match self {
            ProxFunction::Zero { .. } => ProxKind::Zero,
            ProxFunction::L1(_) => ProxKind::L1,
            ProxFunction::QuadAffine(_) => ProxKind::QuadAffine,
            ProxFunction::Box(_) => ProxKind::Box,
            ProxFunction::Custom(_) => ProxKind::Custom,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProxFunction::Zero { dim } => *dim,
            ProxFunction::L1(l) => l.dim,
            ProxFunction::QuadAffine(q) => q.dim(),
            ProxFunction::Box(b) => b.lo.len(),
            ProxFunction::Custom(op) => op.dim(),
        }
    }

    /// Extended-real value; indicators return `+∞` off their domain.
    pub fn value(&self, v: ArrayView1<f64>) -> f64 {
        match self {
            ProxFunction::Zero { .. } => 0.0,
            ProxFunction::L1(l) => l.mu * v.iter().map(|x| x.abs()).sum::<f64>(),
            ProxFunction::QuadAffine(q) => q.value(v),
            ProxFunction::Box(b) => {
                let inside = v
                    .iter()
                    .zip(b.lo.iter().zip(b.hi.iter()))
                    .all(|(x, (l, h))| l <= x && x <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::Custom(op) => op.value(v),
        }
    }

    pub fn prox(&self, v: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
        check_step(t)?;
        check_dim("prox argument length", self.dim(), v.len())?;
        match self {
            ProxFunction::Zero { .. } => Ok(v.to_owned()),
            ProxFunction::L1(l) => prox_l1(v, t, l.mu),
            ProxFunction::QuadAffine(q) => q.prox(v, t),
            ProxFunction::Box(b) => prox_box(v, t, b.lo.view(), b.hi.view()),
            ProxFunction::Custom(op) => Ok(op.prox(v, t)),
        }
    }

    /// `(H, q)` with `f(u) = ½uᵀHu + qᵀu + const`, when the function is quadratic.
    pub fn quadratic_model(&self) -> Option<(Array2<f64>, Array1<f64>)> {
        match self {
            ProxFunction::Zero { dim } => Some((Array2::zeros((*dim, *dim)), Array1::zeros(*dim))),
            ProxFunction::QuadAffine(q) => Some((q.gram().clone(), -q.ctd())),
            _ => None,
        }
    }
}

impl PartialEq for ProxFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ProxFunction::Zero { dim: a }, ProxFunction::Zero { dim: b }) => a == b,
            (ProxFunction::L1(a), ProxFunction::L1(b)) => a == b,
            (ProxFunction::QuadAffine(a), ProxFunction::QuadAffine(b)) => a == b,
            (ProxFunction::Box(a), ProxFunction::Box(b)) => a == b,
            (ProxFunction::Custom(a), ProxFunction::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}
