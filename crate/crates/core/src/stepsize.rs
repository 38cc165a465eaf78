//! Step-size bounds for the predictor-corrector schemes and the spectral
//! norm estimate they all depend on.
//!
//! Four conditions on λ, from most to least restrictive:
//!
//! | name       | condition                              | kind      |
//! |------------|----------------------------------------|-----------|
//! | `original` | `λ ≤ 1/(2·max(‖A‖, 1))`                | nonstrict |
//! | `shefi`    | `λ ≤ 1/(√2·max(‖A‖, 1))`               | nonstrict |
//! | `he`       | `λ < 1/√(‖A‖² + 1)`                    | strict    |
//! | `new`      | `λ < 1/√(((2+γ)/4)(‖A‖² + 1))`         | strict    |

use ndarray::{Array1, ArrayView2};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;

pub const DEFAULT_NORM_TOL: f64 = 1e-10;
pub const DEFAULT_NORM_MAX_ITER: usize = 5000;
/// Fraction of a strict bound used when a concrete λ is needed.
pub const DEFAULT_SAFETY: f64 = 0.99;
const POWER_ITERATION_SEED: u64 = 0x0005_eed0_fa11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralNorm {
    pub value: f64,
    pub iterations: usize,
    /// `false` when `max_iter` ran out before the relative residual reached `tol`.
    pub converged: bool,
}

/// Largest singular value of `a` by power iteration on `AᵀA`.
///
/// Stops when the eigen-residual `‖AᵀAv − μv‖ ≤ tol·μ`; the returned value is
/// `√μ` with `μ` the Rayleigh quotient.
pub fn spectral_norm(a: ArrayView2<f64>, tol: f64, max_iter: usize) -> Result<SpectralNorm> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::param("A", "spectral norm of an empty matrix"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let mut rng = StdRng::seed_from_u64(POWER_ITERATION_SEED);
    let mut v = Array1::from_shape_fn(n, |_| rng.gen_range(0.5..1.5));
    v /= norm2(v.view());

    let mut mu = 0.0;
    for it in 1..=max_iter.max(1) {
        let av = a.dot(&v);
        let w = a.t().dot(&av);
        mu = av.dot(&av);
        if mu == 0.0 {
            // v lies in the null space; for a random positive start that means A = 0
            // unless a cancellation happened, so confirm on the full matrix.
            if a.iter().all(|&x| x == 0.0) {
                return Ok(SpectralNorm {
                    value: 0.0,
                    iterations: it,
                    converged: true,
                });
            }
            v = Array1::from_shape_fn(n, |_| rng.gen_range(0.5..1.5));
            v /= norm2(v.view());
            continue;
        }
        let resid = norm2((&w - &(&v * mu)).view());
        if resid <= tol * mu {
            return Ok(SpectralNorm {
                value: mu.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        let wn = norm2(w.view());
        v = w / wn;
    }
    Ok(SpectralNorm {
        value: mu.sqrt(),
        iterations: max_iter,
        converged: false,
    })
}

pub fn spectral_norm_default(a: ArrayView2<f64>) -> Result<SpectralNorm> {
    spectral_norm(a, DEFAULT_NORM_TOL, DEFAULT_NORM_MAX_ITER)
}

pub fn bound_original(norm_a: f64) -> f64 {
    1.0 / (2.0 * norm_a.max(1.0))
}

pub fn bound_shefi(norm_a: f64) -> f64 {
    1.0 / (std::f64::consts::SQRT_2 * norm_a.max(1.0))
}

pub fn bound_he(norm_a: f64) -> f64 {
    1.0 / (norm_a * norm_a + 1.0).sqrt()
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 2.0 {
        Ok(())
    } else {
        Err(Error::param(
            "gamma",
            format!("must lie in the open interval (0, 2), got {gamma}"),
        ))
    }
}

/// `(2+γ)/4`, the lower end of the admissible indefiniteness factor.
pub fn idp_threshold(gamma: f64) -> f64 {
    (2.0 + gamma) / 4.0
}

pub fn bound_new(norm_a: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 / (idp_threshold(gamma) * (norm_a * norm_a + 1.0)).sqrt())
}

/// `λτ‖AᵀA‖ + λσ‖BᵀB‖ < 4/(2+γ)`.
pub fn check_general_condition(
    lambda: f64,
    tau: f64,
    sigma: f64,
    gamma: f64,
    norm_ata: f64,
    norm_btb: f64,
) -> Result<bool> {
    for (name, v) in [("lambda", lambda), ("tau", tau), ("sigma", sigma)] {
        if !(v > 0.0) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    if !(norm_ata >= 0.0) || !(norm_btb >= 0.0) {
        return Err(Error::param("norm", "operator norms must be nonnegative"));
    }
    check_gamma(gamma)?;
    Ok(lambda * tau * norm_ata + lambda * sigma * norm_btb < 4.0 / (2.0 + gamma))
}

/// Supremum of admissible λ for the general two-block scheme.
///
/// With `tau_sigma = None` the primal parameters track λ (`τ = σ = λ`) and the
/// condition is quadratic in λ; otherwise it is linear.
pub fn general_lambda_limit(
    gamma: f64,
    norm_ata: f64,
    norm_btb: f64,
    tau_sigma: Option<(f64, f64)>,
) -> Result<f64> {
    check_gamma(gamma)?;
    let budget = 4.0 / (2.0 + gamma);
    Ok(match tau_sigma {
        Some((tau, sigma)) => budget / (tau * norm_ata + sigma * norm_btb),
        None => (budget / (norm_ata + norm_btb)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    Strict,
    Nonstrict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Original,
    Shefi,
    He,
    New,
}

impl BoundKind {
    pub const ALL: [BoundKind; 4] = [
        BoundKind::Original,
        BoundKind::Shefi,
        BoundKind::He,
        BoundKind::New,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Original => "original",
            BoundKind::Shefi => "shefi",
            BoundKind::He => "he",
            BoundKind::New => "new",
        }
    }

    pub fn strictness(self) -> Strictness {
        match self {
            BoundKind::Original | BoundKind::Shefi => Strictness::Nonstrict,
            BoundKind::He | BoundKind::New => Strictness::Strict,
        }
    }

    /// True when `lambda` satisfies this bound (respecting strictness).
    pub fn admits(self, lambda: f64, bound: f64) -> bool {
        match self.strictness() {
            Strictness::Strict => lambda < bound,
            Strictness::Nonstrict => lambda <= bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub original: f64,
    pub shefi: f64,
    pub he: f64,
    pub new: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub norm_a: f64,
    pub gamma: f64,
    pub bounds: Bounds,
}

impl BoundReport {
    pub fn new(norm_a: f64, gamma: f64) -> Result<Self> {
        if !(norm_a >= 0.0) || !norm_a.is_finite() {
            return Err(Error::param(
                "norm_a",
                format!("must be finite and >= 0, got {norm_a}"),
            ));
        }
        Ok(BoundReport {
            norm_a,
            gamma,
            bounds: Bounds {
                original: bound_original(norm_a),
                shefi: bound_shefi(norm_a),
                he: bound_he(norm_a),
                new: bound_new(norm_a, gamma)?,
            },
        })
    }

    pub fn get(&self, kind: BoundKind) -> f64 {
        match kind {
            BoundKind::Original => self.bounds.original,
            BoundKind::Shefi => self.bounds.shefi,
            BoundKind::He => self.bounds.he,
            BoundKind::New => self.bounds.new,
        }
    }

    pub fn strict(&self, kind: BoundKind) -> Strictness {
        kind.strictness()
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn spectral_norm_small_cases() {
        let d = spectral_norm_default(array![[3.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert!(d.converged && close(d.value, 3.0, 1e-12));
        let r = spectral_norm_default(array![[1.0, -1.0]].view()).unwrap();
        assert!(close(r.value, 2f64.sqrt(), 1e-12));
        let z = spectral_norm_default(ndarray::Array2::zeros((3, 2)).view()).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn spectral_norm_flags_exhaustion() {
        // two nearly equal top singular values stall the iteration
        let a = array![[1.0, 0.0], [0.0, 1.0 - 1e-9]];
        let s = spectral_norm(a.view(), 1e-15, 3).unwrap();
        assert_eq!(s.iterations, 3);
        assert!(!s.converged || close(s.value, 1.0, 1e-9));
        assert!(spectral_norm(a.view(), 0.0, 10).is_err());
        assert!(spectral_norm(ndarray::Array2::zeros((0, 2)).view(), 1e-8, 10).is_err());
    }

    #[test]
    fn bound_values() {
        assert_eq!(bound_original(1.0), 0.5);
        assert_eq!(bound_original(0.5), 0.5);
        assert_eq!(bound_original(2.0), 0.25);
        assert!(close(bound_shefi(1.0), 0.70711, 5e-6));
        assert!(close(bound_shefi(0.0), 0.70711, 5e-6));
        assert!(close(bound_shefi(2.0), 0.35355, 5e-6));
        assert!(close(bound_he(1.0), 0.70711, 5e-6));
        assert_eq!(bound_he(0.0), 1.0);
        assert!(close(bound_he(2.0), 0.44721, 5e-6));
        assert!(close(bound_new(1.0, 1.0).unwrap(), 0.81650, 5e-6));
        assert!(close(
            bound_new(1.0, 1.0).unwrap(),
            1.0 / 1.5f64.sqrt(),
            1e-15
        ));
    }

    #[test]
    fn gamma_outside_open_interval_rejected() {
        for g in [0.0, 2.0, -0.5, 2.5, f64::NAN] {
            assert!(bound_new(1.0, g).is_err(), "gamma {g}");
        }
        assert!(bound_new(0.0, 1.999_999).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn new_over_he_is_constant() {
        let mut a = 1e-2;
        while a < 1e3 {
            let r = bound_new(a, 1.0).unwrap() / bound_he(a);
            assert!(close(r, 1.15470, 5e-6));
            assert!(close(r, (4.0f64 / 3.0).sqrt(), 1e-12));
            a *= 1.3;
        }
    }

    #[test]
    fn general_condition() {
        // 0.25 + 0.25 = 0.5 < 4/3
        assert!(check_general_condition(0.5, 0.5, 0.5, 1.0, 1.0, 1.0).unwrap());
        assert!(!check_general_condition(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap());
        assert!(check_general_condition(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(check_general_condition(1.0, -1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(check_general_condition(1.0, 1.0, 1.0, 2.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn general_condition_exact_boundary_is_excluded() {
        // λτa + λσb = 1·1·(0.5) + 1·1·(0.75) = 1.25 = 4/(2+1.2)
        assert_eq!(4.0 / (2.0 + 1.2), 1.25);
        assert!(!check_general_condition(1.0, 1.0, 1.0, 1.2, 0.5, 0.75).unwrap());
    }

    #[test]
    fn general_condition_reduces_to_new_bound() {
        for gamma in [0.5, 1.0, 1.5] {
            for norm_a in [0.3, 1.0, 2.5] {
                let limit = bound_new(norm_a, gamma).unwrap();
                let na = norm_a * norm_a;
                for frac in [0.5, 0.9, 0.999, 1.001, 1.2] {
                    let l = frac * limit;
                    assert_eq!(
                        check_general_condition(l, l, l, gamma, na, 1.0).unwrap(),
                        frac < 1.0,
                        "gamma {gamma} norm {norm_a} frac {frac}"
                    );
                }
                let gl = general_lambda_limit(gamma, na, 1.0, None).unwrap();
                assert!(close(gl, limit, 1e-14 * limit));
            }
        }
    }

    #[test]
    fn report_lookup_and_strictness() {
        let r = BoundReport::new(1.0, 1.0).unwrap();
        assert_eq!(r.get(BoundKind::Original), 0.5);
        assert_eq!(r.strict(BoundKind::New), Strictness::Strict);
        assert!(BoundKind::Original.admits(0.5, 0.5));
        assert!(!BoundKind::He.admits(r.bounds.he, r.bounds.he));
        assert!(BoundReport::new(-1.0, 1.0).is_err());
    }
}
