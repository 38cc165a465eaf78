//! Step-size curve tables and λ sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Form, ProblemInstance, SaddlePointResidual};
use crate::solvers::{run, Algorithm, IterateState, SolverConfig};
use crate::stepsize::{
    bound_he, bound_new, bound_original, general_lambda_limit, spectral_norm_default, BoundKind,
    BoundReport,
};

pub const DEFAULT_CURVE_POINTS: usize = 200;
pub const DEFAULT_CURVE_RANGE: (f64, f64) = (0.1, 100.0);

fn check_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param(name, "grid is empty"));
    }
    if let Some(v) = grid.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::param(
            name,
            format!("grid values must be positive and finite, got {v}"),
        ));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::param(
            name,
            format!("grid must be strictly increasing ({} then {})", w[0], w[1]),
        ));
    }
    Ok(())
}

/// `count` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + h * i as f64
                    }
                })
                .collect()
        }
    }
}

/// `count` points from `lo` to `hi` inclusive, evenly spaced in log scale.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = linspace(lo.ln(), hi.ln(), count)
        .into_iter()
        .map(f64::exp)
        .collect();
    // keep the endpoints exact
    if let Some(first) = grid.first_mut() {
        *first = lo;
    }
    if count > 1 {
        grid[count - 1] = hi;
    }
    grid
}

/// Parses `lo:hi:count` into a linear grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::param("grid", format!("expected `lo:hi:count`, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    let grid = linspace(lo, hi, count);
    check_grid("grid", &grid)?;
    Ok(grid)
}

pub fn default_curve_grid() -> Vec<f64> {
    logspace(
        DEFAULT_CURVE_RANGE.0,
        DEFAULT_CURVE_RANGE.1,
        DEFAULT_CURVE_POINTS,
    )
}

/// Bound values over a grid of `‖A‖`, with the ratio columns used for the
/// step-size comparison plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveTable {
    pub gamma: f64,
    pub norm_a: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub ratios: Vec<(String, Vec<f64>)>,
}

impl CurveTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .chain(&self.ratios)
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.norm_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm_a.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("norm_a");
        for (name, _) in self.columns.iter().chain(&self.ratios) {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{:?}", self.norm_a[i]);
            for (_, col) in self.columns.iter().chain(&self.ratios) {
                let _ = write!(out, ",{:?}", col[i]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn emit_stepsize_curves(grid: &[f64], gamma: f64) -> Result<CurveTable> {
    check_grid("normA grid", grid)?;
    let original: Vec<f64> = grid.iter().map(|&a| bound_original(a)).collect();
    let he: Vec<f64> = grid.iter().map(|&a| bound_he(a)).collect();
    let new = grid
        .iter()
        .map(|&a| bound_new(a, gamma))
        .collect::<Result<Vec<f64>>>()?;
    let quotient = |num: &[f64], den: &[f64]| -> Vec<f64> {
        num.iter().zip(den).map(|(n, d)| n / d).collect()
    };
    let ratios = vec![
        ("he_over_original".to_string(), quotient(&he, &original)),
        ("new_over_original".to_string(), quotient(&new, &original)),
        ("new_over_he".to_string(), quotient(&new, &he)),
    ];
    Ok(CurveTable {
        gamma,
        norm_a: grid.to_vec(),
        columns: vec![
            ("original".to_string(), original),
            ("he".to_string(), he),
            ("new".to_string(), new),
        ],
        ratios,
    })
}

/// Reached `tol` / tripped the divergence guard / neither within `max_iter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverged,
    Undecided,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    /// `λ` divided by the scheme's reference bound.
    pub ratio_to_reference: f64,
    pub verdict: Verdict,
    pub iterations: usize,
    pub residuals: Option<SaddlePointResidual>,
    /// Per-run failure (bad prox evaluation and the like); verdict is `undecided`.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub norm_a: f64,
    /// The four splitting-form bounds (absent for GPCPM3).
    pub bounds: Option<BoundReport>,
    /// The bound λ is measured against: `new` for PCPM/GPCPM1, `he` for
    /// GPCPM2, and the `τ = σ = λ` two-block limit for GPCPM3.
    pub reference_bound: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "lambda,ratio_to_reference,verdict,iterations,primal,dual_x,dual_z,objective,\
             within_original,within_shefi,within_he,within_new,error\n",
        );
        for p in &self.points {
            let _ = write!(
                out,
                "{:?},{:?},{},{}",
                p.lambda,
                p.ratio_to_reference,
                p.verdict.as_str(),
                p.iterations
            );
            match &p.residuals {
                Some(r) => {
                    let _ = write!(
                        out,
                        ",{:?},{:?},{:?},{:?}",
                        r.primal, r.dual_x, r.dual_z, r.objective
                    );
                }
                None => out.push_str(",,,,"),
            }
            for kind in BoundKind::ALL {
                match &self.bounds {
                    Some(b) => {
                        let _ = write!(out, ",{}", kind.admits(p.lambda, b.get(kind)));
                    }
                    None => out.push(','),
                }
            }
            let err = p.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(out, ",{err}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            tol: 1e-6,
            max_iter: 20_000,
            threads: None,
        }
    }
}

fn sweep_config(
    algorithm: Algorithm,
    lambda: f64,
    gamma: f64,
    s: &SweepSettings,
) -> Result<SolverConfig> {
    let cfg = match algorithm {
        Algorithm::Gpcpm3 => SolverConfig::gpcpm3(lambda, gamma, lambda, lambda)?,
        Algorithm::Pcpm => SolverConfig::pcpm(lambda)?,
        other => SolverConfig::new(other, lambda, gamma, None, None)?,
    };
    cfg.with_tol(s.tol)?.with_max_iter(s.max_iter)
}

/// Reference bound for a scheme on a given problem, and `‖A‖`.
pub fn reference_bound(
    problem: &ProblemInstance,
    algorithm: Algorithm,
    gamma: f64,
) -> Result<(f64, f64)> {
    let norm_a = spectral_norm_default(problem.a().view())?.value;
    let bound = match algorithm {
        Algorithm::Pcpm => bound_new(norm_a, 1.0)?,
        Algorithm::Gpcpm1 => bound_new(norm_a, gamma)?,
        Algorithm::Gpcpm2 => bound_he(norm_a),
        Algorithm::Gpcpm3 => {
            let b = problem.b_matrix().ok_or(Error::UnsupportedForm {
                expected: Form::General.as_str(),
                found: problem.form().as_str(),
            })?;
            let norm_b = spectral_norm_default(b.view())?.value;
            general_lambda_limit(gamma, norm_a * norm_a, norm_b * norm_b, None)?
        }
    };
    Ok((norm_a, bound))
}

/// Independent runs from the zero start, one per λ in `grid`. GPCPM3 runs
/// use `τ = σ = λ`. Results come back in grid order.
pub fn sweep_lambda(
    problem: &ProblemInstance,
    algorithm: Algorithm,
    gamma: f64,
    grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    check_grid("lambda grid", grid)?;
    let gamma = if algorithm == Algorithm::Pcpm {
        1.0
    } else {
        gamma
    };
    // fail early on configuration errors rather than once per point
    sweep_config(algorithm, grid[0], gamma, settings)?;
    if problem.form() != algorithm.form() {
        return Err(Error::UnsupportedForm {
            expected: algorithm.form().as_str(),
            found: problem.form().as_str(),
        });
    }
    let (norm_a, reference) = reference_bound(problem, algorithm, gamma)?;
    let bounds = match algorithm {
        Algorithm::Gpcpm3 => None,
        _ => Some(BoundReport::new(norm_a, gamma)?),
    };

    let one = |&lambda: &f64| -> SweepPoint {
        let outcome = sweep_config(algorithm, lambda, gamma, settings)
            .and_then(|cfg| run(problem, &cfg, IterateState::zeros(problem)));
        match outcome {
            Ok(rep) => SweepPoint {
                lambda,
                ratio_to_reference: lambda / reference,
                verdict: if rep.converged {
                    Verdict::Converged
                } else if rep.divergence_flag {
                    Verdict::Diverged
                } else {
                    Verdict::Undecided
                },
                iterations: rep.iterations,
                residuals: Some(rep.final_residuals),
                error: None,
            },
            Err(e) => SweepPoint {
                lambda,
                ratio_to_reference: lambda / reference,
                verdict: Verdict::Undecided,
                iterations: 0,
                residuals: None,
                error: Some(e.to_string()),
            },
        }
    };

    let points = match settings.threads {
        Some(1) => grid.iter().map(one).collect(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?
            .install(|| grid.par_iter().map(one).collect()),
        None => grid.par_iter().map(one).collect(),
    };

    Ok(SweepResult {
        algorithm,
        gamma,
        norm_a,
        bounds,
        reference_bound: reference,
        points,
    })
}
