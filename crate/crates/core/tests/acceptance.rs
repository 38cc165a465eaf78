//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary (`harness = false`) so the lines
//! are always printed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use pcpmkit::diagnostics::{default_curve_grid, emit_stepsize_curves};
use pcpmkit::generate::{generate_general_with_witness, generate_problem, GeneratorSpec};
use pcpmkit::oracle::{
    build_pcpm_matrix, check_idp_admissibility, trace_pcpm_equivalence, verify_linearized_identity,
};
use pcpmkit::prox::{proj_linf_ball, prox_box, prox_l1, ProxFunction};
use pcpmkit::solvers::run;
use pcpmkit::stepsize::{
    bound_he, bound_new, general_lambda_limit, spectral_norm_default, BoundReport,
};
use pcpmkit::{Algorithm, IterateState, ProblemInstance, SolverConfig, Stepper};

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Largest λ in `[lo, hi]` with `pred(λ)` true, assuming `pred` is true at
/// `lo`, false at `hi` and changes once in between.
fn bisect(mut lo: f64, mut hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    assert!(
        pred(lo) && !pred(hi),
        "bracket does not straddle the switch"
    );
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn equivalence() -> Verdict {
    let started = Instant::now();
    let mut rng = rng(101);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=30);
        let m = rng.gen_range(2..=30);
        let p = random_quad_problem(&mut rng, n, m);
        let norm = spectral_norm_default(p.a().view()).unwrap().value;
        let lambda = rng.gen_range(0.2..0.95) * bound_new(norm, 1.0).unwrap();
        let start = random_start(&mut rng, &p);
        let trace = trace_pcpm_equivalence(&p, lambda, 200, start).unwrap();
        worst = worst.max(trace.max_deviation);
    }
    let elapsed = started.elapsed();
    verdict(
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!("max deviation {worst:.2e} over 20 instances x 200 iterations in {elapsed:.2?}"),
    )
}

fn linearized_identity() -> Verdict {
    let mut rng = rng(202);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let m = rng.gen_range(1..=40);
        let n = rng.gen_range(1..=60);
        let a = gaussian(&mut rng, m, n);
        let lambda = rng.gen_range(0.05..2.0);
        worst = worst.max(verify_linearized_identity(a.view(), lambda).unwrap());
    }
    verdict(
        worst <= 1e-13,
        format!("max entrywise gap {worst:.2e} on 50 matrices"),
    )
}

fn definiteness_boundary() -> Verdict {
    let mut rng = rng(303);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let m = rng.gen_range(2..=25);
        let n = rng.gen_range(2..=25);
        let a = gaussian(&mut rng, m, n) * rng.gen_range(0.2..3.0);
        let he = bound_he(svd_norm(a.view()));
        let switch = bisect(0.5 * he, 1.5 * he, |lambda| {
            build_pcpm_matrix(a.view(), lambda).unwrap().lambda_min() > 0.0
        });
        worst = worst.max((switch - he).abs());
    }
    verdict(
        worst <= 1e-9,
        format!("max |switch - boundHe| {worst:.2e} on 20 matrices"),
    )
}

#[allow(clippy::approx_constant)]
fn bound_values() -> Verdict {
    let r = BoundReport::new(1.0, 1.0).unwrap().bounds;
    let expected = [0.5, 0.70711, 0.70711, 0.81650];
    let got = [r.original, r.shefi, r.he, r.new];
    let values_ok = got
        .iter()
        .zip(expected)
        .all(|(g, e)| (g * 1e5).round() / 1e5 == e);
    let mut worst = 0.0_f64;
    for gamma in [0.25, 1.0, 1.6, 1.95] {
        let table = emit_stepsize_curves(&default_curve_grid(), gamma).unwrap();
        let target = (4.0 / (2.0 + gamma)).sqrt();
        for v in table.column("new_over_he").unwrap() {
            worst = worst.max((v - target).abs());
        }
    }
    verdict(
        values_ok && worst <= 1e-12,
        format!("bounds at (1, 1) = {got:.5?}; max ratio error {worst:.2e} over 200-point grids"),
    )
}

fn idp_boundary() -> Verdict {
    let mut rng = rng(404);
    let mut worst = 0.0_f64;
    for gamma in [0.5, 1.0, 1.5] {
        for _ in 0..10 {
            let m = rng.gen_range(2..=20);
            let n = rng.gen_range(2..=20);
            let a = gaussian(&mut rng, m, n) * rng.gen_range(0.2..3.0);
            let target = bound_new(svd_norm(a.view()), gamma).unwrap();
            let switch = bisect(0.5 * target, 1.5 * target, |lambda| {
                check_idp_admissibility(a.view(), lambda, gamma)
                    .unwrap()
                    .is_admissible()
            });
            worst = worst.max((switch - target).abs());
        }
    }
    verdict(
        worst <= 1e-9,
        format!("max |threshold - boundNew| {worst:.2e} on 30 cases"),
    )
}

fn lockstep(
    p: &ProblemInstance,
    q: &ProblemInstance,
    a: &SolverConfig,
    b: &SolverConfig,
    start: &IterateState,
    iters: usize,
) -> f64 {
    let mut sa = Stepper::new(p, a, start.clone()).unwrap();
    let mut sb = Stepper::new(q, b, start.clone()).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..iters {
        let x = sa.step().unwrap().clone();
        let y = sb.step().unwrap();
        worst = worst.max(x.max_abs_diff(y));
    }
    worst
}

fn reduction_lattice() -> Verdict {
    let mut rng = rng(505);
    let mut worst = [0.0_f64; 3];
    for _ in 0..10 {
        let n = rng.gen_range(2..=20);
        let m = rng.gen_range(2..=20);
        let p = random_quad_problem(&mut rng, n, m);
        let general = p.to_general();
        let norm = spectral_norm_default(p.a().view()).unwrap().value;
        let lambda = rng.gen_range(0.3..0.95) * bound_new(norm, 1.0).unwrap();
        let gamma = rng.gen_range(0.2..1.8);
        let start = random_start(&mut rng, &p);

        let pcpm = SolverConfig::pcpm(lambda).unwrap();
        let g1 = SolverConfig::gpcpm1(lambda, 1.0).unwrap();
        let g2 = SolverConfig::gpcpm2(lambda, 1.0).unwrap();
        worst[0] = worst[0].max(lockstep(&p, &p, &g1, &pcpm, &start, 50));
        worst[1] = worst[1].max(lockstep(&p, &p, &g2, &pcpm, &start, 50));

        let g1 = SolverConfig::gpcpm1(lambda, gamma).unwrap();
        let g3 = SolverConfig::gpcpm3(lambda, gamma, lambda, lambda).unwrap();
        worst[2] = worst[2].max(lockstep(&general, &p, &g3, &g1, &start, 50));
    }
    verdict(
        worst.iter().all(|w| *w <= 1e-14),
        format!(
            "max per-iterate gaps: gpcpm1->pcpm {:.2e}, gpcpm2->pcpm {:.2e}, gpcpm3->gpcpm1 {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

struct LassoRun {
    primal: f64,
    rel_gap: f64,
    converged: bool,
}

fn lasso_reference(p: &ProblemInstance) -> f64 {
    let (ProxFunction::QuadAffine(q), ProxFunction::L1(l1)) = (p.f(), p.g()) else {
        panic!("lasso generator returns quad_affine + l1");
    };
    fista_lasso(q.c().view(), q.d().view(), l1.mu(), 30_000).1
}

fn lasso_suite(algorithm: Algorithm) -> (Vec<LassoRun>, Duration) {
    let started = Instant::now();
    let mut runs = Vec::new();
    for seed in 0..5 {
        let p = generate_problem(&GeneratorSpec::lasso(100, 50, 0.1, seed)).unwrap();
        let reference = lasso_reference(&p);
        let norm = spectral_norm_default(p.a().view()).unwrap().value;
        for gamma in [1.0, 1.6] {
            let lambda = 0.99 * bound_new(norm, gamma).unwrap();
            let (problem, cfg) = match algorithm {
                Algorithm::Gpcpm3 => (
                    p.to_general(),
                    SolverConfig::gpcpm3(lambda, gamma, lambda, lambda).unwrap(),
                ),
                _ => (p.clone(), SolverConfig::gpcpm1(lambda, gamma).unwrap()),
            };
            let cfg = cfg.with_tol(1e-9).unwrap().with_max_iter(20_000).unwrap();
            let rep = run(&problem, &cfg, IterateState::zeros(&problem)).unwrap();
            runs.push(LassoRun {
                primal: rep.final_residuals.primal,
                rel_gap: (rep.final_residuals.objective - reference).abs() / reference.abs(),
                converged: rep.final_residuals.primal <= 1e-6 && rep.iterations <= 20_000,
            });
        }
    }
    (runs, started.elapsed())
}

fn summarize(runs: &[LassoRun]) -> (bool, f64, f64) {
    let primal = runs.iter().fold(0.0_f64, |m, r| m.max(r.primal));
    let gap = runs.iter().fold(0.0_f64, |m, r| m.max(r.rel_gap));
    let ok = runs.iter().all(|r| r.converged && r.rel_gap <= 1e-5);
    (ok, primal, gap)
}

fn enlarged_bound_lasso() -> Verdict {
    let (runs, elapsed) = lasso_suite(Algorithm::Gpcpm1);
    let (ok, primal, gap) = summarize(&runs);
    verdict(
        ok && elapsed < Duration::from_secs(60),
        format!(
            "{} runs at 0.99*boundNew: max primal {primal:.2e}, max relative objective gap {gap:.2e}, {elapsed:.2?}",
            runs.len()
        ),
    )
}

fn general_condition() -> Verdict {
    let mut worst = 0.0_f64;
    let mut all_converged = true;
    for seed in 0..3 {
        let w = generate_general_with_witness(&GeneratorSpec::general_two_block(40, 30, 20, seed))
            .unwrap();
        let p = &w.problem;
        let na = spectral_norm_default(p.a().view()).unwrap().value;
        let nb = spectral_norm_default(p.b_matrix().unwrap().view())
            .unwrap()
            .value;
        for gamma in [0.8, 1.5] {
            // one run with τ = σ = λ and one with unequal primal steps
            let lam = 0.99 * general_lambda_limit(gamma, na * na, nb * nb, None).unwrap();
            let (tau, sigma) = (0.5 * lam, 1.5 * lam);
            let lam2 =
                0.99 * general_lambda_limit(gamma, na * na, nb * nb, Some((tau, sigma))).unwrap();
            for cfg in [
                SolverConfig::gpcpm3(lam, gamma, lam, lam).unwrap(),
                SolverConfig::gpcpm3(lam2, gamma, tau, sigma).unwrap(),
            ] {
                let cfg = cfg.with_tol(1e-8).unwrap().with_max_iter(20_000).unwrap();
                let rep = run(p, &cfg, IterateState::zeros(p)).unwrap();
                let s = &rep.final_state;
                let r = max_abs(p.constraint_residual(s.x.view(), s.z.view()).view());
                all_converged &= rep.converged && r <= 1e-6;
                worst = worst.max(r);
            }
        }
    }
    let (runs, _) = lasso_suite(Algorithm::Gpcpm3);
    let (lasso_ok, primal, gap) = summarize(&runs);
    verdict(
        all_converged && lasso_ok,
        format!(
            "general suite max constraint residual {worst:.2e}; reduced lasso max primal {primal:.2e}, gap {gap:.2e}"
        ),
    )
}

fn prox_properties() -> Verdict {
    let mut rng = rng(909);
    let mut firm_slack = f64::NEG_INFINITY;
    let mut moreau = 0.0_f64;
    for trial in 0..1000 {
        let k = rng.gen_range(1..=12);
        let t = rng.gen_range(0.05..5.0);
        let u = gaussian_vec(&mut rng, k) * 3.0;
        let v = gaussian_vec(&mut rng, k) * 3.0;
        let mu = rng.gen_range(0.0..2.0);
        let f = match trial % 4 {
            0 => ProxFunction::l1(mu, k).unwrap(),
            1 => {
                let lo = gaussian_vec(&mut rng, k);
                let hi = &lo + &gaussian_vec(&mut rng, k).mapv(f64::abs);
                ProxFunction::boxed(lo, hi).unwrap()
            }
            2 => {
                let rows = rng.gen_range(1..=12);
                ProxFunction::quad_affine(gaussian(&mut rng, rows, k), gaussian_vec(&mut rng, rows))
                    .unwrap()
            }
            _ => ProxFunction::zero(k),
        };
        let pu = f.prox(u.view(), t).unwrap();
        let pv = f.prox(v.view(), t).unwrap();
        let dp = &pu - &pv;
        // ‖Pu − Pv‖² ≤ ⟨Pu − Pv, u − v⟩
        firm_slack = firm_slack.max(dp.dot(&dp) - dp.dot(&(&u - &v)));

        let shrunk = prox_l1(u.view(), t, mu).unwrap();
        let dual = proj_linf_ball((&u / t).view(), mu) * t;
        moreau = moreau.max(max_diff((&shrunk + &dual).view(), u.view()));
    }
    // the box prox must ignore t
    let lo = ndarray::arr1(&[-1.0, 0.0]);
    let hi = ndarray::arr1(&[1.0, 1.0]);
    let v = ndarray::arr1(&[-3.0, 5.0]);
    let box_ok = prox_box(v.view(), 0.1, lo.view(), hi.view()).unwrap()
        == prox_box(v.view(), 10.0, lo.view(), hi.view()).unwrap();
    verdict(
        firm_slack <= 1e-12 && moreau <= 1e-12 && box_ok,
        format!("1000 trials: max firm-nonexpansiveness slack {firm_slack:.2e}, max Moreau gap {moreau:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("PCPM equals proximal ALM iterate by iterate", equivalence),
        (
            "explicit and linearized proximal matrices agree",
            linearized_identity,
        ),
        (
            "definiteness of P switches at boundHe",
            definiteness_boundary,
        ),
        ("bound values and new/he ratio", bound_values),
        ("IDP witness threshold equals boundNew", idp_boundary),
        ("reduction lattice", reduction_lattice),
        (
            "lasso converges under the enlarged bound",
            enlarged_bound_lasso,
        ),
        ("two-block condition", general_condition),
        (
            "prox firm nonexpansiveness and Moreau decomposition",
            prox_properties,
        ),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {} [{}] {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
