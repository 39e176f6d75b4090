//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use blockjacobi::coeffs::{CoefficientFamily, ScalarWeight, SeriesVerdict, WeightKind};
use blockjacobi::commutator::{c_limit, check_growth, check_log_envelope, weighted_conditions, AlphaStrategy};
use blockjacobi::opcore::{op_norm, Operator, DEFAULT_DEFINITENESS_EPS};
use blockjacobi::pipeline::fixture;
use blockjacobi::recurrence::propagate;
use blockjacobi::sampling::unit_sphere_samples;
use blockjacobi::turan::{
    asymptotic_band, christoffel_limit, exact_asymptotics, extract_periodic_limits, f_matrix, indeterminacy_probe,
    lambda_scan, principal_minors, q_scan, turan_convergence, IndeterminacyVerdict, ScanSettings, Sign,
    DEFAULT_BURN_IN,
};
use common::checks::{Check, BOUNDS, IDENTITIES};
use common::*;
use num_complex::Complex64;
use rand::Rng;

type Outcome = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within_time(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    if secs < limit_s {
        Ok(format!("{detail}; {secs:.2} s"))
    } else {
        Err(format!("{detail}; runtime {secs:.2} s exceeds {limit_s} s"))
    }
}

fn family_of(name: &str) -> (CoefficientFamily, usize) {
    let config = fixture(name).expect("built-in fixture");
    (config.family.build().expect("fixture family builds"), config.horizon)
}

fn constant_family() -> CoefficientFamily {
    CoefficientFamily::constant(x_matrix(), y_matrix()).unwrap()
}

/// Λ endpoints of the constant family.
fn lambda_endpoints() -> Outcome {
    let start = Instant::now();
    let lim = extract_periodic_limits(&constant_family(), 1, 200).map_err(fail)?;
    let set = lambda_scan(&lim, (-5.0, 10.0), 301, DEFAULT_DEFINITENESS_EPS).map_err(fail)?;
    let elapsed = start.elapsed();
    let [iv] = set.intervals.as_slice() else {
        return Err(format!("expected one interval, got {:?}", set.intervals));
    };
    let (lo, hi) = ((-3.0 + 13f64.sqrt()) / 2.0, (9.0 - 37f64.sqrt()) / 2.0);
    let err = (iv.lo - lo).abs().max((iv.hi - hi).abs());
    let detail = format!("({:.9}, {:.9}), max endpoint error {err:.1e}", iv.lo, iv.hi);
    if iv.sign != Sign::Positive || err > 1e-6 {
        return Err(detail);
    }
    within_time(elapsed, 1.0, detail)
}

/// Principal minors of ‖a‖F(λ) against the printed polynomials.
fn minor_polynomials() -> Outcome {
    let lim = extract_periodic_limits(&constant_family(), 1, 200).map_err(fail)?;
    let norm = op_norm(&x_matrix());
    let minors = |l: f64| -> Result<Vec<f64>, String> {
        principal_minors(&f_matrix(&lim, l).map_err(fail)?.scale_real(norm).into_operator()).map_err(fail)
    };
    let printed = |l: f64| {
        [
            1.0,
            1.0,
            -0.5 * l * l + 1.5 * l - 0.25,
            l.powi(4) / 16.0 - 3.0 * l.powi(3) / 8.0 - 17.0 * l * l / 16.0 + 21.0 * l / 8.0 - 11.0 / 16.0,
        ]
    };
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let l: f64 = r.random_range(-5.0..10.0);
        for (m, p) in minors(l)?.iter().zip(printed(l)) {
            worst = worst.max((m - p).abs());
        }
    }
    let at_one = minors(1.0)?;
    let expected = [1.0, 1.0, 0.75, 0.5625];
    let one_err = at_one.iter().zip(expected).map(|(m, e)| (m - e).abs()).fold(0.0, f64::max);
    let detail = format!("max deviation {worst:.1e} over 20 λ; at λ = 1: {at_one:?}");
    if worst <= 1e-9 && one_err <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Positivity region in q for the unbounded family.
fn q_band() -> Outcome {
    let (fam, horizon) = family_of("paper-unbounded");
    let lim = extract_periodic_limits(&fam, 1, horizon).map_err(fail)?;
    lim.require_converged().map_err(fail)?;
    let set = q_scan(&lim, 0.5, 0.0, (-1.5, 1.5), 301, DEFAULT_DEFINITENESS_EPS).map_err(fail)?;
    let [iv] = set.intervals.as_slice() else {
        return Err(format!("expected one interval, got {:?}", set.intervals));
    };
    let edge = 3.0 - 5f64.sqrt();
    let err = (iv.lo + edge).abs().max((iv.hi - edge).abs());
    let detail = format!("({:.7}, {:.7}), max edge error {err:.1e}", iv.lo, iv.hi);
    if iv.sign == Sign::Positive && err <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_alphas(count: usize, seed: u64) -> Vec<blockjacobi::opcore::Vector> {
    unit_sphere_samples(4, count, seed)
}

/// Two-sided band of the weighted norms at λ = 1, stable under doubling the horizon.
fn band_stability() -> Outcome {
    let fam = constant_family();
    let alphas = random_alphas(20, 0);
    let start = Instant::now();
    let short = asymptotic_band(&fam, c(1.0, 0.0), &alphas, 5000, DEFAULT_BURN_IN).map_err(fail)?;
    let elapsed = start.elapsed();
    let long = asymptotic_band(&fam, c(1.0, 0.0), &alphas, 10_000, DEFAULT_BURN_IN).map_err(fail)?;
    let change = (long.ratio / short.ratio - 1.0).abs();
    let detail = format!(
        "c1 = {:.4}, c2 = {:.4}, ratio {:.4} (horizon 5000) vs {:.4} (10000), change {:.2}%",
        short.c1,
        short.c2,
        short.ratio,
        long.ratio,
        100.0 * change
    );
    if !(short.ratio.is_finite() && long.ratio.is_finite() && short.c1 > 0.0 && change < 0.05) {
        return Err(detail);
    }
    within_time(elapsed, 5.0, detail)
}

/// Turán determinants converge, with limits bounded away from zero over the sample.
fn turan_limits() -> Outcome {
    let alphas = random_alphas(20, 0);
    let conv =
        turan_convergence(&constant_family(), 1, c(1.0, 0.0), &alphas, 5000, DEFAULT_BURN_IN).map_err(fail)?;
    let worst = conv.limits.iter().map(|l| l.relative_residual).fold(0.0, f64::max);
    let same_sign = conv.limits.iter().all(|l| l.g > 0.0) || conv.limits.iter().all(|l| l.g < 0.0);
    let spread = conv.min_abs_g / conv.max_abs_g;
    let detail = format!(
        "worst last-decade oscillation {worst:.1e}·|g|, |g| ∈ [{:.4}, {:.4}]",
        conv.min_abs_g, conv.max_abs_g
    );
    if conv.all_converged && worst < 1e-6 && same_sign && spread >= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn randomized(suite: &[(&str, Check)], instances: u64) -> Outcome {
    let mut failures = Vec::new();
    for (name, check) in suite {
        for seed in 0..instances {
            let dim = 1 + (seed % 3) as usize;
            if let Err(e) = check(seed, dim) {
                failures.push(format!("{name} (seed {seed}, d = {dim}): {e}"));
            }
        }
    }
    let detail = format!("{} checks × {instances} instances, d ∈ {{1, 2, 3}}", suite.len());
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {} failures, first: {}", failures.len(), failures[0]))
    }
}

/// Complete indeterminacy for geometrically growing coefficients.
fn indeterminacy() -> Outcome {
    let fam = CoefficientFamily::scaled_periodic(
        ScalarWeight::new(WeightKind::Geometric { ratio: 2.0 }),
        ScalarWeight::constant(0.0),
        vec![x_matrix()],
        vec![Operator::zeros(2)],
    )
    .map_err(fail)?;
    let zs = [c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0), c(1.0, 1.0)];
    let start = Instant::now();
    let verdict = indeterminacy_probe(&fam, 1, &zs, 200, ScanSettings::default()).map_err(fail)?;
    let elapsed = start.elapsed();
    let ev = verdict.evidence();
    let expected_sum = 2.0 / op_norm(&x_matrix());
    let sum_err = (ev.carleman.partial_sum - expected_sum).abs();
    let dims: Vec<usize> = ev.samples.iter().map(|s| s.solution_dimension).collect();
    let detail = format!(
        "{}; Carleman sum {:.12} (expected {expected_sum:.12}), solution dimensions {dims:?}",
        verdict.label(),
        ev.carleman.partial_sum
    );
    let ok = matches!(verdict, IndeterminacyVerdict::CompleteIndeterminate(_))
        && ev.carleman.verdict == SeriesVerdict::Converges
        && sum_err <= 1e-9
        && ev.samples.len() == zs.len()
        && ev.samples.iter().all(|s| s.all_square_summable && s.solution_dimension == 2);
    if !ok {
        return Err(detail);
    }
    within_time(elapsed, 2.0, detail)
}

/// Exact asymptotics and the Christoffel-type limit for √(n+1) growth.
fn exact_and_christoffel() -> Outcome {
    let fam = CoefficientFamily::scaled_periodic(
        ScalarWeight::power(0.5, 1.0),
        ScalarWeight::constant(0.0),
        vec![x_matrix()],
        vec![Operator::zeros(2)],
    )
    .map_err(fail)?;
    let horizon = 100_000;
    let alphas = random_alphas(3, 9);
    let start = Instant::now();
    let lim = extract_periodic_limits(&fam, 1, horizon).map_err(fail)?;
    let exact = exact_asymptotics(&fam, &lim, c(0.0, 0.0), &alphas, horizon).map_err(fail)?;
    let mut christoffel_err = 0.0f64;
    for (alpha, sample) in alphas.iter().zip(&exact.samples) {
        let traj = propagate(&fam, c(0.0, 0.0), alpha, horizon).map_err(fail)?;
        let report = christoffel_limit(&fam, &exact.c, &traj).map_err(fail)?;
        christoffel_err = christoffel_err.max((report.limit / (sample.g / 2.0) - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "‖C − C*‖ = {:.1e}, weighted trace vs g: {:.2e} relative, Christoffel vs g/2: {:.2e} relative",
        exact.c_deviation, exact.max_relative_difference, christoffel_err
    );
    if !(exact.c_hermitian && exact.max_relative_difference < 0.01 && christoffel_err < 0.02) {
        return Err(detail);
    }
    within_time(elapsed, 30.0, detail)
}

/// Hypothesis checkers on the two growth examples and their counter-families.
fn hypothesis_checkers() -> Outcome {
    let mut problems = Vec::new();
    let mut expect = |ok: bool, what: &str| {
        if !ok {
            problems.push(what.to_string());
        }
    };

    let (block, block_horizon) = family_of("paper-blockrepeat");
    let growth = check_growth(&block, block_horizon).map_err(fail)?;
    expect(growth.all_hold, "growth checker rejects the block-repeated family");
    let evidence = [&growth.positivity_defect, &growth.commutator_defect, &growth.carleman_squared];
    expect(evidence.iter().all(|s| s.series.partial_sum.is_finite()), "growth report lacks partial sums");
    let an = weighted_conditions(&block, &AlphaStrategy::AnWeights, block_horizon).map_err(fail)?;
    expect(an.all_hold, "weighted conditions fail for the block-repeated family");

    let (logw, log_horizon) = family_of("paper-logweight");
    let envelope = check_log_envelope(&logw, 1, 3, log_horizon).map_err(fail)?;
    expect(envelope.all_hold, "log-envelope checker rejects the log-weight family");
    let strategy = AlphaStrategy::LogWeights { k: 1, n_start: 3 };
    let weighted = weighted_conditions(&logw, &strategy, log_horizon).map_err(fail)?;
    expect(weighted.all_hold, "weighted conditions fail for the log-weight family");
    for lambda in [-1.0, 0.0, 1.0] {
        let limit = c_limit(&logw, &strategy, lambda, log_horizon).map_err(fail)?;
        let dev = limit.value.max_abs_diff(&Operator::identity(4));
        expect(limit.min_eig > 0.0 && dev < 1e-2, &format!("C(λ = {lambda}) is not ≈ Id (deviation {dev:.1e})"));
    }

    // Counter-families.
    let constant = CoefficientFamily::constant(x_matrix(), y_matrix()).map_err(fail)?;
    let rep = check_growth(&constant, 1000).map_err(fail)?;
    expect(!rep.all_hold && !rep.inverse_to_zero.holds, "growth checker accepts bounded coefficients");
    let linear_b = CoefficientFamily::scaled_periodic(
        ScalarWeight::power(1.0, 1.0),
        ScalarWeight::power(1.0, 1.0),
        vec![Operator::identity(2)],
        vec![y_matrix()],
    )
    .map_err(fail)?;
    let rep = check_growth(&linear_b, 1000).map_err(fail)?;
    expect(!rep.all_hold && !rep.potential_to_zero.holds, "growth checker accepts b_n comparable to a_n");
    let geometric = CoefficientFamily::scaled_periodic(
        ScalarWeight::new(WeightKind::Geometric { ratio: 2.0 }),
        ScalarWeight::constant(0.0),
        vec![Operator::identity(2)],
        vec![Operator::zeros(2)],
    )
    .map_err(fail)?;
    let rep = check_log_envelope(&geometric, 1, 3, 300).map_err(fail)?;
    expect(!rep.all_hold && !rep.envelope_slack.holds, "log-envelope checker accepts geometric growth");
    let unbounded_b = CoefficientFamily::scaled_periodic(
        ScalarWeight::new(WeightKind::LogProduct { k: 1, offset: 3.0 }),
        ScalarWeight::power(1.0, 1.0),
        vec![x_matrix()],
        vec![y_matrix()],
    )
    .map_err(fail)?;
    let rep = check_log_envelope(&unbounded_b, 1, 3, log_horizon).map_err(fail)?;
    expect(!rep.all_hold && !rep.potential_bounded.holds, "log-envelope checker accepts unbounded b_n");

    let detail = format!(
        "growth: all hold = {}, log envelope: all hold = {}, 4 counter-families rejected",
        growth.all_hold, envelope.all_hold
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; problems: {}", problems.join("; ")))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Λ endpoints of the constant family", lambda_endpoints),
        ("principal-minor polynomials", minor_polynomials),
        ("q-band of the unbounded family", q_band),
        ("weighted-norm band stability", band_stability),
        ("Turán limit convergence", turan_limits),
        ("algebraic identity suite", || randomized(IDENTITIES, 120)),
        ("increment bounds", || randomized(BOUNDS, 120)),
        ("complete indeterminacy", indeterminacy),
        ("exact asymptotics and Christoffel limit", exact_and_christoffel),
        ("hypothesis checkers", hypothesis_checkers),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
