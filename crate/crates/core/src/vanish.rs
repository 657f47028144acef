//! Vanishing-discount experiment driver: lambda schedules, critical-value
//! estimation, detection of the selected limit u0, and the selection
//! inequality checks.
//!
//! The exact c used to form w = v^lambda + c/lambda comes from the ergodic
//! LP by default: the LP value is exact for the finite problem, while the
//! per-lambda estimate c_hat carries O(lambda) bias that would contaminate
//! the convergence test. Convergence is declared from Cauchy gaps of the
//! w family, never from comparison with a stored limit.

use crate::error::{Error, Result};
use crate::generator::DiscreteGenerator;
use crate::grid::{sup_distance, GridFunction};
use crate::hjb::{solve_discounted, solve_ergodic_howard};
use crate::mather::{ergodic_lp_value, pair_grid, OccupationMeasure};
use crate::problem::EllipticProblem;

/// Where the critical value used for w = v + c/lambda comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CSource {
    Howard,
    Lp,
}

#[derive(Clone, Debug)]
pub struct LambdaRecord {
    pub lambda: f64,
    pub v: GridFunction,
    /// -mean of lambda v; estimates c with O(lambda) bias.
    pub c_hat: f64,
    /// oscillation of lambda v; the discrete equi-continuity diagnostic.
    pub spread: f64,
    pub w: GridFunction,
    /// sup |w_k - w_{k-1}|; None on the first record.
    pub gap_to_prev: Option<f64>,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct ScheduleReport {
    pub records: Vec<LambdaRecord>,
    /// The exact critical value used to form w.
    pub c: f64,
    pub u0: GridFunction,
    pub converged: bool,
    /// Populated when convergence was not declared, or on fallbacks.
    pub diagnostic: Option<String>,
}

/// Solves (DP) along a strictly decreasing lambda schedule with policy warm
/// starts, recording spreads and Cauchy gaps of w = v + c/lambda.
///
/// converged = Cauchy gaps decrease monotonically (1e-8 slack), the final
/// gap is <= tol, and the spread is nonincreasing within 1e-6 slack.
pub fn run_schedule(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    lambdas: &[f64],
    c_source: CSource,
    tol: f64,
) -> Result<ScheduleReport> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda schedule".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidArgument("schedule lambdas must be > 0".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("schedule must be strictly decreasing".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0".into()));
    }
    let mut diagnostic = None;
    let c = match c_source {
        CSource::Lp => -ergodic_lp_value(problem, gen)?,
        CSource::Howard => match solve_ergodic_howard(problem, gen, 1e-8, 0) {
            Ok(sol) => sol.c,
            Err(err) => {
                // fall back to the LP value, with a warning in the report
                diagnostic = Some(format!("howard c failed ({err}); fell back to lp"));
                -ergodic_lp_value(problem, gen)?
            }
        },
    };
    let mut records: Vec<LambdaRecord> = Vec::with_capacity(lambdas.len());
    let mut policy: Option<Vec<usize>> = None;
    for &lambda in lambdas {
        let sol = solve_discounted(problem, gen, lambda, 1e-9, policy.as_deref())?;
        policy = Some(sol.policy.clone());
        let w = GridFunction::new(
            problem.grid(),
            sol.v.values().iter().map(|v| v + c / lambda).collect(),
        )?;
        let lam_v = GridFunction::new(
            problem.grid(),
            sol.v.values().iter().map(|v| lambda * v).collect(),
        )?;
        let gap_to_prev = records.last().map(|prev: &LambdaRecord| sup_distance(&w, &prev.w));
        records.push(LambdaRecord {
            lambda,
            c_hat: -lam_v.mean(),
            spread: lam_v.oscillation(),
            w,
            gap_to_prev,
            residual: sol.residual,
            v: sol.v,
        });
    }
    let gaps: Vec<f64> = records.iter().filter_map(|r| r.gap_to_prev).collect();
    let gaps_monotone = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-8);
    let final_gap_ok = gaps.last().map_or(true, |g| *g <= tol);
    let spreads: Vec<f64> = records.iter().map(|r| r.spread).collect();
    let spread_monotone = spreads.windows(2).all(|w| w[1] <= w[0] + 1e-6);
    let converged = gaps_monotone && final_gap_ok && spread_monotone;
    if !converged && diagnostic.is_none() {
        let mut reasons = Vec::new();
        if !gaps_monotone {
            reasons.push("cauchy gaps not monotone".to_string());
        }
        if !final_gap_ok {
            reasons.push(format!(
                "final gap {:.3e} > tol {tol:.3e}",
                gaps.last().copied().unwrap_or(f64::NAN)
            ));
        }
        if !spread_monotone {
            reasons.push("spread increased along the schedule".to_string());
        }
        diagnostic = Some(reasons.join("; "));
    }
    let u0 = records.last().unwrap().w.clone();
    Ok(ScheduleReport { records, c, u0, converged, diagnostic })
}

/// Selection report: pairings <mu, u0> for the supplied Mather measures.
#[derive(Clone, Debug)]
pub struct SelectionReport {
    /// Critical value of the (required-normalized) input problem.
    pub c_normalized: f64,
    pub pairings: Vec<f64>,
    pub max_pairing: f64,
    pub ok: bool,
}

/// Checks the selection inequality <mu, u0> <= 0 (to 1e-6) for every
/// supplied measure. `problem` must be c-normalized: its ergodic LP value
/// must vanish, mirroring the reduction to critical value zero.
pub fn selection_check(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    report: &ScheduleReport,
    measures: &[OccupationMeasure],
) -> Result<SelectionReport> {
    let c_normalized = -ergodic_lp_value(problem, gen)?;
    if c_normalized.abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "selection_check needs a c-normalized problem (|c| = {:.3e} > 1e-6); shift L by c first",
            c_normalized.abs()
        )));
    }
    let mut pairings = Vec::with_capacity(measures.len());
    for mu in measures {
        pairings.push(pair_grid(mu, &report.u0)?);
    }
    let max_pairing = pairings.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
    let ok = pairings.iter().all(|p| *p <= 1e-6);
    Ok(SelectionReport { c_normalized, pairings, max_pairing, ok })
}

/// Runs two schedules and returns sup |u0_a - u0_b|; whole-family
/// convergence predicts agreement at the common infimum scale.
pub fn subsequence_probe(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    schedule_a: &[f64],
    schedule_b: &[f64],
    c_source: CSource,
    tol: f64,
) -> Result<f64> {
    let ra = run_schedule(problem, gen, schedule_a, c_source, tol)?;
    let rb = run_schedule(problem, gen, schedule_b, c_source, tol)?;
    Ok(sup_distance(&ra.u0, &rb.u0))
}

/// Geometric schedule lambda_k = 2^-k for k in k0..=k1.
pub fn geometric_schedule(k0: u32, k1: u32) -> Result<Vec<f64>> {
    if k1 < k0 {
        return Err(Error::InvalidArgument("schedule needs k1 >= k0".into()));
    }
    Ok((k0..=k1).map(|k| 0.5f64.powi(k as i32)).collect())
}

/// CSV dump: one record per lambda.
pub fn format_schedule_csv(report: &ScheduleReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    writeln!(s, "lambda,c_hat,spread,gap_to_prev,residual").unwrap();
    for r in &report.records {
        let gap = r.gap_to_prev.map_or(String::new(), |g| format!("{g:.16e}"));
        writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{gap},{:.16e}",
            r.lambda, r.c_hat, r.spread, r.residual
        )
        .unwrap();
    }
    s
}
