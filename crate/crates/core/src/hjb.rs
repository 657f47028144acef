//! Policy iteration for the discounted problem and average-cost (Howard)
//! iteration for the ergodic problem, with residual and uniqueness
//! diagnostics.
//!
//! Policy evaluation uses direct dense LU solves at desk scale; this keeps
//! solver noise out of the duality-gap acceptance checks. The ergodic
//! evaluation system can be singular for multichain policies; a least-squares
//! fallback accepts the minimal-norm solution when the system is consistent
//! and surfaces the failure otherwise.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::generator::{apply_f, DiscreteGenerator};
use crate::grid::GridFunction;
use crate::problem::EllipticProblem;

/// Ties in greedy improvement are broken to the lowest control index.
const TIE_EPS: f64 = 1e-10;
const MAX_POLICY_ITERS: usize = 1000;

#[derive(Clone, Debug)]
pub struct DiscountedSolution {
    pub lambda: f64,
    pub v: GridFunction,
    /// Control index per point.
    pub policy: Vec<usize>,
    /// sup |lambda v + F_h[v]|.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct ErgodicSolution {
    /// Critical value: F_h[u] = c.
    pub c: f64,
    /// Solution normalized by u(x0) = 0.
    pub u: GridFunction,
    pub policy: Vec<usize>,
    /// sup |F_h[u] - c|.
    pub residual: f64,
    pub iterations: usize,
}

impl ErgodicSolution {
    /// The same solution under min-normalization (min u = 0), for comparison
    /// with the classical normalization of the discounted family.
    pub fn u_min_normalized(&self) -> GridFunction {
        let min = self.u.values().iter().copied().fold(f64::INFINITY, f64::min);
        GridFunction::new(self.u.grid(), self.u.values().iter().map(|v| v - min).collect())
            .expect("same grid")
    }
}

fn check_shapes(problem: &EllipticProblem, gen: &DiscreteGenerator) -> Result<()> {
    if problem.grid() != gen.grid() || problem.num_controls() != gen.num_controls() {
        return Err(Error::ShapeMismatch(
            "generator was built for a different problem".into(),
        ));
    }
    Ok(())
}

/// Solves (lambda I + B_policy) u = L_policy by dense LU. The system is
/// strictly diagonally dominant, hence invertible, for every lambda > 0.
pub fn policy_evaluate(
    gen: &DiscreteGenerator,
    problem: &EllipticProblem,
    policy: &[usize],
    lambda: f64,
) -> Result<GridFunction> {
    check_shapes(problem, gen)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "policy_evaluate needs lambda > 0, got {lambda} (the ergodic path handles lambda = 0)"
        )));
    }
    let n = problem.num_points();
    if policy.len() != n {
        return Err(Error::ShapeMismatch("policy length != number of points".into()));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for x in 0..n {
        let ctrl = policy[x];
        if ctrl >= problem.num_controls() {
            return Err(Error::InvalidArgument(format!("policy control {ctrl} out of range")));
        }
        for (col, val) in gen.matrix(ctrl).row(x) {
            a[(x, col)] += val;
        }
        a[(x, x)] += lambda;
        rhs[x] = problem.cost(x, ctrl);
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::ErgodicityFailure("singular discounted evaluation system".into()))?;
    GridFunction::new(problem.grid(), sol.as_slice().to_vec())
}

/// Greedy policy from u: argmax over controls of (B_alpha u)(x) - L(x,alpha),
/// ties to the lowest control index.
pub fn greedy_policy(
    gen: &DiscreteGenerator,
    problem: &EllipticProblem,
    u: &[f64],
) -> Vec<usize> {
    let n = problem.num_points();
    let mut best_val = vec![f64::NEG_INFINITY; n];
    let mut best_idx = vec![0usize; n];
    for m in 0..problem.num_controls() {
        let bu = gen.apply_control(m, u);
        for x in 0..n {
            let q = bu[x] - problem.cost(x, m);
            if q > best_val[x] {
                best_val[x] = q;
                best_idx[x] = m;
            }
        }
    }
    best_idx
}

/// Greedy improvement that keeps the current action unless a candidate is
/// strictly better. Average-cost Howard iteration needs this to terminate;
/// gain-only argmax switching can cycle between equal-gain policies.
fn greedy_policy_keep(
    gen: &DiscreteGenerator,
    problem: &EllipticProblem,
    u: &[f64],
    current: &[usize],
) -> Vec<usize> {
    let n = problem.num_points();
    let mut best_val = vec![f64::NEG_INFINITY; n];
    let mut best_idx = vec![0usize; n];
    let mut cur_val = vec![0.0f64; n];
    for m in 0..problem.num_controls() {
        let bu = gen.apply_control(m, u);
        for x in 0..n {
            let q = bu[x] - problem.cost(x, m);
            if q > best_val[x] {
                best_val[x] = q;
                best_idx[x] = m;
            }
            if current[x] == m {
                cur_val[x] = q;
            }
        }
    }
    (0..n)
        .map(|x| if best_val[x] > cur_val[x] + TIE_EPS { best_idx[x] } else { current[x] })
        .collect()
}

/// sup |lambda v + F_h[v]|.
pub fn residual_discounted(
    gen: &DiscreteGenerator,
    problem: &EllipticProblem,
    v: &GridFunction,
    lambda: f64,
) -> Result<f64> {
    let fv = apply_f(gen, problem, v)?;
    Ok(v.values()
        .iter()
        .zip(fv.values())
        .fold(0.0f64, |acc, (vi, fi)| acc.max((lambda * vi + fi).abs())))
}

/// Policy iteration for lambda v + F_h[v] = 0. The result is independent of
/// the initial policy (discrete comparison principle); `init_policy` only
/// warm-starts the iteration.
pub fn solve_discounted(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    lambda: f64,
    tol: f64,
    init_policy: Option<&[usize]>,
) -> Result<DiscountedSolution> {
    check_shapes(problem, gen)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "solve_discounted needs lambda > 0, got {lambda}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0".into()));
    }
    let n = problem.num_points();
    let mut policy: Vec<usize> = match init_policy {
        Some(p) if p.len() == n => p.to_vec(),
        Some(_) => return Err(Error::ShapeMismatch("init policy length mismatch".into())),
        None => vec![0; n],
    };
    let mut best_residual = f64::INFINITY;
    let mut prev_v: Option<GridFunction> = None;
    for it in 1..=MAX_POLICY_ITERS {
        let v = policy_evaluate(gen, problem, &policy, lambda)?;
        let next = greedy_policy(gen, problem, v.values());
        let residual = residual_discounted(gen, problem, &v, lambda)?;
        best_residual = best_residual.min(residual);
        // the improvement map can 2-cycle between equally optimal policies at
        // float-tie level; a stalled value function with a small residual is
        // the same fixed point
        let stalled = prev_v
            .as_ref()
            .is_some_and(|pv| {
                crate::grid::sup_distance(pv, &v) <= 1e-10 * (1.0 + v.sup_norm())
            });
        if next == policy || (residual <= tol && stalled) {
            if residual > tol {
                return Err(Error::NonConvergence {
                    message: format!("stable policy with residual {residual:e} > tol {tol:e}"),
                    residual,
                });
            }
            return Ok(DiscountedSolution { lambda, v, policy, residual, iterations: it });
        }
        prev_v = Some(v);
        policy = next;
    }
    Err(Error::NonConvergence {
        message: format!("policy iteration exceeded {MAX_POLICY_ITERS} iterations"),
        residual: best_residual,
    })
}

/// Solves the ergodic evaluation system
///     B_pol u + rho 1 = L_pol,  u(x0) = 0
/// returning (u, c = -rho). LU first; on singular systems a least-squares
/// solve is accepted only when consistent.
fn evaluate_ergodic(
    gen: &DiscreteGenerator,
    problem: &EllipticProblem,
    policy: &[usize],
    x0: usize,
) -> Result<(Vec<f64>, f64)> {
    let n = problem.num_points();
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for x in 0..n {
        for (col, val) in gen.matrix(policy[x]).row(x) {
            a[(x, col)] += val;
        }
        a[(x, n)] = 1.0;
        rhs[x] = problem.cost(x, policy[x]);
    }
    a[(n, x0)] = 1.0;
    let scale = 1.0 + rhs.amax();
    let accept = |sol: &DVector<f64>| -> bool {
        let res = (&a * sol - &rhs).amax();
        res <= 1e-8 * scale && sol.iter().all(|v| v.is_finite())
    };
    let lu_sol = a.clone().lu().solve(&rhs);
    let sol = match lu_sol {
        Some(s) if accept(&s) => s,
        _ => {
            let svd = a.clone().svd(true, true);
            let s = svd.solve(&rhs, 1e-10).map_err(|e| {
                Error::ErgodicityFailure(format!("ergodic evaluation SVD failed: {e}"))
            })?;
            if !accept(&s) {
                return Err(Error::ErgodicityFailure(
                    "discrete ergodicity failure; use vanishing-discount route and inspect spread"
                        .into(),
                ));
            }
            s
        }
    };
    let rho = sol[n];
    let shift = sol[x0];
    let u = (0..n).map(|x| sol[x] - shift).collect();
    Ok((u, -rho))
}

/// Average-cost policy iteration for F_h[u] = c, normalized by u(x0) = 0.
pub fn solve_ergodic_howard(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    tol: f64,
    x0: usize,
) -> Result<ErgodicSolution> {
    check_shapes(problem, gen)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0".into()));
    }
    let n = problem.num_points();
    if x0 >= n {
        return Err(Error::InvalidArgument(format!("normalization point {x0} out of range")));
    }
    let mut policy = vec![0usize; n];
    let mut retried = false;
    let mut it = 0usize;
    loop {
        it += 1;
        if it > MAX_POLICY_ITERS {
            return Err(Error::NonConvergence {
                message: format!("Howard iteration exceeded {MAX_POLICY_ITERS} iterations"),
                residual: f64::NAN,
            });
        }
        let (u, c) = match evaluate_ergodic(gen, problem, &policy, x0) {
            Ok(pair) => pair,
            Err(err) => {
                if retried {
                    return Err(err);
                }
                // one retry from the small-discount warm-start policy
                retried = true;
                let warm = solve_discounted(problem, gen, 1e-6, 1e-6, None)?;
                policy = warm.policy;
                continue;
            }
        };
        let next = greedy_policy_keep(gen, problem, &u, &policy);
        if next == policy {
            let uf = GridFunction::new(problem.grid(), u)?;
            let fu = apply_f(gen, problem, &uf)?;
            let residual =
                fu.values().iter().fold(0.0f64, |acc, fi| acc.max((fi - c).abs()));
            if residual > tol {
                return Err(Error::NonConvergence {
                    message: format!(
                        "stable ergodic policy with residual {residual:e} > tol {tol:e}"
                    ),
                    residual,
                });
            }
            return Ok(ErgodicSolution { c, u: uf, policy, residual, iterations: it });
        }
        policy = next;
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonProbeReport {
    pub trials: usize,
    /// Max pairwise sup-norm distance between solutions from random initial
    /// policies; the discrete comparison principle predicts ~0.
    pub max_distance: f64,
}

/// Runs solve_discounted from random initial policies and reports the max
/// pairwise distance of the value functions.
pub fn comparison_probe(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<ComparisonProbeReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("comparison_probe needs lambda > 0".into()));
    }
    let n = problem.num_points();
    let m = problem.num_controls();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut solutions: Vec<GridFunction> = Vec::with_capacity(trials);
    for _ in 0..trials {
        let policy: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        let sol = solve_discounted(problem, gen, lambda, 1e-8, Some(&policy))?;
        solutions.push(sol.v);
    }
    let mut max_distance = 0.0f64;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            max_distance = max_distance.max(crate::grid::sup_distance(&solutions[i], &solutions[j]));
        }
    }
    Ok(ComparisonProbeReport { trials, max_distance })
}
