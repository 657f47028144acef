//! Ergodic and discounted occupation-measure LPs, discrete Mather measures,
//! and duality-gap certification against the PDE-side solvers.
//!
//! The central discretization decision: the dual cone of test pairs is
//! represented ONLY through the equality constraints generated by grid
//! functions. At the finite level every grid function is a valid test
//! function, so the cone of subsolution pairs collapses to the linear span of
//! the generator images, and "mu pairs to zero with every generator image"
//! becomes N flow constraints (B^T mu)(y) = 0, plus the discounted variant
//! lambda m(y) + (B^T mu)(y) = lambda delta_z(y). Minimizing <mu, L> over
//! that polytope mirrors, at the finite level, the measure-theoretic minimax
//! duality of the continuum problem; here it is plain LP duality, and the
//! certificate checks it numerically.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::generator::DiscreteGenerator;
use crate::grid::{GridFunction, TorusGrid};
use crate::hjb::{solve_discounted, solve_ergodic_howard};
use crate::lp::{check_certificate, simplex_solve, LpSolution, LpStatus, StandardFormLp};
use crate::problem::EllipticProblem;

/// Weights below this are clipped to zero on serialization.
pub const WEIGHT_CLIP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatherContext {
    Ergodic,
    Discounted { z: usize, lambda: f64 },
}

/// Nonnegative weights mu(x, alpha) with total mass 1 on point-control pairs.
#[derive(Clone, Debug)]
pub struct OccupationMeasure {
    grid: TorusGrid,
    weights: Array2<f64>,
    total_mass: f64,
}

impl OccupationMeasure {
    pub fn from_weights(grid: TorusGrid, weights: Array2<f64>) -> Result<Self> {
        if weights.dim().0 != grid.num_points() {
            return Err(Error::ShapeMismatch(format!(
                "measure has {} rows, grid has {} points",
                weights.dim().0,
                grid.num_points()
            )));
        }
        if weights.iter().any(|w| *w < -WEIGHT_CLIP) {
            return Err(Error::InvalidArgument(
                "occupation measure has a significantly negative weight".into(),
            ));
        }
        let total_mass = weights.iter().sum();
        Ok(OccupationMeasure { grid, weights, total_mass })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn num_controls(&self) -> usize {
        self.weights.dim().1
    }

    pub fn weight(&self, point: usize, control: usize) -> f64 {
        self.weights[[point, control]]
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// State marginal m(y) = sum over controls of mu(y, .).
    pub fn state_marginal(&self) -> Vec<f64> {
        (0..self.weights.dim().0).map(|x| self.weights.row(x).sum()).collect()
    }

    /// Dirac at one (point, control) pair.
    pub fn dirac(grid: TorusGrid, num_controls: usize, point: usize, control: usize) -> Self {
        let mut weights = Array2::zeros((grid.num_points(), num_controls));
        weights[[point, control]] = 1.0;
        OccupationMeasure { grid, weights, total_mass: 1.0 }
    }

    /// Nonzero (point, control, weight) triples sorted by point then control,
    /// with sub-clip weights dropped.
    pub fn nonzero_triples(&self) -> Vec<(usize, usize, f64)> {
        let (n, m) = self.weights.dim();
        let mut out = Vec::new();
        for x in 0..n {
            for c in 0..m {
                let w = self.weights[[x, c]];
                if w > WEIGHT_CLIP {
                    out.push((x, c, w));
                }
            }
        }
        out
    }
}

/// <mu, g> = sum mu(x, alpha) g(x, alpha).
pub fn pair_table(mu: &OccupationMeasure, g: &Array2<f64>) -> Result<f64> {
    if g.dim() != mu.weights.dim() {
        return Err(Error::ShapeMismatch(format!(
            "pairing table {:?} does not match measure {:?}",
            g.dim(),
            mu.weights.dim()
        )));
    }
    Ok(mu.weights.iter().zip(g.iter()).map(|(w, v)| w * v).sum())
}

/// Grid functions broadcast over controls: <mu, g> = sum mu(x, alpha) g(x).
pub fn pair_grid(mu: &OccupationMeasure, g: &GridFunction) -> Result<f64> {
    if g.grid() != mu.grid {
        return Err(Error::ShapeMismatch("pairing with a function on another grid".into()));
    }
    Ok(mu
        .state_marginal()
        .iter()
        .zip(g.values())
        .map(|(m, v)| m * v)
        .sum())
}

/// Flow residual of a measure: ||B^T mu||_inf in the ergodic case,
/// ||lambda m + B^T mu - lambda delta_z||_inf in the discounted case.
pub fn closing_residual(
    gen: &DiscreteGenerator,
    mu: &OccupationMeasure,
    context: MatherContext,
) -> f64 {
    let n = gen.grid().num_points();
    let mut acc = vec![0.0f64; n];
    for m in 0..gen.num_controls() {
        let col: Vec<f64> = (0..n).map(|x| mu.weight(x, m)).collect();
        gen.matrix(m).transpose_apply_add(&col, &mut acc);
    }
    match context {
        MatherContext::Ergodic => acc.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        MatherContext::Discounted { z, lambda } => {
            let marginal = mu.state_marginal();
            (0..n).fold(0.0f64, |a, y| {
                let target = if y == z { lambda } else { 0.0 };
                a.max((lambda * marginal[y] + acc[y] - target).abs())
            })
        }
    }
}

fn lp_from_constraints(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    context: MatherContext,
) -> StandardFormLp {
    let n = problem.num_points();
    let m = problem.num_controls();
    let nv = n * m; // variable order: point-major, mu(x, alpha) at x*m + alpha
    let nr = n + 1; // mass row first, then one flow row per grid point
    let mut a = vec![0.0f64; nr * nv];
    let mut rhs = vec![0.0f64; nr];
    for v in 0..nv {
        a[v] = 1.0;
    }
    rhs[0] = 1.0;
    for alpha in 0..m {
        let mat = gen.matrix(alpha);
        for x in 0..n {
            let var = x * m + alpha;
            for (y, val) in mat.row(x) {
                a[(1 + y) * nv + var] += val;
            }
        }
    }
    if let MatherContext::Discounted { z, lambda } = context {
        for x in 0..n {
            for alpha in 0..m {
                a[(1 + x) * nv + x * m + alpha] += lambda;
            }
        }
        rhs[1 + z] = lambda;
    }
    let cost: Vec<f64> = {
        let mut c = Vec::with_capacity(nv);
        for x in 0..n {
            for alpha in 0..m {
                c.push(problem.cost(x, alpha));
            }
        }
        c
    };
    StandardFormLp::new(nr, nv, a, rhs, cost).expect("occupation LP shapes are consistent")
}

/// LP over closing measures: min <mu, L> s.t. mu >= 0, sum mu = 1,
/// (B^T mu)(y) = 0 for every grid point y. Its optimum is -c.
pub fn build_ergodic_lp(problem: &EllipticProblem, gen: &DiscreteGenerator) -> StandardFormLp {
    lp_from_constraints(problem, gen, MatherContext::Ergodic)
}

/// LP over discounted occupation measures rooted at z: the flow constraints
/// read lambda m(y) + (B^T mu)(y) = lambda delta_z(y). Its optimum is
/// lambda v^lambda(z). The mass row is kept even though it is implied by the
/// flow rows (conditioning and clearer infeasibility reports).
pub fn build_discounted_lp(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    z: usize,
    lambda: f64,
) -> Result<StandardFormLp> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("discounted LP needs lambda > 0".into()));
    }
    if z >= problem.num_points() {
        return Err(Error::InvalidArgument(format!("root point {z} out of range")));
    }
    Ok(lp_from_constraints(problem, gen, MatherContext::Discounted { z, lambda }))
}

/// Pairing of an LP value with the matching PDE-side value.
#[derive(Clone, Debug)]
pub struct DualityCertificate {
    pub context: MatherContext,
    pub lp_value: f64,
    pub pde_value: f64,
    pub gap: f64,
    pub measure: OccupationMeasure,
    pub closing_residual: f64,
    /// Reported basis makes the vertex selection reproducible.
    pub basis: Vec<usize>,
    /// The underlying LP solution re-validated (feasibility + duality gap).
    pub lp_certificate_ok: bool,
}

fn measure_from_lp(
    problem: &EllipticProblem,
    sol: &LpSolution,
) -> Result<OccupationMeasure> {
    let n = problem.num_points();
    let m = problem.num_controls();
    let mut weights = Array2::zeros((n, m));
    for x in 0..n {
        for alpha in 0..m {
            weights[[x, alpha]] = sol.x[x * m + alpha];
        }
    }
    OccupationMeasure::from_weights(problem.grid(), weights)
}

/// Ergodic LP value alone (no PDE-side pairing); the critical value is its
/// negative. Works on problems where Howard iteration fails.
pub fn ergodic_lp_value(problem: &EllipticProblem, gen: &DiscreteGenerator) -> Result<f64> {
    let lp = build_ergodic_lp(problem, gen);
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Infeasible => Err(Error::Infeasible("no closing measure on this grid".into())),
        LpStatus::Unbounded => {
            Err(Error::Infeasible("occupation LP unbounded; measure cone broken".into()))
        }
    }
}

/// Builds and solves the occupation-measure LP for the given context and
/// pairs it with the PDE-side value (-c from Howard for ergodic,
/// lambda v^lambda(z) from policy iteration for discounted).
pub fn solve_mather(
    problem: &EllipticProblem,
    gen: &DiscreteGenerator,
    context: MatherContext,
) -> Result<DualityCertificate> {
    let lp = match context {
        MatherContext::Ergodic => build_ergodic_lp(problem, gen),
        MatherContext::Discounted { z, lambda } => build_discounted_lp(problem, gen, z, lambda)?,
    };
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::Infeasible("no closing measure on this grid".into()))
        }
        LpStatus::Unbounded => {
            return Err(Error::Infeasible("occupation LP unbounded; measure cone broken".into()))
        }
    }
    let measure = measure_from_lp(problem, &sol)?;
    let pde_value = match context {
        MatherContext::Ergodic => {
            let howard = solve_ergodic_howard(problem, gen, 1e-8, 0)?;
            -howard.c
        }
        MatherContext::Discounted { z, lambda } => {
            let disc = solve_discounted(problem, gen, lambda, 1e-8, None)?;
            lambda * disc.v.values()[z]
        }
    };
    let gap = (sol.objective - pde_value).abs();
    let residual = closing_residual(gen, &measure, context);
    let lp_certificate_ok = check_certificate(&lp, &sol).pass;
    Ok(DualityCertificate {
        context,
        lp_value: sol.objective,
        pde_value,
        gap,
        measure,
        closing_residual: residual,
        basis: sol.basis,
        lp_certificate_ok,
    })
}

// ---------------------------------------------------------------------------
// Text dumps
// ---------------------------------------------------------------------------

fn context_line(context: MatherContext) -> String {
    match context {
        MatherContext::Ergodic => "context ergodic".to_string(),
        MatherContext::Discounted { z, lambda } => {
            format!("context discounted z={z} lambda={lambda:.16e}")
        }
    }
}

/// Measure dump: grid/control metadata then nonzero triples by point index.
pub fn format_measure(mu: &OccupationMeasure, context: MatherContext) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    writeln!(s, "# occupation measure").unwrap();
    writeln!(s, "grid dim={} n={}", mu.grid().dim(), mu.grid().n_per_axis()).unwrap();
    writeln!(s, "controls m={}", mu.num_controls()).unwrap();
    writeln!(s, "{}", context_line(context)).unwrap();
    writeln!(s, "total_mass {:.16e}", mu.total_mass()).unwrap();
    writeln!(s, "# point control weight").unwrap();
    for (x, c, w) in mu.nonzero_triples() {
        writeln!(s, "{x} {c} {w:.16e}").unwrap();
    }
    s
}

pub fn format_certificate(cert: &DualityCertificate) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    writeln!(s, "# duality certificate").unwrap();
    writeln!(s, "{}", context_line(cert.context)).unwrap();
    writeln!(s, "lp_value {:.16e}", cert.lp_value).unwrap();
    writeln!(s, "pde_value {:.16e}", cert.pde_value).unwrap();
    writeln!(s, "gap {:.16e}", cert.gap).unwrap();
    writeln!(s, "closing_residual {:.16e}", cert.closing_residual).unwrap();
    writeln!(s, "measure_mass {:.16e}", cert.measure.total_mass()).unwrap();
    writeln!(s, "lp_certificate {}", if cert.lp_certificate_ok { "pass" } else { "fail" }).unwrap();
    s
}
