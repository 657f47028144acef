//! Monotone upwind discretization of the per-control linear operators
//! L_alpha psi = -tr a D^2 psi - b . D psi and of the Bellman operator.
//!
//! The stencil at x for control alpha:
//!   (B_alpha u)(x) = - sum_i a_i (u(x+e_i h) - 2u(x) + u(x-e_i h)) / h^2
//!                    - sum_i [ b_i^+ (u(x+e_i h) - u(x)) / h
//!                            + b_i^- (u(x-e_i h) - u(x)) / h ]
//! with b^+ = max(b,0), b^- = max(-b,0). Every row sums to zero and has the
//! M-matrix sign pattern (diag >= 0, off-diag <= 0) by construction, which is
//! the discrete form of degenerate ellipticity. First-order upwinding is
//! deliberate: monotonicity over accuracy.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid};
use crate::problem::EllipticProblem;

/// Compressed sparse rows; enough structure for stencil matrices.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row entry lists; duplicate columns are accumulated.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    /// y = B u.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).map(|(c, v)| v * u[c]).sum())
            .collect()
    }

    /// (B u)(i) for a single row.
    pub fn apply_row(&self, i: usize, u: &[f64]) -> f64 {
        self.row(i).map(|(c, v)| v * u[c]).sum()
    }

    /// acc[y] += sum_x w[x] * B(x, y)  (transpose action, accumulated).
    pub fn transpose_apply_add(&self, w: &[f64], acc: &mut [f64]) {
        assert_eq!(w.len(), self.n);
        assert_eq!(acc.len(), self.n);
        for x in 0..self.n {
            let wx = w[x];
            if wx == 0.0 {
                continue;
            }
            for (y, v) in self.row(x) {
                acc[y] += wx * v;
            }
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }
}

/// Per-control sparse operators B_alpha discretizing L_alpha (units 1/time).
#[derive(Clone, Debug)]
pub struct DiscreteGenerator {
    grid: TorusGrid,
    mats: Vec<SparseMatrix>,
}

impl DiscreteGenerator {
    /// Wraps raw matrices; used by diagnostics and tests. `build_generator`
    /// is the normal constructor.
    pub fn from_matrices(grid: TorusGrid, mats: Vec<SparseMatrix>) -> Self {
        DiscreteGenerator { grid, mats }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn num_controls(&self) -> usize {
        self.mats.len()
    }

    pub fn matrix(&self, control: usize) -> &SparseMatrix {
        &self.mats[control]
    }

    /// B_alpha u as a plain vector.
    pub fn apply_control(&self, control: usize, u: &[f64]) -> Vec<f64> {
        self.mats[control].apply(u)
    }
}

/// Assembles the monotone upwind discretization of every L_alpha.
pub fn build_generator(problem: &EllipticProblem) -> DiscreteGenerator {
    let grid = problem.grid();
    let n = grid.num_points();
    let h = grid.h();
    let mut mats = Vec::with_capacity(problem.num_controls());
    for m in 0..problem.num_controls() {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for x in 0..n {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * grid.dim() + 1);
            let mut diag = 0.0;
            for axis in 0..grid.dim() {
                let a = problem.diffusion(x, m, axis);
                let b = problem.drift(x, m, axis);
                let bp = b.max(0.0);
                let bm = (-b).max(0.0);
                let right = grid.neighbor_unchecked(x, axis, 1);
                let left = grid.neighbor_unchecked(x, axis, -1);
                row.push((right, -(a / (h * h) + bp / h)));
                row.push((left, -(a / (h * h) + bm / h)));
                diag += 2.0 * a / (h * h) + (bp + bm) / h;
            }
            row.push((x, diag));
            rows.push(row);
        }
        mats.push(SparseMatrix::from_rows(n, rows));
    }
    DiscreteGenerator { grid, mats }
}

/// F_h[u](x) = max over controls of (B_alpha u)(x) - L(x, alpha).
pub fn apply_f(
    gen: &DiscreteGenerator,
    problem: &EllipticProblem,
    u: &GridFunction,
) -> Result<GridFunction> {
    apply_f_table(gen, problem.cost_table(), u)
}

/// Bellman max with a substituted running-cost table (the F_phi variants all
/// reduce to this).
pub fn apply_f_table(
    gen: &DiscreteGenerator,
    cost: &Array2<f64>,
    u: &GridFunction,
) -> Result<GridFunction> {
    if u.grid() != gen.grid() {
        return Err(Error::ShapeMismatch("grid function is on a different grid".into()));
    }
    let n = gen.grid().num_points();
    if cost.dim() != (n, gen.num_controls()) {
        return Err(Error::ShapeMismatch(format!(
            "cost table {:?} does not match {} points x {} controls",
            cost.dim(),
            n,
            gen.num_controls()
        )));
    }
    let mut out = vec![f64::NEG_INFINITY; n];
    for m in 0..gen.num_controls() {
        let bu = gen.apply_control(m, u.values());
        for x in 0..n {
            out[x] = out[x].max(bu[x] - cost[[x, m]]);
        }
    }
    GridFunction::new(gen.grid(), out)
}

/// Worst violations of the row-sum-zero and M-matrix sign invariants.
#[derive(Clone, Copy, Debug)]
pub struct MonotonicityReport {
    pub max_row_sum: f64,
    pub max_positive_offdiag: f64,
    pub max_negative_diag: f64,
    /// (control, row, col) of the worst sign violation, if any.
    pub worst_entry: Option<(usize, usize, usize)>,
    pub pass: bool,
}

/// Checks row sums and the sign pattern to 1e-12 absolute. Report-only.
pub fn validate_monotone(gen: &DiscreteGenerator) -> MonotonicityReport {
    let tol = 1e-12;
    let mut max_row_sum = 0.0f64;
    let mut max_positive_offdiag = 0.0f64;
    let mut max_negative_diag = 0.0f64;
    let mut worst_entry = None;
    let mut worst_mag = 0.0f64;
    for (mi, mat) in gen.mats.iter().enumerate() {
        for i in 0..mat.n() {
            let mut sum = 0.0;
            for (j, v) in mat.row(i) {
                sum += v;
                let violation = if j == i { (-v).max(0.0) } else { v.max(0.0) };
                if violation > worst_mag {
                    worst_mag = violation;
                    worst_entry = Some((mi, i, j));
                }
                if j == i {
                    max_negative_diag = max_negative_diag.max((-v).max(0.0));
                } else {
                    max_positive_offdiag = max_positive_offdiag.max(v.max(0.0));
                }
            }
            max_row_sum = max_row_sum.max(sum.abs());
        }
    }
    let pass = max_row_sum <= tol && max_positive_offdiag <= tol && max_negative_diag <= tol;
    MonotonicityReport {
        max_row_sum,
        max_positive_offdiag,
        max_negative_diag,
        worst_entry: if worst_mag > tol { worst_entry } else { None },
        pass,
    }
}
