//! Self-contained dense two-phase primal simplex for small standard-form
//! LPs: minimize `cost . x` subject to `A x = rhs`, `x >= 0`.
//!
//! Bland's anti-cycling rule is always on: the occupation-measure LPs solved
//! here are routinely degenerate (Dirac-type optima). Dense tableau, no
//! factorization updates; clarity and determinism over speed at desk scale.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const REDUCED_COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct StandardFormLp {
    m: usize,
    n: usize,
    /// Row-major m x n constraint matrix.
    a: Vec<f64>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
}

impl StandardFormLp {
    pub fn new(m: usize, n: usize, a: Vec<f64>, rhs: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        if a.len() != m * n {
            return Err(Error::ShapeMismatch(format!(
                "constraint matrix has {} entries, expected {}",
                a.len(),
                m * n
            )));
        }
        if rhs.len() != m || cost.len() != n {
            return Err(Error::ShapeMismatch("rhs/cost length mismatch".into()));
        }
        if a.iter().chain(&rhs).chain(&cost).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("LP data must be finite".into()));
        }
        Ok(StandardFormLp { m, n, a, rhs, cost })
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    /// Plain-text dump: dimensions, cost row, then `row i: coeffs | rhs`.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "standard-form-lp {} {}", self.m, self.n).unwrap();
        let cost_line =
            self.cost.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "cost: {cost_line}").unwrap();
        for i in 0..self.m {
            let row = (0..self.n)
                .map(|j| format!("{:.16e}", self.entry(i, j)))
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(s, "row {i}: {row} | {:.16e}", self.rhs[i]).unwrap();
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint row.
    pub dual: Vec<f64>,
    /// Basic variable index per row (artificial indices >= n mark redundant rows).
    pub basis: Vec<usize>,
}

/// Packed dense LU factors with partial pivoting.
struct LuFactors {
    m: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn factor(mut a: Vec<f64>, m: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let mut pivot_row = k;
            let mut best = a[perm[k] * m + k].abs();
            for r in k + 1..m {
                let cand = a[perm[r] * m + k].abs();
                if cand > best {
                    best = cand;
                    pivot_row = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            perm.swap(k, pivot_row);
            let pk = perm[k];
            for r in k + 1..m {
                let pr = perm[r];
                let factor = a[pr * m + k] / a[pk * m + k];
                a[pr * m + k] = factor;
                for jj in k + 1..m {
                    a[pr * m + jj] -= factor * a[pk * m + jj];
                }
            }
        }
        Some(LuFactors { m, a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for k in 0..m {
            let pk = self.perm[k];
            let mut acc = b[pk];
            for jj in 0..k {
                acc -= self.a[pk * m + jj] * y[jj];
            }
            y[k] = acc;
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            let pk = self.perm[k];
            let mut acc = y[k];
            for jj in k + 1..m {
                acc -= self.a[pk * m + jj] * x[jj];
            }
            x[k] = acc / self.a[pk * m + k];
        }
        x
    }
}

struct Tableau {
    m: usize,
    n: usize,
    width: usize, // n + m artificials + 1 rhs column
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,    // phase-2 reduced costs
    obj1: Vec<f64>,   // phase-1 reduced costs
    basis: Vec<usize>,
    row_sign: Vec<f64>,
    pivots_since_refactor: usize,
    /// Consecutive degenerate pivots; Bland pricing engages while stalled.
    stalled_pivots: usize,
}

impl Tableau {
    fn new(lp: &StandardFormLp) -> Self {
        let m = lp.m;
        let n = lp.n;
        let width = n + m + 1;
        let mut rows = Vec::with_capacity(m);
        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            let mut row = vec![0.0; width];
            let s = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = s;
            for j in 0..n {
                row[j] = s * lp.entry(i, j);
            }
            row[n + i] = 1.0;
            row[width - 1] = s * lp.rhs[i];
            rows.push(row);
        }
        // phase-2 reduced costs start at the raw costs (artificial basis costs 0)
        let mut obj = vec![0.0; width];
        obj[..n].copy_from_slice(&lp.cost);
        // phase-1 reduced costs: eliminate the basic artificials from sum(artificials)
        let mut obj1 = vec![0.0; width];
        for row in &rows {
            for (o, v) in obj1.iter_mut().zip(row) {
                *o -= v;
            }
        }
        for j in n..n + m {
            obj1[j] = 0.0;
        }
        let basis = (n..n + m).collect();
        Tableau {
            m,
            n,
            width,
            rows,
            obj,
            obj1,
            basis,
            row_sign,
            pivots_since_refactor: 0,
            stalled_pivots: 0,
        }
    }

    /// Rebuilds the whole tableau (rows and both objective rows) from the
    /// original data on the current basis. Periodic reinversion stops
    /// roundoff from accumulating across long degenerate pivot chains.
    fn refactorize(&mut self, lp: &StandardFormLp) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        let mut bmat_t = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                let v = tilde_entry(lp, &self.row_sign, i, j);
                bmat[i * m + k] = v;
                bmat_t[k * m + i] = v;
            }
        }
        let lu = LuFactors::factor(bmat, m)
            .ok_or(Error::NumericalBreakdown { row: 0, col: 0, pivot: 0.0 })?;
        let lu_t = LuFactors::factor(bmat_t, m)
            .ok_or(Error::NumericalBreakdown { row: 0, col: 0, pivot: 0.0 })?;
        let b_tilde: Vec<f64> = (0..m).map(|i| self.row_sign[i] * lp.rhs[i]).collect();
        // constraint rows: columns of B^-1 A~, rhs = B^-1 b~
        let mut col = vec![0.0; m];
        for j in 0..self.n + m {
            for i in 0..m {
                col[i] = tilde_entry(lp, &self.row_sign, i, j);
            }
            let solved = lu.solve(&col);
            for i in 0..m {
                self.rows[i][j] = solved[i];
            }
        }
        let xb = lu.solve(&b_tilde);
        for i in 0..m {
            self.rows[i][self.width - 1] = xb[i].max(0.0);
            Self::snap_row(&mut self.rows[i]);
        }
        // reduced-cost rows from the multipliers of each objective
        let c2_basis: Vec<f64> =
            self.basis.iter().map(|&j| if j < self.n { lp.cost[j] } else { 0.0 }).collect();
        let c1_basis: Vec<f64> =
            self.basis.iter().map(|&j| if j < self.n { 0.0 } else { 1.0 }).collect();
        let y2 = lu_t.solve(&c2_basis);
        let y1 = lu_t.solve(&c1_basis);
        for j in 0..self.n + m {
            let full_c2 = if j < self.n { lp.cost[j] } else { 0.0 };
            let full_c1 = if j < self.n { 0.0 } else { 1.0 };
            let mut a2 = full_c2;
            let mut a1 = full_c1;
            for i in 0..m {
                let v = tilde_entry(lp, &self.row_sign, i, j);
                a2 -= y2[i] * v;
                a1 -= y1[i] * v;
            }
            self.obj[j] = a2;
            self.obj1[j] = a1;
        }
        self.obj[self.width - 1] = -y2.iter().zip(&b_tilde).map(|(y, b)| y * b).sum::<f64>();
        self.obj1[self.width - 1] = -y1.iter().zip(&b_tilde).map(|(y, b)| y * b).sum::<f64>();
        Self::snap_row(&mut self.obj);
        Self::snap_row(&mut self.obj1);
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Snap cancellation residue to exact zero so later ratio tests never
    /// pivot on noise (tiny pivots amplify roundoff catastrophically).
    fn snap_row(row: &mut [f64]) {
        let row_max = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let floor = 1e-13 * (1.0 + row_max);
        for v in row.iter_mut() {
            if v.abs() < floor {
                *v = 0.0;
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor != 0.0 {
                for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                self.rows[i][c] = 0.0;
                Self::snap_row(&mut self.rows[i]);
            }
        }
        for objrow in [&mut self.obj, &mut self.obj1] {
            let factor = objrow[c];
            if factor != 0.0 {
                for (v, p) in objrow.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                objrow[c] = 0.0;
                Self::snap_row(objrow);
            }
        }
        self.basis[r] = c;
    }

    /// One Bland-rule simplex run on the given objective row. Entering
    /// candidates are restricted to the original columns.
    fn run(&mut self, lp: &StandardFormLp, phase1: bool) -> Result<LpStatus> {
        let max_iters = 200_000 + 2_000 * (self.m + self.n);
        for _ in 0..max_iters {
            if self.pivots_since_refactor >= 50 {
                self.refactorize(lp)?;
            }
            let objrow: &Vec<f64> = if phase1 { &self.obj1 } else { &self.obj };
            // Pricing: most-negative reduced cost while making progress;
            // Bland's lowest-index rule takes over during degenerate stalls,
            // which is what guarantees no cycling on Dirac-type optima.
            let bland = self.stalled_pivots > 2 * (self.m + 16);
            let mut entering = None;
            if bland {
                for j in 0..self.n {
                    if objrow[j] < -REDUCED_COST_TOL {
                        entering = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -REDUCED_COST_TOL;
                for j in 0..self.n {
                    if objrow[j] < best {
                        best = objrow[j];
                        entering = Some(j);
                    }
                }
            }
            let Some(c) = entering else {
                return Ok(LpStatus::Optimal);
            };
            // ratio test; ties resolved by lowest basic-variable index
            // (Bland). The pivot floor is relative to the column so near-
            // cancelled entries are never used as pivots.
            let max_entry = (0..self.m).fold(0.0f64, |acc, i| acc.max(self.rows[i][c]));
            let floor = PIVOT_TOL.max(1e-7 * max_entry);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let t = self.rows[i][c];
                if t > floor {
                    let ratio = self.rows[i][self.width - 1].max(0.0) / t;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br
                                || (ratio == br && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, ratio)) => {
                    self.pivot(r, c);
                    self.pivots_since_refactor += 1;
                    if ratio > 1e-12 {
                        self.stalled_pivots = 0;
                    } else {
                        self.stalled_pivots += 1;
                    }
                }
                None => {
                    if max_entry > 0.0 {
                        // entries exist but all below the pivot floor
                        let row = (0..self.m)
                            .max_by(|&a, &b| {
                                self.rows[a][c].partial_cmp(&self.rows[b][c]).unwrap()
                            })
                            .unwrap();
                        return Err(Error::NumericalBreakdown {
                            row,
                            col: c,
                            pivot: max_entry,
                        });
                    }
                    return Ok(LpStatus::Unbounded);
                }
            }
        }
        Err(Error::NonConvergence {
            message: "simplex iteration limit reached".into(),
            residual: f64::NAN,
        })
    }

    /// Pivots basic artificials out where possible (rows left with a basic
    /// artificial are redundant constraints).
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] >= self.n {
                let mut best: Option<usize> = None;
                for j in 0..self.n {
                    if self.rows[r][j].abs() > 1e-9 {
                        best = Some(j);
                        break;
                    }
                }
                if let Some(j) = best {
                    self.pivot(r, j);
                }
            }
        }
    }
}

/// Entry of the sign-normalized constraint matrix including the artificial
/// identity columns.
fn tilde_entry(lp: &StandardFormLp, sign: &[f64], i: usize, j: usize) -> f64 {
    if j < lp.n {
        sign[i] * lp.entry(i, j)
    } else if j - lp.n == i {
        1.0
    } else {
        0.0
    }
}

/// Two-phase primal simplex with Bland's rule. Deterministic for fixed
/// input. The returned x and duals are recomputed from the original data on
/// the final basis, so accumulated tableau roundoff never reaches them.
pub fn simplex_solve(lp: &StandardFormLp) -> Result<LpSolution> {
    let mut t = Tableau::new(lp);
    let status = t.run(lp, true)?;
    if status != LpStatus::Optimal {
        // phase-1 objective is bounded below by 0; unbounded cannot happen
        return Err(Error::NumericalBreakdown { row: 0, col: 0, pivot: 0.0 });
    }
    // artificial values sit in the rows where they are still basic
    let phase1_value: f64 = (0..t.m)
        .filter(|&r| t.basis[r] >= t.n)
        .map(|r| t.rows[r][t.width - 1].max(0.0))
        .sum();
    if phase1_value > FEAS_TOL {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; lp.n],
            objective: 0.0,
            dual: vec![0.0; lp.m],
            basis: t.basis.clone(),
        });
    }
    t.expel_artificials();
    let status = t.run(lp, false)?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            x: vec![0.0; lp.n],
            objective: f64::NEG_INFINITY,
            dual: vec![0.0; lp.m],
            basis: t.basis.clone(),
        });
    }
    // basis repair: solve B x_B = b~ and B^T y~ = c_B from the original data
    let m = lp.m;
    let mut basis_mat = vec![0.0f64; m * m];
    let mut basis_mat_t = vec![0.0f64; m * m];
    for (k, &j) in t.basis.iter().enumerate() {
        for i in 0..m {
            let v = tilde_entry(lp, &t.row_sign, i, j);
            basis_mat[i * m + k] = v;
            basis_mat_t[k * m + i] = v;
        }
    }
    let b_tilde: Vec<f64> = (0..m).map(|i| t.row_sign[i] * lp.rhs[i]).collect();
    let c_basis: Vec<f64> =
        t.basis.iter().map(|&j| if j < lp.n { lp.cost[j] } else { 0.0 }).collect();
    let lu = LuFactors::factor(basis_mat, m);
    let lu_t = LuFactors::factor(basis_mat_t, m);
    let (Some(lu), Some(lu_t)) = (lu, lu_t) else {
        return Err(Error::NumericalBreakdown { row: 0, col: 0, pivot: 0.0 });
    };
    let xb = lu.solve(&b_tilde);
    let y_tilde = lu_t.solve(&c_basis);
    let mut x = vec![0.0; lp.n];
    for (k, &j) in t.basis.iter().enumerate() {
        if j < lp.n {
            x[j] = xb[k].max(0.0);
        }
    }
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    let dual = (0..m).map(|i| y_tilde[i] * t.row_sign[i]).collect();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective, dual, basis: t.basis })
}

/// Re-derived optimality certificate for a claimed-optimal solution.
#[derive(Clone, Copy, Debug)]
pub struct CertificateReport {
    /// max |Ax - rhs|
    pub primal_infeasibility: f64,
    /// most negative entry of cost - A^T dual (0 when clean)
    pub dual_infeasibility: f64,
    /// |objective - dual . rhs|
    pub duality_gap: f64,
    pub min_x: f64,
    pub pass: bool,
}

pub fn check_certificate(lp: &StandardFormLp, sol: &LpSolution) -> CertificateReport {
    let mut primal = 0.0f64;
    for i in 0..lp.m {
        let ax: f64 = (0..lp.n).map(|j| lp.entry(i, j) * sol.x[j]).sum();
        primal = primal.max((ax - lp.rhs[i]).abs());
    }
    let mut dual_inf = 0.0f64;
    for j in 0..lp.n {
        let aty: f64 = (0..lp.m).map(|i| lp.entry(i, j) * sol.dual[i]).sum();
        dual_inf = dual_inf.max(-(lp.cost[j] - aty));
    }
    let ytb: f64 = sol.dual.iter().zip(&lp.rhs).map(|(y, b)| y * b).sum();
    let gap = (sol.objective - ytb).abs();
    let min_x = sol.x.iter().copied().fold(0.0, f64::min);
    let pass = primal <= FEAS_TOL && dual_inf <= FEAS_TOL && gap <= FEAS_TOL && min_x >= -FEAS_TOL;
    CertificateReport {
        primal_infeasibility: primal,
        dual_infeasibility: dual_inf,
        duality_gap: gap,
        min_x,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_equality_example() {
        // min x1 s.t. x1 + x2 = 1
        let lp = StandardFormLp::new(1, 2, vec![1.0, 1.0], vec![1.0], vec![1.0, 0.0]).unwrap();
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-12);
        assert!((sol.x[0] - 0.0).abs() < 1e-12);
        assert!((sol.x[1] - 1.0).abs() < 1e-12);
        assert!(check_certificate(&lp, &sol).pass);
    }

    #[test]
    fn slack_form_bound() {
        // min -x1 s.t. x1 + s = 2
        let lp = StandardFormLp::new(1, 2, vec![1.0, 1.0], vec![2.0], vec![-1.0, 0.0]).unwrap();
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 2.0).abs() < 1e-12);
        assert!(check_certificate(&lp, &sol).pass);
    }

    #[test]
    fn infeasible_detected() {
        // x1 = -1 with x >= 0
        let lp = StandardFormLp::new(1, 1, vec![1.0], vec![-1.0], vec![0.0]).unwrap();
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // min -x1 s.t. x2 = 1 (x1 unconstrained above)
        let lp = StandardFormLp::new(1, 2, vec![0.0, 1.0], vec![1.0], vec![-1.0, 0.0]).unwrap();
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows_are_harmless() {
        // two copies of the same constraint
        let lp = StandardFormLp::new(
            2,
            2,
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0],
            vec![2.0, 1.0],
        )
        .unwrap();
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert!(check_certificate(&lp, &sol).pass);
    }

    #[test]
    fn degenerate_lp_terminates() {
        // multiple zero-rhs rows force degenerate pivots
        let lp = StandardFormLp::new(
            3,
            4,
            vec![
                1.0, -1.0, 0.0, 0.0, //
                1.0, 0.0, -1.0, 0.0, //
                1.0, 1.0, 1.0, 1.0,
            ],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-12);
        assert!(check_certificate(&lp, &sol).pass);
    }

    #[test]
    fn tampered_certificates_fail() {
        let lp = StandardFormLp::new(1, 2, vec![1.0, 1.0], vec![1.0], vec![1.0, 0.0]).unwrap();
        let sol = simplex_solve(&lp).unwrap();
        let mut bad_obj = sol.clone();
        bad_obj.objective += 0.5;
        assert!(!check_certificate(&lp, &bad_obj).pass);
        let mut bad_x = sol.clone();
        bad_x.x[1] = -0.25;
        bad_x.x[0] = 1.25;
        assert!(!check_certificate(&lp, &bad_x).pass);
    }

    #[test]
    fn deterministic_repeat_solve() {
        let lp = StandardFormLp::new(
            2,
            4,
            vec![1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 0.0, 1.0],
            vec![4.0, 6.0],
            vec![1.0, -1.0, 0.5, 0.0],
        )
        .unwrap();
        let a = simplex_solve(&lp).unwrap();
        let b = simplex_solve(&lp).unwrap();
        assert_eq!(a.basis, b.basis);
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn text_dump_has_dimensions_and_rows() {
        let lp = StandardFormLp::new(1, 2, vec![1.0, 1.0], vec![1.0], vec![1.0, 0.0]).unwrap();
        let text = lp.to_text();
        assert!(text.starts_with("standard-form-lp 1 2"));
        assert!(text.contains("row 0:"));
        assert!(text.contains(" | "));
    }
}
