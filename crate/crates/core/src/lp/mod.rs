//! Dense linear programming: model types and a bounded-variable revised
//! simplex solver.
//!
//! Every problem is a maximization. Each row `a x (<=|=|>=) b` receives a
//! logical column `s` with `a x + s = b`; the initial basis consists of those
//! logicals plus one artificial per row whose logical cannot absorb the
//! starting residual. Phase 1 minimizes the artificial sum.

mod basis;
mod lu;
mod simplex;

pub use simplex::WarmStart;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// Sparse coefficients, one entry per column, sorted by column.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, v)| v * x[j]).sum()
    }

    /// Nonnegative violation of the row at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `maximize objective . x` subject to `rows` and `var_lb <= x <= var_ub`;
/// `None` bounds are infinite.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub var_lb: Vec<Option<f64>>,
    pub var_ub: Vec<Option<f64>>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    /// `n` columns with zero cost and bounds `[0, inf)`.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            var_lb: vec![Some(0.0); n],
            var_ub: vec![None; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends a column and returns its index.
    pub fn add_var(&mut self, cost: f64, lb: Option<f64>, ub: Option<f64>) -> usize {
        self.objective.push(cost);
        self.var_lb.push(lb);
        self.var_ub.push(ub);
        self.objective.len() - 1
    }

    /// Appends a row, merging repeated columns and dropping exact zeros.
    pub fn add_row(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut c: Vec<(usize, f64)> = coeffs.into_iter().collect();
        c.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
        for (j, v) in c {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        self.rows.push(Row { coeffs: merged, relation, rhs });
        self.rows.len() - 1
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.var_lb.len() != n || self.var_ub.len() != n {
            return Err(LpError::Malformed("bound vectors do not match objective length".into()));
        }
        for j in 0..n {
            if let (Some(l), Some(u)) = (self.var_lb[j], self.var_ub[j]) {
                if l > u {
                    return Err(LpError::Malformed(format!("column {j} has lb {l} > ub {u}")));
                }
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if let Some(&(j, _)) = row.coeffs.iter().find(|e| e.0 >= n) {
                return Err(LpError::Malformed(format!("row {r} references column {j} >= {n}")));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|e| !e.1.is_finite()) {
                return Err(LpError::Malformed(format!("row {r} has non-finite data")));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max);
        let bounds = (0..self.num_vars()).fold(0.0f64, |acc, j| {
            let lo = self.var_lb[j].map_or(0.0, |l| (l - x[j]).max(0.0));
            let hi = self.var_ub[j].map_or(0.0, |u| (x[j] - u).max(0.0));
            acc.max(lo).max(hi)
        });
        rows.max(bounds)
    }

    /// Renders the program in CPLEX-style LP text. `names` supplies column
    /// names; missing names default to `x<j>`.
    pub fn to_lp_text(&self, names: Option<&[String]>) -> String {
        let name = |j: usize| -> String {
            names.and_then(|n| n.get(j)).cloned().unwrap_or_else(|| format!("x{j}"))
        };
        let term_list = |terms: &mut dyn Iterator<Item = (usize, f64)>| -> String {
            let mut s = String::new();
            for (k, (j, v)) in terms.enumerate() {
                let sign = if v < 0.0 { "-" } else if k > 0 { "+" } else { "" };
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{sign}{} {}", fmt_num(v.abs()), name(j));
            }
            if s.is_empty() {
                s.push('0');
            }
            s
        };
        let mut out = String::from("Maximize\n obj: ");
        let mut obj = self.objective.iter().copied().enumerate().filter(|e| e.1 != 0.0);
        out.push_str(&term_list(&mut obj));
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let mut it = row.coeffs.iter().copied();
            let _ = writeln!(out, " r{r}: {} {} {}", term_list(&mut it), row.relation, fmt_num(row.rhs));
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let line = match (self.var_lb[j], self.var_ub[j]) {
                (None, None) => format!(" {} free", name(j)),
                (Some(l), None) => format!(" {} >= {}", name(j), fmt_num(l)),
                (None, Some(u)) => format!(" -inf <= {} <= {}", name(j), fmt_num(u)),
                (Some(l), Some(u)) => format!(" {} <= {} <= {}", fmt_num(l), name(j), fmt_num(u)),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("End\n");
        out
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome. Point, objective and duals are present iff `Optimal`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    /// One multiplier per row: the rate of change of the optimum in the rhs.
    pub duals: Option<Vec<f64>>,
    /// Value of each row's logical column, `rhs - a x`.
    pub row_slack: Option<Vec<f64>>,
    pub iterations: usize,
    pub warm_start: Option<WarmStart>,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            x: None,
            objective_value: None,
            duals: None,
            row_slack: None,
            iterations,
            warm_start: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_floor: f64,
    pub refactor_every: usize,
    /// Degenerate pivots tolerated before switching from Dantzig to Bland pricing.
    pub bland_after: usize,
    /// Use Bland's rule from the first pivot.
    pub bland_only: bool,
    pub max_iterations: Option<usize>,
    /// Relative size of the bound perturbation used against degenerate
    /// stalling; 0 disables it.
    pub perturbation: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            opt_tol: 1e-9,
            pivot_floor: 1e-10,
            refactor_every: 64,
            bland_after: 1000,
            bland_only: false,
            max_iterations: None,
            perturbation: 1e-7,
        }
    }
}

pub fn solve(lp: &LinearProgram, feas_tol: f64, opt_tol: f64) -> Result<LpSolution, LpError> {
    solve_with(lp, &SolverOptions { feas_tol, opt_tol, ..SolverOptions::default() })
}

pub fn solve_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution, LpError> {
    solve_warm(lp, opts, None)
}

/// Like [`solve_with`], starting from the final basis of an earlier solve
/// when it fits. Anything but an optimal warm solve is redone from scratch.
pub fn solve_warm(
    lp: &LinearProgram,
    opts: &SolverOptions,
    start: Option<&WarmStart>,
) -> Result<LpSolution, LpError> {
    lp.check()?;
    let solution = match start {
        Some(ws) => match simplex::Simplex::new(lp, opts).solve(Some(ws)) {
            Ok(sol) if sol.is_optimal() => sol,
            _ => simplex::Simplex::new(lp, opts).solve(None)?,
        },
        None => simplex::Simplex::new(lp, opts).solve(None)?,
    };
    #[cfg(debug_assertions)]
    if solution.is_optimal() {
        let audit = audit(lp, &solution);
        debug_assert!(audit.passes(opts.feas_tol), "LP audit failed: {audit:?}");
    }
    Ok(solution)
}

/// Scaled primal violation always accepted by [`Audit::passes`]. Bases with
/// large free columns can leave residuals of this order after the final
/// refactorization.
pub const PRIMAL_AUDIT_FLOOR: f64 = 1e-6;

/// Optimality evidence for an `Optimal` solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Audit {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Row violations relative to `1 + max(|rhs|, max_j |a_j x_j|)`, bound
    /// violations relative to `1 + |bound|`.
    pub max_primal_violation: f64,
    /// Largest wrong-signed reduced cost or row multiplier.
    pub max_dual_violation: f64,
    /// Largest `|dual| * |slack| / (1 + |rhs|)` over rows.
    pub max_complementarity: f64,
}

impl Audit {
    pub fn duality_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn passes(&self, feas_tol: f64) -> bool {
        let scale = 1.0 + self.primal_objective.abs();
        self.duality_gap() <= 1e-7 * scale
            && self.max_complementarity <= 1e-7
            && self.max_primal_violation <= (feas_tol * 10.0).max(PRIMAL_AUDIT_FLOOR)
            && self.max_dual_violation <= 1e-7 * scale
    }
}

fn scaled_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let rows = lp.rows.iter().map(|r| {
        let size = r.coeffs.iter().map(|&(j, v)| (v * x[j]).abs()).fold(r.rhs.abs(), f64::max);
        r.violation(x) / (1.0 + size)
    });
    let bounds = (0..lp.num_vars()).map(|j| {
        let lo = lp.var_lb[j].map_or(0.0, |l| (l - x[j]).max(0.0) / (1.0 + l.abs()));
        let hi = lp.var_ub[j].map_or(0.0, |u| (x[j] - u).max(0.0) / (1.0 + u.abs()));
        lo.max(hi)
    });
    rows.chain(bounds).fold(0.0, f64::max)
}

/// Recomputes primal and dual objective, sign conditions and
/// complementary slackness from the LP data and the returned point/duals.
///
/// # Panics
/// If `solution` is not optimal.
pub fn audit(lp: &LinearProgram, solution: &LpSolution) -> Audit {
    let x = solution.x.as_ref().expect("audit needs an optimal solution");
    let y = solution.duals.as_ref().expect("audit needs duals");
    let slack = solution.row_slack.as_ref().expect("audit needs row slacks");
    let n = lp.num_vars();

    let mut reduced = lp.objective.clone();
    for (r, row) in lp.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            reduced[j] -= v * y[r];
        }
    }
    let mut dual_objective: f64 = lp.rows.iter().zip(y).map(|(row, yr)| row.rhs * yr).sum();
    let mut max_dual_violation = 0.0f64;
    for (j, &d) in reduced.iter().enumerate().take(n) {
        let bound = if d > 0.0 { lp.var_ub[j] } else { lp.var_lb[j] };
        match bound {
            Some(b) => dual_objective += d * b,
            None => max_dual_violation = max_dual_violation.max(d.abs()),
        }
    }
    let mut max_complementarity = 0.0f64;
    for (r, row) in lp.rows.iter().enumerate() {
        let wrong_sign = match row.relation {
            Relation::Le => (-y[r]).max(0.0),
            Relation::Ge => y[r].max(0.0),
            Relation::Eq => 0.0,
        };
        max_dual_violation = max_dual_violation.max(wrong_sign);
        let cs = y[r].abs() * slack[r].abs() / (1.0 + row.rhs.abs());
        max_complementarity = max_complementarity.max(cs);
    }
    Audit {
        primal_objective: lp.objective_at(x),
        dual_objective,
        max_primal_violation: scaled_violation(lp, x),
        max_dual_violation,
        max_complementarity,
    }
}
