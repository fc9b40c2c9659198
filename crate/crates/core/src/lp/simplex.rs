//! Two-phase bounded-variable revised primal simplex.

use super::basis::{Basis, Column};
use super::{LinearProgram, LpSolution, LpStatus, Relation, SolverOptions};
use crate::error::LpError;

const NONBASIC: usize = usize::MAX;


/// Ratio-test entries smaller than this fraction of the largest entry of the
/// pivot column are not eligible to leave.
const PIVOT_REL_TOL: f64 = 1e-7;

/// Smallest pivot accepted when repairing a singular starting basis.
const REPAIR_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column resting at zero.
    Free,
}

/// Final basis of an optimal solve, usable as the starting basis of a
/// later solve of an LP with the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    status: Vec<Status>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

enum Step {
    Flip,
    Pivot { pos: usize, to_upper: bool },
}

pub(crate) struct Simplex<'a> {
    opts: &'a SolverOptions,
    m: usize,
    n: usize,
    objective: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    artificials: Vec<(usize, f64)>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    head: Vec<usize>,
    position: Vec<usize>,
    basis: Basis,
    b: Vec<f64>,
    iterations: usize,
    degenerate: usize,
    bland: bool,
    max_iterations: usize,
}

impl<'a> Simplex<'a> {
    pub(crate) fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    cols[j].push((r, v));
                }
            }
        }
        let mut lb: Vec<f64> = lp.var_lb.iter().map(|b| b.unwrap_or(f64::NEG_INFINITY)).collect();
        let mut ub: Vec<f64> = lp.var_ub.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
        for row in &lp.rows {
            let (l, u) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        let max_iterations = opts
            .max_iterations
            .unwrap_or(200 * (n + m) + 10_000);
        Simplex {
            opts,
            m,
            n,
            objective: lp.objective.clone(),
            cols,
            artificials: Vec::new(),
            lb,
            ub,
            x: Vec::new(),
            status: Vec::new(),
            head: Vec::new(),
            position: Vec::new(),
            basis: Basis::default(),
            b: lp.rows.iter().map(|r| r.rhs).collect(),
            iterations: 0,
            degenerate: 0,
            bland: opts.bland_only,
            max_iterations,
        }
    }

    fn ncols(&self) -> usize {
        self.n + self.m + self.artificials.len()
    }

    fn column(&self, j: usize) -> Column<'_> {
        if j < self.n {
            Column::Sparse(&self.cols[j])
        } else if j < self.n + self.m {
            Column::Unit { row: j - self.n, sign: 1.0 }
        } else {
            let (row, sign) = self.artificials[j - self.n - self.m];
            Column::Unit { row, sign }
        }
    }

    fn dot(&self, j: usize, y: &[f64]) -> (f64, f64) {
        match self.column(j) {
            Column::Unit { row, sign } => (sign * y[row], y[row].abs()),
            Column::Sparse(entries) => entries.iter().fold((0.0, 0.0), |(s, a), &(r, v)| {
                (s + v * y[r], a + (v * y[r]).abs())
            }),
        }
    }

    fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        match self.column(j) {
            Column::Unit { row, sign } => out[row] = sign,
            Column::Sparse(entries) => {
                for &(r, v) in entries {
                    out[r] += v;
                }
            }
        }
        out
    }

    pub(crate) fn solve(mut self, start: Option<&WarmStart>) -> Result<LpSolution, LpError> {
        let n = self.n;
        let m = self.m;
        let original = self.perturb_bounds();
        let warm = start.is_some_and(|ws| self.install(ws));
        if warm {
            if !self.remove_infeasibilities()? {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, self.iterations));
            }
        } else if !self.phase1()? {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, self.iterations));
        }
        self.degenerate = 0;
        self.bland = self.opts.bland_only;

        let mut cost = vec![0.0; self.ncols()];
        cost[..n].copy_from_slice(&self.objective);
        let mut outcome = self.run(&cost)?;
        if let Some((lb, ub)) = original {
            self.restore_bounds(lb, ub)?;
            if !self.remove_infeasibilities()? {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, self.iterations));
            }
            self.degenerate = 0;
            self.bland = self.opts.bland_only;
            outcome = self.run(&cost)?;
        }
        match outcome {
            Outcome::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded, self.iterations)),
            Outcome::Optimal => {
                let cb: Vec<f64> = self.head.iter().map(|&j| cost[j]).collect();
                let duals = self.basis.btran(&cb);
                let x = self.x[..n].to_vec();
                let objective_value = x.iter().zip(&cost[..n]).map(|(a, c)| a * c).sum();
                let slack = self.x[n..n + m].to_vec();
                let status = self.status[..n + m].to_vec();
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    x: Some(x),
                    objective_value: Some(objective_value),
                    duals: Some(duals),
                    row_slack: Some(slack),
                    iterations: self.iterations,
                    warm_start: Some(WarmStart { status }),
                })
            }
        }
    }

    /// Installs a previous basis. Returns false, leaving the state to be
    /// reinitialized, if it does not fit this LP or cannot be factored.
    fn install(&mut self, start: &WarmStart) -> bool {
        let (n, m) = (self.n, self.m);
        let basic = start.status.iter().filter(|&&s| s == Status::Basic).count();
        if start.status.len() != n + m || basic != m {
            return false;
        }
        self.x = vec![0.0; n + m];
        self.status = start.status.clone();
        self.head = Vec::with_capacity(m);
        for j in 0..n + m {
            let (l, u) = (self.lb[j], self.ub[j]);
            match self.status[j] {
                Status::Basic => self.head.push(j),
                Status::AtLower if l.is_finite() => self.x[j] = l,
                Status::AtUpper if u.is_finite() => self.x[j] = u,
                _ if l.is_finite() => {
                    self.x[j] = l;
                    self.status[j] = Status::AtLower;
                }
                _ if u.is_finite() => {
                    self.x[j] = u;
                    self.status[j] = Status::AtUpper;
                }
                _ => self.status[j] = Status::Free,
            }
        }
        self.position = vec![NONBASIC; n + m];
        for (p, &j) in self.head.iter().enumerate() {
            self.position[j] = p;
        }
        if self.refactor().is_ok() {
            return true;
        }
        let columns: Vec<Column<'_>> = self.head.iter().map(|&j| self.column(j)).collect();
        let Some(swaps) = Basis::repair(m, &columns, REPAIR_FLOOR) else {
            return false;
        };
        for (pos, row) in swaps {
            let out = self.head[pos];
            let logical = n + row;
            self.status[out] = if self.lb[out].is_finite() {
                self.x[out] = self.lb[out];
                Status::AtLower
            } else if self.ub[out].is_finite() {
                self.x[out] = self.ub[out];
                Status::AtUpper
            } else {
                self.x[out] = 0.0;
                Status::Free
            };
            self.position[out] = NONBASIC;
            self.head[pos] = logical;
            self.position[logical] = pos;
            self.status[logical] = Status::Basic;
        }
        self.refactor().is_ok()
    }

    /// Slack basis plus artificials, then phase 1. Returns false if the LP
    /// is infeasible.
    fn phase1(&mut self) -> Result<bool, LpError> {
        let n = self.n;
        let m = self.m;
        self.x = vec![0.0; n + m];
        self.status = vec![Status::AtLower; n + m];
        for j in 0..n {
            let (l, u) = (self.lb[j], self.ub[j]);
            if l.is_finite() {
                self.x[j] = l;
            } else if u.is_finite() {
                self.x[j] = u;
                self.status[j] = Status::AtUpper;
            } else {
                self.status[j] = Status::Free;
            }
        }
        let mut residual = self.b.clone();
        for j in 0..n {
            if self.x[j] != 0.0 {
                for &(r, v) in &self.cols[j] {
                    residual[r] -= v * self.x[j];
                }
            }
        }

        self.head = vec![0; m];
        let tol = self.opts.feas_tol;
        for (r, &value) in residual.iter().enumerate() {
            let s = n + r;
            let (l, u) = (self.lb[s], self.ub[s]);
            if value >= l - tol && value <= u + tol {
                self.x[s] = value;
                self.status[s] = Status::Basic;
                self.head[r] = s;
            } else {
                let bound = value.clamp(l, u);
                self.x[s] = bound;
                self.status[s] = if bound == l { Status::AtLower } else { Status::AtUpper };
                let gap = value - bound;
                let a = self.ncols();
                self.artificials.push((r, gap.signum()));
                self.lb.push(0.0);
                self.ub.push(f64::INFINITY);
                self.x.push(gap.abs());
                self.status.push(Status::Basic);
                self.head[r] = a;
            }
        }
        self.position = vec![NONBASIC; self.ncols()];
        for (p, &j) in self.head.iter().enumerate() {
            self.position[j] = p;
        }
        self.refactor()?;

        let bnorm = self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !self.artificials.is_empty() {
            let mut cost = vec![0.0; self.ncols()];
            for c in cost.iter_mut().skip(n + m) {
                *c = -1.0;
            }
            // Phase 1 is bounded below by zero.
            let _ = self.run(&cost)?;
            let infeasibility: f64 = self.x[n + m..].iter().sum();
            if infeasibility > self.opts.feas_tol * (1.0 + bnorm) {
                return Ok(false);
            }
            for a in n + m..self.ncols() {
                self.ub[a] = 0.0;
                if self.status[a] != Status::Basic {
                    self.x[a] = 0.0;
                    self.status[a] = Status::AtLower;
                }
            }
        }
        Ok(true)
    }

    /// Widens every finite bound of the structural and logical columns by a
    /// small deterministic amount. Returns the original bounds.
    fn perturb_bounds(&mut self) -> Option<(Vec<f64>, Vec<f64>)> {
        let eps = self.opts.perturbation;
        if eps <= 0.0 {
            return None;
        }
        let saved = (self.lb.clone(), self.ub.clone());
        for j in 0..self.n + self.m {
            // Knuth multiplicative hash spreads the factors over [1, 2).
            let spread = 1.0 + ((j as u64).wrapping_mul(2_654_435_761) % 1024) as f64 / 1024.0;
            if self.lb[j].is_finite() {
                self.lb[j] -= eps * spread * (1.0 + self.lb[j].abs());
            }
            if self.ub[j].is_finite() {
                self.ub[j] += eps * spread * (1.0 + self.ub[j].abs());
            }
        }
        Some(saved)
    }

    fn restore_bounds(&mut self, lb: Vec<f64>, ub: Vec<f64>) -> Result<(), LpError> {
        let k = lb.len();
        self.lb[..k].copy_from_slice(&lb);
        self.ub[..k].copy_from_slice(&ub);
        for j in 0..k {
            match self.status[j] {
                Status::AtLower => self.x[j] = self.lb[j],
                Status::AtUpper => self.x[j] = self.ub[j],
                Status::Basic | Status::Free => {}
            }
        }
        self.refactor()
    }

    /// Phase 1 from the current basis, maximizing minus the sum of bound
    /// violations of the basic columns. Returns false if a positive
    /// violation remains at optimality.
    fn remove_infeasibilities(&mut self) -> Result<bool, LpError> {
        let tol = self.opts.feas_tol;
        let mut fresh = false;
        loop {
            if self.basis.eta_count() >= self.opts.refactor_every {
                self.refactor()?;
            }
            let mut cost = vec![0.0; self.ncols()];
            let mut infeasible = false;
            for &j in &self.head {
                if self.x[j] < self.lb[j] - tol {
                    cost[j] = 1.0;
                    infeasible = true;
                } else if self.x[j] > self.ub[j] + tol {
                    cost[j] = -1.0;
                    infeasible = true;
                }
            }
            if !infeasible {
                return Ok(true);
            }
            let cb: Vec<f64> = self.head.iter().map(|&j| cost[j]).collect();
            let pi = self.basis.btran(&cb);
            let Some((q, dir)) = self.price(&cost, &pi) else {
                if fresh || self.basis.eta_count() == 0 {
                    return Ok(false);
                }
                self.refactor()?;
                fresh = true;
                continue;
            };
            fresh = false;
            let alpha = self.basis.ftran(&self.dense_column(q));
            let Some((step, theta)) = self.composite_ratio_test(q, dir, &alpha) else {
                return Err(LpError::NumericalBreakdown { floor: self.opts.pivot_floor });
            };
            self.count_iteration(theta)?;
            self.apply(q, dir, step, theta, &alpha);
        }
    }

    /// Ratio test that lets infeasible basic columns travel back to the
    /// bound they violate.
    fn composite_ratio_test(&self, q: usize, dir: f64, alpha: &[f64]) -> Option<(Step, f64)> {
        let tol = self.opts.feas_tol;
        let amax = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let floor = self.opts.pivot_floor.max(PIVOT_REL_TOL * amax);
        let mut best: Option<(usize, f64, bool)> = None;
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < floor {
                continue;
            }
            let j = self.head[p];
            let delta = dir * a;
            let (x, lb, ub) = (self.x[j], self.lb[j], self.ub[j]);
            let hit = if x < lb - tol {
                (delta < 0.0).then(|| ((lb - x) / -delta, false))
            } else if x > ub + tol {
                (delta > 0.0).then(|| ((x - ub) / delta, true))
            } else if delta > 0.0 && lb.is_finite() {
                Some(((x - lb).max(0.0) / delta, false))
            } else if delta < 0.0 && ub.is_finite() {
                Some(((ub - x).max(0.0) / -delta, true))
            } else {
                None
            };
            let Some((ratio, to_upper)) = hit else { continue };
            let better = match best {
                None => true,
                Some((bp, br, _)) => {
                    ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > alpha[bp].abs())
                }
            };
            if better {
                best = Some((p, ratio, to_upper));
            }
        }
        let flip = self.ub[q] - self.lb[q];
        match best {
            Some((_, ratio, _)) if flip <= ratio => Some((Step::Flip, flip)),
            Some((pos, ratio, to_upper)) => Some((Step::Pivot { pos, to_upper }, ratio)),
            None => flip.is_finite().then_some((Step::Flip, flip)),
        }
    }

    fn count_iteration(&mut self, theta: f64) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations > self.max_iterations {
            return Err(LpError::IterationLimit(self.max_iterations));
        }
        if theta <= 1e-12 {
            self.degenerate += 1;
            if self.degenerate >= self.opts.bland_after {
                self.bland = true;
            }
        } else {
            self.degenerate = 0;
            self.bland = self.opts.bland_only;
        }
        Ok(())
    }

    fn apply(&mut self, q: usize, dir: f64, step: Step, theta: f64, alpha: &[f64]) {
        if theta != 0.0 {
            self.x[q] += dir * theta;
            for (p, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= dir * theta * a;
                }
            }
        }
        match step {
            Step::Flip => {
                if dir > 0.0 {
                    self.x[q] = self.ub[q];
                    self.status[q] = Status::AtUpper;
                } else {
                    self.x[q] = self.lb[q];
                    self.status[q] = Status::AtLower;
                }
            }
            Step::Pivot { pos, to_upper } => {
                let leaving = self.head[pos];
                if to_upper {
                    self.x[leaving] = self.ub[leaving];
                    self.status[leaving] = Status::AtUpper;
                } else {
                    self.x[leaving] = self.lb[leaving];
                    self.status[leaving] = Status::AtLower;
                }
                self.position[leaving] = NONBASIC;
                self.head[pos] = q;
                self.position[q] = pos;
                self.status[q] = Status::Basic;
                self.basis.push_eta(pos, alpha);
            }
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let columns: Vec<Column<'_>> = self.head.iter().map(|&j| self.column(j)).collect();
        self.basis = Basis::factor(self.m, &columns, self.opts.pivot_floor)?;
        let mut rhs = self.b.clone();
        for j in 0..self.ncols() {
            if self.position[j] == NONBASIC && self.x[j] != 0.0 {
                let xj = self.x[j];
                match self.column(j) {
                    Column::Unit { row, sign } => rhs[row] -= sign * xj,
                    Column::Sparse(entries) => {
                        for &(r, v) in entries {
                            rhs[r] -= v * xj;
                        }
                    }
                }
            }
        }
        let xb = self.basis.ftran(&rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
        Ok(())
    }

    fn price(&self, cost: &[f64], pi: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols() {
            let st = self.status[j];
            if st == Status::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let (api, scale) = self.dot(j, pi);
            let d = cost[j] - api;
            let tol = self.opts.opt_tol * (1.0 + cost[j].abs())
                + 4.0 * f64::EPSILON * (scale + cost[j].abs());
            let dir = match st {
                Status::AtLower if d > tol => 1.0,
                Status::AtUpper if d < -tol => -1.0,
                Status::Free if d.abs() > tol => d.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = d.abs();
            match best {
                Some((_, _, s)) if score <= s * (1.0 + 1e-9) + 1e-12 => {}
                _ => best = Some((j, dir, score)),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64]) -> Option<(Step, f64)> {
        let amax = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let floor = self.opts.pivot_floor.max(PIVOT_REL_TOL * amax);
        let flip = self.ub[q] - self.lb[q];
        let harris_tol = if self.bland { 0.0 } else { 0.1 * self.opts.feas_tol };
        // (position, exact ratio, relaxed ratio, hits upper)
        let mut candidates: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() < floor {
                continue;
            }
            let j = self.head[p];
            let delta = dir * a;
            let xj = self.x[j];
            if delta > 0.0 && self.lb[j].is_finite() {
                let room = xj - self.lb[j];
                candidates.push((p, room / delta, (room + harris_tol) / delta, false));
            } else if delta < 0.0 && self.ub[j].is_finite() {
                let room = self.ub[j] - xj;
                candidates.push((p, room / -delta, (room + harris_tol) / -delta, true));
            }
        }
        if candidates.is_empty() {
            return flip.is_finite().then_some((Step::Flip, flip));
        }
        let chosen = if self.bland {
            let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            candidates
                .iter()
                .filter(|c| c.1 <= min + 1e-12)
                .min_by_key(|c| self.head[c.0])
                .copied()
                .unwrap()
        } else {
            let bound = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            let mut pick: Option<(usize, f64, f64, bool)> = None;
            for &c in candidates.iter().filter(|c| c.1 <= bound) {
                pick = match pick {
                    None => Some(c),
                    Some(prev) => {
                        let (a, b) = (alpha[c.0].abs(), alpha[prev.0].abs());
                        if a > b * (1.0 + 1e-9)
                            || (a >= b * (1.0 - 1e-9) && self.head[c.0] < self.head[prev.0])
                        {
                            Some(c)
                        } else {
                            Some(prev)
                        }
                    }
                };
            }
            pick.unwrap()
        };
        let theta = chosen.1.max(0.0);
        if flip <= theta {
            return Some((Step::Flip, flip));
        }
        Some((Step::Pivot { pos: chosen.0, to_upper: chosen.3 }, theta))
    }

    fn run(&mut self, cost: &[f64]) -> Result<Outcome, LpError> {
        let mut fresh = false;
        loop {
            if self.basis.eta_count() >= self.opts.refactor_every {
                self.refactor()?;
            }
            let cb: Vec<f64> = self.head.iter().map(|&j| cost[j]).collect();
            let pi = self.basis.btran(&cb);
            let Some((q, dir)) = self.price(cost, &pi) else {
                if fresh || self.basis.eta_count() == 0 {
                    return Ok(Outcome::Optimal);
                }
                // Confirm optimality on a fresh factorization.
                self.refactor()?;
                fresh = true;
                continue;
            };
            fresh = false;
            let alpha = self.basis.ftran(&self.dense_column(q));
            let step = match self.ratio_test(q, dir, &alpha) {
                Some(step) => Some(step),
                // No blocking entry: confirm on a fresh factorization.
                None if self.basis.eta_count() > 0 => {
                    self.refactor()?;
                    continue;
                }
                None => None,
            };
            let Some((step, theta)) = step else {
                return Ok(Outcome::Unbounded);
            };

            self.count_iteration(theta)?;
            self.apply(q, dir, step, theta, &alpha);
        }
    }
}
