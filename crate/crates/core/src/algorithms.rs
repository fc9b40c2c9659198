//! Iterative LP-based drivers: SLP on the flow-and-quality model, distributed
//! recursion, SLP on the flow-only model and penalty distributed recursion,
//! all started from the multicommodity-flow relaxation optimum.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::SolveError;
use crate::formulations::{self, FlowVector, QualityVector};
use crate::instance::PoolingInstance;
use crate::lp::{self, LinearProgram, LpStatus, SolverOptions};
use crate::subproblems::{self, PenaltyState, VariableMap};

/// Penalties never grow beyond this value.
pub const PENALTY_CAP: f64 = 1e12;

/// Objectives this close to zero count as zero in gap computations.
pub const ZERO_OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub t_max: usize,
    pub mu0: f64,
    pub nu0: f64,
    pub delta: f64,
    pub conv_tol: f64,
    pub feas_tol: f64,
    pub slack_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t_max: 100,
            mu0: 1.0,
            nu0: 1.0,
            delta: 10.0,
            conv_tol: 1e-8,
            feas_tol: 1e-6,
            slack_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if self.t_max < 1 {
            return bad("t_max must be at least 1");
        }
        if !(self.delta > 1.0) {
            return bad("delta must exceed 1");
        }
        if !(self.mu0 > 0.0 && self.nu0 > 0.0) {
            return bad("initial penalties must be positive");
        }
        if !(self.conv_tol > 0.0 && self.feas_tol > 0.0 && self.slack_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Slp,
    Dr,
    Slpf,
    Pdr,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] =
        [AlgorithmKind::Slp, AlgorithmKind::Dr, AlgorithmKind::Slpf, AlgorithmKind::Pdr];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::Slp => "slp",
            AlgorithmKind::Dr => "dr",
            AlgorithmKind::Slpf => "slpf",
            AlgorithmKind::Pdr => "pdr",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown algorithm {s:?} (expected slp, dr, slpf or pdr)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    InfeasibleSubproblem,
    UnboundedSubproblem,
    /// The LP solver broke down (singular basis or iteration limit).
    LpBreakdown(String),
    PenaltyCapReached,
    /// A fixed point was reached that violates the flow-only model.
    InfeasibleFixedPoint,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::InfeasibleSubproblem => f.write_str("infeasible subproblem"),
            FailureReason::UnboundedSubproblem => f.write_str("unbounded subproblem"),
            FailureReason::LpBreakdown(m) => write!(f, "LP solver failure: {m}"),
            FailureReason::PenaltyCapReached => write!(f, "penalty cap {PENALTY_CAP:e} reached"),
            FailureReason::InfeasibleFixedPoint => f.write_str("fixed point violates quality constraints"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slacks {
    pub s_min: Vec<Vec<f64>>,
    pub s_max: Vec<Vec<f64>>,
}

impl Slacks {
    pub fn max(&self) -> f64 {
        self.s_min.iter().chain(&self.s_max).flatten().copied().fold(0.0, f64::max)
    }
}

/// One subproblem solve. Point data is present iff the LP was optimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub lp_status: Option<LpStatus>,
    pub o_t: Option<f64>,
    pub y: Option<FlowVector>,
    pub alpha: Option<QualityVector>,
    /// Largest flow-only model violation at `y`.
    pub max_violation: Option<f64>,
    /// Penalties the subproblem was built with (PDR only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penalties: Option<PenaltyState>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slacks: Option<Slacks>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: AlgorithmKind,
    pub config: SolverConfig,
    pub o_0: f64,
    pub y0: FlowVector,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub feasible: bool,
    pub final_y: Option<FlowVector>,
    pub final_alpha: Option<QualityVector>,
    pub final_objective: Option<f64>,
    pub iterations: usize,
    /// Seconds, including the initial relaxation.
    pub wall_time: f64,
    pub or_metric: f64,
    pub failure_reason: Option<FailureReason>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail") + "\n"
    }
}

fn lp_options() -> SolverOptions {
    SolverOptions::default()
}

/// Optimum of the multicommodity-flow relaxation and its value.
pub fn initial_point(inst: &PoolingInstance) -> Result<(FlowVector, f64), SolveError> {
    let (lp, map) = subproblems::build_mcf(inst);
    let sol = lp::solve_with(&lp, &lp_options())?;
    match sol.status {
        LpStatus::Optimal => {
            let x = sol.x.expect("optimal solution has a point");
            Ok((map.extract_flow(&x), sol.objective_value.expect("optimal value")))
        }
        LpStatus::Unbounded => Err(SolveError::Initialization("unbounded")),
        LpStatus::Infeasible => Err(SolveError::Initialization("infeasible")),
    }
}

pub fn run_slp(inst: &PoolingInstance, config: &SolverConfig) -> Result<RunReport, SolveError> {
    run(AlgorithmKind::Slp, inst, config)
}

pub fn run_dr(inst: &PoolingInstance, config: &SolverConfig) -> Result<RunReport, SolveError> {
    run(AlgorithmKind::Dr, inst, config)
}

pub fn run_slp_f(inst: &PoolingInstance, config: &SolverConfig) -> Result<RunReport, SolveError> {
    run(AlgorithmKind::Slpf, inst, config)
}

pub fn run_pdr(inst: &PoolingInstance, config: &SolverConfig) -> Result<RunReport, SolveError> {
    run(AlgorithmKind::Pdr, inst, config)
}

pub fn run(
    kind: AlgorithmKind,
    inst: &PoolingInstance,
    config: &SolverConfig,
) -> Result<RunReport, SolveError> {
    let start = Instant::now();
    let (y0, o_0) = initial_point(inst)?;
    let mut report = run_from(kind, inst, config, y0, o_0)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

struct Iterate {
    y: FlowVector,
    alpha: QualityVector,
}

/// Runs `kind` from a given initial point, e.g. one shared across settings.
pub fn run_from(
    kind: AlgorithmKind,
    inst: &PoolingInstance,
    config: &SolverConfig,
    y0: FlowVector,
    o_0: f64,
) -> Result<RunReport, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let opts = lp_options();
    let mut penalties = PenaltyState::uniform(inst, config.mu0, config.nu0);
    let mut current = Iterate { alpha: formulations::pool_quality(inst, &y0.0), y: y0.clone() };
    let mut last_feasible = (formulations::residuals_f(inst, &y0.0).max_violation <= config.feas_tol)
        .then(|| Iterate { y: current.y.clone(), alpha: current.alpha.clone() });
    let mut trace = Vec::new();
    let mut converged = false;
    let mut failure = None;
    let mut basis = None;

    for t in 0..config.t_max {
        let (lp, map) = build(kind, inst, &current, &penalties)?;
        let mut record = IterationRecord {
            t,
            lp_status: None,
            o_t: None,
            y: None,
            alpha: None,
            max_violation: None,
            penalties: (kind == AlgorithmKind::Pdr).then(|| penalties.clone()),
            slacks: None,
        };
        let sol = match lp::solve_warm(&lp, &opts, basis.as_ref()) {
            Ok(sol) => sol,
            Err(e) => {
                trace.push(record);
                failure = Some(FailureReason::LpBreakdown(e.to_string()));
                break;
            }
        };
        record.lp_status = Some(sol.status);
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => failure = Some(FailureReason::InfeasibleSubproblem),
            LpStatus::Unbounded => failure = Some(FailureReason::UnboundedSubproblem),
        }
        if failure.is_some() {
            trace.push(record);
            break;
        }

        basis = sol.warm_start;
        let value = sol.objective_value.expect("optimal solution has a value");
        let mut x = sol.x.expect("optimal solution has a point");
        // Among optimal points prefer the current one, so that runs stop at
        // fixed points instead of drifting across an optimal face.
        let stay = map.embed(&lp, &current.y.0, &current.alpha);
        if lp.max_violation(&stay) <= opts.feas_tol && lp.objective_at(&stay) >= value - 1e-9 * (1.0 + value.abs()) {
            x = stay;
        }
        let y = map.extract_flow(&x);
        let alpha = match kind {
            AlgorithmKind::Slp => map.extract_quality(&x).expect("SLP subproblem has quality columns"),
            _ => formulations::pool_quality(inst, &y.0),
        };
        let violation = formulations::residuals_f(inst, &y.0).max_violation;
        let slacks = map.extract_slacks(&x).map(|(s_min, s_max)| Slacks { s_min, s_max });
        let step = match kind {
            AlgorithmKind::Slp => y.max_abs_diff(&current.y).max(alpha.max_abs_diff(&current.alpha)),
            _ => y.max_abs_diff(&current.y),
        };
        let slack_free = slacks.as_ref().map_or(true, |s| s.max() <= config.slack_tol);

        record.o_t = sol.objective_value;
        record.y = Some(y.clone());
        record.alpha = Some(alpha.clone());
        record.max_violation = Some(violation);
        record.slacks = slacks.clone();
        trace.push(record);

        let next = Iterate { y, alpha };
        if violation <= config.feas_tol {
            last_feasible = Some(Iterate { y: next.y.clone(), alpha: next.alpha.clone() });
        }
        if step <= config.conv_tol && slack_free {
            converged = true;
            current = next;
            break;
        }
        if let Some(s) = &slacks {
            if !grow_penalties(&mut penalties, s, config) {
                failure = Some(FailureReason::PenaltyCapReached);
                current = next;
                break;
            }
        }
        current = next;
    }

    let mut final_point = last_feasible;
    if converged {
        if formulations::residuals_f(inst, &current.y.0).max_violation <= config.feas_tol {
            final_point = Some(current);
        } else {
            failure = Some(FailureReason::InfeasibleFixedPoint);
        }
    }
    let final_objective = final_point.as_ref().map(|p| formulations::objective(inst, &p.y.0));
    let or_metric = objective_ratio(&trace, o_0);
    Ok(RunReport {
        algorithm: kind,
        config: config.clone(),
        o_0,
        y0,
        iterations: trace.len(),
        trace,
        converged,
        feasible: final_point.is_some(),
        final_y: final_point.as_ref().map(|p| p.y.clone()),
        final_alpha: final_point.map(|p| p.alpha),
        final_objective,
        wall_time: start.elapsed().as_secs_f64(),
        or_metric,
        failure_reason: failure,
    })
}

fn build(
    kind: AlgorithmKind,
    inst: &PoolingInstance,
    current: &Iterate,
    penalties: &PenaltyState,
) -> Result<(LinearProgram, VariableMap), SolveError> {
    let y = &current.y.0;
    Ok(match kind {
        AlgorithmKind::Slp => subproblems::build_slp_p(inst, &current.alpha, y)?,
        AlgorithmKind::Dr => subproblems::build_dr(inst, &current.alpha, y)?,
        AlgorithmKind::Slpf => subproblems::build_slp_f(inst, y)?,
        AlgorithmKind::Pdr => subproblems::build_pslp(inst, y, penalties)?,
    })
}

/// Multiplies each penalty whose slack is positive by `delta`. Returns false
/// if a penalty already at the cap would have to grow.
fn grow_penalties(penalties: &mut PenaltyState, slacks: &Slacks, config: &SolverConfig) -> bool {
    let mut ok = true;
    let mut grow = |p: &mut f64, s: f64| {
        if s > config.slack_tol {
            if *p >= PENALTY_CAP {
                ok = false;
            } else {
                *p = (*p * config.delta).min(PENALTY_CAP);
            }
        }
    };
    for (j, row) in slacks.s_min.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            grow(&mut penalties.mu[j][k], s);
        }
    }
    for (j, row) in slacks.s_max.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            grow(&mut penalties.nu[j][k], s);
        }
    }
    ok
}

/// Mean of `o_t / o_0` over the optimal solves; 1 when `o_0` is not positive.
fn objective_ratio(trace: &[IterationRecord], o_0: f64) -> f64 {
    if o_0 <= 0.0 {
        return 1.0;
    }
    let values: Vec<f64> = trace.iter().filter_map(|r| r.o_t).collect();
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|o| o / o_0).sum::<f64>() / values.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when the gap is undefined (`o* = 0` but a nonzero objective).
    pub gap_percent: Option<f64>,
    pub or_metric: f64,
}

/// Relative gap of the run's final objective against `best_objective`.
/// Runs without a feasible solution score a gap of 100.
pub fn compute_metrics(report: &RunReport, best_objective: f64) -> Metrics {
    Metrics { gap_percent: gap_percent(report.final_objective, best_objective), or_metric: report.or_metric }
}

pub fn gap_percent(objective: Option<f64>, best: f64) -> Option<f64> {
    let Some(o) = objective else { return Some(100.0) };
    if best == 0.0 {
        return (o.abs() <= ZERO_OBJECTIVE_TOL).then_some(0.0);
    }
    Some((best - o) / best * 100.0)
}
