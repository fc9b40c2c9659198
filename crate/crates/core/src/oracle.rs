//! Global bounds used to score local solutions: a McCormick relaxation for
//! an upper bound and a pool-quality grid search for a feasible lower bound.

use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::formulations::{self, FlowVector};
use crate::instance::{Layer, PoolingInstance, Topology};
use crate::lp::{self, LinearProgram, LpStatus, Relation, SolverOptions};
use crate::subproblems;

pub const DEFAULT_GRID_BUDGET: f64 = 1e6;

/// Flow-only model tolerance used to re-check grid candidates.
/// Relative improvement below which envelope separation stops.
pub const STALL_TOL: f64 = 1e-9;
pub const RECHECK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub lower_bound_flow: FlowVector,
    /// Grid points per attribute range.
    pub grid_resolution: usize,
}

/// `[min_i lambda_ik, max_i lambda_ik]` for every attribute.
pub fn quality_ranges(inst: &PoolingInstance) -> Vec<(f64, f64)> {
    (0..inst.attributes)
        .map(|k| {
            inst.input_quality.iter().map(|q| q[k]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
        })
        .map(|(lo, hi)| if lo > hi { (0.0, 0.0) } else { (lo, hi) })
        .collect()
}

fn finite_sum(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.sum()
}

/// Upper bound on the flow of each pool-to-output arc implied by arc, node
/// and supply/demand capacities.
fn pool_output_bounds(inst: &PoolingInstance, topo: &Topology) -> Result<Vec<(usize, f64)>, OracleError> {
    let mut out = Vec::new();
    for l in 0..inst.pools {
        let supply = finite_sum(topo.pool_in[l].iter().map(|&(a, i)| {
            let arc = inst.arcs[a].capacity;
            match (arc, inst.input_capacity[i]) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            }
        }));
        let demand = finite_sum(topo.pool_out[l].iter().map(|&(a, j)| {
            match (inst.arcs[a].capacity, inst.output_capacity[j]) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            }
        }));
        for &(a, j) in &topo.pool_out[l] {
            let bound = [inst.arcs[a].capacity, inst.pool_capacity[l], inst.output_capacity[j], supply, demand]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, f64::min);
            if !bound.is_finite() {
                return Err(OracleError::Unbounded { arc: a });
            }
            out.push((a, bound.max(0.0)));
        }
    }
    Ok(out)
}

fn solve_optimal(lp: &LinearProgram) -> Result<lp::LpSolution, OracleError> {
    let sol = lp::solve_with(lp, &SolverOptions::default())?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        s => Err(OracleError::Status(s)),
    }
}

/// Optimal value of the McCormick relaxation of the flow-and-quality model.
///
/// The four envelope inequalities per product are separated lazily: the LP
/// starts with the product variables boxed and violated envelopes are added
/// until none remain, which yields the same optimum as the full relaxation.
pub fn mccormick_upper_bound(inst: &PoolingInstance) -> Result<f64, OracleError> {
    let topo = inst.topology();
    let y_bounds = pool_output_bounds(inst, &topo)?;
    let ranges = quality_ranges(inst);
    let (mut relaxation, _) = subproblems::build_mcf(inst);

    let mut alpha = vec![vec![0; inst.attributes]; inst.pools];
    for row in alpha.iter_mut() {
        for (k, col) in row.iter_mut().enumerate() {
            *col = relaxation.add_var(0.0, Some(ranges[k].0), Some(ranges[k].1));
        }
    }
    // (arc, pool, output, y upper bound, z column per attribute)
    let mut products = Vec::new();
    for &(a, y_ub) in &y_bounds {
        relaxation.var_ub[a] = Some(relaxation.var_ub[a].map_or(y_ub, |u| u.min(y_ub)));
        let tail = inst.arcs[a].tail.index;
        let head = inst.arcs[a].head.index;
        let z: Vec<usize> = ranges
            .iter()
            .map(|&(lo, hi)| {
                let (zl, zu) = ((lo * y_ub).min(0.0), (hi * y_ub).max(0.0));
                relaxation.add_var(0.0, Some(zl), Some(zu))
            })
            .collect();
        products.push((a, tail, head, y_ub, z));
    }

    for l in 0..inst.pools {
        for k in 0..inst.attributes {
            let mut coeffs: Vec<(usize, f64)> =
                topo.pool_in[l].iter().map(|&(a, i)| (a, inst.input_quality[i][k])).collect();
            coeffs.extend(products.iter().filter(|p| p.1 == l).map(|p| (p.4[k], -1.0)));
            relaxation.add_row(coeffs, Relation::Eq, 0.0);
        }
    }
    for j in 0..inst.outputs {
        for k in 0..inst.attributes {
            for (bound, rel) in [(inst.quality_lb[j][k], Relation::Ge), (inst.quality_ub[j][k], Relation::Le)] {
                let mut coeffs = Vec::new();
                for &(a, tail) in &topo.output_in[j] {
                    coeffs.push((a, -bound));
                    if tail.layer == Layer::Input {
                        coeffs.push((a, inst.input_quality[tail.index][k]));
                    }
                }
                coeffs.extend(products.iter().filter(|p| p.2 == j).map(|p| (p.4[k], 1.0)));
                relaxation.add_row(coeffs, rel, 0.0);
            }
        }
    }

    let mut added = vec![[false; 4]; products.len() * inst.attributes];
    let mut previous = None;
    loop {
        let sol = solve_optimal(&relaxation)?;
        let value = sol.objective_value.expect("optimal value");
        // Every partial relaxation is already an upper bound; stop once the
        // cuts no longer tighten it.
        if previous.is_some_and(|p: f64| p - value <= STALL_TOL * (1.0 + p.abs())) {
            return Ok(value);
        }
        previous = Some(value);
        let x = sol.x.as_ref().expect("optimal point");
        let mut cuts = 0;
        for (p, (a, l, _, y_ub, z)) in products.iter().enumerate() {
            for k in 0..inst.attributes {
                let (lo, hi) = ranges[k];
                let (y, al, zz) = (x[*a], x[alpha[*l][k]], x[z[k]]);
                let tol = 1e-9 * (1.0 + zz.abs());
                // z - cy*y - ca*alpha >= rhs (lower) or <= rhs (upper)
                let envelopes = [
                    (lo, 0.0, 0.0, true),
                    (hi, *y_ub, -hi * y_ub, true),
                    (hi, 0.0, 0.0, false),
                    (lo, *y_ub, -lo * y_ub, false),
                ];
                for (e, &(cy, ca, rhs, lower)) in envelopes.iter().enumerate() {
                    let slack = zz - cy * y - ca * al - rhs;
                    let violated = if lower { slack < -tol } else { slack > tol };
                    let flag = &mut added[p * inst.attributes + k][e];
                    if violated && !*flag {
                        *flag = true;
                        cuts += 1;
                        let rel = if lower { Relation::Ge } else { Relation::Le };
                        relaxation.add_row([(z[k], 1.0), (*a, -cy), (alpha[*l][k], -ca)], rel, rhs);
                    }
                }
            }
        }
        if cuts == 0 {
            return Ok(value);
        }
    }
}

/// Best flow found by fixing every pool quality on a uniform grid and
/// solving the remaining LP. `steps` counts grid points per range including
/// both endpoints; a single step uses the midpoint. The zero flow is always
/// a candidate, so the result is at least 0.
pub fn grid_lower_bound(
    inst: &PoolingInstance,
    steps: usize,
    budget: f64,
) -> Result<(f64, FlowVector), OracleError> {
    let dims = inst.pools * inst.attributes;
    let points = (steps.max(1) as f64).powi(dims as i32);
    if steps == 0 || points > budget {
        return Err(OracleError::BudgetExceeded { points, budget });
    }
    let ranges = quality_ranges(inst);
    let values: Vec<Vec<f64>> = ranges
        .iter()
        .map(|&(lo, hi)| {
            if steps == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..steps).map(|s| lo + (hi - lo) * s as f64 / (steps - 1) as f64).collect()
            }
        })
        .collect();

    let topo = inst.topology();
    let (base, map) = subproblems::build_mcf(inst);
    let mut best = (0.0, FlowVector::zeros(inst.num_arcs()));
    let mut index = vec![0usize; dims];
    loop {
        let mut lp = base.clone();
        let alpha = |l: usize, k: usize| values[k][index[l * inst.attributes + k]];
        for l in 0..inst.pools {
            for k in 0..inst.attributes {
                let a_lk = alpha(l, k);
                let mut coeffs: Vec<(usize, f64)> =
                    topo.pool_in[l].iter().map(|&(a, i)| (a, inst.input_quality[i][k])).collect();
                coeffs.extend(topo.pool_out[l].iter().map(|&(a, _)| (a, -a_lk)));
                lp.add_row(coeffs, Relation::Eq, 0.0);
            }
        }
        for j in 0..inst.outputs {
            for k in 0..inst.attributes {
                for (bound, rel) in [(inst.quality_lb[j][k], Relation::Ge), (inst.quality_ub[j][k], Relation::Le)] {
                    let coeffs = topo.output_in[j].iter().map(|&(a, tail)| {
                        let q = match tail.layer {
                            Layer::Input => inst.input_quality[tail.index][k],
                            _ => alpha(tail.index, k),
                        };
                        (a, q - bound)
                    });
                    lp.add_row(coeffs.collect::<Vec<_>>(), rel, 0.0);
                }
            }
        }
        let sol = lp::solve_with(&lp, &SolverOptions::default())?;
        if sol.status == LpStatus::Unbounded {
            return Err(OracleError::Status(LpStatus::Unbounded));
        }
        if let (Some(x), Some(value)) = (sol.x.as_ref(), sol.objective_value) {
            let y = map.extract_flow(x);
            if value > best.0
                && formulations::residuals_f(inst, &y.0).max_violation <= RECHECK_TOL
            {
                best = (formulations::objective(inst, &y.0), y);
            }
        }

        // advance the grid index, last coordinate fastest
        let mut d = dims;
        loop {
            if d == 0 {
                return Ok(best);
            }
            d -= 1;
            index[d] += 1;
            if index[d] < values[0].len() {
                break;
            }
            index[d] = 0;
        }
    }
}

/// Upper and lower bounds in one report.
pub fn bound_report(inst: &PoolingInstance, steps: usize, budget: f64) -> Result<BoundReport, OracleError> {
    let upper_bound = mccormick_upper_bound(inst)?;
    let (lower_bound, lower_bound_flow) = grid_lower_bound(inst, steps, budget)?;
    Ok(BoundReport { upper_bound, lower_bound, lower_bound_flow, grid_resolution: steps })
}

/// Largest step count not above `steps` whose grid fits in `budget`; at
/// least 1.
pub fn affordable_steps(inst: &PoolingInstance, steps: usize, budget: f64) -> usize {
    let dims = (inst.pools * inst.attributes) as i32;
    (1..=steps.max(1)).rev().find(|&s| (s as f64).powi(dims) <= budget).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::NodeId;

    fn tiny() -> PoolingInstance {
        let mut inst = PoolingInstance::empty(2, 1, 1, 1);
        inst.add_arc(NodeId::input(0), NodeId::pool(0), -1.0, None);
        inst.add_arc(NodeId::input(1), NodeId::pool(0), -2.0, None);
        inst.add_arc(NodeId::pool(0), NodeId::output(0), 5.0, None);
        inst.output_capacity[0] = Some(10.0);
        inst.input_quality = vec![vec![3.0], vec![1.0]];
        inst.quality_ub = vec![vec![2.0]];
        inst
    }

    #[test]
    fn grid_finds_the_tiny_optimum() {
        let (value, y) = grid_lower_bound(&tiny(), 41, DEFAULT_GRID_BUDGET).unwrap();
        assert!((value - 35.0).abs() < 1e-9);
        assert!((formulations::pool_quality(&tiny(), &y.0).0[0][0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn grid_midpoint_is_a_weaker_bound() {
        let (mid, _) = grid_lower_bound(&tiny(), 1, DEFAULT_GRID_BUDGET).unwrap();
        assert!(mid <= 35.0 + 1e-9);
    }

    #[test]
    fn grid_budget_is_enforced() {
        let err = grid_lower_bound(&tiny(), 41, 40.0).unwrap_err();
        assert!(matches!(err, OracleError::BudgetExceeded { .. }));
        assert_eq!(affordable_steps(&tiny(), 41, 40.0), 40);
    }

    #[test]
    fn mccormick_sandwiches_the_tiny_optimum() {
        let ub = mccormick_upper_bound(&tiny()).unwrap();
        assert!(ub >= 35.0 - 1e-9 && ub <= 40.0 + 1e-9, "{ub}");
    }

    #[test]
    fn unbounded_pool_flow_is_reported() {
        let mut inst = tiny();
        inst.output_capacity[0] = None;
        assert!(matches!(mccormick_upper_bound(&inst), Err(OracleError::Unbounded { arc: 2 })));
    }

    #[test]
    fn quality_infeasible_instance_yields_zero() {
        let mut inst = tiny();
        inst.quality_ub = vec![vec![0.5]];
        let (value, y) = grid_lower_bound(&inst, 5, DEFAULT_GRID_BUDGET).unwrap();
        assert_eq!(value, 0.0);
        assert!(y.0.iter().all(|&v| v == 0.0));
    }
}
