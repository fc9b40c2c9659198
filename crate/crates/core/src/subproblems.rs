//! Builders for the LP subproblems solved by the iterative algorithms.
//!
//! Column layout is fixed: flow columns come first in arc order, followed
//! by pool-quality columns (`build_slp_p`) or slack columns (`build_pslp`),
//! each block ordered pool/output-major then attribute. Every builder emits
//! the MCF rows first, in the same order, so they are a prefix of every
//! subproblem's row list.

use crate::error::FormulationError;
use crate::formulations::{self, FlowVector, LinearizedTerms, QualityVector};
use crate::instance::{Layer, PoolingInstance, Topology};
use crate::lp::{LinearProgram, Relation};

const NOISE_TOL: f64 = 1e-12;

/// Column index map of a built subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableMap {
    /// Column of each arc's flow.
    pub flow: Vec<usize>,
    /// `[pool][attribute]` column of alpha, SLP on (P) only.
    pub quality: Option<Vec<Vec<usize>>>,
    /// `[output][attribute]` columns of the lower-bound slacks, PSLP only.
    pub slack_min: Option<Vec<Vec<usize>>>,
    /// `[output][attribute]` columns of the upper-bound slacks, PSLP only.
    pub slack_max: Option<Vec<Vec<usize>>>,
    pub num_columns: usize,
}

impl VariableMap {
    fn flows(inst: &PoolingInstance) -> Self {
        let n = inst.num_arcs();
        VariableMap {
            flow: (0..n).collect(),
            quality: None,
            slack_min: None,
            slack_max: None,
            num_columns: n,
        }
    }

    fn block(&mut self, rows: usize, cols: usize) -> Vec<Vec<usize>> {
        let start = self.num_columns;
        self.num_columns += rows * cols;
        (0..rows).map(|r| (0..cols).map(|c| start + r * cols + c).collect()).collect()
    }

    /// Flow part of an LP solution.
    pub fn extract_flow(&self, x: &[f64]) -> FlowVector {
        FlowVector(self.flow.iter().map(|&c| x[c]).collect())
    }

    pub fn extract_quality(&self, x: &[f64]) -> Option<QualityVector> {
        self.quality
            .as_ref()
            .map(|q| QualityVector(q.iter().map(|r| r.iter().map(|&c| x[c]).collect()).collect()))
    }

    /// `(s_min, s_max)` indexed `[output][attribute]`.
    pub fn extract_slacks(&self, x: &[f64]) -> Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let pick = |b: &Vec<Vec<usize>>| -> Vec<Vec<f64>> {
            b.iter().map(|r| r.iter().map(|&c| x[c]).collect()).collect()
        };
        Some((pick(self.slack_min.as_ref()?), pick(self.slack_max.as_ref()?)))
    }

    /// LP point for flows `y` and, where the subproblem has them, qualities
    /// `alpha`; slack columns get the smallest values satisfying their rows.
    pub fn embed(&self, lp: &LinearProgram, y: &[f64], alpha: &QualityVector) -> Vec<f64> {
        let mut x = vec![0.0; self.num_columns];
        for (&c, &v) in self.flow.iter().zip(y) {
            x[c] = v;
        }
        if let Some(q) = &self.quality {
            for (cols, vals) in q.iter().zip(&alpha.0) {
                for (&c, &v) in cols.iter().zip(vals) {
                    x[c] = v;
                }
            }
        }
        let (Some(smin), Some(smax)) = (&self.slack_min, &self.slack_max) else { return x };
        let mut is_slack = vec![false; self.num_columns];
        for &c in smin.iter().chain(smax).flatten() {
            is_slack[c] = true;
        }
        for row in &lp.rows {
            let Some(&(c, coef)) = row.coeffs.iter().find(|e| is_slack[e.0]) else { continue };
            let others: f64 = row.coeffs.iter().filter(|e| e.0 != c).map(|&(j, v)| v * x[j]).sum();
            let need = match row.relation {
                Relation::Eq => 0.0,
                Relation::Ge | Relation::Le => (row.rhs - others) / coef,
            };
            x[c] = x[c].max(need).max(0.0);
        }
        x
    }

    /// Column names for LP text dumps, e.g. `y_input0_pool1`, `alpha_pool0_k2`.
    pub fn names(&self, inst: &PoolingInstance) -> Vec<String> {
        let mut names = vec![String::new(); self.num_columns];
        for (a, &c) in self.flow.iter().enumerate() {
            names[c] = format!("y_{}_{}", inst.arcs[a].tail, inst.arcs[a].head);
        }
        let mut fill = |block: &Option<Vec<Vec<usize>>>, prefix: &str, node: &str| {
            for (r, row) in block.iter().flatten().enumerate() {
                for (k, &c) in row.iter().enumerate() {
                    names[c] = format!("{prefix}_{node}{r}_k{k}");
                }
            }
        };
        fill(&self.quality, "alpha", "pool");
        fill(&self.slack_min, "smin", "output");
        fill(&self.slack_max, "smax", "output");
        names
    }
}

/// Penalty multipliers of the PSLP objective, indexed `[output][attribute]`.
/// `mu` weighs the lower-bound slacks and `nu` the upper-bound slacks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PenaltyState {
    pub mu: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
}

impl PenaltyState {
    pub fn uniform(inst: &PoolingInstance, mu0: f64, nu0: f64) -> Self {
        PenaltyState {
            mu: vec![vec![mu0; inst.attributes]; inst.outputs],
            nu: vec![vec![nu0; inst.attributes]; inst.outputs],
        }
    }
}

fn mcf_lp(inst: &PoolingInstance, topo: &Topology, n: usize) -> LinearProgram {
    let mut lp = LinearProgram::new(n);
    for (a, arc) in inst.arcs.iter().enumerate() {
        lp.objective[a] = arc.weight;
        lp.var_ub[a] = arc.capacity;
    }
    for l in 0..inst.pools {
        let inflow = topo.pool_in[l].iter().map(|&(a, _)| (a, 1.0));
        let outflow = topo.pool_out[l].iter().map(|&(a, _)| (a, -1.0));
        lp.add_row(inflow.chain(outflow), Relation::Eq, 0.0);
    }
    for (i, cap) in inst.input_capacity.iter().enumerate() {
        if let Some(u) = *cap {
            lp.add_row(topo.input_out[i].iter().map(|&a| (a, 1.0)), Relation::Le, u);
        }
    }
    for (l, cap) in inst.pool_capacity.iter().enumerate() {
        if let Some(u) = *cap {
            lp.add_row(topo.pool_out[l].iter().map(|&(a, _)| (a, 1.0)), Relation::Le, u);
        }
    }
    for (j, cap) in inst.output_capacity.iter().enumerate() {
        if let Some(u) = *cap {
            lp.add_row(topo.output_in[j].iter().map(|&(a, _)| (a, 1.0)), Relation::Le, u);
        }
    }
    lp
}

/// Multi-commodity flow relaxation: flow rows only, no quality rows.
pub fn build_mcf(inst: &PoolingInstance) -> (LinearProgram, VariableMap) {
    let topo = inst.topology();
    let map = VariableMap::flows(inst);
    (mcf_lp(inst, &topo, map.num_columns), map)
}

/// Quality rows at output `j`, attribute `k`, in the form
/// `sum_i lambda_ik y_ij + pool terms - bound * inflow (>= or <=) 0`,
/// returned as (coefficients, constant) with pool terms taken from `terms`.
fn quality_row(
    inst: &PoolingInstance,
    topo: &Topology,
    terms: &LinearizedTerms,
    j: usize,
    k: usize,
    bound: f64,
) -> (Vec<(usize, f64)>, f64) {
    let mut coeffs = Vec::new();
    let mut constant = 0.0;
    for &(a, tail) in &topo.output_in[j] {
        coeffs.push((a, -bound));
        if tail.layer == Layer::Input {
            coeffs.push((a, inst.input_quality[tail.index][k]));
        }
    }
    for t in terms.terms.iter().filter(|t| t.output == j) {
        coeffs.extend(t.forms[k].terms.iter().copied());
        constant += t.forms[k].constant;
    }
    (coeffs, constant)
}

/// Rounds to 36 significant bits, so that rows which agree up to rounding
/// error, e.g. the DR and SLP-F rows, become bitwise equal.
fn snap(v: f64) -> f64 {
    const DROP: u32 = 16;
    let bits = v.to_bits() + (1 << (DROP - 1));
    f64::from_bits(bits & !((1 << DROP) - 1))
}

/// Merges repeated columns, drops entries that are cancellation noise
/// relative to the largest coefficient of the row and snaps the rest.
fn clean(coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    let mut sorted = coeffs;
    sorted.sort_by_key(|e| e.0);
    for (j, v) in sorted {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => merged.push((j, v)),
        }
    }
    let scale = merged.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
    merged.retain(|e| e.1.abs() > NOISE_TOL * scale);
    for e in &mut merged {
        e.1 = snap(e.1);
    }
    merged
}

fn add_quality_rows(
    lp: &mut LinearProgram,
    inst: &PoolingInstance,
    topo: &Topology,
    terms: &LinearizedTerms,
    slacks: Option<(&[Vec<usize>], &[Vec<usize>])>,
) {
    for j in 0..inst.outputs {
        for k in 0..inst.attributes {
            let (mut coeffs, constant) = quality_row(inst, topo, terms, j, k, inst.quality_lb[j][k]);
            if let Some((smin, _)) = slacks {
                coeffs.push((smin[j][k], 1.0));
            }
            lp.add_row(clean(coeffs), Relation::Ge, snap(-constant));

            let (mut coeffs, constant) = quality_row(inst, topo, terms, j, k, inst.quality_ub[j][k]);
            if let Some((_, smax)) = slacks {
                coeffs.push((smax[j][k], -1.0));
            }
            lp.add_row(clean(coeffs), Relation::Le, snap(-constant));
        }
    }
}

/// SLP subproblem on the flow-and-quality model: flows and free pool
/// qualities, with every bilinear term replaced by its first-order Taylor
/// expansion at `(alpha_t, y_t)`.
pub fn build_slp_p(
    inst: &PoolingInstance,
    alpha_t: &QualityVector,
    y_t: &[f64],
) -> Result<(LinearProgram, VariableMap), FormulationError> {
    if y_t.len() != inst.num_arcs() {
        return Err(FormulationError::Shape { expected: inst.num_arcs(), found: y_t.len() });
    }
    let topo = inst.topology();
    let mut map = VariableMap::flows(inst);
    let alpha = map.block(inst.pools, inst.attributes);
    let mut lp = mcf_lp(inst, &topo, map.num_columns);
    for row in &alpha {
        for &c in row {
            lp.var_lb[c] = None;
        }
    }

    for l in 0..inst.pools {
        let out_t: f64 = topo.pool_out[l].iter().map(|&(a, _)| y_t[a]).sum();
        for k in 0..inst.attributes {
            let a_t = alpha_t.0[l][k];
            let mut coeffs: Vec<(usize, f64)> = topo.pool_in[l]
                .iter()
                .map(|&(a, i)| (a, inst.input_quality[i][k]))
                .collect();
            coeffs.extend(topo.pool_out[l].iter().map(|&(a, _)| (a, -a_t)));
            coeffs.push((alpha[l][k], -out_t));
            lp.add_row(coeffs, Relation::Eq, -a_t * out_t);
        }
    }

    for j in 0..inst.outputs {
        for k in 0..inst.attributes {
            for (lower, bound) in [(true, inst.quality_lb[j][k]), (false, inst.quality_ub[j][k])] {
                let mut coeffs = Vec::new();
                let mut constant = 0.0;
                for &(a, tail) in &topo.output_in[j] {
                    coeffs.push((a, -bound));
                    match tail.layer {
                        Layer::Input => coeffs.push((a, inst.input_quality[tail.index][k])),
                        _ => {
                            let l = tail.index;
                            let a_t = alpha_t.0[l][k];
                            coeffs.push((a, a_t));
                            coeffs.push((alpha[l][k], y_t[a]));
                            constant -= a_t * y_t[a];
                        }
                    }
                }
                let rel = if lower { Relation::Ge } else { Relation::Le };
                lp.add_row(coeffs, rel, -constant);
            }
        }
    }
    map.quality = Some(alpha);
    Ok((lp, map))
}

/// Distributed-recursion subproblem at `(alpha_t, y_t)`; requires
/// `alpha_t = q(y_t)`.
pub fn build_dr(
    inst: &PoolingInstance,
    alpha_t: &QualityVector,
    y_t: &[f64],
) -> Result<(LinearProgram, VariableMap), FormulationError> {
    let terms = formulations::sigma_forms(inst, alpha_t, y_t)?;
    let topo = inst.topology();
    let map = VariableMap::flows(inst);
    let mut lp = mcf_lp(inst, &topo, map.num_columns);
    add_quality_rows(&mut lp, inst, &topo, &terms, None);
    Ok((lp, map))
}

/// SLP subproblem on the flow-only model at `y_t`.
pub fn build_slp_f(
    inst: &PoolingInstance,
    y_t: &[f64],
) -> Result<(LinearProgram, VariableMap), FormulationError> {
    let terms = formulations::tau_forms(inst, y_t)?;
    let topo = inst.topology();
    let map = VariableMap::flows(inst);
    let mut lp = mcf_lp(inst, &topo, map.num_columns);
    add_quality_rows(&mut lp, inst, &topo, &terms, None);
    Ok((lp, map))
}

/// Penalized SLP subproblem: the SLP-F quality rows relaxed by nonnegative
/// slacks that are charged in the objective.
pub fn build_pslp(
    inst: &PoolingInstance,
    y_t: &[f64],
    penalties: &PenaltyState,
) -> Result<(LinearProgram, VariableMap), FormulationError> {
    let terms = formulations::tau_forms(inst, y_t)?;
    let topo = inst.topology();
    let mut map = VariableMap::flows(inst);
    let smin = map.block(inst.outputs, inst.attributes);
    let smax = map.block(inst.outputs, inst.attributes);
    let mut lp = mcf_lp(inst, &topo, map.num_columns);
    for j in 0..inst.outputs {
        for k in 0..inst.attributes {
            lp.objective[smin[j][k]] = -penalties.mu[j][k];
            lp.objective[smax[j][k]] = -penalties.nu[j][k];
        }
    }
    add_quality_rows(&mut lp, inst, &topo, &terms, Some((&smin, &smax)));
    map.slack_min = Some(smin);
    map.slack_max = Some(smax);
    Ok((lp, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::NodeId;
    use crate::lp::{solve, LpStatus};

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
    fn mcf_shape_and_value() {
        let inst = tiny();
        let (lp, map) = build_mcf(&inst);
        assert_eq!(lp.num_vars(), 3);
        assert_eq!(lp.num_rows(), 2);
        assert_eq!(map.flow, vec![0, 1, 2]);
        let sol = solve(&lp, 1e-9, 1e-9).unwrap();
        assert!((sol.objective_value.unwrap() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn slp_p_at_zero_blocks_the_pool() {
        let inst = tiny();
        let (lp, map) = build_slp_p(&inst, &QualityVector(vec![vec![0.0]]), &[0.0; 3]).unwrap();
        assert_eq!(lp.num_vars(), 4);
        let alpha = map.quality.as_ref().unwrap()[0][0];
        assert_eq!(lp.var_lb[alpha], None);
        // the balance row is sum_i lambda y_i = 0 with no alpha term
        let balance = &lp.rows[2];
        assert_eq!(balance.coeffs, vec![(0, 3.0), (1, 1.0)]);
        let sol = solve(&lp, 1e-9, 1e-9).unwrap();
        assert!(sol.objective_value.unwrap().abs() < 1e-9);
    }

    #[test]
    fn slp_p_alpha_coefficient_is_base_outflow() {
        let inst = tiny();
        let (lp, map) = build_slp_p(&inst, &QualityVector(vec![vec![2.5]]), &[3.0, 1.0, 4.0]).unwrap();
        let alpha = map.quality.as_ref().unwrap()[0][0];
        let coef: f64 = lp.rows[2].coeffs.iter().filter(|e| e.0 == alpha).map(|e| e.1).sum();
        assert_eq!(coef.abs(), 4.0);
    }

    #[test]
    fn dr_row_matches_hand_expansion() {
        let inst = tiny();
        let y_t = [2.0, 2.0, 4.0];
        let (lp, _) = build_dr(&inst, &QualityVector(vec![vec![2.0]]), &y_t).unwrap();
        // sigma = 2 y_p + (3 y_0 + y_1 - 2 y_p); upper row: 3 y_0 + y_1 - 2 y_p <= 0
        let upper = &lp.rows[3];
        assert_eq!(upper.relation, Relation::Le);
        assert_eq!(upper.coeffs, vec![(0, 3.0), (1, 1.0), (2, -2.0)]);
        assert_eq!(upper.rhs, 0.0);
    }

    #[test]
    fn pslp_objective_charges_slacks() {
        let inst = tiny();
        let pen = PenaltyState::uniform(&inst, 3.0, 7.0);
        let (lp, map) = build_pslp(&inst, &[2.0, 2.0, 4.0], &pen).unwrap();
        assert_eq!(lp.num_vars(), 5);
        assert_eq!(lp.objective[map.slack_min.as_ref().unwrap()[0][0]], -3.0);
        assert_eq!(lp.objective[map.slack_max.as_ref().unwrap()[0][0]], -7.0);
        let x = vec![0.0; 5];
        assert_eq!(lp.max_violation(&x), 0.0);
        let sol = solve(&lp, 1e-9, 1e-9).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
    }

    #[test]
    fn names_cover_every_column() {
        let inst = tiny();
        let pen = PenaltyState::uniform(&inst, 1.0, 1.0);
        let (_, map) = build_pslp(&inst, &[0.0; 3], &pen).unwrap();
        let names = map.names(&inst);
        assert_eq!(names, ["y_input0_pool0", "y_input1_pool0", "y_pool0_output0", "smin_output0_k0", "smax_output0_k0"]);
    }
}
