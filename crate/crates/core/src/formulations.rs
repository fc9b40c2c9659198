//! Evaluation of the pooling model over flow vectors: objective, pool
//! qualities `q(y)`, the quality error / distribution factors, the two
//! linearizations of the bilinear terms `alpha_lk * y_lj`, and constraint
//! residuals for the flow-and-quality model (P) and the flow-only model (F).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::FormulationError;
use crate::instance::{Layer, PoolingInstance, Topology};

/// A pool is treated as closed iff its total outflow is at most this.
pub const OUTFLOW_TOL: f64 = 1e-9;

/// Maximum tolerated deviation between supplied expansion qualities and
/// `q(y_t)` in [`sigma`].
pub const QUALITY_MATCH_TOL: f64 = 1e-7;

/// Flow on every arc, indexed by the instance's arc order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn zeros(n: usize) -> Self {
        FlowVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_diff(&self, other: &FlowVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for FlowVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Pool qualities indexed `[pool][attribute]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityVector(pub Vec<Vec<f64>>);

impl QualityVector {
    pub fn zeros(pools: usize, attributes: usize) -> Self {
        QualityVector(vec![vec![0.0; attributes]; pools])
    }

    pub fn max_abs_diff(&self, other: &QualityVector) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Affine function `constant + sum(coef * y[arc])`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinearForm {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(a, c)| c * y[a]).sum::<f64>()
    }

    fn add(&mut self, arc: usize, coef: f64) {
        match self.terms.iter_mut().find(|t| t.0 == arc) {
            Some(t) => t.1 += coef,
            None => self.terms.push((arc, coef)),
        }
    }

    pub fn coefficient(&self, arc: usize) -> f64 {
        self.terms.iter().filter(|t| t.0 == arc).map(|t| t.1).sum()
    }
}

/// Linearizations of `alpha_lk * y_lj` for every pool-to-output arc.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearizedTerms {
    pub terms: Vec<PoolOutputTerm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolOutputTerm {
    pub arc: usize,
    pub pool: usize,
    pub output: usize,
    /// One affine form per attribute.
    pub forms: Vec<LinearForm>,
}

impl LinearizedTerms {
    /// Evaluates every term at `y` into a dense `[pool][output][attribute]`
    /// table; pairs without an arc hold zero.
    pub fn eval(&self, inst: &PoolingInstance, y: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let mut out = vec![vec![vec![0.0; inst.attributes]; inst.outputs]; inst.pools];
        for t in &self.terms {
            for (k, f) in t.forms.iter().enumerate() {
                out[t.pool][t.output][k] = f.eval(y);
            }
        }
        out
    }
}

fn check_len(y: &[f64], expected: usize) -> Result<(), FormulationError> {
    if y.len() != expected {
        return Err(FormulationError::Shape { expected, found: y.len() });
    }
    Ok(())
}

pub fn objective(inst: &PoolingInstance, y: &[f64]) -> f64 {
    inst.arcs.iter().zip(y).map(|(a, v)| a.weight * v).sum()
}

fn pool_outflow(topo: &Topology, y: &[f64], pool: usize) -> f64 {
    topo.pool_out[pool].iter().map(|&(a, _)| y[a]).sum()
}

fn pool_quality_with(inst: &PoolingInstance, topo: &Topology, y: &[f64]) -> QualityVector {
    let mut q = QualityVector::zeros(inst.pools, inst.attributes);
    for l in 0..inst.pools {
        let out = pool_outflow(topo, y, l);
        if out <= OUTFLOW_TOL {
            continue;
        }
        for k in 0..inst.attributes {
            let mixed: f64 =
                topo.pool_in[l].iter().map(|&(a, i)| inst.input_quality[i][k] * y[a]).sum();
            q.0[l][k] = mixed / out;
        }
    }
    q
}

/// Flow-weighted input quality at each pool; zero for closed pools.
pub fn pool_quality(inst: &PoolingInstance, y: &[f64]) -> QualityVector {
    pool_quality_with(inst, &inst.topology(), y)
}

/// Quality error `R[pool][attr]` at `y` relative to `alpha_t`, and
/// distribution factors `beta[pool][output]` of the expansion point.
pub fn error_and_beta(
    inst: &PoolingInstance,
    y: &[f64],
    alpha_t: &QualityVector,
    y_t: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let topo = inst.topology();
    let mut r = vec![vec![0.0; inst.attributes]; inst.pools];
    let mut beta = vec![vec![0.0; inst.outputs]; inst.pools];
    for l in 0..inst.pools {
        let out = pool_outflow(&topo, y, l);
        for k in 0..inst.attributes {
            let mixed: f64 =
                topo.pool_in[l].iter().map(|&(a, i)| inst.input_quality[i][k] * y[a]).sum();
            r[l][k] = mixed - alpha_t.0[l][k] * out;
        }
        let out_t = pool_outflow(&topo, y_t, l);
        if out_t > OUTFLOW_TOL {
            for &(a, j) in &topo.pool_out[l] {
                beta[l][j] = y_t[a] / out_t;
            }
        }
    }
    (r, beta)
}

/// Distributed-recursion linearization at `(alpha_t, y_t)`:
/// `alpha_t * y_lj + beta_lj * R_lk(y)` for open pools, zero for closed ones.
///
/// `alpha_t` must equal `q(y_t)` to within [`QUALITY_MATCH_TOL`].
pub fn sigma_forms(
    inst: &PoolingInstance,
    alpha_t: &QualityVector,
    y_t: &[f64],
) -> Result<LinearizedTerms, FormulationError> {
    check_len(y_t, inst.num_arcs())?;
    let topo = inst.topology();
    let q = pool_quality_with(inst, &topo, y_t);
    for l in 0..inst.pools {
        for k in 0..inst.attributes {
            let deviation = (alpha_t.0[l][k] - q.0[l][k]).abs();
            if !(deviation <= QUALITY_MATCH_TOL) {
                return Err(FormulationError::QualityMismatch { pool: l, attribute: k, deviation });
            }
        }
    }

    let mut terms = Vec::new();
    for l in 0..inst.pools {
        let out_t = pool_outflow(&topo, y_t, l);
        for &(arc, j) in &topo.pool_out[l] {
            let mut forms = vec![LinearForm::default(); inst.attributes];
            if out_t > OUTFLOW_TOL {
                let beta = y_t[arc] / out_t;
                for (k, form) in forms.iter_mut().enumerate() {
                    let alpha = alpha_t.0[l][k];
                    form.add(arc, alpha);
                    for &(a, i) in &topo.pool_in[l] {
                        form.add(a, beta * inst.input_quality[i][k]);
                    }
                    for &(a, _) in &topo.pool_out[l] {
                        form.add(a, -beta * alpha);
                    }
                }
            }
            terms.push(PoolOutputTerm { arc, pool: l, output: j, forms });
        }
    }
    Ok(LinearizedTerms { terms })
}

pub fn sigma(
    inst: &PoolingInstance,
    y: &[f64],
    alpha_t: &QualityVector,
    y_t: &[f64],
) -> Result<Vec<Vec<Vec<f64>>>, FormulationError> {
    check_len(y, inst.num_arcs())?;
    Ok(sigma_forms(inst, alpha_t, y_t)?.eval(inst, y))
}

/// Partial derivatives of `q_lk` at `y_t` as (arc, value) pairs. Empty for
/// closed pools, where `q` is not differentiable.
pub fn quality_gradient(
    inst: &PoolingInstance,
    topo: &Topology,
    y_t: &[f64],
    pool: usize,
    attribute: usize,
) -> Vec<(usize, f64)> {
    let out_t = pool_outflow(topo, y_t, pool);
    if out_t <= OUTFLOW_TOL {
        return Vec::new();
    }
    let mixed: f64 = topo.pool_in[pool]
        .iter()
        .map(|&(a, i)| inst.input_quality[i][attribute] * y_t[a])
        .sum();
    let mut grad = Vec::new();
    for &(a, i) in &topo.pool_in[pool] {
        grad.push((a, inst.input_quality[i][attribute] / out_t));
    }
    for &(a, _) in &topo.pool_out[pool] {
        grad.push((a, -mixed / (out_t * out_t)));
    }
    grad
}

/// First-order Taylor expansion of `q_lk(y) * y_lj` at `y_t` for open pools,
/// zero for closed ones.
pub fn tau_forms(inst: &PoolingInstance, y_t: &[f64]) -> Result<LinearizedTerms, FormulationError> {
    check_len(y_t, inst.num_arcs())?;
    let topo = inst.topology();
    let q = pool_quality_with(inst, &topo, y_t);
    let mut terms = Vec::new();
    for l in 0..inst.pools {
        let open = pool_outflow(&topo, y_t, l) > OUTFLOW_TOL;
        for &(arc, j) in &topo.pool_out[l] {
            let mut forms = vec![LinearForm::default(); inst.attributes];
            if open {
                for (k, form) in forms.iter_mut().enumerate() {
                    // d(q * y_lj)/dy = y_lj^t * dq/dy + q * e_lj
                    for (a, g) in quality_gradient(inst, &topo, y_t, l, k) {
                        form.add(a, y_t[arc] * g);
                    }
                    form.add(arc, q.0[l][k]);
                    let at_base: f64 = form.terms.iter().map(|&(a, c)| c * y_t[a]).sum();
                    let scale: f64 = form.terms.iter().map(|&(a, c)| (c * y_t[a]).abs()).sum();
                    let constant = q.0[l][k] * y_t[arc] - at_base;
                    // The expansion of a degree-one homogeneous term has no
                    // constant; keep only what exceeds rounding error.
                    if constant.abs() > 1e-12 * scale {
                        form.constant = constant;
                    }
                }
            }
            terms.push(PoolOutputTerm { arc, pool: l, output: j, forms });
        }
    }
    Ok(LinearizedTerms { terms })
}

pub fn tau(
    inst: &PoolingInstance,
    y: &[f64],
    y_t: &[f64],
) -> Result<Vec<Vec<Vec<f64>>>, FormulationError> {
    check_len(y, inst.num_arcs())?;
    Ok(tau_forms(inst, y_t)?.eval(inst, y))
}

// ---------------------------------------------------------------------------
// Residuals

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintFamily {
    FlowConservation,
    PoolQualityBalance,
    InputCapacity,
    PoolCapacity,
    OutputCapacity,
    ArcBounds,
    QualityLower,
    QualityUpper,
}

impl ConstraintFamily {
    pub const ALL: [ConstraintFamily; 8] = [
        ConstraintFamily::FlowConservation,
        ConstraintFamily::PoolQualityBalance,
        ConstraintFamily::InputCapacity,
        ConstraintFamily::PoolCapacity,
        ConstraintFamily::OutputCapacity,
        ConstraintFamily::ArcBounds,
        ConstraintFamily::QualityLower,
        ConstraintFamily::QualityUpper,
    ];
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintFamily::FlowConservation => "flow conservation",
            ConstraintFamily::PoolQualityBalance => "pool quality balance",
            ConstraintFamily::InputCapacity => "input capacity",
            ConstraintFamily::PoolCapacity => "pool capacity",
            ConstraintFamily::OutputCapacity => "output capacity",
            ConstraintFamily::ArcBounds => "arc bounds",
            ConstraintFamily::QualityLower => "quality lower bound",
            ConstraintFamily::QualityUpper => "quality upper bound",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub family: ConstraintFamily,
    /// Node/arc/attribute the constraint belongs to, e.g. `output2/k1`.
    pub location: String,
    /// Nonnegative violation.
    pub violation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<Residual>,
    pub max_violation: f64,
}

impl ResidualReport {
    fn push(&mut self, family: ConstraintFamily, location: String, violation: f64) {
        self.max_violation = self.max_violation.max(violation);
        self.entries.push(Residual { family, location, violation });
    }

    /// Largest violation within one family; `None` if the family has no rows.
    pub fn family_max(&self, family: ConstraintFamily) -> Option<f64> {
        self.entries
            .iter()
            .filter(|e| e.family == family)
            .map(|e| e.violation)
            .reduce(f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

fn linear_residuals(inst: &PoolingInstance, topo: &Topology, y: &[f64], report: &mut ResidualReport) {
    for l in 0..inst.pools {
        let inflow: f64 = topo.pool_in[l].iter().map(|&(a, _)| y[a]).sum();
        let outflow = pool_outflow(topo, y, l);
        report.push(ConstraintFamily::FlowConservation, format!("pool{l}"), (inflow - outflow).abs());
    }
    for (i, cap) in inst.input_capacity.iter().enumerate() {
        if let Some(u) = cap {
            let used: f64 = topo.input_out[i].iter().map(|&a| y[a]).sum();
            report.push(ConstraintFamily::InputCapacity, format!("input{i}"), (used - u).max(0.0));
        }
    }
    for (l, cap) in inst.pool_capacity.iter().enumerate() {
        if let Some(u) = cap {
            let used = pool_outflow(topo, y, l);
            report.push(ConstraintFamily::PoolCapacity, format!("pool{l}"), (used - u).max(0.0));
        }
    }
    for (j, cap) in inst.output_capacity.iter().enumerate() {
        if let Some(u) = cap {
            let used: f64 = topo.output_in[j].iter().map(|&(a, _)| y[a]).sum();
            report.push(ConstraintFamily::OutputCapacity, format!("output{j}"), (used - u).max(0.0));
        }
    }
    for (a, arc) in inst.arcs.iter().enumerate() {
        let below = (-y[a]).max(0.0);
        let above = arc.capacity.map_or(0.0, |u| (y[a] - u).max(0.0));
        report.push(
            ConstraintFamily::ArcBounds,
            format!("{}->{}", arc.tail, arc.head),
            below.max(above),
        );
    }
}

fn quality_residuals(
    inst: &PoolingInstance,
    topo: &Topology,
    y: &[f64],
    alpha: &QualityVector,
    report: &mut ResidualReport,
) {
    for j in 0..inst.outputs {
        let inflow: f64 = topo.output_in[j].iter().map(|&(a, _)| y[a]).sum();
        for k in 0..inst.attributes {
            let blended: f64 = topo.output_in[j]
                .iter()
                .map(|&(a, tail)| {
                    let quality = match tail.layer {
                        Layer::Input => inst.input_quality[tail.index][k],
                        _ => alpha.0[tail.index][k],
                    };
                    quality * y[a]
                })
                .sum();
            let lower = inst.quality_lb[j][k] * inflow - blended;
            let upper = blended - inst.quality_ub[j][k] * inflow;
            report.push(ConstraintFamily::QualityLower, format!("output{j}/k{k}"), lower.max(0.0));
            report.push(ConstraintFamily::QualityUpper, format!("output{j}/k{k}"), upper.max(0.0));
        }
    }
}

/// Residuals of the flow-and-quality model at `(y, alpha)`.
pub fn residuals_p(inst: &PoolingInstance, y: &[f64], alpha: &QualityVector) -> ResidualReport {
    let topo = inst.topology();
    let mut report = ResidualReport::default();
    linear_residuals(inst, &topo, y, &mut report);
    for l in 0..inst.pools {
        let outflow = pool_outflow(&topo, y, l);
        for k in 0..inst.attributes {
            let mixed: f64 =
                topo.pool_in[l].iter().map(|&(a, i)| inst.input_quality[i][k] * y[a]).sum();
            report.push(
                ConstraintFamily::PoolQualityBalance,
                format!("pool{l}/k{k}"),
                (mixed - alpha.0[l][k] * outflow).abs(),
            );
        }
    }
    quality_residuals(inst, &topo, y, alpha, &mut report);
    report
}

/// Residuals of the flow-only model at `y`, with pool qualities `q(y)`.
pub fn residuals_f(inst: &PoolingInstance, y: &[f64]) -> ResidualReport {
    let topo = inst.topology();
    let q = pool_quality_with(inst, &topo, y);
    let mut report = ResidualReport::default();
    linear_residuals(inst, &topo, y, &mut report);
    quality_residuals(inst, &topo, y, &q, &mut report);
    report
}
