//! Basis factorization: unit (slack/artificial) columns are eliminated
//! directly, the remaining kernel is factored densely, and pivots since the
//! last refactorization are kept as a product-form eta file.

use super::lu::{self, DenseLu};
use crate::error::LpError;

#[derive(Clone, Copy, Debug)]
pub(crate) enum Column<'a> {
    Unit { row: usize, sign: f64 },
    Sparse(&'a [(usize, f64)]),
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Basis {
    m: usize,
    units: Vec<(usize, usize, f64)>,
    kernel_pos: Vec<usize>,
    kernel_rows: Vec<usize>,
    covered: Vec<bool>,
    kernel_cols: Vec<Vec<(usize, f64)>>,
    lu: DenseLu,
    etas: Vec<Eta>,
}

/// Rows not covered by unit columns and the dense matrix of the remaining
/// columns restricted to them.
struct Kernel {
    units: Vec<(usize, usize, f64)>,
    pos: Vec<usize>,
    rows: Vec<usize>,
    covered: Vec<bool>,
    dense: Vec<f64>,
}

impl Kernel {
    fn build(m: usize, columns: &[Column<'_>]) -> Option<Self> {
        let mut covered = vec![false; m];
        let mut units = Vec::new();
        let mut pos = Vec::new();
        for (p, col) in columns.iter().enumerate() {
            match *col {
                Column::Unit { row, sign } => {
                    if covered[row] {
                        return None;
                    }
                    covered[row] = true;
                    units.push((p, row, sign));
                }
                Column::Sparse(_) => pos.push(p),
            }
        }
        let rows: Vec<usize> = (0..m).filter(|&r| !covered[r]).collect();
        let k = rows.len();
        if k != pos.len() {
            return None;
        }
        let mut row_index = vec![usize::MAX; m];
        for (u, &r) in rows.iter().enumerate() {
            row_index[r] = u;
        }
        let mut dense = vec![0.0; k * k];
        for (c, &p) in pos.iter().enumerate() {
            let Column::Sparse(entries) = columns[p] else { unreachable!() };
            for &(r, v) in entries {
                if !covered[r] {
                    dense[row_index[r] * k + c] += v;
                }
            }
        }
        Some(Kernel { units, pos, rows, covered, dense })
    }
}

impl Basis {
    pub(crate) fn factor(m: usize, columns: &[Column<'_>], pivot_floor: f64) -> Result<Self, LpError> {
        let breakdown = LpError::NumericalBreakdown { floor: pivot_floor };
        let kernel = Kernel::build(m, columns).ok_or(breakdown)?;
        let lu = DenseLu::factor(kernel.rows.len(), kernel.dense, pivot_floor)?;
        let kernel_cols = kernel
            .pos
            .iter()
            .map(|&pos| match columns[pos] {
                Column::Sparse(entries) => entries.to_vec(),
                Column::Unit { .. } => unreachable!(),
            })
            .collect();
        Ok(Basis {
            m,
            units: kernel.units,
            kernel_pos: kernel.pos,
            kernel_rows: kernel.rows,
            covered: kernel.covered,
            kernel_cols,
            lu,
            etas: Vec::new(),
        })
    }

    /// For a singular basis, pairs each dependent position with a row that
    /// no remaining column covers, so that putting that row's logical column
    /// at the position gives a nonsingular basis. `None` if the columns do
    /// not even fit the row count.
    pub(crate) fn repair(
        m: usize,
        columns: &[Column<'_>],
        pivot_floor: f64,
    ) -> Option<Vec<(usize, usize)>> {
        let kernel = Kernel::build(m, columns)?;
        let (cols, rows) = lu::deficiency(kernel.rows.len(), kernel.dense, pivot_floor);
        Some(cols.iter().zip(&rows).map(|(&c, &r)| (kernel.pos[c], kernel.rows[r])).collect())
    }

    pub(crate) fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = a` for a row-indexed dense `a`; returns position-indexed `x`.
    pub(crate) fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        let mut xk: Vec<f64> = self.kernel_rows.iter().map(|&r| a[r]).collect();
        self.lu.solve(&mut xk);
        let mut acc = a.to_vec();
        for (c, &pos) in self.kernel_pos.iter().enumerate() {
            out[pos] = xk[c];
            if xk[c] != 0.0 {
                for &(r, v) in &self.kernel_cols[c] {
                    if self.covered[r] {
                        acc[r] -= v * xk[c];
                    }
                }
            }
        }
        for &(pos, row, sign) in &self.units {
            out[pos] = acc[row] / sign;
        }
        for eta in &self.etas {
            let vr = out[eta.pos] / eta.pivot;
            out[eta.pos] = vr;
            if vr != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * vr;
                }
            }
        }
        out
    }

    /// Solves `B^T y = c` for a position-indexed `c`; returns row-indexed `y`.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut cb = c.to_vec();
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, a)| a * cb[i]).sum();
            cb[eta.pos] = (cb[eta.pos] - s) / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        for &(pos, row, sign) in &self.units {
            y[row] = cb[pos] / sign;
        }
        let mut rhs: Vec<f64> = self
            .kernel_pos
            .iter()
            .zip(&self.kernel_cols)
            .map(|(&pos, col)| {
                let covered: f64 =
                    col.iter().filter(|(r, _)| self.covered[*r]).map(|&(r, v)| v * y[r]).sum();
                cb[pos] - covered
            })
            .collect();
        self.lu.solve_transpose(&mut rhs);
        for (u, &r) in self.kernel_rows.iter().enumerate() {
            y[r] = rhs[u];
        }
        y
    }

    /// Records the replacement of the column at `pos` given the entering
    /// column's FTRAN result.
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pos && *a != 0.0)
            .map(|(i, a)| (i, *a))
            .collect();
        self.etas.push(Eta { pos, pivot: alpha[pos], entries });
    }
}
