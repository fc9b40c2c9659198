//! Dense LU factorization with partial pivoting.

use crate::error::LpError;

#[derive(Clone, Debug, Default)]
pub(crate) struct DenseLu {
    n: usize,
    /// Row-major; strictly lower part holds L (unit diagonal), upper holds U.
    lu: Vec<f64>,
    /// `perm[k]` is the original row placed at position k.
    perm: Vec<usize>,
}

/// Column-by-column elimination of the row-major `n x n` matrix `a` that
/// skips columns without a pivot of at least `pivot_floor`. Returns the
/// skipped columns and the rows left without a pivot, both ascending and of
/// equal length.
pub(crate) fn deficiency(n: usize, mut a: Vec<f64>, pivot_floor: f64) -> (Vec<usize>, Vec<usize>) {
    let mut pivoted = vec![false; n];
    let mut skipped = Vec::new();
    for c in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !pivoted[i]) {
            let v = a[i * n + c].abs();
            if v >= pivot_floor && best.map_or(true, |(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let Some((p, _)) = best else {
            skipped.push(c);
            continue;
        };
        pivoted[p] = true;
        let pivot_row: Vec<f64> = a[p * n + c..p * n + n].to_vec();
        for i in (0..n).filter(|&i| !pivoted[i]) {
            let l = a[i * n + c] / pivot_row[0];
            if l != 0.0 {
                for (x, v) in a[i * n + c..i * n + n].iter_mut().zip(&pivot_row) {
                    *x -= l * v;
                }
            }
        }
    }
    (skipped, (0..n).filter(|&i| !pivoted[i]).collect())
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix `a` in place.
    pub(crate) fn factor(n: usize, mut a: Vec<f64>, pivot_floor: f64) -> Result<Self, LpError> {
        debug_assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_abs = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if best_abs < pivot_floor {
                return Err(LpError::NumericalBreakdown { floor: pivot_floor });
            }
            if best != k {
                for c in 0..n {
                    a.swap(k * n + c, best * n + c);
                }
                perm.swap(k, best);
            }
            let pivot = a[k * n + k];
            let (top, bottom) = a.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n + k + 1..k * n + n];
            for i in 0..n - k - 1 {
                let row = &mut bottom[i * n..i * n + n];
                let l = row[k] / pivot;
                row[k] = l;
                if l != 0.0 {
                    for (x, p) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *x -= l * p;
                    }
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    /// Solves `A x = b`, overwriting `b` with `x`.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..i * n + n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        b[..n].copy_from_slice(&x);
    }

    /// Solves `A^T y = c`, overwriting `c` with `y`.
    pub(crate) fn solve_transpose(&self, c: &mut [f64]) {
        let n = self.n;
        let mut z = c[..n].to_vec();
        // U^T z = c
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            if zi != 0.0 {
                let row = &self.lu[i * n + i + 1..i * n + n];
                for (zj, u) in z[i + 1..].iter_mut().zip(row) {
                    *zj -= u * zi;
                }
            }
        }
        // L^T w = z
        for i in (0..n).rev() {
            let wi = z[i];
            if wi != 0.0 {
                let row = &self.lu[i * n..i * n + i];
                for (zj, l) in z[..i].iter_mut().zip(row) {
                    *zj -= l * wi;
                }
            }
        }
        for (k, &p) in self.perm.iter().enumerate() {
            c[p] = z[k];
        }
    }
}
