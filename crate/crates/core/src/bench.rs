//! Benchmark rows: every setting run from a shared initial point, the best
//! known objective and the table cells derived from them.

use std::time::Instant;

use crate::algorithms::{self, gap_percent, AlgorithmKind, RunReport, SolverConfig, ZERO_OBJECTIVE_TOL};
use crate::instance::PoolingInstance;
use crate::oracle;

/// Grid LP budget per instance in benchmark runs; the full oracle budget is
/// far too slow for a table of fifty instances.
pub const DEFAULT_BENCH_GRID_BUDGET: f64 = 1e4;

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub settings: Vec<AlgorithmKind>,
    pub solver: SolverConfig,
    /// Requested grid points per quality range for the lower bound; lowered
    /// to what the budget allows. 0 skips the grid.
    pub oracle_steps: usize,
    pub grid_budget: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            settings: vec![AlgorithmKind::Slp, AlgorithmKind::Dr, AlgorithmKind::Pdr],
            solver: SolverConfig::default(),
            oracle_steps: 5,
            grid_budget: DEFAULT_BENCH_GRID_BUDGET,
        }
    }
}

/// One setting's outcome on one instance.
#[derive(Clone, Debug)]
pub struct SettingResult {
    pub algorithm: AlgorithmKind,
    pub time: f64,
    pub objective: Option<f64>,
    pub iterations: usize,
    /// `None` renders as "--": no feasible solution, or an undefined gap.
    pub gap_percent: Option<f64>,
    pub or_metric: Option<f64>,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub id: String,
    pub dims: String,
    pub results: Vec<SettingResult>,
    /// Best known objective: the largest of the settings' feasible
    /// objectives and the grid bound.
    pub best: Option<f64>,
    pub grid_bound: Option<f64>,
    pub grid_steps: usize,
    pub error: Option<String>,
}

pub fn bench_instance(id: &str, inst: &PoolingInstance, config: &BenchConfig) -> BenchRow {
    let mut row = BenchRow {
        id: id.to_string(),
        dims: inst.dims(),
        results: Vec::new(),
        best: None,
        grid_bound: None,
        grid_steps: 0,
        error: None,
    };
    let start = match algorithms::initial_point(inst) {
        Ok(start) => Some(start),
        Err(e) => {
            row.error = Some(e.to_string());
            None
        }
    };
    for &kind in &config.settings {
        let clock = Instant::now();
        let outcome = match &start {
            Some((y0, o_0)) => algorithms::run_from(kind, inst, &config.solver, y0.clone(), *o_0)
                .map_err(|e| e.to_string()),
            None => Err(row.error.clone().unwrap_or_default()),
        };
        let time = clock.elapsed().as_secs_f64();
        row.results.push(match outcome {
            Ok(report) => SettingResult {
                algorithm: kind,
                time: report.wall_time,
                objective: report.final_objective,
                iterations: report.iterations,
                gap_percent: None,
                or_metric: Some(report.or_metric),
                report: Some(report),
                error: None,
            },
            Err(e) => SettingResult {
                algorithm: kind,
                time,
                objective: None,
                iterations: 0,
                gap_percent: None,
                or_metric: None,
                report: None,
                error: Some(e),
            },
        });
    }

    if config.oracle_steps > 0 {
        let steps = oracle::affordable_steps(inst, config.oracle_steps, config.grid_budget);
        match oracle::grid_lower_bound(inst, steps, config.grid_budget) {
            Ok((value, _)) => {
                row.grid_bound = Some(value);
                row.grid_steps = steps;
            }
            Err(e) => {
                if row.error.is_none() {
                    row.error = Some(e.to_string());
                }
            }
        }
    }
    let candidates = row.results.iter().filter_map(|r| r.objective).chain(row.grid_bound);
    row.best = candidates.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    if let Some(best) = row.best {
        for r in &mut row.results {
            if r.objective.is_some() {
                r.gap_percent = gap_percent(r.objective, best);
            }
        }
    }
    row
}

pub fn header(settings: &[AlgorithmKind]) -> Vec<String> {
    let mut cells = vec!["id".to_string(), "dims".to_string()];
    for s in settings {
        for col in ["T", "Obj", "It", "G%", "OR"] {
            cells.push(format!("{}_{col}", s.as_str().to_uppercase()));
        }
    }
    cells.push("o*".to_string());
    cells
}

pub const MISSING: &str = "--";

/// `v` with 6 significant digits and no exponent for ordinary magnitudes.
pub fn significant(v: f64) -> String {
    if v.abs() <= ZERO_OBJECTIVE_TOL || !v.is_finite() {
        return if v.is_finite() { "0".to_string() } else { v.to_string() };
    }
    let digits = v.abs().log10().floor() as i32;
    let decimals = (5 - digits).max(0) as usize;
    let text = format!("{:.*}", decimals, v + 0.0);
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

fn fixed(v: f64, decimals: usize) -> String {
    // Adding zero turns -0.0 into 0.0.
    format!("{:.*}", decimals, v + 0.0)
}

impl BenchRow {
    pub fn cells(&self) -> Vec<String> {
        let mut cells = vec![self.id.clone(), self.dims.clone()];
        for r in &self.results {
            cells.push(fixed(r.time, 2));
            cells.push(r.objective.map_or(MISSING.to_string(), significant));
            cells.push(r.iterations.to_string());
            cells.push(r.gap_percent.map_or(MISSING.to_string(), |g| fixed(g, 1)));
            cells.push(r.or_metric.map_or(MISSING.to_string(), |o| fixed(o, 3)));
        }
        cells.push(self.best.map_or(MISSING.to_string(), significant));
        cells
    }
}

/// Per-setting means over the rows: time, iterations, gap (missing counts
/// as 100) and OR.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingAverage {
    pub algorithm: AlgorithmKind,
    pub time: f64,
    pub iterations: f64,
    pub gap_percent: f64,
    pub or_metric: f64,
}

pub fn averages(rows: &[BenchRow], settings: &[AlgorithmKind]) -> Vec<SettingAverage> {
    settings
        .iter()
        .enumerate()
        .map(|(s, &algorithm)| {
            let results: Vec<&SettingResult> = rows.iter().filter_map(|r| r.results.get(s)).collect();
            let n = results.len().max(1) as f64;
            let mean = |f: &dyn Fn(&SettingResult) -> f64| results.iter().map(|r| f(r)).sum::<f64>() / n;
            SettingAverage {
                algorithm,
                time: mean(&|r| r.time),
                iterations: mean(&|r| r.iterations as f64),
                gap_percent: mean(&|r| r.gap_percent.unwrap_or(100.0)),
                or_metric: mean(&|r| r.or_metric.unwrap_or(0.0)),
            }
        })
        .collect()
}

/// Closing row of the table. Objective columns are left empty.
pub fn average_cells(rows: &[BenchRow], settings: &[AlgorithmKind]) -> Vec<String> {
    let mut cells = vec!["average".to_string(), String::new()];
    for a in averages(rows, settings) {
        cells.push(fixed(a.time, 2));
        cells.push(String::new());
        cells.push(fixed(a.iterations, 1));
        cells.push(fixed(a.gap_percent, 1));
        cells.push(fixed(a.or_metric, 3));
    }
    cells.push(String::new());
    cells
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(significant(35.0), "35");
        assert_eq!(significant(1234.56789), "1234.57");
        assert_eq!(significant(0.000123456789), "0.000123457");
        assert_eq!(significant(-2.5), "-2.5");
        assert_eq!(significant(-0.0), "0");
        assert_eq!(significant(-2e-14), "0");
        assert_eq!(significant(1234567.0), "1234567");
    }

    #[test]
    fn header_layout() {
        let h = header(&[AlgorithmKind::Slp, AlgorithmKind::Pdr]);
        assert_eq!(h.len(), 2 + 10 + 1);
        assert_eq!(h[2], "SLP_T");
        assert_eq!(h[8], "PDR_Obj");
        assert_eq!(h[12], "o*");
    }
}
