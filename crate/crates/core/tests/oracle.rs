mod common;

use common::{quality_unconstrained, small_instance, tiny1};
use pooling::algorithms::{self, initial_point, AlgorithmKind, SolverConfig};
use pooling::error::OracleError;
use pooling::formulations::{objective, residuals_f};
use pooling::instance::{generate_random, GeneratorSpec, Group};
use pooling::oracle::{affordable_steps, bound_report, grid_lower_bound, mccormick_upper_bound, DEFAULT_GRID_BUDGET};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + b.abs())
}

#[test]
fn tiny1_grid_finds_the_global_optimum() {
    let inst = tiny1();
    let (value, y) = grid_lower_bound(&inst, 41, DEFAULT_GRID_BUDGET).unwrap();
    assert!((value - 35.0).abs() <= 1e-9, "{value}");
    assert!(residuals_f(&inst, &y.0).max_violation <= 1e-6);
    assert_eq!(objective(&inst, &y.0), value);
}

#[test]
fn tiny1_relaxation_values() {
    let inst = tiny1();
    let (_, o_0) = initial_point(&inst).unwrap();
    assert_eq!(o_0, 40.0);
    let upper = mccormick_upper_bound(&inst).unwrap();
    assert!(upper >= 35.0 - 1e-9 && upper <= o_0 + 1e-9, "{upper}");
}

#[test]
fn bounds_sandwich_every_local_solution() {
    let config = SolverConfig::default();
    for seed in 0..12 {
        let inst = small_instance(seed);
        let (_, o_0) = initial_point(&inst).unwrap();
        let upper = mccormick_upper_bound(&inst).unwrap();
        let steps = affordable_steps(&inst, 5, 1e4);
        let (lower, _) = grid_lower_bound(&inst, steps, 1e4).unwrap();
        assert!(lower <= upper + 1e-6 * (1.0 + upper), "seed {seed}: grid {lower} above McCormick {upper}");
        assert!(upper <= o_0 + 1e-6 * (1.0 + o_0), "seed {seed}: McCormick {upper} above o_0 {o_0}");
        for kind in AlgorithmKind::ALL {
            let report = algorithms::run(kind, &inst, &config).unwrap();
            if let Some(obj) = report.final_objective {
                assert!(obj <= upper + 1e-6 * (1.0 + upper), "seed {seed} {kind}: {obj} above {upper}");
            }
        }
    }
}

#[test]
fn refining_a_nested_grid_never_lowers_the_bound() {
    for seed in 1..=8 {
        let inst = generate_random(GeneratorSpec { group: Group::A, seed });
        let values: Vec<f64> =
            [2, 3, 5].iter().map(|&s| grid_lower_bound(&inst, s, DEFAULT_GRID_BUDGET).unwrap().0).collect();
        assert!(values[1] >= values[0] - 1e-9, "seed {seed}: {values:?}");
        assert!(values[2] >= values[1] - 1e-9, "seed {seed}: {values:?}");
    }
}

#[test]
fn quality_unconstrained_relaxation_is_exact() {
    for seed in 0..6 {
        let inst = quality_unconstrained(small_instance(seed));
        let (_, o_0) = initial_point(&inst).unwrap();
        let upper = mccormick_upper_bound(&inst).unwrap();
        assert!(close(upper, o_0), "seed {seed}: {upper} vs {o_0}");
    }
}

#[test]
fn oversized_grids_are_refused() {
    let inst = generate_random(GeneratorSpec { group: Group::E, seed: 1 });
    let err = grid_lower_bound(&inst, 3, 1e4).unwrap_err();
    assert!(matches!(err, OracleError::BudgetExceeded { .. }));
    assert_eq!(affordable_steps(&inst, 5, 1e4), 1);
}

#[test]
fn bound_report_combines_both_bounds() {
    let report = bound_report(&tiny1(), 41, DEFAULT_GRID_BUDGET).unwrap();
    assert!(report.lower_bound <= report.upper_bound);
    assert_eq!(report.grid_resolution, 41);
}
