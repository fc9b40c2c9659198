//! Acceptance report: one PASS/FAIL line per criterion. The process exits
//! successfully either way; the lines are the result.

mod common;

use std::time::Instant;

use common::{brute_force_lp, random_flow, random_small_lp, small_instance, tiny1};
use pooling::algorithms::{self, initial_point, AlgorithmKind, FailureReason, RunReport, SolverConfig};
use pooling::bench::{self, BenchConfig, BenchRow};
use pooling::formulations::{pool_quality, residuals_f, sigma, tau, tau_forms};
use pooling::instance::{generate_random, GeneratorSpec, Group, PoolingInstance};
use pooling::lp::{audit, solve_with, LpStatus, SolverOptions};
use pooling::oracle;
use pooling::subproblems::{build_pslp, build_slp_f, PenaltyState};
use rand::rngs::StdRng;
use rand::SeedableRng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, name: &str, clock: Instant, limit: Option<f64>, outcome: Outcome) -> bool {
    let secs = clock.elapsed().as_secs_f64();
    let in_time = limit.map_or(true, |l| secs < l);
    let pass = outcome.pass && in_time;
    let limit = limit.map_or(String::new(), |l| format!(", limit {l}s"));
    println!(
        "criterion {n:>2}: {} {name}: {} ({secs:.2}s{limit})",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    pass
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

fn linearization_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut with_closed = 0;
    for seed in 0..150u64 {
        let inst = small_instance(seed);
        let mut rng = StdRng::seed_from_u64(seed);
        let y_t = random_flow(&inst, &mut rng, 0.3);
        let y = random_flow(&inst, &mut rng, 0.3);
        let alpha_t = pool_quality(&inst, &y_t);
        let topo = inst.topology();
        if (0..inst.pools).any(|l| topo.pool_out[l].iter().all(|&(a, _)| y_t[a] == 0.0)) {
            with_closed += 1;
        }
        let s = sigma(&inst, &y, &alpha_t, &y_t).unwrap();
        let t = tau(&inst, &y, &y_t).unwrap();
        for (x, z) in s.iter().flatten().flatten().zip(t.iter().flatten().flatten()) {
            worst = worst.max(rel_gap(*x, *z));
        }
    }
    Outcome {
        pass: worst <= 1e-9 && with_closed > 0,
        detail: format!("150 triples, {with_closed} with a closed pool, worst relative gap {worst:.2e}"),
    }
}

fn trace_equivalence(slpf_runs: &mut Vec<(PoolingInstance, RunReport)>) -> Outcome {
    let config = SolverConfig::default();
    let mut mismatches = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..30 {
        let inst = small_instance(seed);
        let dr = algorithms::run_dr(&inst, &config).unwrap();
        let slpf = algorithms::run_slp_f(&inst, &config).unwrap();
        let mut same = dr.trace.len() == slpf.trace.len() && dr.converged == slpf.converged;
        for (a, b) in dr.trace.iter().zip(&slpf.trace) {
            same &= a.lp_status == b.lp_status;
            if let (Some(ya), Some(yb)) = (&a.y, &b.y) {
                let d = ya.max_abs_diff(yb);
                worst = worst.max(d);
                same &= d <= 1e-8;
            }
        }
        if !same {
            mismatches.push(seed);
        }
        slpf_runs.push((inst, slpf));
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("30 instances, max iterate gap {worst:.2e}, mismatched seeds {mismatches:?}"),
    }
}

fn penalized_dominance(slpf_runs: &[(PoolingInstance, RunReport)]) -> Outcome {
    let opts = SolverOptions::default();
    let config = SolverConfig::default();
    let mut compared = 0;
    let mut failures = 0;
    for (inst, run) in slpf_runs {
        let mut points = vec![run.y0.clone()];
        points.extend(run.trace.iter().filter_map(|r| r.y.clone()));
        let penalties = PenaltyState::uniform(inst, config.mu0, config.nu0);
        for y_t in &points {
            let plain = solve_with(&build_slp_f(inst, &y_t.0).unwrap().0, &opts).unwrap();
            let Some(plain) = plain.objective_value else { continue };
            let pen = solve_with(&build_pslp(inst, &y_t.0, &penalties).unwrap().0, &opts).unwrap();
            compared += 1;
            if !pen.objective_value.is_some_and(|v| v >= plain - 1e-8) {
                failures += 1;
            }
        }
    }
    Outcome {
        pass: failures == 0 && slpf_runs.len() >= 30,
        detail: format!("{} instances, {compared} shared iterates, {failures} violations", slpf_runs.len()),
    }
}

fn pslp_always_optimal(rows: &[BenchRow]) -> Outcome {
    let mut solves = 0;
    let mut bad = 0;
    for row in rows {
        for r in row.results.iter().filter(|r| r.algorithm == AlgorithmKind::Pdr) {
            match &r.report {
                Some(rep) => {
                    solves += rep.trace.len();
                    bad += rep.trace.iter().filter(|t| t.lp_status != Some(LpStatus::Optimal)).count();
                }
                None => bad += 1,
            }
        }
    }
    Outcome { pass: bad == 0 && solves > 0, detail: format!("{solves} penalized solves, {bad} not optimal") }
}

fn fixed_point_feasibility(runs: &[(&PoolingInstance, &RunReport)]) -> Outcome {
    let mut converged = 0;
    let mut infeasible_fixed_points = 0;
    let mut bad = Vec::new();
    for (inst, rep) in runs {
        if !rep.converged {
            continue;
        }
        converged += 1;
        if rep.failure_reason == Some(FailureReason::InfeasibleFixedPoint) {
            infeasible_fixed_points += 1;
        }
        let ok = match &rep.final_y {
            Some(y) => {
                let feasible = residuals_f(inst, &y.0).max_violation <= 1e-6;
                let derived = rep.algorithm == AlgorithmKind::Slp
                    || rep.final_alpha.as_ref() == Some(&pool_quality(inst, &y.0));
                feasible && derived
            }
            None => false,
        };
        if !ok {
            bad.push(format!("{}:{}", rep.algorithm, rep.failure_reason.as_ref().map_or("?".into(), |f| f.to_string())));
        }
    }
    Outcome {
        pass: bad.is_empty() && infeasible_fixed_points == 0,
        detail: format!(
            "{} runs, {converged} converged, {infeasible_fixed_points} at infeasible fixed points, \
             {} final points infeasible or underived {bad:?}",
            runs.len(),
            bad.len()
        ),
    }
}

fn sandwich(sweep: &[(String, PoolingInstance)], rows: &[BenchRow], slpf: &[RunReport]) -> Outcome {
    let mut failures = Vec::new();
    for (((id, inst), row), slpf) in sweep.iter().zip(rows).zip(slpf) {
        let tol = |o: f64| 1e-6 * (1.0 + o.abs());
        let reports = row.results.iter().filter_map(|r| r.report.as_ref()).chain(std::iter::once(slpf));
        let mut ok = true;
        let mut o_0 = None;
        for rep in reports.filter(|r| r.algorithm != AlgorithmKind::Pdr) {
            o_0 = Some(rep.o_0);
            ok &= rep.trace.iter().filter_map(|t| t.o_t).all(|o| o <= rep.o_0 + tol(rep.o_0));
        }
        let o_0 = o_0.unwrap_or_else(|| initial_point(inst).unwrap().1);
        match (oracle::mccormick_upper_bound(inst), row.grid_bound) {
            (Ok(upper), Some(lower)) => ok &= lower <= upper + tol(upper) && upper <= o_0 + tol(o_0),
            _ => ok = false,
        }
        if !ok {
            failures.push(id.clone());
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{} instances, failures {failures:?}", sweep.len()),
    }
}

fn tiny1_end_to_end() -> Outcome {
    let inst = tiny1();
    let config = SolverConfig::default();
    let mut values = Vec::new();
    let mut pass = true;
    for kind in [AlgorithmKind::Dr, AlgorithmKind::Pdr] {
        let rep = algorithms::run(kind, &inst, &config).unwrap();
        let obj = rep.final_objective.unwrap_or(f64::NAN);
        pass &= rep.converged && (obj - 35.0).abs() <= 1e-5;
        values.push(format!("{kind}={obj}"));
    }
    let (grid, _) = oracle::grid_lower_bound(&inst, 41, oracle::DEFAULT_GRID_BUDGET).unwrap();
    pass &= (grid - 35.0).abs() <= 1e-5;
    Outcome { pass, detail: format!("{}, grid(41)={grid}", values.join(", ")) }
}

fn ranking(rows: &[BenchRow], settings: &[AlgorithmKind], secs: f64) -> Outcome {
    let avg = bench::averages(rows, settings);
    let find = |k: AlgorithmKind| avg.iter().find(|a| a.algorithm == k).unwrap();
    let (slp, dr, pdr) = (find(AlgorithmKind::Slp), find(AlgorithmKind::Dr), find(AlgorithmKind::Pdr));
    let gap_order = pdr.gap_percent <= dr.gap_percent && dr.gap_percent <= slp.gap_percent;
    let or_order = pdr.or_metric >= dr.or_metric && dr.or_metric >= slp.or_metric;
    Outcome {
        pass: gap_order && or_order && secs < 300.0,
        detail: format!(
            "{} instances in {secs:.1}s; mean G% slp {:.1} dr {:.1} pdr {:.1} (order {}); mean OR slp {:.3} dr {:.3} pdr {:.3} (order {})",
            rows.len(),
            slp.gap_percent,
            dr.gap_percent,
            pdr.gap_percent,
            if gap_order { "holds" } else { "violated" },
            slp.or_metric,
            dr.or_metric,
            pdr.or_metric,
            if or_order { "holds" } else { "violated" },
        ),
    }
}

fn lp_corpus() -> Outcome {
    let opts = SolverOptions::default();
    let mut disagreements = 0;
    let mut audit_failures = 0;
    let mut optimal = 0;
    for seed in 0..200u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let lp = random_small_lp(&mut rng);
        let sol = solve_with(&lp, &opts).unwrap();
        match (brute_force_lp(&lp), sol.objective_value) {
            (None, None) if sol.status == LpStatus::Infeasible => {}
            (Some(v), Some(got)) if (got - v).abs() <= 1e-8 => {}
            _ => disagreements += 1,
        }
        if sol.is_optimal() {
            optimal += 1;
            if !audit(&lp, &sol).passes(1e-8) {
                audit_failures += 1;
            }
        }
    }
    Outcome {
        pass: disagreements == 0 && audit_failures == 0,
        detail: format!(
            "200 LPs, {disagreements} disagreements, {optimal} optimal with {audit_failures} audit failures; \
             every optimal solve in debug builds is audited by the solver"
        ),
    }
}

fn gradient_check() -> Outcome {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..12u64 {
        let inst = small_instance(seed);
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        for _ in 0..20 {
            let y_t: Vec<f64> = random_flow(&inst, &mut rng, 0.0).iter().map(|v| v + 1.0).collect();
            let forms = tau_forms(&inst, &y_t).unwrap();
            for term in &forms.terms {
                for k in 0..inst.attributes {
                    let f = |y: &[f64]| pool_quality(&inst, y).0[term.pool][k] * y[term.arc];
                    for a in 0..inst.num_arcs() {
                        let (mut plus, mut minus) = (y_t.clone(), y_t.clone());
                        plus[a] += h;
                        minus[a] -= h;
                        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                        let c = term.forms[k].coefficient(a);
                        worst = worst.max((c - fd).abs() / c.abs().max(fd.abs()).max(1e-6));
                        checked += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("12 instances x 20 points, {checked} partials, worst relative error {worst:.2e}"),
    }
}

fn main() {
    let mut passed = 0;

    let clock = Instant::now();
    passed += report(1, "sigma/tau equivalence", clock, Some(5.0), linearization_equivalence()) as usize;

    let clock = Instant::now();
    let mut slpf_runs = Vec::new();
    let outcome = trace_equivalence(&mut slpf_runs);
    passed += report(2, "DR and SLP-F traces", clock, Some(30.0), outcome) as usize;

    let clock = Instant::now();
    passed += report(3, "penalized dominance", clock, None, penalized_dominance(&slpf_runs)) as usize;

    // The sweep feeds criteria 4, 5, 6 and 8.
    let settings = vec![AlgorithmKind::Slp, AlgorithmKind::Dr, AlgorithmKind::Pdr];
    let config = BenchConfig { settings: settings.clone(), ..BenchConfig::default() };
    let sweep: Vec<(String, PoolingInstance)> = Group::ALL
        .iter()
        .flat_map(|&group| {
            (1..=10).map(move |seed| (format!("{}{seed}", group.letter()), generate_random(GeneratorSpec { group, seed })))
        })
        .collect();
    let clock = Instant::now();
    let rows: Vec<BenchRow> = sweep.iter().map(|(id, inst)| bench::bench_instance(id, inst, &config)).collect();
    let sweep_secs = clock.elapsed().as_secs_f64();
    let sweep_slpf: Vec<RunReport> = sweep
        .iter()
        .map(|(_, inst)| algorithms::run_slp_f(inst, &config.solver).unwrap())
        .collect();

    let clock = Instant::now();
    passed += report(4, "penalized subproblems optimal", clock, None, pslp_always_optimal(&rows)) as usize;

    let clock = Instant::now();
    let mut runs: Vec<(&PoolingInstance, &RunReport)> = Vec::new();
    for ((_, inst), row) in sweep.iter().zip(&rows) {
        runs.extend(row.results.iter().filter_map(|r| r.report.as_ref()).map(|r| (inst, r)));
    }
    runs.extend(sweep.iter().map(|(_, inst)| inst).zip(&sweep_slpf));
    runs.extend(slpf_runs.iter().map(|(inst, r)| (inst, r)));
    passed += report(5, "fixed-point feasibility", clock, None, fixed_point_feasibility(&runs)) as usize;

    let clock = Instant::now();
    passed += report(6, "relaxation sandwich", clock, None, sandwich(&sweep, &rows, &sweep_slpf)) as usize;

    let clock = Instant::now();
    passed += report(7, "TINY1 end to end", clock, Some(1.0), tiny1_end_to_end()) as usize;

    let clock = Instant::now();
    passed += report(8, "ranking over the sweep", clock, None, ranking(&rows, &settings, sweep_secs)) as usize;

    let clock = Instant::now();
    passed += report(9, "LP solver correctness", clock, None, lp_corpus()) as usize;

    let clock = Instant::now();
    passed += report(10, "Taylor gradient check", clock, None, gradient_check()) as usize;

    println!("acceptance: {passed}/10 criteria pass");
}
