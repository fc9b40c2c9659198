//! Shared test fixtures and independent oracles.
#![allow(dead_code)]

use pooling::instance::{generate_random, GeneratorSpec, Group, NodeId, PoolingInstance};
use pooling::lp::{LinearProgram, Relation};
use rand::rngs::StdRng;
use rand::Rng;

/// Two inputs (quality 3 at cost 1, quality 1 at cost 2) feeding one pool
/// that serves one output (price 5, demand 10, quality at most 2).
/// Arc order: (i0->p0, i1->p0, p0->o0).
pub fn tiny1() -> PoolingInstance {
    let mut inst = PoolingInstance::empty(2, 1, 1, 1);
    inst.add_arc(NodeId::input(0), NodeId::pool(0), -1.0, None);
    inst.add_arc(NodeId::input(1), NodeId::pool(0), -2.0, None);
    inst.add_arc(NodeId::pool(0), NodeId::output(0), 5.0, None);
    inst.output_capacity[0] = Some(10.0);
    inst.input_quality = vec![vec![3.0], vec![1.0]];
    inst.quality_lb = vec![vec![0.0]];
    inst.quality_ub = vec![vec![2.0]];
    inst
}

/// Maximum of the LP over all basic solutions, by enumerating every choice
/// of `n` active constraints among rows and finite bounds. Only valid for
/// bounded feasible regions. `None` means no feasible vertex.
pub fn brute_force_lp(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        planes.push((a, row.rhs));
    }
    for j in 0..n {
        for b in [lp.var_lb[j], lp.var_ub[j]].into_iter().flatten() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            planes.push((a, b));
        }
    }
    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    if n > planes.len() {
        return None;
    }
    loop {
        if let Some(x) = solve_square(&choice.iter().map(|&c| planes[c].clone()).collect::<Vec<_>>()) {
            if lp.max_violation(&x) <= 1e-9 {
                let v = lp.objective_at(&x);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] < planes.len() - n + i {
                choice[i] += 1;
                for k in i + 1..n {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(planes: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = planes.len();
    let mut a: Vec<Vec<f64>> = planes
        .iter()
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(*b);
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))?;
        if a[p][k].abs() < 1e-9 {
            return None;
        }
        a.swap(k, p);
        for i in 0..n {
            if i != k {
                let f = a[i][k] / a[k][k];
                for c in k..=n {
                    a[i][c] -= f * a[k][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Small boxed LP with integer data: at most 6 columns and 6 rows.
pub fn random_small_lp(rng: &mut StdRng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=6);
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.objective[j] = rng.gen_range(-5..=5) as f64;
        let lb = if rng.gen_bool(0.3) { -(rng.gen_range(1..=3) as f64) } else { 0.0 };
        lp.var_lb[j] = Some(lb);
        lp.var_ub[j] = Some(lb + rng.gen_range(0..=8) as f64);
    }
    for _ in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                coeffs.push((j, rng.gen_range(-4..=4) as f64));
            }
        }
        let relation = match rng.gen_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        lp.add_row(coeffs, relation, rng.gen_range(-6..=10) as f64);
    }
    lp
}

/// Generated instance from one of the three smallest groups.
pub fn small_instance(seed: u64) -> PoolingInstance {
    let group = [Group::A, Group::B, Group::C][(seed % 3) as usize];
    generate_random(GeneratorSpec { group, seed: seed / 3 + 1 })
}

/// Nonnegative flow with entries in [0, 30). Each pool is closed, i.e. all
/// its arcs carry zero flow, with probability `closed`.
pub fn random_flow(inst: &PoolingInstance, rng: &mut StdRng, closed: f64) -> Vec<f64> {
    let mut y: Vec<f64> = (0..inst.num_arcs()).map(|_| rng.gen_range(0.0..30.0)).collect();
    for l in 0..inst.pools {
        if rng.gen_bool(closed) {
            for (a, arc) in inst.arcs.iter().enumerate() {
                if arc.tail == NodeId::pool(l) || arc.head == NodeId::pool(l) {
                    y[a] = 0.0;
                }
            }
        }
    }
    y
}

/// Same network with quality bounds too loose to ever bind.
pub fn quality_unconstrained(mut inst: PoolingInstance) -> PoolingInstance {
    for row in inst.quality_ub.iter_mut() {
        for v in row.iter_mut() {
            *v = 1e3;
        }
    }
    for row in inst.quality_lb.iter_mut() {
        for v in row.iter_mut() {
            *v = 0.0;
        }
    }
    inst
}
