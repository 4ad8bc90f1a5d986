//! Sequential against rayon execution on the three data-parallel workloads:
//! sampled operator norms, exact region LPs and convergence starts.

use std::hint::black_box;

use conefix::games::{self, Arc, EigenOptions, GameGraph};
use conefix::semidiff::semidifferential;
use conefix::spectral::op_seminorm;
use conefix::{ConeVector, Execution, MinMaxAffineOp, NormKind, Normalizer, SamplePlan};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

/// Ring game: node `i` moves to itself, `i+1` or `i+2` with small integer
/// payoffs, so it is strongly connected for every `n ≥ 1`.
fn ring_game(n: usize) -> GameGraph {
    let mut arcs = Vec::new();
    for i in 0..n {
        for (step, payoff) in [(0, (i % 3) as f64), (1, -((i % 5) as f64)), (2, (i % 4) as f64 - 1.0)] {
            let to = (i + step) % n;
            if !arcs.iter().any(|a: &Arc| a.from == i && a.to == to) {
                arcs.push(Arc { from: i, to, payoff });
            }
        }
    }
    GameGraph::new(n, arcs).unwrap()
}

/// `F'_v` at a point with several ties, so the derivative is genuinely
/// piecewise linear.
fn derivative(n: usize) -> MinMaxAffineOp {
    let f = games::shapley_operator(&ring_game(n));
    let v: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    semidifferential(&f, &ConeVector::new(v).unwrap()).unwrap().0
}

fn sampled_norm(c: &mut Criterion) {
    let h = derivative(12).power(2).unwrap();
    let norm = NormKind::oscillation(12).unwrap();
    let mut group = c.benchmark_group("sampled_op_seminorm");
    for (name, execution) in MODES {
        let plan = SamplePlan {
            random_directions: 4096,
            execution,
            ..SamplePlan::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| op_seminorm(black_box(&h), &norm, &plan).unwrap())
        });
    }
    group.finish();
}

fn exact_norm(c: &mut Criterion) {
    let h = derivative(4).power(2).unwrap();
    let norm = NormKind::oscillation(4).unwrap();
    let mut group = c.benchmark_group("exact_op_seminorm");
    group.sample_size(10);
    for (name, execution) in MODES {
        let plan = SamplePlan {
            execution,
            ..SamplePlan::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| op_seminorm(black_box(&h), &norm, &plan).unwrap())
        });
    }
    group.finish();
}

fn convergence(c: &mut Criterion) {
    let n = 30;
    let f = games::shapley_operator(&ring_game(n));
    let report =
        games::solve_additive_eigenpair(&f, &Normalizer::uniform(n).unwrap(), &EigenOptions::default()).unwrap();
    let mut group = c.benchmark_group("convergence_report");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| games::convergence_report(black_box(&f), &report, 1000, 40, 7, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sampled_norm, exact_norm, convergence);
criterion_main!(benches);
