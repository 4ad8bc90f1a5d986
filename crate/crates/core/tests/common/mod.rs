#![allow(dead_code)]

use conefix::games::{Arc, GameGraph};
use conefix::{Expr, MinMaxAffineOp};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn positive_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| (rng.gen_range(-2.0f64..2.0)).exp()).collect()
}

pub fn signed_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// A random leaf `p·x + r`. Sparse rows make ties and shared terms common.
fn leaf<R: Rng>(rng: &mut R, n: usize, homogeneous: bool) -> Expr {
    let mut p = vec![0.0; n];
    for _ in 0..rng.gen_range(1..=2) {
        p[rng.gen_range(0..n)] += rng.gen_range(-1.0..1.0);
    }
    let r = if homogeneous { 0.0 } else { rng.gen_range(-2.0..2.0) };
    Expr::leaf(p, r)
}

fn tree<R: Rng>(rng: &mut R, n: usize, depth: usize, terms: usize, homogeneous: bool) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng, n, homogeneous);
    }
    let k = rng.gen_range(1..=terms);
    let children: Vec<Expr> = (0..k).map(|_| tree(rng, n, depth - 1, terms, homogeneous)).collect();
    match rng.gen_range(0..3) {
        0 => Expr::Max(children),
        1 => Expr::Min(children),
        _ => Expr::Sum {
            weights: (0..k).map(|_| rng.gen_range(0.0..1.0)).collect(),
            children,
        },
    }
}

/// A random max/min-affine map `ℝ^n → ℝ^n`.
pub fn random_op<R: Rng>(rng: &mut R, n: usize, depth: usize, terms: usize, homogeneous: bool) -> MinMaxAffineOp {
    let coords = (0..n).map(|_| tree(rng, n, depth, terms, homogeneous)).collect();
    MinMaxAffineOp::new(n, coords).unwrap()
}

/// A random strongly connected game graph: a Hamiltonian cycle through a
/// shuffled order plus extra random arcs.
pub fn random_game<R: Rng>(rng: &mut R, n: usize) -> GameGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = std::collections::BTreeSet::new();
    for k in 0..n {
        pairs.insert((order[k], order[(k + 1) % n]));
    }
    for _ in 0..rng.gen_range(0..=2 * n) {
        pairs.insert((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    let arcs = pairs
        .into_iter()
        .map(|(from, to)| Arc {
            from,
            to,
            payoff: rng.gen_range(-5i32..=5) as f64,
        })
        .collect();
    GameGraph::new(n, arcs).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
