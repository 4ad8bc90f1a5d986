mod common;

use conefix::semidiff::semidifferential;
use conefix::spectral::{bonsall_estimate, op_seminorm, NormKind, SamplePlan};
use conefix::{games, ConeVector, Error, MinMaxAffineOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shapley_derivative(rng: &mut ChaCha8Rng, n: usize) -> MinMaxAffineOp {
    let f = games::shapley_operator(&common::random_game(rng, n));
    let v = common::signed_vec(rng, n, 4.0);
    semidifferential(&f, &ConeVector::new(v).unwrap()).unwrap().0
}

fn exact_power_norms(h: &MinMaxAffineOp, norm: &NormKind, depth: usize, plan: &SamplePlan) -> Vec<f64> {
    (1..=depth)
        .map(|k| {
            let r = op_seminorm(&h.power(k).unwrap(), norm, plan).unwrap();
            assert!(r.exact);
            r.value
        })
        .collect()
}

#[test]
fn power_norms_are_submultiplicative() {
    let plan = SamplePlan::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..20 {
        let n = rng.gen_range(1..=3);
        let (h, norm) = if case % 2 == 0 {
            (common::random_op(&mut rng, n, 2, 3, true), NormKind::SupNorm)
        } else {
            (shapley_derivative(&mut rng, n), NormKind::oscillation(n).unwrap())
        };
        let norms = exact_power_norms(&h, &norm, 4, &plan);
        for i in 1..=4 {
            for j in 1..=4 - i {
                assert!(norms[i + j - 1] <= norms[i - 1] * norms[j - 1] + 1e-9, "case {case}: {norms:?}");
            }
        }
    }
}

#[test]
fn estimates_are_ordered() {
    let plan = SamplePlan::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..20 {
        let n = rng.gen_range(1..=4);
        let u = ConeVector::positive(common::positive_vec(&mut rng, n)).unwrap();
        let (h, norm) = match case % 3 {
            0 => (common::random_op(&mut rng, n, 2, 3, true), NormKind::SupNorm),
            1 => (common::random_op(&mut rng, n, 2, 3, true), NormKind::LocalNorm { u }),
            _ => (shapley_derivative(&mut rng, n), NormKind::oscillation(n).unwrap()),
        };
        let e = bonsall_estimate(&h, 3, &norm, &plan).unwrap();
        assert!(e.lower <= e.upper + 1e-12, "case {case}: {} > {}", e.lower, e.upper);
        assert_eq!(e.power_norms.len(), 3);
    }
}

#[test]
fn oscillation_requires_kernel_compatibility() {
    let plan = SamplePlan::default();
    let h = MinMaxAffineOp::linear(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    assert_eq!(
        op_seminorm(&h, &NormKind::oscillation(2).unwrap(), &plan),
        Err(Error::KernelIncompatible)
    );
    let f = games::shapley_operator(&games::GameGraph::three_node_example());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let v = ConeVector::new(common::signed_vec(&mut rng, 3, 6.0)).unwrap();
        let (h, _) = semidifferential(&f, &v).unwrap();
        assert!(op_seminorm(&h, &NormKind::oscillation(3).unwrap(), &plan).is_ok());
    }
}

#[test]
fn affine_offsets_are_rejected() {
    let h = MinMaxAffineOp::new(1, vec![conefix::Expr::leaf(vec![1.0], 1.0)]).unwrap();
    assert_eq!(
        op_seminorm(&h, &NormKind::SupNorm, &SamplePlan::default()),
        Err(Error::NotHomogeneous)
    );
}
