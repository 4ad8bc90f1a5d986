//! Operator (semi)norms and Bonsall spectral radius bounds for homogeneous
//! piecewise-linear maps.
//!
//! For a continuous homogeneous `h`, `‖h‖ = sup_{‖x‖ ≤ 1} ‖h(x)‖` and the
//! Bonsall radius is `lim ‖h^k‖^{1/k} = inf_k ‖h^k‖^{1/k}`. The same
//! formulas with the oscillation seminorm `ω_u` give the seminorm version.
//!
//! Up to [`SamplePlan::n_exact`] dimensions the operator norm is computed
//! exactly by enumerating linearity regions and solving one LP per region
//! and objective. Beyond that, or when the region budget runs out, only a
//! sampled lower estimate is available and results are flagged as
//! heuristic. Only exact results can certify a contraction.

mod cone;
mod lp;
mod regions;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone_metrics::{slice, ConeVector};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::semidiff::MinMaxAffineOp;

use lp::Ball;

pub const DEFAULT_SEED: u64 = 0x5EED;

/// The norm (or seminorm) measuring both inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormKind {
    SupNorm,
    LocalNorm { u: ConeVector },
    Oscillation { u: ConeVector },
}

impl NormKind {
    /// `ω_e` on ℝⁿ.
    pub fn oscillation(n: usize) -> Result<Self> {
        Ok(NormKind::Oscillation {
            u: ConeVector::ones(n)?,
        })
    }

    pub fn measure(&self, y: &[f64]) -> f64 {
        match self {
            NormKind::SupNorm => slice::sup_norm(y),
            NormKind::LocalNorm { u } => slice::local_norm(y, u.as_slice()),
            NormKind::Oscillation { u } => slice::oscillation_u(y, u.as_slice()),
        }
    }

    fn unit(&self) -> Option<&ConeVector> {
        match self {
            NormKind::SupNorm => None,
            NormKind::LocalNorm { u } | NormKind::Oscillation { u } => Some(u),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let Some(u) = self.unit() {
            if u.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: u.len(),
                });
            }
            if let Some(index) = u.as_slice().iter().position(|v| *v <= 0.0) {
                return Err(Error::NonPositive {
                    index,
                    value: u.as_slice()[index],
                });
            }
        }
        Ok(())
    }

    /// Affine objectives whose maximum over a region is the norm of the
    /// region's map.
    fn objectives(&self, maps: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let scaled = |i: usize| -> Vec<f64> {
            match self.unit() {
                Some(u) => maps[i].iter().map(|v| v / u.as_slice()[i]).collect(),
                None => maps[i].clone(),
            }
        };
        let m = maps.len();
        match self {
            NormKind::SupNorm | NormKind::LocalNorm { .. } => (0..m)
                .flat_map(|i| {
                    let s = scaled(i);
                    let neg = s.iter().map(|v| -v).collect();
                    [s, neg]
                })
                .collect(),
            NormKind::Oscillation { .. } => {
                let rows: Vec<Vec<f64>> = (0..m).map(scaled).collect();
                let mut out = Vec::new();
                for i in 0..m {
                    for j in 0..m {
                        if i != j {
                            out.push(rows[i].iter().zip(&rows[j]).map(|(a, b)| a - b).collect());
                        }
                    }
                }
                out
            }
        }
    }
}

/// Deterministic sampling and exactness settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub seed: u64,
    pub random_directions: usize,
    /// Largest dimension for which exact region enumeration is attempted.
    pub n_exact: usize,
    /// Maximum number of pruning LPs and region LPs per operator norm.
    pub lp_budget: usize,
    /// Cap on the power depth `K`.
    pub max_depth: usize,
    pub execution: Execution,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            random_directions: 256,
            n_exact: 6,
            lp_budget: 200_000,
            max_depth: 12,
            execution: Execution::default(),
        }
    }
}

impl SamplePlan {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// `±e_i`, `e_i − e_j` and `random_directions` seeded vectors, all scaled
    /// to unit norm. Vectors of zero norm are dropped.
    pub fn samples(&self, norm: &NormKind, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut x = vec![0.0; n];
                x[i] = s;
                out.push(x);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut x = vec![0.0; n];
                    x[i] = 1.0;
                    x[j] = -1.0;
                    out.push(x);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random_directions {
            out.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }
        out.into_iter()
            .filter_map(|mut x| {
                let size = norm.measure(&x);
                if size <= 1e-12 {
                    return None;
                }
                x.iter_mut().for_each(|v| *v /= size);
                Some(x)
            })
            .collect()
    }
}

/// Operator (semi)norm of a homogeneous map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpNorm {
    pub value: f64,
    /// True when computed by exhaustive region enumeration; otherwise
    /// `value` is only a sampled lower estimate.
    pub exact: bool,
    /// A unit vector attaining `value`.
    pub witness: Option<Vec<f64>>,
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * 1f64.max(a.abs()).max(b.abs())
}

fn check_square(h: &MinMaxAffineOp) -> Result<usize> {
    if h.input_dim() != h.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.input_dim(),
            found: h.output_dim(),
        });
    }
    Ok(h.input_dim())
}

/// Spot checks `h(2x) = 2h(x)` and, for seminorms, `ω_u(h(x + λu)) = ω_u(h(x))`.
fn spot_check(h: &MinMaxAffineOp, norm: &NormKind, samples: &[Vec<f64>]) -> Result<()> {
    for x in samples.iter().take(64) {
        let hx = h.apply_unchecked(x);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let h2 = h.apply_unchecked(&x2);
        if hx.iter().zip(&h2).any(|(a, b)| !close(2.0 * a, *b, 1e-9)) {
            return Err(Error::NotHomogeneous);
        }
        if let NormKind::Oscillation { u } = norm {
            let base = norm.measure(&hx);
            for lambda in [-1.5, 2.5] {
                let shifted: Vec<f64> = x.iter().zip(u.as_slice()).map(|(a, b)| a + lambda * b).collect();
                if !close(norm.measure(&h.apply_unchecked(&shifted)), base, 1e-9) {
                    return Err(Error::KernelIncompatible);
                }
            }
        }
    }
    Ok(())
}

fn sampled_norm(h: &MinMaxAffineOp, norm: &NormKind, samples: &[Vec<f64>], exec: Execution) -> OpNorm {
    let values = par::map(exec, samples, |x| norm.measure(&h.apply_unchecked(x)));
    let mut best = OpNorm {
        value: 0.0,
        exact: false,
        witness: None,
    };
    for (x, v) in samples.iter().zip(values) {
        if v > best.value {
            best.value = v;
            best.witness = Some(x.clone());
        }
    }
    best
}

/// Region LPs solved per batch between incumbent updates.
const EXACT_CHUNK: usize = 64;

fn exact_norm(h: &MinMaxAffineOp, norm: &NormKind, plan: &SamplePlan) -> Result<Option<OpNorm>> {
    let n = h.input_dim();
    let ball = Ball::new(norm, n);
    // Syntactic powers repeat subtrees; flattening first shrinks the search.
    let h = &h.simplified();
    let Some(regions) = regions::enumerate(h, &ball, plan.lp_budget)? else {
        return Ok(None);
    };
    let tasks: Vec<(usize, Vec<f64>)> = regions
        .iter()
        .enumerate()
        .flat_map(|(i, r)| norm.objectives(&r.maps).into_iter().map(move |o| (i, o)))
        .collect();
    if tasks.len() > plan.lp_budget {
        return Ok(None);
    }
    // Objectives are visited in order of a cheap bound over the enclosing box;
    // once the bound cannot beat the incumbent the remaining LPs are skipped.
    let mut order: Vec<(f64, usize)> = tasks
        .iter()
        .enumerate()
        .map(|(t, (_, objective))| (ball.box_bound(objective), t))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = OpNorm {
        value: 0.0,
        exact: true,
        witness: None,
    };
    for chunk in order.chunks(EXACT_CHUNK) {
        if chunk[0].0 <= best.value {
            break;
        }
        let results = par::map(plan.execution, chunk, |&(bound, t)| {
            let (i, objective) = &tasks[t];
            if bound <= best.value {
                return Ok((f64::NEG_INFINITY, None));
            }
            match ball.normalize(objective) {
                // Constant on the ball.
                None => Ok((objective[n], None)),
                Some(_) => lp::maximize(&ball, &regions[*i].constraints, objective).map(|(v, x)| (v, Some(x))),
            }
        });
        for r in results {
            let (v, x) = r?;
            if v > best.value {
                best.value = v;
                best.witness = x;
            }
        }
    }
    Ok(Some(best))
}

fn op_norm_checked(h: &MinMaxAffineOp, norm: &NormKind, plan: &SamplePlan, samples: &[Vec<f64>]) -> Result<OpNorm> {
    let sampled = sampled_norm(h, norm, samples, plan.execution);
    if h.input_dim() > plan.n_exact {
        return Ok(sampled);
    }
    match exact_norm(h, norm, plan)? {
        Some(mut exact) => {
            // The LP optimum can trail an evaluated sample by rounding.
            if sampled.value > exact.value {
                exact.value = sampled.value;
                exact.witness = sampled.witness;
            }
            Ok(exact)
        }
        None => Ok(sampled),
    }
}

/// `sup_{‖x‖ ≤ 1} ‖h(x)‖` for a homogeneous `h`: exact for small dimensions,
/// otherwise a sampled lower estimate.
pub fn op_seminorm(h: &MinMaxAffineOp, norm: &NormKind, plan: &SamplePlan) -> Result<OpNorm> {
    let n = check_square(h)?;
    norm.validate(n)?;
    let samples = plan.samples(norm, n);
    spot_check(h, norm, &samples)?;
    op_norm_checked(h, norm, plan, &samples)
}

/// Bounds on the Bonsall spectral radius of a homogeneous map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// `min_{k ≤ K} ‖h^k‖^{1/k}`; a valid upper bound only when `exact`.
    pub upper: f64,
    /// `max_x min_{k ≤ K} (‖h^k(x)‖ / ‖x‖)^{1/k}` over the sample set.
    pub lower: f64,
    pub norm_kind: NormKind,
    pub depth: usize,
    pub exact: bool,
    /// Sample attaining `lower`.
    pub witness: Option<Vec<f64>>,
    /// `‖h^k‖` for `k = 1..=depth`.
    pub power_norms: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Outcome of a contraction certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Certificate {
    /// An exact `‖h^k‖^{1/k} ≤ target` was found.
    Holds { k: usize, factor: f64 },
    /// Every power up to the depth has a witness with
    /// `‖h^k(x)‖ > target^k ‖x‖`.
    Fails { factors: Vec<f64> },
    Inconclusive { best: f64 },
}

impl Certificate {
    pub fn holds(&self) -> bool {
        matches!(self, Certificate::Holds { .. })
    }
}

struct PowerAnalysis {
    norms: Vec<OpNorm>,
    /// `ratios[s][k-1] = ‖h^k(x_s)‖ / ‖x_s‖`.
    ratios: Vec<Vec<f64>>,
    samples: Vec<Vec<f64>>,
}

fn analyze(h: &MinMaxAffineOp, depth: usize, norm: &NormKind, plan: &SamplePlan) -> Result<PowerAnalysis> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if depth > plan.max_depth {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} exceeds the cap of {}",
            plan.max_depth
        )));
    }
    let n = check_square(h)?;
    norm.validate(n)?;
    let mut samples = plan.samples(norm, n);
    spot_check(h, norm, &samples)?;
    let mut norms = Vec::with_capacity(depth);
    let mut power = h.clone();
    for k in 1..=depth {
        if k > 1 {
            power = h.compose(&power)?;
        }
        norms.push(op_norm_checked(&power, norm, plan, &samples)?);
    }
    for w in norms.iter().filter_map(|nm| nm.witness.clone()) {
        if norm.measure(&w) > 1e-12 {
            samples.push(w);
        }
    }
    let ratios = par::map(plan.execution, &samples, |x| {
        let size = norm.measure(x);
        let mut y = x.clone();
        (0..depth)
            .map(|_| {
                y = h.apply_unchecked(&y);
                norm.measure(&y) / size
            })
            .collect::<Vec<f64>>()
    });
    Ok(PowerAnalysis {
        norms,
        ratios,
        samples,
    })
}

fn root(v: f64, k: usize) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v.powf(1.0 / k as f64)
    }
}

impl PowerAnalysis {
    fn estimate(&self, norm: &NormKind, seed: u64) -> SpectralEstimate {
        let depth = self.norms.len();
        let exact = self.norms.iter().all(|n| n.exact);
        // In the heuristic regime the per-power norms are sample maxima, so
        // they are recomputed over the full sample set for consistency.
        let power_norms: Vec<f64> = (0..depth)
            .map(|k| {
                let sampled = self.ratios.iter().map(|r| r[k]).fold(0.0, f64::max);
                if exact {
                    self.norms[k].value.max(sampled)
                } else {
                    sampled
                }
            })
            .collect();
        let upper = power_norms
            .iter()
            .enumerate()
            .map(|(k, v)| root(*v, k + 1))
            .fold(f64::INFINITY, f64::min);
        let mut lower = 0.0;
        let mut witness = None;
        for (x, r) in self.samples.iter().zip(&self.ratios) {
            let v = r
                .iter()
                .enumerate()
                .map(|(k, v)| root(*v, k + 1))
                .fold(f64::INFINITY, f64::min);
            if v > lower {
                lower = v;
                witness = Some(x.clone());
            }
        }
        SpectralEstimate {
            upper,
            lower,
            norm_kind: norm.clone(),
            depth,
            exact,
            witness,
            power_norms,
            samples: self.samples.len(),
            seed,
        }
    }

    fn certificate(&self, target: f64) -> Certificate {
        let mut best = f64::INFINITY;
        for (k, n) in self.norms.iter().enumerate() {
            let factor = root(n.value, k + 1);
            if n.exact && factor <= target {
                return Certificate::Holds { k: k + 1, factor };
            }
            best = best.min(factor);
        }
        let factors: Vec<f64> = (0..self.norms.len())
            .map(|k| {
                let sampled = self.ratios.iter().map(|r| r[k]).fold(0.0, f64::max);
                root(sampled, k + 1)
            })
            .collect();
        if factors.iter().all(|f| *f > target) {
            Certificate::Fails { factors }
        } else {
            Certificate::Inconclusive { best }
        }
    }
}

/// Bonsall radius bounds from the first `depth` syntactic powers of `h`.
pub fn bonsall_estimate(
    h: &MinMaxAffineOp,
    depth: usize,
    norm: &NormKind,
    plan: &SamplePlan,
) -> Result<SpectralEstimate> {
    Ok(analyze(h, depth, norm, plan)?.estimate(norm, plan.seed))
}

/// Tries to certify `r̂(h) ≤ target < 1` through some exact `‖h^k‖^{1/k}`.
pub fn certify_contraction(
    h: &MinMaxAffineOp,
    norm: &NormKind,
    target: f64,
    depth: usize,
    plan: &SamplePlan,
) -> Result<Certificate> {
    check_target(target)?;
    Ok(analyze(h, depth, norm, plan)?.certificate(target))
}

/// Both [`bonsall_estimate`] and [`certify_contraction`] from one pass.
pub fn estimate_and_certify(
    h: &MinMaxAffineOp,
    norm: &NormKind,
    target: f64,
    depth: usize,
    plan: &SamplePlan,
) -> Result<(SpectralEstimate, Certificate)> {
    check_target(target)?;
    let analysis = analyze(h, depth, norm, plan)?;
    Ok((analysis.estimate(norm, plan.seed), analysis.certificate(target)))
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "contraction target must lie in (0, 1), got {target}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semidiff::Expr;

    fn example_derivative() -> MinMaxAffineOp {
        let l = |j: usize| {
            let mut p = vec![0.0; 3];
            p[j] = 1.0;
            Expr::leaf(p, 0.0)
        };
        let half = |a: Expr, b: Expr| Expr::Sum {
            weights: vec![0.5, 0.5],
            children: vec![a, b],
        };
        MinMaxAffineOp::new(
            3,
            vec![
                half(l(0), Expr::Min(vec![l(1), l(2)])),
                half(l(0), l(2)),
                half(l(0), l(1)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn derivative_has_oscillation_norm_half() {
        let h = example_derivative();
        let nm = op_seminorm(&h, &NormKind::oscillation(3).unwrap(), &SamplePlan::default()).unwrap();
        assert!(nm.exact);
        assert!((nm.value - 0.5).abs() < 1e-12);
        let attained = NormKind::oscillation(3).unwrap().measure(&h.apply(&[0.0, 1.0, 0.0]).unwrap());
        assert_eq!(attained, 0.5);
    }

    #[test]
    fn identity_and_halving() {
        let plan = SamplePlan::default();
        let id = MinMaxAffineOp::identity(3).unwrap();
        for norm in [
            NormKind::SupNorm,
            NormKind::oscillation(3).unwrap(),
            NormKind::LocalNorm {
                u: ConeVector::positive(vec![1.0, 2.0, 3.0]).unwrap(),
            },
        ] {
            let nm = op_seminorm(&id, &norm, &plan).unwrap();
            assert!((nm.value - 1.0).abs() < 1e-12, "{norm:?}");
        }
        let half = MinMaxAffineOp::linear(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let nm = op_seminorm(&half, &NormKind::SupNorm, &plan).unwrap();
        assert!((nm.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bonsall_on_derivative() {
        let est = bonsall_estimate(&example_derivative(), 3, &NormKind::oscillation(3).unwrap(), &SamplePlan::default())
            .unwrap();
        assert!(est.exact);
        assert!((est.upper - 0.5).abs() < 1e-9);
        assert!(est.lower >= 0.5 - 1e-9);
        assert!(est.lower <= est.upper + 1e-9);
    }

    #[test]
    fn identity_bonsall_is_one_at_every_depth() {
        let id = MinMaxAffineOp::identity(2).unwrap();
        for k in 1..=4 {
            let est = bonsall_estimate(&id, k, &NormKind::SupNorm, &SamplePlan::default()).unwrap();
            assert!((est.upper - 1.0).abs() < 1e-12);
            assert!((est.lower - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn certificates() {
        let plan = SamplePlan::default();
        let osc = NormKind::oscillation(3).unwrap();
        let c = certify_contraction(&example_derivative(), &osc, 0.6, 3, &plan).unwrap();
        assert!(matches!(c, Certificate::Holds { k: 1, .. }));
        let id = MinMaxAffineOp::identity(3).unwrap();
        assert!(matches!(
            certify_contraction(&id, &osc, 0.9, 3, &plan).unwrap(),
            Certificate::Fails { .. }
        ));
        let swap = MinMaxAffineOp::linear(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            certify_contraction(&swap, &NormKind::SupNorm, 0.99, 4, &plan).unwrap(),
            Certificate::Fails { .. }
        ));
        assert!(certify_contraction(&id, &osc, 1.0, 3, &plan).is_err());
    }

    #[test]
    fn heuristic_regime_never_holds() {
        let plan = SamplePlan {
            n_exact: 0,
            ..SamplePlan::default()
        };
        let c = certify_contraction(&example_derivative(), &NormKind::oscillation(3).unwrap(), 0.6, 3, &plan).unwrap();
        assert!(!c.holds());
        let est = bonsall_estimate(&example_derivative(), 3, &NormKind::oscillation(3).unwrap(), &plan).unwrap();
        assert!(!est.exact);
        assert!(est.lower <= est.upper);
    }

    #[test]
    fn rejects_non_homogeneous_and_bad_kernel() {
        let plan = SamplePlan::default();
        let affine = MinMaxAffineOp::new(1, vec![Expr::leaf(vec![1.0], 1.0)]).unwrap();
        assert_eq!(op_seminorm(&affine, &NormKind::SupNorm, &plan), Err(Error::NotHomogeneous));
        let scale = MinMaxAffineOp::linear(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(
            op_seminorm(&scale, &NormKind::oscillation(2).unwrap(), &plan),
            Err(Error::KernelIncompatible)
        );
    }

    #[test]
    fn one_dimensional_oscillation_is_zero() {
        let id = MinMaxAffineOp::identity(1).unwrap();
        let plan = SamplePlan::default();
        let nm = op_seminorm(&id, &NormKind::oscillation(1).unwrap(), &plan).unwrap();
        assert_eq!(nm.value, 0.0);
        assert!(nm.exact);
        assert!(certify_contraction(&id, &NormKind::oscillation(1).unwrap(), 0.5, 2, &plan)
            .unwrap()
            .holds());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let h = example_derivative();
        let osc = NormKind::oscillation(3).unwrap();
        let seq = SamplePlan {
            execution: Execution::Sequential,
            ..SamplePlan::default()
        };
        let par = SamplePlan {
            execution: Execution::Parallel,
            ..SamplePlan::default()
        };
        assert_eq!(
            bonsall_estimate(&h, 3, &osc, &seq).unwrap(),
            bonsall_estimate(&h, 3, &osc, &par).unwrap()
        );
    }
}
