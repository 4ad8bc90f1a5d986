//! Shapley operators of coin-toss zero-sum games on weighted digraphs.
//!
//! At each turn a fair coin decides whether Max or Min moves the token
//! along an arc `(i, j)`; Max then receives `A_ij`. The `k`-turn value is
//! `v(k) = F(v(k−1))`, `v(0) = 0`, with
//! `F_i(x) = ½ (max_j (A_ij + x_j) + min_j (A_ij + x_j))` over successors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone_metrics::{slice, ConeVector, Normalizer};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::semidiff::{self, ActiveSets, Expr, MinMaxAffineOp};
use crate::spectral::{self, Certificate, NormKind, SamplePlan, SpectralEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub payoff: f64,
}

/// A finite digraph with payoffs on the arcs; every node has a successor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct GameGraph {
    n: usize,
    arcs: Vec<Arc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRepr {
    n: usize,
    arcs: Vec<Arc>,
}

impl TryFrom<GraphRepr> for GameGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        GameGraph::new(r.n, r.arcs)
    }
}

impl From<GameGraph> for GraphRepr {
    fn from(g: GameGraph) -> Self {
        GraphRepr { n: g.n, arcs: g.arcs }
    }
}

impl GameGraph {
    pub fn new(n: usize, arcs: Vec<Arc>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGame("graph has no nodes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &arcs {
            if a.from >= n || a.to >= n {
                return Err(Error::InvalidGame(format!(
                    "arc ({}, {}) references a node outside 0..{n}",
                    a.from, a.to
                )));
            }
            if !a.payoff.is_finite() {
                return Err(Error::InvalidGame(format!(
                    "arc ({}, {}) has a non-finite payoff",
                    a.from, a.to
                )));
            }
            if !seen.insert((a.from, a.to)) {
                return Err(Error::InvalidGame(format!(
                    "duplicate arc ({}, {})",
                    a.from, a.to
                )));
            }
        }
        if let Some(i) = (0..n).find(|&i| arcs.iter().all(|a| a.from != i)) {
            return Err(Error::InvalidGame(format!("node {i} has no successor")));
        }
        Ok(Self { n, arcs })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidGame(e.to_string()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Successors of `i` with their payoffs, in arc order.
    pub fn successors(&self, i: usize) -> Vec<(usize, f64)> {
        self.arcs
            .iter()
            .filter(|a| a.from == i)
            .map(|a| (a.to, a.payoff))
            .collect()
    }

    pub fn is_strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for a in &self.arcs {
                    let (s, t) = if forward { (a.from, a.to) } else { (a.to, a.from) };
                    if s == i && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
            seen.into_iter().all(|b| b)
        };
        reach(true) && reach(false)
    }

    /// The 3-node game whose Shapley operator is
    /// `F_1 = ½(max(3+x_1, 4+x_2, x_3) + min(…))`,
    /// `F_2 = ½(max(x_1, 3+x_2, −7+x_3) + min(…))`,
    /// `F_3 = ½(max(3+x_1, 2+x_2) + min(…))`.
    pub fn three_node_example() -> Self {
        let arc = |from, to, payoff| Arc { from, to, payoff };
        GameGraph::new(
            3,
            vec![
                arc(0, 0, 3.0),
                arc(0, 1, 4.0),
                arc(0, 2, 0.0),
                arc(1, 0, 0.0),
                arc(1, 1, 3.0),
                arc(1, 2, -7.0),
                arc(2, 0, 3.0),
                arc(2, 1, 2.0),
            ],
        )
        .expect("bundled example is valid")
    }
}

/// `F_i(x) = ½(max_j (A_ij + x_j) + min_j (A_ij + x_j))`. Each coordinate
/// is a sum node whose children are the max node and the min node, with
/// children in the order of [`GameGraph::successors`].
pub fn shapley_operator(g: &GameGraph) -> MinMaxAffineOp {
    let n = g.n();
    let coordinates = (0..n)
        .map(|i| {
            let terms: Vec<Expr> = g
                .successors(i)
                .into_iter()
                .map(|(j, a)| {
                    let mut p = vec![0.0; n];
                    p[j] = 1.0;
                    Expr::leaf(p, a)
                })
                .collect();
            Expr::Sum {
                weights: vec![0.5, 0.5],
                children: vec![Expr::Max(terms.clone()), Expr::Min(terms)],
            }
        })
        .collect();
    MinMaxAffineOp::new(n, coordinates).expect("validated graph yields a valid operator")
}

/// Optimal successor sets `E⁺_i` (Max) and `E⁻_i` (Min), as node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySets {
    pub max: Vec<Vec<usize>>,
    pub min: Vec<Vec<usize>>,
}

/// Maps the active sets of a Shapley operator back to node ids.
pub fn strategy_sets(g: &GameGraph, sets: &ActiveSets) -> StrategySets {
    let pick = |i: usize, child: usize| -> Vec<usize> {
        let succ = g.successors(i);
        sets.node(i, &[child])
            .map(|node| node.active.iter().map(|&k| succ[k].0).collect())
            .unwrap_or_default()
    };
    StrategySets {
        max: (0..g.n()).map(|i| pick(i, 0)).collect(),
        min: (0..g.n()).map(|i| pick(i, 1)).collect(),
    }
}

/// Randomized check that `F` is order preserving and additively homogeneous.
pub fn check_monotone_additive(f: &MinMaxAffineOp, trials: usize, seed: u64) -> Result<()> {
    let n = f.input_dim();
    if f.output_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.output_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(0.0..3.0)).collect();
        let t: f64 = rng.gen_range(-5.0..5.0);
        let (fx, fy) = (f.apply_unchecked(&x), f.apply_unchecked(&y));
        if fx.iter().zip(&fy).any(|(a, b)| *a > b + 1e-12 * (1.0 + a.abs())) {
            return Err(Error::NotOrderPreserving);
        }
        let shifted: Vec<f64> = x.iter().map(|v| v + t).collect();
        let fs = f.apply_unchecked(&shifted);
        if fs
            .iter()
            .zip(&fx)
            .any(|(a, b)| (a - (b + t)).abs() > 1e-9 * (1.0 + a.abs()))
        {
            return Err(Error::NotAdditivelyHomogeneous);
        }
    }
    Ok(())
}

/// `(x0, F(x0), …, F^k(x0))`.
pub fn value_iteration(f: &MinMaxAffineOp, x0: &ConeVector, k: usize) -> Result<Vec<ConeVector>> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(x0.clone());
    let mut x = f.apply(x0.as_slice())?;
    for _ in 0..k {
        let next = f.apply_unchecked(&x);
        out.push(ConeVector::new(std::mem::replace(&mut x, next)).map_err(|e| Error::Evaluation(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPayoff {
    /// `(F^k(0) − F^{k−p}(0)) / p` over the detected period `p`; falls back
    /// to `cesaro` when no period is detected.
    pub chi: Vec<f64>,
    /// `(F^k(0) − F^{k−L}(0)) / L`, with `L ≈ k/2` a multiple of `period`.
    pub cesaro: Vec<f64>,
    /// `F^k(0) / k`; carries an `O(1/k)` bias from the bias vector.
    pub average: Vec<f64>,
    pub k_max: usize,
    /// Eventual period of `F^k(0) − kχ`, if detected.
    pub period: Option<usize>,
    /// Whether the `p`-step increments over the last `p` steps agree to `tol`.
    pub converged: bool,
}

/// Smallest `p ≤ k/4` such that the `p`-step increments ending at each of the
/// last `p` steps agree to `tol·p`.
fn detect_period(traj: &[Vec<f64>], tol: f64) -> Option<usize> {
    let k = traj.len() - 1;
    let incr = |hi: usize, p: usize| slice::sub(&traj[hi], &traj[hi - p]);
    (1..=k / 4).find(|&p| {
        let last = incr(k, p);
        (1..p.max(2)).all(|j| slice::sup_norm(&slice::sub(&incr(k - j, p), &last)) <= tol * p as f64)
    })
}

/// Mean payoff `χ(F) = lim F^k(0)/k`, estimated from value iteration.
///
/// `F^k(0) − kχ` approaches a periodic orbit, typically geometrically. The
/// increment over one period then has error `O(ρ^k)`, against `O(ρ^{k/2}/k)`
/// for the half-horizon Cesàro increment and `O(1/k)` for the average.
pub fn mean_payoff(f: &MinMaxAffineOp, k_max: usize, tol: f64) -> Result<MeanPayoff> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let mut traj = Vec::with_capacity(k_max + 1);
    traj.push(vec![0.0; f.input_dim()]);
    for k in 0..k_max {
        let next = f.apply(&traj[k])?;
        traj.push(next);
    }
    let incr = |steps: usize| -> Vec<f64> {
        slice::sub(&traj[k_max], &traj[k_max - steps])
            .into_iter()
            .map(|v| v / steps as f64)
            .collect()
    };
    let period = detect_period(&traj, tol);
    let p = period.unwrap_or(1);
    let half = k_max - k_max / 2;
    let cesaro = incr(p * (half / p).max(1));
    Ok(MeanPayoff {
        chi: if period.is_some() { incr(p) } else { cesaro.clone() },
        cesaro,
        average: traj[k_max].iter().map(|v| v / k_max as f64).collect(),
        k_max,
        period,
        converged: period.is_some(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Krasnoselskii damping in `(0, 1]`.
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// An additive eigenpair `F(u) = u + μe` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub converged: bool,
    /// Bias vector, normalized to `ψ(u) = 0`.
    pub u: ConeVector,
    pub mu: f64,
    /// `ω(F(u) − u − μe)`.
    pub residual: f64,
    pub iterations: usize,
    pub psi: Normalizer,
    /// Active sets of `F` at `u`.
    pub active_sets: ActiveSets,
    pub uniqueness: Option<Certificate>,
    /// Set when the certificate holds: the bias is unique up to `ℝe`.
    pub bias_unique: Option<bool>,
    /// Exact Bonsall upper bound of `F'_u` in `ω`, when available.
    pub rate_bound: Option<f64>,
    pub spectral: Option<SpectralEstimate>,
}

/// Damped iteration `x ← (1−θ)x + θ(F(x) − ψ(F(x))e)` from `x = 0`.
///
/// Non-convergence within `max_iter` is reported through `converged`
/// rather than as an error.
pub fn solve_additive_eigenpair(f: &MinMaxAffineOp, psi: &Normalizer, opts: &EigenOptions) -> Result<EigenReport> {
    let n = f.input_dim();
    if psi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: psi.len(),
        });
    }
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {}", opts.theta)));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    check_monotone_additive(f, 200, spectral::DEFAULT_SEED)?;
    let mut x = vec![0.0; n];
    let mut fx = f.apply(&x)?;
    let mut residual = slice::oscillation(&slice::sub(&fx, &x));
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        let shift = psi.apply(&fx);
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi = (1.0 - opts.theta) * *xi + opts.theta * (fi - shift);
        }
        fx = f.apply_unchecked(&x);
        residual = slice::oscillation(&slice::sub(&fx, &x));
        iterations += 1;
    }
    if residual <= opts.tol {
        x = refine(f, psi, opts.theta, x, residual, iterations);
    }
    let u = psi.center(&x);
    let fu = f.apply_unchecked(&u);
    let mu = psi.apply(&fu) - psi.apply(&u);
    let residual = slice::oscillation(&slice::sub(&fu, &u));
    let u = ConeVector::new(u).map_err(|e| Error::Evaluation(e.to_string()))?;
    let (_, active_sets) = semidiff::semidifferential(f, &u)?;
    Ok(EigenReport {
        converged: residual <= opts.tol,
        u,
        mu,
        residual,
        iterations,
        psi: psi.clone(),
        active_sets,
        uniqueness: None,
        bias_unique: None,
        rate_bound: None,
        spectral: None,
    })
}

/// Continues the damped iteration past `tol` so that `u` is accurate to
/// working precision, which root-rate measurements at depth rely on. Stops
/// after 10 steps without improvement or `budget + 100` steps; keeps the best
/// iterate.
fn refine(f: &MinMaxAffineOp, psi: &Normalizer, theta: f64, mut x: Vec<f64>, mut best: f64, budget: usize) -> Vec<f64> {
    let floor = 4.0 * f64::EPSILON * (1.0 + slice::sup_norm(&x));
    let mut best_x = x.clone();
    let mut stale = 0;
    for _ in 0..budget + 100 {
        if best <= floor || stale >= 10 {
            break;
        }
        let fx = f.apply_unchecked(&x);
        let shift = psi.apply(&fx);
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi = (1.0 - theta) * *xi + theta * (fi - shift);
        }
        let r = slice::oscillation(&slice::sub(&f.apply_unchecked(&x), &x));
        if r < best {
            best = r;
            best_x.clone_from(&x);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    best_x
}

/// Target used to certify `r̂(F'_u) < 1`. Kept away from 1 so that rounding
/// in the LP can never turn an isometry into a contraction.
pub const UNIQUENESS_TARGET: f64 = 1.0 - 1e-6;

/// Certifies that the bias is unique up to additive constants by showing
/// that `F'_u` contracts the oscillation seminorm.
pub fn certify_bias_uniqueness(
    f: &MinMaxAffineOp,
    report: &EigenReport,
    depth: usize,
    plan: &SamplePlan,
) -> Result<EigenReport> {
    if !report.converged {
        return Err(Error::InvalidParameter(
            "uniqueness needs a converged eigenpair".into(),
        ));
    }
    let (derivative, _) = semidiff::semidifferential(f, &report.u)?;
    let norm = NormKind::oscillation(f.input_dim())?;
    let (estimate, certificate) =
        spectral::estimate_and_certify(&derivative, &norm, UNIQUENESS_TARGET, depth, plan)?;
    let mut out = report.clone();
    out.bias_unique = certificate.holds().then_some(true);
    out.rate_bound = estimate.exact.then_some(estimate.upper);
    out.uniqueness = Some(certificate);
    out.spectral = Some(estimate);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRate {
    pub x0: Vec<f64>,
    /// `ω(x0 − u)`.
    pub initial_error: f64,
    /// `ω(F^k(x0) − u)`.
    pub final_error: f64,
    /// `(final_error / initial_error)^{1/k}`.
    pub root_rate: f64,
    /// `λ = ψ(F^k(x0) − u)`.
    pub drift: f64,
    /// `‖F^k(x0) − λe − u‖_∞`.
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub depth: usize,
    pub seed: u64,
    pub rate_bound: Option<f64>,
    pub slack: f64,
    pub max_root_rate: f64,
    /// `max_root_rate ≤ rate_bound + slack`, when a bound is available.
    pub within_bound: Option<bool>,
    pub starts: Vec<StartRate>,
}

/// Default allowance above the asymptotic rate for transients at finite depth.
pub const RATE_SLACK: f64 = 0.05;

/// Empirical geometric rates of `F^k(x0) → u + λe` from seeded random
/// starts with `ω(x0 − u)` log-uniform in `[0.1, 10]`.
pub fn convergence_report(
    f: &MinMaxAffineOp,
    report: &EigenReport,
    starts: usize,
    depth: usize,
    seed: u64,
    exec: Execution,
) -> Result<ConvergenceReport> {
    if depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    let u = report.u.as_slice().to_vec();
    let n = u.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0s: Vec<Vec<f64>> = (0..starts)
        .map(|_| {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let size = slice::oscillation(&d);
            let target = 10f64.powf(rng.gen_range(-1.0..1.0));
            let scale = if size > 0.0 { target / size } else { 0.0 };
            u.iter().zip(&d).map(|(a, b)| a + scale * b).collect()
        })
        .collect();
    let rates = par::map(exec, &x0s, |x0| {
        let initial_error = slice::oscillation(&slice::sub(x0, &u));
        let mut x = x0.clone();
        for _ in 0..depth {
            x = f.apply_unchecked(&x);
        }
        let diff = slice::sub(&x, &u);
        let final_error = slice::oscillation(&diff);
        let drift = report.psi.apply(&diff);
        let sup_error = slice::sup_norm(&diff.iter().map(|v| v - drift).collect::<Vec<_>>());
        let root_rate = if initial_error > 0.0 && final_error > 0.0 {
            (final_error / initial_error).powf(1.0 / depth as f64)
        } else {
            0.0
        };
        StartRate {
            x0: x0.clone(),
            initial_error,
            final_error,
            root_rate,
            drift,
            sup_error,
        }
    });
    let max_root_rate = rates.iter().map(|r| r.root_rate).fold(0.0, f64::max);
    let within_bound = report
        .rate_bound
        .filter(|b| *b < 1.0)
        .map(|b| max_root_rate <= b + RATE_SLACK);
    Ok(ConvergenceReport {
        depth,
        seed,
        rate_bound: report.rate_bound,
        slack: RATE_SLACK,
        max_root_rate,
        within_bound,
        starts: rates,
    })
}
