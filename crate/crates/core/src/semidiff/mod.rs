//! Piecewise-affine operators and their semidifferentials.
//!
//! For a finite max of affine terms the semidifferential at `v` is the max of
//! the linear parts of the terms attaining the maximum at `v`; min nodes are
//! symmetric and nonnegative sums are linear. Applying this node by node
//! gives `f'_v` as another tree, with `f(v + t x) = f(v) + t f'_v(x)` for
//! `0 ≤ t ≤ t*`.

mod expr;

use serde::{Deserialize, Serialize};

use crate::cone_metrics::ConeVector;
use crate::error::{Error, Result};

pub use expr::{AffineTerm, Expr, MinMaxAffineOp, NodeOp};

/// Default relative activity tolerance: a child is active when it is within
/// `ACTIVE_REL_TOL · (1 + |node value|)` of the node value.
pub const ACTIVE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Max,
    Min,
}

/// Children attaining a max or min node at the anchor point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveNode {
    /// Child indices from the coordinate root down to this node.
    pub path: Vec<usize>,
    pub kind: Extremum,
    pub active: Vec<usize>,
}

/// Active sets of every max/min node, per output coordinate, in preorder.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActiveSets {
    pub coordinates: Vec<Vec<ActiveNode>>,
}

impl ActiveSets {
    pub fn node(&self, coordinate: usize, path: &[usize]) -> Option<&ActiveNode> {
        self.coordinates
            .get(coordinate)?
            .iter()
            .find(|n| n.path == path)
    }
}

fn is_active(value: f64, node_value: f64, rel_tol: f64) -> bool {
    (value - node_value).abs() <= rel_tol * (1.0 + node_value.abs())
}

fn derive(
    e: &Expr,
    v: &[f64],
    rel_tol: f64,
    path: &mut Vec<usize>,
    out: &mut Vec<ActiveNode>,
) -> (f64, Expr) {
    match e {
        Expr::Affine(t) => (t.eval(v), Expr::Affine(t.linear_part())),
        Expr::Sum { weights, children } => {
            let mut value = 0.0;
            let mut derived = Vec::with_capacity(children.len());
            for (i, (w, c)) in weights.iter().zip(children).enumerate() {
                path.push(i);
                let (cv, cd) = derive(c, v, rel_tol, path, out);
                path.pop();
                value += w * cv;
                derived.push(cd);
            }
            (
                value,
                Expr::Sum {
                    weights: weights.clone(),
                    children: derived,
                },
            )
        }
        Expr::Max(children) | Expr::Min(children) => {
            let kind = if matches!(e, Expr::Max(_)) {
                Extremum::Max
            } else {
                Extremum::Min
            };
            let slot = out.len();
            out.push(ActiveNode {
                path: path.clone(),
                kind,
                active: Vec::new(),
            });
            let mut results = Vec::with_capacity(children.len());
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                results.push(derive(c, v, rel_tol, path, out));
                path.pop();
            }
            let value = match kind {
                Extremum::Max => results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max),
                Extremum::Min => results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
            };
            let mut active = Vec::new();
            let mut kept = Vec::new();
            for (i, (cv, cd)) in results.into_iter().enumerate() {
                if is_active(cv, value, rel_tol) {
                    active.push(i);
                    kept.push(cd);
                }
            }
            out[slot].active = active;
            let derived = if kept.len() == 1 {
                kept.pop().unwrap()
            } else if kind == Extremum::Max {
                Expr::Max(kept)
            } else {
                Expr::Min(kept)
            };
            (value, derived)
        }
    }
}

/// Symbolic semidifferential `f'_v` with the default activity tolerance.
pub fn semidifferential(f: &MinMaxAffineOp, v: &ConeVector) -> Result<(MinMaxAffineOp, ActiveSets)> {
    semidifferential_with(f, v, ACTIVE_REL_TOL)
}

/// Symbolic semidifferential `f'_v`: prune every max/min node to the
/// children within `rel_tol · (1 + |value|)` of the node value at `v`, and
/// replace the surviving affine leaves by their linear parts.
pub fn semidifferential_with(
    f: &MinMaxAffineOp,
    v: &ConeVector,
    rel_tol: f64,
) -> Result<(MinMaxAffineOp, ActiveSets)> {
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(Error::InvalidParameter("activity tolerance must be positive".into()));
    }
    check_dim(f, v.as_slice())?;
    let mut sets = ActiveSets::default();
    let mut coordinates = Vec::with_capacity(f.output_dim());
    for c in f.coordinates() {
        let mut nodes = Vec::new();
        let (_, d) = derive(c, v.as_slice(), rel_tol, &mut Vec::new(), &mut nodes);
        coordinates.push(d);
        sets.coordinates.push(nodes);
    }
    Ok((MinMaxAffineOp::new(f.input_dim(), coordinates)?, sets))
}

fn check_dim(f: &MinMaxAffineOp, x: &[f64]) -> Result<()> {
    if x.len() != f.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: f.input_dim(),
            found: x.len(),
        });
    }
    Ok(())
}

pub fn evaluate(f: &MinMaxAffineOp, x: &ConeVector) -> Result<ConeVector> {
    ConeVector::new(f.apply(x.as_slice())?).map_err(|e| Error::Evaluation(e.to_string()))
}

// (value at v, rate along x, breakpoint radius of the subtree)
fn expansion(e: &Expr, v: &[f64], x: &[f64], rel_tol: f64) -> (f64, f64, f64) {
    match e {
        Expr::Affine(t) => (t.eval(v), t.linear_part().eval(x), f64::INFINITY),
        Expr::Sum { weights, children } => {
            let mut acc = (0.0, 0.0, f64::INFINITY);
            for (w, c) in weights.iter().zip(children) {
                let (cv, cr, ct) = expansion(c, v, x, rel_tol);
                acc = (acc.0 + w * cv, acc.1 + w * cr, acc.2.min(ct));
            }
            acc
        }
        Expr::Max(children) | Expr::Min(children) => {
            // Work with the max form: min(a, b) = −max(−a, −b).
            let sign = if matches!(e, Expr::Max(_)) { 1.0 } else { -1.0 };
            let parts: Vec<_> = children
                .iter()
                .map(|c| expansion(c, v, x, rel_tol))
                .map(|(cv, cr, ct)| (sign * cv, sign * cr, ct))
                .collect();
            let value = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let rate = parts
                .iter()
                .filter(|p| is_active(p.0, value, rel_tol))
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut radius = parts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
            for p in parts.iter().filter(|p| !is_active(p.0, value, rel_tol)) {
                let gap = value - p.0;
                let catch_up = p.1 - rate;
                if catch_up > 0.0 {
                    radius = radius.min(gap / catch_up);
                }
            }
            (sign * value, sign * rate, radius)
        }
    }
}

/// The largest `t*` (possibly infinite) such that no inactive child of any
/// node overtakes the active ones along `v + t x` for `t < t*`. On `[0, t*]`
/// the expansion `f(v + t x) = f(v) + t f'_v(x)` is exact.
pub fn breakpoint_radius(f: &MinMaxAffineOp, v: &[f64], x: &[f64], rel_tol: f64) -> Result<f64> {
    check_dim(f, v)?;
    check_dim(f, x)?;
    Ok(f
        .coordinates()
        .iter()
        .map(|c| expansion(c, v, x, rel_tol).2)
        .fold(f64::INFINITY, f64::min))
}

/// Chain rule for homogeneous pieces: `(g ∘ f)'_v = g'_{f(v)} ∘ f'_v`.
pub fn compose_semidiff(g_prime: &MinMaxAffineOp, f_prime: &MinMaxAffineOp) -> Result<MinMaxAffineOp> {
    if !g_prime.is_homogeneous() || !f_prime.is_homogeneous() {
        return Err(Error::NotHomogeneous);
    }
    g_prime.compose(f_prime)
}

/// Default step schedule of the finite-difference oracle.
pub const FD_SCHEDULE: [f64; 3] = [1e-3, 1e-5, 1e-7];

/// Relative agreement required between the last two quotients.
pub const FD_STABLE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FdQuotient {
    /// `(f(v + t x) − f(v)) / t` at the smallest `t` of the schedule.
    pub quotient: Vec<f64>,
    pub t: f64,
    /// Whether the last two quotients agree to [`FD_STABLE_RTOL`].
    pub stabilized: bool,
}

/// One-sided difference quotients of a black-box map, for validation only.
pub fn directional_derivative_fd<F>(f: F, v: &[f64], x: &[f64], schedule: &[f64]) -> Result<FdQuotient>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if schedule.is_empty()
        || schedule.iter().any(|t| t.is_nan() || *t <= 0.0)
        || schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidParameter(
            "step schedule must be positive and strictly decreasing".into(),
        ));
    }
    if v.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: x.len(),
        });
    }
    let base = f(v)?;
    let mut quotients: Vec<Vec<f64>> = Vec::with_capacity(schedule.len());
    for &t in schedule {
        let moved: Vec<f64> = v.iter().zip(x).map(|(a, b)| a + t * b).collect();
        let fx = f(&moved).map_err(|e| Error::Evaluation(format!("at step {t}: {e}")))?;
        quotients.push(fx.iter().zip(&base).map(|(a, b)| (a - b) / t).collect());
    }
    let stabilized = match quotients.as_slice() {
        [.., prev, last] => prev.iter().zip(last).all(|(a, b)| {
            (a - b).abs() <= FD_STABLE_RTOL * 1f64.max(a.abs()).max(b.abs())
        }),
        _ => true,
    };
    Ok(FdQuotient {
        quotient: quotients.pop().unwrap(),
        t: *schedule.last().unwrap(),
        stabilized,
    })
}
