//! Small dense linear programs over a norm ball, backed by `microlp`.
//!
//! Affine forms are stored as `n + 1` numbers: the weights followed by the
//! constant, read as `g·x + c`. A constraint form means `g·x + c ≥ 0`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

use super::NormKind;

/// Unit ball of a norm kind, as variable bounds plus pairwise constraints.
#[derive(Debug, Clone)]
pub(crate) struct Ball {
    pub n: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Rows `a` with `a·x ≤ 1`.
    pub rows: Vec<Vec<f64>>,
    /// Coordinate pinned to zero to quotient out the seminorm kernel.
    pub pinned: Option<usize>,
}

impl Ball {
    pub fn new(norm: &NormKind, n: usize) -> Self {
        match norm {
            NormKind::SupNorm => Ball {
                n,
                lower: vec![-1.0; n],
                upper: vec![1.0; n],
                rows: Vec::new(),
                pinned: None,
            },
            NormKind::LocalNorm { u } => Ball {
                n,
                lower: u.as_slice().iter().map(|v| -v).collect(),
                upper: u.as_slice().to_vec(),
                rows: Vec::new(),
                pinned: None,
            },
            NormKind::Oscillation { u } => {
                let u = u.as_slice();
                let mut lower: Vec<f64> = u.iter().map(|v| -v).collect();
                let mut upper = u.to_vec();
                lower[0] = 0.0;
                upper[0] = 0.0;
                let mut rows = Vec::new();
                for i in 1..n {
                    for j in 1..n {
                        if i != j {
                            let mut a = vec![0.0; n];
                            a[i] = 1.0 / u[i];
                            a[j] = -1.0 / u[j];
                            rows.push(a);
                        }
                    }
                }
                Ball {
                    n,
                    lower,
                    upper,
                    rows,
                    pinned: Some(0),
                }
            }
        }
    }

    /// A fixed point of the ball away from the usual kinks, used as the first
    /// interior guess.
    pub fn generic_point(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mid = 0.5 * (self.lower[i] + self.upper[i]);
                let half = 0.5 * (self.upper[i] - self.lower[i]);
                mid + 0.5 * half * (1.7 * i as f64 + 0.3).sin()
            })
            .collect()
    }

    /// `max g·x + c` over the bounding box of the ball.
    pub fn box_bound(&self, form: &[f64]) -> f64 {
        let n = self.n;
        form[n]
            + (0..n)
                .map(|i| (form[i] * self.lower[i]).max(form[i] * self.upper[i]))
                .sum::<f64>()
    }

    /// Drops the pinned coordinate and scales to unit sup-norm; `None` when
    /// the form vanishes on the ball's affine hull.
    pub fn normalize(&self, form: &[f64]) -> Option<Vec<f64>> {
        let mut g = form.to_vec();
        if let Some(p) = self.pinned {
            g[p] = 0.0;
        }
        let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale < 1e-12 {
            return None;
        }
        g.iter_mut().for_each(|v| *v /= scale);
        Some(g)
    }
}

pub(crate) fn eval_form(form: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    form[..n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + form[n]
}

fn lp_error(e: impl std::fmt::Display) -> Error {
    Error::LinearProgram(e.to_string())
}

fn build(
    ball: &Ball,
    constraints: &[Vec<f64>],
    objective: &[f64],
    slack: bool,
) -> (Problem, Vec<microlp::Variable>, Option<microlp::Variable>) {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..ball.n)
        .map(|i| p.add_var(objective[i], (ball.lower[i], ball.upper[i])))
        .collect();
    let s = slack.then(|| p.add_var(1.0, (f64::NEG_INFINITY, 1.0)));
    for row in &ball.rows {
        let terms: Vec<_> = xs
            .iter()
            .zip(row)
            .filter(|(_, a)| **a != 0.0)
            .map(|(v, a)| (*v, *a))
            .collect();
        p.add_constraint(terms.as_slice(), ComparisonOp::Le, 1.0);
    }
    for g in constraints {
        let mut terms: Vec<_> = xs
            .iter()
            .zip(g.iter())
            .filter(|(_, a)| **a != 0.0)
            .map(|(v, a)| (*v, *a))
            .collect();
        if let Some(s) = s {
            terms.push((s, -1.0));
        }
        p.add_constraint(terms.as_slice(), ComparisonOp::Ge, -g[ball.n]);
    }
    (p, xs, s)
}

/// Largest `s ≤ 1` such that some ball point satisfies every constraint with
/// margin `s`, with the maximizing point.
pub(crate) fn max_slack(ball: &Ball, constraints: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let zero = vec![0.0; ball.n + 1];
    let (p, xs, s) = build(ball, constraints, &zero, true);
    let sol = p
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| Error::LinearProgram("solve interrupted".into()))?;
    let x = xs.iter().map(|v| sol.var_value(*v)).collect();
    Ok((sol.var_value(s.unwrap()), x))
}

/// Maximum of an affine objective over the ball intersected with the
/// constraint cone, with a maximizer.
pub(crate) fn maximize(ball: &Ball, constraints: &[Vec<f64>], objective: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (p, xs, _) = build(ball, constraints, objective, false);
    let sol = p
        .solve()
        .map_err(lp_error)?
        .into_solution()
        .map_err(|_| Error::LinearProgram("solve interrupted".into()))?;
    let x: Vec<f64> = xs.iter().map(|v| sol.var_value(*v)).collect();
    Ok((eval_form(objective, &x), x))
}
