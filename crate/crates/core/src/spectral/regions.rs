//! Enumeration of the linearity regions of a min/max/sum tree inside a ball.
//!
//! Nodes are visited in postorder. At each max (min) node every distinct
//! child is tried as the winner, which adds the cone constraints
//! `winner − sibling ≥ 0` (`≤ 0`); branches whose constraint set has an
//! empty interior are pruned with a slack LP. Each surviving leaf of the
//! search is a polyhedral cone on which the operator is affine.
//!
//! For homogeneous operators every constraint is linear and regions are
//! cones, tracked by their generators so that pruning needs no LP. Affine
//! forms fall back to a slack LP over the ball.

use crate::error::Result;
use crate::semidiff::{Expr, MinMaxAffineOp};

use super::cone::Cone;
use super::lp::{self, Ball};

const INTERIOR_EPS: f64 = 1e-9;
const SAME_FORM_TOL: f64 = 1e-10;

enum Node {
    Leaf(Vec<f64>),
    Choice { max: bool, children: Vec<usize> },
    Sum { weights: Vec<f64>, children: Vec<usize> },
}

fn flatten(e: &Expr, nodes: &mut Vec<Node>) -> usize {
    let node = match e {
        Expr::Affine(t) => {
            let mut form = t.weights.clone();
            form.push(t.offset);
            Node::Leaf(form)
        }
        Expr::Max(c) | Expr::Min(c) => Node::Choice {
            max: matches!(e, Expr::Max(_)),
            children: c.iter().map(|ch| flatten(ch, nodes)).collect(),
        },
        Expr::Sum { weights, children } => Node::Sum {
            weights: weights.clone(),
            children: children.iter().map(|ch| flatten(ch, nodes)).collect(),
        },
    };
    nodes.push(node);
    nodes.len() - 1
}

/// A polyhedral piece: constraint forms and the affine map on the piece.
#[derive(Debug, Clone)]
pub(crate) struct Region {
    pub constraints: Vec<Vec<f64>>,
    /// One affine form per output coordinate.
    pub maps: Vec<Vec<f64>>,
}

struct Search<'a> {
    ball: &'a Ball,
    nodes: Vec<Node>,
    roots: Vec<usize>,
    forms: Vec<Vec<f64>>,
    constraints: Vec<Vec<f64>>,
    pruner: Pruner,
    /// Pruning work spent: LPs, or cone cuts.
    work: usize,
    budget: usize,
    regions: Vec<Region>,
}

#[derive(Clone)]
enum Pruner {
    /// A point of the current region with every constraint above `INTERIOR_EPS`.
    Lp { interior: Vec<f64> },
    Cone(Cone),
}

/// A choice node with more than one candidate winner, on the DFS stack.
struct Frame {
    pos: usize,
    max: bool,
    candidates: Vec<usize>,
    next: usize,
    depth: usize,
    pruner: Pruner,
}

enum Branch {
    Taken,
    Exhausted,
    OutOfBudget,
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= SAME_FORM_TOL)
}

fn opposite(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x + y).abs() <= SAME_FORM_TOL)
}

impl Search<'_> {
    /// Depth-first over choice nodes with an explicit stack; returns false
    /// once the LP budget is exhausted.
    fn run(&mut self) -> Result<bool> {
        let mut stack: Vec<Frame> = Vec::new();
        let mut pos = 0;
        loop {
            while pos < self.nodes.len() {
                match &self.nodes[pos] {
                    Node::Leaf(form) => self.forms[pos] = form.clone(),
                    Node::Sum { weights, children } => {
                        let mut acc = vec![0.0; self.ball.n + 1];
                        for (w, &c) in weights.iter().zip(children) {
                            for (a, b) in acc.iter_mut().zip(&self.forms[c]) {
                                *a += w * b;
                            }
                        }
                        self.forms[pos] = acc;
                    }
                    Node::Choice { max, children } => {
                        let candidates = self.distinct(children);
                        if candidates.len() > 1 {
                            stack.push(Frame {
                                pos,
                                max: *max,
                                candidates,
                                next: 0,
                                depth: self.constraints.len(),
                                pruner: self.pruner.clone(),
                            });
                            break;
                        }
                        self.forms[pos] = self.forms[candidates[0]].clone();
                    }
                }
                pos += 1;
            }
            if pos == self.nodes.len() {
                self.regions.push(Region {
                    constraints: self.constraints.clone(),
                    maps: self.roots.iter().map(|&r| self.forms[r].clone()).collect(),
                });
            }
            loop {
                let Some(frame) = stack.last_mut() else {
                    return Ok(true);
                };
                self.constraints.truncate(frame.depth);
                self.pruner.clone_from(&frame.pruner);
                match self.take_branch(frame)? {
                    Branch::Taken => {
                        pos = frame.pos + 1;
                        break;
                    }
                    Branch::Exhausted => {
                        stack.pop();
                    }
                    Branch::OutOfBudget => return Ok(false),
                }
            }
        }
    }

    /// Children whose forms differ on the ball's affine hull, first of each
    /// class kept.
    fn distinct(&self, children: &[usize]) -> Vec<usize> {
        let mut candidates: Vec<usize> = Vec::new();
        for &c in children {
            let fresh = candidates.iter().all(|&k| {
                let diff: Vec<f64> = self.forms[c].iter().zip(&self.forms[k]).map(|(a, b)| a - b).collect();
                self.ball.normalize(&diff).is_some()
            });
            if fresh {
                candidates.push(c);
            }
        }
        candidates
    }

    /// Commits to the next candidate of `frame` whose winning cone meets the
    /// current region's interior.
    fn take_branch(&mut self, frame: &mut Frame) -> Result<Branch> {
        let sign = if frame.max { 1.0 } else { -1.0 };
        while frame.next < frame.candidates.len() {
            let c = frame.candidates[frame.next];
            frame.next += 1;
            let required: Vec<Vec<f64>> = frame
                .candidates
                .iter()
                .filter(|&&k| k != c)
                .filter_map(|&k| {
                    let diff: Vec<f64> = self.forms[c]
                        .iter()
                        .zip(&self.forms[k])
                        .map(|(a, b)| sign * (a - b))
                        .collect();
                    self.ball.normalize(&diff)
                })
                .collect();
            if required
                .iter()
                .any(|r| self.constraints.iter().any(|g| opposite(g, r)))
            {
                continue;
            }
            let fresh: Vec<Vec<f64>> = required
                .into_iter()
                .filter(|r| !self.constraints.iter().any(|g| same(g, r)))
                .collect();
            self.work += 1;
            if self.work > self.budget {
                return Ok(Branch::OutOfBudget);
            }
            let n = self.ball.n;
            let feasible = match &mut self.pruner {
                Pruner::Cone(cone) => {
                    let mut next = cone.clone();
                    let ok = fresh.iter().all(|r| next.cut(&r[..n]));
                    if ok {
                        *cone = next;
                    }
                    ok
                }
                Pruner::Lp { interior } => {
                    let margin = fresh
                        .iter()
                        .map(|r| lp::eval_form(r, interior))
                        .fold(f64::INFINITY, f64::min);
                    if margin > INTERIOR_EPS {
                        true
                    } else {
                        let mut all = self.constraints.clone();
                        all.extend(fresh.iter().cloned());
                        let (slack, point) = lp::max_slack(self.ball, &all)?;
                        *interior = point;
                        slack > INTERIOR_EPS
                    }
                }
            };
            if !feasible {
                continue;
            }
            self.constraints.extend(fresh);
            self.forms[frame.pos] = self.forms[c].clone();
            return Ok(Branch::Taken);
        }
        Ok(Branch::Exhausted)
    }
}

/// All linearity regions of `op` that meet the interior of `ball`, or `None`
/// when more than `budget` pruning LPs would be needed.
pub(crate) fn enumerate(op: &MinMaxAffineOp, ball: &Ball, budget: usize) -> Result<Option<Vec<Region>>> {
    let pruner = if op.is_homogeneous() {
        let free: Vec<bool> = (0..ball.n).map(|i| ball.pinned != Some(i)).collect();
        Pruner::Cone(Cone::full(&free))
    } else {
        Pruner::Lp {
            interior: ball.generic_point(),
        }
    };
    enumerate_with(op, ball, budget, pruner)
}

fn enumerate_with(op: &MinMaxAffineOp, ball: &Ball, budget: usize, pruner: Pruner) -> Result<Option<Vec<Region>>> {
    let mut nodes = Vec::new();
    let roots = op.coordinates().iter().map(|c| flatten(c, &mut nodes)).collect();
    let count = nodes.len();
    let mut search = Search {
        ball,
        nodes,
        roots,
        forms: vec![Vec::new(); count],
        constraints: Vec::new(),
        pruner,
        work: 0,
        budget,
        regions: Vec::new(),
    };
    if search.run()? {
        Ok(Some(search.regions))
    } else {
        Ok(None)
    }
}
