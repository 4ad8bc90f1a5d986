use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `x ↦ p·x + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTerm {
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl AffineTerm {
    pub fn new(weights: Vec<f64>, offset: f64) -> Self {
        Self { weights, offset }
    }

    /// `x ↦ x_j` in dimension `n`.
    pub fn coordinate(n: usize, j: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[j] = 1.0;
        Self { weights, offset: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.offset, |acc, (p, v)| acc + p * v)
    }

    pub fn linear_part(&self) -> AffineTerm {
        AffineTerm::new(self.weights.clone(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOp {
    Max,
    Min,
    Sum,
}

/// Expression tree over affine leaves. Sum nodes carry nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExprRepr", into = "ExprRepr")]
pub enum Expr {
    Affine(AffineTerm),
    Max(Vec<Expr>),
    Min(Vec<Expr>),
    Sum { weights: Vec<f64>, children: Vec<Expr> },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExprRepr {
    Leaf {
        p: Vec<f64>,
        r: f64,
    },
    Node {
        op: NodeOp,
        children: Vec<ExprRepr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl TryFrom<ExprRepr> for Expr {
    type Error = Error;

    fn try_from(repr: ExprRepr) -> Result<Self> {
        match repr {
            ExprRepr::Leaf { p, r } => Ok(Expr::Affine(AffineTerm::new(p, r))),
            ExprRepr::Node {
                op,
                children,
                weights,
            } => {
                let children = children
                    .into_iter()
                    .map(Expr::try_from)
                    .collect::<Result<Vec<_>>>()?;
                match (op, weights) {
                    (NodeOp::Max, None) => Ok(Expr::Max(children)),
                    (NodeOp::Min, None) => Ok(Expr::Min(children)),
                    (NodeOp::Sum, Some(weights)) => Ok(Expr::Sum { weights, children }),
                    (NodeOp::Sum, None) => Err(Error::MalformedOperator(
                        "sum node requires weights".into(),
                    )),
                    (_, Some(_)) => Err(Error::MalformedOperator(
                        "weights are only allowed on sum nodes".into(),
                    )),
                }
            }
        }
    }
}

impl From<Expr> for ExprRepr {
    fn from(e: Expr) -> Self {
        let node = |op, children: Vec<Expr>, weights| ExprRepr::Node {
            op,
            children: children.into_iter().map(ExprRepr::from).collect(),
            weights,
        };
        match e {
            Expr::Affine(t) => ExprRepr::Leaf {
                p: t.weights,
                r: t.offset,
            },
            Expr::Max(c) => node(NodeOp::Max, c, None),
            Expr::Min(c) => node(NodeOp::Min, c, None),
            Expr::Sum { weights, children } => node(NodeOp::Sum, children, Some(weights)),
        }
    }
}

impl Expr {
    pub fn leaf(weights: Vec<f64>, offset: f64) -> Self {
        Expr::Affine(AffineTerm::new(weights, offset))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Affine(t) => t.eval(x),
            Expr::Max(c) => c.iter().map(|e| e.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            Expr::Min(c) => c.iter().map(|e| e.eval(x)).fold(f64::INFINITY, f64::min),
            Expr::Sum { weights, children } => weights
                .iter()
                .zip(children)
                .map(|(w, e)| w * e.eval(x))
                .sum(),
        }
    }

    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::Affine(_) => &[],
            Expr::Max(c) | Expr::Min(c) => c,
            Expr::Sum { children, .. } => children,
        }
    }

    /// Number of nodes, leaves included.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Expr::size).sum::<usize>()
    }

    /// `−self`, pushing the sign down to the leaves (max and min swap).
    pub fn negated(&self) -> Expr {
        match self {
            Expr::Affine(t) => Expr::Affine(AffineTerm::new(
                t.weights.iter().map(|w| -w).collect(),
                -t.offset,
            )),
            Expr::Max(c) => Expr::Min(c.iter().map(Expr::negated).collect()),
            Expr::Min(c) => Expr::Max(c.iter().map(Expr::negated).collect()),
            Expr::Sum { weights, children } => Expr::Sum {
                weights: weights.clone(),
                children: children.iter().map(Expr::negated).collect(),
            },
        }
    }

    pub(crate) fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a AffineTerm)) {
        match self {
            Expr::Affine(t) => f(t),
            _ => self.children().iter().for_each(|c| c.for_each_leaf(f)),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Expr::Affine(t) => {
                if t.weights.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: t.weights.len(),
                    });
                }
                if !t.offset.is_finite() || t.weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::MalformedOperator("non-finite affine term".into()));
                }
                Ok(())
            }
            Expr::Max(c) | Expr::Min(c) => {
                if c.is_empty() {
                    return Err(Error::MalformedOperator("max/min node without children".into()));
                }
                c.iter().try_for_each(|e| e.validate(dim))
            }
            Expr::Sum { weights, children } => {
                if children.is_empty() || weights.len() != children.len() {
                    return Err(Error::MalformedOperator(
                        "sum node needs one weight per child".into(),
                    ));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::MalformedOperator(
                        "sum weights must be finite and nonnegative".into(),
                    ));
                }
                children.iter().try_for_each(|e| e.validate(dim))
            }
        }
    }

    /// The same function with nested max/max, min/min and sum/sum nodes
    /// flattened, affine summands merged, and repeated max/min children
    /// dropped.
    pub fn simplified(&self, dim: usize) -> Expr {
        match self {
            Expr::Affine(_) => self.clone(),
            Expr::Max(c) | Expr::Min(c) => {
                let is_max = matches!(self, Expr::Max(_));
                let mut out: Vec<Expr> = Vec::with_capacity(c.len());
                let mut push = |e: Expr| {
                    if !out.contains(&e) {
                        out.push(e);
                    }
                };
                for e in c.iter().map(|e| e.simplified(dim)) {
                    match e {
                        Expr::Max(g) if is_max => g.into_iter().for_each(&mut push),
                        Expr::Min(g) if !is_max => g.into_iter().for_each(&mut push),
                        e => push(e),
                    }
                }
                if out.len() == 1 {
                    out.pop().unwrap()
                } else if is_max {
                    Expr::Max(out)
                } else {
                    Expr::Min(out)
                }
            }
            Expr::Sum { weights, children } => {
                let mut affine: Option<AffineTerm> = None;
                let mut ws = Vec::new();
                let mut cs = Vec::new();
                let mut add = |w: f64, e: Expr, affine: &mut Option<AffineTerm>| match e {
                    _ if w == 0.0 => {}
                    Expr::Affine(t) => {
                        let acc = affine.get_or_insert_with(|| AffineTerm::new(vec![0.0; dim], 0.0));
                        acc.weights.iter_mut().zip(&t.weights).for_each(|(a, b)| *a += w * b);
                        acc.offset += w * t.offset;
                    }
                    e => {
                        ws.push(w);
                        cs.push(e);
                    }
                };
                for (w, e) in weights.iter().zip(children) {
                    match e.simplified(dim) {
                        Expr::Sum { weights: iw, children: ic } => {
                            for (v, c) in iw.into_iter().zip(ic) {
                                add(w * v, c, &mut affine);
                            }
                        }
                        e => add(*w, e, &mut affine),
                    }
                }
                if let Some(t) = affine {
                    if t.offset != 0.0 || t.weights.iter().any(|w| *w != 0.0) || cs.is_empty() {
                        ws.push(1.0);
                        cs.push(Expr::Affine(t));
                    }
                }
                if cs.is_empty() {
                    return Expr::leaf(vec![0.0; dim], 0.0);
                }
                if cs.len() == 1 && ws[0] == 1.0 {
                    return cs.pop().unwrap();
                }
                Expr::Sum {
                    weights: ws,
                    children: cs,
                }
            }
        }
    }

    /// Replaces every leaf `p·x + r` by `r + Σ_j p_j · inner_j`.
    fn substitute(&self, inner: &[Expr], dim: usize) -> Expr {
        match self {
            Expr::Affine(t) => substitute_leaf(t, inner, dim),
            Expr::Max(c) => Expr::Max(c.iter().map(|e| e.substitute(inner, dim)).collect()),
            Expr::Min(c) => Expr::Min(c.iter().map(|e| e.substitute(inner, dim)).collect()),
            Expr::Sum { weights, children } => Expr::Sum {
                weights: weights.clone(),
                children: children.iter().map(|e| e.substitute(inner, dim)).collect(),
            },
        }
    }
}

fn substitute_leaf(t: &AffineTerm, inner: &[Expr], dim: usize) -> Expr {
    let mut weights = Vec::new();
    let mut children = Vec::new();
    for (p, e) in t.weights.iter().zip(inner) {
        if *p == 0.0 {
            continue;
        }
        weights.push(p.abs());
        children.push(if *p > 0.0 { e.clone() } else { e.negated() });
    }
    // A sum of affine leaves collapses into a single leaf.
    if children.iter().all(|c| matches!(c, Expr::Affine(_))) {
        let mut acc = AffineTerm::new(vec![0.0; dim], t.offset);
        for (w, c) in weights.iter().zip(&children) {
            if let Expr::Affine(l) = c {
                for (a, b) in acc.weights.iter_mut().zip(&l.weights) {
                    *a += w * b;
                }
                acc.offset += w * l.offset;
            }
        }
        return Expr::Affine(acc);
    }
    if t.offset != 0.0 {
        weights.push(1.0);
        children.push(Expr::leaf(vec![0.0; dim], t.offset));
    }
    if children.len() == 1 && weights[0] == 1.0 {
        return children.pop().unwrap();
    }
    Expr::Sum { weights, children }
}

/// A map ℝⁿ → ℝᵐ whose coordinates are min/max/sum trees of affine terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpRepr", into = "OpRepr")]
pub struct MinMaxAffineOp {
    input_dim: usize,
    coordinates: Vec<Expr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpRepr {
    coordinates: Vec<Expr>,
}

impl TryFrom<OpRepr> for MinMaxAffineOp {
    type Error = Error;

    fn try_from(r: OpRepr) -> Result<Self> {
        let mut dim = None;
        for c in &r.coordinates {
            c.for_each_leaf(&mut |l| {
                dim.get_or_insert(l.weights.len());
            });
        }
        let dim = dim.ok_or_else(|| Error::MalformedOperator("operator has no coordinates".into()))?;
        MinMaxAffineOp::new(dim, r.coordinates)
    }
}

impl From<MinMaxAffineOp> for OpRepr {
    fn from(op: MinMaxAffineOp) -> Self {
        OpRepr {
            coordinates: op.coordinates,
        }
    }
}

impl MinMaxAffineOp {
    pub fn new(input_dim: usize, coordinates: Vec<Expr>) -> Result<Self> {
        if input_dim == 0 || coordinates.is_empty() {
            return Err(Error::Empty);
        }
        for c in &coordinates {
            c.validate(input_dim)?;
        }
        Ok(Self {
            input_dim,
            coordinates,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n)
                .map(|j| Expr::Affine(AffineTerm::coordinate(n, j)))
                .collect(),
        )
    }

    /// The linear map `x ↦ A x` (rows of `A`).
    pub fn linear(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        Self::new(n, rows.into_iter().map(|r| Expr::leaf(r, 0.0)).collect())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn coordinates(&self) -> &[Expr] {
        &self.coordinates
    }

    pub fn size(&self) -> usize {
        self.coordinates.iter().map(Expr::size).sum()
    }

    /// Evaluation on a raw slice.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.coordinates.iter().map(|c| c.eval(x)).collect()
    }

    /// True when every leaf has zero offset, which makes the map positively
    /// homogeneous.
    pub fn is_homogeneous(&self) -> bool {
        let mut ok = true;
        for c in &self.coordinates {
            c.for_each_leaf(&mut |l| ok &= l.offset == 0.0);
        }
        ok
    }

    /// Coordinate-wise [`Expr::simplified`]; the map is unchanged up to
    /// rounding in merged weights.
    pub fn simplified(&self) -> MinMaxAffineOp {
        MinMaxAffineOp {
            input_dim: self.input_dim,
            coordinates: self.coordinates.iter().map(|c| c.simplified(self.input_dim)).collect(),
        }
    }

    /// Syntactic composition `self ∘ inner`.
    pub fn compose(&self, inner: &MinMaxAffineOp) -> Result<MinMaxAffineOp> {
        if self.input_dim != inner.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: inner.output_dim(),
            });
        }
        let coordinates = self
            .coordinates
            .iter()
            .map(|c| c.substitute(&inner.coordinates, inner.input_dim))
            .collect();
        MinMaxAffineOp::new(inner.input_dim, coordinates)
    }

    /// `self^k` by repeated syntactic composition; `k = 0` gives the identity.
    pub fn power(&self, k: usize) -> Result<MinMaxAffineOp> {
        if self.input_dim != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: self.output_dim(),
            });
        }
        let mut acc = MinMaxAffineOp::identity(self.input_dim)?;
        for _ in 0..k {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"coordinates":[
            {"op":"sum","weights":[0.5,0.5],"children":[
                {"op":"max","children":[{"p":[1,0],"r":3},{"p":[0,1],"r":4}]},
                {"op":"min","children":[{"p":[1,0],"r":3},{"p":[0,1],"r":4}]}]},
            {"p":[0,1],"r":-1}]}"#;
        let op: MinMaxAffineOp = serde_json::from_str(text).unwrap();
        assert_eq!(op.input_dim(), 2);
        assert_eq!(op.apply(&[0.0, 0.0]).unwrap(), vec![3.5, -1.0]);
        let again: MinMaxAffineOp =
            serde_json::from_str(&serde_json::to_string(&op).unwrap()).unwrap();
        assert_eq!(op, again);
    }

    #[test]
    fn simplification_preserves_values() {
        let x = |j| Expr::Affine(AffineTerm::coordinate(2, j));
        let e = Expr::Sum {
            weights: vec![0.5, 0.5, 2.0],
            children: vec![
                Expr::Max(vec![x(0), Expr::Max(vec![x(1), x(0)])]),
                Expr::Sum {
                    weights: vec![1.0, 3.0],
                    children: vec![Expr::Min(vec![x(0), x(1)]), x(1)],
                },
                Expr::leaf(vec![1.0, 0.0], 1.0),
            ],
        };
        let s = e.simplified(2);
        assert!(s.size() < e.size());
        let Expr::Sum { children, .. } = &s else { panic!("{s:?}") };
        assert_eq!(children.len(), 3);
        assert_eq!(children[0], Expr::Max(vec![x(0), x(1)]));
        for p in [[0.0, 0.0], [1.0, -2.0], [-3.0, 0.5]] {
            assert!((s.eval(&p) - e.eval(&p)).abs() <= 1e-12);
        }
        let f = MinMaxAffineOp::new(2, vec![e.clone(), Expr::Max(vec![x(1)])]).unwrap();
        assert_eq!(f.simplified().coordinates()[1], x(1));
    }

    #[test]
    fn malformed_trees_are_rejected() {
        let bad = [
            r#"{"coordinates":[{"op":"max","children":[]}]}"#,
            r#"{"coordinates":[{"op":"sum","children":[{"p":[1],"r":0}]}]}"#,
            r#"{"coordinates":[{"op":"sum","weights":[-1],"children":[{"p":[1],"r":0}]}]}"#,
            r#"{"coordinates":[{"p":[1],"r":0},{"p":[1,2],"r":0}]}"#,
            r#"{"coordinates":[]}"#,
        ];
        for text in bad {
            assert!(serde_json::from_str::<MinMaxAffineOp>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn negation_swaps_extrema() {
        let e = Expr::Max(vec![Expr::leaf(vec![1.0, 0.0], 1.0), Expr::leaf(vec![0.0, 2.0], 0.0)]);
        let x = [0.3, -0.8];
        assert_eq!(e.negated().eval(&x), -e.eval(&x));
        assert!(matches!(e.negated(), Expr::Min(_)));
    }

    #[test]
    fn composition_with_signed_weights() {
        let g = MinMaxAffineOp::new(
            2,
            vec![
                Expr::Max(vec![Expr::leaf(vec![1.0, -2.0], 0.5), Expr::leaf(vec![0.0, 1.0], 0.0)]),
                Expr::leaf(vec![-1.0, 0.0], 1.0),
            ],
        )
        .unwrap();
        let f = MinMaxAffineOp::new(
            2,
            vec![
                Expr::Min(vec![Expr::leaf(vec![1.0, 1.0], 0.0), Expr::leaf(vec![0.0, 3.0], -1.0)]),
                Expr::Max(vec![Expr::leaf(vec![2.0, 0.0], 0.0), Expr::leaf(vec![0.0, -1.0], 0.0)]),
            ],
        )
        .unwrap();
        let gf = g.compose(&f).unwrap();
        for k in 0..50 {
            let x = [(k as f64 * 0.37).sin() * 3.0, (k as f64 * 0.91).cos() * 2.0];
            let direct = g.apply(&f.apply(&x).unwrap()).unwrap();
            let composed = gf.apply(&x).unwrap();
            for (a, b) in direct.iter().zip(&composed) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_zero_is_identity() {
        let f = MinMaxAffineOp::linear(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(f.power(0).unwrap(), MinMaxAffineOp::identity(2).unwrap());
        assert_eq!(f.power(2).unwrap().apply(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }
}
