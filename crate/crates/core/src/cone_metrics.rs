//! Metrics and seminorms on the positive orthant of ℝⁿ.
//!
//! For `x` in the open orthant and `y` arbitrary,
//! `M(y/x) = max_i y_i/x_i` and `m(y/x) = min_i y_i/x_i`. Every other
//! quantity here is a closed-form reduction of these two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point of ℝⁿ, optionally required to lie in the open orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ConeVector {
    entries: Vec<f64>,
    positive: bool,
}

impl ConeVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            entries,
            positive: false,
        })
    }

    /// Builds a vector of the open orthant: every entry must be `> 0`.
    pub fn positive(entries: Vec<f64>) -> Result<Self> {
        let mut v = Self::new(entries)?;
        check_positive(&v.entries)?;
        v.positive = true;
        Ok(v)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// The unit `e = (1, …, 1)`.
    pub fn ones(n: usize) -> Result<Self> {
        Self::positive(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.entries
    }

    /// Whether the vector was constructed with the positivity constraint.
    pub fn is_constrained_positive(&self) -> bool {
        self.positive
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&v| v > 0.0)
    }
}

impl TryFrom<Vec<f64>> for ConeVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ConeVector::new(v)
    }
}

impl From<ConeVector> for Vec<f64> {
    fn from(v: ConeVector) -> Self {
        v.entries
    }
}

impl AsRef<[f64]> for ConeVector {
    fn as_ref(&self) -> &[f64] {
        &self.entries
    }
}

fn check_positive(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| v <= 0.0) {
        Some(index) => Err(Error::NonPositive {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Unchecked reductions on raw slices, used on hot paths.
pub mod slice {
    pub fn max(x: &[f64]) -> f64 {
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(x: &[f64]) -> f64 {
        x.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(x: &[f64]) -> f64 {
        x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `ω_e(x) = max x − min x`.
    pub fn oscillation(x: &[f64]) -> f64 {
        max(x) - min(x)
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    /// `max_i |x_i| / u_i`.
    pub fn local_norm(x: &[f64], u: &[f64]) -> f64 {
        x.iter().zip(u).fold(0.0, |acc, (a, b)| acc.max(a.abs() / b))
    }

    /// `max_i x_i/u_i − min_i x_i/u_i`.
    pub fn oscillation_u(x: &[f64], u: &[f64]) -> f64 {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in x.iter().zip(u) {
            let r = a / b;
            hi = hi.max(r);
            lo = lo.min(r);
        }
        hi - lo
    }
}

/// `M(y/x) = max_i y_i / x_i`, the least `b` with `y ≤ b·x`.
pub fn scale_upper(y: &ConeVector, x: &ConeVector) -> Result<f64> {
    check_dims(x.as_slice(), y.as_slice())?;
    check_positive(x.as_slice())?;
    Ok(y.as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| a / b)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `m(y/x) = min_i y_i / x_i`, the greatest `a` with `a·x ≤ y`.
pub fn scale_lower(y: &ConeVector, x: &ConeVector) -> Result<f64> {
    check_dims(x.as_slice(), y.as_slice())?;
    check_positive(x.as_slice())?;
    Ok(y.as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(a, b)| a / b)
        .fold(f64::INFINITY, f64::min))
}

/// Hilbert's projective metric `log M(y/x) − log m(y/x)`.
pub fn hilbert_metric(x: &ConeVector, y: &ConeVector) -> Result<f64> {
    check_dims(x.as_slice(), y.as_slice())?;
    check_positive(x.as_slice())?;
    check_positive(y.as_slice())?;
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
        let r = (a / b).ln();
        hi = hi.max(r);
        lo = lo.min(r);
    }
    Ok(hi - lo)
}

/// Thompson's metric `max(log M(y/x), −log m(y/x)) = max_i |log(y_i/x_i)|`.
pub fn thompson_metric(x: &ConeVector, y: &ConeVector) -> Result<f64> {
    check_dims(x.as_slice(), y.as_slice())?;
    check_positive(x.as_slice())?;
    check_positive(y.as_slice())?;
    Ok(y.as_slice()
        .iter()
        .zip(x.as_slice())
        .fold(0.0, |acc, (a, b)| acc.max((a.ln() - b.ln()).abs())))
}

/// `‖x‖_u = max_i |x_i| / u_i`.
pub fn local_norm(x: &ConeVector, u: &ConeVector) -> Result<f64> {
    check_dims(u.as_slice(), x.as_slice())?;
    check_positive(u.as_slice())?;
    Ok(slice::local_norm(x.as_slice(), u.as_slice()))
}

/// The oscillation `ω_u(x) = M(x/u) − m(x/u)`; its kernel is `ℝu`.
pub fn oscillation(x: &ConeVector, u: &ConeVector) -> Result<f64> {
    check_dims(u.as_slice(), x.as_slice())?;
    check_positive(u.as_slice())?;
    Ok(slice::oscillation_u(x.as_slice(), u.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conjugation {
    /// Coordinatewise `log`, from the open orthant to ℝⁿ.
    ToAdditive,
    /// Coordinatewise `exp`, from ℝⁿ to the open orthant.
    ToMultiplicative,
}

/// Coordinatewise log/exp. Under this map Thompson's metric on the orthant
/// becomes the sup-norm distance on ℝⁿ.
pub fn log_exp_conjugate(direction: Conjugation, x: &ConeVector) -> Result<ConeVector> {
    match direction {
        Conjugation::ToAdditive => {
            check_positive(x.as_slice())?;
            ConeVector::new(x.as_slice().iter().map(|v| v.ln()).collect())
        }
        Conjugation::ToMultiplicative => {
            ConeVector::positive(x.as_slice().iter().map(|v| v.exp()).collect())
        }
    }
}

/// A positive linear functional `ψ`, stored as a probability vector in the
/// standard basis (so `ψ(e) = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Normalizer {
    weights: Vec<f64>,
}

impl Normalizer {
    /// The uniform average.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Evaluation at coordinate `index` (0-based).
    pub fn coordinate(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::InvalidNormalizer(format!(
                "coordinate {index} out of range for dimension {n}"
            )));
        }
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Ok(Self { weights })
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidNormalizer(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidNormalizer(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `ψ(x)`; panics in debug builds on a dimension mismatch.
    pub fn apply(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Shifts `x` along `e` so that `ψ(x) = 0`.
    pub fn center(&self, x: &[f64]) -> Vec<f64> {
        let c = self.apply(x);
        x.iter().map(|v| v - c).collect()
    }
}

impl TryFrom<Vec<f64>> for Normalizer {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Normalizer::from_weights(v)
    }
}

impl From<Normalizer> for Vec<f64> {
    fn from(n: Normalizer) -> Self {
        n.weights
    }
}
