use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::ExtRational;

/// Analytic form of a [`DistanceMap`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `d ↦ slope · d`
    Linear(ExtRational),
    /// `d ↦ coefficient · d²`
    Quadratic(ExtRational),
    /// Any other monotone map with `map(0) = 0`.
    General,
}

type MapFn = dyn Fn(&ExtRational) -> ExtRational + Send + Sync;

/// Monotone nondecreasing map on extended nonnegative rationals, used for both
/// stability functions and privacy functions. All maps built by this crate
/// satisfy `map(0) = 0`.
#[derive(Clone)]
pub struct DistanceMap {
    shape: Shape,
    general: Option<Arc<MapFn>>,
}

impl DistanceMap {
    pub fn linear(slope: ExtRational) -> Self {
        DistanceMap {
            shape: Shape::Linear(slope),
            general: None,
        }
    }

    pub fn quadratic(coefficient: ExtRational) -> Self {
        DistanceMap {
            shape: Shape::Quadratic(coefficient),
            general: None,
        }
    }

    pub fn identity() -> Self {
        DistanceMap::linear(ExtRational::one())
    }

    pub fn zero() -> Self {
        DistanceMap::linear(ExtRational::zero())
    }

    /// Wraps an arbitrary map. The caller guarantees monotonicity and
    /// `f(0) = 0`.
    pub fn general(f: impl Fn(&ExtRational) -> ExtRational + Send + Sync + 'static) -> Self {
        DistanceMap {
            shape: Shape::General,
            general: Some(Arc::new(f)),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn eval(&self, d: &ExtRational) -> ExtRational {
        match &self.shape {
            Shape::Linear(a) => a * d,
            Shape::Quadratic(c) => c * &d.square(),
            Shape::General => (self.general.as_ref().expect("general map"))(d),
        }
    }

    pub fn slope(&self) -> Option<&ExtRational> {
        match &self.shape {
            Shape::Linear(a) => Some(a),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(&self.shape, Shape::Linear(a) | Shape::Quadratic(a) if a.is_zero())
    }

    /// Linear and quadratic maps satisfy `f(a) + f(b) ≤ f(a + b)`, which is
    /// what parallel composition needs.
    pub fn is_superadditive(&self) -> bool {
        matches!(self.shape, Shape::Linear(_) | Shape::Quadratic(_))
    }

    /// `d ↦ outer(inner(d))`.
    pub fn compose(outer: &DistanceMap, inner: &DistanceMap) -> DistanceMap {
        match (&outer.shape, &inner.shape) {
            (Shape::Linear(a), Shape::Linear(b)) => DistanceMap::linear(a * b),
            (Shape::Quadratic(c), Shape::Linear(a)) => DistanceMap::quadratic(c * &a.square()),
            (Shape::Linear(a), Shape::Quadratic(c)) => DistanceMap::quadratic(a * c),
            _ => {
                let (o, i) = (outer.clone(), inner.clone());
                DistanceMap::general(move |d| o.eval(&i.eval(d)))
            }
        }
    }

    /// Pointwise sum.
    pub fn sum(maps: &[DistanceMap]) -> Result<DistanceMap> {
        if maps.is_empty() {
            return Err(Error::EmptyList);
        }
        let live: Vec<&DistanceMap> = maps.iter().filter(|m| !m.is_zero()).collect();
        if live.is_empty() {
            return Ok(DistanceMap::zero());
        }
        if live.iter().all(|m| matches!(m.shape, Shape::Linear(_))) {
            let total = live
                .iter()
                .fold(ExtRational::zero(), |acc, m| &acc + m.slope().unwrap());
            return Ok(DistanceMap::linear(total));
        }
        if live.iter().all(|m| matches!(m.shape, Shape::Quadratic(_))) {
            let total = live.iter().fold(ExtRational::zero(), |acc, m| match &m.shape {
                Shape::Quadratic(c) => &acc + c,
                _ => unreachable!(),
            });
            return Ok(DistanceMap::quadratic(total));
        }
        let parts: Vec<DistanceMap> = live.into_iter().cloned().collect();
        Ok(DistanceMap::general(move |d| {
            parts.iter().fold(ExtRational::zero(), |acc, m| &acc + &m.eval(d))
        }))
    }

    /// Pointwise maximum of maps sharing a shape family (linear or quadratic).
    pub(crate) fn max_of_same_shape(maps: &[DistanceMap]) -> Result<DistanceMap> {
        if maps.is_empty() {
            return Ok(DistanceMap::zero());
        }
        let live: Vec<&DistanceMap> = maps.iter().filter(|m| !m.is_zero()).collect();
        if live.is_empty() {
            return Ok(DistanceMap::zero());
        }
        let coefficient = |m: &DistanceMap| match &m.shape {
            Shape::Linear(a) | Shape::Quadratic(a) => a.clone(),
            Shape::General => unreachable!(),
        };
        if live.iter().all(|m| matches!(m.shape, Shape::Linear(_))) {
            let top = live.iter().map(|m| coefficient(m)).max().unwrap();
            return Ok(DistanceMap::linear(top));
        }
        if live.iter().all(|m| matches!(m.shape, Shape::Quadratic(_))) {
            let top = live.iter().map(|m| coefficient(m)).max().unwrap();
            return Ok(DistanceMap::quadratic(top));
        }
        Err(Error::NonLinearPrivacyFunction(
            "maps must all be linear or all quadratic".into(),
        ))
    }
}

impl fmt::Debug for DistanceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Linear(a) => write!(f, "linear({a})"),
            Shape::Quadratic(c) => write!(f, "quadratic({c})"),
            Shape::General => write!(f, "general"),
        }
    }
}
