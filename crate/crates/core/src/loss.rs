//! Losses on the value space: metric powers `d(y, y')^p` on reals, real
//! vectors, or a finite label set with the discrete metric.

use thiserror::Error;

use crate::metric_space::Point;

/// Values live in the same representation as instance points.
pub type Value = Point;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("bounded-loss: no pair reaches threshold {0}")]
    BoundedLoss(f64),
    #[error("invalid loss: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueSpace {
    Reals,
    Vectors { dim: usize },
    Labels { count: usize },
}

impl ValueSpace {
    /// The origin, used as the default prediction `y0`.
    pub fn origin(&self) -> Value {
        match self {
            ValueSpace::Reals => Point::Scalar(0.0),
            ValueSpace::Vectors { dim } => Point::Vector(vec![0.0; *dim]),
            ValueSpace::Labels { .. } => Point::Atom(0),
        }
    }

    pub fn distance(&self, a: &Value, b: &Value) -> f64 {
        match (self, a, b) {
            (ValueSpace::Reals, Point::Scalar(x), Point::Scalar(y)) => (x - y).abs(),
            (ValueSpace::Vectors { .. }, Point::Vector(x), Point::Vector(y)) => {
                x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
            }
            (ValueSpace::Labels { .. }, Point::Atom(x), Point::Atom(y)) => (x != y) as u8 as f64,
            _ => panic!("value {a:?} or {b:?} outside {self:?}"),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (ValueSpace::Reals, Point::Scalar(x)) => x.is_finite(),
            (ValueSpace::Vectors { dim }, Point::Vector(x)) => x.len() == *dim && x.iter().all(|c| c.is_finite()),
            (ValueSpace::Labels { count }, Point::Atom(a)) => a < count,
            _ => false,
        }
    }
}

/// `loss(y, y') = d(y, y')^power` with its relaxed-triangle constant.
#[derive(Clone, Debug, PartialEq)]
pub struct LossModel {
    value_space: ValueSpace,
    power: f64,
    c_relaxed: f64,
    bounded: bool,
}

impl LossModel {
    pub fn power(value_space: ValueSpace, power: f64) -> Result<Self, LossError> {
        if !(power >= 1.0) || !power.is_finite() {
            return Err(LossError::Invalid(format!("exponent must be >= 1, got {power}")));
        }
        match value_space {
            ValueSpace::Vectors { dim: 0 } | ValueSpace::Labels { count: 0 } => {
                return Err(LossError::Invalid("empty value space".into()))
            }
            _ => {}
        }
        let bounded = matches!(value_space, ValueSpace::Labels { .. });
        // (a + b)^p <= 2^(p-1) (a^p + b^p); the discrete metric only takes 0/1.
        let c_relaxed = if bounded { 1.0 } else { 2f64.powf(power - 1.0) };
        Ok(LossModel { value_space, power, c_relaxed, bounded })
    }

    pub fn squared() -> Self {
        Self::power(ValueSpace::Reals, 2.0).expect("valid")
    }

    pub fn absolute() -> Self {
        Self::power(ValueSpace::Reals, 1.0).expect("valid")
    }

    pub fn zero_one(labels: usize) -> Result<Self, LossError> {
        Self::power(ValueSpace::Labels { count: labels }, 1.0)
    }

    pub fn value_space(&self) -> ValueSpace {
        self.value_space
    }

    pub fn exponent(&self) -> f64 {
        self.power
    }

    pub fn c_relaxed(&self) -> f64 {
        self.c_relaxed
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn default_value(&self) -> Value {
        self.value_space.origin()
    }

    pub fn evaluate(&self, a: &Value, b: &Value) -> f64 {
        let d = self.value_space.distance(a, b);
        if self.power == 1.0 {
            d
        } else if self.power == 2.0 {
            d * d
        } else {
            d.powf(self.power)
        }
    }

    /// Two values whose loss is at least `threshold`: the origin and the
    /// smallest integer strictly above `threshold^(1/p)` along the first axis.
    pub fn witness_pair(&self, threshold: f64) -> Result<(Value, Value), LossError> {
        if self.bounded {
            return Err(LossError::BoundedLoss(threshold));
        }
        let origin = self.default_value();
        if threshold <= 0.0 {
            return Ok((origin.clone(), origin));
        }
        let mut magnitude = threshold.powf(1.0 / self.power).floor() + 1.0;
        let far = |m: f64| match self.value_space {
            ValueSpace::Vectors { dim } => {
                let mut v = vec![0.0; dim];
                v[0] = m;
                Point::Vector(v)
            }
            _ => Point::Scalar(m),
        };
        // floating roots can land a hair low
        while self.evaluate(&origin, &far(magnitude)) < threshold {
            magnitude += 1.0;
        }
        Ok((origin, far(magnitude)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(x: f64) -> Value {
        Point::Scalar(x)
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(LossModel::squared().evaluate(&s(3.0), &s(3.0)), 0.0);
        assert_eq!(LossModel::squared().evaluate(&s(0.0), &s(2.0)), 4.0);
        assert_eq!(LossModel::absolute().evaluate(&s(-1.0), &s(2.0)), 3.0);
    }

    #[test]
    fn witness_examples() {
        assert_eq!(LossModel::squared().witness_pair(100.0).unwrap(), (s(0.0), s(11.0)));
        assert_eq!(LossModel::squared().witness_pair(0.0).unwrap(), (s(0.0), s(0.0)));
        assert_eq!(LossModel::absolute().witness_pair(7.0).unwrap(), (s(0.0), s(8.0)));
        assert_eq!(LossModel::squared().witness_pair(28.0).unwrap(), (s(0.0), s(6.0)));
    }

    #[test]
    fn bounded_loss_has_no_witness() {
        let zo = LossModel::zero_one(3).unwrap();
        assert!(zo.is_bounded());
        assert_eq!(zo.witness_pair(0.5), Err(LossError::BoundedLoss(0.5)));
        assert_eq!(zo.evaluate(&Point::Atom(0), &Point::Atom(2)), 1.0);
        assert_eq!(zo.default_value(), Point::Atom(0));
    }

    #[test]
    fn constants() {
        assert_eq!(LossModel::squared().c_relaxed(), 2.0);
        assert_eq!(LossModel::absolute().c_relaxed(), 1.0);
        assert!(LossModel::power(ValueSpace::Reals, 0.5).is_err());
    }

    #[test]
    fn vector_witness() {
        let l = LossModel::power(ValueSpace::Vectors { dim: 3 }, 2.0).unwrap();
        let (a, b) = l.witness_pair(50.0).unwrap();
        assert!(l.evaluate(&a, &b) >= 50.0);
    }

    proptest! {
        #[test]
        fn witness_meets_threshold(t in 0.0f64..1e12, p in 1.0f64..4.0) {
            let l = LossModel::power(ValueSpace::Reals, p).unwrap();
            let (a, b) = l.witness_pair(t).unwrap();
            prop_assert!(l.evaluate(&a, &b) >= t);
        }

        #[test]
        fn metric_power_is_symmetric_with_zero_diagonal(a in -1e6f64..1e6, b in -1e6f64..1e6, p in 1.0f64..3.0) {
            let l = LossModel::power(ValueSpace::Reals, p).unwrap();
            prop_assert_eq!(l.evaluate(&s(a), &s(b)), l.evaluate(&s(b), &s(a)));
            prop_assert_eq!(l.evaluate(&s(a), &s(a)), 0.0);
        }

        #[test]
        fn relaxed_triangle(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3, p in 1.0f64..4.0) {
            let l = LossModel::power(ValueSpace::Reals, p).unwrap();
            let lhs = l.evaluate(&s(a), &s(c));
            let rhs = l.c_relaxed() * (l.evaluate(&s(b), &s(a)) + l.evaluate(&s(b), &s(c)));
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }
    }
}
