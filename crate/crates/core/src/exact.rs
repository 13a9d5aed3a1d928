//! Exact probabilities as reduced fractions over unbounded integers.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A probability in `[0, 1]` kept in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactProb(BigRational);

impl ExactProb {
    /// `num / den`; panics unless `0 ≤ num ≤ den` and `den > 0`.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        let num = num.into();
        let den = den.into();
        assert!(den > BigInt::zero(), "denominator must be positive");
        assert!(num >= BigInt::zero() && num <= den, "probability out of range");
        ExactProb(BigRational::new(num, den))
    }

    pub fn from_rational(r: BigRational) -> Self {
        assert!(r >= BigRational::zero() && r <= BigRational::one());
        ExactProb(r)
    }

    pub fn zero() -> Self {
        ExactProb(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactProb(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn complement(&self) -> Self {
        ExactProb(BigRational::one() - &self.0)
    }
}

impl fmt::Display for ExactProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    num: String,
    den: String,
}

impl Serialize for ExactProb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            num: self.numer().to_string(),
            den: self.denom().to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExactProb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        let num: BigUint = w.num.parse().map_err(D::Error::custom)?;
        let den: BigUint = w.den.parse().map_err(D::Error::custom)?;
        if den.is_zero() || num > den {
            return Err(D::Error::custom("not a probability"));
        }
        Ok(ExactProb::new(BigInt::from(num), BigInt::from(den)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_and_ordered() {
        let p = ExactProb::new(2, 14);
        assert_eq!(p, ExactProb::new(1, 7));
        assert_eq!(p.to_string(), "1/7");
        assert!(ExactProb::new(1, 8) < p);
        assert_eq!(p.complement(), ExactProb::new(6, 7));
    }

    #[test]
    fn json_wire_format() {
        let p = ExactProb::new(4, 9);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"num":"4","den":"9"}"#);
        assert_eq!(serde_json::from_str::<ExactProb>(&s).unwrap(), p);
        assert!(serde_json::from_str::<ExactProb>(r#"{"num":"5","den":"4"}"#).is_err());
    }

    #[test]
    #[should_panic]
    fn rejects_values_above_one() {
        ExactProb::new(3, 2);
    }
}
