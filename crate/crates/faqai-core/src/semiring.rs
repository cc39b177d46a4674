//! Commutative semirings and the tagged values they operate on.
//!
//! Three semirings are supported: the Boolean semiring (∨, ∧), counting
//! over arbitrary-precision integers (+, ×), and sum-product over 64-bit
//! floats. Counting uses big integers so that oracle-equivalence checks
//! stay exact no matter how large a join gets.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemiringId {
    #[serde(rename = "boolean")]
    Boolean,
    #[serde(rename = "count")]
    CountInt,
    #[serde(rename = "real")]
    RealSumProd,
}

impl SemiringId {
    pub fn name(self) -> &'static str {
        match self {
            SemiringId::Boolean => "boolean",
            SemiringId::CountInt => "count",
            SemiringId::RealSumProd => "real",
        }
    }

    pub fn zero(self) -> SemiringValue {
        match self {
            SemiringId::Boolean => SemiringValue::Bool(false),
            SemiringId::CountInt => SemiringValue::Int(BigInt::zero()),
            SemiringId::RealSumProd => SemiringValue::Real(0.0),
        }
    }

    pub fn one(self) -> SemiringValue {
        match self {
            SemiringId::Boolean => SemiringValue::Bool(true),
            SemiringId::CountInt => SemiringValue::Int(BigInt::one()),
            SemiringId::RealSumProd => SemiringValue::Real(1.0),
        }
    }

    pub fn add(self, a: &SemiringValue, b: &SemiringValue) -> Result<SemiringValue> {
        match (self, a, b) {
            (SemiringId::Boolean, SemiringValue::Bool(x), SemiringValue::Bool(y)) => {
                Ok(SemiringValue::Bool(*x || *y))
            }
            (SemiringId::CountInt, SemiringValue::Int(x), SemiringValue::Int(y)) => {
                Ok(SemiringValue::Int(x + y))
            }
            (SemiringId::RealSumProd, SemiringValue::Real(x), SemiringValue::Real(y)) => {
                Ok(SemiringValue::Real(x + y))
            }
            _ => Err(self.mismatch(a, b)),
        }
    }

    pub fn mul(self, a: &SemiringValue, b: &SemiringValue) -> Result<SemiringValue> {
        match (self, a, b) {
            (SemiringId::Boolean, SemiringValue::Bool(x), SemiringValue::Bool(y)) => {
                Ok(SemiringValue::Bool(*x && *y))
            }
            (SemiringId::CountInt, SemiringValue::Int(x), SemiringValue::Int(y)) => {
                Ok(SemiringValue::Int(x * y))
            }
            (SemiringId::RealSumProd, SemiringValue::Real(x), SemiringValue::Real(y)) => {
                Ok(SemiringValue::Real(x * y))
            }
            _ => Err(self.mismatch(a, b)),
        }
    }

    fn mismatch(self, a: &SemiringValue, b: &SemiringValue) -> Error {
        Error::Semiring(format!(
            "operands {:?} and {:?} do not both carry the {} tag",
            a.tag_name(),
            b.tag_name(),
            self.name()
        ))
    }
}

/// A value tagged with the semiring it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub enum SemiringValue {
    Bool(bool),
    Int(BigInt),
    Real(f64),
}

impl SemiringValue {
    pub fn tag_name(&self) -> &'static str {
        match self {
            SemiringValue::Bool(_) => "boolean",
            SemiringValue::Int(_) => "count",
            SemiringValue::Real(_) => "real",
        }
    }

    pub fn matches(&self, id: SemiringId) -> bool {
        matches!(
            (self, id),
            (SemiringValue::Bool(_), SemiringId::Boolean)
                | (SemiringValue::Int(_), SemiringId::CountInt)
                | (SemiringValue::Real(_), SemiringId::RealSumProd)
        )
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SemiringValue::Bool(b) => !*b,
            SemiringValue::Int(i) => i.is_zero(),
            SemiringValue::Real(r) => *r == 0.0,
        }
    }

    pub fn from_count(id: SemiringId, n: i64) -> SemiringValue {
        match id {
            SemiringId::Boolean => SemiringValue::Bool(n != 0),
            SemiringId::CountInt => SemiringValue::Int(BigInt::from(n)),
            SemiringId::RealSumProd => SemiringValue::Real(n as f64),
        }
    }

    /// Approximate numeric view, used by tests and reporting.
    pub fn as_f64(&self) -> f64 {
        match self {
            SemiringValue::Bool(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
            SemiringValue::Int(i) => {
                // Good enough for reporting; exact comparisons go through Eq.
                i.to_string().parse::<f64>().unwrap_or(f64::NAN)
            }
            SemiringValue::Real(r) => *r,
        }
    }

    /// Equality up to `tol` on the real semiring, exact elsewhere.
    pub fn approx_eq(&self, other: &SemiringValue, tol: f64) -> bool {
        match (self, other) {
            (SemiringValue::Real(a), SemiringValue::Real(b)) => (a - b).abs() <= tol,
            (a, b) => a == b,
        }
    }
}

impl std::fmt::Display for SemiringValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SemiringValue::Bool(b) => write!(f, "{b}"),
            SemiringValue::Int(i) => write!(f, "{i}"),
            SemiringValue::Real(r) => write!(f, "{r}"),
        }
    }
}

/// ⊕-fold of `values` starting from the additive identity.
pub fn fold_add(s: SemiringId, values: &[SemiringValue]) -> Result<SemiringValue> {
    let mut acc = s.zero();
    for v in values {
        if !v.matches(s) {
            return Err(Error::Semiring(format!(
                "fold_add: value tagged {} under {} semiring",
                v.tag_name(),
                s.name()
            )));
        }
        acc = s.add(&acc, v)?;
    }
    Ok(acc)
}

/// ⊗-fold of `values` starting from the multiplicative identity.
pub fn fold_mul(s: SemiringId, values: &[SemiringValue]) -> Result<SemiringValue> {
    let mut acc = s.one();
    for v in values {
        if !v.matches(s) {
            return Err(Error::Semiring(format!(
                "fold_mul: value tagged {} under {} semiring",
                v.tag_name(),
                s.name()
            )));
        }
        acc = s.mul(&acc, v)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(n: i64) -> SemiringValue {
        SemiringValue::Int(BigInt::from(n))
    }

    #[test]
    fn empty_fold_add_is_zero() {
        assert_eq!(fold_add(SemiringId::CountInt, &[]).unwrap(), int(0));
    }

    #[test]
    fn fold_add_counts() {
        let vs = [int(2), int(3), int(4)];
        assert_eq!(fold_add(SemiringId::CountInt, &vs).unwrap(), int(9));
    }

    #[test]
    fn fold_add_boolean_disjunction() {
        let vs = [SemiringValue::Bool(false), SemiringValue::Bool(true)];
        assert_eq!(
            fold_add(SemiringId::Boolean, &vs).unwrap(),
            SemiringValue::Bool(true)
        );
    }

    #[test]
    fn empty_fold_mul_is_one() {
        assert_eq!(fold_mul(SemiringId::CountInt, &[]).unwrap(), int(1));
    }

    #[test]
    fn fold_mul_counts() {
        assert_eq!(
            fold_mul(SemiringId::CountInt, &[int(2), int(3)]).unwrap(),
            int(6)
        );
    }

    #[test]
    fn fold_mul_boolean_conjunction() {
        let vs = [SemiringValue::Bool(true), SemiringValue::Bool(false)];
        assert_eq!(
            fold_mul(SemiringId::Boolean, &vs).unwrap(),
            SemiringValue::Bool(false)
        );
    }

    #[test]
    fn tag_mismatch_is_an_error() {
        let vs = [int(1), SemiringValue::Bool(true)];
        assert!(fold_add(SemiringId::CountInt, &vs).is_err());
        assert!(fold_mul(SemiringId::Boolean, &vs).is_err());
    }

    /// Exhaustive identity/associativity/distributivity check on small
    /// value sets, for each semiring.
    #[test]
    fn axioms_on_small_value_sets() {
        let bools = [SemiringValue::Bool(false), SemiringValue::Bool(true)];
        check_axioms(SemiringId::Boolean, &bools);

        let ints: Vec<_> = (-2..=2).map(int).collect();
        check_axioms(SemiringId::CountInt, &ints);

        let reals: Vec<_> = [-1.5, 0.0, 0.5, 2.0]
            .iter()
            .map(|r| SemiringValue::Real(*r))
            .collect();
        check_axioms(SemiringId::RealSumProd, &reals);
    }

    fn check_axioms(s: SemiringId, vals: &[SemiringValue]) {
        let tol = 1e-9;
        for a in vals {
            // identities
            assert!(s.add(a, &s.zero()).unwrap().approx_eq(a, tol));
            assert!(s.mul(a, &s.one()).unwrap().approx_eq(a, tol));
            assert!(s.mul(a, &s.zero()).unwrap().approx_eq(&s.zero(), tol));
            for b in vals {
                // commutativity
                assert!(s
                    .add(a, b)
                    .unwrap()
                    .approx_eq(&s.add(b, a).unwrap(), tol));
                assert!(s
                    .mul(a, b)
                    .unwrap()
                    .approx_eq(&s.mul(b, a).unwrap(), tol));
                for c in vals {
                    // associativity
                    let l = s.add(&s.add(a, b).unwrap(), c).unwrap();
                    let r = s.add(a, &s.add(b, c).unwrap()).unwrap();
                    assert!(l.approx_eq(&r, tol));
                    let l = s.mul(&s.mul(a, b).unwrap(), c).unwrap();
                    let r = s.mul(a, &s.mul(b, c).unwrap()).unwrap();
                    assert!(l.approx_eq(&r, tol));
                    // distributivity
                    let l = s.mul(a, &s.add(b, c).unwrap()).unwrap();
                    let r = s
                        .add(&s.mul(a, b).unwrap(), &s.mul(a, c).unwrap())
                        .unwrap();
                    assert!(l.approx_eq(&r, tol));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fold_add_is_permutation_invariant(mut xs in proptest::collection::vec(-50i64..50, 0..8)) {
            let vals: Vec<_> = xs.iter().map(|&n| int(n)).collect();
            let base = fold_add(SemiringId::CountInt, &vals).unwrap();
            xs.reverse();
            let rev: Vec<_> = xs.iter().map(|&n| int(n)).collect();
            prop_assert_eq!(base.clone(), fold_add(SemiringId::CountInt, &rev).unwrap());
            xs.sort();
            let sorted: Vec<_> = xs.iter().map(|&n| int(n)).collect();
            prop_assert_eq!(base, fold_add(SemiringId::CountInt, &sorted).unwrap());
        }
    }
}
