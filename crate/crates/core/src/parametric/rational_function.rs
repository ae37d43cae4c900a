use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::Signed;

use super::polynomial::{EvaluationError, Polynomial};
use crate::number::{Field, Rational};

/// Quotient of two polynomials.
///
/// Normalization removes common monomial factors, cancels exact polynomial
/// divisors, applies a univariate gcd when only one parameter occurs, and
/// makes the denominator's leading coefficient one. Multivariate gcds are not
/// computed, so two equal functions may have different representations;
/// equality is decided by cross-multiplication.
#[derive(Debug, Clone)]
pub struct RationalFunction {
    numerator: Polynomial,
    denominator: Polynomial,
}

impl RationalFunction {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Option<Self> {
        if denominator.is_zero() {
            return None;
        }
        Some(Self::normalized(numerator, denominator))
    }

    pub fn constant(value: Rational) -> Self {
        RationalFunction {
            numerator: Polynomial::constant(value),
            denominator: Polynomial::constant(Rational::one()),
        }
    }

    pub fn parameter(name: &str) -> Self {
        RationalFunction {
            numerator: Polynomial::var(name),
            denominator: Polynomial::constant(Rational::one()),
        }
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        RationalFunction {
            numerator: p,
            denominator: Polynomial::constant(Rational::one()),
        }
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    fn normalized(mut num: Polynomial, mut den: Polynomial) -> Self {
        if num.is_zero() {
            return RationalFunction {
                numerator: num,
                denominator: Polynomial::constant(Rational::one()),
            };
        }
        if let Some(c) = den.constant_value() {
            return RationalFunction {
                numerator: num.scale(&(Rational::one() / c)),
                denominator: Polynomial::constant(Rational::one()),
            };
        }
        let content = num.monomial_content().gcd(&den.monomial_content());
        if !content.is_one() {
            num = num.div_monomial(&content);
            den = den.div_monomial(&content);
        }
        if let Some(g) = num.univariate_gcd(&den) {
            if g.total_degree() > 0 {
                num = num.div_exact(&g).expect("gcd divides numerator");
                den = den.div_exact(&g).expect("gcd divides denominator");
            }
        } else if let Some(q) = num.div_exact(&den) {
            num = q;
            den = Polynomial::constant(Rational::one());
        } else if let Some(q) = den.div_exact(&num) {
            num = Polynomial::constant(Rational::one());
            den = q;
        }
        let lead = den.leading().map(|(_, c)| c.clone()).expect("nonzero denominator");
        if !lead.is_one() {
            let inv = Rational::one() / lead;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        RationalFunction {
            numerator: num,
            denominator: den,
        }
    }

    pub fn constant_value(&self) -> Option<Rational> {
        let n = self.numerator.constant_value()?;
        let d = self.denominator.constant_value()?;
        Some(n / d)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut vars = self.numerator.variables();
        vars.extend(self.denominator.variables());
        vars
    }

    pub fn evaluate(&self, point: &BTreeMap<String, Rational>) -> Result<Rational, EvaluationError> {
        let den = self.denominator.evaluate(point)?;
        if den.is_zero() {
            return Err(EvaluationError::DenominatorRoot);
        }
        Ok(self.numerator.evaluate(point)? / den)
    }

    /// Constant denominator and at most degree one in every parameter.
    pub fn is_multi_affine(&self) -> bool {
        self.denominator.constant_value().is_some()
            && self
                .numerator
                .terms()
                .all(|(m, _)| m.powers().iter().all(|(_, e)| *e <= 1))
    }

    pub fn reciprocal(&self) -> Option<RationalFunction> {
        RationalFunction::new(self.denominator.clone(), self.numerator.clone())
    }

    /// `(num)/(den)` text used for reporting solution functions.
    pub fn canonical_text(&self) -> String {
        format!("({})/({})", self.numerator, self.denominator)
    }
}

impl PartialEq for RationalFunction {
    fn eq(&self, other: &Self) -> bool {
        &self.numerator * &other.denominator == &other.numerator * &self.denominator
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denominator.constant_value().is_some_and(|c| c.is_one()) {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "({})/({})", self.numerator, self.denominator)
        }
    }
}

impl Add for RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: Self) -> Self {
        if self.denominator == rhs.denominator {
            return Self::normalized(&self.numerator + &rhs.numerator, self.denominator);
        }
        Self::normalized(
            &(&self.numerator * &rhs.denominator) + &(&rhs.numerator * &self.denominator),
            &self.denominator * &rhs.denominator,
        )
    }
}

impl Sub for RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: Self) -> Self {
        Self::normalized(
            &self.numerator * &rhs.numerator,
            &self.denominator * &rhs.denominator,
        )
    }
}

impl Div for RationalFunction {
    type Output = RationalFunction;
    /// Panics on division by the zero function.
    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.numerator.is_zero(), "division by the zero function");
        Self::normalized(
            &self.numerator * &rhs.denominator,
            &self.denominator * &rhs.numerator,
        )
    }
}

impl Neg for RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> Self {
        RationalFunction {
            numerator: -&self.numerator,
            denominator: self.denominator,
        }
    }
}

impl Field for RationalFunction {
    fn zero() -> Self {
        RationalFunction::constant(Rational::zero())
    }
    fn one() -> Self {
        RationalFunction::constant(Rational::one())
    }
    fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }
    fn from_rational(value: &Rational) -> Self {
        RationalFunction::constant(value.clone())
    }
    fn is_exact() -> bool {
        true
    }
    fn domain_name() -> &'static str {
        "parametric"
    }
    fn sign(&self) -> Option<Ordering> {
        self.constant_value().map(|c| {
            if c.is_zero() {
                Ordering::Equal
            } else if c.is_positive() {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;
    use proptest::prelude::*;

    fn rf(p: Polynomial) -> RationalFunction {
        RationalFunction::from_polynomial(p)
    }
    fn konst(n: i64, d: i64) -> RationalFunction {
        RationalFunction::constant(rational(n, d))
    }
    fn p() -> RationalFunction {
        RationalFunction::parameter("p")
    }
    fn q() -> RationalFunction {
        RationalFunction::parameter("q")
    }

    #[test]
    fn complement_sums_to_one() {
        let sum = p() + (konst(1, 1) - p());
        assert_eq!(sum.constant_value(), Some(rational(1, 1)));
        assert!(sum.is_one());
    }

    #[test]
    fn cancellation_of_exact_factor() {
        let f = (p() * p() - p()) / (p() - konst(1, 1));
        assert_eq!(f.canonical_text(), "(p)/(1)");
        // cross-check by evaluation at a few points
        for x in [rational(1, 3), rational(2, 7), rational(5, 1), rational(-3, 2), rational(9, 10)] {
            let point: BTreeMap<_, _> = [("p".to_string(), x.clone())].into();
            let direct = (&x * &x - &x) / (&x - rational(1, 1));
            assert_eq!(f.evaluate(&point).unwrap(), direct);
        }
    }

    #[test]
    fn evaluation_of_product() {
        let point: BTreeMap<_, _> =
            [("p".to_string(), rational(1, 2)), ("q".to_string(), rational(1, 3))].into();
        assert_eq!((p() * q()).evaluate(&point), Ok(rational(1, 6)));
    }

    #[test]
    fn denominator_root_is_an_error() {
        let f = konst(1, 1) / (p() - konst(1, 2));
        let point: BTreeMap<_, _> = [("p".to_string(), rational(1, 2))].into();
        assert_eq!(f.evaluate(&point), Err(EvaluationError::DenominatorRoot));
        assert!(RationalFunction::new(Polynomial::var("p"), Polynomial::zero()).is_none());
    }

    #[test]
    fn geometric_series_collapses() {
        // p / (1 - (1-p)) = 1
        let f = p() / (konst(1, 1) - (konst(1, 1) - p()));
        assert_eq!(f.constant_value(), Some(rational(1, 1)));
    }

    #[test]
    fn multi_affine_detection() {
        assert!((p() * q() + konst(1, 2)).is_multi_affine());
        assert!(!(p() * p()).is_multi_affine());
        assert!(!(konst(1, 1) / p()).is_multi_affine());
    }

    #[test]
    fn sign_only_for_constants() {
        assert_eq!(konst(-1, 2).sign(), Some(Ordering::Less));
        assert_eq!(p().sign(), None);
    }

    fn small_poly() -> impl Strategy<Value = RationalFunction> {
        proptest::collection::vec((-3i64..4, 0u32..3, 0u32..2), 1..4).prop_map(|terms| {
            terms.into_iter().fold(RationalFunction::zero(), |acc, (c, ep, eq)| {
                let mono = super::super::polynomial::Monomial::from_powers([
                    ("p".to_string(), ep),
                    ("q".to_string(), eq),
                ]);
                acc + rf(Polynomial::from_terms([(mono, rational(c, 1))]))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn add_then_subtract_is_identity(f in small_poly(), g in small_poly(), h in small_poly()) {
            prop_assume!(!h.is_zero());
            let f = f / h;
            prop_assert_eq!((f.clone() + g.clone()) - g, f);
        }

        #[test]
        fn times_reciprocal_is_one(f in small_poly(), g in small_poly()) {
            prop_assume!(!f.is_zero() && !g.is_zero());
            let h = f / g;
            let inv = h.reciprocal().unwrap();
            prop_assert!((h * inv).is_one());
        }
    }
}
