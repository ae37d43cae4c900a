use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::number::{format_rational, Rational};

/// Product of variables with positive exponents, sorted by variable name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn from_powers(powers: impl IntoIterator<Item = (String, u32)>) -> Self {
        let mut map: BTreeMap<String, u32> = BTreeMap::new();
        for (v, e) in powers {
            *map.entry(v).or_default() += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, var: &str) -> u32 {
        self.0
            .iter()
            .find(|(v, _)| v == var)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn powers(&self) -> &[(String, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_powers(self.0.iter().chain(&other.0).cloned())
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::new();
        for (v, e) in &self.0 {
            let d = other.exponent(v);
            if d > *e {
                return None;
            }
            if e - d > 0 {
                out.push((v.clone(), e - d));
            }
        }
        if other.0.iter().any(|(v, _)| self.exponent(v) == 0) {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(v, e)| {
                    let m = (*e).min(other.exponent(v));
                    (m > 0).then(|| (v.clone(), m))
                })
                .collect(),
        )
    }
}

impl Ord for Monomial {
    /// Graded lexicographic order; variables earlier in name order are
    /// more significant.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let vars: BTreeSet<&str> = self
                .0
                .iter()
                .chain(&other.0)
                .map(|(v, _)| v.as_str())
                .collect();
            for v in vars {
                match self.exponent(v).cmp(&other.exponent(v)) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(v, e)| if *e == 1 { v.clone() } else { format!("{v}^{e}") })
            .collect();
        f.write_str(&parts.join("*"))
    }
}

/// Sparse multivariate polynomial with rational coefficients. No zero
/// coefficients are stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvaluationError {
    #[error("no value for parameter `{0}`")]
    MissingParameter(String),
    #[error("denominator vanishes at the given point")]
    DenominatorRoot,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(value: Rational) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::one(), value);
        p
    }

    pub fn var(name: &str) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::var(name), Rational::one());
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, monomial: Monomial, coefficient: Rational) {
        if coefficient.is_zero() {
            return;
        }
        let entry = self.terms.entry(monomial.clone()).or_insert_with(Rational::zero);
        *entry += coefficient;
        if entry.is_zero() {
            self.terms.remove(&monomial);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Value if the polynomial has no variables.
    pub fn constant_value(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(m, _)| m.is_one())
                .map(|(_, c)| c.clone()),
            _ => None,
        }
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.powers().iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn degree_in(&self, var: &str) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn scale(&self, factor: &Rational) -> Polynomial {
        if factor.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), c * factor))
                .collect(),
        }
    }

    pub fn mul_monomial(&self, monomial: &Monomial, coefficient: &Rational) -> Polynomial {
        Polynomial::from_terms(
            self.terms
                .iter()
                .map(|(m, c)| (m.mul(monomial), c * coefficient)),
        )
    }

    /// Greatest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut iter = self.terms.keys();
        match iter.next() {
            None => Monomial::one(),
            Some(first) => iter.fold(first.clone(), |acc, m| acc.gcd(m)),
        }
    }

    pub fn div_monomial(&self, monomial: &Monomial) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| {
            (m.div(monomial).expect("monomial divides every term"), c.clone())
        }))
    }

    /// Quotient when `divisor` divides `self` exactly.
    pub fn div_exact(&self, divisor: &Polynomial) -> Option<Polynomial> {
        let (lead_m, lead_c) = divisor.leading()?;
        let mut remainder = self.clone();
        let mut quotient = Polynomial::zero();
        while let Some((m, c)) = remainder.leading() {
            let factor_m = m.div(lead_m)?;
            let factor_c = c / lead_c;
            remainder = &remainder - &divisor.mul_monomial(&factor_m, &factor_c);
            quotient.add_term(factor_m, factor_c);
        }
        Some(quotient)
    }

    pub fn evaluate(&self, point: &BTreeMap<String, Rational>) -> Result<Rational, EvaluationError> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (v, e) in m.powers() {
                let value = point
                    .get(v)
                    .ok_or_else(|| EvaluationError::MissingParameter(v.clone()))?;
                term *= num_traits::pow(value.clone(), *e as usize);
            }
            total += term;
        }
        Ok(total)
    }

    /// Dense coefficients (ascending powers) if only `var` occurs.
    fn univariate_coefficients(&self, var: &str) -> Option<Vec<Rational>> {
        let mut coeffs = vec![Rational::zero(); self.degree_in(var) as usize + 1];
        for (m, c) in &self.terms {
            if m.powers().iter().any(|(v, _)| v != var) {
                return None;
            }
            coeffs[m.exponent(var) as usize] = c.clone();
        }
        Some(coeffs)
    }

    fn from_univariate(var: &str, coeffs: &[Rational]) -> Polynomial {
        Polynomial::from_terms(coeffs.iter().enumerate().map(|(i, c)| {
            (Monomial::from_powers([(var.to_string(), i as u32)]), c.clone())
        }))
    }

    /// Monic greatest common divisor when both polynomials are univariate in
    /// the same variable.
    pub fn univariate_gcd(&self, other: &Polynomial) -> Option<Polynomial> {
        let vars: BTreeSet<String> = self.variables().union(&other.variables()).cloned().collect();
        if vars.len() != 1 {
            return None;
        }
        let var = vars.iter().next().unwrap();
        let mut a = self.univariate_coefficients(var)?;
        let mut b = other.univariate_coefficients(var)?;
        trim(&mut a);
        trim(&mut b);
        while !b.is_empty() {
            let r = poly_rem(&a, &b);
            a = b;
            b = r;
        }
        if a.is_empty() {
            return None;
        }
        let lead = a.last().unwrap().clone();
        let monic: Vec<Rational> = a.iter().map(|c| c / &lead).collect();
        Some(Polynomial::from_univariate(var, &monic))
    }
}

fn trim(p: &mut Vec<Rational>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn poly_rem(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut r = a.to_vec();
    trim(&mut r);
    let db = b.len() - 1;
    let lead = &b[db];
    while r.len() > db {
        let shift = r.len() - 1 - db;
        let factor = r.last().unwrap() / lead;
        for (i, c) in b.iter().enumerate() {
            r[shift + i] -= &factor * c;
        }
        r.pop();
        trim(&mut r);
    }
    r
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

impl fmt::Display for Polynomial {
    /// Terms in descending graded-lex order, e.g. `p^2*q - 1/2*p + 3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            let magnitude = c.abs();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.is_one() {
                f.write_str(&format_rational(&magnitude))?;
            } else if magnitude.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_rational(&magnitude))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;

    fn p() -> Polynomial {
        Polynomial::var("p")
    }
    fn c(n: i64, d: i64) -> Polynomial {
        Polynomial::constant(rational(n, d))
    }

    #[test]
    fn grlex_order() {
        let x = Monomial::var("p");
        let y = Monomial::var("q");
        let xy = x.mul(&y);
        let x2 = x.mul(&x);
        assert!(x > y);
        assert!(xy > x);
        assert!(x2 > xy);
        assert!(Monomial::one() < y);
    }

    #[test]
    fn arithmetic_cancels() {
        let one_minus_p = &c(1, 1) - &p();
        assert_eq!(&p() + &one_minus_p, c(1, 1));
        assert!((&p() - &p()).is_zero());
    }

    #[test]
    fn exact_division() {
        let num = &(&p() * &p()) - &p();
        let den = &p() - &c(1, 1);
        assert_eq!(num.div_exact(&den), Some(p()));
        assert_eq!(den.div_exact(&num), None);
        let q = Polynomial::var("q");
        let prod = &(&p() + &q) * &(&q - &c(2, 1));
        assert_eq!(prod.div_exact(&(&q - &c(2, 1))), Some(&p() + &q));
    }

    #[test]
    fn univariate_gcd_is_monic() {
        let a = &(&p() - &c(1, 1)) * &(&p() + &c(2, 1));
        let b = (&p() - &c(1, 1)).scale(&rational(3, 1));
        assert_eq!(a.univariate_gcd(&b), Some(&p() - &c(1, 1)));
        assert_eq!(a.univariate_gcd(&Polynomial::var("q")), None);
    }

    #[test]
    fn display_is_canonical() {
        let q = Polynomial::var("q");
        let poly = &(&(&(&p() * &p()) * &q) - &p().scale(&rational(1, 2))) + &c(3, 1);
        assert_eq!(poly.to_string(), "p^2*q - 1/2*p + 3");
        assert_eq!((-&p()).to_string(), "-p");
        assert_eq!(Polynomial::zero().to_string(), "0");
    }

    #[test]
    fn evaluation() {
        let q = Polynomial::var("q");
        let point: BTreeMap<String, Rational> =
            [("p".to_string(), rational(1, 2)), ("q".to_string(), rational(1, 3))].into();
        assert_eq!((&p() * &q).evaluate(&point), Ok(rational(1, 6)));
        let missing = Polynomial::var("r").evaluate(&point);
        assert_eq!(missing, Err(EvaluationError::MissingParameter("r".into())));
    }
}
