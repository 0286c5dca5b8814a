//! Ordinals below ω^ω in Cantor normal form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of indices at which sampled families are checked against their
/// declared pattern.
pub const DEFAULT_SAMPLES: u64 = 8;

/// `ω^e1·c1 + ... + ω^en·cn` with `e1 > ... > en` and every `ci ≥ 1`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ordinal {
    terms: Vec<(u32, u64)>,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn nat(n: u64) -> Self {
        if n == 0 {
            Self::zero()
        } else {
            Ordinal { terms: vec![(0, n)] }
        }
    }

    pub fn one() -> Self {
        Self::nat(1)
    }

    pub fn omega() -> Self {
        Self::omega_pow(1)
    }

    pub fn omega_pow(e: u32) -> Self {
        Ordinal { terms: vec![(e, 1)] }
    }

    /// Builds from (exponent, coefficient) pairs; zero coefficients are dropped,
    /// the exponents must be strictly decreasing.
    pub fn from_terms(terms: Vec<(u32, u64)>) -> Result<Self> {
        let terms: Vec<_> = terms.into_iter().filter(|t| t.1 > 0).collect();
        if terms.windows(2).any(|w| w[0].0 <= w[1].0) {
            return Err(Error::pre("exponents must be strictly decreasing"));
        }
        Ok(Ordinal { terms })
    }

    pub fn terms(&self) -> &[(u32, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_limit(&self) -> bool {
        matches!(self.terms.last(), Some(&(e, _)) if e > 0)
    }

    pub fn is_successor(&self) -> bool {
        matches!(self.terms.last(), Some(&(0, _)))
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.0 == 0)
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(0, n)] => Some(*n),
            _ => None,
        }
    }

    pub fn leading_exponent(&self) -> Option<u32> {
        self.terms.first().map(|t| t.0)
    }

    /// The finite part `n` of `λ + n`.
    pub fn finite_part(&self) -> u64 {
        match self.terms.last() {
            Some(&(0, n)) => n,
            _ => 0,
        }
    }

    /// `α` for a successor `α + 1`.
    pub fn pred(&self) -> Option<Ordinal> {
        if !self.is_successor() {
            return None;
        }
        let mut terms = self.terms.clone();
        let last = terms.last_mut().unwrap();
        last.1 -= 1;
        if last.1 == 0 {
            terms.pop();
        }
        Some(Ordinal { terms })
    }

    pub fn succ(&self) -> Ordinal {
        self.add(&Ordinal::one())
    }

    pub fn add(&self, b: &Ordinal) -> Ordinal {
        let Some(&(e, c)) = b.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<(u32, u64)> = self.terms.iter().copied().take_while(|t| t.0 > e).collect();
        let carry = self.terms.iter().find(|t| t.0 == e).map_or(0, |t| t.1);
        terms.push((e, c + carry));
        terms.extend_from_slice(&b.terms[1..]);
        Ordinal { terms }
    }

    /// The unique `γ` with `self + γ = b`, provided `self ≤ b`.
    pub fn sub_left(&self, b: &Ordinal) -> Result<Ordinal> {
        if self > b {
            return Err(Error::pre(format!("{self} exceeds {b}")));
        }
        let mut i = 0;
        while i < self.terms.len() && i < b.terms.len() && self.terms[i] == b.terms[i] {
            i += 1;
        }
        if i == b.terms.len() {
            return Ok(Ordinal::zero());
        }
        if i == self.terms.len() {
            return Ok(Ordinal { terms: b.terms[i..].to_vec() });
        }
        let (ea, ca) = self.terms[i];
        let (eb, cb) = b.terms[i];
        let mut terms = Vec::new();
        if ea == eb {
            terms.push((eb, cb - ca));
        } else {
            terms.push((eb, cb));
        }
        terms.extend_from_slice(&b.terms[i + 1..]);
        Ok(Ordinal { terms })
    }

    /// `α·ω`.
    pub fn times_omega(&self) -> Ordinal {
        match self.leading_exponent() {
            None => Ordinal::zero(),
            Some(e) => Ordinal::omega_pow(e + 1),
        }
    }

    /// `α·n` for a natural `n`.
    pub fn times_nat(&self, n: u64) -> Ordinal {
        let mut acc = Ordinal::zero();
        if n == 0 || self.is_zero() {
            return acc;
        }
        let (e, c) = self.terms[0];
        acc.terms.push((e, c * n));
        acc.terms.extend_from_slice(&self.terms[1..]);
        acc
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Ordinal>) -> Ordinal {
        items.into_iter().fold(Ordinal::zero(), |acc, x| acc.add(x))
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(&other.terms) {
            match a.0.cmp(&b.0).then(a.1.cmp(&b.1)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::nat(n)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, &(e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match (e, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => write!(f, "w")?,
                (1, c) => write!(f, "w*{c}")?,
                (e, 1) => write!(f, "w^{e}")?,
                (e, c) => write!(f, "w^{e}*{c}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ordinal({self})")
    }
}

impl FromStr for Ordinal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse { line: 1, col: 1, expected: format!("ordinal ({what})") };
        let mut acc = Ordinal::zero();
        for part in s.split('+') {
            let part: String = part.chars().filter(|c| !c.is_whitespace()).collect();
            if part.is_empty() {
                return Err(bad("empty summand"));
            }
            let term = if let Some(rest) = part.strip_prefix('w').or_else(|| part.strip_prefix('ω')) {
                let (exp, coef) = match rest.split_once('*') {
                    Some((e, c)) => (e, c.parse::<u64>().map_err(|_| bad("coefficient"))?),
                    None => (rest, 1),
                };
                let exp = match exp {
                    "" => 1,
                    e => e
                        .strip_prefix('^')
                        .and_then(|e| e.parse::<u32>().ok())
                        .ok_or_else(|| bad("exponent"))?,
                };
                Ordinal::omega_pow(exp).times_nat(coef)
            } else {
                Ordinal::nat(part.parse::<u64>().map_err(|_| bad("natural"))?)
            };
            acc = acc.add(&term);
        }
        Ok(acc)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Declared eventual behaviour of a sampled family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// `α_i = value` for every `i ≥ from`.
    EventuallyConstant { from: u64, value: Ordinal },
    /// `α_i = a·i + b` for every `i ≥ from`.
    EventuallyAffine { from: u64, a: u64, b: u64 },
}

/// A sequence `⟨α_i⟩_{i<ω}`.
#[derive(Clone)]
pub enum OrdinalFamily {
    Constant(Ordinal),
    Affine { a: u64, b: u64 },
    Sampled { eval: Arc<dyn Fn(u64) -> Ordinal + Send + Sync>, pattern: Pattern },
}

impl fmt::Debug for OrdinalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrdinalFamily::Constant(a) => write!(f, "Constant({a})"),
            OrdinalFamily::Affine { a, b } => write!(f, "Affine({a}*i+{b})"),
            OrdinalFamily::Sampled { pattern, eval } => {
                let head: Vec<String> = (0..3).map(|i| eval(i).to_string()).collect();
                write!(f, "Sampled([{}, ...], {pattern:?})", head.join(", "))
            }
        }
    }
}

impl OrdinalFamily {
    pub fn sampled(eval: impl Fn(u64) -> Ordinal + Send + Sync + 'static, pattern: Pattern) -> Self {
        OrdinalFamily::Sampled { eval: Arc::new(eval), pattern }
    }

    pub fn at(&self, i: u64) -> Ordinal {
        match self {
            OrdinalFamily::Constant(a) => a.clone(),
            OrdinalFamily::Affine { a, b } => Ordinal::nat(a * i + b),
            OrdinalFamily::Sampled { eval, .. } => eval(i),
        }
    }

    /// Checks a sampled family against its declared pattern on `K` indices past
    /// the pattern's start.
    pub fn verify(&self, k: u64) -> Result<()> {
        let OrdinalFamily::Sampled { eval, pattern } = self else {
            return Ok(());
        };
        let (from, expect): (u64, Box<dyn Fn(u64) -> Ordinal>) = match pattern {
            Pattern::EventuallyConstant { from, value } => {
                let v = value.clone();
                (*from, Box::new(move |_| v.clone()))
            }
            Pattern::EventuallyAffine { from, a, b } => {
                let (a, b) = (*a, *b);
                (*from, Box::new(move |i| Ordinal::nat(a * i + b)))
            }
        };
        for i in from..from + k.max(1) {
            if eval(i) != expect(i) {
                return Err(Error::UnsupportedFamily(format!(
                    "sample {i} is {} but the declared pattern gives {}",
                    eval(i),
                    expect(i)
                )));
            }
        }
        Ok(())
    }
}

/// `Σ_{i<ω} α_i`, the supremum of the partial sums.
pub fn ord_inf_sum(f: &OrdinalFamily) -> Result<Ordinal> {
    ord_inf_sum_k(f, DEFAULT_SAMPLES)
}

pub fn ord_inf_sum_k(f: &OrdinalFamily, k: u64) -> Result<Ordinal> {
    match f {
        OrdinalFamily::Constant(a) => Ok(a.times_omega()),
        OrdinalFamily::Affine { a, b } => Ok(if a + b > 0 { Ordinal::omega() } else { Ordinal::zero() }),
        OrdinalFamily::Sampled { eval, pattern } => {
            f.verify(k)?;
            let (from, tail) = match pattern {
                Pattern::EventuallyConstant { from, value } => (*from, value.times_omega()),
                Pattern::EventuallyAffine { from, a, b } => {
                    // a·i + b summed from i = from on
                    let nonzero = *a > 0 || *b > 0;
                    (*from, if nonzero { Ordinal::omega() } else { Ordinal::zero() })
                }
            };
            let prefix = (0..from).fold(Ordinal::zero(), |acc, i| acc.add(&eval(i)));
            Ok(prefix.add(&tail))
        }
    }
}

/// The unique `(k, γ)` with `α_0 + ... + α_{k-1} + γ = β` and `γ < α_k`.
pub fn ord_decompose(beta: &Ordinal, f: &OrdinalFamily) -> Result<(u64, Ordinal)> {
    let total = ord_inf_sum(f)?;
    if beta >= &total {
        return Err(Error::pre(format!("{beta} is not below the sum {total}")));
    }
    ord_decompose_with(beta, |i| f.at(i))
}

/// Decomposition against a lazily evaluated sequence; the caller guarantees
/// that `β` lies below the infinite sum.
pub fn ord_decompose_with(beta: &Ordinal, mut at: impl FnMut(u64) -> Ordinal) -> Result<(u64, Ordinal)> {
    let mut partial = Ordinal::zero();
    for k in 0..u64::from(u32::MAX) {
        let next = partial.add(&at(k));
        if &next > beta {
            return Ok((k, partial.sub_left(beta)?));
        }
        partial = next;
    }
    Err(Error::pre(format!("{beta} was not reached by the partial sums")))
}

/// A sequence `0 < α_i < α` whose infinite sum is the limit ordinal `α`.
pub fn ord_cofinal_split(alpha: &Ordinal) -> Result<OrdinalFamily> {
    if !alpha.is_limit() {
        return Err(Error::pre(format!("{alpha} is not a limit ordinal")));
    }
    let mut terms = alpha.terms.clone();
    let last = terms.last_mut().unwrap();
    let e = last.0;
    last.1 -= 1;
    if last.1 == 0 {
        terms.pop();
    }
    let head = Ordinal { terms };
    let step = Ordinal::omega_pow(e - 1);
    if head.is_zero() {
        return Ok(OrdinalFamily::Constant(step));
    }
    let value = step.clone();
    Ok(OrdinalFamily::sampled(
        move |i| if i == 0 { head.clone() } else { step.clone() },
        Pattern::EventuallyConstant { from: 1, value },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(s: &str) -> Ordinal {
        s.parse().unwrap()
    }

    #[test]
    fn addition_absorbs() {
        assert_eq!(Ordinal::zero().add(&Ordinal::omega()), Ordinal::omega());
        assert_eq!(o("3").add(&o("w")), o("w"));
        assert_eq!(o("w*2 + 1").add(&o("w + 5")), o("w*3 + 5"));
        assert_eq!(o("w^2 + w").add(&o("w^2")), o("w^2*2"));
    }

    #[test]
    fn comparison() {
        assert_eq!(o("w").cmp(&o("w")), Ordering::Equal);
        assert!(o("w") > o("5"));
        assert!(o("w^2 + 1") > o("w*9"));
        assert!(o("w*2") > o("w + 100"));
    }

    #[test]
    fn text_round_trip() {
        for s in ["0", "7", "w", "w*3 + 2", "w^2*3 + w + 5", "w^4"] {
            assert_eq!(o(s).to_string(), s);
        }
        assert_eq!(o("w^1*1 + 0"), o("w"));
        assert!("w^".parse::<Ordinal>().is_err());
    }

    #[test]
    fn sub_left_inverts_add() {
        let a = o("w + 3");
        let b = o("w*2 + 1");
        let g = a.sub_left(&b).unwrap();
        assert_eq!(g, o("w + 1"));
        assert_eq!(a.add(&g), b);
        assert!(b.sub_left(&a).is_err());
    }

    #[test]
    fn inf_sums() {
        assert_eq!(ord_inf_sum(&OrdinalFamily::Constant(o("1"))).unwrap(), o("w"));
        assert_eq!(ord_inf_sum(&OrdinalFamily::Constant(o("w"))).unwrap(), o("w^2"));
        assert_eq!(ord_inf_sum(&OrdinalFamily::Affine { a: 2, b: 1 }).unwrap(), o("w"));
        assert_eq!(ord_inf_sum(&OrdinalFamily::Affine { a: 0, b: 0 }).unwrap(), o("0"));
        let lying = OrdinalFamily::sampled(
            |i| Ordinal::nat(i % 2),
            Pattern::EventuallyConstant { from: 0, value: o("1") },
        );
        assert!(matches!(ord_inf_sum(&lying), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn decompositions() {
        let w = OrdinalFamily::Constant(o("w"));
        assert_eq!(ord_decompose(&o("3"), &w).unwrap(), (0, o("3")));
        assert_eq!(ord_decompose(&o("5"), &OrdinalFamily::Constant(o("2"))).unwrap(), (2, o("1")));
        assert_eq!(ord_decompose(&o("w*2 + 3"), &w).unwrap(), (2, o("3")));
        assert!(ord_decompose(&o("w^2"), &w).is_err());
    }

    #[test]
    fn cofinal_splits() {
        let f = ord_cofinal_split(&o("w")).unwrap();
        assert!(matches!(f, OrdinalFamily::Constant(ref a) if *a == o("1")));
        let f = ord_cofinal_split(&o("w^2")).unwrap();
        assert!(matches!(f, OrdinalFamily::Constant(ref a) if *a == o("w")));
        let f = ord_cofinal_split(&o("w^2 + w")).unwrap();
        assert_eq!(f.at(0), o("w^2"));
        assert_eq!(f.at(5), o("1"));
        assert_eq!(ord_inf_sum(&f).unwrap(), o("w^2 + w"));
        assert!(ord_cofinal_split(&o("w + 1")).is_err());
        assert!(ord_cofinal_split(&o("0")).is_err());
    }
}
