//! Affine forms `c + Σ a_v·v` over named natural-valued index variables.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::term::Sym;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Affine {
    pub constant: u64,
    pub coeffs: BTreeMap<Sym, u64>,
}

impl Affine {
    pub fn constant(c: u64) -> Self {
        Affine { constant: c, coeffs: BTreeMap::new() }
    }

    pub fn var(v: &Sym) -> Self {
        Self::linear(v, 1, 0)
    }

    /// `a·v + b`
    pub fn linear(v: &Sym, a: u64, b: u64) -> Self {
        let mut coeffs = BTreeMap::new();
        if a > 0 {
            coeffs.insert(v.clone(), a);
        }
        Affine { constant: b, coeffs }
    }

    pub fn coeff(&self, v: &str) -> u64 {
        self.coeffs.get(v).copied().unwrap_or(0)
    }

    pub fn is_closed(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_const(&self) -> Option<u64> {
        self.is_closed().then_some(self.constant)
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.coeffs.contains_key(v)
    }

    pub fn add(&self, o: &Affine) -> Affine {
        let mut r = self.clone();
        r.constant += o.constant;
        for (v, a) in &o.coeffs {
            *r.coeffs.entry(v.clone()).or_insert(0) += a;
        }
        r
    }

    pub fn add_const(&self, c: u64) -> Affine {
        let mut r = self.clone();
        r.constant += c;
        r
    }

    pub fn scale(&self, k: u64) -> Affine {
        if k == 0 {
            return Affine::constant(0);
        }
        Affine {
            constant: self.constant * k,
            coeffs: self.coeffs.iter().map(|(v, a)| (v.clone(), a * k)).collect(),
        }
    }

    pub fn sub_const(&self, c: u64) -> Option<Affine> {
        let mut r = self.clone();
        r.constant = r.constant.checked_sub(c)?;
        Some(r)
    }

    /// Substitutes the bound values of `env`.
    pub fn subst_env(&self, env: &BTreeMap<Sym, u64>) -> Affine {
        env.iter().fold(self.clone(), |a, (v, n)| a.subst(v, &Affine::constant(*n)))
    }

    /// Substitutes the affine form `e` for `v`.
    pub fn subst(&self, v: &str, e: &Affine) -> Affine {
        let Some(&a) = self.coeffs.get(v) else {
            return self.clone();
        };
        let mut rest = self.clone();
        rest.coeffs.remove(v);
        rest.add(&e.scale(a))
    }

    pub fn eval(&self, env: &BTreeMap<Sym, u64>) -> Option<u64> {
        let mut acc = self.constant;
        for (v, a) in &self.coeffs {
            acc += a * env.get(v)?;
        }
        Some(acc)
    }

    /// Parses sums of `c`, `v`, `c*v` and `v*c`.
    pub fn parse(s: &str) -> Result<Affine> {
        let bad = |what: &str| Error::Parse { line: 1, col: 1, expected: format!("affine form ({what}) in `{s}`") };
        let mut acc = Affine::constant(0);
        for part in s.split('+') {
            let part: String = part.chars().filter(|c| !c.is_whitespace()).collect();
            if part.is_empty() {
                return Err(bad("empty summand"));
            }
            let factors: Vec<&str> = part.split('*').collect();
            let mut coef = 1u64;
            let mut var: Option<&str> = None;
            for f in &factors {
                if let Ok(n) = f.parse::<u64>() {
                    coef *= n;
                } else if is_ident(f) && var.is_none() {
                    var = Some(f);
                } else {
                    return Err(bad("factor"));
                }
            }
            acc = match var {
                Some(v) => acc.add(&Affine::linear(&Sym::from(v), coef, 0)),
                None => acc.add_const(coef),
            };
        }
        Ok(acc)
    }
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_') && cs.all(|c| c.is_alphanumeric() || c == '_')
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .coeffs
            .iter()
            .map(|(v, a)| if *a == 1 { v.to_string() } else { format!("{a}*{v}") })
            .collect();
        if self.constant > 0 || parts.is_empty() {
            parts.push(self.constant.to_string());
        }
        write!(f, "{}", parts.join("+"))
    }
}

impl fmt::Debug for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A minimum of affine forms; the empty minimum stands for ω.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MinForm(pub Vec<Affine>);

impl MinForm {
    pub fn omega() -> Self {
        MinForm(Vec::new())
    }

    pub fn nat(n: u64) -> Self {
        MinForm(vec![Affine::constant(n)])
    }

    pub fn min(mut self, o: MinForm) -> MinForm {
        for a in o.0 {
            if !self.0.contains(&a) {
                self.0.push(a);
            }
        }
        self.simplify()
    }

    pub fn add(&self, e: &Affine) -> MinForm {
        MinForm(self.0.iter().map(|a| a.add(e)).collect())
    }

    pub fn subst(&self, v: &str, e: &Affine) -> MinForm {
        MinForm(self.0.iter().map(|a| a.subst(v, e)).collect()).simplify()
    }

    /// Grows without bound in `v` (every form has a positive coefficient on it).
    pub fn diverges_in(&self, v: &str) -> bool {
        self.0.iter().all(|a| a.coeff(v) > 0)
    }

    /// Value when every variable is 0; forms are monotone so this is the
    /// minimum over all instances.
    pub fn at_zero(&self) -> Option<u64> {
        self.0.iter().map(|a| a.constant).min()
    }

    pub fn eval(&self, env: &BTreeMap<Sym, u64>) -> Option<Option<u64>> {
        let mut best: Option<u64> = None;
        for a in &self.0 {
            let x = a.eval(env)?;
            best = Some(best.map_or(x, |b| b.min(x)));
        }
        Some(best)
    }

    fn simplify(mut self) -> MinForm {
        // drop forms dominated pointwise by another form
        let forms = self.0.clone();
        self.0.retain(|a| {
            !forms.iter().any(|b| {
                b != a && b.constant <= a.constant && b.coeffs.iter().all(|(v, c)| a.coeff(v) >= *c)
            })
        });
        self.0.sort();
        self.0.dedup();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let a = Affine::parse("2*i + 1").unwrap();
        assert_eq!(a.to_string(), "2*i+1");
        assert_eq!(Affine::parse("n+i").unwrap().to_string(), "i+n");
        assert_eq!(Affine::parse("3").unwrap().as_const(), Some(3));
        assert!(Affine::parse("i*j").is_err());
    }

    #[test]
    fn substitution() {
        let i: Sym = "i".into();
        let a = Affine::parse("2*i+1").unwrap();
        assert_eq!(a.subst("i", &Affine::var(&i).add_const(1)).to_string(), "2*i+3");
        assert_eq!(a.subst("i", &Affine::constant(2)).as_const(), Some(5));
    }

    #[test]
    fn min_forms() {
        let m = MinForm(vec![Affine::parse("i+2").unwrap()]).min(MinForm(vec![Affine::parse("2*i+1").unwrap()]));
        assert_eq!(m.at_zero(), Some(1));
        assert!(m.diverges_in("i"));
        assert!(!m.min(MinForm::nat(3)).diverges_in("i"));
        assert!(MinForm::omega().diverges_in("i"));
    }
}
