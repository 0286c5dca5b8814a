//! Indexed term families `⟨t_i⟩` given by templates, and their limits.

use std::collections::BTreeMap;
use std::fmt;

use crate::affine::Affine;
use crate::error::{Error, Result};
use crate::term::{sym, Label, Sym, Term};

/// A term template over natural index variables. Variables occur only in
/// `Iter` exponents, except for `Sampled`, which lists explicit instances.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum TermFamily {
    Const(Term),
    Sym(Sym, Vec<TermFamily>),
    /// `C^e[t]` for a context `C` with one hole.
    Iter(Term, Affine, Box<TermFamily>),
    /// A term whose variables are filled by subfamilies.
    Graft(Term, BTreeMap<Sym, TermFamily>),
    /// Instances `0..n` of the index variable with no declared pattern.
    Sampled(Sym, Vec<Term>),
}

fn hole_depth(c: &Term) -> Result<usize> {
    let hs = c.hole_positions()?;
    match hs.as_slice() {
        [p] => Ok(p.depth()),
        _ => Err(Error::pre(format!("context {c} must have exactly one hole"))),
    }
}

/// `C^n[t]`.
pub fn iterate_ctx(c: &Term, n: u64, t: &Term) -> Result<Term> {
    let mut acc = t.clone();
    for _ in 0..n {
        acc = c.fill(std::slice::from_ref(&acc))?;
    }
    Ok(acc)
}

impl TermFamily {
    pub fn sym(f: &str, kids: Vec<TermFamily>) -> TermFamily {
        Self::sym_s(sym(f), kids)
    }

    pub fn sym_s(f: Sym, kids: Vec<TermFamily>) -> TermFamily {
        if kids.iter().all(|k| matches!(k, TermFamily::Const(_))) {
            let ts = kids
                .into_iter()
                .map(|k| match k {
                    TermFamily::Const(t) => t,
                    _ => unreachable!(),
                })
                .collect();
            TermFamily::Const(Term::app_sym(f, ts))
        } else {
            TermFamily::Sym(f, kids)
        }
    }

    pub fn iter(c: Term, e: Affine, body: TermFamily) -> Result<TermFamily> {
        hole_depth(&c)?;
        match (e.as_const(), &body) {
            (Some(n), TermFamily::Const(t)) => Ok(TermFamily::Const(iterate_ctx(&c, n, t)?)),
            _ => Ok(TermFamily::Iter(c, e, Box::new(body))),
        }
    }

    pub fn graft(t: Term, mut subs: BTreeMap<Sym, TermFamily>) -> TermFamily {
        if let Label::Var(x) = t.label() {
            if let Some(k) = subs.remove(x) {
                return k;
            }
        }
        if subs.values().all(|k| matches!(k, TermFamily::Const(_))) {
            let s = subs
                .into_iter()
                .map(|(x, k)| match k {
                    TermFamily::Const(u) => (x, u),
                    _ => unreachable!(),
                })
                .collect();
            TermFamily::Const(t.subst(&s))
        } else {
            TermFamily::Graft(t, subs)
        }
    }

    pub fn as_const(&self) -> Option<&Term> {
        match self {
            TermFamily::Const(t) => Some(t),
            _ => None,
        }
    }

    pub fn eval(&self, env: &BTreeMap<Sym, u64>) -> Result<Term> {
        match self {
            TermFamily::Const(t) => Ok(t.clone()),
            TermFamily::Sym(f, ks) => {
                Ok(Term::app_sym(f.clone(), ks.iter().map(|k| k.eval(env)).collect::<Result<_>>()?))
            }
            TermFamily::Iter(c, e, b) => {
                let n = e.eval(env).ok_or_else(|| Error::pre(format!("unbound index in exponent {e}")))?;
                iterate_ctx(c, n, &b.eval(env)?)
            }
            TermFamily::Graft(t, subs) => {
                let s = subs.iter().map(|(x, k)| Ok((x.clone(), k.eval(env)?))).collect::<Result<_>>()?;
                Ok(t.subst(&s))
            }
            TermFamily::Sampled(v, ts) => {
                let i = *env.get(v).ok_or_else(|| Error::pre(format!("unbound index {v}")))?;
                ts.get(i as usize)
                    .cloned()
                    .ok_or_else(|| Error::UnsupportedFamily(format!("no sample for {v} = {i}")))
            }
        }
    }

    pub fn at(&self, v: &str, i: u64) -> Result<Term> {
        let mut env = BTreeMap::new();
        env.insert(sym(v), i);
        self.eval(&env)
    }

    /// Substitutes an affine form for an index variable.
    pub fn subst_var(&self, v: &str, e: &Affine) -> Result<TermFamily> {
        Ok(match self {
            TermFamily::Const(_) => self.clone(),
            TermFamily::Sym(f, ks) => {
                TermFamily::sym_s(f.clone(), ks.iter().map(|k| k.subst_var(v, e)).collect::<Result<_>>()?)
            }
            TermFamily::Iter(c, x, b) => TermFamily::iter(c.clone(), x.subst(v, e), b.subst_var(v, e)?)?,
            TermFamily::Graft(t, subs) => TermFamily::graft(
                t.clone(),
                subs.iter().map(|(x, k)| Ok((x.clone(), k.subst_var(v, e)?))).collect::<Result<_>>()?,
            ),
            TermFamily::Sampled(w, ts) if &**w == v => match e.as_const() {
                Some(n) => TermFamily::Const(
                    ts.get(n as usize)
                        .cloned()
                        .ok_or_else(|| Error::UnsupportedFamily(format!("no sample for {v} = {n}")))?,
                ),
                None if e.coeffs.len() == 1 && e.coeff(v) == 1 => {
                    TermFamily::Sampled(w.clone(), ts.iter().skip(e.constant as usize).cloned().collect())
                }
                None => return Err(Error::UnsupportedFamily("reindexing a sampled family".into())),
            },
            TermFamily::Sampled(..) => self.clone(),
        })
    }

    pub fn mentions(&self, v: &str) -> bool {
        match self {
            TermFamily::Const(_) => false,
            TermFamily::Sym(_, ks) => ks.iter().any(|k| k.mentions(v)),
            TermFamily::Iter(_, e, b) => e.mentions(v) || b.mentions(v),
            TermFamily::Graft(_, subs) => subs.values().any(|k| k.mentions(v)),
            TermFamily::Sampled(w, _) => &**w == v,
        }
    }

    /// `lim_{v→ω}`. An `Iter` whose exponent grows in `v` tends to `C^ω`;
    /// everything else is continuous in its subfamilies.
    pub fn limit(&self, v: &str) -> Result<TermFamily> {
        Ok(match self {
            TermFamily::Const(_) => self.clone(),
            TermFamily::Sym(f, ks) => {
                TermFamily::sym_s(f.clone(), ks.iter().map(|k| k.limit(v)).collect::<Result<_>>()?)
            }
            TermFamily::Iter(c, e, b) => {
                if e.coeff(v) > 0 {
                    if hole_depth(c)? == 0 {
                        return Err(Error::NonConvergent(format!("context {c} has its hole at the root")));
                    }
                    TermFamily::Const(Term::ctx_omega(c)?)
                } else {
                    TermFamily::iter(c.clone(), e.clone(), b.limit(v)?)?
                }
            }
            TermFamily::Graft(t, subs) => TermFamily::graft(
                t.clone(),
                subs.iter().map(|(x, k)| Ok((x.clone(), k.limit(v)?))).collect::<Result<_>>()?,
            ),
            TermFamily::Sampled(w, ts) if &**w == v => {
                let last = ts.last().ok_or_else(|| Error::NonConvergent("empty sample list".into()))?;
                let half = ts.len() / 2;
                if ts[half..].iter().all(|t| t == last) {
                    TermFamily::Const(last.clone())
                } else {
                    return Err(Error::NonConvergent(format!("samples of {v} do not stabilise")));
                }
            }
            TermFamily::Sampled(..) => self.clone(),
        })
    }

    pub fn subst_env(&self, env: &BTreeMap<Sym, u64>) -> Result<TermFamily> {
        env.iter().try_fold(self.clone(), |f, (v, n)| f.subst_var(v, &Affine::constant(*n)))
    }

    /// The `j`-th argument (1-based) of every instance; `None` when the root
    /// symbol is not uniform in the indices.
    pub fn arg(&self, j: usize) -> Result<Option<TermFamily>> {
        let oob = || Error::PositionOutOfDomain(format!("argument {j} of {self}"));
        Ok(match self {
            TermFamily::Const(t) => {
                if j == 0 || j > t.arity() {
                    return Err(oob());
                }
                Some(TermFamily::Const(t.arg(j - 1)))
            }
            TermFamily::Sym(_, ks) => Some(ks.get(j.wrapping_sub(1)).ok_or_else(oob)?.clone()),
            TermFamily::Iter(c, e, b) => match e.sub_const(1) {
                Some(e1) => TermFamily::wrap(c, TermFamily::iter(c.clone(), e1, (**b).clone())?)?.arg(j)?,
                None => None,
            },
            TermFamily::Graft(t, subs) => match t.label() {
                Label::Var(x) => match subs.get(x) {
                    Some(k) => k.arg(j)?,
                    None => return Err(oob()),
                },
                _ => {
                    if j == 0 || j > t.arity() {
                        return Err(oob());
                    }
                    let u = t.arg(j - 1);
                    let keep = u.vars();
                    Some(TermFamily::graft(u, subs.iter().filter(|(x, _)| keep.contains(*x)).map(|(x, k)| (x.clone(), k.clone())).collect()))
                }
            },
            TermFamily::Sampled(v, ts) => {
                let heads: Vec<_> = ts.iter().map(|t| (t.label().clone(), t.arity())).collect();
                if heads.windows(2).any(|w| w[0] != w[1]) {
                    return Ok(None);
                }
                if j == 0 || ts.first().is_some_and(|t| j > t.arity()) {
                    return Err(oob());
                }
                Some(TermFamily::Sampled(v.clone(), ts.iter().map(|t| t.arg(j - 1)).collect()))
            }
        })
    }

    /// A context `C[x]` as a one-hole template, used for `Graft`.
    pub fn wrap(c: &Term, inner: TermFamily) -> Result<TermFamily> {
        let x = sym("□");
        let t = c.fill(&[Term::leaf(Label::Var(x.clone()))])?;
        let mut m = BTreeMap::new();
        m.insert(x, inner);
        Ok(TermFamily::graft(t, m))
    }
}

impl fmt::Display for TermFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermFamily::Const(t) => write!(f, "{t}"),
            TermFamily::Sym(s, ks) => {
                write!(f, "{s}(")?;
                for (i, k) in ks.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, ")")
            }
            TermFamily::Iter(c, e, b) => write!(f, "iter({c}, {e}, {b})"),
            TermFamily::Graft(t, subs) => {
                write!(f, "{t}[")?;
                for (i, (x, k)) in subs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x} := {k}")?;
                }
                write!(f, "]")
            }
            TermFamily::Sampled(v, ts) => {
                let ts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                write!(f, "sampled({v}; {})", ts.join(" | "))
            }
        }
    }
}

pub fn eval_term_family(f: &TermFamily, var: &str, i: u64) -> Result<Term> {
    f.at(var, i)
}

pub fn limit_of_family(f: &TermFamily, var: &str) -> Result<Term> {
    match f.limit(var)? {
        TermFamily::Const(t) => Ok(t),
        other => Err(Error::pre(format!("limit {other} still depends on other indices"))),
    }
}
