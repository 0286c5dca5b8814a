//! Proof terms and proof-term templates.
//!
//! A proof term is a tree of multisteps, binary compositions, infinite
//! compositions, and function or rule symbols applied to proof terms. An
//! infinite composition `⊙ψ_i` stores an explicit prefix `ψ_0..ψ_{k-1}`
//! followed by a template body instantiated at `i = 0, 1, ...` for the
//! remaining elements. Templates may use `Iter`, the iterated wrapping
//! `C^e[ψ]` with an affine exponent over index variables.

use std::collections::BTreeSet;
use std::fmt;

use crate::affine::Affine;
use crate::error::{Error, Result};
use crate::family::iterate_ctx;
use crate::ordinal::DEFAULT_SAMPLES;
use crate::term::{sym, Label, Signature, Sym, Term};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Pt {
    MStep(Term),
    Comp(Box<Pt>, Box<Pt>),
    Inf(Family),
    Fun(Sym, Vec<Pt>),
    Rule(Sym, Vec<Pt>),
    Iter(Term, Affine, Box<Pt>),
}

/// `⊙ψ_i`: `prefix[i]` for `i < prefix.len()`, then `body[var := i - len]`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Family {
    pub prefix: Vec<Pt>,
    pub var: Sym,
    pub body: Box<Pt>,
}

/// Outcome of comparing two proof terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cmp {
    Equal,
    /// Equal on every checked instance of some family.
    EqualSampled,
    Different,
}

impl Cmp {
    pub fn holds(self) -> bool {
        self != Cmp::Different
    }

    pub fn and(self, o: Cmp) -> Cmp {
        self.max(o)
    }
}

fn fresh_var(base: &Sym, avoid: &BTreeSet<Sym>) -> Sym {
    let mut name = format!("{base}'");
    while avoid.contains(name.as_str()) {
        name.push('\'');
    }
    sym(&name)
}

impl Family {
    pub fn new(prefix: Vec<Pt>, var: &str, body: Pt) -> Family {
        Family { prefix, var: sym(var), body: Box::new(body) }
    }

    pub fn instance(&self, n: u64) -> Result<Pt> {
        let k = self.prefix.len() as u64;
        if n < k {
            Ok(self.prefix[n as usize].clone())
        } else {
            self.body.instantiate(&self.var, n - k)
        }
    }

    /// The family without its first `k` elements.
    pub fn drop_first(&self, k: u64) -> Result<Family> {
        let len = self.prefix.len() as u64;
        if k <= len {
            return Ok(Family { prefix: self.prefix[k as usize..].to_vec(), var: self.var.clone(), body: self.body.clone() });
        }
        let shift = Affine::var(&self.var).add_const(k - len);
        Ok(Family { prefix: vec![], var: self.var.clone(), body: Box::new(self.body.subst_var(&self.var, &shift)?) })
    }

    /// `(ψ_0, ⊙ψ_{1+i})`.
    pub fn uncons(&self) -> Result<(Pt, Family)> {
        Ok((self.instance(0)?, self.drop_first(1)?))
    }

    /// Moves body instances into the prefix until it has length `k`.
    pub fn with_prefix_len(&self, k: usize) -> Result<Family> {
        if self.prefix.len() >= k {
            return Ok(self.clone());
        }
        let extra = (k - self.prefix.len()) as u64;
        let mut prefix = self.prefix.clone();
        for n in 0..extra {
            prefix.push(self.body.instantiate(&self.var, n)?);
        }
        let shift = Affine::var(&self.var).add_const(extra);
        Ok(Family { prefix, var: self.var.clone(), body: Box::new(self.body.subst_var(&self.var, &shift)?) })
    }

    pub fn rename(&self, v: &Sym) -> Result<Family> {
        if *v == self.var {
            return Ok(self.clone());
        }
        Ok(Family { prefix: self.prefix.clone(), var: v.clone(), body: Box::new(self.body.subst_var(&self.var, &Affine::var(v))?) })
    }
}

impl Pt {
    pub fn mstep(t: Term) -> Pt {
        Pt::MStep(t)
    }

    pub fn is_mstep(&self) -> bool {
        matches!(self, Pt::MStep(_))
    }

    pub fn as_mstep(&self) -> Option<&Term> {
        match self {
            Pt::MStep(t) => Some(t),
            _ => None,
        }
    }

    /// `a · b`; a right operand that is an infinite composition absorbs `a`
    /// as its first element.
    pub fn comp(a: Pt, b: Pt) -> Pt {
        match b {
            Pt::Inf(mut f) => {
                f.prefix.insert(0, a);
                Pt::Inf(f)
            }
            b => Pt::Comp(Box::new(a), Box::new(b)),
        }
    }

    /// Right-nested composition of a non-empty list.
    pub fn comps(items: Vec<Pt>) -> Pt {
        let mut it = items.into_iter().rev();
        let last = it.next().expect("non-empty composition");
        it.fold(last, |acc, x| Pt::comp(x, acc))
    }

    pub fn inf(prefix: Vec<Pt>, var: &str, body: Pt) -> Pt {
        Pt::Inf(Family::new(prefix, var, body))
    }

    fn app_with(f: Sym, kids: Vec<Pt>, rule: bool) -> Pt {
        if kids.iter().all(Pt::is_mstep) {
            let ts = kids
                .into_iter()
                .map(|k| match k {
                    Pt::MStep(t) => t,
                    _ => unreachable!(),
                })
                .collect();
            Pt::MStep(Term::app_sym(f, ts))
        } else if rule {
            Pt::Rule(f, kids)
        } else {
            Pt::Fun(f, kids)
        }
    }

    pub fn fun(f: &str, kids: Vec<Pt>) -> Pt {
        Self::app_with(sym(f), kids, false)
    }

    pub fn rule(mu: &str, kids: Vec<Pt>) -> Pt {
        Self::app_with(sym(mu), kids, true)
    }

    pub fn fun_s(f: Sym, kids: Vec<Pt>) -> Pt {
        Self::app_with(f, kids, false)
    }

    pub fn rule_s(mu: Sym, kids: Vec<Pt>) -> Pt {
        Self::app_with(mu, kids, true)
    }

    /// Function or rule application according to `sig`.
    pub fn app(sig: &Signature, f: &Sym, kids: Vec<Pt>) -> Pt {
        Self::app_with(f.clone(), kids, sig.is_rule(f))
    }

    /// `C^e[ψ]`; closed exponents are unrolled.
    pub fn iter(c: Term, e: Affine, body: Pt) -> Result<Pt> {
        let holes = c.hole_positions()?;
        if holes.len() != 1 {
            return Err(Error::pre(format!("context {c} must have exactly one hole")));
        }
        match e.as_const() {
            Some(n) => match body {
                Pt::MStep(t) => Ok(Pt::MStep(iterate_ctx(&c, n, &t)?)),
                body => {
                    let mut acc = body;
                    for _ in 0..n {
                        acc = Pt::plug(&c, vec![acc])?;
                    }
                    Ok(acc)
                }
            },
            None => Ok(Pt::Iter(c, e, Box::new(body))),
        }
    }

    /// `C[ψ_1, ..., ψ_n]` for a context over function symbols.
    pub fn plug(c: &Term, args: Vec<Pt>) -> Result<Pt> {
        if args.iter().all(Pt::is_mstep) {
            let ts: Vec<Term> = args.iter().map(|a| a.as_mstep().unwrap().clone()).collect();
            return Ok(Pt::MStep(c.fill(&ts)?));
        }
        let holes = c.hole_positions()?;
        if holes.len() != args.len() {
            return Err(Error::ArityMismatch { expected: holes.len(), found: args.len() });
        }
        let mut slots: Vec<Option<Pt>> = args.into_iter().map(Some).collect();
        fn go(
            c: &Term,
            n: usize,
            p: crate::position::Position,
            holes: &[crate::position::Position],
            slots: &mut [Option<Pt>],
        ) -> Pt {
            if *c.label_at(n) == Label::Hole {
                let i = holes.iter().position(|h| *h == p).unwrap();
                return slots[i].take().unwrap();
            }
            if !holes.iter().any(|h| p.is_prefix_of(h)) {
                return Pt::MStep(c.at(n));
            }
            let f = c.label_at(n).as_sym().expect("context over symbols").clone();
            let kids = c
                .kids_at(n)
                .iter()
                .enumerate()
                .map(|(j, &k)| go(c, k, p.child(j as u32 + 1), holes, slots))
                .collect();
            Pt::fun_s(f, kids)
        }
        Ok(go(c, 0, crate::position::Position::root(), &holes, &mut slots))
    }

    /// Index variables occurring free.
    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Pt::MStep(_) => {}
            Pt::Comp(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            Pt::Inf(f) => {
                for p in &f.prefix {
                    p.collect_free(out);
                }
                let mut inner = BTreeSet::new();
                f.body.collect_free(&mut inner);
                inner.remove(&f.var);
                out.extend(inner);
            }
            Pt::Fun(_, ks) | Pt::Rule(_, ks) => ks.iter().for_each(|k| k.collect_free(out)),
            Pt::Iter(_, e, b) => {
                out.extend(e.coeffs.keys().cloned());
                b.collect_free(out);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Capture-avoiding substitution of an affine form for an index variable.
    pub fn subst_var(&self, v: &str, e: &Affine) -> Result<Pt> {
        Ok(match self {
            Pt::MStep(_) => self.clone(),
            Pt::Comp(a, b) => Pt::comp(a.subst_var(v, e)?, b.subst_var(v, e)?),
            Pt::Inf(f) => {
                let prefix = f.prefix.iter().map(|p| p.subst_var(v, e)).collect::<Result<Vec<_>>>()?;
                if &*f.var == v {
                    Pt::Inf(Family { prefix, var: f.var.clone(), body: f.body.clone() })
                } else if e.mentions(&f.var) {
                    let mut avoid: BTreeSet<Sym> = e.coeffs.keys().cloned().collect();
                    avoid.extend(f.body.free_vars());
                    let w = fresh_var(&f.var, &avoid);
                    let body = f.body.subst_var(&f.var, &Affine::var(&w))?.subst_var(v, e)?;
                    Pt::Inf(Family { prefix, var: w, body: Box::new(body) })
                } else {
                    Pt::Inf(Family { prefix, var: f.var.clone(), body: Box::new(f.body.subst_var(v, e)?) })
                }
            }
            Pt::Fun(f, ks) => Pt::fun_s(f.clone(), ks.iter().map(|k| k.subst_var(v, e)).collect::<Result<_>>()?),
            Pt::Rule(f, ks) => Pt::rule_s(f.clone(), ks.iter().map(|k| k.subst_var(v, e)).collect::<Result<_>>()?),
            Pt::Iter(c, x, b) => Pt::iter(c.clone(), x.subst(v, e), b.subst_var(v, e)?)?,
        })
    }

    pub fn instantiate(&self, v: &str, n: u64) -> Result<Pt> {
        self.subst_var(v, &Affine::constant(n))
    }

    /// Unrolls one layer of a template `Iter` whose exponent is at least 1.
    pub fn unroll_iter(&self) -> Result<Option<Pt>> {
        match self {
            Pt::Iter(c, e, b) if e.constant >= 1 => {
                let inner = Pt::iter(c.clone(), Affine { constant: e.constant - 1, coeffs: e.coeffs.clone() }, (**b).clone())?;
                Ok(Some(Pt::plug(c, vec![inner])?))
            }
            _ => Ok(None),
        }
    }

    /// Views the root as a binary composition: `Comp` directly, and an
    /// infinite composition as `ψ_0 · ⊙ψ_{1+i}`.
    pub fn as_comp(&self) -> Result<Option<(Pt, Pt)>> {
        match self {
            Pt::Comp(a, b) => Ok(Some(((**a).clone(), (**b).clone()))),
            Pt::Inf(f) => {
                let (h, rest) = f.uncons()?;
                Ok(Some((h, Pt::Inf(rest))))
            }
            _ => Ok(None),
        }
    }

    /// Views the root as a symbol applied to proof terms; a multistep with a
    /// symbol at the root counts, with multistep arguments.
    pub fn as_app(&self) -> Result<Option<(Sym, Vec<Pt>)>> {
        match self {
            Pt::Fun(f, ks) | Pt::Rule(f, ks) => Ok(Some((f.clone(), ks.clone()))),
            Pt::MStep(t) => Ok(t.root_sym().map(|f| (f.clone(), t.args().into_iter().map(Pt::MStep).collect()))),
            Pt::Iter(..) => match self.unroll_iter()? {
                Some(p) => p.as_app(),
                None => Ok(None),
            },
            _ => Ok(None),
        }
    }

    /// Number of constructor nodes, counting each template once.
    pub fn size(&self) -> usize {
        match self {
            Pt::MStep(t) => t.len(),
            Pt::Comp(a, b) => 1 + a.size() + b.size(),
            Pt::Inf(f) => 1 + f.prefix.iter().map(Pt::size).sum::<usize>() + f.body.size(),
            Pt::Fun(_, ks) | Pt::Rule(_, ks) => 1 + ks.iter().map(Pt::size).sum::<usize>(),
            Pt::Iter(c, _, b) => c.len() + b.size(),
        }
    }

    /// Flattens nested binary compositions; infinite compositions are kept
    /// as a single trailing element.
    pub fn comp_list(&self) -> Vec<Pt> {
        let mut out = vec![];
        let mut cur = self.clone();
        loop {
            match cur {
                Pt::Comp(a, b) => {
                    out.extend(a.comp_list());
                    cur = *b;
                }
                other => {
                    out.push(other);
                    return out;
                }
            }
        }
    }
}

/// Equality of the proof-term trees denoted. Infinite compositions are
/// aligned and their bodies compared structurally; if that fails they are
/// compared on the first `k` instances.
pub fn pt_cmp(a: &Pt, b: &Pt, k: u64) -> Result<Cmp> {
    if a == b {
        return Ok(Cmp::Equal);
    }
    match (a, b) {
        (Pt::MStep(_), Pt::MStep(_)) => Ok(Cmp::Different),
        (Pt::Comp(a1, a2), Pt::Comp(b1, b2)) => Ok(pt_cmp(a1, b1, k)?.and(pt_cmp(a2, b2, k)?)),
        (Pt::Inf(f), Pt::Inf(g)) => {
            let n = f.prefix.len().max(g.prefix.len());
            let (f, g) = (f.with_prefix_len(n)?, g.with_prefix_len(n)?);
            let mut acc = Cmp::Equal;
            for (x, y) in f.prefix.iter().zip(&g.prefix) {
                acc = acc.and(pt_cmp(x, y, k)?);
                if acc == Cmp::Different {
                    return Ok(acc);
                }
            }
            let g = g.rename(&f.var)?;
            if f.body == g.body {
                return Ok(acc);
            }
            for i in 0..k {
                let c = pt_cmp(&f.body.instantiate(&f.var, i)?, &g.body.instantiate(&g.var, i)?, k)?;
                if c == Cmp::Different {
                    return Ok(c);
                }
            }
            Ok(Cmp::EqualSampled)
        }
        (Pt::Comp(..), Pt::Inf(_)) | (Pt::Inf(_), Pt::Comp(..)) => {
            let (a1, a2) = a.as_comp()?.unwrap();
            let (b1, b2) = b.as_comp()?.unwrap();
            let c = pt_cmp(&a1, &b1, k)?;
            if c == Cmp::Different {
                return Ok(c);
            }
            // two infinite tails never reduce to Comp/Comp again, so this terminates
            Ok(c.and(pt_cmp(&a2, &b2, k)?))
        }
        (Pt::Fun(f, fs), Pt::Fun(g, gs)) | (Pt::Rule(f, fs), Pt::Rule(g, gs)) => {
            if f != g || fs.len() != gs.len() {
                return Ok(Cmp::Different);
            }
            let mut acc = Cmp::Equal;
            for (x, y) in fs.iter().zip(gs) {
                acc = acc.and(pt_cmp(x, y, k)?);
                if acc == Cmp::Different {
                    break;
                }
            }
            Ok(acc)
        }
        (Pt::Iter(..), _) | (_, Pt::Iter(..)) => {
            let a2 = a.unroll_iter()?;
            let b2 = b.unroll_iter()?;
            match (a2, b2) {
                (Some(x), _) if !matches!(b, Pt::Iter(..)) => pt_cmp(&x, b, k),
                (_, Some(y)) if !matches!(a, Pt::Iter(..)) => pt_cmp(a, &y, k),
                _ => Ok(Cmp::Different),
            }
        }
        _ => Ok(Cmp::Different),
    }
}

pub fn pt_eq(a: &Pt, b: &Pt) -> Result<Cmp> {
    pt_cmp(a, b, DEFAULT_SAMPLES)
}

impl fmt::Display for Pt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pt::MStep(t) => write!(f, "{t}"),
            Pt::Comp(a, b) => {
                if matches!(**a, Pt::Comp(..) | Pt::Inf(_)) {
                    write!(f, "({a}); {b}")
                } else {
                    write!(f, "{a}; {b}")
                }
            }
            Pt::Inf(fam) => {
                for p in &fam.prefix {
                    if matches!(p, Pt::Comp(..) | Pt::Inf(_)) {
                        write!(f, "({p}); ")?;
                    } else {
                        write!(f, "{p}; ")?;
                    }
                }
                write!(f, "conc({}){{ {} }}", fam.var, fam.body)
            }
            Pt::Fun(s, ks) | Pt::Rule(s, ks) => {
                write!(f, "{s}(")?;
                for (i, k) in ks.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, ")")
            }
            Pt::Iter(c, e, b) => write!(f, "iter({c}, {e}, {b})"),
        }
    }
}
