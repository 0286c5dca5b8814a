//! Rules, term rewriting systems, redexes and single reduction steps.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::position::Position;
use crate::term::{sym, Label, Signature, Sym, SymKind, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: Sym,
    pub lhs: Term,
    pub rhs: Term,
    /// Variables of the lhs in left-to-right order of first occurrence.
    pub vars: Vec<Sym>,
}

impl Rule {
    pub fn new(name: &str, lhs: Term, rhs: Term) -> Result<Rule> {
        let bad = |why: &str| Error::pre(format!("rule {name}: {why}"));
        if !lhs.is_finite() {
            return Err(bad("left-hand side must be finite"));
        }
        if lhs.is_var() {
            return Err(bad("left-hand side must not be a variable"));
        }
        if lhs.has_holes() || rhs.has_holes() {
            return Err(bad("holes are not allowed in rules"));
        }
        let mut vars: Vec<Sym> = Vec::new();
        let mut ps = lhs.positions()?;
        ps.sort();
        for p in ps {
            if let Label::Var(x) = lhs.label_of(&p)? {
                if !vars.contains(x) {
                    vars.push(x.clone());
                }
            }
        }
        if rhs.vars().iter().any(|x| !vars.contains(x)) {
            return Err(bad("right-hand side variables must occur on the left"));
        }
        Ok(Rule { name: sym(name), lhs, rhs, vars })
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// `Some(j)` when the rhs is the variable `x_j` (0-based).
    pub fn collapse_index(&self) -> Option<usize> {
        match self.rhs.label() {
            Label::Var(x) => self.vars.iter().position(|v| v == x),
            _ => None,
        }
    }

    pub fn is_collapsing(&self) -> bool {
        self.rhs.is_var()
    }

    pub fn is_left_linear(&self) -> bool {
        self.lhs.is_linear()
    }

    /// Pattern depth of the lhs.
    pub fn pdepth(&self) -> usize {
        self.lhs.pattern_info().map(|x| x.1.unwrap_or(0)).unwrap_or(0)
    }

    /// `μ(x1..xn)` as a term over the rule symbol.
    pub fn head_term(&self) -> Term {
        Term::app_sym(self.name.clone(), self.vars.iter().map(|x| Term::var(x)).collect())
    }

    /// Variables of the rhs, as 0-based argument indices.
    pub fn rhs_indices(&self) -> Vec<usize> {
        let rv = self.rhs.vars();
        (0..self.vars.len()).filter(|&j| rv.contains(&self.vars[j])).collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrsFlags {
    pub left_linear: bool,
    pub orthogonal: bool,
    pub disjoint: bool,
    pub has_collapsing: bool,
    pub max_pdepth: usize,
}

/// A signature of function symbols plus rules; rule names are added to the
/// signature as rule symbols whose arity is the number of lhs variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trs {
    pub sig: Signature,
    pub rules: Vec<Rule>,
    index: BTreeMap<Sym, usize>,
}

impl Trs {
    pub fn new(functions: Signature, rules: Vec<Rule>) -> Result<Trs> {
        let mut sig = Signature::new();
        for (f, a) in functions.functions() {
            sig.add(f, a, SymKind::Function)?;
        }
        let mut index = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            r.lhs.check_signature(&sig)?;
            r.rhs.check_signature(&sig)?;
            if sig.get(&r.name).is_some() {
                return Err(Error::pre(format!("rule name {} clashes with another symbol", r.name)));
            }
            index.insert(r.name.clone(), i);
        }
        for r in &rules {
            sig.add(&r.name, r.arity(), SymKind::Rule)?;
        }
        Ok(Trs { sig, rules, index })
    }

    pub fn empty(functions: Signature) -> Trs {
        Trs::new(functions, vec![]).expect("no rules")
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.index.get(name).map(|&i| &self.rules[i])
    }

    pub fn rule_or_err(&self, name: &str) -> Result<&Rule> {
        self.rule(name).ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    pub fn is_rule(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn function_signature(&self) -> Signature {
        let mut s = Signature::new();
        for (f, a) in self.sig.functions() {
            s.add(f, a, SymKind::Function).unwrap();
        }
        s
    }

    pub fn flags(&self) -> TrsFlags {
        classify_trs(self)
    }

    pub fn is_left_linear(&self) -> bool {
        self.rules.iter().all(Rule::is_left_linear)
    }
}

pub fn classify_trs(t: &Trs) -> TrsFlags {
    let left_linear = t.is_left_linear();
    let orthogonal = left_linear && !has_overlap(t);
    let mut lsyms = std::collections::BTreeSet::new();
    let mut rsyms = std::collections::BTreeSet::new();
    for r in &t.rules {
        lsyms.extend(r.lhs.symbols());
        rsyms.extend(r.rhs.symbols());
    }
    TrsFlags {
        left_linear,
        orthogonal,
        disjoint: lsyms.is_disjoint(&rsyms),
        has_collapsing: t.rules.iter().any(Rule::is_collapsing),
        max_pdepth: t.rules.iter().map(Rule::pdepth).max().unwrap_or(0),
    }
}

/// Finite first-order term used for unification.
#[derive(Clone, Debug)]
enum UTerm {
    V(String),
    F(Sym, Vec<UTerm>),
}

fn to_uterm(t: &Term, suffix: &str) -> UTerm {
    fn go(t: &Term, n: usize, suffix: &str) -> UTerm {
        match t.label_at(n) {
            Label::Var(x) => UTerm::V(format!("{x}{suffix}")),
            l => UTerm::F(sym(l.name()), t.kids_at(n).iter().map(|&k| go(t, k, suffix)).collect()),
        }
    }
    go(t, 0, suffix)
}

fn walk<'a>(t: &'a UTerm, s: &'a HashMap<String, UTerm>) -> &'a UTerm {
    let mut t = t;
    while let UTerm::V(x) = t {
        match s.get(x) {
            Some(u) => t = u,
            None => break,
        }
    }
    t
}

fn occurs(x: &str, t: &UTerm, s: &HashMap<String, UTerm>) -> bool {
    match walk(t, s) {
        UTerm::V(y) => y == x,
        UTerm::F(_, ks) => ks.iter().any(|k| occurs(x, k, s)),
    }
}

fn unify(a: &UTerm, b: &UTerm, s: &mut HashMap<String, UTerm>) -> bool {
    let (a, b) = (walk(a, s).clone(), walk(b, s).clone());
    match (&a, &b) {
        (UTerm::V(x), UTerm::V(y)) if x == y => true,
        (UTerm::V(x), t) | (t, UTerm::V(x)) => {
            if occurs(x, t, s) {
                return false;
            }
            s.insert(x.clone(), t.clone());
            true
        }
        (UTerm::F(f, fs), UTerm::F(g, gs)) => {
            f == g && fs.len() == gs.len() && fs.iter().zip(gs).all(|(x, y)| unify(x, y, s))
        }
    }
}

fn has_overlap(t: &Trs) -> bool {
    for (i, r1) in t.rules.iter().enumerate() {
        let (ppos, _) = r1.lhs.pattern_info().expect("finite lhs");
        for p in &ppos {
            let sub = to_uterm(&r1.lhs.subterm_at(p).unwrap(), "#1");
            for (j, r2) in t.rules.iter().enumerate() {
                if i == j && p.is_root() {
                    continue;
                }
                let mut s = HashMap::new();
                if unify(&sub, &to_uterm(&r2.lhs, "#2"), &mut s) {
                    return true;
                }
            }
        }
    }
    false
}

/// `src_T` and `tgt_T`: each rule `μ: l → r` becomes `μ(x1..xn) → l`
/// respectively `μ(x1..xn) → r`, over the signature extended by rule symbols.
pub fn make_companions(t: &Trs) -> Result<(Trs, Trs)> {
    let mut sig = Signature::new();
    for (f, a, _) in t.sig.iter() {
        sig.add(f, a, SymKind::Function)?;
    }
    let mk = |pick: fn(&Rule) -> &Term, tag: &str| -> Result<Trs> {
        let rules = t
            .rules
            .iter()
            .map(|r| Rule::new(&format!("{tag}_{}", r.name), r.head_term(), pick(r).clone()))
            .collect::<Result<Vec<_>>>()?;
        Trs::new(sig.clone(), rules)
    };
    Ok((mk(|r| &r.lhs, "src")?, mk(|r| &r.rhs, "tgt")?))
}

/// Matches the finite pattern `l` at store node `n` of `t`.
pub fn match_at(l: &Term, t: &Term, n: usize) -> Option<BTreeMap<Sym, Term>> {
    let mut s: BTreeMap<Sym, Term> = BTreeMap::new();
    let mut stack = vec![(0usize, n)];
    while let Some((a, b)) = stack.pop() {
        match l.label_at(a) {
            Label::Var(x) => {
                let u = t.at(b);
                if let Some(prev) = s.get(x) {
                    if *prev != u {
                        return None;
                    }
                } else {
                    s.insert(x.clone(), u);
                }
            }
            lab => {
                if lab != t.label_at(b) || l.kids_at(a).len() != t.kids_at(b).len() {
                    return None;
                }
                stack.extend(l.kids_at(a).iter().copied().zip(t.kids_at(b).iter().copied()));
            }
        }
    }
    Some(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedexStep {
    pub source: Term,
    pub pos: Position,
    pub rule: Sym,
    pub sigma: BTreeMap<Sym, Term>,
}

impl RedexStep {
    /// Builds a step, computing the substitution by matching.
    pub fn new(trs: &Trs, source: Term, pos: Position, rule: &str) -> Result<RedexStep> {
        let r = trs.rule_or_err(rule)?;
        let n = source.node_at(&pos)?;
        let sigma = match_at(&r.lhs, &source, n).ok_or_else(|| {
            Error::MalformedStep(format!("{} does not match at {pos} of {source}", r.name))
        })?;
        Ok(RedexStep { source, pos, rule: r.name.clone(), sigma })
    }

    pub fn check<'a>(&self, trs: &'a Trs) -> Result<&'a Rule> {
        let r = trs.rule_or_err(&self.rule)?;
        let redex = self.source.subterm_at(&self.pos)?;
        if redex != r.lhs.subst(&self.sigma) {
            return Err(Error::MalformedStep(format!("{} is not an instance of {}", redex, r.lhs)));
        }
        Ok(r)
    }

    pub fn depth(&self) -> usize {
        self.pos.depth()
    }
}

impl fmt::Display for RedexStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}, {}, {}⟩", self.source, self.pos, self.rule)
    }
}

/// `t[σr]_p`.
pub fn apply_step(trs: &Trs, a: &RedexStep) -> Result<Term> {
    let r = a.check(trs)?;
    a.source.replace_at(&r.rhs.subst(&a.sigma), &a.pos)
}

/// Every redex occurrence at depth at most `bound`, by position then rule.
pub fn match_redexes(trs: &Trs, t: &Term, bound: usize) -> Vec<RedexStep> {
    let mut memo: HashMap<(usize, usize), Option<BTreeMap<Sym, Term>>> = HashMap::new();
    let mut out = Vec::new();
    let mut queue = std::collections::VecDeque::from([(0usize, Position::root())]);
    while let Some((n, p)) = queue.pop_front() {
        for (ri, r) in trs.rules.iter().enumerate() {
            let m = memo.entry((n, ri)).or_insert_with(|| match_at(&r.lhs, t, n));
            if let Some(s) = m {
                out.push(RedexStep { source: t.clone(), pos: p.clone(), rule: r.name.clone(), sigma: s.clone() });
            }
        }
        if p.depth() < bound {
            for (j, &k) in t.kids_at(n).iter().enumerate() {
                queue.push_back((k, p.child(j as u32 + 1)));
            }
        }
    }
    out.sort_by(|a, b| a.pos.cmp(&b.pos).then_with(|| a.rule.cmp(&b.rule)));
    out
}
