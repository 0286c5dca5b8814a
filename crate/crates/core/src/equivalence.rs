//! Permutation equivalence: equation instances, derivation trees, their
//! checker, and builders for the standard derived rules.
//!
//! A derivation node carries its conclusion `lhs ≈ rhs`. Infinite
//! composition nodes carry an explicit prefix of premises followed by a
//! premise template over an index variable; limit nodes carry one pair of
//! premises per `k = 0..K`. Families are checked on the first `K` instances
//! and, where templates are available, structurally.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mstep::is_trivial as mstep_trivial;
use crate::position::Position;
use crate::ordinal::{ord_inf_sum, Ordinal, DEFAULT_SAMPLES};
use crate::proofterm::{check_convergent, fit_family, mind, source, target, validate_k};
use crate::pterm::{pt_cmp, Cmp, Family, Pt};
use crate::syntax::parse_pt;
use crate::term::{sym, Label, Sym, Term};
use crate::trs::Trs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Schema {
    IdLeft,
    IdRight,
    Assoc,
    Struct,
    InfStruct,
    OutIn,
    InOut,
}

pub const SCHEMAS: [Schema; 7] =
    [Schema::IdLeft, Schema::IdRight, Schema::Assoc, Schema::Struct, Schema::InfStruct, Schema::OutIn, Schema::InOut];

impl Schema {
    pub fn name(self) -> &'static str {
        match self {
            Schema::IdLeft => "IdLeft",
            Schema::IdRight => "IdRight",
            Schema::Assoc => "Assoc",
            Schema::Struct => "Struct",
            Schema::InfStruct => "InfStruct",
            Schema::OutIn => "OutIn",
            Schema::InOut => "InOut",
        }
    }

    pub fn parse(s: &str) -> Option<Schema> {
        SCHEMAS.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Refl,
    Eqn(Schema),
    Symm,
    Trans,
    Fun,
    Rule,
    Comp,
    InfComp,
    Lim,
}

impl Tag {
    pub fn all() -> Vec<Tag> {
        let mut v = vec![Tag::Refl, Tag::Symm, Tag::Trans, Tag::Fun, Tag::Rule, Tag::Comp, Tag::InfComp, Tag::Lim];
        v.extend(SCHEMAS.into_iter().map(Tag::Eqn));
        v
    }

    fn rule_name(self) -> &'static str {
        match self {
            Tag::Refl => "refl",
            Tag::Eqn(_) => "eqn",
            Tag::Symm => "symm",
            Tag::Trans => "trans",
            Tag::Fun => "fun",
            Tag::Rule => "rule",
            Tag::Comp => "comp",
            Tag::InfComp => "infcomp",
            Tag::Lim => "lim",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Eqn(s) => write!(f, "eqn:{}", s.name()),
            t => f.write_str(t.rule_name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Premises {
    List(Vec<Deriv>),
    /// Explicit premises for the first elements, then a template over `var`.
    Family { var: Sym, prefix: Vec<Deriv>, body: Box<Deriv> },
    /// `(ψ ≈ χ_k·ψ'_k, φ ≈ χ_k·φ'_k)` for `k = 0, 1, ...`.
    Lim(Vec<(Deriv, Deriv)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deriv {
    pub tag: Tag,
    pub lhs: Pt,
    pub rhs: Pt,
    pub premises: Premises,
}

impl Deriv {
    pub fn leaf(tag: Tag, lhs: Pt, rhs: Pt) -> Deriv {
        Deriv { tag, lhs, rhs, premises: Premises::List(vec![]) }
    }

    pub fn refl(p: Pt) -> Deriv {
        Deriv::leaf(Tag::Refl, p.clone(), p)
    }

    pub fn eqn(s: Schema, lhs: Pt, rhs: Pt) -> Deriv {
        Deriv::leaf(Tag::Eqn(s), lhs, rhs)
    }

    pub fn is_refl(&self) -> bool {
        self.tag == Tag::Refl
    }

    pub fn symm(d: Deriv) -> Deriv {
        if d.is_refl() {
            return d;
        }
        Deriv { tag: Tag::Symm, lhs: d.rhs.clone(), rhs: d.lhs.clone(), premises: Premises::List(vec![d]) }
    }

    pub fn trans(a: Deriv, b: Deriv) -> Deriv {
        if a.is_refl() {
            return b;
        }
        if b.is_refl() {
            return a;
        }
        Deriv { tag: Tag::Trans, lhs: a.lhs.clone(), rhs: b.rhs.clone(), premises: Premises::List(vec![a, b]) }
    }

    /// Left-to-right chain of `trans`; `start` is used when `ds` is empty.
    pub fn chain(start: Pt, ds: Vec<Deriv>) -> Deriv {
        ds.into_iter().fold(Deriv::refl(start), Deriv::trans)
    }

    pub fn comp(a: Deriv, b: Deriv) -> Deriv {
        if a.is_refl() && b.is_refl() {
            return Deriv::refl(Pt::comp(a.lhs, b.lhs));
        }
        Deriv {
            tag: Tag::Comp,
            lhs: Pt::comp(a.lhs.clone(), b.lhs.clone()),
            rhs: Pt::comp(a.rhs.clone(), b.rhs.clone()),
            premises: Premises::List(vec![a, b]),
        }
    }

    /// The `fun` or `rule` congruence, according to the kind of `f`.
    pub fn app(trs: &Trs, f: &Sym, kids: Vec<Deriv>) -> Deriv {
        let lhs = Pt::app(&trs.sig, f, kids.iter().map(|d| d.lhs.clone()).collect());
        if kids.iter().all(Deriv::is_refl) {
            return Deriv::refl(lhs);
        }
        let rhs = Pt::app(&trs.sig, f, kids.iter().map(|d| d.rhs.clone()).collect());
        let tag = if trs.sig.is_rule(f) { Tag::Rule } else { Tag::Fun };
        Deriv { tag, lhs, rhs, premises: Premises::List(kids) }
    }

    pub fn infcomp(var: &str, prefix: Vec<Deriv>, body: Deriv) -> Deriv {
        let lhs = Pt::inf(prefix.iter().map(|d| d.lhs.clone()).collect(), var, body.lhs.clone());
        let rhs = Pt::inf(prefix.iter().map(|d| d.rhs.clone()).collect(), var, body.rhs.clone());
        Deriv { tag: Tag::InfComp, lhs, rhs, premises: Premises::Family { var: sym(var), prefix, body: Box::new(body) } }
    }

    pub fn lim(lhs: Pt, rhs: Pt, pairs: Vec<(Deriv, Deriv)>) -> Deriv {
        Deriv { tag: Tag::Lim, lhs, rhs, premises: Premises::Lim(pairs) }
    }

    pub fn children(&self) -> Vec<&Deriv> {
        match &self.premises {
            Premises::List(ds) => ds.iter().collect(),
            Premises::Family { prefix, body, .. } => prefix.iter().chain(std::iter::once(&**body)).collect(),
            Premises::Lim(ps) => ps.iter().flat_map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Deriv> {
        match &mut self.premises {
            Premises::List(ds) => ds.iter_mut().collect(),
            Premises::Family { prefix, body, .. } => prefix.iter_mut().chain(std::iter::once(&mut **body)).collect(),
            Premises::Lim(ps) => ps.iter_mut().flat_map(|(a, b)| [a, b]).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|d| d.node_count()).sum::<usize>()
    }

    pub fn uses_lim(&self) -> bool {
        self.tag == Tag::Lim || self.children().iter().any(|d| d.uses_lim())
    }

    /// Instantiates the index variable `v` with `n` throughout.
    pub fn instantiate(&self, v: &str, n: u64) -> Result<Deriv> {
        let premises = match &self.premises {
            Premises::List(ds) => Premises::List(ds.iter().map(|d| d.instantiate(v, n)).collect::<Result<_>>()?),
            Premises::Family { var, prefix, body } => Premises::Family {
                var: var.clone(),
                prefix: prefix.iter().map(|d| d.instantiate(v, n)).collect::<Result<_>>()?,
                body: Box::new(if &**var == v { (**body).clone() } else { body.instantiate(v, n)? }),
            },
            Premises::Lim(ps) => Premises::Lim(
                ps.iter().map(|(a, b)| Ok((a.instantiate(v, n)?, b.instantiate(v, n)?))).collect::<Result<_>>()?,
            ),
        };
        Ok(Deriv { tag: self.tag, lhs: self.lhs.instantiate(v, n)?, rhs: self.rhs.instantiate(v, n)?, premises })
    }

    pub fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("rule".into(), json!(self.tag.rule_name()));
        if let Tag::Eqn(s) = self.tag {
            m.insert("schema".into(), json!(s.name()));
        }
        m.insert("lhs".into(), json!(self.lhs.to_string()));
        m.insert("rhs".into(), json!(self.rhs.to_string()));
        match &self.premises {
            Premises::List(ds) => {
                if !ds.is_empty() {
                    m.insert("premises".into(), Value::Array(ds.iter().map(Deriv::to_json).collect()));
                }
            }
            Premises::Family { var, prefix, body } => {
                m.insert("var".into(), json!(&**var));
                m.insert("prefix".into(), Value::Array(prefix.iter().map(Deriv::to_json).collect()));
                m.insert("family".into(), body.to_json());
            }
            Premises::Lim(ps) => {
                let items = ps
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| json!({"k": k, "left": a.to_json(), "right": b.to_json()}))
                    .collect();
                m.insert("premises".into(), Value::Array(items));
            }
        }
        Value::Object(m)
    }

    pub fn from_json(trs: &Trs, v: &Value) -> Result<Deriv> {
        from_json_at(trs, v, "ε")
    }
}

fn from_json_at(trs: &Trs, v: &Value, path: &str) -> Result<Deriv> {
    let bad = |why: &str| Error::invalid(path, why);
    let field = |k: &str| v.get(k).ok_or_else(|| bad(&format!("missing field {k}")));
    let text = |k: &str| field(k)?.as_str().ok_or_else(|| bad(&format!("field {k} must be a string")));
    let tag = match text("rule")? {
        "refl" => Tag::Refl,
        "eqn" => Tag::Eqn(Schema::parse(text("schema")?).ok_or_else(|| bad("unknown schema"))?),
        "symm" => Tag::Symm,
        "trans" => Tag::Trans,
        "fun" => Tag::Fun,
        "rule" => Tag::Rule,
        "comp" => Tag::Comp,
        "infcomp" => Tag::InfComp,
        "lim" => Tag::Lim,
        other => return Err(bad(&format!("unknown rule {other}"))),
    };
    let lhs = parse_pt(text("lhs")?, trs)?;
    let rhs = parse_pt(text("rhs")?, trs)?;
    let list = |k: &str| -> Result<Vec<Value>> {
        match v.get(k) {
            None => Ok(vec![]),
            Some(Value::Array(xs)) => Ok(xs.clone()),
            Some(_) => Err(bad(&format!("field {k} must be an array"))),
        }
    };
    let premises = if v.get("family").is_some() {
        let var = text("var")?;
        let prefix = list("prefix")?
            .iter()
            .enumerate()
            .map(|(j, x)| from_json_at(trs, x, &format!("{path}[{j}]")))
            .collect::<Result<_>>()?;
        let body = from_json_at(trs, field("family")?, &format!("{path}[{var}]"))?;
        Premises::Family { var: sym(var), prefix, body: Box::new(body) }
    } else {
        let items = list("premises")?;
        if items.iter().any(|x| x.get("left").is_some()) {
            let mut pairs = vec![];
            for (k, x) in items.iter().enumerate() {
                let side = |s: &str| {
                    let y = x.get(s).ok_or_else(|| bad(&format!("premise {k} lacks {s}")))?;
                    from_json_at(trs, y, &format!("{path}.k{k}.{s}"))
                };
                pairs.push((side("left")?, side("right")?));
            }
            Premises::Lim(pairs)
        } else {
            Premises::List(
                items.iter().enumerate().map(|(j, x)| from_json_at(trs, x, &format!("{path}.{j}"))).collect::<Result<_>>()?,
            )
        }
    };
    Ok(Deriv { tag, lhs, rhs, premises })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `≈e`: no limit rule.
    Base,
    /// `≈`: limit rule with base premises.
    Full,
}

/// Restriction of the rule set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Fragment {
    All,
    /// Associativity only, without `fun` and `rule`.
    Rebracketing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Checked {
    pub layer: Ordinal,
    /// False when some family was only checked on sampled instances.
    pub exact: bool,
    pub nodes: usize,
    pub uses_lim: bool,
    pub samples: u64,
}

struct Checker<'a> {
    trs: &'a Trs,
    mode: Mode,
    fragment: Fragment,
    k: u64,
    exact: bool,
    nodes: usize,
    valid: HashSet<Pt>,
}

fn show(p: &Pt) -> String {
    let s = p.to_string();
    if s.chars().count() > 120 {
        let cut: String = s.chars().take(117).collect();
        format!("{cut}...")
    } else {
        s
    }
}

fn parts(p: &Pt, path: &str, what: &str) -> Result<(Pt, Pt)> {
    p.as_comp()?.ok_or_else(|| Error::invalid(path, format!("{what} {} is not a composition", show(p))))
}

fn app_parts(p: &Pt, path: &str, what: &str) -> Result<(Sym, Vec<Pt>)> {
    p.as_app()?.ok_or_else(|| Error::invalid(path, format!("{what} {} is not an application", show(p))))
}

/// `t[x_j := σ(x_j)]` for a rule side, as a proof term.
pub fn instantiate_side(trs: &Trs, t: &Term, sigma: &BTreeMap<Sym, Pt>) -> Result<Pt> {
    if sigma.values().all(Pt::is_mstep) {
        let s = sigma.iter().map(|(x, p)| (x.clone(), p.as_mstep().unwrap().clone())).collect();
        return Ok(Pt::MStep(t.subst(&s)));
    }
    fn go(trs: &Trs, t: &Term, n: usize, sigma: &BTreeMap<Sym, Pt>, fuel: usize) -> Result<Pt> {
        if fuel == 0 {
            return Err(Error::UnsupportedFamily("rule side repeats a variable infinitely often".into()));
        }
        let sub = t.at(n);
        if sub.vars().is_empty() {
            return Ok(Pt::MStep(sub));
        }
        match t.label_at(n) {
            Label::Var(x) => sigma.get(x).cloned().ok_or_else(|| Error::UnknownSymbol(x.to_string())),
            Label::Sym(f) => {
                let kids =
                    t.kids_at(n).iter().map(|&c| go(trs, t, c, sigma, fuel - 1)).collect::<Result<Vec<_>>>()?;
                Ok(Pt::app(&trs.sig, f, kids))
            }
            Label::Hole => Err(Error::pre("holes are not allowed in rules")),
        }
    }
    go(trs, t, 0, sigma, t.len() + 1)
}

/// Argument families of `⊙f(ψ¹_i, …, ψ^m_i)`, peeling template elements
/// whose root only shows after instantiation.
pub(crate) fn family_app(f: &Family) -> Result<Option<(Sym, Vec<Family>)>> {
    let mut fam = f.clone();
    for _ in 0..4 {
        let mut head: Option<Sym> = None;
        let mut cols: Vec<Vec<Pt>> = vec![];
        for p in &fam.prefix {
            match p.as_app()? {
                Some((g, ks)) if head.as_ref().is_none_or(|h| *h == g) => {
                    if cols.is_empty() {
                        cols = vec![vec![]; ks.len()];
                    }
                    if cols.len() != ks.len() {
                        return Ok(None);
                    }
                    for (c, k) in cols.iter_mut().zip(ks) {
                        c.push(k);
                    }
                    head = Some(g);
                }
                _ => return Ok(None),
            }
        }
        match fam.body.as_app()? {
            Some((g, ks)) if head.as_ref().is_none_or(|h| *h == g) => {
                if !fam.prefix.is_empty() && cols.len() != ks.len() {
                    return Ok(None);
                }
                if cols.is_empty() {
                    cols = vec![vec![]; ks.len()];
                }
                let fams = cols.into_iter().zip(ks).map(|(prefix, body)| Family::new(prefix, &fam.var, body)).collect();
                return Ok(Some((g, fams)));
            }
            Some(_) => return Ok(None),
            None => fam = fam.with_prefix_len(fam.prefix.len() + 1)?,
        }
    }
    Ok(None)
}

/// Sum of an ω-family of layers known on a finite sample. Samples that fit
/// no declared pattern are summed by the largest leading exponent of the
/// tail, which is exact when that exponent recurs.
fn layer_sum(samples: &[Ordinal], from: usize) -> Ordinal {
    if let Ok(x) = fit_family(samples, from as u64).and_then(|f| ord_inf_sum(&f)) {
        return x;
    }
    let from = from.min(samples.len());
    let head = Ordinal::sum(&samples[..from]);
    let e = samples[from..].iter().filter_map(Ordinal::leading_exponent).max().unwrap_or(0);
    head.add(&Ordinal::omega_pow(e + 1))
}

impl Checker<'_> {
    fn same(&mut self, a: &Pt, b: &Pt, path: &str, what: &str) -> Result<()> {
        match pt_cmp(a, b, self.k)? {
            Cmp::Equal => Ok(()),
            Cmp::EqualSampled => {
                self.exact = false;
                Ok(())
            }
            Cmp::Different => Err(Error::invalid(path, format!("{what}: {} differs from {}", show(a), show(b)))),
        }
    }

    fn validate(&mut self, p: &Pt, path: &str) -> Result<()> {
        if self.valid.contains(p) {
            return Ok(());
        }
        validate_k(self.trs, p, self.k).map_err(|e| Error::invalid(path, format!("{} is not a proof term: {e}", show(p))))?;
        self.valid.insert(p.clone());
        Ok(())
    }

    fn convergent(&self, p: &Pt, path: &str, what: &str) -> Result<()> {
        check_convergent(self.trs, p).map_err(|e| Error::invalid(path, format!("{what} {} must be convergent: {e}", show(p))))
    }

    fn equation(&mut self, s: Schema, l: &Pt, r: &Pt, path: &str) -> Result<()> {
        if self.fragment == Fragment::Rebracketing && s != Schema::Assoc {
            return Err(Error::invalid(path, format!("equation {} is not in the rebracketing fragment", s.name())));
        }
        self.validate(l, path)?;
        self.validate(r, path)?;
        let trs = self.trs;
        match s {
            Schema::IdLeft => {
                let (u, psi) = parts(l, path, "IdLeft lhs")?;
                let src = source(trs, &psi)?;
                if !matches!(&u, Pt::MStep(t) if mstep_trivial(trs, t)) {
                    return Err(Error::invalid(path, "IdLeft unit must be a term"));
                }
                self.same(&u, &Pt::MStep(src), path, "IdLeft unit vs source")?;
                self.same(&psi, r, path, "IdLeft body")
            }
            Schema::IdRight => {
                let (psi, u) = parts(l, path, "IdRight lhs")?;
                self.convergent(&psi, path, "IdRight body")?;
                if !matches!(&u, Pt::MStep(t) if mstep_trivial(trs, t)) {
                    return Err(Error::invalid(path, "IdRight unit must be a term"));
                }
                let tgt = target(trs, &psi)?;
                self.same(&u, &Pt::MStep(tgt), path, "IdRight unit vs target")?;
                self.same(&psi, r, path, "IdRight body")
            }
            Schema::Assoc => {
                let (a, bc) = parts(l, path, "Assoc lhs")?;
                let (b, c) = parts(&bc, path, "Assoc lhs right operand")?;
                let (ab, c2) = parts(r, path, "Assoc rhs")?;
                let (a2, b2) = parts(&ab, path, "Assoc rhs left operand")?;
                self.same(&a, &a2, path, "Assoc first")?;
                self.same(&b, &b2, path, "Assoc second")?;
                self.same(&c, &c2, path, "Assoc third")
            }
            Schema::Struct => {
                let (x, y) = parts(l, path, "Struct lhs")?;
                let (f, xs) = app_parts(&x, path, "Struct left operand")?;
                let (g, ys) = app_parts(&y, path, "Struct right operand")?;
                let (h, zs) = app_parts(r, path, "Struct rhs")?;
                if f != g || f != h || !trs.sig.is_function(&f) {
                    return Err(Error::invalid(path, format!("Struct needs one function symbol, found {f}, {g}, {h}")));
                }
                for (j, ((x, y), z)) in xs.into_iter().zip(ys).zip(zs).enumerate() {
                    self.same(&Pt::comp(x, y), &z, path, &format!("Struct argument {}", j + 1))?;
                }
                Ok(())
            }
            Schema::InfStruct => {
                let Pt::Inf(fam) = l else {
                    return Err(Error::invalid(path, "InfStruct lhs must be an infinite composition"));
                };
                let (f, fams) = family_app(fam)?
                    .ok_or_else(|| Error::invalid(path, "InfStruct elements do not share a root symbol"))?;
                let (g, zs) = app_parts(r, path, "InfStruct rhs")?;
                if f != g || !trs.sig.is_function(&f) || fams.len() != zs.len() {
                    return Err(Error::invalid(path, format!("InfStruct needs one function symbol, found {f} and {g}")));
                }
                for (j, (fm, z)) in fams.into_iter().zip(zs).enumerate() {
                    self.same(&Pt::Inf(fm), &z, path, &format!("InfStruct argument {}", j + 1))?;
                }
                Ok(())
            }
            Schema::OutIn | Schema::InOut => {
                let (mu, ps) = app_parts(l, path, &format!("{} lhs", s.name()))?;
                let rule = trs
                    .rule(&mu)
                    .ok_or_else(|| Error::invalid(path, format!("{} lhs must be rooted by a rule symbol", s.name())))?;
                let (a, b) = parts(r, path, &format!("{} rhs", s.name()))?;
                let sigma: BTreeMap<Sym, Pt> = rule.vars.iter().cloned().zip(ps.iter().cloned()).collect();
                if s == Schema::OutIn {
                    let srcs = ps.iter().map(|p| source(trs, p)).collect::<Result<Vec<_>>>()?;
                    self.same(&a, &Pt::MStep(Term::app_sym(mu.clone(), srcs)), path, "OutIn rule step")?;
                    let inner = instantiate_side(trs, &rule.rhs, &sigma)?;
                    self.same(&b, &inner, path, "OutIn rhs instance")
                } else {
                    for (j, p) in ps.iter().enumerate() {
                        self.convergent(p, path, &format!("InOut argument {}", j + 1))?;
                    }
                    let inner = instantiate_side(trs, &rule.lhs, &sigma)?;
                    self.same(&a, &inner, path, "InOut lhs instance")?;
                    let tgts = ps.iter().map(|p| target(trs, p)).collect::<Result<Vec<_>>>()?;
                    self.same(&b, &Pt::MStep(Term::app_sym(mu.clone(), tgts)), path, "InOut rule step")
                }
            }
        }
    }

    fn list<'d>(&self, d: &'d Deriv, n: usize, path: &str) -> Result<&'d [Deriv]> {
        match &d.premises {
            Premises::List(ds) if ds.len() == n => Ok(ds),
            Premises::List(ds) => {
                Err(Error::invalid(path, format!("{} takes {n} premises, found {}", d.tag, ds.len())))
            }
            _ => Err(Error::invalid(path, format!("{} takes a premise list", d.tag))),
        }
    }

    fn node(&mut self, d: &Deriv, path: &str, in_lim: bool) -> Result<Ordinal> {
        self.nodes += 1;
        if !d.lhs.is_closed() || !d.rhs.is_closed() {
            return Err(Error::invalid(path, "conclusion mentions unbound index variables"));
        }
        let rebr = self.fragment == Fragment::Rebracketing;
        match d.tag {
            Tag::Refl => {
                self.list(d, 0, path)?;
                self.validate(&d.lhs, path)?;
                self.same(&d.lhs, &d.rhs, path, "refl sides")?;
                Ok(Ordinal::one())
            }
            Tag::Eqn(s) => {
                self.list(d, 0, path)?;
                self.equation(s, &d.lhs, &d.rhs, path)?;
                Ok(Ordinal::one())
            }
            Tag::Symm => {
                let ds = self.list(d, 1, path)?;
                let a = self.node(&ds[0], &format!("{path}.0"), in_lim)?;
                self.same(&ds[0].lhs, &d.rhs, path, "symm premise lhs")?;
                self.same(&ds[0].rhs, &d.lhs, path, "symm premise rhs")?;
                Ok(a.succ())
            }
            Tag::Trans => {
                let ds = self.list(d, 2, path)?;
                let a = self.node(&ds[0], &format!("{path}.0"), in_lim)?;
                let b = self.node(&ds[1], &format!("{path}.1"), in_lim)?;
                self.same(&ds[0].lhs, &d.lhs, path, "trans first premise lhs")?;
                self.same(&ds[0].rhs, &ds[1].lhs, path, "trans middle")?;
                self.same(&ds[1].rhs, &d.rhs, path, "trans second premise rhs")?;
                Ok(a.add(&b).succ())
            }
            Tag::Fun | Tag::Rule => {
                if rebr {
                    return Err(Error::invalid(path, format!("{} is not in the rebracketing fragment", d.tag)));
                }
                let (f, ls) = app_parts(&d.lhs, path, "lhs")?;
                let (g, rs) = app_parts(&d.rhs, path, "rhs")?;
                let want_rule = d.tag == Tag::Rule;
                if f != g || self.trs.sig.is_rule(&f) != want_rule || !self.trs.sig.get(&f).is_some() {
                    return Err(Error::invalid(path, format!("{} needs one {} symbol, found {f} and {g}", d.tag, d.tag)));
                }
                let ds = self.list(d, ls.len(), path)?;
                let mut acc = Ordinal::zero();
                for (j, (sub, (l, r))) in ds.iter().zip(ls.iter().zip(&rs)).enumerate() {
                    let sp = format!("{path}.{j}");
                    acc = acc.add(&self.node(sub, &sp, in_lim)?);
                    self.same(&sub.lhs, l, &sp, "argument lhs")?;
                    self.same(&sub.rhs, r, &sp, "argument rhs")?;
                }
                Ok(acc.succ())
            }
            Tag::Comp => {
                let ds = self.list(d, 2, path)?;
                let (l1, l2) = parts(&d.lhs, path, "lhs")?;
                let (r1, r2) = parts(&d.rhs, path, "rhs")?;
                self.validate(&d.lhs, path)?;
                self.validate(&d.rhs, path)?;
                let a = self.node(&ds[0], &format!("{path}.0"), in_lim)?;
                let b = self.node(&ds[1], &format!("{path}.1"), in_lim)?;
                self.same(&ds[0].lhs, &l1, path, "left premise lhs")?;
                self.same(&ds[0].rhs, &r1, path, "left premise rhs")?;
                self.same(&ds[1].lhs, &l2, path, "right premise lhs")?;
                self.same(&ds[1].rhs, &r2, path, "right premise rhs")?;
                Ok(a.add(&b).succ())
            }
            Tag::InfComp => {
                let Premises::Family { var, prefix, body } = &d.premises else {
                    return Err(Error::invalid(path, "infcomp takes a premise family"));
                };
                let (Pt::Inf(lf), Pt::Inf(rf)) = (&d.lhs, &d.rhs) else {
                    return Err(Error::invalid(path, "infcomp sides must be infinite compositions"));
                };
                self.validate(&d.lhs, path)?;
                self.validate(&d.rhs, path)?;
                let tl = Pt::Inf(Family { prefix: prefix.iter().map(|x| x.lhs.clone()).collect(), var: var.clone(), body: Box::new(body.lhs.clone()) });
                let tr = Pt::Inf(Family { prefix: prefix.iter().map(|x| x.rhs.clone()).collect(), var: var.clone(), body: Box::new(body.rhs.clone()) });
                self.same(&tl, &d.lhs, path, "premise family lhs")?;
                self.same(&tr, &d.rhs, path, "premise family rhs")?;
                let n = prefix.len() as u64 + self.k;
                let mut layers = vec![];
                for i in 0..n {
                    let sp = format!("{path}[{i}]");
                    let inst = if (i as usize) < prefix.len() {
                        prefix[i as usize].clone()
                    } else {
                        body.instantiate(var, i - prefix.len() as u64)?
                    };
                    layers.push(self.node(&inst, &sp, in_lim)?);
                    self.same(&inst.lhs, &lf.instance(i)?, &sp, "premise lhs")?;
                    self.same(&inst.rhs, &rf.instance(i)?, &sp, "premise rhs")?;
                }
                Ok(layer_sum(&layers, prefix.len()))
            }
            Tag::Lim => {
                if self.mode == Mode::Base {
                    return Err(Error::invalid(path, "lim is not available in the base relation"));
                }
                if in_lim {
                    return Err(Error::invalid(path, "lim premises must be base derivations"));
                }
                let Premises::Lim(pairs) = &d.premises else {
                    return Err(Error::invalid(path, "lim takes premise pairs"));
                };
                if (pairs.len() as u64) < self.k + 1 {
                    return Err(Error::invalid(path, format!("lim needs premises for k = 0..{}", self.k)));
                }
                self.validate(&d.lhs, path)?;
                self.validate(&d.rhs, path)?;
                let (mut ls, mut rs) = (vec![], vec![]);
                for (k, (a, b)) in pairs.iter().enumerate() {
                    let sp = format!("{path}.k{k}");
                    ls.push(self.node(a, &format!("{sp}.left"), true)?);
                    rs.push(self.node(b, &format!("{sp}.right"), true)?);
                    self.same(&a.lhs, &d.lhs, &sp, "left premise lhs")?;
                    self.same(&b.lhs, &d.rhs, &sp, "right premise lhs")?;
                    let (chi, psi) = parts(&a.rhs, &sp, "left premise rhs")?;
                    let (chi2, phi) = parts(&b.rhs, &sp, "right premise rhs")?;
                    self.same(&chi, &chi2, &sp, "common prefix")?;
                    for (what, q) in [("left", &psi), ("right", &phi)] {
                        if let Some(m) = mind(self.trs, q)? {
                            if m <= k as u64 {
                                return Err(Error::invalid(&sp, format!("{what} remainder has activity depth {m}, needs more than {k}")));
                            }
                        }
                    }
                }
                self.exact = false;
                Ok(layer_sum(&ls, 0).add(&layer_sum(&rs, 0)))
            }
        }
    }
}

pub fn check_derivation(trs: &Trs, d: &Deriv, mode: Mode) -> Result<Checked> {
    check_with(trs, d, mode, Fragment::All, DEFAULT_SAMPLES)
}

pub fn check_with(trs: &Trs, d: &Deriv, mode: Mode, fragment: Fragment, k: u64) -> Result<Checked> {
    let mut c = Checker { trs, mode, fragment, k, exact: true, nodes: 0, valid: HashSet::new() };
    let layer = c.node(d, "ε", false)?;
    Ok(Checked { layer, exact: c.exact, nodes: c.nodes, uses_lim: d.uses_lim(), samples: k })
}

/// A derivation together with the system it is stated in.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub system: String,
    pub mode: Mode,
    pub derivation: Deriv,
}

/// Parses JSON without the nesting limit; derivations are as deep as the
/// terms they relate, so callers need a large stack.
pub fn deep_json(text: &str) -> serde_json::Result<Value> {
    use serde::Deserialize;
    let mut de = serde_json::Deserializer::from_str(text);
    de.disable_recursion_limit();
    let v = Value::deserialize(&mut de)?;
    de.end()?;
    Ok(v)
}

impl Certificate {
    pub fn to_json(&self) -> Value {
        json!({"system": self.system, "mode": self.mode, "derivation": self.derivation.to_json()})
    }

    pub fn parse(text: &str) -> Result<(crate::syntax::Workspace, Certificate)> {
        let v = deep_json(text).map_err(|e| Error::Parse {
            line: e.line(),
            col: e.column(),
            expected: format!("certificate JSON ({e})"),
        })?;
        let bad = |why: &str| Error::invalid("certificate", why);
        let system = v.get("system").and_then(Value::as_str).ok_or_else(|| bad("missing system"))?;
        let ws = crate::syntax::parse_workspace(system)?;
        let mode = match v.get("mode").and_then(Value::as_str) {
            Some("base") => Mode::Base,
            Some("full") | None => Mode::Full,
            Some(other) => return Err(bad(&format!("unknown mode {other}"))),
        };
        let derivation = Deriv::from_json(&ws.trs, v.get("derivation").ok_or_else(|| bad("missing derivation"))?)?;
        Ok((ws, Certificate { system: system.to_string(), mode, derivation }))
    }
}

/// Checks a single equation instance with its side conditions.
pub fn check_equation(trs: &Trs, s: Schema, lhs: &Pt, rhs: &Pt) -> Result<()> {
    let d = Deriv::eqn(s, lhs.clone(), rhs.clone());
    check_derivation(trs, &d, Mode::Base).map(|_| ())
}

/// `ψ ≈ src(ψ)` for a trivial proof term; infinite compositions use the
/// limit rule.
pub fn derive_trivial_src(trs: &Trs, p: &Pt) -> Result<Deriv> {
    if !crate::proofterm::is_trivial(trs, p) {
        return Err(Error::pre(format!("{} is not trivial", show(p))));
    }
    trivial(trs, p)
}

fn trivial(trs: &Trs, p: &Pt) -> Result<Deriv> {
    let s = Pt::MStep(source(trs, p)?);
    Ok(match p {
        Pt::MStep(_) => Deriv::refl(p.clone()),
        Pt::Comp(a, b) => {
            let d = Deriv::comp(trivial(trs, a)?, trivial(trs, b)?);
            Deriv::trans(d, Deriv::eqn(Schema::IdLeft, Pt::comp(s.clone(), s.clone()), s))
        }
        Pt::Fun(f, ks) | Pt::Rule(f, ks) => Deriv::app(trs, f, ks.iter().map(|k| trivial(trs, k)).collect::<Result<_>>()?),
        Pt::Inf(_) => {
            let unit = |q: &Pt| Deriv::symm(Deriv::eqn(Schema::IdLeft, Pt::comp(s.clone(), q.clone()), q.clone()));
            let pairs = (0..=DEFAULT_SAMPLES.max(16)).map(|_| (unit(p), unit(&s))).collect();
            Deriv::lim(p.clone(), s, pairs)
        }
        Pt::Iter(..) => return Err(Error::pre("template is not closed")),
    })
}

/// `C[ps]·C[qs] ≈e C[p_1·q_1, …]` for a context over function symbols;
/// holes are numbered as by [`Term::hole_positions`].
pub fn derive_struct_ctx(trs: &Trs, c: &Term, ps: &[Pt], qs: &[Pt]) -> Result<Deriv> {
    let holes = c.hole_positions()?;
    if holes.len() != ps.len() || ps.len() != qs.len() {
        return Err(Error::pre("one pair of proof terms per hole is required"));
    }
    let mut slots: Vec<Option<(Pt, Pt)>> = ps.iter().cloned().zip(qs.iter().cloned()).map(Some).collect();
    struct_at(trs, c, 0, &Position::root(), &holes, &mut slots)
}

fn struct_at(
    trs: &Trs,
    c: &Term,
    n: usize,
    at: &Position,
    holes: &[Position],
    slots: &mut [Option<(Pt, Pt)>],
) -> Result<Deriv> {
    let sub = c.at(n);
    match c.label_at(n) {
        Label::Hole => {
            let i = holes.iter().position(|h| h == at).expect("hole position");
            let (p, q) = slots[i].take().expect("hole used once");
            Ok(Deriv::refl(Pt::comp(p, q)))
        }
        _ if !sub.has_holes() => {
            let t = Pt::MStep(sub);
            Ok(Deriv::eqn(Schema::IdLeft, Pt::comp(t.clone(), t.clone()), t))
        }
        Label::Sym(f) if trs.sig.is_function(f) => {
            let kids = c
                .kids_at(n)
                .iter()
                .enumerate()
                .map(|(j, &k)| struct_at(trs, c, k, &at.child(j as u32 + 1), holes, slots))
                .collect::<Result<Vec<_>>>()?;
            let split = |d: &Deriv| d.lhs.as_comp().map(|x| x.expect("composition"));
            let halves = kids.iter().map(split).collect::<Result<Vec<_>>>()?;
            let left = Pt::fun_s(f.clone(), halves.iter().map(|h| h.0.clone()).collect());
            let right = Pt::fun_s(f.clone(), halves.iter().map(|h| h.1.clone()).collect());
            let mid = Pt::fun_s(f.clone(), kids.iter().map(|d| d.lhs.clone()).collect());
            let step = Deriv::eqn(Schema::Struct, Pt::comp(left, right), mid);
            Ok(Deriv::trans(step, Deriv::app(trs, f, kids)))
        }
        _ => Err(Error::pre(format!("context {c} must be built from function symbols"))),
    }
}

/// `C[p_1, …] ≈ C[q_1, …]` from one derivation per hole, numbered as by
/// [`Term::hole_positions`].
pub fn derive_ctx_compat(trs: &Trs, c: &Term, ds: Vec<Deriv>) -> Result<Deriv> {
    let holes = c.hole_positions()?;
    if holes.len() != ds.len() {
        return Err(Error::pre("one derivation per hole is required"));
    }
    let mut slots: Vec<Option<Deriv>> = ds.into_iter().map(Some).collect();
    compat_at(trs, c, 0, &Position::root(), &holes, &mut slots)
}

fn compat_at(
    trs: &Trs,
    c: &Term,
    n: usize,
    at: &Position,
    holes: &[Position],
    slots: &mut [Option<Deriv>],
) -> Result<Deriv> {
    let sub = c.at(n);
    match c.label_at(n) {
        Label::Hole => {
            let i = holes.iter().position(|h| h == at).expect("hole position");
            Ok(slots[i].take().expect("hole used once"))
        }
        _ if !sub.has_holes() => Ok(Deriv::refl(Pt::MStep(sub))),
        Label::Sym(f) => {
            let kids = c
                .kids_at(n)
                .iter()
                .enumerate()
                .map(|(j, &k)| compat_at(trs, c, k, &at.child(j as u32 + 1), holes, slots))
                .collect::<Result<Vec<_>>>()?;
            Ok(Deriv::app(trs, f, kids))
        }
        Label::Var(_) => Err(Error::pre("contexts must not contain variables")),
    }
}

fn comp_like(p: &Pt) -> bool {
    match p {
        Pt::Comp(..) => true,
        Pt::Inf(f) => !f.prefix.is_empty(),
        _ => false,
    }
}

/// Derivation of `p ≈e` its right-nested rebracketing. Infinite compositions
/// without an explicit prefix count as single elements.
pub fn right_normal(p: &Pt) -> Result<(Pt, Deriv)> {
    if !comp_like(p) {
        return Ok((p.clone(), Deriv::refl(p.clone())));
    }
    let (x, y) = p.as_comp()?.unwrap();
    if comp_like(&x) {
        let (x1, x2) = x.as_comp()?.unwrap();
        let flat = Pt::comp(x1.clone(), Pt::comp(x2.clone(), y.clone()));
        let step = Deriv::symm(Deriv::eqn(Schema::Assoc, flat.clone(), p.clone()));
        let (n, rest) = right_normal(&flat)?;
        return Ok((n, Deriv::trans(step, rest)));
    }
    let (ny, dy) = right_normal(&y)?;
    let d = Deriv::comp(Deriv::refl(x.clone()), dy);
    Ok((Pt::comp(x, ny), d))
}

/// Derivation of `a ≈e b` when they differ only in bracketing.
pub fn derive_rebracket(a: &Pt, b: &Pt) -> Result<Deriv> {
    let (na, da) = right_normal(a)?;
    let (nb, db) = right_normal(b)?;
    if na != nb {
        return Err(Error::pre(format!("{} and {} are not rebracketings of each other", show(a), show(b))));
    }
    Ok(Deriv::trans(da, Deriv::symm(db)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_workspace;

    const SYS: &str = "sig f/1 g/1 h/1 j/1 k/1 a/0 b/0 p/2 i/1 t/1\n\
        rule tau: t(x) -> x\nrule mu: f(x) -> g(x)\nrule nu: g(x) -> h(x)\nrule rho: j(x) -> k(x)\nrule pi: p(x, y) -> i(y)\n";

    fn setup() -> Trs {
        parse_workspace(SYS).unwrap().trs
    }

    fn pt(trs: &Trs, s: &str) -> Pt {
        parse_pt(s, trs).unwrap()
    }

    #[test]
    fn schemas() {
        let t = setup();
        let ok = |s, l: &str, r: &str| check_equation(&t, s, &pt(&t, l), &pt(&t, r));
        ok(Schema::IdLeft, "f(a); mu(a)", "mu(a)").unwrap();
        assert!(ok(Schema::IdLeft, "g(a); mu(a)", "mu(a)").is_err());
        ok(Schema::IdRight, "mu(a); g(a)", "mu(a)").unwrap();
        ok(Schema::Assoc, "mu(a); (nu(a); h(a))", "(mu(a); nu(a)); h(a)").unwrap();
        assert!(ok(Schema::Assoc, "(mu(a); nu(a)); h(a)", "mu(a); (nu(a); h(a))").is_err());
        ok(Schema::Struct, "j(mu(a)); j(nu(a))", "j(mu(a); nu(a))").unwrap();
        ok(Schema::OutIn, "nu(mu(a))", "nu(f(a)); h(mu(a))").unwrap();
        ok(Schema::InOut, "nu(mu(a))", "g(mu(a)); nu(g(a))").unwrap();
        ok(Schema::InfStruct, "conc(i){ j(iter(g(_), i, mu(f^w))) }", "j(conc(i){ iter(g(_), i, mu(f^w)) })").unwrap();
    }

    #[test]
    fn inout_needs_convergence() {
        let t = setup();
        let l = pt(&t, "pi(tau^w, mu(a); nu(a))");
        let r = pt(&t, "p(tau^w, mu(a); nu(a)); pi(t^w, h(a))");
        let e = check_equation(&t, Schema::InOut, &l, &r).unwrap_err();
        assert!(e.to_string().contains("convergent"), "{e}");
        let r2 = pt(&t, "pi(t^w, f(a)); i(mu(a); nu(a))");
        check_equation(&t, Schema::OutIn, &l, &r2).unwrap();
    }

    #[test]
    fn struct_ctx() {
        let t = setup();
        let c = crate::syntax::parse_term("p(j(_), _)", &t.sig).unwrap();
        let ps = [pt(&t, "mu(a)"), pt(&t, "mu(b)")];
        let qs = [pt(&t, "nu(a)"), pt(&t, "nu(b)")];
        let d = derive_struct_ctx(&t, &c, &ps, &qs).unwrap();
        check_derivation(&t, &d, Mode::Base).unwrap();
        assert_eq!(d.rhs, pt(&t, "p(j(mu(b); nu(b)), mu(a); nu(a))"));
    }

    #[test]
    fn trivial_inf_needs_lim() {
        let t = setup();
        let p = pt(&t, "conc(i){ f^w }");
        let d = derive_trivial_src(&t, &p).unwrap();
        check_derivation(&t, &d, Mode::Full).unwrap();
        assert!(check_derivation(&t, &d, Mode::Base).is_err());
    }

    #[test]
    fn rebracket_and_json() {
        let t = setup();
        let a = pt(&t, "(f(a); mu(a)); (nu(a); h(a))");
        let b = pt(&t, "f(a); ((mu(a); nu(a)); h(a))");
        let d = derive_rebracket(&a, &b).unwrap();
        let c = check_with(&t, &d, Mode::Base, Fragment::Rebracketing, 8).unwrap();
        assert!(c.exact);
        let back = Deriv::from_json(&t, &d.to_json()).unwrap();
        assert_eq!(back, d);
    }
}
