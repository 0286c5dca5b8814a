//! Stepwise proof terms: step counts, components, tails, and the
//! correspondence with reduction sequences.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::equivalence::{check_with, Checked, Deriv, Fragment, Mode, Schema};
use crate::error::{Error, Result};
use crate::family::TermFamily;
use crate::mstep::{is_trivial as mstep_trivial, mstep_src, mstep_tgt, one_step_position};
use crate::ordinal::{ord_decompose_with, ord_inf_sum, Ordinal, DEFAULT_SAMPLES};
use crate::position::Position;
use crate::proofterm::{fit_family, is_one_step, is_pnpterm, is_ppterm, source_family};
use crate::pterm::{pt_cmp, Cmp, Family, Pt};
use crate::redseq::{Block, PosTemplate, RedSeq, StepT};
use crate::term::{Label, Sym, Term};
use crate::trs::{RedexStep, Trs};

/// A closed one-step with its redex position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OneStep {
    pub mstep: Term,
    pub rpos: Position,
    pub rule: Sym,
}

impl OneStep {
    pub fn of(trs: &Trs, p: &Pt) -> Result<OneStep> {
        let Pt::MStep(t) = p else {
            return Err(Error::pre(format!("{p} is not a closed one-step")));
        };
        let rpos = one_step_position(trs, t).ok_or_else(|| Error::pre(format!("{t} is not a one-step")))?;
        let rule = t.label_of(&rpos)?.as_sym().cloned().expect("rule symbol");
        Ok(OneStep { mstep: t.clone(), rpos, rule })
    }

    pub fn sdepth(&self) -> usize {
        self.rpos.depth()
    }
}

fn require_pnp(trs: &Trs, p: &Pt) -> Result<()> {
    if !p.is_closed() {
        return Err(Error::pre("proof term has unbound indices"));
    }
    if !is_pnpterm(trs, p) {
        return Err(Error::pre(format!("{p} is not a stepwise proof term")));
    }
    Ok(())
}

fn step_family(trs: &Trs, f: &Family, k: u64) -> Result<Vec<Ordinal>> {
    let n = f.prefix.len() as u64 + k;
    (0..n).map(|i| steps_of(trs, &f.instance(i)?, k)).collect()
}

fn steps_of(trs: &Trs, p: &Pt, k: u64) -> Result<Ordinal> {
    match p {
        Pt::MStep(t) if mstep_trivial(trs, t) => Ok(Ordinal::zero()),
        Pt::Comp(a, b) => Ok(steps_of(trs, a, k)?.add(&steps_of(trs, b, k)?)),
        Pt::Inf(f) => ord_inf_sum(&fit_family(&step_family(trs, f, k)?, f.prefix.len() as u64)?),
        _ if is_one_step(trs, p) => Ok(Ordinal::one()),
        _ => Err(Error::pre(format!("{p} is not a stepwise proof term"))),
    }
}

/// The number of steps.
pub fn steps_count(trs: &Trs, p: &Pt) -> Result<Ordinal> {
    require_pnp(trs, p)?;
    steps_of(trs, p, DEFAULT_SAMPLES)
}

/// The `a`-th component, a closed one-step.
pub fn component_at(trs: &Trs, p: &Pt, a: &Ordinal) -> Result<Pt> {
    require_pnp(trs, p)?;
    component(trs, p, a)
}

fn component(trs: &Trs, p: &Pt, a: &Ordinal) -> Result<Pt> {
    let k = DEFAULT_SAMPLES;
    match p {
        Pt::Comp(x, y) => {
            let s = steps_of(trs, x, k)?;
            if *a < s {
                component(trs, x, a)
            } else {
                component(trs, y, &s.sub_left(a)?)
            }
        }
        Pt::Inf(f) => {
            let total = steps_of(trs, p, k)?;
            if *a >= total {
                return Err(Error::pre(format!("component {a} of a proof term with {total} steps")));
            }
            let err = RefCell::new(None);
            let (i, g) = ord_decompose_with(a, |i| match f.instance(i).and_then(|q| steps_of(trs, &q, k)) {
                Ok(s) => s,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    Ordinal::omega_pow(30)
                }
            })?;
            if let Some(e) = err.into_inner() {
                return Err(e);
            }
            component(trs, &f.instance(i)?, &g)
        }
        _ if is_one_step(trs, p) && a.is_zero() => Ok(p.clone()),
        _ => Err(Error::pre(format!("no component {a} in {p}"))),
    }
}

/// Maximal component depth and maximal pattern depth of the rules used.
pub fn maxd_maxsd(trs: &Trs, p: &Pt) -> Result<(usize, usize)> {
    let n = steps_count(trs, p)?;
    let n = n.as_nat().ok_or_else(|| Error::pre("maxd needs finitely many steps"))?;
    let mut maxd = 0;
    let mut maxsd = 0;
    for i in 0..n {
        let o = OneStep::of(trs, &component(trs, p, &Ordinal::nat(i))?)?;
        maxd = maxd.max(o.sdepth());
        maxsd = maxsd.max(trs.rule_or_err(&o.rule)?.pdepth());
    }
    Ok((maxd, maxsd))
}

/// Removes the first component.
pub fn tail(trs: &Trs, p: &Pt) -> Result<Pt> {
    if !is_ppterm(trs, p) {
        return Err(Error::pre(format!("{p} is not a stepwise proof term")));
    }
    tail_of(trs, p)
}

fn tail_of(trs: &Trs, p: &Pt) -> Result<Pt> {
    match p {
        Pt::Comp(a, b) => {
            if is_one_step(trs, a) {
                Ok((**b).clone())
            } else {
                Ok(Pt::comp(tail_of(trs, a)?, (**b).clone()))
            }
        }
        Pt::Inf(f) => {
            let (h, rest) = f.uncons()?;
            if is_one_step(trs, &h) {
                Ok(Pt::Inf(rest))
            } else {
                Ok(Pt::comp(tail_of(trs, &h)?, Pt::Inf(rest)))
            }
        }
        Pt::MStep(t) => Ok(Pt::MStep(mstep_tgt(trs, t)?)),
        _ => Err(Error::pre(format!("{p} has no tail"))),
    }
}

/// The one-step denoting a reduction step.
pub fn denote_step(trs: &Trs, a: &RedexStep) -> Result<Pt> {
    let rule = a.check(trs)?;
    let redex = a.source.subterm_at(&a.pos)?;
    let sigma = crate::trs::match_at(&rule.lhs, &redex, 0)
        .ok_or_else(|| Error::MalformedStep(format!("{} does not match {}", rule.lhs, redex)))?;
    let args = rule.vars.iter().map(|x| sigma[x].clone()).collect();
    let inner = Term::app_sym(rule.name.clone(), args);
    Ok(Pt::MStep(a.source.replace_at(&inner, &a.pos)?))
}

/// The reduction step denoted by a closed one-step.
pub fn to_step(trs: &Trs, p: &Pt) -> Result<RedexStep> {
    let o = OneStep::of(trs, p).map_err(|e| Error::MalformedStep(e.to_string()))?;
    RedexStep::new(trs, mstep_src(trs, &o.mstep)?, o.rpos, &o.rule)
}

/// A trivial proof-term template for a term family.
fn family_pt(tf: &TermFamily) -> Result<Pt> {
    Ok(match tf {
        TermFamily::Const(t) => Pt::MStep(t.clone()),
        TermFamily::Sym(f, ks) => Pt::fun_s(f.clone(), ks.iter().map(family_pt).collect::<Result<_>>()?),
        TermFamily::Iter(c, e, b) => Pt::iter(c.clone(), e.clone(), family_pt(b)?)?,
        TermFamily::Graft(t, subs) => graft_pt(t, 0, subs, t.len() + 1)?,
        TermFamily::Sampled(..) => return Err(Error::UnsupportedFamily(format!("{tf} has no template"))),
    })
}

fn graft_pt(t: &Term, n: usize, subs: &std::collections::BTreeMap<Sym, TermFamily>, fuel: usize) -> Result<Pt> {
    let sub = t.at(n);
    if sub.vars().is_empty() {
        return Ok(Pt::MStep(sub));
    }
    if fuel == 0 {
        return Err(Error::UnsupportedFamily("graft below a cycle".into()));
    }
    match t.label_at(n) {
        Label::Var(x) => family_pt(&subs[x]),
        Label::Sym(f) => Ok(Pt::fun_s(
            f.clone(),
            t.kids_at(n).iter().map(|&k| graft_pt(t, k, subs, fuel - 1)).collect::<Result<_>>()?,
        )),
        Label::Hole => Err(Error::pre("holes are not allowed here")),
    }
}

fn family_root(tf: &TermFamily) -> Option<(Sym, usize)> {
    match tf {
        TermFamily::Const(t) => t.root_sym().map(|f| (f.clone(), t.arity())),
        TermFamily::Sym(f, ks) => Some((f.clone(), ks.len())),
        TermFamily::Iter(c, e, b) => {
            if e.sub_const(1).is_some() {
                c.root_sym().map(|f| (f.clone(), c.arity())).or_else(|| family_root(b))
            } else {
                None
            }
        }
        TermFamily::Graft(t, subs) => match t.label() {
            Label::Var(x) => family_root(subs.get(x)?),
            Label::Sym(f) => Some((f.clone(), t.arity())),
            Label::Hole => None,
        },
        TermFamily::Sampled(_, ts) => {
            let f = ts.first()?.root_sym()?;
            ts.iter().all(|t| t.root_sym() == Some(f) && t.arity() == ts[0].arity()).then(|| (f.clone(), ts[0].arity()))
        }
    }
}

/// A one-step template for a step template.
pub fn step_pt(trs: &Trs, s: &StepT) -> Result<Pt> {
    step_pt_at(trs, &s.src, &s.pos, &s.rule)
}

fn step_pt_at(trs: &Trs, src: &TermFamily, pos: &PosTemplate, rule: &Sym) -> Result<Pt> {
    let unsupported = || Error::UnsupportedFamily(format!("step {rule} at {pos} in {src}"));
    if pos.0.is_empty() {
        let t = src.as_const().ok_or_else(unsupported)?;
        return denote_step(trs, &RedexStep::new(trs, t.clone(), Position::root(), rule)?);
    }
    if let TermFamily::Iter(c, e, body) = src {
        let (w, x) = &pos.0[0];
        if x == e && e.as_const().is_none() && c.hole_positions()? == vec![Position(w.clone())] {
            let rest = PosTemplate(pos.0[1..].to_vec());
            return Pt::iter(c.clone(), e.clone(), step_pt_at(trs, body, &rest, rule)?);
        }
    }
    if let (Some(t), true) = (src.as_const(), pos.0.iter().all(|(_, e)| e.as_const().is_some())) {
        let p = pos.eval(&Default::default())?;
        return denote_step(trs, &RedexStep::new(trs, t.clone(), p, rule)?);
    }
    let (d, rest) = pos.uncons()?.ok_or_else(unsupported)?;
    let (f, n) = family_root(src).ok_or_else(unsupported)?;
    let mut kids = Vec::with_capacity(n);
    for j in 1..=n {
        let a = src.arg(j)?.ok_or_else(unsupported)?;
        kids.push(if j as u32 == d { step_pt_at(trs, &a, &rest, rule)? } else { family_pt(&a)? });
    }
    Ok(Pt::app(&trs.sig, &f, kids))
}

fn blocks_pt(trs: &Trs, bs: &[Block]) -> Result<Vec<Pt>> {
    let mut out = vec![];
    for b in bs {
        match b {
            Block::Finite(steps) => {
                for s in steps {
                    out.push(step_pt(trs, s)?);
                }
            }
            Block::Omega { var, step } => out.push(Pt::inf(vec![], var, step_pt(trs, step)?)),
            Block::Repeat { var, body } => {
                let inner = blocks_pt(trs, body)?;
                if inner.is_empty() {
                    continue;
                }
                out.push(Pt::inf(vec![], var, Pt::comps(inner)));
            }
        }
    }
    Ok(out)
}

/// A stepwise proof term denoting the reduction sequence.
pub fn denote_redseq(trs: &Trs, r: &RedSeq) -> Result<Pt> {
    let ps = blocks_pt(trs, &r.blocks)?;
    if ps.is_empty() {
        let t = r.source.clone().ok_or_else(|| Error::pre("empty sequence without a source"))?;
        return Ok(Pt::MStep(t));
    }
    Ok(Pt::comps(ps))
}

fn rule_of_template(trs: &Trs, p: &Pt) -> Option<Sym> {
    match p {
        Pt::MStep(t) => one_step_position(trs, t).and_then(|q| t.label_of(&q).ok().and_then(|l| l.as_sym().cloned())),
        Pt::Rule(mu, _) => Some(mu.clone()),
        Pt::Fun(_, ks) => ks.iter().find_map(|k| rule_of_template(trs, k)),
        Pt::Iter(_, _, b) => rule_of_template(trs, b),
        _ => None,
    }
}

fn pos_of_template(trs: &Trs, p: &Pt) -> Result<PosTemplate> {
    match p {
        Pt::MStep(t) => Ok(PosTemplate::word(&one_step_position(trs, t).ok_or_else(|| Error::pre("not a one-step"))?)),
        Pt::Rule(..) => Ok(PosTemplate(vec![])),
        Pt::Fun(_, ks) => {
            let j = ks
                .iter()
                .position(|k| rule_of_template(trs, k).is_some())
                .ok_or_else(|| Error::pre("not a one-step"))?;
            Ok(PosTemplate::word(&Position(vec![j as u32 + 1])).concat(&pos_of_template(trs, &ks[j])?))
        }
        Pt::Iter(c, e, b) => {
            let h = c.hole_positions()?.remove(0);
            Ok(PosTemplate::power(&h, e.clone()).concat(&pos_of_template(trs, b)?))
        }
        _ => Err(Error::pre("not a one-step")),
    }
}

fn push_step(out: &mut Vec<Block>, s: StepT) {
    if let Some(Block::Finite(v)) = out.last_mut() {
        v.push(s);
    } else {
        out.push(Block::Finite(vec![s]));
    }
}

fn pt_blocks(trs: &Trs, p: &Pt, out: &mut Vec<Block>) -> Result<()> {
    match p {
        Pt::MStep(t) if mstep_trivial(trs, t) => Ok(()),
        Pt::Comp(a, b) => {
            pt_blocks(trs, a, out)?;
            pt_blocks(trs, b, out)
        }
        Pt::Inf(f) => {
            for q in &f.prefix {
                pt_blocks(trs, q, out)?;
            }
            if is_one_step(trs, &f.body) {
                let step = template_step(trs, &f.body)?;
                out.push(Block::Omega { var: f.var.clone(), step });
            } else {
                let mut body = vec![];
                pt_blocks(trs, &f.body, &mut body)?;
                out.push(Block::Repeat { var: f.var.clone(), body });
            }
            Ok(())
        }
        _ if is_one_step(trs, p) => {
            let s = template_step(trs, p)?;
            push_step(out, s);
            Ok(())
        }
        _ => Err(Error::pre(format!("{p} is not a stepwise proof term"))),
    }
}

fn template_step(trs: &Trs, p: &Pt) -> Result<StepT> {
    let rule = rule_of_template(trs, p).ok_or_else(|| Error::pre("not a one-step"))?;
    Ok(StepT { src: source_family(trs, p)?, pos: pos_of_template(trs, p)?, rule })
}

/// The reduction sequence whose steps are the components.
pub fn to_redseq(trs: &Trs, p: &Pt) -> Result<RedSeq> {
    require_pnp(trs, p)?;
    let mut blocks = vec![];
    pt_blocks(trs, p, &mut blocks)?;
    let source = Some(crate::proofterm::source(trs, p)?);
    Ok(RedSeq { source, blocks })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeneqStatus {
    Equal,
    Unequal,
    EqualUpToSampling,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeneqVerdict {
    pub status: DeneqStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Ordinal>,
}

/// Indices below `bound` probed by sampled comparisons: `0..=k` inside
/// every ω-block of every level.
pub fn sample_indices(bound: &Ordinal, k: u64) -> Vec<Ordinal> {
    fn below_pow(e: u32, k: u64) -> Vec<Ordinal> {
        if e == 0 {
            return vec![Ordinal::zero()];
        }
        let inner = below_pow(e - 1, k);
        let mut out = vec![];
        for c in 0..=k {
            let base = Ordinal::omega_pow(e - 1).times_nat(c);
            out.extend(inner.iter().map(|x| base.add(x)));
        }
        out
    }
    let mut out = vec![];
    let mut base = Ordinal::zero();
    for &(e, c) in bound.terms() {
        for _ in 0..c.min(k + 1) {
            out.extend(below_pow(e, k).into_iter().map(|x| base.add(&x)));
            base = base.add(&Ordinal::omega_pow(e));
        }
        if c > k + 1 {
            base = base.add(&Ordinal::omega_pow(e).times_nat(c - k - 1));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Denotational equivalence: equal step counts and equal components.
pub fn deneq_check(trs: &Trs, p: &Pt, q: &Pt, k: u64) -> Result<DeneqVerdict> {
    let sp = steps_count(trs, p)?;
    let sq = steps_count(trs, q)?;
    if sp != sq {
        let witness = Some(sp.clone().min(sq.clone()));
        return Ok(DeneqVerdict { status: DeneqStatus::Unequal, witness });
    }
    if sp.is_zero() {
        let (a, b) = (crate::proofterm::source(trs, p)?, crate::proofterm::source(trs, q)?);
        let status = if a == b { DeneqStatus::Equal } else { DeneqStatus::Unequal };
        let witness = (a != b).then(Ordinal::zero);
        return Ok(DeneqVerdict { status, witness });
    }
    let idx: Vec<Ordinal> = match sp.as_nat() {
        Some(n) => (0..n).map(Ordinal::nat).collect(),
        None => sample_indices(&sp, k),
    };
    for a in idx {
        if component(trs, p, &a)? != component(trs, q, &a)? {
            return Ok(DeneqVerdict { status: DeneqStatus::Unequal, witness: Some(a) });
        }
    }
    let exact = sp.is_finite() || {
        let (rp, rq) = (to_redseq(trs, p)?, to_redseq(trs, q)?);
        rp.blocks == rq.blocks
    };
    let status = if exact { DeneqStatus::Equal } else { DeneqStatus::EqualUpToSampling };
    Ok(DeneqVerdict { status, witness: None })
}

/// Checks a rebracketing derivation between `p` and `q`.
pub fn breq_check(trs: &Trs, d: &Deriv, p: &Pt, q: &Pt, mode: Mode) -> Result<Checked> {
    let c = check_with(trs, d, mode, Fragment::Rebracketing, DEFAULT_SAMPLES)?;
    for (what, x, y) in [("lhs", &d.lhs, p), ("rhs", &d.rhs, q)] {
        if pt_cmp(x, y, DEFAULT_SAMPLES)? == Cmp::Different {
            return Err(Error::invalid("ε", format!("derivation {what} {x} differs from {y}")));
        }
    }
    Ok(c)
}

/// One associativity step at every composition node of a finite proof term,
/// with its derivation.
fn assoc_moves(p: &Pt) -> Vec<(Pt, Deriv)> {
    let mut out = vec![];
    if let Pt::Comp(a, b) = p {
        if let Pt::Comp(b1, b2) = &**b {
            let r = Pt::comp(Pt::comp((**a).clone(), (**b1).clone()), (**b2).clone());
            out.push((r.clone(), Deriv::eqn(Schema::Assoc, p.clone(), r)));
        }
        if let Pt::Comp(a1, a2) = &**a {
            let r = Pt::comp((**a1).clone(), Pt::comp((**a2).clone(), (**b).clone()));
            out.push((r.clone(), Deriv::symm(Deriv::eqn(Schema::Assoc, r, p.clone()))));
        }
        for (x, d) in assoc_moves(a) {
            out.push((Pt::comp(x, (**b).clone()), Deriv::comp(d, Deriv::refl((**b).clone()))));
        }
        for (y, d) in assoc_moves(b) {
            out.push((Pt::comp((**a).clone(), y), Deriv::comp(Deriv::refl((**a).clone()), d)));
        }
    }
    out
}

/// Breadth-first search for a rebracketing derivation between finite
/// stepwise proof terms, visiting at most `limit` terms.
pub fn breq_search(trs: &Trs, p: &Pt, q: &Pt, limit: usize) -> Result<Option<Deriv>> {
    for x in [p, q] {
        require_pnp(trs, x)?;
        if x.comp_list().iter().any(|y| matches!(y, Pt::Inf(_))) {
            return Err(Error::pre("rebracketing search is limited to finite proof terms"));
        }
    }
    let mut seen: HashMap<Pt, Option<(Pt, Deriv)>> = HashMap::new();
    seen.insert(p.clone(), None);
    let mut queue = VecDeque::from([p.clone()]);
    while let Some(x) = queue.pop_front() {
        if &x == q {
            let mut steps = vec![];
            let mut cur = x;
            while let Some(Some((prev, d))) = seen.get(&cur) {
                steps.push(d.clone());
                cur = prev.clone();
            }
            steps.reverse();
            return Ok(Some(Deriv::chain(p.clone(), steps)));
        }
        if seen.len() >= limit {
            break;
        }
        for (y, d) in assoc_moves(&x) {
            if !seen.contains_key(&y) {
                seen.insert(y.clone(), Some((x.clone(), d)));
                queue.push_back(y);
            }
        }
    }
    Ok(None)
}

/// Rules occurring in a proof term.
pub fn rules_used(trs: &Trs, p: &Pt) -> BTreeSet<Sym> {
    let mut out = BTreeSet::new();
    fn go(trs: &Trs, p: &Pt, out: &mut BTreeSet<Sym>) {
        match p {
            Pt::MStep(t) => out.extend(t.symbols().into_iter().filter(|s| trs.is_rule(s))),
            Pt::Comp(a, b) => {
                go(trs, a, out);
                go(trs, b, out);
            }
            Pt::Inf(f) => {
                f.prefix.iter().for_each(|q| go(trs, q, out));
                go(trs, &f.body, out);
            }
            Pt::Fun(_, ks) => ks.iter().for_each(|q| go(trs, q, out)),
            Pt::Rule(mu, ks) => {
                out.insert(mu.clone());
                ks.iter().for_each(|q| go(trs, q, out));
            }
            Pt::Iter(_, _, b) => go(trs, b, out),
        }
    }
    go(trs, p, &mut out);
    out
}
