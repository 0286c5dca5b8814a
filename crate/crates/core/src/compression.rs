//! Collapsing sequences, fixed prefixes, condensation, factorisation and
//! compression. Every transformation returns its result together with a
//! derivation that `check_derivation` accepts.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use crate::affine::Affine;
use crate::denotation::{steps_count, OneStep};
use crate::equivalence::{
    derive_ctx_compat, derive_rebracket, derive_struct_ctx, derive_trivial_src, family_app, instantiate_side,
    right_normal, Deriv, Schema,
};
use crate::error::{Error, Result};
use crate::family::iterate_ctx;
use crate::mstep::{is_trivial as mstep_trivial, mstep_src, mstep_tgt};
use crate::ordinal::{Ordinal, DEFAULT_SAMPLES};
use crate::position::Position;
use crate::proofterm::{check_convergent, is_pnpterm, is_trivial, mind, mind_form, require_closed, source, target, validate_pterm};
use crate::pterm::{pt_cmp, Cmp, Family, Pt};
use crate::term::{Label, Signature, Sym, Term};
use crate::trs::Trs;

/// A maximal collapsing sequence. For an infinite one, `positions` ends
/// with the first position whose node was already visited.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollapsingSeq {
    pub start: Position,
    pub positions: Vec<Position>,
    pub infinite: bool,
}

impl CollapsingSeq {
    /// `None` when infinite.
    pub fn length(&self) -> Option<usize> {
        (!self.infinite).then_some(self.positions.len())
    }
}

fn collapse_child(trs: &Trs, l: &Label) -> Option<usize> {
    l.as_sym().and_then(|f| trs.rule(f)).and_then(|r| r.collapse_index())
}

pub fn collapsing_analysis(trs: &Trs, m: &Term, p: &Position) -> Result<CollapsingSeq> {
    let mut node = m.node_at(p).map_err(|_| Error::PositionOutOfDomain(p.to_string()))?;
    let mut cur = p.clone();
    let mut seen = HashSet::new();
    let mut positions = vec![];
    loop {
        positions.push(cur.clone());
        if !seen.insert(node) {
            return Ok(CollapsingSeq { start: p.clone(), positions, infinite: true });
        }
        match collapse_child(trs, m.label_at(node)) {
            Some(j) => {
                node = m.kids_at(node)[j];
                cur = cur.child(j as u32 + 1);
            }
            None => return Ok(CollapsingSeq { start: p.clone(), positions, infinite: false }),
        }
    }
}

/// A `tgt_T` step: the rule symbol at `pos` is replaced by its rhs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TgtStep {
    pub pos: Position,
    pub rule: Sym,
}

pub fn apply_tgt_step(trs: &Trs, t: &Term, s: &TgtStep) -> Result<Term> {
    let sub = t.subterm_at(&s.pos)?;
    if sub.root_sym() != Some(&s.rule) {
        return Err(Error::MalformedStep(format!("no {} at {} in {t}", s.rule, s.pos)));
    }
    let r = trs.rule_or_err(&s.rule)?;
    let sigma: BTreeMap<Sym, Term> = r.vars.iter().cloned().zip(sub.args()).collect();
    t.replace_at(&r.rhs.subst(&sigma), &s.pos)
}

/// Root `tgt_T` steps until a function symbol shows at the root.
pub fn head_flatten(trs: &Trs, m: &Term) -> Result<(Vec<TgtStep>, Term)> {
    mstep_tgt(trs, m)?;
    let cs = collapsing_analysis(trs, m, &Position::root())?;
    if cs.infinite {
        return Err(Error::NonConvergent(format!("infinite collapsing sequence at the root of {m}")));
    }
    let mut steps = vec![];
    let mut t = m.clone();
    while let Some(f) = t.root_sym().filter(|f| trs.is_rule(f)).cloned() {
        let s = TgtStep { pos: Position::root(), rule: f };
        t = apply_tgt_step(trs, &t, &s)?;
        steps.push(s);
    }
    Ok((steps, t))
}

fn is_unit(trs: &Trs, p: &Pt) -> bool {
    matches!(p, Pt::MStep(t) if mstep_trivial(trs, t))
}

fn split(p: &Pt) -> Result<(Pt, Pt)> {
    p.as_comp()?.ok_or_else(|| Error::pre(format!("{p} is not a composition")))
}

/// `ψ ≈e u·ψ` for `u` the source of `ψ`.
fn unit_left(u: &Pt, p: &Pt) -> Deriv {
    Deriv::symm(Deriv::eqn(Schema::IdLeft, Pt::comp(u.clone(), p.clone()), p.clone()))
}

fn holes_ctx(f: &Sym, n: usize) -> Term {
    Term::app_sym(f.clone(), vec![Term::hole(); n])
}

/// `t ≈e χ·t'` for the target step at `pos`, with `χ` a one-step.
fn lift_at(trs: &Trs, t: &Term, pos: &Position) -> Result<Deriv> {
    let f = t.root_sym().cloned().ok_or_else(|| Error::MalformedStep(format!("no symbol at the root of {t}")))?;
    let args = t.args();
    let Some(i) = pos.head() else {
        let r = trs.rule_or_err(&f)?;
        let srcs = args.iter().map(|a| mstep_src(trs, a)).collect::<Result<Vec<_>>>()?;
        let sigma: BTreeMap<Sym, Term> = r.vars.iter().cloned().zip(args).collect();
        let rhs = Pt::comp(Pt::MStep(Term::app_sym(f.clone(), srcs)), Pt::MStep(r.rhs.subst(&sigma)));
        return Ok(Deriv::eqn(Schema::OutIn, Pt::MStep(t.clone()), rhs));
    };
    if !trs.sig.is_function(&f) {
        return Err(Error::MalformedStep(format!("step at {pos} lies below the rule symbol {f}")));
    }
    let c = holes_ctx(&f, args.len());
    let (mut ds, mut ps, mut qs) = (vec![], vec![], vec![]);
    for (j, a) in args.iter().enumerate() {
        if j + 1 == i as usize {
            let d = lift_at(trs, a, &pos.tail())?;
            let (x, y) = split(&d.rhs)?;
            ps.push(x);
            qs.push(y);
            ds.push(d);
        } else {
            let u = Pt::MStep(mstep_src(trs, a)?);
            ds.push(unit_left(&u, &Pt::MStep(a.clone())));
            ps.push(u);
            qs.push(Pt::MStep(a.clone()));
        }
    }
    let compat = derive_ctx_compat(trs, &c, ds)?;
    let apart = Deriv::symm(derive_struct_ctx(trs, &c, &ps, &qs)?);
    Ok(Deriv::trans(compat, apart))
}

/// A factorisation `p ≈e χ·φ`.
#[derive(Clone, Debug)]
pub struct Factor {
    pub chi: Pt,
    pub phi: Pt,
    pub deriv: Deriv,
}

/// From `p ≈e a·q` and `q ≈e b·r`, `p ≈e (a·b)·r` with units dropped.
fn join(trs: &Trs, f0: Factor, f1: Factor) -> Result<Factor> {
    let step = Deriv::comp(Deriv::refl(f0.chi.clone()), f1.deriv);
    let chi = Pt::comp(f0.chi, f1.chi);
    let assoc = Deriv::eqn(Schema::Assoc, step.rhs.clone(), Pt::comp(chi.clone(), f1.phi.clone()));
    let d = Deriv::chain(f0.deriv.lhs.clone(), vec![f0.deriv, step, assoc]);
    tidy(trs, Factor { chi, phi: f1.phi, deriv: d })
}

/// Lifts target steps of `m` to `m ≈e χ·m'`, one one-step per target step.
pub fn lift_head_steps(trs: &Trs, m: &Term, steps: &[TgtStep]) -> Result<Factor> {
    let mut t = m.clone();
    let mut acc: Option<Factor> = None;
    for s in steps {
        let next = apply_tgt_step(trs, &t, s)?;
        let d = lift_at(trs, &t, &s.pos)?;
        let (chi, _) = split(&d.rhs)?;
        let f = Factor { chi, phi: Pt::MStep(next.clone()), deriv: d };
        acc = Some(match acc {
            None => f,
            Some(prev) => join(trs, prev, f)?,
        });
        t = next;
    }
    match acc {
        Some(f) => Ok(f),
        None => {
            let p = Pt::MStep(m.clone());
            let u = Pt::MStep(mstep_src(trs, m)?);
            Ok(Factor { chi: u.clone(), phi: p.clone(), deriv: unit_left(&u, &p) })
        }
    }
}

/// `m ≈e χ·φ` with `χ` the root steps of `m` and `φ` rooted by a function
/// symbol.
pub fn factorise_multistep(trs: &Trs, m: &Term) -> Result<Factor> {
    let (steps, _) = head_flatten(trs, m)?;
    lift_head_steps(trs, m, &steps)
}

/// Drops trivial units from a finite composition, right-nesting it.
fn strip_units(trs: &Trs, chi: &Pt) -> Result<(Pt, Deriv)> {
    fn go(trs: &Trs, p: &Pt) -> (Pt, Deriv) {
        let Pt::Comp(a, b) = p else {
            return (p.clone(), Deriv::refl(p.clone()));
        };
        let (b2, db) = go(trs, b);
        let head = Deriv::comp(Deriv::refl((**a).clone()), db);
        let mid = Pt::comp((**a).clone(), b2.clone());
        if is_unit(trs, a) {
            (b2.clone(), Deriv::trans(head, Deriv::eqn(Schema::IdLeft, mid, b2)))
        } else if is_unit(trs, &b2) {
            ((**a).clone(), Deriv::trans(head, Deriv::eqn(Schema::IdRight, mid, (**a).clone())))
        } else {
            (mid, head)
        }
    }
    let (n, dn) = right_normal(chi)?;
    let (s, ds) = go(trs, &n);
    Ok((s, Deriv::trans(dn, ds)))
}

fn tidy(trs: &Trs, f: Factor) -> Result<Factor> {
    let (chi, dc) = strip_units(trs, &f.chi)?;
    let deriv = Deriv::trans(f.deriv, Deriv::comp(dc, Deriv::refl(f.phi.clone())));
    Ok(Factor { chi, phi: f.phi, deriv })
}

/// `C[χ_1, …] ≈e s_1·…·s_m`: the steps of the arguments one after the
/// other, left argument first.
fn seq_ctx(trs: &Trs, c: &Term, args: Vec<Pt>) -> Result<(Pt, Deriv)> {
    let start = Pt::plug(c, args.clone())?;
    let Some(i) = args.iter().position(|a| !is_unit(trs, a)) else {
        return Ok((start.clone(), Deriv::refl(start)));
    };
    let (mut ds, mut ps, mut qs) = (vec![], vec![], vec![]);
    for (j, a) in args.iter().enumerate() {
        if j < i {
            ds.push(unit_left(a, a));
            ps.push(a.clone());
            qs.push(a.clone());
        } else if j == i {
            match a.as_comp()? {
                Some((x, r)) => {
                    ds.push(Deriv::refl(a.clone()));
                    ps.push(x);
                    qs.push(r);
                }
                None => {
                    let u = Pt::MStep(target(trs, a)?);
                    ds.push(Deriv::symm(Deriv::eqn(Schema::IdRight, Pt::comp(a.clone(), u.clone()), a.clone())));
                    ps.push(a.clone());
                    qs.push(u);
                }
            }
        } else {
            let u = Pt::MStep(source(trs, a)?);
            ds.push(unit_left(&u, a));
            ps.push(u);
            qs.push(a.clone());
        }
    }
    let compat = derive_ctx_compat(trs, c, ds)?;
    let apart = Deriv::symm(derive_struct_ctx(trs, c, &ps, &qs)?);
    let head = Pt::plug(c, ps)?;
    let (rest, dr) = seq_ctx(trs, c, qs)?;
    let d = Deriv::chain(start, vec![compat, apart, Deriv::comp(Deriv::refl(head.clone()), dr)]);
    if is_unit(trs, &rest) {
        let drop = Deriv::eqn(Schema::IdRight, Pt::comp(head.clone(), rest), head.clone());
        return Ok((head, Deriv::trans(d, drop)));
    }
    Ok((Pt::comp(head, rest), d))
}

/// `t` cut down to the positions in `s`: holes everywhere else.
pub fn term_prefix(t: &Term, s: &BTreeSet<Position>) -> Result<Term> {
    for q in s {
        if !t.has_position(q) {
            return Err(Error::PositionOutOfDomain(q.to_string()));
        }
        if !q.is_root() && !s.contains(&Position(q.0[..q.depth() - 1].to_vec())) {
            return Err(Error::pre(format!("prefix set is not prefix-closed at {q}")));
        }
    }
    fn go(t: &Term, n: usize, p: &Position, s: &BTreeSet<Position>) -> Term {
        if !s.contains(p) {
            return Term::hole();
        }
        let kids: Vec<Term> =
            t.kids_at(n).iter().enumerate().map(|(j, &k)| go(t, k, &p.child(j as u32 + 1), s)).collect();
        match t.label_at(n) {
            Label::Sym(f) => Term::app_sym(f.clone(), kids),
            l => Term::leaf(l.clone()),
        }
    }
    Ok(go(t, 0, &Position::root(), s))
}

fn project(s: &BTreeSet<Position>, i: usize) -> BTreeSet<Position> {
    s.iter().filter(|q| q.head() == Some(i as u32)).map(Position::tail).collect()
}

/// Whether `p` keeps the symbols at the positions of `s` fixed, by the
/// structure of `p`; infinite compositions are checked on their prefix and
/// sampled instances.
pub fn respects_check(trs: &Trs, p: &Pt, s: &BTreeSet<Position>) -> bool {
    if s.is_empty() {
        return true;
    }
    match p {
        Pt::MStep(t) => s.iter().all(|q| matches!(t.label_of(q), Ok(Label::Sym(f)) if trs.sig.is_function(f))),
        Pt::Comp(a, b) => respects_check(trs, a, s) && respects_check(trs, b, s),
        Pt::Inf(f) => {
            f.prefix.iter().all(|q| respects_check(trs, q, s))
                && (0..DEFAULT_SAMPLES).all(|i| f.body.instantiate(&f.var, i).is_ok_and(|q| respects_check(trs, &q, s)))
        }
        Pt::Fun(_, ks) => {
            s.contains(&Position::root())
                && s.iter().all(|q| q.head().is_none_or(|i| i as usize <= ks.len()))
                && ks.iter().enumerate().all(|(j, k)| respects_check(trs, k, &project(s, j + 1)))
        }
        Pt::Rule(..) | Pt::Iter(..) => false,
    }
}

/// Condenses `p` to a proof term with a function symbol at the root.
pub fn cfps(trs: &Trs, p: &Pt) -> Result<(Pt, Deriv)> {
    if let Some((f, _)) = p.as_app()? {
        if trs.sig.is_function(&f) {
            return Ok((p.clone(), Deriv::refl(p.clone())));
        }
        return Err(Error::pre(format!("{p} is rooted by the rule symbol {f}; its only fixed prefix is empty")));
    }
    match p {
        Pt::Comp(a, b) => {
            let (a2, da) = cfps(trs, a)?;
            let (b2, db) = cfps(trs, b)?;
            let (f, xs) = a2.as_app()?.expect("condensed");
            let (g, ys) = b2.as_app()?.expect("condensed");
            if f != g || xs.len() != ys.len() {
                return Err(Error::pre(format!("{p} does not keep its root symbol")));
            }
            let rhs = Pt::fun_s(f, xs.into_iter().zip(ys).map(|(x, y)| Pt::comp(x, y)).collect());
            let st = Deriv::eqn(Schema::Struct, Pt::comp(a2, b2), rhs.clone());
            Ok((rhs, Deriv::trans(Deriv::comp(da, db), st)))
        }
        Pt::Inf(fam) => cfps_inf(trs, fam),
        _ => Err(Error::pre(format!("{p} has no root symbol to condense to"))),
    }
}

fn cfps_inf(trs: &Trs, fam: &Family) -> Result<(Pt, Deriv)> {
    let mut g = fam.clone();
    let mut last = None;
    for _ in 0..4 {
        match cfps(trs, &g.body) {
            Ok((body, db)) => {
                let pre = g.prefix.iter().map(|q| cfps(trs, q)).collect::<Result<Vec<_>>>()?;
                let lifted = Family {
                    prefix: pre.iter().map(|x| x.0.clone()).collect(),
                    var: g.var.clone(),
                    body: Box::new(body),
                };
                let (f, cols) = family_app(&lifted)?
                    .ok_or_else(|| Error::pre("elements of the infinite composition do not share a root symbol"))?;
                let rhs = Pt::fun_s(f, cols.into_iter().map(Pt::Inf).collect());
                let ds: Vec<Deriv> = pre.into_iter().map(|x| x.1).collect();
                let di = if db.is_refl() && ds.iter().all(Deriv::is_refl) {
                    Deriv::refl(Pt::Inf(g.clone()))
                } else {
                    Deriv::infcomp(&g.var, ds, db)
                };
                let st = Deriv::eqn(Schema::InfStruct, Pt::Inf(lifted), rhs.clone());
                return Ok((rhs, Deriv::trans(di, st)));
            }
            Err(e) => {
                last = Some(e);
                g = g.with_prefix_len(g.prefix.len() + 1)?;
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Condenses `p` to `C[ψ_1, …]` with `C` the prefix of its source on `s`.
pub fn cfpc(trs: &Trs, p: &Pt, s: &BTreeSet<Position>) -> Result<(Pt, Deriv)> {
    if s.is_empty() {
        return Ok((p.clone(), Deriv::refl(p.clone())));
    }
    if !s.contains(&Position::root()) {
        return Err(Error::pre("prefix set is not prefix-closed"));
    }
    let (q, dq) = cfps(trs, p)?;
    let (f, ks) = q.as_app()?.expect("condensed");
    if let Some(bad) = s.iter().find(|x| x.head().is_some_and(|i| i as usize > ks.len())) {
        return Err(Error::PositionOutOfDomain(bad.to_string()));
    }
    let ds = ks
        .iter()
        .enumerate()
        .map(|(j, k)| Ok(cfpc(trs, k, &project(s, j + 1))?.1))
        .collect::<Result<Vec<_>>>()?;
    let d = Deriv::app(trs, &f, ds);
    Ok((d.rhs.clone(), Deriv::trans(dq, d)))
}

/// The proof term at `q`, descending through application views.
fn pt_sub(p: &Pt, q: &Position) -> Result<Pt> {
    let mut cur = p.clone();
    for &i in &q.0 {
        let (_, ks) = cur.as_app()?.ok_or_else(|| Error::pre(format!("{cur} is not an application")))?;
        cur = ks.get(i as usize - 1).cloned().ok_or_else(|| Error::PositionOutOfDomain(q.to_string()))?;
    }
    Ok(cur)
}

/// `ξ·s ≈e s'·ξ'` for a one-step `s` whose redex pattern `ξ` leaves alone.
fn jump_one(trs: &Trs, xi: &Pt, s: &Pt) -> Result<(Pt, Pt, Deriv)> {
    let o = OneStep::of(trs, s)?;
    let rule = trs.rule_or_err(&o.rule)?;
    let d = o.sdepth();
    let src = mstep_src(trs, &o.mstep)?;
    let spa0: BTreeSet<Position> = if d == 0 { BTreeSet::new() } else { src.positions_upto(d - 1).into_iter().collect() };
    let mut spa = spa0.clone();
    spa.extend(rule.lhs.pattern_info()?.0.iter().map(|q| o.rpos.concat(q)));
    let need = spa.iter().map(|q| q.depth() as u64 + 1).max().unwrap_or(0);
    if let Some(m) = mind(trs, xi)? {
        if m < need {
            return Err(Error::pre(format!("activity depth {m} is below {need}, needed to permute {s}")));
        }
    }
    let (xi_f, df) = cfpc(trs, xi, &spa)?;
    let c = term_prefix(&src, &spa0)?;
    let (mut xs, mut ys, mut d2, mut d3, mut ps, mut qs) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for q in c.hole_positions()? {
        let x = pt_sub(&xi_f, &q)?;
        let y = Pt::MStep(o.mstep.subterm_at(&q)?);
        if q == o.rpos {
            let phis = rule
                .vars
                .iter()
                .map(|v| {
                    let at = rule.lhs.find_position(|l| matches!(l, Label::Var(w) if w == v)).expect("lhs variable");
                    pt_sub(&x, &at)
                })
                .collect::<Result<Vec<_>>>()?;
            let sigma: BTreeMap<Sym, Pt> = rule.vars.iter().cloned().zip(phis.iter().cloned()).collect();
            let redex = Pt::rule_s(o.rule.clone(), phis.clone());
            let srcs = phis.iter().map(|p| source(trs, p)).collect::<Result<Vec<_>>>()?;
            let tgts = phis.iter().map(|p| target(trs, p)).collect::<Result<Vec<_>>>()?;
            let lhs_inst = instantiate_side(trs, &rule.lhs, &sigma)?;
            let rhs_inst = instantiate_side(trs, &rule.rhs, &sigma)?;
            let first = Pt::MStep(Term::app_sym(o.rule.clone(), srcs));
            let last = Pt::MStep(Term::app_sym(o.rule.clone(), tgts));
            d2.push(Deriv::symm(Deriv::eqn(Schema::InOut, redex.clone(), Pt::comp(lhs_inst, last))));
            d3.push(Deriv::eqn(Schema::OutIn, redex, Pt::comp(first.clone(), rhs_inst.clone())));
            ps.push(first);
            qs.push(rhs_inst);
        } else {
            let u = Pt::MStep(source(trs, &x)?);
            d2.push(Deriv::eqn(Schema::IdRight, Pt::comp(x.clone(), y.clone()), x.clone()));
            d3.push(unit_left(&u, &x));
            ps.push(u);
            qs.push(x.clone());
        }
        xs.push(x);
        ys.push(y);
    }
    let s1 = derive_struct_ctx(trs, &c, &xs, &ys)?;
    let s2 = derive_ctx_compat(trs, &c, d2)?;
    let s3 = derive_ctx_compat(trs, &c, d3)?;
    let s4 = Deriv::symm(derive_struct_ctx(trs, &c, &ps, &qs)?);
    let s_new = Pt::plug(&c, ps)?;
    let xi_new = Pt::plug(&c, qs)?;
    let start = Pt::comp(xi.clone(), s.clone());
    let d = Deriv::chain(start, vec![Deriv::comp(df, Deriv::refl(s.clone())), s1, s2, s3, s4]);
    Ok((s_new, xi_new, d))
}

/// `ξ·ψ ≈e ψ'·ξ'` for a finite stepwise `ψ` (right-nested, without units
/// unless it is a single unit), provided `ξ` is deep enough.
pub fn jump(trs: &Trs, xi: &Pt, psi: &Pt) -> Result<(Pt, Pt, Deriv)> {
    if is_unit(trs, psi) {
        let u = Pt::MStep(source(trs, xi)?);
        let ir = Deriv::eqn(Schema::IdRight, Pt::comp(xi.clone(), psi.clone()), xi.clone());
        return Ok((u.clone(), xi.clone(), Deriv::trans(ir, unit_left(&u, xi))));
    }
    let Some((s, rest)) = psi.as_comp()? else {
        return jump_one(trs, xi, psi);
    };
    let (s2, xi1, d1) = jump_one(trs, xi, &s)?;
    let (r2, xi2, d2) = jump(trs, &xi1, &rest)?;
    let a1 = Deriv::eqn(Schema::Assoc, Pt::comp(xi.clone(), psi.clone()), Pt::comp(Pt::comp(xi.clone(), s), rest.clone()));
    let c1 = Deriv::comp(d1, Deriv::refl(rest.clone()));
    let a2 = Deriv::symm(Deriv::eqn(
        Schema::Assoc,
        Pt::comp(s2.clone(), Pt::comp(xi1.clone(), rest.clone())),
        Pt::comp(Pt::comp(s2.clone(), xi1), rest),
    ));
    let c2 = Deriv::comp(Deriv::refl(s2.clone()), d2);
    let a3 = Deriv::eqn(Schema::Assoc, c2.rhs.clone(), Pt::comp(Pt::comp(s2.clone(), r2.clone()), xi2.clone()));
    let d = Deriv::chain(a1.lhs.clone(), vec![a1, c1, a2, c2, a3]);
    Ok((Pt::comp(s2, r2), xi2, d))
}

/// Deepest step and the total of pattern depths plus one, over the steps of
/// a finite stepwise proof term.
fn jump_bounds(trs: &Trs, chi: &Pt) -> Result<(u64, u64)> {
    let (mut deepest, mut total) = (0u64, 0u64);
    for s in chi.comp_list() {
        if is_unit(trs, &s) {
            continue;
        }
        let o = OneStep::of(trs, &s)?;
        deepest = deepest.max(o.sdepth() as u64);
        total += trs.rule_or_err(&o.rule)?.pdepth() as u64 + 1;
    }
    Ok((deepest, total))
}

/// `p ≈e χ·φ` with `χ` finite and stepwise and `mind(φ) > n`.
pub fn factorise(trs: &Trs, p: &Pt, n: u64) -> Result<Factor> {
    require_closed(p)?;
    validate_pterm(trs, p)?;
    check_convergent(trs, p)?;
    fact(trs, p, n)
}

fn unit_factor(trs: &Trs, p: &Pt) -> Result<Factor> {
    let u = Pt::MStep(source(trs, p)?);
    Ok(Factor { chi: u.clone(), phi: p.clone(), deriv: unit_left(&u, p) })
}

fn fact(trs: &Trs, p: &Pt, n: u64) -> Result<Factor> {
    if mind(trs, p)?.is_none_or(|m| m > n) {
        return unit_factor(trs, p);
    }
    match p {
        Pt::MStep(t) => {
            let f0 = factorise_multistep(trs, t)?;
            if n == 0 || mind(trs, &f0.phi)?.is_none_or(|m| m > n) {
                return Ok(f0);
            }
            let f1 = fact_fun(trs, &f0.phi.clone(), n)?;
            join(trs, f0, f1)
        }
        Pt::Fun(..) => fact_fun(trs, p, n),
        Pt::Rule(mu, ks) => {
            let r = trs.rule_or_err(mu)?;
            let srcs = ks.iter().map(|k| source(trs, k)).collect::<Result<Vec<_>>>()?;
            let sigma: BTreeMap<Sym, Pt> = r.vars.iter().cloned().zip(ks.iter().cloned()).collect();
            let step = Pt::MStep(Term::app_sym(mu.clone(), srcs));
            let rest = instantiate_side(trs, &r.rhs, &sigma)?;
            let d = Deriv::eqn(Schema::OutIn, p.clone(), Pt::comp(step.clone(), rest.clone()));
            let f1 = fact(trs, &rest, n)?;
            join(trs, Factor { chi: step, phi: rest, deriv: d }, f1)
        }
        Pt::Comp(a, b) => fact_comp(trs, p, a, b, n),
        Pt::Inf(fam) => fact_inf(trs, fam, n),
        Pt::Iter(..) => Err(Error::pre("templates cannot be factorised")),
    }
}

fn fact_fun(trs: &Trs, p: &Pt, n: u64) -> Result<Factor> {
    let (f, ks) = p.as_app()?.expect("function application");
    let c = holes_ctx(&f, ks.len());
    let fs = ks.iter().map(|k| fact(trs, k, n - 1)).collect::<Result<Vec<_>>>()?;
    let compat = derive_ctx_compat(trs, &c, fs.iter().map(|x| x.deriv.clone()).collect())?;
    let chis: Vec<Pt> = fs.iter().map(|x| x.chi.clone()).collect();
    let phis: Vec<Pt> = fs.into_iter().map(|x| x.phi).collect();
    let apart = Deriv::symm(derive_struct_ctx(trs, &c, &chis, &phis)?);
    let (seq, dseq) = seq_ctx(trs, &c, chis)?;
    let phi = Pt::plug(&c, phis)?;
    let d = Deriv::chain(p.clone(), vec![compat, apart, Deriv::comp(dseq, Deriv::refl(phi.clone()))]);
    tidy(trs, Factor { chi: seq, phi, deriv: d })
}

fn fact_comp(trs: &Trs, p: &Pt, a: &Pt, b: &Pt, n: u64) -> Result<Factor> {
    let f2 = fact(trs, b, n)?;
    let (deepest, total) = jump_bounds(trs, &f2.chi)?;
    let f1 = fact(trs, a, n.max(deepest) + total)?;
    let (chi2, phi1, dj) = jump(trs, &f1.phi, &f2.chi)?;
    let d0 = Deriv::comp(f1.deriv, f2.deriv);
    let mid = Pt::comp(f1.chi.clone(), Pt::comp(Pt::comp(f1.phi.clone(), f2.chi.clone()), f2.phi.clone()));
    let r1 = derive_rebracket(&d0.rhs, &mid)?;
    let d2 = Deriv::comp(Deriv::refl(f1.chi.clone()), Deriv::comp(dj, Deriv::refl(f2.phi.clone())));
    let chi = Pt::comp(f1.chi, chi2);
    let phi = Pt::comp(phi1, f2.phi);
    let r2 = derive_rebracket(&d2.rhs, &Pt::comp(chi.clone(), phi.clone()))?;
    let d = Deriv::chain(p.clone(), vec![d0, r1, d2, r2]);
    tidy(trs, Factor { chi, phi, deriv: d })
}

/// Splits `⊙ψ_i` where every later element is deeper than `n`.
fn fact_inf(trs: &Trs, fam: &Family, n: u64) -> Result<Factor> {
    let m = mind_form(trs, &fam.body)?;
    if !m.diverges_in(&fam.var) {
        return Err(Error::NonConvergent(format!("activity depth of ⊙{} elements stays bounded", fam.var)));
    }
    let deep = |j: u64| m.subst(&fam.var, &Affine::constant(j)).at_zero().is_none_or(|x| x > n);
    let mut j = 0;
    while !deep(j) {
        j += 1;
    }
    let mut cut = fam.prefix.len() + j as usize;
    if j == 0 {
        while cut > 0 && mind(trs, &fam.prefix[cut - 1])?.is_none_or(|x| x > n) {
            cut -= 1;
        }
    }
    let g = fam.with_prefix_len(cut)?;
    let head = Pt::comps(g.prefix[..cut].to_vec());
    let rest = Pt::Inf(Family { prefix: g.prefix[cut..].to_vec(), var: g.var.clone(), body: g.body.clone() });
    let start = Pt::Inf(g);
    let r0 = derive_rebracket(&start, &Pt::comp(head.clone(), rest.clone()))?;
    let fh = fact(trs, &head, n)?;
    let d1 = Deriv::comp(fh.deriv, Deriv::refl(rest.clone()));
    let phi = Pt::comp(fh.phi, rest);
    let r2 = derive_rebracket(&d1.rhs, &Pt::comp(fh.chi.clone(), phi.clone()))?;
    let d = Deriv::chain(start, vec![r0, d1, r2]);
    tidy(trs, Factor { chi: fh.chi, phi, deriv: d })
}

#[derive(Clone, Debug, Serialize)]
pub struct CompressStats {
    pub steps_count: String,
    pub mind: Option<u64>,
    pub layers: Layers,
    /// Factorisation rounds computed.
    pub rounds: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Layers {
    pub input: String,
    pub output: String,
}

#[derive(Clone, Debug)]
pub struct Compressed {
    pub result: Pt,
    pub deriv: Deriv,
    pub stats: CompressStats,
}

const MAX_ROUNDS: u64 = 48;
const MIN_CHUNKS: usize = 12;
const MAX_CHUNK_STEPS: usize = 32;

fn finish(trs: &Trs, p: &Pt, result: Pt, deriv: Deriv, rounds: usize) -> Result<Compressed> {
    let stats = CompressStats {
        steps_count: steps_count(trs, &result)?.to_string(),
        mind: mind(trs, &result)?,
        layers: Layers { input: validate_pterm(trs, p)?.to_string(), output: validate_pterm(trs, &result)?.to_string() },
        rounds,
    };
    Ok(Compressed { result, deriv, stats })
}

/// An equivalent stepwise proof term with at most ω steps.
pub fn compress(trs: &Trs, p: &Pt) -> Result<Compressed> {
    require_closed(p)?;
    validate_pterm(trs, p)?;
    check_convergent(trs, p)?;
    if is_pnpterm(trs, p) && steps_count(trs, p)? <= Ordinal::omega() {
        return finish(trs, p, p.clone(), Deriv::refl(p.clone()), 0);
    }
    if is_trivial(trs, p) {
        let d = derive_trivial_src(trs, p)?;
        return finish(trs, p, d.rhs.clone(), d, 0);
    }
    let unit = Pt::MStep(source(trs, p)?);
    // `acc` is the composition of the steps found so far, nested to the
    // left; `d` proves `p ≈e acc·ψ`, or `p ≈e ψ` while `acc` is empty.
    let mut acc: Option<Pt> = None;
    let mut d = Deriv::refl(p.clone());
    let mut psi = p.clone();
    let mut chunks: Vec<Pt> = vec![];
    let mut lefts: Vec<(usize, Deriv)> = vec![];
    let mut k = 0u64;
    loop {
        let f = fact(trs, &psi, k)?;
        let trivial_chi = is_unit(trs, &f.chi);
        d = match &acc {
            None if trivial_chi => {
                let drop = Deriv::eqn(Schema::IdLeft, f.deriv.rhs.clone(), f.phi.clone());
                Deriv::trans(d, Deriv::trans(f.deriv, drop))
            }
            None => Deriv::trans(d, f.deriv),
            Some(a) if trivial_chi => {
                let drop = Deriv::eqn(Schema::IdLeft, f.deriv.rhs.clone(), f.phi.clone());
                Deriv::trans(d, Deriv::comp(Deriv::refl(a.clone()), Deriv::trans(f.deriv, drop)))
            }
            Some(a) => {
                let step = Deriv::comp(Deriv::refl(a.clone()), f.deriv);
                let next = Pt::comp(Pt::comp(a.clone(), f.chi.clone()), f.phi.clone());
                let assoc = Deriv::eqn(Schema::Assoc, step.rhs.clone(), next);
                Deriv::chain(d.lhs.clone(), vec![d, step, assoc])
            }
        };
        if !trivial_chi {
            if f.chi.comp_list().len() > MAX_CHUNK_STEPS {
                return Err(Error::UnsupportedFamily(format!(
                    "round {k} contributes more than {MAX_CHUNK_STEPS} steps; no template covers a growing chunk"
                )));
            }
            chunks.push(f.chi.clone());
            acc = Some(match acc {
                None => f.chi.clone(),
                Some(a) => Pt::comp(a, f.chi.clone()),
            });
        }
        psi = f.phi;
        let left = match &acc {
            None => Deriv::trans(d.clone(), unit_left(&unit, &psi)),
            Some(_) => d.clone(),
        };
        lefts.push((chunks.len(), left));
        k += 1;
        if is_trivial(trs, &psi) {
            let a = acc.ok_or_else(|| Error::pre("a proof term equivalent to a trivial one is trivial"))?;
            let d = if psi.is_mstep() {
                d
            } else {
                let ds = derive_trivial_src(trs, &psi)?;
                let t = ds.rhs.clone();
                psi = t;
                Deriv::trans(d, Deriv::comp(Deriv::refl(a.clone()), ds))
            };
            let drop = Deriv::eqn(Schema::IdRight, Pt::comp(a.clone(), psi.clone()), a.clone());
            let (q, dq) = right_normal(&a)?;
            let d = Deriv::chain(p.clone(), vec![d, drop, dq]);
            return finish(trs, p, q, d, k as usize);
        }
        if k > DEFAULT_SAMPLES && chunks.len() >= MIN_CHUNKS || k >= MAX_ROUNDS {
            break;
        }
    }
    let fam = synth_family(&trs.sig, &chunks)
        .ok_or_else(|| Error::UnsupportedFamily(format!("no template reproduces the steps found in {k} rounds")))?;
    let q = Pt::Inf(fam.clone());
    validate_pterm(trs, &q)?;
    let mut rights: Vec<Deriv> = vec![];
    let mut r = Deriv::refl(q.clone());
    let mut a: Option<Pt> = None;
    for j in 0..chunks.len() {
        rights.push(r.clone());
        let c = fam.instance(j as u64)?;
        a = Some(match a {
            None => c,
            Some(a) => {
                let l = Pt::comp(a.clone(), Pt::Inf(fam.drop_first(j as u64)?));
                let next = Pt::comp(Pt::comp(a.clone(), c.clone()), Pt::Inf(fam.drop_first(j as u64 + 1)?));
                r = Deriv::trans(r, Deriv::eqn(Schema::Assoc, l, next));
                Pt::comp(a, c)
            }
        });
    }
    rights.push(r);
    let pairs = lefts
        .into_iter()
        .take(DEFAULT_SAMPLES as usize + 1)
        .map(|(m, l)| {
            let right = if m == 0 { unit_left(&unit, &q) } else { rights[m].clone() };
            (l, right)
        })
        .collect();
    finish(trs, p, q.clone(), Deriv::lim(p.clone(), q, pairs), k as usize)
}

/// A family whose instances are exactly `chunks`, with a prefix of at
/// most three explicit elements.
fn synth_family(sig: &Signature, chunks: &[Pt]) -> Option<Family> {
    (0..=3usize).filter(|p| chunks.len() >= p + 4).find_map(|p| {
        let body = synth(sig, &chunks[p..], "i")?;
        let fam = Family::new(chunks[..p].to_vec(), "i", body);
        let ok = chunks.iter().enumerate().all(|(i, c)| {
            fam.instance(i as u64).is_ok_and(|x| pt_cmp(&x, c, DEFAULT_SAMPLES).is_ok_and(|r| r == Cmp::Equal))
        });
        ok.then_some(fam)
    })
}

fn synth(sig: &Signature, xs: &[Pt], v: &str) -> Option<Pt> {
    if xs.iter().all(|x| x == &xs[0]) {
        return Some(xs[0].clone());
    }
    if xs.iter().all(|x| matches!(x, Pt::Comp(..))) {
        let (ls, rs): (Vec<Pt>, Vec<Pt>) = xs.iter().map(|x| x.as_comp().ok().flatten().expect("composition")).unzip();
        return Some(Pt::comp(synth(sig, &ls, v)?, synth(sig, &rs, v)?));
    }
    let apps: Option<Vec<(Sym, Vec<Pt>)>> = xs.iter().map(|x| x.as_app().ok().flatten()).collect();
    if let Some(apps) = apps {
        let (f, k0) = &apps[0];
        if apps.iter().all(|(g, ks)| g == f && ks.len() == k0.len()) {
            let kids = (0..k0.len())
                .map(|j| synth(sig, &apps.iter().map(|(_, ks)| ks[j].clone()).collect::<Vec<_>>(), v))
                .collect::<Option<Vec<_>>>();
            if let Some(kids) = kids {
                return Some(Pt::app(sig, f, kids));
            }
        }
    }
    iteration(sig, xs, v)
}

/// `x_j = C^j[x_0]` for a context `C` over function symbols with its hole
/// at depth at most three.
fn iteration(sig: &Signature, xs: &[Pt], v: &str) -> Option<Pt> {
    let ts: Vec<&Term> = xs.iter().map(Pt::as_mstep).collect::<Option<_>>()?;
    let (t0, t1) = (ts[0], ts.get(1)?);
    for w in t1.positions_upto(3) {
        if w.is_root() || t1.subterm_at(&w).ok().as_ref() != Some(t0) {
            continue;
        }
        let Ok(c) = t1.replace_at(&Term::hole(), &w) else { continue };
        if !c.symbols().iter().all(|f| sig.is_function(f)) || c.hole_positions().map(|h| h.len()) != Ok(1) {
            continue;
        }
        if ts.iter().enumerate().all(|(j, t)| iterate_ctx(&c, j as u64, t0).is_ok_and(|u| &u == *t)) {
            return Pt::iter(c, Affine::var(&crate::term::sym(v)), Pt::MStep(t0.clone())).ok();
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivalence::{check_derivation, Mode};
    use crate::syntax::{parse_pt, parse_term, parse_workspace};

    const SYS: &str = "sig h/2 f/1 g/1 i/1 j/1 k/1 m/1 a/0 b/0 c/0\n\
        rule rho: i(x) -> x\nrule rho2: j(x) -> x\nrule mu: k(x) -> g(x)\nrule nu: g(x) -> m(x)\nrule pi: a -> c\n";

    fn setup() -> Trs {
        parse_workspace(SYS).unwrap().trs
    }

    fn pt(trs: &Trs, s: &str) -> Pt {
        parse_pt(s, trs).unwrap()
    }

    fn pos(s: &str) -> Position {
        s.parse().unwrap()
    }

    fn set(xs: &[&str]) -> BTreeSet<Position> {
        xs.iter().map(|x| pos(x)).collect()
    }

    fn assert_checked(trs: &Trs, d: &Deriv, l: &Pt, r: &Pt) {
        check_derivation(trs, d, Mode::Full).unwrap();
        assert_eq!(pt_cmp(&d.lhs, l, 8).unwrap(), Cmp::Equal, "lhs {}", d.lhs);
        assert_eq!(pt_cmp(&d.rhs, r, 8).unwrap(), Cmp::Equal, "rhs {}", d.rhs);
    }

    #[test]
    fn collapsing() {
        let t = setup();
        let m = parse_term("h(rho(rho2(mu(a))), mu(b))", &t.sig).unwrap();
        let cs = collapsing_analysis(&t, &m, &pos("1")).unwrap();
        assert_eq!(cs.length(), Some(3));
        let w = parse_term("rho^w", &t.sig).unwrap();
        assert!(collapsing_analysis(&t, &w, &Position::root()).unwrap().infinite);
        let a = parse_term("a", &t.sig).unwrap();
        assert_eq!(collapsing_analysis(&t, &a, &Position::root()).unwrap().length(), Some(1));
        assert!(matches!(collapsing_analysis(&t, &a, &pos("1")), Err(Error::PositionOutOfDomain(_))));
        let (steps, rest) = head_flatten(&t, &parse_term("rho(rho2(mu(a)))", &t.sig).unwrap()).unwrap();
        assert_eq!(steps.len(), 3);
        assert_eq!(rest.to_string(), "g(a)");
        assert!(matches!(head_flatten(&t, &w), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn prefixes() {
        let t = setup();
        let s = parse_term("h(f(a), b)", &t.sig).unwrap();
        assert_eq!(term_prefix(&s, &set(&[])).unwrap(), Term::hole());
        assert_eq!(term_prefix(&s, &set(&["ε"])).unwrap().to_string(), "h(_, _)");
        assert_eq!(term_prefix(&s, &set(&["ε", "1"])).unwrap().to_string(), "h(f(_), _)");
        assert!(respects_check(&t, &pt(&t, "h(mu(a); nu(a), pi)"), &set(&["ε"])));
        assert!(!respects_check(&t, &pt(&t, "mu(a)"), &set(&["ε"])));
    }

    #[test]
    fn condensation() {
        let t = setup();
        let p = pt(&t, "f(mu(a)); f(nu(a))");
        let (q, d) = cfps(&t, &p).unwrap();
        assert_eq!(q, pt(&t, "f(mu(a); nu(a))"));
        assert_checked(&t, &d, &p, &q);
        let p = pt(&t, "h(f(g(mu(a))), mu(b)); h(f(g(g(pi))), nu(b))");
        let (q, d) = cfpc(&t, &p, &set(&["ε", "1", "11"])).unwrap();
        assert_eq!(q, pt(&t, "h(f(g(mu(a); g(pi))), mu(b); nu(b))"));
        assert_checked(&t, &d, &p, &q);
    }

    #[test]
    fn factorisations() {
        let t = setup();
        let p = pt(&t, "mu(a)");
        let f = factorise(&t, &p, 0).unwrap();
        assert_eq!((f.chi.to_string(), f.phi.to_string()), ("mu(a)".into(), "g(a)".into()));
        assert_checked(&t, &f.deriv, &p, &Pt::comp(f.chi, f.phi));
        let p = pt(&t, "h(rho(mu(pi)), mu(b)); h(nu(c), nu(b))");
        for n in 0..4 {
            let f = factorise(&t, &p, n).unwrap();
            assert!(mind(&t, &f.phi).unwrap().is_none_or(|m| m > n), "n = {n}: {}", f.phi);
            assert_checked(&t, &f.deriv, &p, &Pt::comp(f.chi, f.phi));
        }
    }

    #[test]
    fn compress_finite() {
        let t = parse_workspace("sig f/1 g/1 a/0\nrule mu: f(x) -> g(x)\n").unwrap().trs;
        let p = pt(&t, "mu(mu(a))");
        let c = compress(&t, &p).unwrap();
        assert_eq!(c.result, pt(&t, "mu(f(a)); g(mu(a))"));
        assert_checked(&t, &c.deriv, &p, &c.result);
    }
}
