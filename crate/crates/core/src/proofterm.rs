//! Validation, layers, sources, targets and activity depths of proof terms.

use std::collections::BTreeMap;

use crate::affine::{Affine, MinForm};
use crate::error::{Error, Result};
use crate::family::TermFamily;
use crate::mstep::{check_mstep, mstep_mind, mstep_src, mstep_tgt, one_step_position};
use crate::ordinal::{ord_inf_sum, Ordinal, OrdinalFamily, Pattern, DEFAULT_SAMPLES};
use crate::pterm::{Family, Pt};
use crate::term::{Label, Sym, Term};
use crate::trs::Trs;

fn hole_depth(c: &Term) -> Result<u64> {
    let hs = c.hole_positions()?;
    match hs.as_slice() {
        [p] => Ok(p.depth() as u64),
        _ => Err(Error::pre(format!("context {c} must have exactly one hole"))),
    }
}

fn closed(tf: TermFamily, what: &str) -> Result<Term> {
    match tf {
        TermFamily::Const(t) => Ok(t),
        other => Err(Error::pre(format!("{what} {other} depends on unbound indices"))),
    }
}

/// Source as a term family over the free index variables.
pub fn source_family(trs: &Trs, p: &Pt) -> Result<TermFamily> {
    Ok(match p {
        Pt::MStep(t) => TermFamily::Const(mstep_src(trs, t)?),
        Pt::Comp(a, _) => source_family(trs, a)?,
        Pt::Inf(f) => match f.prefix.first() {
            Some(h) => source_family(trs, h)?,
            None => source_family(trs, &f.body)?.subst_var(&f.var, &Affine::constant(0))?,
        },
        Pt::Fun(s, ks) => {
            TermFamily::sym_s(s.clone(), ks.iter().map(|k| source_family(trs, k)).collect::<Result<_>>()?)
        }
        Pt::Rule(mu, ks) => {
            let r = trs.rule_or_err(mu)?;
            let subs = r.vars.iter().cloned().zip(ks.iter().map(|k| source_family(trs, k))).map(|(x, k)| Ok((x, k?)));
            TermFamily::graft(r.lhs.clone(), subs.collect::<Result<_>>()?)
        }
        Pt::Iter(c, e, b) => TermFamily::iter(c.clone(), e.clone(), source_family(trs, b)?)?,
    })
}

/// Target as a term family; fails with `NonConvergent` when undefined.
pub fn target_family(trs: &Trs, p: &Pt) -> Result<TermFamily> {
    Ok(match p {
        Pt::MStep(t) => TermFamily::Const(mstep_tgt(trs, t)?),
        Pt::Comp(_, b) => target_family(trs, b)?,
        Pt::Inf(f) => {
            let m = mind_form(trs, &f.body)?;
            if !m.diverges_in(&f.var) {
                return Err(Error::NonConvergent(format!(
                    "activity depth of the elements of ⊙{} does not grow (min of {:?})",
                    f.var, m.0
                )));
            }
            target_family(trs, &f.body)?.limit(&f.var)?
        }
        Pt::Fun(s, ks) => {
            TermFamily::sym_s(s.clone(), ks.iter().map(|k| target_family(trs, k)).collect::<Result<_>>()?)
        }
        Pt::Rule(mu, ks) => {
            let r = trs.rule_or_err(mu)?;
            let mut subs = BTreeMap::new();
            for j in r.rhs_indices() {
                subs.insert(r.vars[j].clone(), target_family(trs, &ks[j])?);
            }
            TermFamily::graft(r.rhs.clone(), subs)
        }
        Pt::Iter(c, e, b) => TermFamily::iter(c.clone(), e.clone(), target_family(trs, b)?)?,
    })
}

pub fn source(trs: &Trs, p: &Pt) -> Result<Term> {
    closed(source_family(trs, p)?, "source")
}

pub fn target(trs: &Trs, p: &Pt) -> Result<Term> {
    closed(target_family(trs, p)?, "target")
}

/// Minimum activity depth as a minimum of affine forms in the free indices.
pub fn mind_form(trs: &Trs, p: &Pt) -> Result<MinForm> {
    Ok(match p {
        Pt::MStep(t) => match mstep_mind(trs, t) {
            Some(d) => MinForm::nat(d as u64),
            None => MinForm::omega(),
        },
        Pt::Comp(a, b) => mind_form(trs, a)?.min(mind_form(trs, b)?),
        Pt::Inf(f) => {
            let mut m = mind_form(trs, &f.body)?.subst(&f.var, &Affine::constant(0));
            for q in &f.prefix {
                m = m.min(mind_form(trs, q)?);
            }
            m
        }
        Pt::Fun(_, ks) => {
            let mut m = MinForm::omega();
            for k in ks {
                m = m.min(mind_form(trs, k)?.add(&Affine::constant(1)));
            }
            m
        }
        Pt::Rule(..) => MinForm::nat(0),
        Pt::Iter(c, e, b) => mind_form(trs, b)?.add(&e.scale(hole_depth(c)?)),
    })
}

/// `None` stands for ω.
pub fn mind(trs: &Trs, p: &Pt) -> Result<Option<u64>> {
    Ok(mind_form(trs, p)?.at_zero())
}

/// Convergence per construction: every composed element converges, the
/// activity depth of infinite compositions grows, and rule arguments that
/// survive in the rhs converge.
pub fn check_convergent(trs: &Trs, p: &Pt) -> Result<()> {
    match p {
        Pt::MStep(t) => mstep_tgt(trs, t).map(|_| ()),
        Pt::Comp(a, b) => {
            check_convergent(trs, a)?;
            check_convergent(trs, b)
        }
        Pt::Inf(f) => {
            for q in &f.prefix {
                check_convergent(trs, q)?;
            }
            check_convergent(trs, &f.body)?;
            let m = mind_form(trs, &f.body)?;
            if !m.diverges_in(&f.var) {
                return Err(Error::NonConvergent(format!("activity depth of ⊙{} elements stays bounded", f.var)));
            }
            Ok(())
        }
        Pt::Fun(_, ks) => ks.iter().try_for_each(|k| check_convergent(trs, k)),
        Pt::Rule(mu, ks) => {
            let r = trs.rule_or_err(mu)?;
            r.rhs_indices().into_iter().try_for_each(|j| check_convergent(trs, &ks[j]))
        }
        Pt::Iter(_, _, b) => check_convergent(trs, b),
    }
}

pub fn is_convergent(trs: &Trs, p: &Pt) -> bool {
    check_convergent(trs, p).is_ok()
}

/// Validates a closed proof term and returns its layer.
pub fn validate_pterm(trs: &Trs, p: &Pt) -> Result<Ordinal> {
    validate_k(trs, p, DEFAULT_SAMPLES)
}

pub fn validate_k(trs: &Trs, p: &Pt, k: u64) -> Result<Ordinal> {
    if !trs.is_left_linear() {
        return Err(Error::pre("proof terms require a left-linear system"));
    }
    if !p.is_closed() {
        return Err(Error::pre(format!("open template: free indices {:?}", p.free_vars())));
    }
    layer(trs, p, k, "ε")
}

fn composable(trs: &Trs, a: &Pt, b: &Pt, path: &str) -> Result<()> {
    let t = target(trs, a).map_err(|e| match e {
        Error::NonConvergent(w) => Error::NonConvergent(format!("left operand at {path}: {w}")),
        e => e,
    })?;
    let s = source(trs, b)?;
    if t != s {
        return Err(Error::NotComposable { path: path.to_string(), left: t.to_string(), right: s.to_string() });
    }
    Ok(())
}

fn layer(trs: &Trs, p: &Pt, k: u64, path: &str) -> Result<Ordinal> {
    match p {
        Pt::MStep(t) => {
            check_mstep(trs, t)?;
            let rules_ok = t.nodes().iter().all(|n| match &n.label {
                Label::Sym(s) => trs.rule(s).is_none_or(|r| r.arity() == n.kids.len()),
                _ => true,
            });
            if !rules_ok {
                return Err(Error::MalformedTerm { node: 0, reason: "rule symbol arity".into() });
            }
            Ok(Ordinal::one())
        }
        Pt::Comp(a, b) => {
            if let Pt::Inf(_) = **b {
                return layer(trs, &Pt::comp((**a).clone(), (**b).clone()), k, path);
            }
            let la = layer(trs, a, k, &format!("{path}.l"))?;
            let lb = layer(trs, b, k, &format!("{path}.r"))?;
            composable(trs, a, b, path)?;
            Ok(la.add(&lb).succ())
        }
        Pt::Inf(f) => {
            let n = f.prefix.len() as u64 + k;
            let mut layers = Vec::new();
            let mut prev: Option<Pt> = None;
            for i in 0..=n {
                let q = f.instance(i)?;
                let sub = format!("{path}[{i}]");
                layers.push(layer(trs, &q, k, &sub)?);
                if let Some(pr) = &prev {
                    composable(trs, pr, &q, &sub)?;
                }
                prev = Some(q);
            }
            check_convergent(trs, p).map_err(|e| match e {
                Error::NonConvergent(w) => Error::NonConvergent(format!("{path}: {w}")),
                e => e,
            })?;
            ord_inf_sum(&fit_family(&layers, f.prefix.len() as u64)?)
        }
        Pt::Fun(s, ks) | Pt::Rule(s, ks) => {
            let (arity, _) = trs.sig.get(s).ok_or_else(|| Error::UnknownSymbol(s.to_string()))?;
            if matches!(p, Pt::Fun(..)) != trs.sig.is_function(s) {
                return Err(Error::MalformedTerm { node: 0, reason: format!("{s} used with the wrong kind") });
            }
            if arity != ks.len() {
                return Err(Error::ArityMismatch { expected: arity, found: ks.len() });
            }
            let mut acc = Ordinal::zero();
            let mut all_one = true;
            for (j, q) in ks.iter().enumerate() {
                let l = layer(trs, q, k, &format!("{path}.{}", j + 1))?;
                all_one &= l == Ordinal::one();
                acc = acc.add(&l);
            }
            if all_one {
                return Ok(Ordinal::one());
            }
            Ok(acc.succ())
        }
        Pt::Iter(..) => Err(Error::pre(format!("template at {path} is not closed"))),
    }
}

/// Fits layers sampled at `0..n` to a declared eventual pattern starting at
/// `from`.
pub fn fit_family(samples: &[Ordinal], from: u64) -> Result<OrdinalFamily> {
    let from = from.min(samples.len().saturating_sub(1) as u64);
    let tail = &samples[from as usize..];
    let pattern = if tail.iter().all(|x| *x == tail[0]) {
        Pattern::EventuallyConstant { from, value: tail[0].clone() }
    } else {
        let nats: Option<Vec<u64>> = tail.iter().map(Ordinal::as_nat).collect();
        let nats = nats.ok_or_else(|| Error::UnsupportedFamily("layers follow no declared pattern".into()))?;
        if nats.len() < 2 || nats[1] < nats[0] {
            return Err(Error::UnsupportedFamily("layers follow no declared pattern".into()));
        }
        let a = nats[1] - nats[0];
        let b = nats[0].checked_sub(a * from).ok_or_else(|| Error::UnsupportedFamily("negative offset".into()))?;
        Pattern::EventuallyAffine { from, a, b }
    };
    let table = samples.to_vec();
    let pat = pattern.clone();
    let fam = OrdinalFamily::sampled(
        move |i| match table.get(i as usize) {
            Some(x) => x.clone(),
            None => match &pat {
                Pattern::EventuallyConstant { value, .. } => value.clone(),
                Pattern::EventuallyAffine { a, b, .. } => Ordinal::nat(a * i + b),
            },
        },
        pattern,
    );
    fam.verify(tail.len() as u64)?;
    Ok(fam)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Classification {
    pub is_mstep: bool,
    pub is_inf_concat: bool,
    pub is_trivial: bool,
    pub is_one_step: bool,
    pub is_ppterm: bool,
    pub is_pnpterm: bool,
}

pub fn is_trivial(trs: &Trs, p: &Pt) -> bool {
    match p {
        Pt::MStep(t) => crate::mstep::is_trivial(trs, t),
        Pt::Comp(a, b) => is_trivial(trs, a) && is_trivial(trs, b),
        Pt::Inf(f) => f.prefix.iter().all(|q| is_trivial(trs, q)) && is_trivial(trs, &f.body),
        Pt::Fun(_, ks) => ks.iter().all(|q| is_trivial(trs, q)),
        Pt::Rule(..) => false,
        Pt::Iter(_, _, b) => is_trivial(trs, b),
    }
}

/// Rule-symbol occurrences of a dot-free template, capped at 2; `None` when
/// the template contains a composition.
fn template_rule_count(trs: &Trs, p: &Pt) -> Option<u8> {
    match p {
        Pt::MStep(t) => {
            if crate::mstep::is_trivial(trs, t) {
                Some(0)
            } else if one_step_position(trs, t).is_some() {
                Some(1)
            } else {
                Some(2)
            }
        }
        Pt::Fun(_, ks) => ks.iter().try_fold(0u8, |acc, q| Some((acc + template_rule_count(trs, q)?).min(2))),
        Pt::Rule(_, ks) => ks.iter().try_fold(1u8, |acc, q| Some((acc + template_rule_count(trs, q)?).min(2))),
        Pt::Iter(c, e, b) => {
            let _ = (c, e);
            template_rule_count(trs, b)
        }
        Pt::Comp(..) | Pt::Inf(_) => None,
    }
}

pub fn is_one_step(trs: &Trs, p: &Pt) -> bool {
    template_rule_count(trs, p) == Some(1)
}

pub fn is_ppterm(trs: &Trs, p: &Pt) -> bool {
    match p {
        Pt::Comp(a, b) => is_ppterm(trs, a) && is_ppterm(trs, b),
        Pt::Inf(f) => f.prefix.iter().all(|q| is_ppterm(trs, q)) && is_ppterm(trs, &f.body),
        _ => is_one_step(trs, p),
    }
}

/// A stepwise proof term or a plain term over the function symbols.
pub fn is_pnpterm(trs: &Trs, p: &Pt) -> bool {
    match p {
        Pt::MStep(t) if crate::mstep::is_trivial(trs, t) => true,
        _ => is_ppterm(trs, p),
    }
}

pub fn classify(trs: &Trs, p: &Pt) -> Classification {
    Classification {
        is_mstep: p.is_mstep(),
        is_inf_concat: matches!(p, Pt::Inf(_)),
        is_trivial: is_trivial(trs, p),
        is_one_step: is_one_step(trs, p),
        is_ppterm: is_ppterm(trs, p),
        is_pnpterm: is_pnpterm(trs, p),
    }
}

/// `(⊙ψ_i)` with every element instantiated up to `n`, for inspection.
pub fn family_prefix(f: &Family, n: u64) -> Result<Vec<Pt>> {
    (0..n).map(|i| f.instance(i)).collect()
}

/// Index variables bound by enclosing families are not allowed here.
pub fn require_closed(p: &Pt) -> Result<()> {
    let fv = p.free_vars();
    if fv.is_empty() {
        Ok(())
    } else {
        Err(Error::pre(format!("unbound indices {:?}", fv.iter().map(|s| s.to_string()).collect::<Vec<_>>())))
    }
}

pub fn sym_list(v: &[Sym]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}
