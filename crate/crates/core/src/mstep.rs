//! Multisteps: closed rational terms over function and rule symbols.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::position::Position;
use crate::term::{Builder, Label, Occ, Sym, Term};
use crate::trs::{Rule, Trs};

/// Checks that `t` is a closed multistep over the signature of `trs`.
pub fn check_mstep(trs: &Trs, t: &Term) -> Result<()> {
    t.check_signature(&trs.sig)?;
    if !t.is_closed() || t.has_holes() {
        return Err(Error::MalformedTerm { node: 0, reason: format!("{t} is not closed") });
    }
    Ok(())
}

/// Places a copy of `pat` at builder node `at`, sending each variable of the
/// pattern to the node chosen by `var`. The pattern root must not be a variable.
pub fn graft(b: &mut Builder, pat: &Term, at: usize, mut var: impl FnMut(&Sym) -> usize) {
    let ids: Vec<Option<usize>> = pat
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| match &n.label {
            Label::Var(_) => None,
            _ if i == 0 => Some(at),
            _ => Some(b.reserve()),
        })
        .collect();
    let mut var_ids: HashMap<usize, usize> = HashMap::new();
    for (i, n) in pat.nodes().iter().enumerate() {
        if let Label::Var(x) = &n.label {
            var_ids.insert(i, var(x));
        }
    }
    for (i, n) in pat.nodes().iter().enumerate() {
        if let Some(id) = ids[i] {
            let kids = n.kids.iter().map(|&k| ids[k].unwrap_or_else(|| var_ids[&k])).collect();
            b.set(id, n.label.clone(), kids);
        }
    }
}

fn rule_of<'a>(trs: &'a Trs, l: &Label) -> Option<&'a Rule> {
    l.as_sym().and_then(|s| trs.rule(s))
}

/// The `src_T` normal form: every rule symbol replaced by its lhs.
pub fn mstep_src(trs: &Trs, t: &Term) -> Result<Term> {
    let mut b = Builder::new();
    let ids: Vec<usize> = t.nodes().iter().map(|_| b.reserve()).collect();
    for (i, n) in t.nodes().iter().enumerate() {
        match rule_of(trs, &n.label) {
            Some(r) => {
                if n.kids.len() != r.arity() {
                    return Err(Error::ArityMismatch { expected: r.arity(), found: n.kids.len() });
                }
                graft(&mut b, &r.lhs, ids[i], |x| ids[n.kids[r.vars.iter().position(|v| v == x).unwrap()]]);
            }
            None => b.set(ids[i], n.label.clone(), n.kids.iter().map(|&k| ids[k]).collect()),
        }
    }
    Ok(b.finish(ids[0]))
}

/// The `tgt_T` normal form, computed on demand from the root. Collapsing
/// rules are chased through their argument; a cycle of collapses met on a
/// needed path makes the multistep non-convergent. Erased arguments are never
/// visited.
pub fn mstep_tgt(trs: &Trs, t: &Term) -> Result<Term> {
    let resolve = |mut n: usize, at: &Position| -> Result<usize> {
        let mut seen = vec![];
        while let Some(r) = rule_of(trs, t.label_at(n)) {
            let Some(j) = r.collapse_index() else { break };
            if seen.contains(&n) {
                let names: Vec<String> = seen.iter().map(|&m| t.label_at(m).name().to_string()).collect();
                return Err(Error::NonConvergent(format!(
                    "infinite collapsing sequence [{}] needed at target position {at}",
                    names.join(", ")
                )));
            }
            seen.push(n);
            n = t.kids_at(n)[j];
        }
        Ok(n)
    };
    fn demand(
        memo: &mut HashMap<usize, usize>,
        b: &mut Builder,
        work: &mut VecDeque<(usize, Position)>,
        m: usize,
        p: Position,
    ) -> usize {
        *memo.entry(m).or_insert_with(|| {
            work.push_back((m, p));
            b.reserve()
        })
    }
    let mut b = Builder::new();
    let mut memo: HashMap<usize, usize> = HashMap::new();
    let mut work: VecDeque<(usize, Position)> = VecDeque::new();
    let r0 = resolve(0, &Position::root())?;
    let root = demand(&mut memo, &mut b, &mut work, r0, Position::root());
    while let Some((m, p)) = work.pop_front() {
        let id = memo[&m];
        let node = &t.nodes()[m];
        match rule_of(trs, &node.label) {
            Some(r) => {
                let mut kid_ids: HashMap<Sym, usize> = HashMap::new();
                let rv = r.rhs.vars();
                for (j, x) in r.vars.iter().enumerate() {
                    if rv.contains(x) {
                        let k = resolve(node.kids[j], &p)?;
                        kid_ids.insert(x.clone(), demand(&mut memo, &mut b, &mut work, k, p.clone()));
                    }
                }
                graft(&mut b, &r.rhs, id, |x| kid_ids[x]);
            }
            None => {
                let mut kids = Vec::with_capacity(node.kids.len());
                for (j, &k) in node.kids.iter().enumerate() {
                    let q = p.child(j as u32 + 1);
                    let k = resolve(k, &q)?;
                    kids.push(demand(&mut memo, &mut b, &mut work, k, q));
                }
                b.set(id, node.label.clone(), kids);
            }
        }
    }
    Ok(b.finish(root))
}

/// Minimal depth of a rule symbol; `None` stands for ω.
pub fn mstep_mind(trs: &Trs, t: &Term) -> Option<usize> {
    t.min_depth_where(|l| rule_of(trs, l).is_some())
}

pub fn is_trivial(trs: &Trs, t: &Term) -> bool {
    mstep_mind(trs, t).is_none()
}

/// The position of the single rule symbol of a one-step.
pub fn one_step_position(trs: &Trs, t: &Term) -> Option<Position> {
    let occ = t.occurrences();
    let mut total = 0;
    for (i, n) in t.nodes().iter().enumerate() {
        if rule_of(trs, &n.label).is_some() {
            match occ[i] {
                Occ::Zero => {}
                Occ::One => total += 1,
                Occ::Many => return None,
            }
        }
    }
    if total != 1 {
        return None;
    }
    t.find_position(|l| rule_of(trs, l).is_some())
}

/// Positions of rule symbols, when finitely many.
pub fn rule_positions(trs: &Trs, t: &Term) -> Option<Vec<Position>> {
    t.finite_positions_where(|l| rule_of(trs, l).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Signature;

    fn app(f: &str, a: Vec<Term>) -> Term {
        Term::app(f, a)
    }

    fn v(x: &str) -> Term {
        Term::var(x)
    }

    fn c(x: &str) -> Term {
        Term::cnst(x)
    }

    fn trs() -> Trs {
        let sig = Signature::with_functions(&[("f", 2), ("i", 1), ("h", 1), ("g", 1), ("m", 1), ("n", 1), ("a", 0), ("b", 0)]);
        let rules = vec![
            Rule::new("mu", app("f", vec![app("i", vec![v("x")]), v("y")]), app("h", vec![v("y")])).unwrap(),
            Rule::new("nu", app("g", vec![v("x")]), v("x")).unwrap(),
            Rule::new("rho", c("a"), c("b")).unwrap(),
            Rule::new("pi", app("m", vec![v("x")]), app("n", vec![v("x")])).unwrap(),
        ];
        Trs::new(sig, rules).unwrap()
    }

    #[test]
    fn sources_and_targets() {
        let t = trs();
        let psi1 = app("h", vec![app("mu", vec![c("rho"), app("n", vec![app("pi", vec![c("b")])])])]);
        assert_eq!(mstep_src(&t, &psi1).unwrap().to_string(), "h(f(i(a), n(m(b))))");
        assert_eq!(mstep_tgt(&t, &psi1).unwrap().to_string(), "h(h(n(n(b))))");
        let piw = Term::omega("pi");
        assert_eq!(mstep_src(&t, &piw).unwrap(), Term::omega("m"));
        assert_eq!(mstep_tgt(&t, &piw).unwrap(), Term::omega("n"));
        assert!(matches!(mstep_tgt(&t, &Term::omega("nu")), Err(Error::NonConvergent(_))));
        let psi4 = app("h", vec![app("mu", vec![Term::omega("nu"), c("rho")])]);
        assert_eq!(mstep_src(&t, &psi4).unwrap().to_string(), "h(f(i(g^w), a))");
        assert_eq!(mstep_tgt(&t, &psi4).unwrap().to_string(), "h(h(b))");
    }

    #[test]
    fn depths_and_one_steps() {
        let t = trs();
        assert_eq!(mstep_mind(&t, &Term::omega("h")), None);
        assert_eq!(mstep_mind(&t, &app("h", vec![c("rho")])), Some(1));
        assert_eq!(one_step_position(&t, &app("h", vec![c("rho")])).unwrap().to_string(), "1");
        assert_eq!(one_step_position(&t, &app("f", vec![app("i", vec![c("rho")]), c("rho")])), None);
        assert_eq!(one_step_position(&t, &Term::omega("pi")), None);
    }
}
