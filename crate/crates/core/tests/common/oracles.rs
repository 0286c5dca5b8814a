//! Independent oracles over plain finite trees, and the exhaustive
//! rebracketing check.

use std::collections::HashMap;

use irw_core::denotation::{breq_check, breq_search, deneq_check, DeneqStatus};
use irw_core::equivalence::Mode;
use irw_core::mstep::{mstep_src, mstep_tgt};
use irw_core::pterm::Pt;
use irw_core::syntax::{parse_term, parse_workspace};
use irw_core::term::{Distance, Term};
use irw_core::trs::{apply_step, match_redexes, Trs};
use rand::Rng;

use super::gen;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree(pub String, pub Vec<Tree>);

impl Tree {
    pub fn parse(s: &str) -> Tree {
        fn go(s: &[u8], i: &mut usize) -> Tree {
            let skip = |i: &mut usize| {
                while *i < s.len() && s[*i] == b' ' {
                    *i += 1;
                }
            };
            skip(i);
            let start = *i;
            while *i < s.len() && s[*i].is_ascii_alphanumeric() {
                *i += 1;
            }
            let name = String::from_utf8(s[start..*i].to_vec()).unwrap();
            let mut kids = vec![];
            skip(i);
            if *i < s.len() && s[*i] == b'(' {
                *i += 1;
                loop {
                    kids.push(go(s, i));
                    skip(i);
                    *i += 1;
                    if s[*i - 1] == b')' {
                        break;
                    }
                }
            }
            Tree(name, kids)
        }
        go(s.as_bytes(), &mut 0)
    }

    fn subst(&self, s: &HashMap<String, Tree>) -> Tree {
        match s.get(&self.0) {
            Some(t) if self.1.is_empty() => t.clone(),
            _ => Tree(self.0.clone(), self.1.iter().map(|k| k.subst(s)).collect()),
        }
    }

    pub fn to_term(&self) -> Term {
        Term::app(&self.0, self.1.iter().map(Tree::to_term).collect())
    }

    /// Unfolding of `t` from node `n`, cut at depth `d` with `⊥`.
    pub fn truncate(t: &Term, n: usize, d: usize) -> Tree {
        if d == 0 {
            return Tree("⊥".into(), vec![]);
        }
        let kids = t.kids_at(n).iter().map(|&k| Tree::truncate(t, k, d - 1)).collect();
        Tree(t.label_at(n).name().to_string(), kids)
    }
}

/// Rule symbol, argument variables, lhs and rhs.
pub struct OracleRule {
    name: &'static str,
    vars: Vec<&'static str>,
    lhs: Tree,
    rhs: Tree,
}

pub const ORACLE_SYSTEM: &str = "sig f/2 g/1 a/0\nrule mu: g(x) -> f(x, x)\nrule nu: f(x, y) -> x\nrule rho: a -> g(a)\nrule pi: g(g(x)) -> g(x)\n";

fn oracle_rules() -> Vec<OracleRule> {
    let r = |name, vars: &[&'static str], l: &str, rr: &str| OracleRule {
        name,
        vars: vars.to_vec(),
        lhs: Tree::parse(l),
        rhs: Tree::parse(rr),
    };
    vec![
        r("mu", &["x"], "g(x)", "f(x, x)"),
        r("nu", &["x", "y"], "f(x, y)", "x"),
        r("rho", &[], "a", "g(a)"),
        r("pi", &["x"], "g(g(x))", "g(x)"),
    ]
}

/// Rewrites the leftmost-outermost rule symbol with its `side` until none
/// is left.
fn normalise(t: &Tree, rules: &[OracleRule], lhs: bool) -> Tree {
    fn step(t: &Tree, rules: &[OracleRule], lhs: bool) -> Option<Tree> {
        if let Some(r) = rules.iter().find(|r| r.name == t.0) {
            let s = r.vars.iter().map(|v| v.to_string()).zip(t.1.iter().cloned()).collect();
            return Some(if lhs { r.lhs.subst(&s) } else { r.rhs.subst(&s) });
        }
        for (i, k) in t.1.iter().enumerate() {
            if let Some(k2) = step(k, rules, lhs) {
                let mut kids = t.1.clone();
                kids[i] = k2;
                return Some(Tree(t.0.clone(), kids));
            }
        }
        None
    }
    let mut cur = t.clone();
    while let Some(next) = step(&cur, rules, lhs) {
        cur = next;
    }
    cur
}

/// Every closed tree with exactly `n` nodes over `syms`.
fn trees(n: usize, syms: &[(&str, usize)], memo: &mut HashMap<usize, Vec<Tree>>) -> Vec<Tree> {
    if let Some(v) = memo.get(&n) {
        return v.clone();
    }
    fn spread(n: usize, k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return if n == 0 { vec![vec![]] } else { vec![] };
        }
        (1..=n.saturating_sub(k - 1))
            .flat_map(|first| {
                spread(n - first, k - 1).into_iter().map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
            })
            .collect()
    }
    let mut out = vec![];
    for &(f, k) in syms {
        for sizes in spread(n - 1, k) {
            let mut acc: Vec<Vec<Tree>> = vec![vec![]];
            for s in sizes {
                let opts = trees(s, syms, memo);
                acc = acc.iter().flat_map(|pre| opts.iter().map(move |o| [pre.clone(), vec![o.clone()]].concat())).collect();
            }
            out.extend(acc.into_iter().map(|kids| Tree(f.to_string(), kids)));
        }
    }
    memo.insert(n, out.clone());
    out
}

/// Source and target of every multistep with at most `max` nodes, against
/// exhaustive companion rewriting. Returns the number of multisteps.
pub fn mstep_oracle(max: usize) -> Result<usize, String> {
    let ws = parse_workspace(ORACLE_SYSTEM).unwrap();
    let rules = oracle_rules();
    let syms = [("f", 2), ("g", 1), ("a", 0), ("mu", 1), ("nu", 2), ("rho", 0), ("pi", 1)];
    let mut memo = HashMap::new();
    let mut count = 0;
    for n in 1..=max {
        for t in trees(n, &syms, &mut memo) {
            let m = t.to_term();
            let src = mstep_src(&ws.trs, &m).map_err(|e| format!("src {m}: {e}"))?;
            let tgt = mstep_tgt(&ws.trs, &m).map_err(|e| format!("tgt {m}: {e}"))?;
            let (os, ot) = (normalise(&t, &rules, true).to_term(), normalise(&t, &rules, false).to_term());
            if src != os || tgt != ot {
                return Err(format!("{m}: library ({src}, {tgt}), oracle ({os}, {ot})"));
            }
            count += 1;
        }
    }
    Ok(count)
}

/// Distance against comparison of truncations to depth 12, on `pairs`
/// random rational pairs.
pub fn distance_oracle(pairs: usize, seed: u64) -> Result<usize, String> {
    let ws = parse_workspace("sig f/2 g/1 a/0 b/0\n").unwrap();
    let fns = gen::functions(&ws.trs);
    let r = &mut gen::rng(seed);
    let mut strict = 0;
    for _ in 0..pairs {
        let t = gen::rational(r, &fns, 6);
        let u = if r.gen_bool(0.8) {
            let p = gen::position(r, &t, 12);
            t.replace_at(&gen::rational(r, &fns, 4), &p).unwrap()
        } else {
            gen::rational(r, &fns, 6)
        };
        let first = (0..=12).find(|&k| Tree::truncate(&t, 0, k + 1) != Tree::truncate(&u, 0, k + 1));
        let ok = match (t.distance(&u), first) {
            (Distance::Pow(k), Some(j)) => k as usize == j,
            (Distance::Pow(k), None) => k > 12,
            (Distance::Zero, f) => f.is_none(),
        };
        if !ok {
            return Err(format!("{t} vs {u}: {} but truncation differs first at {first:?}", t.distance(&u)));
        }
        strict += first.is_some() as usize;
    }
    Ok(strict)
}

pub const BREQ_SYSTEM: &str = "sig h/2 f/1 g/1 a/0 b/0\nrule mu: f(x) -> g(x)\nrule nu: g(x) -> f(x)\nrule rho: a -> b\n";

/// All bracketings of a non-empty list of one-steps.
fn bracketings(xs: &[Pt]) -> Vec<Pt> {
    if xs.len() == 1 {
        return vec![xs[0].clone()];
    }
    (1..xs.len())
        .flat_map(|i| {
            let ls = bracketings(&xs[..i]);
            let rs = bracketings(&xs[i..]);
            ls.iter().flat_map(|l| rs.iter().map(|r| Pt::comp(l.clone(), r.clone()))).collect::<Vec<_>>()
        })
        .collect()
}

fn one_steps(trs: &Trs, t: &Term, n: usize) -> Vec<Vec<Pt>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![vec![]];
    for s in match_redexes(trs, t, 16) {
        let step = irw_core::denotation::denote_step(trs, &s).unwrap();
        let next = apply_step(trs, &s).unwrap();
        for mut rest in one_steps(trs, &next, n - 1) {
            rest.insert(0, step.clone());
            out.push(rest);
        }
    }
    out
}

/// Every stepwise proof term with at most `max` steps from the given
/// sources; pairs from the same source are compared both ways.
pub fn breq_deneq(max: usize) -> Result<(usize, usize), String> {
    let ws = parse_workspace(BREQ_SYSTEM).unwrap();
    let t = &ws.trs;
    let mut pairs = 0;
    let mut equal = 0;
    for src in ["f(a)", "h(f(b), a)"] {
        let s = parse_term(src, &t.sig).unwrap();
        let mut all = vec![Pt::MStep(s.clone())];
        for seq in one_steps(t, &s, max) {
            if !seq.is_empty() {
                all.extend(bracketings(&seq));
            }
        }
        for p in &all {
            for q in &all {
                let found = breq_search(t, p, q, 10_000).map_err(|e| format!("breq {p} / {q}: {e}"))?;
                if let Some(d) = &found {
                    breq_check(t, d, p, q, Mode::Base).map_err(|e| format!("breq {p} / {q}: {e}"))?;
                }
                let v = deneq_check(t, p, q, 8).map_err(|e| format!("deneq {p} / {q}: {e}"))?;
                if found.is_some() != (v.status == DeneqStatus::Equal) {
                    return Err(format!("{p} / {q}: breq {}, deneq {:?}", found.is_some(), v.status));
                }
                pairs += 1;
                equal += found.is_some() as usize;
            }
        }
    }
    Ok((pairs, equal))
}
