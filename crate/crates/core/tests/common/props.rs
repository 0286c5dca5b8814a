//! Property checks driven by a seed, shared by the proptest suites and the
//! acceptance report.

use std::collections::{BTreeMap, BTreeSet};

use irw_core::compression::{factorise, respects_check};
use irw_core::equivalence::{check_derivation, Deriv, Mode};
use irw_core::position::Position;
use irw_core::proofterm::{is_convergent, mind, source, target, validate_pterm};
use irw_core::pterm::Pt;
use irw_core::redseq::{redseq_measures, RedSeq};
use irw_core::syntax::{parse_term, Workspace};
use irw_core::term::{sym, Distance, Term};
use irw_core::trs::{apply_step, match_redexes, Trs};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{example, gen};

type Check = std::result::Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fns() -> Vec<(irw_core::term::Sym, usize)> {
    ["f/2", "g/1", "h/1", "a/0", "b/0"]
        .iter()
        .map(|d| {
            let (f, n) = d.split_once('/').unwrap();
            (sym(f), n.parse().unwrap())
        })
        .collect()
}

fn term(r: &mut StdRng) -> Term {
    if r.gen_bool(0.5) {
        gen::rational(r, &fns(), 5)
    } else {
        gen::finite(r, &fns(), 5, &[])
    }
}

pub fn subterm_concat(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let t = term(r);
    let p = gen::position(r, &t, 6);
    let tp = t.subterm_at(&p).unwrap();
    let q = gen::position(r, &tp, 6);
    let whole = t.subterm_at(&p.concat(&q)).map_err(|e| e.to_string())?;
    ensure(whole == tp.subterm_at(&q).unwrap(), || format!("{t} at {p}·{q}"))
}

pub fn replace_in_context(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let (t, u) = (term(r), term(r));
    let p = gen::position(r, &t, 5);
    let tp = t.subterm_at(&p).unwrap();
    let q = gen::position(r, &tp, 5);
    let direct = t.replace_at(&u, &p.concat(&q)).map_err(|e| e.to_string())?;
    let nested = t.replace_at(&tp.replace_at(&u, &q).unwrap(), &p).unwrap();
    ensure(direct == nested, || format!("{t}[{u}] at {p}·{q}"))
}

pub fn replace_disjoint(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let (t, s) = (term(r), term(r));
    let p = gen::position(r, &t, 6);
    let q = gen::position(r, &t, 6);
    if !p.is_disjoint(&q) {
        return Ok(());
    }
    let u = t.replace_at(&s, &q).unwrap();
    ensure(u.subterm_at(&p).unwrap() == t.subterm_at(&p).unwrap(), || format!("{t} at {p}, {q}"))
}

/// A context over `t` with holes at a random antichain of positions.
fn context(r: &mut StdRng, t: &Term) -> Term {
    let mut holes: Vec<Position> = vec![];
    for _ in 0..r.gen_range(0..4) {
        let p = gen::position(r, t, 5);
        if holes.iter().all(|h| h.is_disjoint(&p)) {
            holes.push(p);
        }
    }
    holes.iter().fold(t.clone(), |c, h| c.replace_at(&Term::hole(), h).unwrap())
}

pub fn fill_any_order(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let t = term(r);
    let c = context(r, &t);
    let hs = c.hole_positions().map_err(|e| e.to_string())?;
    let ts: Vec<Term> = hs.iter().map(|_| term(r)).collect();
    let filled = c.fill(&ts).map_err(|e| e.to_string())?;
    let mut order: Vec<usize> = (0..hs.len()).collect();
    order.shuffle(r);
    let nested = order.iter().fold(c.clone(), |u, &i| u.replace_at(&ts[i], &hs[i]).unwrap());
    ensure(filled == nested, || format!("{c} filled in order {order:?}"))
}

pub fn ultrametric(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let t = term(r);
    // Nearby terms make small distances likely.
    let near = |r: &mut StdRng, t: &Term| {
        let p = gen::position(r, t, 6);
        let s = term(r);
        t.replace_at(&s, &p).unwrap()
    };
    let u = near(r, &t);
    let w = near(r, &u);
    let d = t.distance(&w);
    ensure(d <= t.distance(&u).max(u.distance(&w)), || format!("{t}, {u}, {w}"))
}

pub fn replace_distance(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let (t, s) = (term(r), term(r));
    let p = gen::position(r, &t, 8);
    let d = t.distance(&t.replace_at(&s, &p).unwrap());
    ensure(d <= Distance::Pow(p.depth() as u32), || format!("{t}[{s}] at {p}: {d}"))
}

pub fn subst_homomorphism(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let vars = [sym("x"), sym("y")];
    let mut fs = fns();
    fs.extend(vars.iter().map(|v| (v.clone(), 0)));
    let t = gen::finite(r, &fs, 4, &[]).map_labels(|l| match l.as_sym() {
        Some(v) if vars.contains(v) => irw_core::term::Label::Var(v.clone()),
        _ => l.clone(),
    });
    let s: BTreeMap<_, _> = vars.iter().map(|v| (v.clone(), term(r))).collect();
    let whole = t.subst(&s);
    let by_parts = match t.label() {
        irw_core::term::Label::Sym(f) => Term::app_sym(f.clone(), t.args().iter().map(|a| a.subst(&s)).collect()),
        _ => whole.clone(),
    };
    // A second order: substitute one variable at a time.
    let stepwise = vars.iter().fold(t.clone(), |u, v| u.subst(&BTreeMap::from([(v.clone(), s[v].clone())])));
    ensure(whole == by_parts && whole == stepwise, || format!("{t} under {s:?}"))
}

/// A random convergent proof term over the multistep system.
pub fn convergent_pt(r: &mut StdRng, ws: &Workspace) -> Pt {
    let t = &ws.trs;
    let fs = gen::functions(t);
    let m_w = parse_term("m^w", &t.sig).unwrap();
    let seeds = vec![(m_w.clone(), parse_term("pi^w", &t.sig).unwrap())];
    loop {
        let s = gen::finite(r, &fs, 4, &[m_w.clone()]);
        let size = r.gen_range(0..6);
        if let Some(p) = gen::pt_on(r, t, &s, size, &seeds) {
            if is_convergent(t, &p) {
                return p;
            }
        }
    }
}

/// Any well-formed proof term, convergent or not.
fn any_pt(r: &mut StdRng, ws: &Workspace) -> Pt {
    let t = &ws.trs;
    let fs = gen::functions(t);
    let g_w = parse_term("g^w", &t.sig).unwrap();
    let m_w = parse_term("m^w", &t.sig).unwrap();
    let seeds = vec![(g_w.clone(), parse_term("nu^w", &t.sig).unwrap()), (m_w.clone(), parse_term("pi^w", &t.sig).unwrap())];
    let s = gen::finite(r, &fs, 3, &[g_w.clone(), m_w.clone()]);
    Pt::MStep(gen::mstep_on(r, t, &s, 3, &seeds))
}

pub fn convergent_has_target(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let p = any_pt(r, &ws);
    ensure(!is_convergent(&ws.trs, &p) || target(&ws.trs, &p).is_ok(), || format!("{p}"))
}

pub fn mind_bounds_distance(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let p = convergent_pt(r, &ws);
    let d = source(t, &p).unwrap().distance(&target(t, &p).unwrap());
    match mind(t, &p).unwrap() {
        None => ensure(d == Distance::Zero, || format!("{p}: {d}")),
        Some(m) => ensure(d.below_pow(m.saturating_sub(1) as u32) || m == 0, || format!("{p}: mind {m}, distance {d}")),
    }
}

pub fn mind_in_context(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let fs: Vec<_> = gen::functions(t);
    let base = gen::finite(r, &fs, 4, &[]);
    let c = context(r, &base);
    let hs = c.hole_positions().unwrap();
    let ps: Vec<Pt> = hs.iter().map(|_| convergent_pt(r, &ws)).collect();
    let whole = mind(t, &Pt::plug(&c, ps.clone()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let expected = hs
        .iter()
        .zip(&ps)
        .filter_map(|(h, p)| mind(t, p).unwrap().map(|m| m + h.depth() as u64))
        .min();
    ensure(whole == expected, || format!("{c} with {ps:?}: {whole:?} vs {expected:?}"))
}

/// A random finite reduction sequence over the multistep system.
fn redseq(r: &mut StdRng, t: &Trs) -> (RedSeq, Vec<Position>) {
    let fs = gen::functions(t);
    let m_w = parse_term("m^w", &t.sig).unwrap();
    let mut u = gen::finite(r, &fs, 4, &[m_w]);
    let mut steps = vec![];
    for _ in 0..r.gen_range(0..5) {
        let rs = match_redexes(t, &u, 6);
        let Some(s) = rs.choose(r) else { break };
        u = apply_step(t, s).unwrap();
        steps.push(s.clone());
    }
    let positions = steps.iter().map(|s| s.pos.clone()).collect();
    if steps.is_empty() {
        (RedSeq::empty(u), positions)
    } else {
        (RedSeq::finite(&steps), positions)
    }
}

pub fn redseq_mind_distance(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let m = redseq_measures(&ws.trs, &redseq(r, &ws.trs).0).map_err(|e| e.to_string())?;
    let tgt = m.tgt.map_err(|e| e.to_string())?;
    let d = m.src.distance(&tgt);
    match m.mind {
        None => ensure(d == Distance::Zero, || format!("{}: {d}", m.src)),
        Some(n) => ensure(n == 0 || d.below_pow(n as u32 - 1), || format!("{}: mind {n}, distance {d}", m.src)),
    }
}

pub fn redseq_disjoint(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let (rs, positions) = redseq(r, &ws.trs);
    let m = redseq_measures(&ws.trs, &rs).map_err(|e| e.to_string())?;
    let tgt = m.tgt.map_err(|e| e.to_string())?;
    let p = gen::position(r, &m.src, 4);
    if !positions.iter().all(|q| q.is_disjoint(&p)) {
        return Ok(());
    }
    ensure(m.src.subterm_at(&p).ok() == tgt.subterm_at(&p).ok(), || format!("{} at {p}", m.src))
}

fn nodes(d: &Deriv) -> Vec<&Deriv> {
    let mut out = vec![d];
    let mut i = 0;
    while i < out.len() {
        out.extend(out[i].children());
        i += 1;
    }
    out
}

/// Base derivations emitted by factorisation of random proof terms.
fn accepted(r: &mut StdRng, ws: &Workspace) -> std::result::Result<Deriv, String> {
    let p = convergent_pt(r, ws);
    let n = r.gen_range(0..=3);
    let f = factorise(&ws.trs, &p, n).map_err(|e| format!("{p}: {e}"))?;
    check_derivation(&ws.trs, &f.deriv, Mode::Base).map_err(|e| format!("{p}: {e}"))?;
    Ok(f.deriv)
}

pub fn derivation_endpoints(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let d = accepted(r, &ws)?;
    for n in nodes(&d) {
        let (a, b) = (&n.lhs, &n.rhs);
        let same = source(t, a).ok() == source(t, b).ok()
            && target(t, a).ok() == target(t, b).ok()
            && mind(t, a).ok() == mind(t, b).ok();
        ensure(same, || format!("{a} ≈ {b}"))?;
    }
    Ok(())
}

pub fn derivation_wellformed(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let d = accepted(r, &ws)?;
    let good = |p: &Pt| validate_pterm(t, p).is_ok() && is_convergent(t, p);
    for n in nodes(&d) {
        ensure(good(&n.lhs) == good(&n.rhs), || format!("{} ≈ {}", n.lhs, n.rhs))?;
    }
    Ok(())
}

pub fn derivation_respects(seed: u64) -> Check {
    let r = &mut gen::rng(seed);
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let d = accepted(r, &ws)?;
    let k = r.gen_range(0..3);
    for n in nodes(&d) {
        let s: BTreeSet<Position> = source(t, &n.lhs).unwrap().positions_upto(k).into_iter().collect();
        ensure(respects_check(t, &n.lhs, &s) == respects_check(t, &n.rhs, &s), || {
            format!("{} ≈ {} on {s:?}", n.lhs, n.rhs)
        })?;
    }
    Ok(())
}

pub const PROPERTIES: [(&str, fn(u64) -> Check); 15] = [
    ("subterm of a concatenated position", subterm_concat),
    ("replacement inside a context", replace_in_context),
    ("replacement at a disjoint position", replace_disjoint),
    ("context filling in any order", fill_any_order),
    ("ultrametric inequality", ultrametric),
    ("replacement distance bound", replace_distance),
    ("substitution homomorphism", subst_homomorphism),
    ("convergent proof terms have targets", convergent_has_target),
    ("mind bounds source-target distance", mind_bounds_distance),
    ("mind of a plugged context", mind_in_context),
    ("reduction mind bounds distance", redseq_mind_distance),
    ("reductions leave disjoint subterms", redseq_disjoint),
    ("derivation endpoints agree", derivation_endpoints),
    ("derivations preserve convergence", derivation_wellformed),
    ("derivations preserve fixed prefixes", derivation_respects),
];
