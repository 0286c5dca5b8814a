mod common;

use std::collections::BTreeSet;

use irw_core::compression::{compress, cfpc, factorise, jump, respects_check};
use irw_core::denotation::{component_at, steps_count};
use irw_core::equivalence::{check_derivation, Mode};
use irw_core::error::Error;
use irw_core::ordinal::Ordinal;
use irw_core::position::Position;
use irw_core::proofterm::{is_pnpterm, mind, source, target};
use irw_core::pterm::Pt;
use irw_core::syntax::{parse_pt, parse_term, parse_workspace};
use irw_core::trs::Trs;

use common::factor::factorise_random;
use common::{big_stack, compress_corpus, example, SYSTEM_A};

fn pt(trs: &Trs, s: &str) -> Pt {
    parse_pt(s, trs).unwrap()
}

fn same_ends(trs: &Trs, p: &Pt, q: &Pt) {
    assert_eq!(source(trs, p).unwrap(), source(trs, q).unwrap(), "source of {p} and {q}");
    assert_eq!(target(trs, p).unwrap(), target(trs, q).unwrap(), "target of {p} and {q}");
    assert_eq!(mind(trs, p).unwrap(), mind(trs, q).unwrap(), "mind of {p} and {q}");
}

#[test]
fn compress_corpus_certified() {
    big_stack(|| {
        let start = std::time::Instant::now();
        let corpus = compress_corpus();
        assert!(corpus.len() >= 10);
        for (ws, s) in &corpus {
            let t = &ws.trs;
            let p = pt(t, s);
            let c = compress(t, &p).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert!(is_pnpterm(t, &c.result), "{s} gave {}", c.result);
            assert!(steps_count(t, &c.result).unwrap() <= Ordinal::omega(), "{s} gave {}", c.result);
            check_derivation(t, &c.deriv, Mode::Full).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert_eq!(c.deriv.lhs, p);
            assert_eq!(c.deriv.rhs, c.result);
            same_ends(t, &p, &c.result);
        }
        assert!(start.elapsed().as_secs_f64() < 10.0, "{:?}", start.elapsed());
    })
}

#[test]
fn compress_examples() {
    let ws = parse_workspace("sig f/1 g/1 a/0\nrule mu: f(x) -> g(x)\n").unwrap();
    let c = compress(&ws.trs, &pt(&ws.trs, "mu(mu(a))")).unwrap();
    assert_eq!(c.result, pt(&ws.trs, "mu(f(a)); g(mu(a))"));
    assert!(!c.deriv.uses_lim());

    let ws = parse_workspace(SYSTEM_A).unwrap();
    let c = compress(&ws.trs, &pt(&ws.trs, "f(f^w)")).unwrap();
    assert_eq!(c.result, pt(&ws.trs, "f^w"));
    assert_eq!(steps_count(&ws.trs, &c.result).unwrap(), Ordinal::zero());

    big_stack(|| {
        let ws = parse_workspace(SYSTEM_A).unwrap();
        let t = &ws.trs;
        let p = pt(t, "conc(i){ j(iter(g(_), i, mu(f^w))) }; rho(g^w)");
        let c = compress(t, &p).unwrap();
        assert!(c.deriv.uses_lim());
        assert_eq!(steps_count(t, &c.result).unwrap(), Ordinal::omega());
        let at = |i| component_at(t, &c.result, &Ordinal::nat(i)).unwrap();
        assert_eq!((at(0), at(1)), (pt(t, "j(mu(f^w))"), pt(t, "rho(g(f^w))")));
    })
}

#[test]
fn growing_chunks_unsupported() {
    let ws = example("mstep.irw");
    let e = compress(&ws.trs, &pt(&ws.trs, "pi^w; tau^w")).unwrap_err();
    assert!(matches!(e, Error::UnsupportedFamily(_)), "{e}");
}

#[test]
fn nonconvergent_rejected() {
    let ws = example("mstep.irw");
    let p = ws.pt("psi3").unwrap();
    assert!(matches!(compress(&ws.trs, p), Err(Error::NonConvergent(_))));
    assert!(matches!(factorise(&ws.trs, p, 1), Err(Error::NonConvergent(_))));
}

#[test]
fn factorise_psi1() {
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let p = ws.pt("psi1").unwrap().clone();
    let f = factorise(t, &p, 1).unwrap();
    assert_eq!((f.chi.clone(), f.phi.clone()), (pt(t, "h(mu(a, n(m(b))))"), pt(t, "h(h(n(pi(b))))")));
    assert_eq!(mind(t, &f.phi).unwrap(), Some(3));
    check_derivation(t, &f.deriv, Mode::Full).unwrap();
    same_ends(t, &p, &Pt::comp(f.chi, f.phi));
}

#[test]
fn jump_examples() {
    let ws = parse_workspace(SYSTEM_A).unwrap();
    let t = &ws.trs;
    let xi = pt(t, "j(g(mu(f^w)))");
    let (s, x, d) = jump(t, &xi, &pt(t, "rho(g(g(f^w)))")).unwrap();
    assert_eq!(s, pt(t, "rho(g(f(f^w)))"));
    assert_eq!(x, pt(t, "k(g(mu(f^w)))"));
    check_derivation(t, &d, Mode::Full).unwrap();

    let (s, x, d) = jump(t, &xi, &pt(t, "j(g(g(f^w)))")).unwrap();
    assert_eq!((s.clone(), x.clone()), (pt(t, "j(g(f(f^w)))"), xi.clone()));
    check_derivation(t, &d, Mode::Full).unwrap();

    let (s, x, d) = jump(t, &pt(t, "j(mu(f^w))"), &pt(t, "rho(g(f^w))")).unwrap();
    assert_eq!((s, x), (pt(t, "rho(f^w)"), pt(t, "k(mu(f^w))")));
    check_derivation(t, &d, Mode::Full).unwrap();
    let e = jump(t, &pt(t, "mu(f^w)"), &pt(t, "nu(f^w)")).unwrap_err();
    assert!(matches!(e, Error::PreconditionViolated(_)), "{e}");
}

#[test]
fn cfpc_endpoints_share_prefix() {
    let ws = parse_workspace("sig h/2 f/1 g/1 k/1 m/1 a/0 b/0 c/0\nrule mu: k(x) -> g(x)\nrule nu: g(x) -> m(x)\nrule pi: a -> c\n").unwrap();
    let t = &ws.trs;
    let p = pt(t, "h(f(g(mu(a))), mu(b)); h(f(g(g(pi))), nu(b))");
    let s: BTreeSet<Position> = ["ε", "1", "11"].iter().map(|x| x.parse().unwrap()).collect();
    assert!(respects_check(t, &p, &s));
    let (q, d) = cfpc(t, &p, &s).unwrap();
    check_derivation(t, &d, Mode::Base).unwrap();
    let pre = |u| irw_core::compression::term_prefix(&u, &s).unwrap();
    assert_eq!(pre(source(t, &q).unwrap()), pre(target(t, &q).unwrap()));
    assert_eq!(pre(source(t, &q).unwrap()), parse_term("h(f(g(_)), _)", &t.sig).unwrap());
}

#[test]
fn factorise_random_terms() {
    assert_eq!(big_stack(|| factorise_random(200, 7)), Ok(200));
}
