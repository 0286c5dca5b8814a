#![allow(dead_code)]

pub mod factor;
pub mod oracles;
pub mod props;

use std::path::PathBuf;

use irw_core::equivalence::{Certificate, Deriv, Tag};
use irw_core::syntax::Workspace;

pub const CERTS: [&str; 2] = ["struct_chain.json", "lim_bracketing.json"];

pub fn cert_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../certificates").join(name)
}

pub fn load_cert(name: &str) -> (Workspace, Certificate) {
    let text = std::fs::read_to_string(cert_path(name)).expect("certificate file");
    Certificate::parse(&text).expect("certificate parses")
}

/// Pre-order walk; `limit` caps the number of nodes visited.
fn paths(d: &Deriv, at: Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) {
    if out.len() >= limit {
        return;
    }
    out.push(at.clone());
    for (j, c) in d.children().into_iter().enumerate() {
        let mut p = at.clone();
        p.push(j);
        paths(c, p, out, limit);
    }
}

fn node_mut<'a>(d: &'a mut Deriv, at: &[usize]) -> &'a mut Deriv {
    match at.split_first() {
        None => d,
        Some((j, rest)) => node_mut(d.children_mut().swap_remove(*j), rest),
    }
}

/// Every single-tag mutation of the first `limit` nodes.
pub fn mutants(d: &Deriv, limit: usize) -> Vec<(String, Deriv)> {
    let mut ps = vec![];
    paths(d, vec![], &mut ps, limit);
    let mut out = vec![];
    for p in ps {
        let orig = node_mut(&mut d.clone(), &p).tag;
        for t in Tag::all() {
            if t == orig {
                continue;
            }
            let mut m = d.clone();
            node_mut(&mut m, &p).tag = t;
            out.push((format!("{p:?}: {orig} -> {t}"), m));
        }
    }
    out
}

pub mod gen {
    use std::collections::BTreeMap;

    use irw_core::position::Position;
    use irw_core::proofterm::target;
    use irw_core::pterm::Pt;
    use irw_core::term::{Builder, Label, Sym, Term};
    use irw_core::trs::{match_at, Trs};
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    pub fn rng(seed: u64) -> StdRng {
        StdRng::seed_from_u64(seed)
    }

    pub fn functions(trs: &Trs) -> Vec<(Sym, usize)> {
        trs.sig.functions().map(|(f, n)| (f.clone(), n)).collect()
    }

    /// A random cyclic graph over `fns` with at most `n` nodes, rooted at 0.
    pub fn rational(r: &mut StdRng, fns: &[(Sym, usize)], n: usize) -> Term {
        let n = r.gen_range(1..=n);
        let mut b = Builder::new();
        let ids: Vec<usize> = (0..n).map(|_| b.reserve()).collect();
        for &id in &ids {
            let (f, k) = fns.choose(r).unwrap().clone();
            let kids = (0..k).map(|_| ids[r.gen_range(0..n)]).collect();
            b.set(id, Label::Sym(f), kids);
        }
        b.finish(ids[0])
    }

    /// A random finite term; `leaves` are used below `depth`.
    pub fn finite(r: &mut StdRng, fns: &[(Sym, usize)], depth: usize, leaves: &[Term]) -> Term {
        let consts: Vec<_> = fns.iter().filter(|x| x.1 == 0).collect();
        if depth == 0 || r.gen_bool(0.2) {
            if !leaves.is_empty() && (consts.is_empty() || r.gen_bool(0.5)) {
                return leaves.choose(r).unwrap().clone();
            }
            if let Some((c, _)) = consts.choose(r) {
                return Term::app_sym(c.clone(), vec![]);
            }
        }
        let (f, k) = fns.choose(r).unwrap().clone();
        Term::app_sym(f, (0..k).map(|_| finite(r, fns, depth.saturating_sub(1), leaves)).collect())
    }

    /// A random position of `t` reached by a walk of at most `d` steps.
    pub fn position(r: &mut StdRng, t: &Term, d: usize) -> Position {
        let mut node = 0;
        let mut p = Position::root();
        for _ in 0..r.gen_range(0..=d) {
            let ks = t.kids_at(node);
            if ks.is_empty() {
                break;
            }
            let j = r.gen_range(0..ks.len());
            node = ks[j];
            p = p.child(j as u32 + 1);
        }
        p
    }

    /// A random multistep with source `t`, contracting redexes above `d`;
    /// `seeds` pairs a source with an infinite multistep for it.
    pub fn mstep_on(r: &mut StdRng, trs: &Trs, t: &Term, d: usize, seeds: &[(Term, Term)]) -> Term {
        if let Some((_, m)) = seeds.iter().find(|(s, _)| s == t) {
            if r.gen_bool(0.5) {
                return m.clone();
            }
        }
        if d == 0 {
            return t.clone();
        }
        let rules: Vec<_> = trs.rules.iter().filter_map(|ru| match_at(&ru.lhs, t, 0).map(|s| (ru, s))).collect();
        if let Some((ru, s)) = rules.choose(r) {
            if r.gen_bool(0.4) {
                let kids = ru.vars.iter().map(|v| mstep_on(r, trs, &s[v], d - 1, seeds)).collect();
                return Term::app_sym(ru.name.clone(), kids);
            }
        }
        match t.label() {
            Label::Sym(f) => Term::app_sym(f.clone(), t.args().iter().map(|a| mstep_on(r, trs, a, d - 1, seeds)).collect()),
            _ => t.clone(),
        }
    }

    /// A random proof term with source `t`; `None` when a piece diverges.
    pub fn pt_on(r: &mut StdRng, trs: &Trs, t: &Term, size: usize, seeds: &[(Term, Term)]) -> Option<Pt> {
        let choice = if size == 0 { 0 } else { r.gen_range(0..4) };
        match choice {
            1 => {
                let p = pt_on(r, trs, t, size / 2, seeds)?;
                let u = target(trs, &p).ok()?;
                let q = pt_on(r, trs, &u, size / 2, seeds)?;
                Some(Pt::comp(p, q))
            }
            2 if matches!(t.label(), Label::Sym(_)) && t.arity() > 0 => {
                let f = t.root_sym().unwrap().clone();
                let kids = t.args().iter().map(|a| pt_on(r, trs, a, size - 1, seeds)).collect::<Option<Vec<_>>>()?;
                Some(Pt::app(&trs.sig, &f, kids))
            }
            3 => {
                let rules: Vec<_> = trs.rules.iter().filter_map(|ru| match_at(&ru.lhs, t, 0).map(|s| (ru, s))).collect();
                let (ru, s) = rules.choose(r)?;
                let kids: BTreeMap<_, _> = s.clone();
                let kids = ru.vars.iter().map(|v| pt_on(r, trs, &kids[v], size - 1, seeds)).collect::<Option<Vec<_>>>()?;
                Some(Pt::rule_s(ru.name.clone(), kids))
            }
            _ => Some(Pt::MStep(mstep_on(r, trs, t, 3, seeds))),
        }
    }
}

pub fn big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new().stack_size(1 << 30).spawn(f).unwrap().join().unwrap()
}

pub const SYSTEM_A: &str = "sig f/1 g/1 h/1 j/1 k/1\nrule mu: f(x) -> g(x)\nrule nu: g(x) -> h(x)\nrule rho: j(x) -> k(x)\n";

pub fn example(name: &str) -> Workspace {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../workspaces").join(name);
    irw_core::syntax::parse_workspace(&std::fs::read_to_string(path).expect("example file")).expect("example parses")
}

/// Convergent proof terms for compression, as (workspace source, proof term).
pub fn compress_corpus() -> Vec<(Workspace, &'static str)> {
    let a = irw_core::syntax::parse_workspace(SYSTEM_A).unwrap();
    let m = example("mstep.irw");
    let on_a = [
        "conc(i){ j(iter(g(_), i, mu(f^w))) }; rho(g^w)",
        "conc(i){ iter(g(_), i, mu(f^w)) }; conc(i){ iter(h(_), i, nu(g^w)) }",
        "conc(i){ iter(h(_), i, mu(f^w)); iter(h(_), i, nu(f^w)) }",
        "mu(mu(f^w))",
        "rho(nu(mu(f^w)))",
        "mu^w",
        "nu(mu^w)",
        "mu^w; nu^w",
        "j(mu^w); rho(g^w)",
        "rho(mu^w)",
        "f^w",
    ];
    let on_m = ["h(mu(rho, n(pi(b))))", "pi^w", "h(mu(nu^w, rho))", "pi^w; tau(n^w)", "tau(pi(m^w))"];
    let mut out: Vec<(Workspace, &str)> = on_a.iter().map(|s| (a.clone(), *s)).collect();
    out.extend(on_m.iter().map(|s| (m.clone(), *s)));
    out
}
