//! Rational terms as canonical rooted term graphs.
//!
//! Every [`Term`] is stored minimised (bisimilar nodes merged) and numbered in
//! breadth-first order from the root, so two terms have equal unfoldings iff
//! their stores are equal. Cycles give rational infinite terms.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::position::Position;

pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Sym::from(s)
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Label {
    Sym(Sym),
    Var(Sym),
    Hole,
}

impl Label {
    pub fn name(&self) -> &str {
        match self {
            Label::Sym(s) | Label::Var(s) => s,
            Label::Hole => "_",
        }
    }

    pub fn as_sym(&self) -> Option<&Sym> {
        match self {
            Label::Sym(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Node {
    pub label: Label,
    pub kids: Vec<usize>,
}

/// A rooted, possibly cyclic term graph; node 0 is the root.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    nodes: Arc<Vec<Node>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymKind {
    Function,
    Rule,
}

/// Symbols with their arities, split into function and rule symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    syms: BTreeMap<Sym, (usize, SymKind)>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, arity: usize, kind: SymKind) -> Result<()> {
        match self.syms.get(name) {
            Some(&(a, k)) if a == arity && k == kind => Ok(()),
            Some(_) => Err(Error::pre(format!("symbol {name} declared twice with different meaning"))),
            None => {
                self.syms.insert(sym(name), (arity, kind));
                Ok(())
            }
        }
    }

    pub fn with_functions(decls: &[(&str, usize)]) -> Self {
        let mut s = Signature::new();
        for (f, a) in decls {
            s.add(f, *a, SymKind::Function).expect("consistent declarations");
        }
        s
    }

    pub fn get(&self, name: &str) -> Option<(usize, SymKind)> {
        self.syms.get(name).copied()
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.get(name).map(|x| x.0)
    }

    pub fn is_function(&self, name: &str) -> bool {
        matches!(self.get(name), Some((_, SymKind::Function)))
    }

    pub fn is_rule(&self, name: &str) -> bool {
        matches!(self.get(name), Some((_, SymKind::Rule)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, usize, SymKind)> {
        self.syms.iter().map(|(s, &(a, k))| (s, a, k))
    }

    pub fn functions(&self) -> impl Iterator<Item = (&Sym, usize)> {
        self.iter().filter(|x| x.2 == SymKind::Function).map(|x| (x.0, x.1))
    }
}

/// Distance `2^-k` between terms, or zero for equal terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Distance {
    Zero,
    Pow(u32),
}

impl Distance {
    pub fn below_pow(self, n: u32) -> bool {
        match self {
            Distance::Zero => true,
            Distance::Pow(k) => k > n,
        }
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Distance::Zero, Distance::Zero) => std::cmp::Ordering::Equal,
            (Distance::Zero, _) => std::cmp::Ordering::Less,
            (_, Distance::Zero) => std::cmp::Ordering::Greater,
            (Distance::Pow(a), Distance::Pow(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Zero => write!(f, "0"),
            Distance::Pow(0) => write!(f, "1"),
            Distance::Pow(k) => write!(f, "1/{}", 1u128 << (*k).min(127)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermReport {
    pub is_finite: bool,
    pub is_closed: bool,
    pub is_linear: bool,
    pub positions_sample: Vec<Position>,
}

/// Number of root paths reaching a node, capped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Occ {
    Zero,
    One,
    Many,
}

/// Mutable node store used to assemble terms; `finish` canonicalises.
#[derive(Default)]
pub struct Builder {
    nodes: Vec<Option<Node>>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reserve(&mut self) -> usize {
        self.nodes.push(None);
        self.nodes.len() - 1
    }

    pub fn set(&mut self, id: usize, label: Label, kids: Vec<usize>) {
        self.nodes[id] = Some(Node { label, kids });
    }

    pub fn add(&mut self, label: Label, kids: Vec<usize>) -> usize {
        self.nodes.push(Some(Node { label, kids }));
        self.nodes.len() - 1
    }

    pub fn label(&self, id: usize) -> Option<&Label> {
        self.nodes[id].as_ref().map(|n| &n.label)
    }

    /// Copies the store of `t`; returns the id of its root.
    pub fn import(&mut self, t: &Term) -> usize {
        let off = self.nodes.len();
        for n in t.nodes.iter() {
            self.nodes.push(Some(Node { label: n.label.clone(), kids: n.kids.iter().map(|k| k + off).collect() }));
        }
        off
    }

    pub fn finish(self, root: usize) -> Term {
        let nodes: Vec<Node> = self.nodes.into_iter().map(|n| n.unwrap_or(Node { label: Label::Hole, kids: vec![] })).collect();
        canonical(&nodes, root)
    }
}

/// Minimises the part of `nodes` reachable from `root` and renumbers it.
fn canonical(nodes: &[Node], root: usize) -> Term {
    let mut reach = Vec::new();
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(n) = stack.pop() {
        reach.push(n);
        for &k in &nodes[n].kids {
            if !seen[k] {
                seen[k] = true;
                stack.push(k);
            }
        }
    }
    let mut class = vec![usize::MAX; nodes.len()];
    let mut count;
    {
        let mut ids: HashMap<(&Label, usize), usize> = HashMap::new();
        for &n in &reach {
            let l = ids.len();
            class[n] = *ids.entry((&nodes[n].label, nodes[n].kids.len())).or_insert(l);
        }
        count = ids.len();
    }
    loop {
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut next = class.clone();
        for &n in &reach {
            let key = (class[n], nodes[n].kids.iter().map(|&k| class[k]).collect());
            let l = ids.len();
            next[n] = *ids.entry(key).or_insert(l);
        }
        class = next;
        if ids.len() == count {
            break;
        }
        count = ids.len();
    }
    let mut rep = vec![usize::MAX; count];
    for &n in &reach {
        if rep[class[n]] == usize::MAX {
            rep[class[n]] = n;
        }
    }
    let mut number = vec![usize::MAX; count];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    number[class[root]] = 0;
    order.push(class[root]);
    queue.push_back(class[root]);
    while let Some(c) = queue.pop_front() {
        for &k in &nodes[rep[c]].kids {
            let kc = class[k];
            if number[kc] == usize::MAX {
                number[kc] = order.len();
                order.push(kc);
                queue.push_back(kc);
            }
        }
    }
    let out = order
        .iter()
        .map(|&c| {
            let n = &nodes[rep[c]];
            Node { label: n.label.clone(), kids: n.kids.iter().map(|&k| number[class[k]]).collect() }
        })
        .collect();
    Term { nodes: Arc::new(out) }
}

/// Renumbers an already minimal store from another root.
fn reroot(nodes: &[Node], root: usize) -> Term {
    if root == 0 {
        return Term { nodes: Arc::new(nodes.to_vec()) };
    }
    let mut number = vec![usize::MAX; nodes.len()];
    let mut order = vec![root];
    number[root] = 0;
    let mut i = 0;
    while i < order.len() {
        for &k in &nodes[order[i]].kids {
            if number[k] == usize::MAX {
                number[k] = order.len();
                order.push(k);
            }
        }
        i += 1;
    }
    let out = order
        .iter()
        .map(|&n| Node { label: nodes[n].label.clone(), kids: nodes[n].kids.iter().map(|&k| number[k]).collect() })
        .collect();
    Term { nodes: Arc::new(out) }
}

impl Term {
    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Self::app_sym(sym(f), args)
    }

    pub fn app_sym(f: Sym, args: Vec<Term>) -> Term {
        let mut b = Builder::new();
        let kids = args.iter().map(|a| b.import(a)).collect();
        let r = b.add(Label::Sym(f), kids);
        b.finish(r)
    }

    pub fn cnst(c: &str) -> Term {
        Self::app(c, vec![])
    }

    pub fn var(x: &str) -> Term {
        Self::leaf(Label::Var(sym(x)))
    }

    pub fn hole() -> Term {
        Self::leaf(Label::Hole)
    }

    pub fn leaf(l: Label) -> Term {
        Term { nodes: Arc::new(vec![Node { label: l, kids: vec![] }]) }
    }

    /// `f^ω` for a unary symbol `f`.
    pub fn omega(f: &str) -> Term {
        Term { nodes: Arc::new(vec![Node { label: Label::Sym(sym(f)), kids: vec![0] }]) }
    }

    /// `C^ω` for a context with exactly one hole at depth ≥ 1.
    pub fn ctx_omega(c: &Term) -> Result<Term> {
        let holes = c.hole_positions()?;
        if holes.len() != 1 || holes[0].is_root() {
            return Err(Error::pre("C^ω needs one hole below the root"));
        }
        let mut b = Builder::new();
        let off = b.import(c);
        let hole = c.nodes.iter().position(|n| n.label == Label::Hole).unwrap() + off;
        // redirect every edge into the hole node back to the root
        for n in b.nodes.iter_mut().flatten() {
            for k in n.kids.iter_mut() {
                if *k == hole {
                    *k = off;
                }
            }
        }
        Ok(b.finish(off))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self) -> &Label {
        &self.nodes[0].label
    }

    pub fn label_at(&self, id: usize) -> &Label {
        &self.nodes[id].label
    }

    pub fn kids_at(&self, id: usize) -> &[usize] {
        &self.nodes[id].kids
    }

    pub fn arity(&self) -> usize {
        self.nodes[0].kids.len()
    }

    pub fn root_sym(&self) -> Option<&Sym> {
        self.label().as_sym()
    }

    pub fn is_var(&self) -> bool {
        matches!(self.label(), Label::Var(_))
    }

    pub fn is_hole(&self) -> bool {
        matches!(self.label(), Label::Hole)
    }

    /// The subterm rooted at store node `id`.
    pub fn at(&self, id: usize) -> Term {
        reroot(&self.nodes, id)
    }

    /// The `j`-th argument, counting from 0.
    pub fn arg(&self, j: usize) -> Term {
        self.at(self.nodes[0].kids[j])
    }

    pub fn args(&self) -> Vec<Term> {
        (0..self.arity()).map(|j| self.arg(j)).collect()
    }

    /// Store node reached by following `p`.
    pub fn node_at(&self, p: &Position) -> Result<usize> {
        let mut n = 0;
        for &i in &p.0 {
            let kids = &self.nodes[n].kids;
            if i == 0 || i as usize > kids.len() {
                return Err(Error::PositionOutOfDomain(p.to_string()));
            }
            n = kids[i as usize - 1];
        }
        Ok(n)
    }

    pub fn has_position(&self, p: &Position) -> bool {
        self.node_at(p).is_ok()
    }

    pub fn subterm_at(&self, p: &Position) -> Result<Term> {
        Ok(self.at(self.node_at(p)?))
    }

    pub fn label_of(&self, p: &Position) -> Result<&Label> {
        Ok(&self.nodes[self.node_at(p)?].label)
    }

    /// `t[u]_p`: the cycle through `p`, if any, is unrolled along `p` only.
    pub fn replace_at(&self, u: &Term, p: &Position) -> Result<Term> {
        let mut path = vec![0];
        self.node_at(p)?;
        for &i in &p.0 {
            let n = *path.last().unwrap();
            path.push(self.nodes[n].kids[i as usize - 1]);
        }
        let mut b = Builder::new();
        let off = b.import(self);
        let mut cur = b.import(u);
        for (d, &i) in p.0.iter().enumerate().rev() {
            let n = &self.nodes[path[d]];
            let mut kids: Vec<usize> = n.kids.iter().map(|k| k + off).collect();
            kids[i as usize - 1] = cur;
            cur = b.add(n.label.clone(), kids);
        }
        Ok(b.finish(cur))
    }

    /// Nodes that lie on a cycle or are reachable from one.
    fn cyclic_reach(&self) -> Vec<bool> {
        let n = self.nodes.len();
        // nodes on cycles via Tarjan-free approach: a node is on a cycle iff it
        // can reach itself
        let mut on_cycle = vec![false; n];
        for s in 0..n {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = self.nodes[s].kids.clone();
            while let Some(x) = stack.pop() {
                if x == s {
                    on_cycle[s] = true;
                    break;
                }
                if !seen[x] {
                    seen[x] = true;
                    stack.extend(self.nodes[x].kids.iter().copied());
                }
            }
        }
        let mut out = on_cycle.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&i| on_cycle[i]).collect();
        while let Some(x) = stack.pop() {
            for &k in &self.nodes[x].kids {
                if !out[k] {
                    out[k] = true;
                    stack.push(k);
                }
            }
        }
        out
    }

    /// For every store node, how many positions of the unfolding it occupies.
    pub fn occurrences(&self) -> Vec<Occ> {
        let n = self.nodes.len();
        let cyc = self.cyclic_reach();
        let mut indeg = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            if !cyc[i] {
                for &k in &node.kids {
                    indeg[k] += 1;
                }
            }
        }
        let mut count = vec![0u8; n];
        count[0] = 1;
        let mut ready: Vec<usize> = if cyc[0] { vec![] } else { vec![0] };
        while let Some(x) = ready.pop() {
            for &k in &self.nodes[x].kids {
                count[k] = (count[k] + count[x]).min(2);
                indeg[k] -= 1;
                if indeg[k] == 0 && !cyc[k] {
                    ready.push(k);
                }
            }
        }
        (0..n)
            .map(|i| {
                if cyc[i] {
                    Occ::Many
                } else {
                    match count[i] {
                        0 => Occ::Zero,
                        1 => Occ::One,
                        _ => Occ::Many,
                    }
                }
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        !self.cyclic_reach()[0]
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        self.nodes
            .iter()
            .filter_map(|n| match &n.label {
                Label::Var(x) => Some(x.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        self.nodes.iter().all(|n| !matches!(n.label, Label::Var(_)))
    }

    pub fn has_holes(&self) -> bool {
        self.nodes.iter().any(|n| n.label == Label::Hole)
    }

    pub fn symbols(&self) -> BTreeSet<Sym> {
        self.nodes.iter().filter_map(|n| n.label.as_sym().cloned()).collect()
    }

    /// Each variable occurs at most once in the unfolding.
    pub fn is_linear(&self) -> bool {
        let occ = self.occurrences();
        self.nodes.iter().zip(&occ).all(|(n, o)| !matches!(n.label, Label::Var(_)) || *o != Occ::Many)
    }

    /// Positions of the unfolding up to depth `d`, in breadth-first order.
    pub fn positions_upto(&self, d: usize) -> Vec<Position> {
        let mut out = vec![];
        let mut queue = VecDeque::from([(0usize, Position::root())]);
        while let Some((n, p)) = queue.pop_front() {
            if p.depth() < d {
                for (j, &k) in self.nodes[n].kids.iter().enumerate() {
                    queue.push_back((k, p.child(j as u32 + 1)));
                }
            }
            out.push(p);
        }
        out
    }

    /// Every position of a finite term.
    pub fn positions(&self) -> Result<Vec<Position>> {
        if !self.is_finite() {
            return Err(Error::MalformedTerm { node: 0, reason: "infinite term has infinitely many positions".into() });
        }
        Ok(self.positions_upto(usize::MAX))
    }

    /// Positions labelled by `pred` in the unfolding, provided there are
    /// finitely many of them; `None` otherwise.
    pub fn finite_positions_where(&self, pred: impl Fn(&Label) -> bool) -> Option<Vec<Position>> {
        let n = self.nodes.len();
        let mut reaches = vec![false; n];
        for (i, node) in self.nodes.iter().enumerate() {
            reaches[i] = pred(&node.label);
        }
        loop {
            let mut changed = false;
            for i in 0..n {
                if !reaches[i] && self.nodes[i].kids.iter().any(|&k| reaches[k]) {
                    reaches[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let cyc = self.cyclic_reach();
        if (0..n).any(|i| reaches[i] && cyc[i]) {
            return None;
        }
        let mut out = vec![];
        let mut stack = vec![(0usize, Position::root())];
        while let Some((x, p)) = stack.pop() {
            if !reaches[x] {
                continue;
            }
            if pred(&self.nodes[x].label) {
                out.push(p.clone());
            }
            for (j, &k) in self.nodes[x].kids.iter().enumerate() {
                stack.push((k, p.child(j as u32 + 1)));
            }
        }
        out.sort_by(|a, b| a.cmp_shortlex(b));
        Some(out)
    }

    /// Hole positions ordered by length, then left to right.
    pub fn hole_positions(&self) -> Result<Vec<Position>> {
        self.finite_positions_where(|l| *l == Label::Hole)
            .ok_or(Error::MalformedTerm { node: 0, reason: "hole inside a cycle".into() })
    }

    /// `C[t1, ..., tn]`.
    pub fn fill(&self, args: &[Term]) -> Result<Term> {
        let holes = self.hole_positions()?;
        if holes.len() != args.len() {
            return Err(Error::ArityMismatch { expected: holes.len(), found: args.len() });
        }
        let index: HashMap<&Position, usize> = holes.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut reaches = vec![false; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            reaches[i] = n.label == Label::Hole;
        }
        loop {
            let mut changed = false;
            for i in 0..self.nodes.len() {
                if !reaches[i] && self.nodes[i].kids.iter().any(|&k| reaches[k]) {
                    reaches[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut b = Builder::new();
        let off = b.import(self);
        let roots: Vec<usize> = args.iter().map(|a| b.import(a)).collect();
        fn build(
            t: &Term,
            b: &mut Builder,
            n: usize,
            p: Position,
            off: usize,
            reaches: &[bool],
            index: &HashMap<&Position, usize>,
            roots: &[usize],
        ) -> usize {
            let node = &t.nodes[n];
            if node.label == Label::Hole {
                return roots[index[&p]];
            }
            if !reaches[n] {
                return n + off;
            }
            let kids = node
                .kids
                .iter()
                .enumerate()
                .map(|(j, &k)| build(t, b, k, p.child(j as u32 + 1), off, reaches, index, roots))
                .collect();
            b.add(node.label.clone(), kids)
        }
        let r = build(self, &mut b, 0, Position::root(), off, &reaches, &index, &roots);
        Ok(b.finish(r))
    }

    /// Homomorphic extension of a substitution.
    pub fn subst(&self, s: &BTreeMap<Sym, Term>) -> Term {
        if s.is_empty() {
            return self.clone();
        }
        let mut b = Builder::new();
        let roots: BTreeMap<&Sym, usize> = s.iter().map(|(x, t)| (x, b.import(t))).collect();
        let ids: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| match &n.label {
                Label::Var(x) if roots.contains_key(x) => roots[x],
                _ => b.reserve(),
            })
            .collect();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Label::Var(x) = &n.label {
                if roots.contains_key(x) {
                    continue;
                }
            }
            b.set(ids[i], n.label.clone(), n.kids.iter().map(|&k| ids[k]).collect());
        }
        b.finish(ids[0])
    }

    /// Renames labels node by node.
    pub fn map_labels(&self, f: impl Fn(&Label) -> Label) -> Term {
        let nodes: Vec<Node> = self.nodes.iter().map(|n| Node { label: f(&n.label), kids: n.kids.clone() }).collect();
        canonical(&nodes, 0)
    }

    /// Shallowest depth at which the unfoldings differ, by breadth-first
    /// search over pairs of nodes.
    pub fn distance(&self, u: &Term) -> Distance {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(0usize, 0usize, 0u32)]);
        seen.insert((0, 0));
        while let Some((a, b, d)) = queue.pop_front() {
            let (na, nb) = (&self.nodes[a], &u.nodes[b]);
            if na.label != nb.label || na.kids.len() != nb.kids.len() {
                return Distance::Pow(d);
            }
            for (&x, &y) in na.kids.iter().zip(&nb.kids) {
                if seen.insert((x, y)) {
                    queue.push_back((x, y, d + 1));
                }
            }
        }
        Distance::Zero
    }

    /// Equality of unfoldings by bisimulation; agrees with `==` on canonical
    /// stores.
    pub fn bisimilar(&self, u: &Term) -> bool {
        self.distance(u) == Distance::Zero
    }

    pub fn validate(&self) -> Result<TermReport> {
        for (i, n) in self.nodes.iter().enumerate() {
            if matches!(n.label, Label::Var(_) | Label::Hole) && !n.kids.is_empty() {
                return Err(Error::MalformedTerm { node: i, reason: "variable with arguments".into() });
            }
            if n.kids.iter().any(|&k| k >= self.nodes.len()) {
                return Err(Error::MalformedTerm { node: i, reason: "dangling child".into() });
            }
        }
        Ok(TermReport {
            is_finite: self.is_finite(),
            is_closed: self.is_closed(),
            is_linear: self.is_linear(),
            positions_sample: self.positions_upto(2).into_iter().take(16).collect(),
        })
    }

    /// Checks arities against a signature; variables and holes are allowed.
    pub fn check_signature(&self, sig: &Signature) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if let Label::Sym(f) = &n.label {
                match sig.arity(f) {
                    None => return Err(Error::UnknownSymbol(f.to_string())),
                    Some(a) if a != n.kids.len() => {
                        return Err(Error::MalformedTerm {
                            node: i,
                            reason: format!("{f} has arity {a} but {} arguments", n.kids.len()),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Non-variable positions and their maximal depth, for finite terms.
    pub fn pattern_info(&self) -> Result<(Vec<Position>, Option<usize>)> {
        let ps: Vec<Position> = self
            .positions()?
            .into_iter()
            .filter(|p| matches!(self.label_of(p), Ok(Label::Sym(_))))
            .collect();
        let depth = ps.iter().map(|p| p.depth()).max();
        Ok((ps, depth))
    }

    /// Unfolding cut at depth `d`; deeper subterms print as `…`.
    pub fn unfold(&self, d: usize) -> String {
        fn go(t: &Term, n: usize, d: usize, out: &mut String) {
            let node = &t.nodes[n];
            if d == 0 {
                out.push('…');
                return;
            }
            out.push_str(node.label.name());
            if !node.kids.is_empty() {
                out.push('(');
                for (j, &k) in node.kids.iter().enumerate() {
                    if j > 0 {
                        out.push(',');
                    }
                    go(t, k, d - 1, out);
                }
                out.push(')');
            }
        }
        let mut s = String::new();
        go(self, 0, d + 1, &mut s);
        s
    }

    /// Depth of the shallowest node whose label satisfies `pred`.
    pub fn min_depth_where(&self, pred: impl Fn(&Label) -> bool) -> Option<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        seen[0] = true;
        while let Some((n, d)) = queue.pop_front() {
            if pred(&self.nodes[n].label) {
                return Some(d);
            }
            for &k in &self.nodes[n].kids {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back((k, d + 1));
                }
            }
        }
        None
    }

    /// A shortest position whose label satisfies `pred`.
    pub fn find_position(&self, pred: impl Fn(&Label) -> bool) -> Option<Position> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([(0usize, Position::root())]);
        seen[0] = true;
        while let Some((n, p)) = queue.pop_front() {
            if pred(&self.nodes[n].label) {
                return Some(p);
            }
            for (j, &k) in self.nodes[n].kids.iter().enumerate() {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back((k, p.child(j as u32 + 1)));
                }
            }
        }
        None
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let mut stack = Vec::new();
        print_node(self, 0, &mut stack, &mut out);
        f.write_str(&out)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Prints with `rec X. ...` binders on back edges and `f^w` for unary loops.
fn print_node(t: &Term, n: usize, stack: &mut Vec<(usize, bool)>, out: &mut String) {
    if let Some(d) = stack.iter().position(|s| s.0 == n) {
        stack[d].1 = true;
        out.push_str(&format!("X{d}"));
        return;
    }
    let node = &t.nodes[n];
    if node.kids.len() == 1 && node.kids[0] == n {
        out.push_str(node.label.name());
        out.push_str("^w");
        return;
    }
    let depth = stack.len();
    stack.push((n, false));
    let mut body = String::from(node.label.name());
    if !node.kids.is_empty() {
        body.push('(');
        for (j, &k) in node.kids.iter().enumerate() {
            if j > 0 {
                body.push_str(", ");
            }
            print_node(t, k, stack, &mut body);
        }
        body.push(')');
    }
    let (_, used) = stack.pop().unwrap();
    if used {
        out.push_str(&format!("rec X{depth}. {body}"));
    } else {
        out.push_str(&body);
    }
}
