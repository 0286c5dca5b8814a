//! Transfinite reduction sequences as nested block schedules.
//!
//! A schedule is a list of blocks. `Finite` blocks list steps, `Omega` blocks
//! describe ω steps through an index template, and `Repeat` blocks place ω
//! copies of a body one after the other, so nesting reaches lengths below
//! ω^ω.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

use crate::affine::{Affine, MinForm};
use crate::error::{Error, Result};
use crate::family::TermFamily;
use crate::ordinal::Ordinal;
use crate::position::Position;
use crate::syntax::{parse_affine, parse_closed_term, parse_term};
use crate::term::{sym, Sym, Term};
use crate::trs::{apply_step, RedexStep, Trs};

pub type Env = BTreeMap<Sym, u64>;

/// A position given by words raised to affine exponents.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PosTemplate(pub Vec<(Vec<u32>, Affine)>);

impl PosTemplate {
    pub fn word(p: &Position) -> PosTemplate {
        PosTemplate(vec![(p.0.clone(), Affine::constant(1))]).normalized()
    }

    pub fn power(w: &Position, e: Affine) -> PosTemplate {
        PosTemplate(vec![(w.0.clone(), e)]).normalized()
    }

    fn normalized(mut self) -> PosTemplate {
        self.0.retain(|(w, e)| !w.is_empty() && e.as_const() != Some(0));
        self
    }

    pub fn concat(&self, o: &PosTemplate) -> PosTemplate {
        let mut v = self.0.clone();
        v.extend(o.0.iter().cloned());
        PosTemplate(v).normalized()
    }

    pub fn eval(&self, env: &Env) -> Result<Position> {
        let mut out = Vec::new();
        for (w, e) in &self.0 {
            let n = e.eval(env).ok_or_else(|| Error::pre(format!("unbound index in {e}")))?;
            for _ in 0..n {
                out.extend_from_slice(w);
            }
        }
        Ok(Position(out))
    }

    pub fn depth(&self) -> Affine {
        self.0.iter().fold(Affine::constant(0), |acc, (w, e)| acc.add(&e.scale(w.len() as u64)))
    }

    pub fn subst(&self, v: &str, e: &Affine) -> PosTemplate {
        PosTemplate(self.0.iter().map(|(w, x)| (w.clone(), x.subst(v, e))).collect()).normalized()
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.0.iter().any(|(_, e)| e.mentions(v))
    }

    /// The first index and the remaining template; `Ok(None)` when the first
    /// index depends on the indices.
    pub fn uncons(&self) -> Result<Option<(u32, PosTemplate)>> {
        let Some((w, e)) = self.0.first() else {
            return Err(Error::pre("step at the root"));
        };
        let Some(e1) = e.sub_const(1) else { return Ok(None) };
        let mut rest = vec![(w[1..].to_vec(), Affine::constant(1)), (w.clone(), e1)];
        rest.extend(self.0[1..].iter().cloned());
        Ok(Some((w[0], PosTemplate(rest).normalized())))
    }

    pub fn parse(s: &str) -> Result<PosTemplate> {
        let s = s.trim();
        if !s.contains('^') && !s.contains('(') {
            return Ok(PosTemplate::word(&s.parse()?));
        }
        let bad = || Error::Parse { line: 1, col: 1, expected: format!("position template, got `{s}`") };
        let mut items = Vec::new();
        let mut depth = 0;
        let mut cur = String::new();
        for c in s.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                '.' if depth == 0 => {
                    items.push(std::mem::take(&mut cur));
                    continue;
                }
                _ => {}
            }
            cur.push(c);
        }
        items.push(cur);
        let strip = |x: &str| x.trim().trim_start_matches('(').trim_end_matches(')').to_string();
        let mut segs = Vec::new();
        for it in items {
            let (w, e) = match it.split_once('^') {
                Some((w, e)) => (strip(w), parse_affine(&strip(e))?),
                None => (strip(&it), Affine::constant(1)),
            };
            let w: Position = if w.contains('.') { w.parse()? } else { Position(vec![w.parse().map_err(|_| bad())?]) };
            segs.push((w.0, e));
        }
        Ok(PosTemplate(segs).normalized())
    }
}

impl fmt::Display for PosTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let items: Vec<String> = self
            .0
            .iter()
            .map(|(w, e)| {
                let w = if w.len() == 1 {
                    w[0].to_string()
                } else {
                    format!("({})", w.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("."))
                };
                match e.as_const() {
                    Some(1) => w,
                    Some(n) => format!("{w}^{n}"),
                    None if e.coeffs.len() == 1 && e.constant == 0 && e.coeffs.values().all(|&a| a == 1) => {
                        format!("{w}^{e}")
                    }
                    None => format!("{w}^({e})"),
                }
            })
            .collect();
        write!(f, "{}", items.join("."))
    }
}

/// A step whose source and position may depend on indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepT {
    pub src: TermFamily,
    pub pos: PosTemplate,
    pub rule: Sym,
}

impl StepT {
    pub fn of(step: &RedexStep) -> StepT {
        StepT { src: TermFamily::Const(step.source.clone()), pos: PosTemplate::word(&step.pos), rule: step.rule.clone() }
    }

    pub fn instantiate(&self, trs: &Trs, env: &Env) -> Result<RedexStep> {
        RedexStep::new(trs, self.src.eval(env)?, self.pos.eval(env)?, &self.rule)
    }

    fn subst(&self, v: &str, e: &Affine) -> Result<StepT> {
        Ok(StepT { src: self.src.subst_var(v, e)?, pos: self.pos.subst(v, e), rule: self.rule.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Block {
    Finite(Vec<StepT>),
    /// Steps `⟨src[i], pos[i], rule⟩` for every `i < ω`.
    Omega { var: Sym, step: StepT },
    /// Copies of `body` for `var = 0, 1, ...`.
    Repeat { var: Sym, body: Vec<Block> },
}

impl Block {
    pub fn length(&self) -> Ordinal {
        match self {
            Block::Finite(s) => Ordinal::nat(s.len() as u64),
            Block::Omega { .. } => Ordinal::omega(),
            Block::Repeat { body, .. } => list_length(body).times_omega(),
        }
    }

    pub fn subst(&self, v: &str, e: &Affine) -> Result<Block> {
        Ok(match self {
            Block::Finite(s) => Block::Finite(s.iter().map(|x| x.subst(v, e)).collect::<Result<_>>()?),
            Block::Omega { var, .. } | Block::Repeat { var, .. } if &**var == v => self.clone(),
            Block::Omega { var, step } => Block::Omega { var: var.clone(), step: step.subst(v, e)? },
            Block::Repeat { var, body } => Block::Repeat { var: var.clone(), body: subst_list(body, v, e)? },
        })
    }

    fn instance(&self, n: u64) -> Result<Vec<Block>> {
        match self {
            Block::Omega { var, step } => Ok(vec![Block::Finite(vec![step.subst(var, &Affine::constant(n))?])]),
            Block::Repeat { var, body } => subst_list(body, var, &Affine::constant(n)),
            Block::Finite(_) => Err(Error::pre("finite blocks have no instances")),
        }
    }

    fn shifted(&self, k: u64) -> Result<Block> {
        match self {
            Block::Omega { var, step } => {
                Ok(Block::Omega { var: var.clone(), step: step.subst(var, &Affine::var(var).add_const(k))? })
            }
            Block::Repeat { var, body } => {
                Ok(Block::Repeat { var: var.clone(), body: subst_list(body, var, &Affine::var(var).add_const(k))? })
            }
            Block::Finite(s) => Ok(Block::Finite(s[k as usize..].to_vec())),
        }
    }
}

fn subst_list(bs: &[Block], v: &str, e: &Affine) -> Result<Vec<Block>> {
    bs.iter().map(|b| b.subst(v, e)).collect()
}

pub fn list_length(bs: &[Block]) -> Ordinal {
    bs.iter().fold(Ordinal::zero(), |acc, b| acc.add(&b.length()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedSeq {
    /// Required when there are no steps.
    pub source: Option<Term>,
    pub blocks: Vec<Block>,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Issue {
    pub condition: String,
    pub index: Ordinal,
    pub message: String,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RedseqReport {
    pub well_formed: bool,
    pub convergent: bool,
    pub length: Ordinal,
    pub issues: Vec<Issue>,
    pub convergence_issues: Vec<Issue>,
}

#[derive(Clone, Debug)]
enum End {
    Empty,
    Succ(Term),
    Limit { depth_ok: bool, limit: std::result::Result<Term, String> },
}

struct Summary {
    src: Option<Term>,
    end: End,
    length: Ordinal,
    issues: Vec<Issue>,
}

fn issue(condition: &str, index: Ordinal, message: String) -> Issue {
    Issue { condition: condition.to_string(), index, message }
}

/// Conditions at a junction whose left part ends with `end`.
fn junction(end: &End, src: &Term, at: &Ordinal, out: &mut Vec<Issue>) {
    match end {
        End::Empty => {}
        End::Succ(t) => {
            if t != src {
                out.push(issue("1", at.clone(), format!("target {t} differs from the next source {src}")));
            }
        }
        End::Limit { depth_ok, limit } => {
            if !depth_ok {
                out.push(issue("2c", at.clone(), "step depths do not tend to ω".into()));
            }
            match limit {
                Err(w) => out.push(issue("2a", at.clone(), format!("targets have no limit: {w}"))),
                Ok(t) if t != src => {
                    out.push(issue("2b", at.clone(), format!("limit {t} differs from the next source {src}")))
                }
                Ok(_) => {}
            }
        }
    }
}

/// Sources and limits of a template schedule whose common limit decides the
/// limit of the whole when depths diverge.
fn checkpoints(bs: &[Block]) -> Result<Vec<TermFamily>> {
    let mut out = Vec::new();
    for b in bs {
        match b {
            Block::Finite(s) => out.extend(s.iter().map(|x| x.src.clone())),
            Block::Omega { var, step } => {
                out.push(step.src.subst_var(var, &Affine::constant(0))?);
                out.push(step.src.limit(var)?);
            }
            Block::Repeat { var, body } => {
                for c in checkpoints(body)? {
                    out.push(c.limit(var)?);
                }
            }
        }
    }
    Ok(out)
}

fn repeat_limit(body: &[Block], var: &str, env: &Env) -> std::result::Result<Term, String> {
    let cps = checkpoints(body).map_err(|e| e.to_string())?;
    let mut found: Option<Term> = None;
    for c in cps {
        let l = c.subst_env(env).and_then(|c| c.limit(var)).map_err(|e| e.to_string())?;
        let TermFamily::Const(t) = l else {
            return Err(format!("limit {l} depends on unbound indices"));
        };
        match &found {
            Some(u) if *u != t => return Err(format!("targets approach both {u} and {t}")),
            Some(_) => {}
            None => found = Some(t),
        }
    }
    found.ok_or_else(|| "no steps".to_string())
}

/// Step depths as a minimum of affine forms in the free indices.
pub fn mind_form(bs: &[Block]) -> MinForm {
    let mut m = MinForm::omega();
    for b in bs {
        m = m.min(match b {
            Block::Finite(s) => s.iter().fold(MinForm::omega(), |m, x| m.min(MinForm(vec![x.pos.depth()]))),
            Block::Omega { var, step } => MinForm(vec![step.pos.depth()]).subst(var, &Affine::constant(0)),
            Block::Repeat { var, body } => mind_form(body).subst(var, &Affine::constant(0)),
        });
    }
    m
}

fn block_diverges(b: &Block, env: &Env) -> bool {
    match b {
        Block::Finite(_) => true,
        Block::Omega { var, step } => step.pos.depth().subst_env(env).coeff(var) > 0,
        Block::Repeat { var, body } => {
            let m = env.iter().fold(mind_form(body), |m, (v, n)| m.subst(v, &Affine::constant(*n)));
            m.diverges_in(var)
        }
    }
}

fn summarize(trs: &Trs, bs: &[Block], env: &Env, offset: &Ordinal, k: u64) -> Result<Summary> {
    let mut s = Summary { src: None, end: End::Empty, length: Ordinal::zero(), issues: vec![] };
    for b in bs {
        let at = offset.add(&s.length);
        let sub = summarize_block(trs, b, env, &at, k)?;
        if sub.length.is_zero() {
            continue;
        }
        if let Some(src) = &sub.src {
            junction(&s.end, src, &at, &mut s.issues);
            if s.src.is_none() {
                s.src = Some(src.clone());
            }
        }
        s.issues.extend(sub.issues);
        s.end = sub.end;
        s.length = s.length.add(&sub.length);
    }
    Ok(s)
}

fn summarize_block(trs: &Trs, b: &Block, env: &Env, offset: &Ordinal, k: u64) -> Result<Summary> {
    let mut s = Summary { src: None, end: End::Empty, length: b.length(), issues: vec![] };
    match b {
        Block::Finite(steps) => {
            for (j, st) in steps.iter().enumerate() {
                let at = offset.add(&Ordinal::nat(j as u64));
                match st.instantiate(trs, env) {
                    Ok(step) => {
                        if j == 0 {
                            s.src = Some(step.source.clone());
                        }
                        junction(&s.end, &step.source, &at, &mut s.issues);
                        s.end = End::Succ(apply_step(trs, &step)?);
                    }
                    Err(e) => {
                        s.issues.push(issue("step", at, e.to_string()));
                        s.end = End::Empty;
                    }
                }
            }
        }
        Block::Omega { var, step } => {
            let mut prev = End::Empty;
            for j in 0..=k {
                let mut e = env.clone();
                e.insert(var.clone(), j);
                let at = offset.add(&Ordinal::nat(j));
                match step.instantiate(trs, &e) {
                    Ok(st) => {
                        if j == 0 {
                            s.src = Some(st.source.clone());
                        }
                        junction(&prev, &st.source, &at, &mut s.issues);
                        prev = End::Succ(apply_step(trs, &st)?);
                    }
                    Err(err) => {
                        s.issues.push(issue("step", at, err.to_string()));
                        prev = End::Empty;
                    }
                }
            }
            let limit = step
                .src
                .subst_env(env)
                .and_then(|f| f.limit(var))
                .map_err(|e| e.to_string())
                .and_then(|f| match f {
                    TermFamily::Const(t) => Ok(t),
                    f => Err(format!("limit {f} depends on unbound indices")),
                });
            s.end = End::Limit { depth_ok: block_diverges(b, env), limit };
        }
        Block::Repeat { var, body } => {
            let len = list_length(body);
            if len.is_zero() {
                return Ok(s);
            }
            let mut prev = End::Empty;
            for j in 0..=k {
                let mut e = env.clone();
                e.insert(var.clone(), j);
                let at = offset.add(&len.times_nat(j));
                let inst = summarize(trs, body, &e, &at, k)?;
                if let Some(src) = &inst.src {
                    junction(&prev, src, &at, &mut s.issues);
                    if j == 0 {
                        s.src = Some(src.clone());
                    }
                }
                s.issues.extend(inst.issues);
                prev = inst.end;
            }
            s.end = End::Limit { depth_ok: block_diverges(b, env), limit: repeat_limit(body, var, env) };
        }
    }
    Ok(s)
}

/// Checks the well-formedness conditions at every junction, sampling `k + 1`
/// instances of each index.
pub fn validate_redseq_k(trs: &Trs, r: &RedSeq, k: u64) -> Result<RedseqReport> {
    let s = summarize(trs, &r.blocks, &Env::new(), &Ordinal::zero(), k)?;
    let mut issues = s.issues;
    match (&r.source, &s.src) {
        (Some(t), Some(u)) if t != u => {
            issues.insert(0, issue("src", Ordinal::zero(), format!("declared source {t} differs from {u}")))
        }
        (None, None) => return Err(Error::pre("an empty reduction sequence needs a source")),
        _ => {}
    }
    let mut conv = Vec::new();
    if let End::Limit { depth_ok, limit } = &s.end {
        if !depth_ok {
            conv.push(issue("2c", s.length.clone(), "step depths do not tend to ω".into()));
        }
        if let Err(w) = limit {
            conv.push(issue("2a", s.length.clone(), format!("targets have no limit: {w}")));
        }
    }
    let well_formed = issues.is_empty();
    Ok(RedseqReport { well_formed, convergent: well_formed && conv.is_empty(), length: s.length, issues, convergence_issues: conv })
}

pub fn validate_redseq(trs: &Trs, r: &RedSeq) -> Result<RedseqReport> {
    validate_redseq_k(trs, r, crate::ordinal::DEFAULT_SAMPLES)
}

#[derive(Clone, Debug)]
pub struct Measures {
    pub src: Term,
    pub tgt: Result<Term>,
    pub length: Ordinal,
    /// `None` stands for ω.
    pub mind: Option<u64>,
}

pub fn redseq_measures(trs: &Trs, r: &RedSeq) -> Result<Measures> {
    let s = summarize(trs, &r.blocks, &Env::new(), &Ordinal::zero(), crate::ordinal::DEFAULT_SAMPLES)?;
    let src = s.src.or_else(|| r.source.clone()).ok_or_else(|| Error::pre("empty sequence without source"))?;
    let tgt = match s.end {
        End::Empty => Ok(src.clone()),
        End::Succ(t) => Ok(t),
        End::Limit { depth_ok: false, .. } => Err(Error::NonConvergent("step depths do not tend to ω".into())),
        End::Limit { limit: Err(w), .. } => Err(Error::NonConvergent(w)),
        End::Limit { limit: Ok(t), .. } => Ok(t),
    };
    Ok(Measures { src, tgt, length: s.length, mind: mind_form(&r.blocks).at_zero() })
}

pub fn redseq_source(trs: &Trs, r: &RedSeq) -> Result<Term> {
    match first_step(&r.blocks)? {
        Some(st) => Ok(st.src.eval(&Env::new())?),
        None => {
            let _ = trs;
            r.source.clone().ok_or_else(|| Error::pre("empty sequence without source"))
        }
    }
}

fn first_step(bs: &[Block]) -> Result<Option<StepT>> {
    for b in bs {
        match b {
            Block::Finite(s) if s.is_empty() => continue,
            Block::Finite(s) => return Ok(Some(s[0].clone())),
            Block::Omega { var, step } => return Ok(Some(step.subst(var, &Affine::constant(0))?)),
            Block::Repeat { var, body } => {
                if list_length(body).is_zero() {
                    continue;
                }
                return first_step(&subst_list(body, var, &Affine::constant(0))?);
            }
        }
    }
    Ok(None)
}

/// Largest `q` with `len·q ≤ a`, together with the remainder.
fn divide(len: &Ordinal, a: &Ordinal) -> Result<(u64, Ordinal)> {
    if let (Some(l), Some(n)) = (len.as_nat(), a.as_nat()) {
        return Ok((n / l, Ordinal::nat(n % l)));
    }
    let mut q = 0;
    while len.times_nat(q + 1) <= *a {
        q += 1;
        if q > 1 << 20 {
            return Err(Error::UnsupportedFamily("index too large to split".into()));
        }
    }
    Ok((q, len.times_nat(q).sub_left(a)?))
}

fn drop_blocks(bs: &[Block], a: &Ordinal) -> Result<Vec<Block>> {
    let mut a = a.clone();
    for (idx, b) in bs.iter().enumerate() {
        let l = b.length();
        if a >= l {
            a = l.sub_left(&a)?;
            continue;
        }
        let mut out = match b {
            Block::Finite(_) | Block::Omega { .. } => vec![b.shifted(a.as_nat().expect("below ω"))?],
            Block::Repeat { body, .. } => {
                let (q, r) = divide(&list_length(body), &a)?;
                let mut v = drop_blocks(&b.instance(q)?, &r)?;
                v.push(b.shifted(q + 1)?);
                v
            }
        };
        out.extend(bs[idx + 1..].iter().cloned());
        return Ok(out);
    }
    Ok(vec![])
}

fn take_blocks(bs: &[Block], a: &Ordinal) -> Result<Vec<Block>> {
    let mut a = a.clone();
    let mut out = Vec::new();
    for b in bs {
        if a.is_zero() {
            break;
        }
        let l = b.length();
        if a >= l {
            out.push(b.clone());
            a = l.sub_left(&a)?;
            continue;
        }
        match b {
            Block::Finite(s) => out.push(Block::Finite(s[..a.as_nat().expect("below length") as usize].to_vec())),
            Block::Omega { .. } => {
                let n = a.as_nat().expect("below ω");
                let mut steps = Vec::new();
                for j in 0..n {
                    if let Block::Finite(s) = &b.instance(j)?[0] {
                        steps.extend(s.iter().cloned());
                    }
                }
                out.push(Block::Finite(steps));
            }
            Block::Repeat { body, .. } => {
                let (q, r) = divide(&list_length(body), &a)?;
                for j in 0..q {
                    out.extend(b.instance(j)?);
                }
                out.extend(take_blocks(&b.instance(q)?, &r)?);
            }
        }
        break;
    }
    Ok(out)
}

/// The `a`-th step.
pub fn redseq_step(trs: &Trs, r: &RedSeq, a: &Ordinal) -> Result<RedexStep> {
    let rest = drop_blocks(&r.blocks, a)?;
    first_step(&rest)?
        .ok_or_else(|| Error::pre(format!("index {a} beyond the length")))?
        .instantiate(trs, &Env::new())
}

/// The steps from `a` up to, excluding, `b`.
pub fn redseq_section(trs: &Trs, r: &RedSeq, a: &Ordinal, b: &Ordinal) -> Result<RedSeq> {
    let len = list_length(&r.blocks);
    if !(*a < len && *b <= len && a <= b) {
        return Err(Error::pre(format!("section [{a}, {b}) of a sequence of length {len}")));
    }
    if a == b {
        return Ok(RedSeq { source: Some(redseq_step(trs, r, a)?.source), blocks: vec![] });
    }
    let blocks = take_blocks(&drop_blocks(&r.blocks, a)?, &a.sub_left(b)?)?;
    Ok(RedSeq { source: None, blocks })
}

const MAX_PEEL: usize = 16;

fn project_step(st: &StepT, i: u32) -> Result<Option<Option<StepT>>> {
    let Some((head, rest)) = st.pos.uncons()? else { return Ok(None) };
    if head != i {
        return Ok(Some(None));
    }
    match st.src.arg(i as usize)? {
        Some(src) => Ok(Some(Some(StepT { src, pos: rest, rule: st.rule.clone() }))),
        None => Ok(None),
    }
}

/// `Ok(None)` when some first position index is not uniform in the indices.
fn project_list(bs: &[Block], i: u32) -> Result<Option<Vec<Block>>> {
    let mut out = Vec::new();
    for b in bs {
        match project_block(b, i)? {
            Some(v) => out.extend(v),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn project_block(b: &Block, i: u32) -> Result<Option<Vec<Block>>> {
    match b {
        Block::Finite(s) => {
            let mut kept = Vec::new();
            for st in s {
                match project_step(st, i)? {
                    Some(Some(x)) => kept.push(x),
                    Some(None) => {}
                    None => return Ok(None),
                }
            }
            Ok(Some(if kept.is_empty() { vec![] } else { vec![Block::Finite(kept)] }))
        }
        Block::Omega { .. } | Block::Repeat { .. } => {
            let mut prefix = Vec::new();
            let mut cur = b.clone();
            for _ in 0..MAX_PEEL {
                let attempt = match &cur {
                    Block::Omega { var, step } => match project_step(step, i)? {
                        Some(Some(x)) => Some(vec![Block::Omega { var: var.clone(), step: x }]),
                        Some(None) => Some(vec![]),
                        None => None,
                    },
                    Block::Repeat { var, body } => project_list(body, i)?.map(|body| {
                        if list_length(&body).is_zero() {
                            vec![]
                        } else {
                            vec![Block::Repeat { var: var.clone(), body }]
                        }
                    }),
                    Block::Finite(_) => unreachable!(),
                };
                if let Some(v) = attempt {
                    prefix.extend(v);
                    return Ok(Some(prefix));
                }
                match project_list(&cur.instance(0)?, i)? {
                    Some(v) => prefix.extend(v),
                    None => return Ok(None),
                }
                cur = cur.shifted(1)?;
            }
            Err(Error::UnsupportedFamily("positions stay non-uniform after peeling".into()))
        }
    }
}

/// Steps below argument `i` with that index stripped.
pub fn redseq_project(trs: &Trs, r: &RedSeq, i: u32) -> Result<RedSeq> {
    let src = redseq_source(trs, r)?;
    if i == 0 || i as usize > src.arity() {
        return Err(Error::pre(format!("argument {i} of {src}")));
    }
    if mind_form(&r.blocks).at_zero() == Some(0) {
        return Err(Error::pre("projection needs minimum depth above 0"));
    }
    let blocks = project_list(&r.blocks, i)?
        .ok_or_else(|| Error::UnsupportedFamily("positions are not uniform in the indices".into()))?;
    Ok(RedSeq { source: Some(src.arg(i as usize - 1)), blocks })
}

/// Steps at indices below `ω^e·n` for small samples, in order: finite blocks
/// in full, `k` instances of each ω-indexed block.
pub fn sample_steps(trs: &Trs, r: &RedSeq, k: u64) -> Result<Vec<(Ordinal, RedexStep)>> {
    let mut out = Vec::new();
    sample_into(trs, &r.blocks, &Env::new(), &Ordinal::zero(), k, &mut out)?;
    Ok(out)
}

fn sample_into(
    trs: &Trs,
    bs: &[Block],
    env: &Env,
    offset: &Ordinal,
    k: u64,
    out: &mut Vec<(Ordinal, RedexStep)>,
) -> Result<()> {
    let mut at = offset.clone();
    for b in bs {
        match b {
            Block::Finite(s) => {
                for (j, st) in s.iter().enumerate() {
                    out.push((at.add(&Ordinal::nat(j as u64)), st.instantiate(trs, env)?));
                }
            }
            Block::Omega { var, step } => {
                for j in 0..k {
                    let mut e = env.clone();
                    e.insert(var.clone(), j);
                    out.push((at.add(&Ordinal::nat(j)), step.instantiate(trs, &e)?));
                }
            }
            Block::Repeat { var, body } => {
                let len = list_length(body);
                for j in 0..k {
                    let mut e = env.clone();
                    e.insert(var.clone(), j);
                    sample_into(trs, body, &e, &at.add(&len.times_nat(j)), k, out)?;
                }
            }
        }
        at = at.add(&b.length());
    }
    Ok(())
}

fn tf_json(f: &TermFamily) -> Value {
    match f {
        TermFamily::Const(t) => json!(t.to_string()),
        TermFamily::Sym(s, ks) => json!({"sym": s.to_string(), "args": ks.iter().map(tf_json).collect::<Vec<_>>()}),
        TermFamily::Iter(c, e, b) => json!({"ctx": c.to_string(), "exp": e.to_string(), "body": tf_json(b)}),
        TermFamily::Graft(t, subs) => json!({
            "graft": t.to_string(),
            "subs": subs.iter().map(|(x, k)| (x.to_string(), tf_json(k))).collect::<serde_json::Map<_, _>>(),
        }),
        TermFamily::Sampled(v, ts) => json!({"sampled": v.to_string(), "terms": ts.iter().map(|t| t.to_string()).collect::<Vec<_>>()}),
    }
}

fn field<'a>(v: &'a Value, k: &str) -> Result<&'a Value> {
    v.get(k).ok_or_else(|| Error::pre(format!("missing field `{k}` in {v}")))
}

fn str_field<'a>(v: &'a Value, k: &str) -> Result<&'a str> {
    field(v, k)?.as_str().ok_or_else(|| Error::pre(format!("field `{k}` must be a string")))
}

pub fn tf_from_json(trs: &Trs, v: &Value) -> Result<TermFamily> {
    if let Some(s) = v.as_str() {
        return Ok(TermFamily::Const(parse_closed_term(s, &trs.sig)?));
    }
    if v.get("ctx").is_some() {
        let c = parse_closed_term(str_field(v, "ctx")?, &trs.sig)?;
        return TermFamily::iter(c, parse_affine(str_field(v, "exp")?)?, tf_from_json(trs, field(v, "body")?)?);
    }
    if v.get("sym").is_some() {
        let args = field(v, "args")?.as_array().ok_or_else(|| Error::pre("`args` must be an array"))?;
        return Ok(TermFamily::sym(str_field(v, "sym")?, args.iter().map(|a| tf_from_json(trs, a)).collect::<Result<_>>()?));
    }
    if v.get("graft").is_some() {
        let t = parse_term(str_field(v, "graft")?, &trs.sig)?;
        let subs = field(v, "subs")?.as_object().ok_or_else(|| Error::pre("`subs` must be an object"))?;
        let subs = subs.iter().map(|(x, k)| Ok((sym(x), tf_from_json(trs, k)?))).collect::<Result<_>>()?;
        return Ok(TermFamily::graft(t, subs));
    }
    if v.get("sampled").is_some() {
        let ts = field(v, "terms")?.as_array().ok_or_else(|| Error::pre("`terms` must be an array"))?;
        let ts = ts
            .iter()
            .map(|t| parse_closed_term(t.as_str().ok_or_else(|| Error::pre("terms are strings"))?, &trs.sig))
            .collect::<Result<_>>()?;
        return Ok(TermFamily::Sampled(sym(str_field(v, "sampled")?), ts));
    }
    Err(Error::pre(format!("unrecognised term family {v}")))
}

fn step_json(s: &StepT) -> Value {
    json!({"src": tf_json(&s.src), "pos": s.pos.to_string(), "rule": s.rule.to_string()})
}

fn step_from_json(trs: &Trs, v: &Value) -> Result<StepT> {
    let rule = str_field(v, "rule")?;
    trs.rule_or_err(rule)?;
    Ok(StepT { src: tf_from_json(trs, field(v, "src")?)?, pos: PosTemplate::parse(str_field(v, "pos")?)?, rule: sym(rule) })
}

fn block_json(b: &Block) -> Value {
    match b {
        Block::Finite(s) => json!({"kind": "finite", "steps": s.iter().map(step_json).collect::<Vec<_>>()}),
        Block::Omega { var, step } => json!({
            "kind": "omega", "var": var.to_string(), "pos": step.pos.to_string(),
            "rule": step.rule.to_string(), "src_family": tf_json(&step.src),
        }),
        Block::Repeat { var, body } => {
            json!({"kind": "repeat", "var": var.to_string(), "blocks": body.iter().map(block_json).collect::<Vec<_>>()})
        }
    }
}

fn block_from_json(trs: &Trs, v: &Value) -> Result<Block> {
    let var = v.get("var").and_then(Value::as_str).unwrap_or("i");
    match str_field(v, "kind")? {
        "finite" => {
            let steps = field(v, "steps")?.as_array().ok_or_else(|| Error::pre("`steps` must be an array"))?;
            Ok(Block::Finite(steps.iter().map(|s| step_from_json(trs, s)).collect::<Result<_>>()?))
        }
        "omega" => {
            let rule = str_field(v, "rule")?;
            trs.rule_or_err(rule)?;
            let step = StepT {
                src: tf_from_json(trs, field(v, "src_family")?)?,
                pos: PosTemplate::parse(str_field(v, "pos")?)?,
                rule: sym(rule),
            };
            Ok(Block::Omega { var: sym(var), step })
        }
        "repeat" => {
            let bs = field(v, "blocks")?.as_array().ok_or_else(|| Error::pre("`blocks` must be an array"))?;
            Ok(Block::Repeat { var: sym(var), body: bs.iter().map(|b| block_from_json(trs, b)).collect::<Result<_>>()? })
        }
        k => Err(Error::pre(format!("unknown block kind `{k}`"))),
    }
}

impl RedSeq {
    pub fn empty(t: Term) -> RedSeq {
        RedSeq { source: Some(t), blocks: vec![] }
    }

    pub fn finite(steps: &[RedexStep]) -> RedSeq {
        RedSeq { source: None, blocks: vec![Block::Finite(steps.iter().map(StepT::of).collect())] }
    }

    pub fn length(&self) -> Ordinal {
        list_length(&self.blocks)
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({"blocks": self.blocks.iter().map(block_json).collect::<Vec<_>>()});
        if let Some(t) = &self.source {
            v["source"] = json!(t.to_string());
        }
        v
    }

    pub fn from_json(trs: &Trs, v: &Value) -> Result<RedSeq> {
        let source = match v.get("source") {
            Some(s) => Some(parse_closed_term(s.as_str().ok_or_else(|| Error::pre("`source` must be a string"))?, &trs.sig)?),
            None => None,
        };
        let bs = field(v, "blocks")?.as_array().ok_or_else(|| Error::pre("`blocks` must be an array"))?;
        Ok(RedSeq { source, blocks: bs.iter().map(|b| block_from_json(trs, b)).collect::<Result<_>>()? })
    }
}
