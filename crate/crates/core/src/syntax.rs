//! Text syntax for terms, proof terms and workspace files.
//!
//! ```text
//! sig f/2 i/1 h/1 a/0
//! rule mu: f(i(x), y) -> h(y)
//! term t = rec X. f(X, a)
//! pt psi = h(mu(rho, n(pi(b))))
//! pt chain = conc(i){ iter(g(_), i, mu(f^w)) }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::affine::Affine;
use crate::error::{Error, Result};
use crate::pterm::Pt;
use crate::term::{sym, Builder, Label, Signature, SymKind, Term};
use crate::trs::{Rule, Trs};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: [&str; 15] = ["->", "(", ")", ",", ";", ".", "{", "}", "^", "_", ":", "=", "/", "*", "+"];

fn lex(src: &str, line0: usize) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = line0;
    let mut col = 1;
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, col);
        if c.is_ascii_alphabetic() || (c == '_' && cs.get(i + 1).is_some_and(|d| d.is_ascii_alphanumeric())) {
            let mut s = String::new();
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_' || cs[i] == '\'') {
                s.push(cs[i]);
                i += 1;
                col += 1;
            }
            out.push(Spanned { tok: Tok::Ident(s), line: start.0, col: start.1 });
            continue;
        }
        if c.is_ascii_digit() {
            let mut n: u64 = 0;
            while i < cs.len() && cs[i].is_ascii_digit() {
                n = n
                    .checked_mul(10)
                    .and_then(|n| n.checked_add(cs[i] as u64 - '0' as u64))
                    .ok_or(Error::Parse { line, col, expected: "a smaller number".into() })?;
                i += 1;
                col += 1;
            }
            out.push(Spanned { tok: Tok::Num(n), line: start.0, col: start.1 });
            continue;
        }
        let rest: String = cs[i..cs.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(*p)) {
            Some(p) => {
                out.push(Spanned { tok: Tok::Punct(p), line, col });
                i += p.len();
                col += p.len();
            }
            None => return Err(Error::Parse { line, col, expected: format!("a token, found {c:?}") }),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Surface tree of a term before graph construction.
enum Ast {
    App(String, Vec<Ast>, usize, usize),
    Loop(String, usize, usize),
    Rec(String, Box<Ast>),
    Ref(String, usize, usize),
    Hole,
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    sig: &'a Signature,
    allow_vars: bool,
}

impl<'a> Parser<'a> {
    fn new(src: &str, line0: usize, sig: &'a Signature) -> Result<Self> {
        Ok(Parser { toks: lex(src, line0)?, pos: 0, sig, allow_vars: false })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn err<T>(&self, expected: &str) -> Result<T> {
        let (line, col) = self.here();
        Err(Error::Parse { line, col, expected: expected.to_string() })
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(&format!("'{p}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("an identifier"),
        }
    }

    fn num(&mut self) -> Result<u64> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("a number"),
        }
    }

    fn end(&self) -> Result<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.err("end of input"),
        }
    }

    fn ast(&mut self) -> Result<Ast> {
        let (line, col) = self.here();
        if self.eat("_") {
            return Ok(Ast::Hole);
        }
        let name = self.ident()?;
        if name == "rec" {
            let x = self.ident()?;
            self.expect(".")?;
            return Ok(Ast::Rec(x, Box::new(self.ast()?)));
        }
        if name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Ok(Ast::Ref(name, line, col));
        }
        if self.eat("^") {
            if self.ident()? != "w" {
                return Err(Error::Parse { line, col: col + name.len() + 1, expected: "'w' after '^'".into() });
            }
            return Ok(Ast::Loop(name, line, col));
        }
        let mut kids = Vec::new();
        if self.eat("(") {
            if !self.eat(")") {
                loop {
                    kids.push(self.ast()?);
                    if self.eat(")") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
        }
        Ok(Ast::App(name, kids, line, col))
    }

    fn label(&self, name: &str, n: usize, line: usize, col: usize) -> Result<Label> {
        match self.sig.get(name) {
            Some((a, _)) if a == n => Ok(Label::Sym(sym(name))),
            Some((a, _)) => Err(Error::Parse { line, col, expected: format!("{a} arguments for {name}, found {n}") }),
            None if n == 0 && self.allow_vars => Ok(Label::Var(sym(name))),
            None => Err(Error::Parse { line, col, expected: format!("a declared symbol, found {name}") }),
        }
    }

    fn build(&self, a: &Ast, b: &mut Builder, env: &mut HashMap<String, usize>) -> Result<usize> {
        if let Ast::Ref(x, line, col) = a {
            return env
                .get(x)
                .copied()
                .ok_or_else(|| Error::Parse { line: *line, col: *col, expected: format!("a bound rec variable, found {x}") });
        }
        let id = b.reserve();
        self.build_at(a, b, env, id)?;
        Ok(id)
    }

    fn build_at(&self, a: &Ast, b: &mut Builder, env: &mut HashMap<String, usize>, id: usize) -> Result<()> {
        match a {
            Ast::Hole => b.set(id, Label::Hole, vec![]),
            Ast::Loop(f, line, col) => {
                let l = self.label(f, 1, *line, *col)?;
                b.set(id, l, vec![id]);
            }
            Ast::App(f, ks, line, col) => {
                let l = self.label(f, ks.len(), *line, *col)?;
                let kids = ks.iter().map(|k| self.build(k, b, env)).collect::<Result<_>>()?;
                b.set(id, l, kids);
            }
            Ast::Rec(x, body) => {
                let old = env.insert(x.clone(), id);
                self.build_at(body, b, env, id)?;
                match old {
                    Some(o) => env.insert(x.clone(), o),
                    None => env.remove(x),
                };
            }
            Ast::Ref(x, line, col) => {
                return Err(Error::Parse { line: *line, col: *col, expected: format!("a guarded occurrence of {x}") })
            }
        }
        Ok(())
    }

    fn term(&mut self) -> Result<Term> {
        let a = self.ast()?;
        let mut b = Builder::new();
        let root = self.build(&a, &mut b, &mut HashMap::new())?;
        Ok(b.finish(root))
    }

    fn affine(&mut self) -> Result<Affine> {
        let mut acc = Affine::constant(0);
        loop {
            let t = match self.peek().clone() {
                Tok::Num(n) => {
                    self.pos += 1;
                    if self.eat("*") {
                        Affine::var(&sym(&self.ident()?)).scale(n)
                    } else {
                        Affine::constant(n)
                    }
                }
                Tok::Ident(v) => {
                    self.pos += 1;
                    Affine::var(&sym(&v))
                }
                _ => return self.err("an affine exponent"),
            };
            acc = acc.add(&t);
            if !self.eat("+") {
                return Ok(acc);
            }
        }
    }

    fn pt(&mut self) -> Result<Pt> {
        let a = self.pt_atom()?;
        if self.eat(";") {
            Ok(Pt::comp(a, self.pt()?))
        } else {
            Ok(a)
        }
    }

    fn pt_atom(&mut self) -> Result<Pt> {
        if self.eat("(") {
            let p = self.pt()?;
            self.expect(")")?;
            return Ok(p);
        }
        let (line, col) = self.here();
        match (self.peek().clone(), self.peek2().clone()) {
            (Tok::Ident(k), Tok::Punct("(")) if k == "conc" && self.sig.get("conc").is_none() => {
                self.pos += 2;
                let v = self.ident()?;
                self.expect(")")?;
                self.expect("{")?;
                let body = self.pt()?;
                self.expect("}")?;
                Ok(Pt::inf(vec![], &v, body))
            }
            (Tok::Ident(k), Tok::Punct("(")) if k == "iter" && self.sig.get("iter").is_none() => {
                self.pos += 2;
                let c = self.term()?;
                self.expect(",")?;
                let e = self.affine()?;
                self.expect(",")?;
                let body = self.pt()?;
                self.expect(")")?;
                Pt::iter(c, e, body).map_err(|e| Error::Parse { line, col, expected: e.to_string() })
            }
            (Tok::Ident(k), _) if k == "rec" => Ok(Pt::MStep(self.term()?)),
            (Tok::Ident(_), Tok::Punct("^")) => Ok(Pt::MStep(self.term()?)),
            (Tok::Ident(f), _) => {
                self.pos += 1;
                let mut kids = Vec::new();
                if self.eat("(") && !self.eat(")") {
                    loop {
                        kids.push(self.pt()?);
                        if self.eat(")") {
                            break;
                        }
                        self.expect(",")?;
                    }
                }
                match self.sig.get(&f) {
                    Some((a, _)) if a == kids.len() => Ok(Pt::app(self.sig, &sym(&f), kids)),
                    Some((a, _)) => {
                        Err(Error::Parse { line, col, expected: format!("{a} arguments for {f}, found {}", kids.len()) })
                    }
                    None => Err(Error::Parse { line, col, expected: format!("a declared symbol, found {f}") }),
                }
            }
            _ => self.err("a proof term"),
        }
    }
}

/// Parses a term; identifiers outside the signature are variables.
pub fn parse_term(src: &str, sig: &Signature) -> Result<Term> {
    let mut p = Parser::new(src, 1, sig)?;
    p.allow_vars = true;
    let t = p.term()?;
    p.end()?;
    Ok(t)
}

/// Parses a closed term, rejecting undeclared identifiers.
pub fn parse_closed_term(src: &str, sig: &Signature) -> Result<Term> {
    let mut p = Parser::new(src, 1, sig)?;
    let t = p.term()?;
    p.end()?;
    Ok(t)
}

pub fn parse_pt(src: &str, trs: &Trs) -> Result<Pt> {
    let mut p = Parser::new(src, 1, &trs.sig)?;
    let t = p.pt()?;
    p.end()?;
    Ok(t)
}

pub fn parse_affine(src: &str) -> Result<Affine> {
    let sig = Signature::new();
    let mut p = Parser::new(src, 1, &sig)?;
    let e = p.affine()?;
    p.end()?;
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Options {
    pub depth: usize,
    pub samples: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options { depth: 32, samples: crate::ordinal::DEFAULT_SAMPLES }
    }
}

#[derive(Clone, Debug)]
pub struct Workspace {
    pub trs: Trs,
    pub terms: BTreeMap<String, Term>,
    pub pts: BTreeMap<String, Pt>,
    pub options: Options,
}

impl Workspace {
    pub fn pt(&self, name: &str) -> Result<&Pt> {
        self.pts.get(name).ok_or_else(|| Error::UnknownSymbol(format!("proof term {name}")))
    }

    pub fn term(&self, name: &str) -> Result<&Term> {
        self.terms.get(name).ok_or_else(|| Error::UnknownSymbol(format!("term {name}")))
    }
}

/// A statement split off at its keyword; continuation lines start with
/// whitespace.
struct Stmt {
    line: usize,
    kw: String,
    rest: String,
    rest_col: usize,
}

fn statements(src: &str) -> Vec<Stmt> {
    let mut out: Vec<Stmt> = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            if let Some(s) = out.last_mut() {
                s.rest.push('\n');
                s.rest.push_str(line);
                continue;
            }
        }
        let trimmed = line.trim_start();
        let lead = line.len() - trimmed.len();
        let kw: String = trimmed.chars().take_while(|c| !c.is_whitespace()).collect();
        let rest = trimmed[kw.len()..].to_string();
        out.push(Stmt { line: i + 1, kw, rest, rest_col: lead + 1 });
    }
    out
}

fn shift(e: Error, s: &Stmt) -> Error {
    match e {
        Error::Parse { line, col, expected } => {
            let col = if line == 1 { col + s.rest_col - 1 + s.kw.len() } else { col };
            Error::Parse { line: line + s.line - 1, col, expected }
        }
        e => e,
    }
}

fn bad(s: &Stmt, expected: &str) -> Error {
    Error::Parse { line: s.line, col: s.rest_col, expected: expected.to_string() }
}

/// Parses a workspace: `sig`, `rule`, `term`, `pt` and `option` lines.
pub fn parse_workspace(src: &str) -> Result<Workspace> {
    let stmts = statements(src);
    let mut sig = Signature::new();
    let mut rules = Vec::new();
    let mut options = Options::default();
    for s in &stmts {
        match s.kw.as_str() {
            "sig" => {
                let mut p = Parser::new(&s.rest, 1, &sig).map_err(|e| shift(e, s))?;
                let mut decls = Vec::new();
                while *p.peek() != Tok::Eof {
                    let f = p.ident().map_err(|e| shift(e, s))?;
                    p.expect("/").map_err(|e| shift(e, s))?;
                    let n = p.num().map_err(|e| shift(e, s))?;
                    decls.push((f, n as usize));
                    p.eat(",");
                }
                for (f, n) in decls {
                    sig.add(&f, n, SymKind::Function).map_err(|_| bad(s, &format!("a fresh symbol, found {f}")))?;
                }
            }
            "rule" => {
                let mut p = Parser::new(&s.rest, 1, &sig).map_err(|e| shift(e, s))?;
                p.allow_vars = true;
                let parsed = (|| -> Result<(String, Term, Term)> {
                    let name = p.ident()?;
                    p.expect(":")?;
                    let l = p.term()?;
                    p.expect("->")?;
                    let r = p.term()?;
                    p.end()?;
                    Ok((name, l, r))
                })()
                .map_err(|e| shift(e, s))?;
                let (name, l, r) = parsed;
                rules.push(Rule::new(&name, l, r).map_err(|e| bad(s, &format!("a valid rule ({e})")))?);
            }
            "option" => {
                let mut p = Parser::new(&s.rest, 1, &sig).map_err(|e| shift(e, s))?;
                let r = (|| -> Result<()> {
                    let k = p.ident()?;
                    p.expect("=")?;
                    let n = p.num()?;
                    match k.as_str() {
                        "depth" => options.depth = n as usize,
                        "samples" => options.samples = n,
                        _ => return p.err("depth or samples"),
                    }
                    p.end()
                })();
                r.map_err(|e| shift(e, s))?;
            }
            "term" | "pt" => {}
            _ => return Err(bad(s, "sig, rule, term, pt or option")),
        }
    }
    let trs = Trs::new(sig, rules)?;
    let mut terms = BTreeMap::new();
    let mut pts = BTreeMap::new();
    for s in &stmts {
        if s.kw != "term" && s.kw != "pt" {
            continue;
        }
        let mut p = Parser::new(&s.rest, 1, &trs.sig).map_err(|e| shift(e, s))?;
        let name = p.ident().map_err(|e| shift(e, s))?;
        p.expect("=").map_err(|e| shift(e, s))?;
        if terms.contains_key(&name) || pts.contains_key(&name) {
            return Err(bad(s, &format!("a fresh name, found {name}")));
        }
        if s.kw == "term" {
            p.allow_vars = true;
            let t = p.term().and_then(|t| p.end().map(|_| t)).map_err(|e| shift(e, s))?;
            terms.insert(name, t);
        } else {
            let t = p.pt().and_then(|t| p.end().map(|_| t)).map_err(|e| shift(e, s))?;
            pts.insert(name, t);
        }
    }
    Ok(Workspace { trs, terms, pts, options })
}

pub fn parse_file(path: &Path) -> Result<Workspace> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Error::pre(format!("cannot read {}: {e}", path.display())))?;
    parse_workspace(&src)
}

/// Prints a workspace back in the syntax accepted by [`parse_workspace`].
pub fn print_workspace(ws: &Workspace) -> String {
    let mut out = String::from("sig");
    for (f, n) in ws.trs.sig.functions() {
        out.push_str(&format!(" {f}/{n}"));
    }
    out.push('\n');
    for r in &ws.trs.rules {
        out.push_str(&format!("rule {}: {} -> {}\n", r.name, r.lhs, r.rhs));
    }
    for (n, t) in &ws.terms {
        out.push_str(&format!("term {n} = {t}\n"));
    }
    for (n, p) in &ws.pts {
        out.push_str(&format!("pt {n} = {p}\n"));
    }
    out
}
