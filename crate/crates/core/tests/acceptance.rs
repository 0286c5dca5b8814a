//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use irw_core::compression::compress;
use irw_core::denotation::steps_count;
use irw_core::equivalence::{check_derivation, Mode};
use irw_core::error::Error;
use irw_core::ordinal::Ordinal;
use irw_core::proofterm::{mind, source, target};
use irw_core::syntax::{parse_pt, parse_term};
use proptest::prelude::any;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use common::factor::factorise_random;
use common::oracles::{breq_deneq, distance_oracle, mstep_oracle};
use common::props::PROPERTIES;
use common::{compress_corpus, example, load_cert, mutants, CERTS};

type Outcome = Result<String, String>;

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn corpus_ends() -> Outcome {
    let start = Instant::now();
    let ws = example("mstep.irw");
    let t = &ws.trs;
    let expect = [
        ("psi1", "h(f(i(a), n(m(b))))", Some("h(h(n(n(b))))")),
        ("psi2", "m^w", Some("n^w")),
        ("psi3", "g^w", None),
        ("psi4", "h(f(i(g^w), a))", Some("h(h(b))")),
    ];
    for (name, src, tgt) in expect {
        let p = ws.pt(name).map_err(|e| e.to_string())?;
        let s = source(t, p).map_err(|e| format!("{name}: {e}"))?;
        if s != parse_term(src, &t.sig).unwrap() {
            return Err(format!("src({name}) = {s}, expected {src}"));
        }
        match (target(t, p), tgt) {
            (Ok(u), Some(v)) if u == parse_term(v, &t.sig).unwrap() => {}
            (Err(Error::NonConvergent(_)), None) => {}
            (got, _) => return Err(format!("tgt({name}) = {got:?}, expected {tgt:?}")),
        }
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("4 proof terms in {:.2?}", start.elapsed()))
}

fn certificates() -> Outcome {
    let mut rejected = 0;
    for (name, mode, limit) in [(CERTS[0], Mode::Base, usize::MAX), (CERTS[1], Mode::Full, 12)] {
        let (ws, c) = load_cert(name);
        check_derivation(&ws.trs, &c.derivation, mode).map_err(|e| format!("{name}: {e}"))?;
        for (what, m) in mutants(&c.derivation, limit) {
            if check_derivation(&ws.trs, &m, Mode::Full).is_ok() {
                return Err(format!("{name}: accepted mutant {what}"));
            }
            rejected += 1;
        }
    }
    if rejected < 20 {
        return Err(format!("only {rejected} mutants"));
    }
    Ok(format!("2 certificates accepted, {rejected}/{rejected} mutants rejected"))
}

fn compression() -> Outcome {
    let start = Instant::now();
    let corpus = compress_corpus();
    for (ws, s) in &corpus {
        let t = &ws.trs;
        let p = parse_pt(s, t).map_err(|e| e.to_string())?;
        let c = compress(t, &p).map_err(|e| format!("{s}: {e}"))?;
        let steps = steps_count(t, &c.result).map_err(|e| e.to_string())?;
        if steps > Ordinal::omega() {
            return Err(format!("{s}: {steps} steps"));
        }
        check_derivation(t, &c.deriv, Mode::Full).map_err(|e| format!("{s}: {e}"))?;
        if c.deriv.lhs != p || c.deriv.rhs != c.result {
            return Err(format!("{s}: derivation has the wrong ends"));
        }
        let ends = |q| -> Result<_, Error> { Ok((source(t, q)?, target(t, q)?, mind(t, q)?)) };
        if ends(&p).map_err(|e| e.to_string())? != ends(&c.result).map_err(|e| e.to_string())? {
            return Err(format!("{s}: src, tgt or mind changed"));
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("{} proof terms in {:.2?}", corpus.len(), start.elapsed()))
}

fn factorisation() -> Outcome {
    let n = factorise_random(200, 7)?;
    Ok(format!("{n} random proof terms, 0 failures"))
}

fn rebracketing() -> Outcome {
    let start = Instant::now();
    let (pairs, equal) = breq_deneq(5)?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("{pairs} pairs, {equal} equivalent, 0 discrepancies in {:.2?}", start.elapsed()))
}

fn properties() -> Outcome {
    for (name, check) in PROPERTIES {
        let mut runner = TestRunner::new(Config { cases: 500, failure_persistence: None, ..Config::default() });
        runner
            .run(&any::<u64>(), |seed| check(seed).map_err(TestCaseError::fail))
            .map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} properties x 500 cases", PROPERTIES.len()))
}

fn oracles() -> Outcome {
    let n = mstep_oracle(7)?;
    let strict = distance_oracle(200, 11)?;
    Ok(format!("{n} multisteps exact; 200 distance pairs ({strict} below depth 12) exact"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("multistep corpus src/tgt exact, < 1s", corpus_ends),
        ("certificates accepted, tag mutants rejected", certificates),
        ("compression <= w steps, full check, < 10s", compression),
        ("factorisation, 200 cases", factorisation),
        ("breq iff deneq up to 5 steps, < 60s", rebracketing),
        ("property suites, 500 cases each", properties),
        ("multistep and distance oracles", oracles),
    ];
    let failed = common::big_stack(move || {
        let mut failed = 0;
        for (i, (what, run)) in criteria.iter().enumerate() {
            match run() {
                Ok(detail) => println!("criterion {}: PASS  {what}: {detail}", i + 1),
                Err(why) => {
                    failed += 1;
                    println!("criterion {}: FAIL  {what}: {why}", i + 1);
                }
            }
        }
        failed
    });
    if failed > 0 {
        std::process::exit(1);
    }
}
