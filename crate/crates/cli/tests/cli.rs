use std::path::PathBuf;
use std::process::{Command, Output};

use irw_core::equivalence::deep_json;
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn irw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irw")).current_dir(root()).args(args).output().expect("irw runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses on a large stack; a `derivation` field is replaced by its JSON
/// text, since it can nest deeper than the test thread can drop.
fn json(args: &[&str]) -> Value {
    let text = stdout(&irw(args));
    let run = move || {
        let mut v = deep_json(&text).unwrap();
        if let Some(d) = v.as_object_mut().and_then(|o| o.remove("derivation")) {
            v["derivation"] = Value::String(d.to_string());
        }
        v
    };
    std::thread::Builder::new().stack_size(1 << 28).spawn(run).unwrap().join().unwrap()
}

const MSTEP: &str = "workspaces/mstep.irw";

#[test]
fn sources_and_targets() {
    let pretty = |cmd: &str, pt: &str| stdout(&irw(&["--pretty", cmd, MSTEP, "--pt", pt])).trim().to_string();
    assert_eq!(pretty("src", "psi1"), "h(f(i(a),n(m(b))))");
    assert_eq!(pretty("tgt", "psi1"), "h(h(n(n(b))))");
    assert_eq!(pretty("tgt", "psi4"), "h(h(b))");
    assert_eq!(json(&["src", MSTEP, "--pt", "psi2"])["term"], "m^w");
    assert_eq!(json(&["tgt", MSTEP, "--pt", "psi2"])["term"], "n^w");
    assert_eq!(json(&["src", MSTEP, "--pt", "psi4"])["term"], "h(f(i(g^w), a))");
}

#[test]
fn non_convergent_exit_code() {
    let o = irw(&["tgt", MSTEP, "--pt", "psi3"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "NonConvergent");
}

#[test]
fn parse_errors_exit_one() {
    let dir = tempdir();
    let bad = dir.join("bad.irw");
    std::fs::write(&bad, "sig f/1(\n").unwrap();
    let o = irw(&["validate", bad.to_str().unwrap(), "--pt", "f"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "ParseError");
    assert_eq!(irw(&["tgt", MSTEP, "--pt", "f(("]).status.code(), Some(1));
}

#[test]
fn compress_is_checked_and_deterministic() {
    let args = ["compress", MSTEP, "--pt", "comp_example"];
    let v = json(&args);
    assert_eq!(v["stats"]["steps_count"], "w");
    assert_eq!(v["stats"]["layers"]["input"], "3");
    assert!(v["checked"]["nodes"].as_u64().unwrap() > 0);
    assert_eq!(stdout(&irw(&args)), stdout(&irw(&args)));
    let dir = tempdir();
    let d = dir.join("deriv.json");
    std::fs::write(&d, v["derivation"].as_str().unwrap()).unwrap();
    let checked = json(&["check-derivation", MSTEP, "--deriv", d.to_str().unwrap(), "--mode", "full"]);
    assert_eq!(checked["accepted"], true);
    let q = v["result"].as_str().unwrap();
    assert_eq!(json(&["tgt", MSTEP, "--pt", q]), json(&["tgt", MSTEP, "--pt", "comp_example"]));
}

#[test]
fn factorise_splits_at_depth() {
    let v = json(&["factorise", MSTEP, "--pt", "psi1", "--n", "1"]);
    assert_eq!(v["chi"], "h(mu(a, n(m(b))))");
    assert_eq!(v["phi"], "h(h(n(pi(b))))");
    assert_eq!(v["mind_phi"], 3);
}

#[test]
fn certificates_accepted_and_mutation_rejected() {
    for c in ["certificates/struct_chain.json", "certificates/lim_bracketing.json"] {
        assert_eq!(json(&["check-derivation", c])["accepted"], true, "{c}");
    }
    let text = std::fs::read_to_string(root().join("certificates/struct_chain.json")).unwrap();
    let mut cert: Value = serde_json::from_str(&text).unwrap();
    cert["derivation"]["rhs"] = Value::String("rho(f^w)".into());
    let dir = tempdir();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, cert.to_string()).unwrap();
    let o = irw(&["check-derivation", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn redseq_round_trip() {
    let dir = tempdir();
    for pt in ["h(f(i(rho), n(m(b)))); h(mu(b, n(m(b))))", "conc(i){ iter(n(_), i, pi(m^w)) }"] {
        let rs = dir.join("rs.json");
        let o = irw(&["--out", rs.to_str().unwrap(), "to-redseq", MSTEP, "--pt", pt]);
        assert!(o.status.success());
        let back = json(&["denote", MSTEP, "--redseq", rs.to_str().unwrap()]);
        let q = back["pt"].as_str().unwrap();
        assert_eq!(json(&["deneq", MSTEP, "--pt", pt, "--other", q])["status"], "equal");
    }
}

#[test]
fn rebracketing() {
    let v = json(&["breq", MSTEP, "--pt", "(rho; pi(b)); n(tau(b))", "--other", "rho; (pi(b); n(tau(b)))"]);
    assert_eq!(v["derivable"], true);
    let v = json(&["breq", MSTEP, "--pt", "rho; pi(b)", "--other", "pi(a); rho"]);
    assert_eq!(v["derivable"], false);
}

fn tempdir() -> PathBuf {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static N: AtomicUsize = AtomicUsize::new(0);
    let d = std::env::temp_dir().join(format!("irw-cli-{}-{}", std::process::id(), N.fetch_add(1, Ordering::SeqCst)));
    std::fs::create_dir_all(&d).unwrap();
    d
}
