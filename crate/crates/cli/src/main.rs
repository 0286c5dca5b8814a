use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use irw_core::compression::{cfpc, cfps, compress, factorise};
use irw_core::denotation::{breq_check, breq_search, deneq_check, denote_redseq, steps_count, to_redseq};
use irw_core::equivalence::{check_with, deep_json, Certificate, Deriv, Fragment, Mode};
use irw_core::error::Error;
use irw_core::position::Position;
use irw_core::proofterm::{classify, is_convergent, mind, source, target, validate_k};
use irw_core::pterm::Pt;
use irw_core::redseq::RedSeq;
use irw_core::syntax::{parse_file, parse_pt, Workspace};
use irw_core::term::Term;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "irw", version, about = "Infinitary rewriting with proof terms")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Depth to which `--pretty` unfolds rational terms.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Instances checked for every family.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Human-readable output.
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(clap::Args)]
struct Target {
    /// Workspace file.
    file: PathBuf,
    /// Name of a proof term in the workspace, or a proof term.
    #[arg(long)]
    pt: String,
}

#[derive(clap::Args)]
struct Pair {
    file: PathBuf,
    #[arg(long)]
    pt: String,
    /// The proof term to compare with.
    #[arg(long)]
    other: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Base,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Layer and classification of a proof term.
    Validate(Target),
    /// Source term.
    Src(Target),
    /// Target term.
    Tgt(Target),
    /// Minimum depth of the steps.
    Mind(Target),
    /// Number of steps denoted.
    Steps(Target),
    /// Layer of a proof term.
    Layer(Target),
    /// Proof term denoted by a reduction sequence given as JSON.
    Denote {
        file: PathBuf,
        #[arg(long)]
        redseq: PathBuf,
    },
    /// Reduction sequence of a stepwise proof term.
    ToRedseq(Target),
    /// Equivalent proof term with at most omega steps.
    Compress(Target),
    /// Splits a proof term into steps above and below depth `n`.
    Factorise {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        n: u64,
    },
    /// Condensed form by prefix steps.
    Cfps(Target),
    /// Condensed form by prefix chain over the given positions.
    Cfpc {
        #[command(flatten)]
        target: Target,
        /// Comma-separated positions, `ε` for the root.
        #[arg(long)]
        spa: String,
    },
    /// Checks a certificate, or a derivation against a workspace.
    CheckDerivation {
        file: PathBuf,
        /// Derivation JSON, when `file` is a workspace.
        #[arg(long)]
        deriv: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Whether two proof terms denote the same reduction.
    Deneq(Pair),
    /// Rebracketing equivalence, searched or checked against a derivation.
    Breq {
        #[command(flatten)]
        pair: Pair,
        /// A rebracketing derivation to check instead of searching.
        #[arg(long)]
        deriv: Option<PathBuf>,
        /// Terms visited by the search.
        #[arg(long, default_value_t = 100_000)]
        limit: usize,
    },
}

struct Ctx {
    depth: usize,
    samples: u64,
    pretty: bool,
}

impl Ctx {
    fn term(&self, t: &Term) -> Value {
        Value::String(if self.pretty { t.unfold(self.depth) } else { t.to_string() })
    }
}

fn load(path: &Path) -> anyhow::Result<Workspace> {
    parse_file(path).map_err(|e| anyhow!(e).context(format!("reading {}", path.display())))
}

fn proof_term(ws: &Workspace, s: &str) -> anyhow::Result<Pt> {
    match ws.pt(s) {
        Ok(p) => Ok(p.clone()),
        Err(_) => Ok(parse_pt(s, &ws.trs)?),
    }
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(deep_json(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn mind_json(m: Option<u64>) -> Value {
    m.map_or(json!("w"), |m| json!(m))
}

/// Checks a derivation this tool emitted; a rejection is a bug surfaced as
/// an invalid derivation.
fn certify(ws: &Workspace, d: &Deriv, mode: Mode, k: u64) -> anyhow::Result<Value> {
    let c = check_with(&ws.trs, d, mode, Fragment::All, k)?;
    Ok(serde_json::to_value(c)?)
}

fn run(cli: &Cli) -> anyhow::Result<Value> {
    let opts = |ws: &Workspace| Ctx {
        depth: cli.depth.unwrap_or(ws.options.depth),
        samples: cli.samples.unwrap_or(ws.options.samples),
        pretty: cli.pretty,
    };
    let open = |t: &Target| -> anyhow::Result<(Workspace, Pt)> {
        let ws = load(&t.file)?;
        let p = proof_term(&ws, &t.pt)?;
        Ok((ws, p))
    };
    Ok(match &cli.cmd {
        Cmd::Validate(t) => {
            let (ws, p) = open(t)?;
            let cx = opts(&ws);
            let layer = validate_k(&ws.trs, &p, cx.samples)?;
            json!({"layer": layer, "classification": classify(&ws.trs, &p), "convergent": is_convergent(&ws.trs, &p)})
        }
        Cmd::Src(t) => {
            let (ws, p) = open(t)?;
            json!({"term": opts(&ws).term(&source(&ws.trs, &p)?)})
        }
        Cmd::Tgt(t) => {
            let (ws, p) = open(t)?;
            json!({"term": opts(&ws).term(&target(&ws.trs, &p)?)})
        }
        Cmd::Mind(t) => {
            let (ws, p) = open(t)?;
            json!({"mind": mind_json(mind(&ws.trs, &p)?)})
        }
        Cmd::Steps(t) => {
            let (ws, p) = open(t)?;
            json!({"steps": steps_count(&ws.trs, &p)?})
        }
        Cmd::Layer(t) => {
            let (ws, p) = open(t)?;
            json!({"layer": validate_k(&ws.trs, &p, opts(&ws).samples)?})
        }
        Cmd::Denote { file, redseq } => {
            let ws = load(file)?;
            let r = RedSeq::from_json(&ws.trs, &read_json(redseq)?)?;
            json!({"pt": denote_redseq(&ws.trs, &r)?.to_string()})
        }
        Cmd::ToRedseq(t) => {
            let (ws, p) = open(t)?;
            to_redseq(&ws.trs, &p)?.to_json()
        }
        Cmd::Compress(t) => {
            let (ws, p) = open(t)?;
            let c = compress(&ws.trs, &p)?;
            let checked = certify(&ws, &c.deriv, Mode::Full, opts(&ws).samples)?;
            json!({
                "result": c.result.to_string(),
                "derivation": c.deriv.to_json(),
                "stats": c.stats,
                "checked": checked,
            })
        }
        Cmd::Factorise { target: t, n } => {
            let (ws, p) = open(t)?;
            let f = factorise(&ws.trs, &p, *n)?;
            let checked = certify(&ws, &f.deriv, Mode::Base, opts(&ws).samples)?;
            json!({
                "chi": f.chi.to_string(),
                "phi": f.phi.to_string(),
                "mind_phi": mind_json(mind(&ws.trs, &f.phi)?),
                "derivation": f.deriv.to_json(),
                "checked": checked,
            })
        }
        Cmd::Cfps(t) => {
            let (ws, p) = open(t)?;
            let (q, d) = cfps(&ws.trs, &p)?;
            let checked = certify(&ws, &d, Mode::Base, opts(&ws).samples)?;
            json!({"result": q.to_string(), "derivation": d.to_json(), "checked": checked})
        }
        Cmd::Cfpc { target: t, spa } => {
            let (ws, p) = open(t)?;
            let s = spa
                .split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| x.parse::<Position>())
                .collect::<Result<BTreeSet<_>, _>>()?;
            let (q, d) = cfpc(&ws.trs, &p, &s)?;
            let checked = certify(&ws, &d, Mode::Base, opts(&ws).samples)?;
            json!({"result": q.to_string(), "derivation": d.to_json(), "checked": checked})
        }
        Cmd::CheckDerivation { file, deriv, mode } => {
            let (ws, d, m) = match deriv {
                None => {
                    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
                    let (ws, c) = Certificate::parse(&text)?;
                    (ws, c.derivation, c.mode)
                }
                Some(path) => {
                    let ws = load(file)?;
                    let d = Deriv::from_json(&ws.trs, &read_json(path)?)?;
                    (ws, d, Mode::Full)
                }
            };
            let m = match mode {
                Some(ModeArg::Base) => Mode::Base,
                Some(ModeArg::Full) => Mode::Full,
                None => m,
            };
            let c = check_with(&ws.trs, &d, m, Fragment::All, opts(&ws).samples)?;
            json!({"accepted": true, "lhs": d.lhs.to_string(), "rhs": d.rhs.to_string(), "checked": c})
        }
        Cmd::Deneq(pair) => {
            let ws = load(&pair.file)?;
            let (p, q) = (proof_term(&ws, &pair.pt)?, proof_term(&ws, &pair.other)?);
            serde_json::to_value(deneq_check(&ws.trs, &p, &q, opts(&ws).samples)?)?
        }
        Cmd::Breq { pair, deriv, limit } => {
            let ws = load(&pair.file)?;
            let (p, q) = (proof_term(&ws, &pair.pt)?, proof_term(&ws, &pair.other)?);
            match deriv {
                Some(path) => {
                    let d = Deriv::from_json(&ws.trs, &read_json(path)?)?;
                    let c = breq_check(&ws.trs, &d, &p, &q, Mode::Full)?;
                    json!({"derivable": true, "checked": c})
                }
                None => match breq_search(&ws.trs, &p, &q, *limit)? {
                    Some(d) => json!({"derivable": true, "derivation": d.to_json()}),
                    None => json!({"derivable": false}),
                },
            }
        }
    })
}

fn render(v: &Value, pretty: bool) -> String {
    if !pretty {
        return v.to_string();
    }
    match v.as_object() {
        Some(o) if o.len() == 1 => match o.values().next() {
            Some(Value::String(s)) => s.clone(),
            Some(x) => x.to_string(),
            None => String::new(),
        },
        _ => serde_json::to_string_pretty(v).unwrap_or_default(),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NonConvergent(_)) => 2,
        Some(Error::DerivationInvalid { .. }) => 3,
        _ => 1,
    }
}

fn kind(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<Error>() {
        Some(Error::NonConvergent(_)) => "NonConvergent",
        Some(Error::DerivationInvalid { .. }) => "DerivationInvalid",
        Some(Error::Parse { .. }) => "ParseError",
        Some(Error::PreconditionViolated(_)) => "PreconditionViolated",
        Some(Error::UnsupportedFamily(_)) => "UnsupportedFamily",
        Some(Error::PositionOutOfDomain(_)) => "PositionOutOfDomain",
        Some(_) => "Error",
        None => "IoError",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Derivations are deep trees; checking them recurses along their height.
    let worker = std::thread::Builder::new().stack_size(1 << 30).spawn(move || {
        let r = run(&cli);
        (cli, r)
    });
    let (cli, r) = worker.expect("spawn worker").join().expect("worker panicked");
    match r {
        Ok(v) => {
            let text = render(&v, cli.pretty) + "\n";
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("{}", json!({"error": "IoError", "message": format!("writing {}: {e}", path.display())}));
                        return ExitCode::from(1);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"error": kind(&e), "message": format!("{e:#}")}));
            ExitCode::from(exit_code(&e))
        }
    }
}
