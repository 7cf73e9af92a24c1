//! Command-line surface: problem files, table and model files, and the
//! `recant` subcommands.
//!
//! Exit status: 0 success, 1 the effect is not identified (recanting
//! district, hedge) or the data cannot support it (positivity), 2 usage,
//! parse and IO errors.

pub mod io;
pub mod problem;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::admg::Admg;
use crate::eval::{decompose, evaluate, EvalError, TableSource, Value};
use crate::formula::{canonicalize_in, identify_pse, interventional_functional, render, FormulaError, Style};
use crate::pse::{find_recanting_districts, relevant_nodes, unroll, unroll_regime};
use crate::scalar::Scalar;
use crate::scm::{counterexample_models, first_interventional_disagreement, DistTable, Regime};
use crate::Rational;

pub use io::{read_model, read_table, write_model, write_table, IoError};
pub use problem::{parse_problem, render_problem, BundleForm, Code, Diagnostic, ProblemSpec};

#[derive(Parser, Debug)]
#[command(name = "recant", version, about = "Identify path-specific effects in acyclic directed mixed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SpecArg {
    /// Problem file.
    spec: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a problem and run the recanting-district check.
    Check(SpecArg),
    /// Print the nested counterfactual of the effect.
    Unroll(SpecArg),
    /// Print the identifying functional.
    Identify {
        #[command(flatten)]
        spec: SpecArg,
        /// Functional over interventional distributions.
        #[arg(long, conflicts_with = "observational")]
        interventional: bool,
        /// Functional over the observed joint (default).
        #[arg(long)]
        observational: bool,
        #[arg(long)]
        latex: bool,
    },
    /// Evaluate the identified effect distribution on an observed table.
    Evaluate {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        table: PathBuf,
    },
    /// Brute-force ground truth from a model file.
    Oracle {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        model: PathBuf,
        /// `obs`, `do:<v>=<label>,...`, `pse` or `total`.
        #[arg(long, default_value = "pse")]
        what: String,
    },
    /// Build two models that agree on every intervention but not on the effect.
    Counterexample {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value = "1/1000")]
        epsilon: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split the total effect into the part along the bundle and the rest.
    Decompose {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        table: PathBuf,
    },
}

/// Outcome of a command: exit status plus the text for stdout.
struct Fail {
    code: i32,
    text: String,
}

fn usage(text: impl Into<String>) -> Fail {
    Fail { code: 2, text: text.into() }
}

fn domain(text: impl Into<String>) -> Fail {
    Fail { code: 1, text: text.into() }
}

type Outcome = Result<String, Fail>;

fn read_file(p: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(p).map_err(|e| usage(format!("error: cannot read {}: {e}", p.display())))
}

fn load_problem(p: &Path) -> Result<ProblemSpec, Fail> {
    let text = read_file(p)?;
    parse_problem(&text).map_err(|d| usage(format!("error: {}: {d}", p.display())))
}

fn formula_failure(g: &Admg, e: FormulaError) -> Fail {
    match e {
        FormulaError::Recanting(reports) => {
            let mut s = String::from("not identified: recanting district\n");
            for r in reports {
                let _ = writeln!(s, "{}", r.render(g));
            }
            domain(s)
        }
        FormulaError::Hedge(h) => domain(format!("not identified: {}\n", h.render(g))),
        other => usage(format!("error: {other}\n")),
    }
}

fn eval_failure(e: EvalError) -> Fail {
    match e {
        EvalError::Positivity(_) => domain(format!("error: {e}\n")),
        other => usage(format!("error: {other}\n")),
    }
}

fn show_value<T: Scalar>(v: Value<T>) -> String {
    match v {
        Value::Scalar(x) => format!("{}\n", x.to_text()),
        Value::Dist(t) => write_table(&t),
    }
}

fn check(spec: &ProblemSpec) -> Outcome {
    let g = &spec.graph;
    let b = &spec.bundle;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "graph: {} vertices, {} directed, {} bidirected",
        g.len(),
        g.directed_edges().len(),
        g.bidirected_edges().len()
    );
    let _ = writeln!(s, "treatments {} outcomes {}", g.fmt_set(&b.treatments), g.fmt_set(&b.outcomes));
    let _ = writeln!(s, "bundle: {} path(s), {} green edge(s)", b.paths.len(), b.green.len());
    let vstar = relevant_nodes(g, &b.treatments, &b.outcomes);
    let ds: Vec<String> = g.subgraph(&vstar).districts().iter().map(|d| g.fmt_set(d)).collect();
    let _ = writeln!(s, "districts: {}", ds.join(" "));
    let reports = find_recanting_districts(g, b);
    if reports.is_empty() {
        let _ = writeln!(s, "verdict: no recanting district");
        if let Err(FormulaError::Hedge(h)) = identify_pse(g, b) {
            let _ = writeln!(s, "not identified: {}", h.render(g));
            return Err(domain(s));
        }
        let _ = writeln!(s, "identified");
        Ok(s)
    } else {
        let _ = writeln!(s, "verdict: recanting");
        for r in reports {
            let _ = writeln!(s, "{}", r.render(g));
        }
        Err(domain(s))
    }
}

fn identify(spec: &ProblemSpec, interventional: bool, latex: bool) -> Outcome {
    let g = &spec.graph;
    let f = if interventional { interventional_functional(g, &spec.bundle) } else { identify_pse(g, &spec.bundle) };
    let f = f.map_err(|e| formula_failure(g, e))?;
    let style = if latex { Style::Latex } else { Style::Text };
    Ok(format!("{}\n", render(&canonicalize_in(&f, g), g, &spec.values, style)))
}

fn load_table(spec: &ProblemSpec, p: &Path) -> Result<DistTable<Rational>, Fail> {
    read_table(&read_file(p)?, &spec.graph).map_err(|e| usage(format!("error: {}: {e}\n", p.display())))
}

fn evaluate_cmd(spec: &ProblemSpec, table: &Path) -> Outcome {
    let g = &spec.graph;
    let src = TableSource::new(load_table(spec, table)?);
    let f = identify_pse(g, &spec.bundle).map_err(|e| formula_failure(g, e))?;
    evaluate(&f, &src, &spec.values).map(show_value).map_err(eval_failure)
}

fn decompose_cmd(spec: &ProblemSpec, table: &Path) -> Outcome {
    let g = &spec.graph;
    let src = TableSource::new(load_table(spec, table)?);
    if spec.bundle.outcomes.len() != 1 {
        return Err(usage("error: decompose needs a single outcome\n"));
    }
    let d = decompose(g, &spec.bundle, &spec.values, &src).map_err(|e| match e {
        EvalError::Formula(f) => formula_failure(g, f),
        other => eval_failure(other),
    })?;
    Ok(format!(
        "total {}\nin_pi {}\nnot_in_pi {}\n",
        d.total.to_text(),
        d.in_pi.to_text(),
        d.not_in_pi.to_text()
    ))
}

fn parse_regime(spec: &ProblemSpec, m: &crate::scm::DiscreteScm<Rational>, text: &str) -> Result<Regime, Fail> {
    let g = &spec.graph;
    let mut r = Regime::new();
    for part in text.split(',').filter(|p| !p.is_empty()) {
        let (name, label) = part.split_once('=').ok_or_else(|| usage(format!("error: bad assignment `{part}`\n")))?;
        let v = g.index(name).map_err(|e| usage(format!("error: {e}\n")))?;
        let i = m.value_index(v, label).map_err(|e| usage(format!("error: {e}\n")))?;
        if r.insert(v, i).is_some() {
            return Err(usage(format!("error: `{name}` assigned twice\n")));
        }
    }
    Ok(r)
}

fn oracle(spec: &ProblemSpec, model: &Path, what: &str) -> Outcome {
    let g = &spec.graph;
    let m = read_model::<Rational>(&read_file(model)?, g).map_err(|e| usage(format!("error: {}: {e}\n", model.display())))?;
    let scm = |e: crate::scm::ScmError| usage(format!("error: {e}\n"));
    let b = &spec.bundle;
    match what {
        "obs" => Ok(write_table(&m.observational_dist().map_err(scm)?)),
        "pse" => Ok(write_table(&m.counterfactual_dist(&unroll(g, b, &spec.values)).map_err(scm)?)),
        "total" => {
            let [y] = b.outcomes.iter().copied().collect::<Vec<_>>()[..] else {
                return Err(usage("error: `total` needs a single outcome\n"));
            };
            let mean = |active| -> Result<Rational, Fail> {
                let t = unroll_regime(g, &b.treatments, &b.outcomes, &spec.values, active);
                m.counterfactual_dist(&t).map_err(scm)?.mean_index(y).map_err(scm)
            };
            Ok(format!("{}\n", (mean(true)? - mean(false)?).to_text()))
        }
        _ => match what.strip_prefix("do:") {
            Some(r) => Ok(write_table(&m.interventional_dist(&parse_regime(spec, &m, r)?).map_err(scm)?)),
            None => Err(usage(format!("error: unknown --what `{what}` (obs, do:<regime>, pse, total)\n"))),
        },
    }
}

fn counterexample(spec: &ProblemSpec, epsilon: &str, out: &Path) -> Outcome {
    let g = &spec.graph;
    let b = &spec.bundle;
    let eps = Rational::parse_text(epsilon).ok_or_else(|| usage(format!("error: bad epsilon `{epsilon}`\n")))?;
    let reports = find_recanting_districts(g, b);
    let Some(report) = reports.first() else {
        return Err(domain("no recanting district: the effect is identified, no counterexample exists\n"));
    };
    let (m1, m2) = counterexample_models(g, b, report, &spec.values, &eps).map_err(|e| usage(format!("error: {e}\n")))?;
    let scm = |e: crate::scm::ScmError| usage(format!("error: {e}\n"));
    let regimes = m1.all_regimes().len();
    let agree = first_interventional_disagreement(&m1, &m2).map_err(scm)?;
    let positive = [&m1, &m2]
        .iter()
        .map(|m| m.observational_dist().map(|t| t.probs().iter().all(|p| *p > Rational::from_ratio(0, 1))))
        .collect::<Result<Vec<_>, _>>()
        .map_err(scm)?
        .into_iter()
        .all(|x| x);
    let term = unroll(g, b, &spec.values);
    let tvd = m1.counterfactual_dist(&term).map_err(scm)?.tvd(&m2.counterfactual_dist(&term).map_err(scm)?).map_err(scm)?;
    let mut s = String::new();
    let _ = writeln!(s, "{}", report.render(g));
    let _ = writeln!(s, "epsilon {}", eps.to_text());
    match agree {
        None => {
            let _ = writeln!(s, "interventional agreement: exact on {regimes} regimes");
        }
        Some(r) => {
            let _ = writeln!(s, "interventional agreement: FAILED at {r:?}");
        }
    }
    let _ = writeln!(s, "observational positivity: {}", if positive { "strict" } else { "FAILED" });
    let _ = writeln!(s, "effect tvd {} (~{:.6})", tvd.to_text(), tvd.to_f64());
    std::fs::create_dir_all(out).map_err(|e| usage(format!("error: cannot create {}: {e}\n", out.display())))?;
    for (name, text) in [("m1.model", write_model(&m1)), ("m2.model", write_model(&m2)), ("summary.txt", s.clone())] {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| usage(format!("error: cannot write {}: {e}\n", p.display())))?;
    }
    Ok(s)
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Check(a) => check(&load_problem(&a.spec)?),
        Command::Unroll(a) => {
            let p = load_problem(&a.spec)?;
            Ok(format!("{}\n", unroll(&p.graph, &p.bundle, &p.values).render(&p.graph)))
        }
        Command::Identify { spec, interventional, latex, .. } => identify(&load_problem(&spec.spec)?, interventional, latex),
        Command::Evaluate { spec, table } => evaluate_cmd(&load_problem(&spec.spec)?, &table),
        Command::Oracle { spec, model, what } => oracle(&load_problem(&spec.spec)?, &model, &what),
        Command::Counterexample { spec, epsilon, out } => counterexample(&load_problem(&spec.spec)?, &epsilon, &out),
        Command::Decompose { spec, table } => decompose_cmd(&load_problem(&spec.spec)?, &table),
    }
}

/// Runs one invocation. `args` includes the program name. Normal output
/// goes to `out`, diagnostics for usage errors to `err`.
pub fn run<S: Into<std::ffi::OsString> + Clone>(
    args: impl IntoIterator<Item = S>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(Fail { code, text }) => {
            let sink: &mut dyn Write = if code == 2 { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            if !text.ends_with('\n') {
                let _ = sink.write_all(b"\n");
            }
            code
        }
    }
}
