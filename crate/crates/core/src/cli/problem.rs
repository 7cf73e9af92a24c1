//! Problem files: a graph, treatment and outcome sets, a path bundle and
//! value labels.
//!
//! ```text
//! # comment
//! node a
//! node m
//! node y
//! a -> m
//! m -> y
//! a <-> y
//! treatment a
//! outcome y
//! value a active=1 baseline=0
//! path a -> m -> y          (any number of lines, or `paths all` / `paths none`)
//! ```

use std::fmt;

use crate::admg::{Admg, GraphError, VSet, Vertex};
use crate::pse::{all_paths_bundle, empty_bundle, make_bundle, CausalPath, PathBundle, PseError, TreatmentValues};

/// Diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    /// E001: malformed line.
    Syntax,
    /// E002: name that is not a declared vertex.
    UnknownVertex,
    /// E003: duplicate vertex or edge, self-loop, directed cycle.
    Graph,
    /// E004: a listed path is not a proper causal path.
    ImproperPath,
    /// E005: the bundle is not edge-consistent.
    Inconsistent,
    /// E006: treatment/outcome/bundle declarations missing or clashing.
    Sets,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "E001",
            Code::UnknownVertex => "E002",
            Code::Graph => "E003",
            Code::ImproperPath => "E004",
            Code::Inconsistent => "E005",
            Code::Sets => "E006",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: Code,
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}:{}: {}", self.code.as_str(), self.line, self.col, self.msg)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundleForm {
    Paths,
    All,
    None,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub graph: Admg,
    pub treatments: VSet,
    pub outcomes: VSet,
    pub bundle: PathBundle,
    pub form: BundleForm,
    pub values: TreatmentValues,
}

struct Word<'a> {
    text: &'a str,
    col: usize,
}

fn words(line: &str) -> Vec<Word<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Word { text: &line[s..i], col: line[..s].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Word { text: &line[s..], col: line[..s].chars().count() + 1 });
    }
    out
}

fn valid_name(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_alphabetic() || c == '_')
        && cs.all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '\'' || c == '.' || c == '-')
}

enum Item {
    Edge(usize, usize, String, String, usize, usize),
    Bi(usize, usize, String, String, usize, usize),
    Treatment(usize, usize, String),
    Outcome(usize, usize, String),
    Value(usize, usize, String, String, String),
    Path(usize, usize, Vec<(String, usize)>),
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, Diagnostic> {
    let diag = |code, line, col, msg: String| Diagnostic { code, line, col, msg };
    let mut nodes: Vec<(String, usize, usize)> = Vec::new();
    let mut items = Vec::new();
    let mut form: Option<(BundleForm, usize)> = None;
    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let w = words(line);
        if w.is_empty() {
            continue;
        }
        let need_name = |k: usize| -> Result<String, Diagnostic> {
            match w.get(k) {
                Some(x) if valid_name(x.text) => Ok(x.text.to_string()),
                Some(x) => Err(diag(Code::Syntax, ln, x.col, format!("`{}` is not a vertex name", x.text))),
                None => Err(diag(Code::Syntax, ln, line.chars().count() + 1, "missing vertex name".into())),
            }
        };
        let exact = |n: usize| -> Result<(), Diagnostic> {
            match w.get(n) {
                Some(x) => Err(diag(Code::Syntax, ln, x.col, format!("unexpected `{}`", x.text))),
                None => Ok(()),
            }
        };
        match w[0].text {
            "node" => {
                let name = need_name(1)?;
                exact(2)?;
                nodes.push((name, ln, w[1].col));
            }
            "treatment" | "outcome" => {
                if w.len() < 2 {
                    return Err(diag(Code::Syntax, ln, line.chars().count() + 1, "missing vertex name".into()));
                }
                for k in 1..w.len() {
                    let name = need_name(k)?;
                    items.push(if w[0].text == "treatment" {
                        Item::Treatment(ln, w[k].col, name)
                    } else {
                        Item::Outcome(ln, w[k].col, name)
                    });
                }
            }
            "value" => {
                let name = need_name(1)?;
                let mut active = None;
                let mut baseline = None;
                for x in &w[2..] {
                    let Some((key, val)) = x.text.split_once('=') else {
                        return Err(diag(Code::Syntax, ln, x.col, format!("expected key=value, found `{}`", x.text)));
                    };
                    if !valid_label(val) {
                        return Err(diag(Code::Syntax, ln, x.col, format!("bad value label `{val}`")));
                    }
                    let slot = match key {
                        "active" => &mut active,
                        "baseline" => &mut baseline,
                        _ => return Err(diag(Code::Syntax, ln, x.col, format!("unknown key `{key}`"))),
                    };
                    if slot.replace(val.to_string()).is_some() {
                        return Err(diag(Code::Syntax, ln, x.col, format!("`{key}` given twice")));
                    }
                }
                match (active, baseline) {
                    (Some(a), Some(b)) => items.push(Item::Value(ln, w[1].col, name, a, b)),
                    _ => return Err(diag(Code::Syntax, ln, w[0].col, "value needs active= and baseline=".into())),
                }
            }
            "paths" => {
                let f = match w.get(1).map(|x| x.text) {
                    Some("all") => BundleForm::All,
                    Some("none") => BundleForm::None,
                    _ => {
                        let col = w.get(1).map_or(line.chars().count() + 1, |x| x.col);
                        return Err(diag(Code::Syntax, ln, col, "expected `paths all` or `paths none`".into()));
                    }
                };
                exact(2)?;
                if form.is_some() {
                    return Err(diag(Code::Sets, ln, w[0].col, "bundle keyword given twice".into()));
                }
                form = Some((f, ln));
            }
            "path" => {
                let mut vs = Vec::new();
                for (k, x) in w[1..].iter().enumerate() {
                    if k % 2 == 1 {
                        if x.text != "->" {
                            return Err(diag(Code::Syntax, ln, x.col, format!("expected `->`, found `{}`", x.text)));
                        }
                    } else if valid_name(x.text) {
                        vs.push((x.text.to_string(), x.col));
                    } else {
                        return Err(diag(Code::Syntax, ln, x.col, format!("`{}` is not a vertex name", x.text)));
                    }
                }
                if w.len() % 2 == 1 || vs.len() < 2 {
                    return Err(diag(Code::Syntax, ln, w[0].col, "a path needs at least two vertices joined by `->`".into()));
                }
                items.push(Item::Path(ln, w[0].col, vs));
            }
            _ if w.len() == 3 && (w[1].text == "->" || w[1].text == "<->") => {
                let a = need_name(0)?;
                let b = need_name(2)?;
                items.push(if w[1].text == "->" {
                    Item::Edge(ln, w[0].col, a, b, w[0].col, w[2].col)
                } else {
                    Item::Bi(ln, w[0].col, a, b, w[0].col, w[2].col)
                });
            }
            other => {
                return Err(diag(Code::Syntax, ln, w[0].col, format!("unrecognised line starting with `{other}`")));
            }
        }
    }

    // graph
    let mut seen = std::collections::BTreeMap::new();
    for (name, ln, col) in &nodes {
        if seen.insert(name.clone(), ()).is_some() {
            return Err(diag(Code::Graph, *ln, *col, format!("vertex `{name}` declared twice")));
        }
    }
    let names: Vec<String> = nodes.iter().map(|n| n.0.clone()).collect();
    let index = |name: &str, ln: usize, col: usize| -> Result<Vertex, Diagnostic> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| diag(Code::UnknownVertex, ln, col, format!("unknown vertex `{name}`")))
    };
    let mut dir = Vec::new();
    let mut bi = Vec::new();
    for it in &items {
        match it {
            Item::Edge(ln, _, a, b, ca, cb) => dir.push((index(a, *ln, *ca)?, index(b, *ln, *cb)?)),
            Item::Bi(ln, _, a, b, ca, cb) => bi.push((index(a, *ln, *ca)?, index(b, *ln, *cb)?)),
            _ => {}
        }
    }
    let graph = Admg::from_indices(names.clone(), dir.clone(), bi.clone()).map_err(|e| {
        // point at the first edge line involved where possible
        let (ln, col) = graph_error_site(&e, &names, &dir, &bi, &items).unwrap_or((1, 1));
        diag(Code::Graph, ln, col, e.to_string())
    })?;

    // sets and values
    let mut treatments = VSet::new();
    let mut outcomes = VSet::new();
    let mut values = TreatmentValues::default();
    let mut value_lines = Vec::new();
    for it in &items {
        match it {
            Item::Treatment(ln, col, n) => {
                if !treatments.insert(index(n, *ln, *col)?) {
                    return Err(diag(Code::Sets, *ln, *col, format!("`{n}` is already a treatment")));
                }
            }
            Item::Outcome(ln, col, n) => {
                if !outcomes.insert(index(n, *ln, *col)?) {
                    return Err(diag(Code::Sets, *ln, *col, format!("`{n}` is already an outcome")));
                }
            }
            Item::Value(ln, col, n, a, b) => value_lines.push((*ln, *col, index(n, *ln, *col)?, a.clone(), b.clone())),
            _ => {}
        }
    }
    if treatments.is_empty() {
        return Err(diag(Code::Sets, 1, 1, "no `treatment` declared".into()));
    }
    if outcomes.is_empty() {
        return Err(diag(Code::Sets, 1, 1, "no `outcome` declared".into()));
    }
    if let Some(&v) = treatments.intersection(&outcomes).next() {
        return Err(diag(Code::Sets, 1, 1, format!("`{}` is both a treatment and an outcome", names[v])));
    }
    for &t in &treatments {
        values.set(t, "1", "0");
    }
    let mut valued = VSet::new();
    for (ln, col, v, a, b) in value_lines {
        if !treatments.contains(&v) {
            return Err(diag(Code::Sets, ln, col, format!("`{}` is not a treatment", names[v])));
        }
        if !valued.insert(v) {
            return Err(diag(Code::Sets, ln, col, format!("values for `{}` given twice", names[v])));
        }
        if a == b {
            return Err(diag(Code::Sets, ln, col, "active and baseline values must differ".into()));
        }
        values.set(v, &a, &b);
    }

    // bundle
    let mut paths = Vec::new();
    let mut path_lines = Vec::new();
    for it in &items {
        if let Item::Path(ln, col, vs) = it {
            let mut p = Vec::new();
            for (n, c) in vs {
                p.push(index(n, *ln, *c)?);
            }
            let cp = CausalPath(p);
            if !cp.is_proper(&graph, &treatments, &outcomes) {
                return Err(diag(
                    Code::ImproperPath,
                    *ln,
                    *col,
                    format!("`{}` is not a proper causal path from the treatments to the outcomes", cp.render(&graph)),
                ));
            }
            path_lines.push((*ln, *col, cp.clone()));
            paths.push(cp);
        }
    }
    let (form, bundle) = match form {
        Some((_, ln)) if !paths.is_empty() => {
            return Err(diag(Code::Sets, ln, 1, "`paths` keyword cannot be combined with `path` lines".into()));
        }
        Some((BundleForm::All, _)) => (BundleForm::All, all_paths_bundle(&graph, &treatments, &outcomes)),
        Some((_, _)) => (BundleForm::None, empty_bundle(&graph, &treatments, &outcomes)),
        None if paths.is_empty() => {
            return Err(diag(Code::Sets, 1, 1, "no bundle: add `path` lines or `paths all`/`paths none`".into()));
        }
        None => (BundleForm::Paths, make_bundle(&graph, &treatments, &outcomes, paths)),
    };
    let bundle = bundle.map_err(|e| match e {
        PseError::Inconsistent(p) => {
            let (ln, col) = path_lines.first().map_or((1, 1), |(l, c, _)| (*l, *c));
            diag(Code::Inconsistent, ln, col, format!("bundle is not edge-consistent: `{p}` is all green but not listed"))
        }
        PseError::NotProper(p) => diag(Code::ImproperPath, 1, 1, format!("`{p}` is not a proper causal path")),
        other => diag(Code::Sets, 1, 1, other.to_string()),
    })?;
    Ok(ProblemSpec { graph, treatments, outcomes, bundle, form, values })
}

fn graph_error_site(
    e: &GraphError,
    names: &[String],
    dir: &[(usize, usize)],
    bi: &[(usize, usize)],
    items: &[Item],
) -> Option<(usize, usize)> {
    let edge_sites: Vec<(usize, usize, bool, usize, usize)> = items
        .iter()
        .filter_map(|it| match it {
            Item::Edge(ln, col, ..) => Some((*ln, *col, true)),
            Item::Bi(ln, col, ..) => Some((*ln, *col, false)),
            _ => None,
        })
        .scan((0usize, 0usize), |(di, bj), (ln, col, directed)| {
            let (a, b) = if directed {
                *di += 1;
                dir[*di - 1]
            } else {
                *bj += 1;
                bi[*bj - 1]
            };
            Some((ln, col, directed, a, b))
        })
        .collect();
    let find = |pred: &dyn Fn(bool, usize, usize) -> bool, last: bool| {
        let mut hits = edge_sites.iter().filter(|(_, _, d, a, b)| pred(*d, *a, *b));
        if last {
            hits.last().map(|h| (h.0, h.1))
        } else {
            hits.next().map(|h| (h.0, h.1))
        }
    };
    let pos = |n: &str| names.iter().position(|x| x == n);
    match e {
        GraphError::SelfLoop(n) => {
            let v = pos(n)?;
            find(&|_, a, b| a == v && b == v, false)
        }
        GraphError::DuplicateEdge(text) => {
            let directed = !text.contains("<->");
            let (a, b) = text.split_once(" -> ").or_else(|| text.split_once(" <-> "))?;
            let (x, y) = (pos(a)?, pos(b)?);
            find(&|d, p, q| d == directed && ((p == x && q == y) || (!d && p == y && q == x)), true)
        }
        GraphError::Cycle(cycle) => {
            let vs: Vec<usize> = cycle.iter().filter_map(|n| pos(n)).collect();
            find(&|d, a, b| d && vs.contains(&a) && vs.contains(&b), true)
        }
        _ => None,
    }
}

/// Canonical text for a problem: nodes, directed edges, bidirected edges,
/// sets, non-default values, then the bundle.
pub fn render_problem(spec: &ProblemSpec) -> String {
    let g = &spec.graph;
    let mut out = String::new();
    for &v in g.vertices() {
        out.push_str(&format!("node {}\n", g.name(v)));
    }
    for &(a, b) in g.directed_edges() {
        out.push_str(&format!("{} -> {}\n", g.name(a), g.name(b)));
    }
    for &(a, b) in g.bidirected_edges() {
        out.push_str(&format!("{} <-> {}\n", g.name(a), g.name(b)));
    }
    for &t in &spec.treatments {
        out.push_str(&format!("treatment {}\n", g.name(t)));
    }
    for &y in &spec.outcomes {
        out.push_str(&format!("outcome {}\n", g.name(y)));
    }
    for (v, a, b) in spec.values.iter() {
        if (a, b) != ("1", "0") {
            out.push_str(&format!("value {} active={a} baseline={b}\n", g.name(v)));
        }
    }
    match spec.form {
        BundleForm::All => out.push_str("paths all\n"),
        BundleForm::None => out.push_str("paths none\n"),
        BundleForm::Paths => {
            for p in &spec.bundle.paths {
                out.push_str(&format!("path {}\n", p.render(g)));
            }
        }
    }
    out
}
