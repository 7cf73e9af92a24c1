//! Distribution tables and model files.
//!
//! Table:
//! ```text
//! a m y p
//! 0 0 0 1/8
//! 0 0 1 1/8
//! ...
//! ```
//! Columns are graph vertices, the last column is `p`. Every assignment
//! appears once, rows in lexicographic order over the sorted value labels
//! of each column (first column most significant).
//!
//! Model:
//! ```text
//! domain a 0 1
//! noise u(a) 1/2 1/2
//! noise u(m,y) 1/3 2/3
//! mech m a u(m) u(m,y)
//! 0 0 0 : 1
//! ...
//! ```
//! `mech` lists the inputs in the fixed order (parents, own noise, incident
//! bidirected noises); rows give parent labels and noise indices in
//! mixed-radix order, then `:` and the output label.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::admg::{Admg, Vertex};
use crate::scalar::Scalar;
use crate::scm::{DiscreteScm, DistTable, ScmError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct IoError {
    pub line: usize,
    pub msg: String,
}

fn err<X>(line: usize, msg: impl Into<String>) -> Result<X, IoError> {
    Err(IoError { line, msg: msg.into() })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("");
        let w: Vec<&str> = line.split_whitespace().collect();
        (!w.is_empty()).then_some((i + 1, w))
    })
}

fn parse_prob<T: Scalar>(s: &str, line: usize) -> Result<T, IoError> {
    match T::parse_text(s) {
        Some(p) if p >= T::zero() => Ok(p),
        _ => err(line, format!("`{s}` is not a nonnegative probability")),
    }
}

fn sort_labels(d: &[String]) -> Vec<String> {
    let mut s = d.to_vec();
    s.sort();
    s
}

/// The same distribution with every domain in sorted label order.
pub fn with_sorted_domains<T: Scalar>(t: &DistTable<T>) -> DistTable<T> {
    let domains: Vec<Vec<String>> = t.domains().iter().map(|d| sort_labels(d)).collect();
    let maps: Vec<Vec<usize>> = t
        .domains()
        .iter()
        .zip(&domains)
        .map(|(old, new)| old.iter().map(|l| new.iter().position(|x| x == l).unwrap()).collect())
        .collect();
    let mut probs = vec![T::zero(); t.len()];
    let sorted = DistTable::unchecked(t.vars().to_vec(), t.names().to_vec(), domains.clone(), probs.clone())
        .expect("same shape");
    for (assign, p) in t.rows() {
        let moved: Vec<usize> = assign.iter().zip(&maps).map(|(&i, m)| m[i]).collect();
        probs[sorted.index_of(&moved)] = p.clone();
    }
    DistTable::unchecked(t.vars().to_vec(), t.names().to_vec(), domains, probs).expect("same shape")
}

pub fn write_table<T: Scalar>(t: &DistTable<T>) -> String {
    let t = with_sorted_domains(t);
    let mut out = String::new();
    let mut header: Vec<&str> = t.names().iter().map(String::as_str).collect();
    header.push("p");
    out.push_str(&header.join(" "));
    out.push('\n');
    for (assign, p) in t.rows() {
        let mut row: Vec<String> = assign.iter().zip(t.domains()).map(|(&i, d)| d[i].clone()).collect();
        row.push(p.to_text());
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_table<T: Scalar>(text: &str, g: &Admg) -> Result<DistTable<T>, IoError> {
    let mut lines = content_lines(text);
    let Some((hl, header)) = lines.next() else {
        return err(1, "empty table");
    };
    if header.last() != Some(&"p") {
        return err(hl, "the last header column must be `p`");
    }
    let names: Vec<String> = header[..header.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut vars = Vec::new();
    for n in &names {
        let v = g.index(n).map_err(|e| IoError { line: hl, msg: e.to_string() })?;
        if vars.contains(&v) {
            return err(hl, format!("column `{n}` repeats"));
        }
        vars.push(v);
    }
    let rows: Vec<(usize, Vec<&str>)> = lines.collect();
    let k = names.len();
    let mut labels: Vec<BTreeSet<String>> = vec![BTreeSet::new(); k];
    for (ln, w) in &rows {
        if w.len() != k + 1 {
            return err(*ln, format!("expected {} columns, found {}", k + 1, w.len()));
        }
        for (j, l) in w[..k].iter().enumerate() {
            labels[j].insert(l.to_string());
        }
    }
    let domains: Vec<Vec<String>> = labels.into_iter().map(|s| s.into_iter().collect()).collect();
    let size: usize = domains.iter().map(Vec::len).product();
    if rows.len() != size {
        return err(hl, format!("{} rows, but the value labels need all {size} assignments", rows.len()));
    }
    let shape = DistTable::<T>::unchecked(vars.clone(), names.clone(), domains.clone(), vec![T::zero(); size])
        .map_err(|e| IoError { line: hl, msg: e.to_string() })?;
    let mut probs = Vec::with_capacity(size);
    for (r, (ln, w)) in rows.iter().enumerate() {
        let expect = shape.assignment(r);
        for (j, &i) in expect.iter().enumerate() {
            if w[j] != domains[j][i] {
                return err(*ln, "rows must list every assignment in lexicographic order");
            }
        }
        probs.push(parse_prob::<T>(w[k], *ln)?);
    }
    DistTable::new(vars, names, domains, probs).map_err(|e| IoError { line: hl, msg: e.to_string() })
}

fn input_names<T: Scalar>(m: &DiscreteScm<T>, v: Vertex) -> Vec<String> {
    let g = m.graph();
    let mut names: Vec<String> = g.pa(v).iter().map(|&p| g.name(p).to_string()).collect();
    names.extend(m.attached(v).iter().map(|&k| m.noises()[k].name.clone()));
    names
}

pub fn write_model<T: Scalar>(m: &DiscreteScm<T>) -> String {
    let g = m.graph();
    let mut out = String::new();
    for &v in g.vertices() {
        out.push_str(&format!("domain {} {}\n", g.name(v), m.domain(v).join(" ")));
    }
    for s in m.noises() {
        let ps: Vec<String> = s.probs.iter().map(|p| p.to_text()).collect();
        out.push_str(&format!("noise {} {}\n", s.name, ps.join(" ")));
    }
    for &v in g.vertices() {
        let inputs = input_names(m, v);
        out.push_str(&format!("mech {}", g.name(v)));
        for i in &inputs {
            out.push(' ');
            out.push_str(i);
        }
        out.push('\n');
        let radices = m.input_radices(v);
        let pa: Vec<Vertex> = g.pa(v).iter().copied().collect();
        let mut digits = vec![0usize; radices.len()];
        for &o in m.table(v) {
            let mut row: Vec<String> = Vec::with_capacity(digits.len() + 2);
            for (j, &d) in digits.iter().enumerate() {
                row.push(if j < pa.len() { m.domain(pa[j])[d].clone() } else { d.to_string() });
            }
            row.push(":".into());
            row.push(m.domain(v)[o].clone());
            out.push_str(&row.join(" "));
            out.push('\n');
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < radices[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
    out
}

/// Reads a model for `g`. Every vertex needs a `domain`, every noise source
/// a `noise` line and every vertex a `mech` block.
pub fn read_model<T: Scalar>(text: &str, g: &Admg) -> Result<DiscreteScm<T>, IoError> {
    let n = g.universe();
    let mut domains: Vec<Option<Vec<String>>> = vec![None; n];
    let mut noise: BTreeMap<String, Vec<T>> = BTreeMap::new();
    // vertex -> (header line, inputs, rows)
    type Rows<'a> = Vec<(usize, Vec<&'a str>)>;
    let mut mechs: BTreeMap<Vertex, (usize, Vec<String>, Rows)> = BTreeMap::new();
    let mut current: Option<Vertex> = None;
    let vertex = |name: &str, ln: usize| g.index(name).map_err(|e| IoError { line: ln, msg: e.to_string() });
    for (ln, w) in content_lines(text) {
        match w[0] {
            "domain" => {
                current = None;
                if w.len() < 3 {
                    return err(ln, "`domain` needs a vertex and at least one value");
                }
                let v = vertex(w[1], ln)?;
                if domains[v].replace(w[2..].iter().map(|s| s.to_string()).collect()).is_some() {
                    return err(ln, format!("domain of `{}` given twice", w[1]));
                }
            }
            "noise" => {
                current = None;
                if w.len() < 3 {
                    return err(ln, "`noise` needs a name and probabilities");
                }
                let ps = w[2..].iter().map(|s| parse_prob::<T>(s, ln)).collect::<Result<Vec<_>, _>>()?;
                if noise.insert(w[1].to_string(), ps).is_some() {
                    return err(ln, format!("noise `{}` given twice", w[1]));
                }
            }
            "mech" => {
                if w.len() < 2 {
                    return err(ln, "`mech` needs a vertex");
                }
                let v = vertex(w[1], ln)?;
                let inputs = w[2..].iter().map(|s| s.to_string()).collect();
                if mechs.insert(v, (ln, inputs, Vec::new())).is_some() {
                    return err(ln, format!("mechanism of `{}` given twice", w[1]));
                }
                current = Some(v);
            }
            _ => match current {
                Some(v) => mechs.get_mut(&v).unwrap().2.push((ln, w)),
                None => return err(ln, format!("unexpected `{}`", w[0])),
            },
        }
    }

    let mut dom = Vec::with_capacity(n);
    for v in 0..n {
        match &domains[v] {
            Some(d) => dom.push(d.clone()),
            None if g.contains(v) => return err(1, format!("missing domain for `{}`", g.name(v))),
            None => dom.push(Vec::new()),
        }
    }
    let mut take = |name: String| noise.remove(&name).ok_or(name);
    let mut own = vec![Vec::new(); n];
    for &v in g.vertices() {
        own[v] = take(format!("u({})", g.name(v))).or_else(|name| err(1, format!("missing noise `{name}`")))?;
    }
    let mut bi = Vec::new();
    for &(a, b) in g.bidirected_edges() {
        bi.push(take(format!("u({},{})", g.name(a), g.name(b))).or_else(|name| err(1, format!("missing noise `{name}`")))?);
    }
    if let Some(name) = noise.keys().next() {
        return err(1, format!("noise `{name}` matches no vertex or bidirected edge"));
    }
    // tables start empty; fill and validate against the assembled inputs
    let shape = DiscreteScm::<T>::from_fn(g.clone(), dom.clone(), own.clone(), bi.clone(), |_, _, _| 0)
        .map_err(|e| scm_err(e, 1))?;
    let mut tables = vec![Vec::new(); n];
    for &v in g.vertices() {
        let Some((hl, inputs, rows)) = mechs.remove(&v) else {
            return err(1, format!("missing mechanism for `{}`", g.name(v)));
        };
        let expect = input_names(&shape, v);
        if inputs != expect {
            return err(hl, format!("inputs of `{}` must be `{}`", g.name(v), expect.join(" ")));
        }
        let radices = shape.input_radices(v);
        let size: usize = radices.iter().product();
        if rows.len() != size {
            return err(hl, format!("mechanism of `{}` has {} rows, needs {size}", g.name(v), rows.len()));
        }
        let pa: Vec<Vertex> = g.pa(v).iter().copied().collect();
        let mut digits = vec![0usize; radices.len()];
        for (ln, w) in rows {
            if w.len() != digits.len() + 2 || w[digits.len()] != ":" {
                return err(ln, format!("expected {} inputs, `:` and an output", digits.len()));
            }
            for (j, &d) in digits.iter().enumerate() {
                let want = if j < pa.len() { dom[pa[j]][d].clone() } else { d.to_string() };
                if w[j] != want {
                    return err(ln, "rows must list every input combination in mixed-radix order");
                }
            }
            let label = w[digits.len() + 1];
            match dom[v].iter().position(|l| l == label) {
                Some(o) => tables[v].push(o),
                None => return err(ln, format!("`{label}` is not in the domain of `{}`", g.name(v))),
            }
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < radices[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
    DiscreteScm::new(g.clone(), dom, own, bi, tables).map_err(|e| scm_err(e, 1))
}

fn scm_err(e: ScmError, line: usize) -> IoError {
    IoError { line, msg: e.to_string() }
}
