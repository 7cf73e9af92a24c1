//! Reader for the text rendering (grammar in [`super::render`]).

use thiserror::Error;

use crate::admg::Admg;
use crate::pse::TreatmentValues;
use crate::scalar::Scalar;
use num_rational::BigRational;

use super::expr::{FormulaExpr, ValueKind, ValueSymbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("formula parse error at column {col}: {msg}")]
pub struct FormulaParseError {
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Sigma,
    Sym(char),
    Eof,
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, FormulaParseError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == 'Σ' || c == '∑' {
            out.push((Tok::Sigma, col));
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '/' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // labels such as `1a` are identifiers
            if i < chars.len() && (chars[i].is_alphabetic() || chars[i] == '_') {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            } else {
                out.push((Tok::Num(chars[start..i].iter().collect()), col));
            }
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            // `E_y[` and `Σ_m` use `_` as punctuation; split `E_...`.
            if let Some(rest) = word.strip_prefix("E_") {
                out.push((Tok::Ident("E".into()), col));
                out.push((Tok::Sym('_'), col + 1));
                if !rest.is_empty() {
                    out.push((Tok::Ident(rest.into()), col + 2));
                }
            } else if word.starts_with('_') {
                out.push((Tok::Sym('_'), col));
                if word.len() > 1 {
                    out.push((Tok::Ident(word[1..].into()), col + 1));
                }
            } else {
                out.push((Tok::Ident(word), col));
            }
        } else if "(){}[],|+-/=#*".contains(c) {
            out.push((Tok::Sym(c), col));
            i += 1;
        } else {
            return Err(FormulaParseError { col, msg: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::Eof, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    g: &'a Admg,
    values: &'a TreatmentValues,
}

type R<T> = Result<T, FormulaParseError>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err<T>(&self, msg: impl Into<String>) -> R<T> {
        Err(FormulaParseError { col: self.col(), msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> R<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> R<FormulaExpr> {
        let mut left = self.term()?;
        loop {
            if self.eat('+') {
                let right = self.term()?;
                left = match left {
                    FormulaExpr::Add(mut v) => {
                        v.push(right);
                        FormulaExpr::Add(v)
                    }
                    l => FormulaExpr::Add(vec![l, right]),
                };
            } else if self.eat('-') {
                let right = self.term()?;
                left = FormulaExpr::diff(left, right);
            } else {
                return Ok(left);
            }
        }
    }

    fn at_term_end(&self) -> bool {
        matches!(self.peek(), Tok::Eof | Tok::Sym('+') | Tok::Sym('-') | Tok::Sym(')') | Tok::Sym(']'))
    }

    fn term(&mut self) -> R<FormulaExpr> {
        let mut fs = Vec::new();
        loop {
            if *self.peek() == Tok::Sym('-') && fs.is_empty() {
                // negative scalar, only reachable inside parentheses
                self.bump();
                match self.bump() {
                    Tok::Num(n) => fs.push(FormulaExpr::Scalar(-self.rational(&n)?)),
                    _ => return self.err("expected number after `-`"),
                }
                continue;
            }
            if self.at_term_end() {
                break;
            }
            if *self.peek() == Tok::Sigma {
                fs.push(self.sum()?);
                break;
            }
            fs.push(self.factor()?);
        }
        match fs.len() {
            0 => self.err("expected a factor"),
            1 => Ok(fs.pop().unwrap()),
            _ => Ok(FormulaExpr::Product(fs)),
        }
    }

    fn rational(&self, n: &str) -> R<BigRational> {
        match BigRational::parse_text(n) {
            Some(r) => Ok(r),
            None => self.err(format!("bad number `{n}`")),
        }
    }

    fn sum(&mut self) -> R<FormulaExpr> {
        self.bump();
        self.expect('_')?;
        let vars = if self.eat('{') {
            let v = self.symbols()?;
            self.expect('}')?;
            v
        } else {
            vec![self.symbol()?]
        };
        if let Some(s) = vars.iter().find(|s| !s.is_index()) {
            let name = self.g.name(s.vertex).to_string();
            return self.err(format!("summation over fixed value of `{name}`"));
        }
        let body = self.term()?;
        Ok(FormulaExpr::Sum { vars, body: Box::new(body) })
    }

    fn factor(&mut self) -> R<FormulaExpr> {
        match self.peek().clone() {
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                if *self.peek() == Tok::Sym('/') && *self.peek2() == Tok::Sym('(') {
                    self.bump();
                    self.bump();
                    let d = self.expr()?;
                    self.expect(')')?;
                    return Ok(FormulaExpr::ratio(e, d));
                }
                Ok(e)
            }
            Tok::Num(n) => {
                self.bump();
                Ok(FormulaExpr::Scalar(self.rational(&n)?))
            }
            Tok::Ident(w) if w == "p" => {
                self.bump();
                self.expect('(')?;
                let targets = self.symbols()?;
                if self.eat(')') {
                    return Ok(FormulaExpr::obs(targets, vec![]));
                }
                self.expect('|')?;
                if matches!(self.peek(), Tok::Ident(d) if d == "do") && *self.peek2() == Tok::Sym('(') {
                    self.bump();
                    self.bump();
                    let regime = if *self.peek() == Tok::Sym(')') { vec![] } else { self.symbols()? };
                    self.expect(')')?;
                    self.expect(')')?;
                    return Ok(FormulaExpr::do_term(targets, regime));
                }
                let given = self.symbols()?;
                self.expect(')')?;
                Ok(FormulaExpr::obs(targets, given))
            }
            Tok::Ident(w) if w == "E" => {
                self.bump();
                if self.eat('_') {
                    let var = self.symbol()?;
                    self.expect('[')?;
                    let body = self.expr()?;
                    self.expect(']')?;
                    return Ok(FormulaExpr::expectation(var, body));
                }
                self.expect('[')?;
                let var = self.symbol()?;
                let given = if self.eat('|') { self.symbols()? } else { vec![] };
                self.expect(']')?;
                Ok(FormulaExpr::expectation(var.clone(), FormulaExpr::obs(vec![var], given)))
            }
            _ => self.err("expected `p(`, `E[`, `Σ_`, `(` or a number"),
        }
    }

    fn symbols(&mut self) -> R<Vec<ValueSymbol>> {
        let mut v = vec![self.symbol()?];
        while self.eat(',') {
            v.push(self.symbol()?);
        }
        Ok(v)
    }

    fn symbol(&mut self) -> R<ValueSymbol> {
        let name = match self.bump() {
            Tok::Ident(n) => n,
            _ => {
                self.pos -= 1;
                return self.err("expected a vertex name");
            }
        };
        let vertex = match self.g.index(&name) {
            Ok(v) => v,
            Err(_) => {
                self.pos -= 1;
                return self.err(format!("unknown vertex `{name}`"));
            }
        };
        if self.eat('#') {
            return match self.bump() {
                Tok::Num(k) => match k.parse::<u32>() {
                    Ok(k) => Ok(ValueSymbol::idx(vertex, k)),
                    Err(_) => self.err("bad index"),
                },
                _ => self.err("expected index after `#`"),
            };
        }
        if self.eat('=') {
            let label = match self.bump() {
                Tok::Ident(l) | Tok::Num(l) => l,
                Tok::Sym('*') => "*".to_string(),
                _ => return self.err("expected a value label"),
            };
            let kind = if self.values.is_treatment(vertex) && label == self.values.active(vertex) {
                ValueKind::Active
            } else if self.values.is_treatment(vertex) && label == self.values.baseline(vertex) {
                ValueKind::Baseline
            } else {
                ValueKind::Literal(label)
            };
            return Ok(ValueSymbol { vertex, kind });
        }
        Ok(ValueSymbol::var(vertex))
    }
}

pub fn parse_formula(text: &str, g: &Admg, values: &TreatmentValues) -> Result<FormulaExpr, FormulaParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, g, values };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input");
    }
    Ok(e)
}
