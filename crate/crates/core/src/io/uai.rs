//! UAI `MARKOV` model files.
//!
//! Layout: the word `MARKOV`, the variable count, one cardinality per
//! variable, the factor count, one scope line per factor (`k v1 … vk`), then
//! for each factor its table size followed by the entries, row-major over the
//! scope as listed (last variable fastest). Tokens are whitespace separated.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::factor::{Domains, Factor, FactorGraph, VarId};

struct Tokens<'a> {
    inner: std::str::SplitWhitespace<'a>,
    index: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens {
            inner: text.split_whitespace(),
            index: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            token: self.index,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let tok = self
            .inner
            .next()
            .ok_or_else(|| self.err(format!("unexpected end of input, expected {what}")))?;
        self.index += 1;
        Ok(tok)
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| self.err(format!("expected {what}, found {tok:?}")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let tok = self.next(what)?;
        let v: f64 = tok
            .parse()
            .map_err(|_| self.err(format!("expected {what}, found {tok:?}")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{what} is not finite")));
        }
        if v < 0.0 {
            return Err(self.err(format!("{what} is negative: {v}")));
        }
        Ok(v)
    }
}

/// Parses a UAI `MARKOV` file.
pub fn parse_uai(text: &str) -> Result<FactorGraph> {
    let mut t = Tokens::new(text);
    match t.next("preamble")? {
        "MARKOV" => {}
        "BAYES" => return Err(Error::BayesUnsupported),
        other => return Err(t.err(format!("unknown preamble {other:?}"))),
    }
    let n = t.usize("variable count")?;
    if n == 0 {
        return Err(t.err("model must have at least one variable"));
    }
    let mut cards = Vec::with_capacity(n);
    for _ in 0..n {
        let c = t.usize("cardinality")?;
        if c == 0 {
            return Err(t.err("cardinality must be positive"));
        }
        cards.push(c);
    }
    let domains = Domains::new(cards)?;

    let m = t.usize("factor count")?;
    let mut scopes = Vec::with_capacity(m);
    for _ in 0..m {
        let k = t.usize("scope size")?;
        let mut scope = Vec::with_capacity(k);
        for _ in 0..k {
            let v = t.usize("variable index")?;
            if v >= n {
                return Err(t.err(format!("variable {v} out of range for {n} variables")));
            }
            if scope.contains(&VarId(v)) {
                return Err(t.err(format!("variable {v} repeated in scope")));
            }
            scope.push(VarId(v));
        }
        scopes.push(scope);
    }

    let mut factors = Vec::with_capacity(m);
    for scope in scopes {
        let cards: Vec<usize> = scope.iter().map(|&v| domains.card(v)).collect();
        let expected: usize = cards.iter().product();
        let size = t.usize("table size")?;
        if size != expected {
            return Err(t.err(format!(
                "table size {size} does not match scope size {expected}"
            )));
        }
        let mut table = Vec::with_capacity(size);
        for _ in 0..size {
            table.push(t.f64("table entry")?);
        }
        factors.push(Factor::new(scope, cards, table)?);
    }
    if let Some(extra) = t.inner.next() {
        return Err(Error::Parse {
            token: t.index,
            message: format!("trailing token {extra:?}"),
        });
    }
    FactorGraph::new(domains, factors)
}

/// Serializes a model as UAI `MARKOV`. Log scales are folded into the entries,
/// which are written in shortest round-trip form.
pub fn write_uai(g: &FactorGraph) -> String {
    let mut out = String::new();
    out.push_str("MARKOV\n");
    let _ = writeln!(out, "{}", g.num_vars());
    let cards: Vec<String> = g.domains().cards().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{}", cards.join(" "));
    let _ = writeln!(out, "{}", g.factors().len());
    for f in g.factors() {
        let mut line = f.scope().len().to_string();
        for v in f.scope() {
            let _ = write!(line, " {}", v.0);
        }
        let _ = writeln!(out, "{line}");
    }
    for f in g.factors() {
        out.push('\n');
        let _ = writeln!(out, "{}", f.len());
        let entries: Vec<String> = f.linear_table().iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, " {}", entries.join(" "));
    }
    out
}
