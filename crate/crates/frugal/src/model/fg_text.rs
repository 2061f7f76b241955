//! Plain-text factor graph files.
//!
//! The layout is the established factor-graph interchange convention: a
//! count of factors, then one block per factor separated by blank lines.
//! Each block lists the scope size, the variable ids, the cardinalities,
//! a count of stored entries, and one `index value` line per stored
//! (non-zero) entry. Entry indices enumerate the scope with the *first*
//! scope variable varying fastest — note this is the reverse of the
//! in-memory layout, so indices are converted on the way in and out.
//!
//! The format carries no variable names; reading reconstructs placeholder
//! metadata (`x3` with states `s0`, `s1`, ...). Values are printed with
//! the shortest decimal form that round-trips, so write→read reproduces
//! every factor element-for-element exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Factor, FactorGraph, Variable};

/// Serialize a factor graph to the text format.
pub fn write_fg_string(fg: &FactorGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", fg.factors().len());
    for factor in fg.factors() {
        out.push('\n');
        let _ = writeln!(out, "{}", factor.scope().len());
        let ids: Vec<String> = factor.scope().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", ids.join(" "));
        let cards: Vec<String> = factor.cards().iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{}", cards.join(" "));
        // file order: first scope variable fastest
        let file_strides = file_strides(factor.cards());
        let stored: Vec<(usize, f64)> = (0..factor.len())
            .filter_map(|file_idx| {
                let internal = internal_index(factor, &file_strides, file_idx);
                let v = factor.values()[internal];
                (v != 0.0).then_some((file_idx, v))
            })
            .collect();
        let _ = writeln!(out, "{}", stored.len());
        for (idx, v) in stored {
            let _ = writeln!(out, "{idx} {v}");
        }
    }
    out
}

/// Write a factor graph to a file.
pub fn write_fg(fg: &FactorGraph, path: &Path) -> Result<()> {
    std::fs::write(path, write_fg_string(fg))?;
    Ok(())
}

/// Parse the text format back into a factor graph.
pub fn read_fg_string(text: &str) -> Result<FactorGraph> {
    let mut toks = TokenStream::new(text);
    let n_factors: usize = toks.int("factor count")?;
    let mut factors = Vec::with_capacity(n_factors);
    let mut cards_seen: Vec<Option<usize>> = Vec::new();
    for fi in 0..n_factors {
        let k: usize = toks.int("scope size")?;
        let mut scope = Vec::with_capacity(k);
        for _ in 0..k {
            scope.push(toks.int("variable id")?);
        }
        {
            let mut dedup = scope.clone();
            dedup.sort_unstable();
            dedup.dedup();
            if dedup.len() != scope.len() {
                return Err(toks.err(format!("factor {fi} repeats a variable in its scope")));
            }
        }
        let mut cards = Vec::with_capacity(k);
        for _ in 0..k {
            let c: usize = toks.int("cardinality")?;
            if c == 0 {
                return Err(toks.err(format!("factor {fi} declares cardinality 0")));
            }
            cards.push(c);
        }
        for (&v, &c) in scope.iter().zip(&cards) {
            if v >= cards_seen.len() {
                cards_seen.resize(v + 1, None);
            }
            match cards_seen[v] {
                None => cards_seen[v] = Some(c),
                Some(prev) if prev == c => {}
                Some(prev) => {
                    return Err(toks.err(format!(
                        "variable {v} has cardinality {c} in factor {fi} but {prev} earlier"
                    )))
                }
            }
        }
        let cells: usize = cards.iter().product();
        let n_stored: usize = toks.int("entry count")?;
        if n_stored > cells {
            return Err(toks.err(format!(
                "factor {fi} stores {n_stored} entries but has only {cells} cells"
            )));
        }
        let file_strides = file_strides(&cards);
        let mut values = vec![0.0f64; cells];
        let mut seen = vec![false; cells];
        for _ in 0..n_stored {
            let idx: usize = toks.int("entry index")?;
            if idx >= cells {
                return Err(toks.err(format!(
                    "entry index {idx} out of range for factor {fi} ({cells} cells)"
                )));
            }
            if seen[idx] {
                return Err(toks.err(format!("entry index {idx} repeated in factor {fi}")));
            }
            seen[idx] = true;
            let v: f64 = toks.float("entry value")?;
            if !v.is_finite() || v < 0.0 {
                return Err(toks.err(format!("entry value {v} in factor {fi} is not allowed")));
            }
            let internal = internal_index_for(&cards, &file_strides, idx);
            values[internal] = v;
        }
        factors.push(
            Factor::new(scope, cards, values)
                .map_err(|e| toks.err(format!("factor {fi}: {e}")))?,
        );
    }
    if let Some(extra) = toks.peek() {
        return Err(toks.err(format!("trailing content after last factor: `{extra}`")));
    }
    let variables: Vec<Variable> = cards_seen
        .iter()
        .enumerate()
        .map(|(id, card)| match card {
            Some(card) => Ok(Variable {
                id,
                name: format!("x{id}"),
                states: (0..*card).map(|s| format!("s{s}")).collect(),
            }),
            None => Err(Error::validation(format!(
                "variable {id} appears in no factor scope"
            ))),
        })
        .collect::<Result<_>>()?;
    FactorGraph::new(variables, factors)
}

/// Read a factor graph from a file.
pub fn read_fg(path: &Path) -> Result<FactorGraph> {
    let text = std::fs::read_to_string(path)?;
    read_fg_string(&text)
}

/// Strides under the file convention (first scope variable fastest).
fn file_strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; cards.len()];
    for i in 1..cards.len() {
        s[i] = s[i - 1] * cards[i - 1];
    }
    s
}

fn internal_index(factor: &Factor, file_strides: &[usize], file_idx: usize) -> usize {
    internal_index_for(factor.cards(), file_strides, file_idx)
}

/// Convert a file-order linear index to the in-memory (last-fastest) one.
fn internal_index_for(cards: &[usize], file_strides: &[usize], file_idx: usize) -> usize {
    let mut internal = 0usize;
    for (i, &card) in cards.iter().enumerate() {
        let state = (file_idx / file_strides[i]) % card;
        internal = internal * card + state;
    }
    internal
}

/// Token reader tracking line numbers for error messages.
struct TokenStream<'a> {
    lines: Vec<&'a str>,
    line: usize,
    toks: std::collections::VecDeque<&'a str>,
}

impl<'a> TokenStream<'a> {
    fn new(text: &'a str) -> TokenStream<'a> {
        TokenStream {
            lines: text.lines().collect(),
            line: 0,
            toks: std::collections::VecDeque::new(),
        }
    }

    fn refill(&mut self) {
        while self.toks.is_empty() && self.line < self.lines.len() {
            self.toks.extend(self.lines[self.line].split_whitespace());
            self.line += 1;
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.refill();
        self.toks.front().copied()
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.refill();
        self.toks
            .pop_front()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn int(&mut self, what: &str) -> Result<usize> {
        let t = self.token(what)?;
        t.parse()
            .map_err(|_| self.err(format!("`{t}` is not a valid {what}")))
    }

    fn float(&mut self, what: &str) -> Result<f64> {
        let t = self.token(what)?;
        t.parse()
            .map_err(|_| self.err(format!("`{t}` is not a valid {what}")))
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse {
            line: self.line.max(1),
            col: 1,
            msg,
        }
    }
}
