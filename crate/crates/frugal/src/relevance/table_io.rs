//! Plain-text persistence for relevance tables.
//!
//! The format is line oriented and fixed order:
//!
//! ```text
//! relevance-table v1
//! network 1a2b3c4d5e6f7081
//! hypothesis 0 1 4
//! evidence 7 9
//! budget 1000
//! seed 42
//! meta measure=uniform;evidence=7=0,9=2
//! rows 2
//! 2 321 1000 0.321
//! 3 0 1000 0
//! ```
//!
//! Each row is `var flips samples relevance`; the stored relevance is
//! redundant but keeps the files self-describing, and readers check it
//! against `flips / samples`.

use std::fs;
use std::path::Path;

use super::{RelevanceEstimate, RelevanceTable};
use crate::error::{Error, Result};
use crate::model::VarId;

const MAGIC: &str = "relevance-table v1";

pub fn write_table_string(table: &RelevanceTable) -> String {
    let ids = |vs: &[VarId]| {
        vs.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("network {}\n", table.network_hash));
    out.push_str(&join_key("hypothesis", &ids(&table.hypothesis)));
    out.push_str(&join_key("evidence", &ids(&table.evidence_vars)));
    out.push_str(&format!("budget {}\n", table.budget));
    out.push_str(&format!("seed {}\n", table.seed));
    out.push_str(&join_key("meta", &table.meta));
    out.push_str(&format!("rows {}\n", table.rows.len()));
    for r in &table.rows {
        out.push_str(&format!(
            "{} {} {} {}\n",
            r.var,
            r.flips,
            r.samples,
            r.relevance()
        ));
    }
    out
}

fn join_key(key: &str, rest: &str) -> String {
    if rest.is_empty() {
        format!("{key}\n")
    } else {
        format!("{key} {rest}\n")
    }
}

pub fn write_table(path: &Path, table: &RelevanceTable) -> Result<()> {
    fs::write(path, write_table_string(table))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.inner
            .next()
            .ok_or_else(|| Error::parse_at(self.line_no, "unexpected end of table"))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse_at(self.line_no, msg)
    }
}

/// Take line `key <rest>`, returning the rest (possibly empty).
fn keyed<'a>(lines: &mut Lines<'a>, key: &str) -> Result<&'a str> {
    let line = lines.next()?;
    if line == key {
        return Ok("");
    }
    match line.strip_prefix(key) {
        Some(rest) if rest.starts_with(' ') => Ok(rest[1..].trim()),
        _ => Err(lines.err(format!("expected `{key} ...`, found `{line}`"))),
    }
}

fn parse_ids(lines: &Lines, text: &str) -> Result<Vec<VarId>> {
    let mut ids = Vec::new();
    for tok in text.split_whitespace() {
        let id: VarId = tok
            .parse()
            .map_err(|_| lines.err(format!("bad variable id `{tok}`")))?;
        if let Some(&last) = ids.last() {
            if id <= last {
                return Err(lines.err("variable ids must be strictly ascending"));
            }
        }
        ids.push(id);
    }
    Ok(ids)
}

/// Parse a relevance table; when `expected_hash` is given, reject tables
/// computed for a different network.
pub fn read_table_string(text: &str, expected_hash: Option<&str>) -> Result<RelevanceTable> {
    let mut lines = Lines {
        inner: text.lines(),
        line_no: 0,
    };
    let magic = lines.next()?;
    if magic.trim() != MAGIC {
        return Err(lines.err(format!("not a relevance table (expected `{MAGIC}`)")));
    }
    let network_hash = keyed(&mut lines, "network")?.to_string();
    if network_hash.is_empty() || !network_hash.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(lines.err("network hash must be a hexadecimal digest"));
    }
    if let Some(expect) = expected_hash {
        if network_hash != expect {
            return Err(Error::validation(format!(
                "relevance table was computed for network {network_hash}, expected {expect}"
            )));
        }
    }
    let hyp_text = keyed(&mut lines, "hypothesis")?;
    let hypothesis = parse_ids(&lines, hyp_text)?;
    if hypothesis.is_empty() {
        return Err(lines.err("hypothesis set must not be empty"));
    }
    let ev_text = keyed(&mut lines, "evidence")?;
    let evidence_vars = parse_ids(&lines, ev_text)?;
    let budget: u32 = keyed(&mut lines, "budget")?
        .parse()
        .map_err(|_| lines.err("bad budget"))?;
    if budget == 0 {
        return Err(lines.err("budget must be positive"));
    }
    let seed: u64 = keyed(&mut lines, "seed")?
        .parse()
        .map_err(|_| lines.err("bad seed"))?;
    let meta = keyed(&mut lines, "meta")?.to_string();
    let n_rows: usize = keyed(&mut lines, "rows")?
        .parse()
        .map_err(|_| lines.err("bad row count"))?;
    let mut rows = Vec::with_capacity(n_rows);
    let mut prev: Option<VarId> = None;
    for _ in 0..n_rows {
        let line = lines.next()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(lines.err(format!(
                "expected `var flips samples relevance`, found `{line}`"
            )));
        }
        let var: VarId = toks[0]
            .parse()
            .map_err(|_| lines.err(format!("bad variable id `{}`", toks[0])))?;
        if prev.is_some_and(|p| var <= p) {
            return Err(lines.err("rows must be strictly ascending by variable id"));
        }
        prev = Some(var);
        let flips: u32 = toks[1]
            .parse()
            .map_err(|_| lines.err(format!("bad flip count `{}`", toks[1])))?;
        let samples: u32 = toks[2]
            .parse()
            .map_err(|_| lines.err(format!("bad sample count `{}`", toks[2])))?;
        if samples == 0 {
            return Err(lines.err("sample count must be positive"));
        }
        if flips > samples {
            return Err(lines.err(format!("{flips} flips out of {samples} samples")));
        }
        if samples != budget {
            return Err(lines.err(format!(
                "row uses {samples} samples but the table budget is {budget}"
            )));
        }
        let relevance: f64 = toks[3]
            .parse()
            .map_err(|_| lines.err(format!("bad relevance `{}`", toks[3])))?;
        let est = RelevanceEstimate { var, flips, samples };
        if relevance != est.relevance() {
            return Err(lines.err(format!(
                "stored relevance {relevance} disagrees with {flips}/{samples}"
            )));
        }
        if hypothesis.contains(&var) || evidence_vars.contains(&var) {
            return Err(lines.err(format!(
                "variable {var} is part of the hypothesis or evidence"
            )));
        }
        rows.push(est);
    }
    if let Ok(extra) = lines.next() {
        if !extra.trim().is_empty() {
            return Err(lines.err(format!("trailing content `{extra}`")));
        }
    }
    Ok(RelevanceTable {
        network_hash,
        hypothesis,
        evidence_vars,
        budget,
        seed,
        meta,
        rows,
    })
}

pub fn read_table(path: &Path, expected_hash: Option<&str>) -> Result<RelevanceTable> {
    let text = fs::read_to_string(path)?;
    read_table_string(&text, expected_hash)
}
