//! Parser for discrete networks in BIF text form (the bnlearn dialect).
//!
//! Supported constructs, exactly as emitted by bnlearn exports:
//!
//! ```text
//! network <word> { }
//! variable <name> { type discrete [ <k> ] { <state>, ... }; }
//! probability ( <child> ) { table <p>, ...; }
//! probability ( <child> | <parent>, ... ) { (<state>, ...) <p>, ...; ... }
//! ```
//!
//! Anything else — property lists, continuous variables, default rows —
//! is rejected with a parse error naming the offending line. `//` line
//! comments are skipped. Numbers accept scientific notation.
//!
//! Semantic rules: every `(states)` row must bind each parent exactly
//! once in declared parent order; each parent configuration must appear
//! exactly once; rows are stored with the last parent varying fastest.

use crate::error::{Error, Result};
use crate::model::{Cpt, Network, Variable};

/// Parse BIF text into a validated [`Network`].
pub fn parse_bif(text: &str) -> Result<Network> {
    let tokens = lex(text)?;
    Parser { tokens, pos: 0 }.file()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Pipe,
    Comma,
    Semi,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            '/' => {
                chars.next();
                bump('/', &mut line, &mut col);
                if chars.peek() == Some(&'/') {
                    for c in chars.by_ref() {
                        bump(c, &mut line, &mut col);
                        if c == '\n' {
                            break;
                        }
                    }
                } else {
                    return Err(Error::Parse {
                        line: tline,
                        col: tcol,
                        msg: "stray `/` (only `//` comments are supported)".into(),
                    });
                }
            }
            '{' | '}' | '(' | ')' | '[' | ']' | '|' | ',' | ';' => {
                chars.next();
                bump(c, &mut line, &mut col);
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '|' => Tok::Pipe,
                    ',' => Tok::Comma,
                    _ => Tok::Semi,
                };
                out.push(Spanned {
                    tok,
                    line: tline,
                    col: tcol,
                });
            }
            _ => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || "{}()[]|,;/".contains(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                }
                out.push(Spanned {
                    tok: Tok::Word(word),
                    line: tline,
                    col: tcol,
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self, what: &str) -> Result<&Spanned> {
        let t = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| Error::parse_at(usize::MAX, format!("unexpected end of file, expected {what}")))
            .map_err(|_| {
                let (line, col) = self.tokens.last().map(|t| (t.line, t.col)).unwrap_or((1, 1));
                Error::Parse {
                    line,
                    col,
                    msg: format!("unexpected end of file, expected {what}"),
                }
            })?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        let found = self.next(&tok.describe())?;
        if found.tok == tok {
            Ok(())
        } else {
            let msg = format!("expected {}, found {}", tok.describe(), found.tok.describe());
            let (line, col) = (found.line, found.col);
            Err(Error::Parse { line, col, msg })
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let t = self.next(what)?;
        match &t.tok {
            Tok::Word(w) => Ok((w.clone(), t.line, t.col)),
            other => Err(Error::Parse {
                line: t.line,
                col: t.col,
                msg: format!("expected {what}, found {}", other.describe()),
            }),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (w, line, col) = self.word(&format!("`{kw}`"))?;
        if w == kw {
            Ok(())
        } else {
            Err(Error::Parse {
                line,
                col,
                msg: format!("expected `{kw}`, found `{w}`"),
            })
        }
    }

    fn number(&mut self) -> Result<f64> {
        let (w, line, col) = self.word("a number")?;
        w.parse::<f64>().map_err(|_| Error::Parse {
            line,
            col,
            msg: format!("`{w}` is not a number"),
        })
    }

    fn file(&mut self) -> Result<Network> {
        self.keyword("network")?;
        self.word("network name")?;
        self.expect(Tok::LBrace)?;
        match self.next("`}`")? {
            t if t.tok == Tok::RBrace => {}
            t => {
                return Err(Error::Parse {
                    line: t.line,
                    col: t.col,
                    msg: format!(
                        "unsupported content in network block: {} (property lists are not supported)",
                        t.tok.describe()
                    ),
                })
            }
        }

        let mut variables: Vec<Variable> = Vec::new();
        let mut raw_cpts: Vec<(String, usize, Vec<String>, CptBody)> = Vec::new();
        while self.peek().is_some() {
            let (kw, line, col) = self.word("`variable` or `probability`")?;
            match kw.as_str() {
                "variable" => {
                    let var = self.variable_block(variables.len())?;
                    variables.push(var);
                }
                "probability" => {
                    let decl = self.probability_block()?;
                    raw_cpts.push((decl.0, line, decl.1, decl.2));
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        col,
                        msg: format!("expected `variable` or `probability`, found `{other}`"),
                    })
                }
            }
        }

        let lookup = |name: &str, line: usize| -> Result<usize> {
            variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| Error::parse_at(line, format!("unknown variable `{name}`")))
        };

        let mut cpts = Vec::with_capacity(raw_cpts.len());
        for (child_name, line, parent_names, body) in raw_cpts {
            let child = lookup(&child_name, line)?;
            let parents: Vec<usize> = parent_names
                .iter()
                .map(|p| lookup(p, line))
                .collect::<Result<_>>()?;
            let table = assemble_table(&variables, child, &parents, body, line)?;
            cpts.push(Cpt {
                child,
                parents,
                table,
            });
        }
        Network::new(variables, cpts)
    }

    fn variable_block(&mut self, id: usize) -> Result<Variable> {
        let (name, _, _) = self.word("variable name")?;
        self.expect(Tok::LBrace)?;
        self.keyword("type")?;
        self.keyword("discrete")?;
        self.expect(Tok::LBracket)?;
        let (count_word, cline, ccol) = self.word("state count")?;
        let declared: usize = count_word.parse().map_err(|_| Error::Parse {
            line: cline,
            col: ccol,
            msg: format!("`{count_word}` is not a state count"),
        })?;
        self.expect(Tok::RBracket)?;
        self.expect(Tok::LBrace)?;
        let mut states = Vec::new();
        loop {
            let (s, _, _) = self.word("state label")?;
            states.push(s);
            match self.next("`,` or `}`")? {
                t if t.tok == Tok::Comma => continue,
                t if t.tok == Tok::RBrace => break,
                t => {
                    return Err(Error::Parse {
                        line: t.line,
                        col: t.col,
                        msg: format!("expected `,` or `}}`, found {}", t.tok.describe()),
                    })
                }
            }
        }
        self.expect(Tok::Semi)?;
        self.expect(Tok::RBrace)?;
        if states.len() != declared {
            return Err(Error::Parse {
                line: cline,
                col: ccol,
                msg: format!(
                    "variable {name} declares {declared} states but lists {}",
                    states.len()
                ),
            });
        }
        let mut dedup = states.clone();
        dedup.sort();
        dedup.dedup();
        if dedup.len() != states.len() {
            return Err(Error::Parse {
                line: cline,
                col: ccol,
                msg: format!("variable {name} repeats a state label"),
            });
        }
        Ok(Variable { id, name, states })
    }

    fn probability_block(&mut self) -> Result<(String, Vec<String>, CptBody)> {
        self.expect(Tok::LParen)?;
        let (child, _, _) = self.word("child variable")?;
        let mut parents = Vec::new();
        match self.next("`|` or `)`")? {
            t if t.tok == Tok::RParen => {}
            t if t.tok == Tok::Pipe => loop {
                let (p, _, _) = self.word("parent variable")?;
                parents.push(p);
                match self.next("`,` or `)`")? {
                    t if t.tok == Tok::Comma => continue,
                    t if t.tok == Tok::RParen => break,
                    t => {
                        return Err(Error::Parse {
                            line: t.line,
                            col: t.col,
                            msg: format!("expected `,` or `)`, found {}", t.tok.describe()),
                        })
                    }
                }
            },
            t => {
                return Err(Error::Parse {
                    line: t.line,
                    col: t.col,
                    msg: format!("expected `|` or `)`, found {}", t.tok.describe()),
                })
            }
        }
        self.expect(Tok::LBrace)?;
        let body = if parents.is_empty() {
            self.keyword("table")?;
            let mut values = vec![self.number()?];
            loop {
                match self.next("`,` or `;`")? {
                    t if t.tok == Tok::Comma => values.push(self.number()?),
                    t if t.tok == Tok::Semi => break,
                    t => {
                        return Err(Error::Parse {
                            line: t.line,
                            col: t.col,
                            msg: format!("expected `,` or `;`, found {}", t.tok.describe()),
                        })
                    }
                }
            }
            self.expect(Tok::RBrace)?;
            CptBody::Root(values)
        } else {
            let mut rows = Vec::new();
            loop {
                match self.next("`(` or `}`")? {
                    t if t.tok == Tok::RBrace => break,
                    t if t.tok == Tok::LParen => {}
                    t => {
                        return Err(Error::Parse {
                            line: t.line,
                            col: t.col,
                            msg: format!("expected `(` or `}}`, found {}", t.tok.describe()),
                        })
                    }
                }
                let row_line = self.tokens[self.pos - 1].line;
                let mut labels = Vec::new();
                loop {
                    let (s, _, _) = self.word("parent state label")?;
                    labels.push(s);
                    match self.next("`,` or `)`")? {
                        t if t.tok == Tok::Comma => continue,
                        t if t.tok == Tok::RParen => break,
                        t => {
                            return Err(Error::Parse {
                                line: t.line,
                                col: t.col,
                                msg: format!("expected `,` or `)`, found {}", t.tok.describe()),
                            })
                        }
                    }
                }
                let mut values = vec![self.number()?];
                loop {
                    match self.next("`,` or `;`")? {
                        t if t.tok == Tok::Comma => values.push(self.number()?),
                        t if t.tok == Tok::Semi => break,
                        t => {
                            return Err(Error::Parse {
                                line: t.line,
                                col: t.col,
                                msg: format!("expected `,` or `;`, found {}", t.tok.describe()),
                            })
                        }
                    }
                }
                rows.push((labels, values, row_line));
            }
            CptBody::Rows(rows)
        };
        Ok((child, parents, body))
    }
}

enum CptBody {
    Root(Vec<f64>),
    /// (parent state labels, child probabilities, source line) per row.
    Rows(Vec<(Vec<String>, Vec<f64>, usize)>),
}

/// Order rows into the canonical layout: parent configurations enumerated
/// with the last parent fastest, each row holding child probabilities in
/// declared state order.
fn assemble_table(
    variables: &[Variable],
    child: usize,
    parents: &[usize],
    body: CptBody,
    decl_line: usize,
) -> Result<Vec<f64>> {
    let child_card = variables[child].cardinality();
    match body {
        CptBody::Root(values) => {
            if !parents.is_empty() {
                unreachable!("root body only parsed for parentless declarations");
            }
            if values.len() != child_card {
                return Err(Error::parse_at(
                    decl_line,
                    format!(
                        "table for {} lists {} probabilities, expected {}",
                        variables[child].name,
                        values.len(),
                        child_card
                    ),
                ));
            }
            Ok(values)
        }
        CptBody::Rows(rows) => {
            let n_rows: usize = parents.iter().map(|&p| variables[p].cardinality()).product();
            let mut table = vec![f64::NAN; n_rows * child_card];
            let mut filled = vec![false; n_rows];
            for (labels, values, line) in rows {
                if labels.len() != parents.len() {
                    return Err(Error::parse_at(
                        line,
                        format!(
                            "row binds {} parent states, expected {}",
                            labels.len(),
                            parents.len()
                        ),
                    ));
                }
                let mut row_idx = 0usize;
                for (&p, label) in parents.iter().zip(&labels) {
                    let pv = &variables[p];
                    let s = pv.state_index(label).ok_or_else(|| {
                        Error::parse_at(
                            line,
                            format!("`{label}` is not a state of parent {}", pv.name),
                        )
                    })?;
                    row_idx = row_idx * pv.cardinality() + s;
                }
                if values.len() != child_card {
                    return Err(Error::parse_at(
                        line,
                        format!(
                            "row lists {} probabilities, expected {}",
                            values.len(),
                            child_card
                        ),
                    ));
                }
                if filled[row_idx] {
                    return Err(Error::parse_at(
                        line,
                        format!(
                            "duplicate row ({}) in table for {}",
                            labels.join(", "),
                            variables[child].name
                        ),
                    ));
                }
                filled[row_idx] = true;
                table[row_idx * child_card..(row_idx + 1) * child_card].copy_from_slice(&values);
            }
            if let Some(missing) = filled.iter().position(|&f| !f) {
                let mut idx = missing;
                let mut labels = Vec::new();
                for &p in parents.iter().rev() {
                    let k = variables[p].cardinality();
                    labels.push(variables[p].states[idx % k].clone());
                    idx /= k;
                }
                labels.reverse();
                return Err(Error::parse_at(
                    decl_line,
                    format!(
                        "table for {} is missing the row ({})",
                        variables[child].name,
                        labels.join(", ")
                    ),
                ));
            }
            Ok(table)
        }
    }
}
