//! Line-oriented text format for context tree models.
//!
//! ```text
//! # two-letter tree
//! alphabet = 1 2
//! regular = 1 2            # optional; a prefix of the alphabet, default all
//! epsilon = 0.2
//! w = "2"                  # time order, oldest symbol first
//! ell = identity           # zero | identity | affine a b | power c alpha | exp r
//!                          # | table [v0, v1, ...] tail hold|linear|identity
//! "2" = [0.3, 0.7]         # context key in display order, most recent first
//! "121" = [0.7, 0.3]
//! @3 = [0.5, 0.5]          # distance classes: @k, @k+, @even, @odd
//! default = [0.5, 0.5]
//! ```
//!
//! Probability lists follow the alphabet order. Entries may be decimals or
//! fractions such as `1/3`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    Alphabet, ContextTreeModel, DistanceClass, LengthFunction, Rule, RuleKey, TableTail, TransitionRules, Violation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("semantic error: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<Violation>),
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line: self.line, column: self.text[..self.pos].chars().count() + 1, message: message.into() })
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn word(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest.find(|c: char| c.is_whitespace() || matches!(c, ',' | '[' | ']' | '=' | '"')).unwrap_or(rest.len());
        if len == 0 {
            return self.err("expected a value");
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn quoted(&mut self) -> Result<&'a str, ParseError> {
        self.expect('"')?;
        let rest = &self.text[self.pos..];
        match rest.find('"') {
            Some(end) => {
                self.pos += end + 1;
                Ok(&rest[..end])
            }
            None => self.err("unterminated string"),
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.pos;
        let w = self.word()?;
        let value = match w.split_once('/') {
            Some((a, b)) => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()).map(|(a, b)| a / b),
            None => w.parse::<f64>().ok(),
        };
        match value {
            Some(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.skip_ws();
                self.err(format!("invalid number '{w}'"))
            }
        }
    }

    fn integer(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        let w = self.word()?;
        w.parse().or_else(|_| {
            self.pos = start;
            self.skip_ws();
            self.err(format!("invalid integer '{w}'"))
        })
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
        self.expect('[')?;
        let mut out = Vec::new();
        if self.eat(']') {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(']') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_ell(c: &mut Cursor<'_>) -> Result<LengthFunction, ParseError> {
    let start = c.pos;
    let kind = c.word()?;
    let ell = match kind {
        "zero" => LengthFunction::Zero,
        "identity" => LengthFunction::Identity,
        "affine" => LengthFunction::Affine { slope: c.integer()?, intercept: c.integer()? },
        "power" => LengthFunction::Power { coef: c.number()?, exponent: c.number()? },
        "exp" => LengthFunction::Exponential { rate: c.number()? },
        "table" => {
            let values = c.list(|c| c.integer())?;
            let tail = if c.at_end() {
                TableTail::Unspecified
            } else {
                if c.word()? != "tail" {
                    return c.err("expected 'tail'");
                }
                match c.word()? {
                    "hold" => TableTail::Hold,
                    "linear" => TableTail::Linear,
                    "identity" => TableTail::Identity,
                    other => return c.err(format!("unknown tail rule '{other}'")),
                }
            };
            LengthFunction::Table { values, tail }
        }
        other => {
            c.pos = start;
            c.skip_ws();
            return c.err(format!("unknown length function '{other}'"));
        }
    };
    Ok(ell)
}

fn parse_distance(c: &mut Cursor<'_>) -> Result<DistanceClass, ParseError> {
    let start = c.pos;
    let w = c.word()?;
    let class = match w {
        "even" => Some(DistanceClass::Even),
        "odd" => Some(DistanceClass::Odd),
        _ => match w.strip_suffix('+') {
            Some(d) => d.parse().ok().map(DistanceClass::AtLeast),
            None => w.parse().ok().map(DistanceClass::Exact),
        },
    };
    class.map_or_else(
        || {
            c.pos = start;
            c.err(format!("invalid distance class '@{w}'"))
        },
        Ok,
    )
}

/// Parses a model document and validates the resulting model.
pub fn parse_model(text: &str) -> Result<ContextTreeModel, ParseError> {
    let mut alphabet: Option<Vec<char>> = None;
    let mut regular: Option<(Vec<char>, usize, usize)> = None;
    let mut epsilon = None;
    let mut w: Option<(String, usize, usize)> = None;
    let mut ell = None;
    // (key text or parsed key, probs, line, column)
    let mut rules: Vec<(PendingKey, Vec<f64>, usize, usize)> = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let body = strip_comment(raw);
        let mut c = Cursor { text: body, pos: 0, line };
        if c.at_end() {
            continue;
        }
        let key_col = c.pos + 1;
        let field: &str;
        let pending = if c.peek() == Some('"') {
            field = "";
            Some(PendingKey::Context(c.quoted()?.to_string()))
        } else if c.eat('@') {
            field = "";
            Some(PendingKey::Distance(parse_distance(&mut c)?))
        } else {
            field = c.word()?;
            (field == "default").then_some(PendingKey::Default)
        };
        c.expect('=')?;
        if let Some(key) = pending {
            let probs = c.list(|c| c.number())?;
            c.finish()?;
            rules.push((key, probs, line, key_col));
            continue;
        }
        if seen.contains(&field) {
            return Err(ParseError::Syntax { line, column: key_col, message: format!("duplicate field '{field}'") });
        }
        seen.push(field);
        match field {
            "alphabet" => {
                let mut symbols = Vec::new();
                while !c.at_end() {
                    let s = c.word()?;
                    let mut chars = s.chars();
                    match (chars.next(), chars.next()) {
                        (Some(ch), None) => symbols.push(ch),
                        _ => return c.err(format!("symbols are single characters, got '{s}'")),
                    }
                }
                alphabet = Some(symbols);
            }
            "regular" => {
                c.skip_ws();
                let col = c.pos + 1;
                let mut symbols = Vec::new();
                while !c.at_end() {
                    let s = c.word()?;
                    symbols.extend(s.chars());
                }
                regular = Some((symbols, line, col));
            }
            "epsilon" => {
                epsilon = Some(c.number()?);
                c.finish()?;
            }
            "w" => {
                c.skip_ws();
                let col = c.pos + 1;
                w = Some((c.quoted()?.to_string(), line, col));
                c.finish()?;
            }
            "ell" => {
                ell = Some(parse_ell(&mut c)?);
                c.finish()?;
            }
            other => {
                return Err(ParseError::Syntax { line, column: key_col, message: format!("unknown field '{other}'") });
            }
        }
    }

    let missing = |name: &str| ParseError::Syntax { line: last_line.max(1), column: 1, message: format!("missing field '{name}'") };
    let symbols = alphabet.ok_or_else(|| missing("alphabet"))?;
    let epsilon = epsilon.ok_or_else(|| missing("epsilon"))?;
    let (w_text, w_line, w_col) = w.ok_or_else(|| missing("w"))?;
    let ell = ell.ok_or_else(|| missing("ell"))?;

    let regular_count = match regular {
        None => symbols.len(),
        Some((reg, line, column)) => {
            if reg.len() > symbols.len() || reg[..] != symbols[..reg.len()] {
                return Err(ParseError::Syntax {
                    line,
                    column,
                    message: "regular symbols must be listed first in the alphabet, in the same order".into(),
                });
            }
            reg.len()
        }
    };
    let alphabet = Alphabet::new(symbols, regular_count);
    let reference = alphabet.parse_time_order(&w_text).map_err(|e| ParseError::Syntax {
        line: w_line,
        column: w_col,
        message: e.to_string(),
    })?;
    let mut parsed = Vec::with_capacity(rules.len());
    for (key, probs, line, column) in rules {
        let key = match key {
            PendingKey::Context(s) => RuleKey::Context(
                alphabet.parse_display_key(&s).map_err(|e| ParseError::Syntax { line, column, message: e.to_string() })?,
            ),
            PendingKey::Distance(d) => RuleKey::Distance(d),
            PendingKey::Default => RuleKey::Default,
        };
        parsed.push(Rule { key, probs });
    }
    let model = ContextTreeModel::from_parts(alphabet, reference, ell, TransitionRules::new(epsilon, parsed));
    let violations = model.validate();
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(ParseError::Semantic(violations))
    }
}

enum PendingKey {
    Context(String),
    Distance(DistanceClass),
    Default,
}

fn write_probs(out: &mut String, probs: &[f64]) {
    let items: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(out, "[{}]", items.join(", "));
}

/// Canonical text form; `parse_model(&print_model(m))` rebuilds `m`.
pub fn print_model(model: &ContextTreeModel) -> String {
    let a = model.alphabet();
    let mut out = String::new();
    let chars: Vec<String> = a.chars().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "alphabet = {}", chars.join(" "));
    let _ = writeln!(out, "regular = {}", chars[..a.regular_count()].join(" "));
    let _ = writeln!(out, "epsilon = {}", model.epsilon());
    let _ = writeln!(out, "w = \"{}\"", a.render(model.reference()));
    let ell = match model.ell() {
        LengthFunction::Zero => "zero".to_string(),
        LengthFunction::Identity => "identity".to_string(),
        LengthFunction::Affine { slope, intercept } => format!("affine {slope} {intercept}"),
        LengthFunction::Power { coef, exponent } => format!("power {coef} {exponent}"),
        LengthFunction::Exponential { rate } => format!("exp {rate}"),
        LengthFunction::Table { values, tail } => {
            let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
            let tail = match tail {
                TableTail::Unspecified => "",
                TableTail::Hold => " tail hold",
                TableTail::Linear => " tail linear",
                TableTail::Identity => " tail identity",
            };
            format!("table [{}]{tail}", v.join(", "))
        }
    };
    let _ = writeln!(out, "ell = {ell}");
    for rule in model.rules().rules() {
        match &rule.key {
            RuleKey::Context(k) => {
                let _ = write!(out, "\"{}\" = ", a.render_display(k));
            }
            RuleKey::Distance(d) => {
                let _ = write!(out, "{d} = ");
            }
            RuleKey::Default => out.push_str("default = "),
        }
        write_probs(&mut out, &rule.probs);
    }
    out
}
