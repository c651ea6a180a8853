//! Model formulas of the form `y ~ edges + mutual + ctriple("job")`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! formula := ident "~" term ("+" term)*
//! term    := "edges" | "mutual" | "ctriple" [ "(" [string] ")" ]
//!          | ("gwesp" | "gwdegree") "(" number "," "fixed" "=" bool ")"
//! ```
//!
//! Only fixed-decay geometric terms are supported; `fixed=FALSE` is rejected.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stats::{ModelSpec, ModelTerm};

#[derive(Clone, Debug, PartialEq)]
pub struct Formula {
    /// Name on the left of `~`; informational only.
    pub response: String,
    pub spec: ModelSpec,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {}", self.response, self.spec)
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_formula(s)
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.src[..self.pos].chars().count() + 1
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Formula {
            col: self.col(),
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => self.err(format!("expected `{c}`, found `{found}`")),
                None => self.err(format!("expected `{c}`, found end of input")),
            }
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .find(|&(i, c)| !(c.is_alphanumeric() || c == '_' || c == '.' && i > 0))
            .map_or(rest.len(), |(i, _)| i);
        if len == 0 || !rest.starts_with(|c: char| c.is_alphabetic() || c == '_' || c == '.') {
            return None;
        }
        self.pos += len;
        Some(&rest[..len])
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+')))
            .unwrap_or(rest.len());
        match rest[..len].parse::<f64>() {
            Ok(v) if v.is_finite() && len > 0 => {
                self.pos += len;
                Ok(v)
            }
            _ => self.err("expected a decimal number"),
        }
    }

    fn string(&mut self) -> Result<String> {
        self.skip_ws();
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return self.err("expected a quoted attribute name"),
        };
        let start = self.pos + 1;
        match self.src[start..].find(quote) {
            Some(end) => {
                let s = &self.src[start..start + end];
                if s.is_empty() {
                    return self.err("attribute name is empty");
                }
                self.pos = start + end + 1;
                Ok(s.to_string())
            }
            None => self.err("unterminated string"),
        }
    }
}

fn geometric_args(cur: &mut Cursor<'_>, name: &str) -> Result<f64> {
    if !cur.eat('(') {
        return cur.err(format!(
            "`{name}` needs a decay argument, e.g. `{name}(0.5, fixed=TRUE)`"
        ));
    }
    let before = cur.pos;
    if cur.ident() == Some("decay") {
        cur.expect('=')?;
    } else {
        cur.pos = before;
    }
    let decay = cur.number()?;
    if decay < 0.0 {
        return cur.err("decay must be non-negative");
    }
    let mut fixed = None;
    if cur.eat(',') {
        let at = cur.col();
        match cur.ident() {
            Some("fixed") => {}
            Some(other) => {
                return Err(Error::Formula {
                    col: at,
                    msg: format!("unknown argument `{other}` to `{name}`"),
                })
            }
            None => return cur.err("expected `fixed=TRUE`"),
        }
        cur.expect('=')?;
        let at = cur.col();
        fixed = match cur.ident() {
            Some("TRUE" | "T" | "true") => Some(true),
            Some("FALSE" | "F" | "false") => Some(false),
            _ => {
                return Err(Error::Formula {
                    col: at,
                    msg: "expected TRUE or FALSE".into(),
                })
            }
        };
    }
    cur.expect(')')?;
    match fixed {
        Some(true) => Ok(decay),
        Some(false) => cur.err(format!(
            "`{name}` with fixed=FALSE is a curved term and is not supported"
        )),
        None => cur.err(format!("`{name}` requires `fixed=TRUE`")),
    }
}

fn term(cur: &mut Cursor<'_>) -> Result<ModelTerm> {
    let at = {
        cur.skip_ws();
        cur.col()
    };
    let name = match cur.ident() {
        Some(n) => n,
        None => return cur.err("expected a term name"),
    };
    let no_args = |cur: &mut Cursor<'_>, t: ModelTerm| {
        if cur.eat('(') {
            cur.expect(')')?;
        }
        Ok(t)
    };
    match name {
        "edges" => no_args(cur, ModelTerm::Edges),
        "mutual" => no_args(cur, ModelTerm::Mutual),
        "ctriple" => {
            let attribute = if cur.eat('(') {
                let a = if cur.peek() == Some(')') {
                    None
                } else {
                    Some(cur.string()?)
                };
                cur.expect(')')?;
                a
            } else {
                None
            };
            Ok(ModelTerm::Ctriple { attribute })
        }
        "gwesp" => Ok(ModelTerm::Gwesp {
            decay: geometric_args(cur, name)?,
        }),
        "gwdegree" => Ok(ModelTerm::Gwdegree {
            decay: geometric_args(cur, name)?,
        }),
        other => Err(Error::Formula {
            col: at,
            msg: format!("unknown term `{other}` (known: edges, mutual, ctriple, gwesp, gwdegree)"),
        }),
    }
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut cur = Cursor { src: text, pos: 0 };
    let response = match cur.ident() {
        Some(r) => r.to_string(),
        None => return cur.err("expected a response name before `~`"),
    };
    cur.expect('~')?;
    if cur.peek().is_none() {
        return cur.err("formula has no terms");
    }
    let mut terms: Vec<(ModelTerm, usize)> = Vec::new();
    loop {
        cur.skip_ws();
        let at = cur.col();
        let t = term(&mut cur)?;
        if terms.iter().any(|(prev, _)| *prev == t) {
            return Err(Error::Formula {
                col: at,
                msg: format!("duplicate term `{t}`"),
            });
        }
        terms.push((t, at));
        if !cur.eat('+') {
            break;
        }
    }
    if let Some(c) = cur.peek() {
        return cur.err(format!("unexpected `{c}`"));
    }
    let spec = ModelSpec::new(terms.into_iter().map(|(t, _)| t).collect())?;
    Ok(Formula { response, spec })
}

/// One formula per non-empty line; `#` starts a comment.
pub fn parse_formula_list(text: &str) -> Result<Vec<Formula>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let f = parse_formula(body).map_err(|e| match e {
            Error::Formula { col, msg } => Error::Formula {
                col,
                msg: format!("line {}: {msg}", line_no + 1),
            },
            other => other,
        })?;
        out.push(f);
    }
    if out.is_empty() {
        return Err(Error::Empty("formula list is empty".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(s: &str) -> Vec<ModelTerm> {
        parse_formula(s).unwrap().spec.terms().to_vec()
    }

    fn err_col(s: &str) -> (usize, String) {
        match parse_formula(s) {
            Err(Error::Formula { col, msg }) => (col, msg),
            other => panic!("expected a formula error for {s:?}, got {other:?}"),
        }
    }

    #[test]
    fn tailor_shop_formula() {
        assert_eq!(
            terms(r#"y ~ edges + mutual + ctriple("job")"#),
            vec![
                ModelTerm::Edges,
                ModelTerm::Mutual,
                ModelTerm::Ctriple {
                    attribute: Some("job".into())
                }
            ]
        );
    }

    #[test]
    fn geometric_terms() {
        assert_eq!(
            terms("y ~ edges + gwesp(0.2, fixed=TRUE) + gwdegree(0.8, fixed=TRUE)"),
            vec![
                ModelTerm::Edges,
                ModelTerm::Gwesp { decay: 0.2 },
                ModelTerm::Gwdegree { decay: 0.8 }
            ]
        );
        assert_eq!(
            terms("y~edges+gwesp( 0.2 ,fixed = TRUE )"),
            terms("y ~ edges + gwesp(0.2, fixed = TRUE)")
        );
        assert_eq!(
            terms("y ~ gwesp(decay=1.5, fixed=T)"),
            vec![ModelTerm::Gwesp { decay: 1.5 }]
        );
    }

    #[test]
    fn errors_carry_columns() {
        let (col, msg) = err_col("y ~ edges+edges");
        assert_eq!(col, 11);
        assert!(msg.contains("duplicate"));
        let (col, msg) = err_col("y ~ edges + triangle");
        assert_eq!(col, 13);
        assert!(msg.contains("unknown term"));
        let (_, msg) = err_col("y ~ gwesp(0.2, fixed=FALSE)");
        assert!(msg.contains("fixed=FALSE"));
        let (_, msg) = err_col("y ~ gwesp(0.2)");
        assert!(msg.contains("fixed=TRUE"));
        let (_, msg) = err_col("y ~ ");
        assert!(msg.contains("no terms"));
        let (_, msg) = err_col("y ~ edges +");
        assert!(msg.contains("term name"));
        let (_, msg) = err_col(r#"y ~ ctriple("job"#);
        assert!(msg.contains("unterminated"));
        err_col("y ~ gwesp(abc, fixed=TRUE)");
        err_col("y ~ gwesp(-1, fixed=TRUE)");
        err_col("~ edges");
        err_col("y ~ edges mutual");
    }

    #[test]
    fn display_round_trip() {
        for s in [
            r#"y ~ edges + mutual + ctriple("job")"#,
            "y ~ edges + gwesp(0.2, fixed=TRUE)",
            "y ~ edges + gwdegree(0.8, fixed=TRUE)",
            "y ~ edges + gwesp(0.2, fixed=TRUE) + gwdegree(0.8, fixed=TRUE)",
            "net ~ ctriple + edges",
        ] {
            let f = parse_formula(s).unwrap();
            assert_eq!(f.to_string(), s);
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        }
    }

    #[test]
    fn formula_list() {
        let text = "# karate\ny ~ edges + gwesp(0.2, fixed=TRUE)\n\ny ~ edges + gwdegree(0.8, fixed=TRUE)\n";
        assert_eq!(parse_formula_list(text).unwrap().len(), 2);
        match parse_formula_list("y ~ edges\ny ~ bogus\n") {
            Err(Error::Formula { msg, .. }) => assert!(msg.starts_with("line 2")),
            other => panic!("{other:?}"),
        }
        assert!(parse_formula_list("# nothing\n").is_err());
    }
}
