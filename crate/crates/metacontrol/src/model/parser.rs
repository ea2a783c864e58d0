//! Recursive-descent parsers for the model and config grammars.
//!
//! Error positions are line-local: a declaration's tokens must not spill
//! onto the next line (block items and the closing `}` may), and an
//! unclosed block is implicitly closed when a new top-level declaration
//! starts a line. Together these keep every syntax error on the line that
//! caused it, which the corruption tests rely on.

use std::collections::BTreeMap;

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    Cmp, ConfigurationSpec, Decl, Declaration, MetacontrolConfig, ModelDocument, ParseError,
};
use crate::kb::Polarity;

const MODEL_KEYWORDS: &[&str] = &["qa_type", "function", "design", "objective"];
const CONFIG_KEYWORDS: &[&str] =
    &["configuration", "kill_components", "save_goal", "reconfig_latency_s"];

struct Tokens {
    toks: Vec<Token>,
    pos: usize,
}

impl Tokens {
    fn new(source: &str) -> Result<Self, ParseError> {
        Ok(Self { toks: tokenize(source)?, pos: 0 })
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    /// True when the upcoming token is the first on its line.
    fn at_line_start(&self) -> bool {
        match (self.pos.checked_sub(1).and_then(|i| self.toks.get(i)), self.peek()) {
            (Some(prev), Some(cur)) => cur.line > prev.line,
            (None, Some(_)) => true,
            _ => false,
        }
    }

    /// Next token, required to sit on `line`; otherwise the production is
    /// incomplete and the error stays on that line.
    fn expect_on(&mut self, line: usize, what: &str) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if t.line == line => Ok(self.next().unwrap()),
            _ => Err(ParseError::new(
                line,
                self.last_col(),
                format!("incomplete declaration on line {line}"),
                what,
            )),
        }
    }

    fn last_col(&self) -> usize {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.toks.get(i))
            .map(|t| t.col + 1)
            .unwrap_or(1)
    }
}

fn ident_on(toks: &mut Tokens, line: usize, what: &str) -> Result<String, ParseError> {
    let t = toks.expect_on(line, what)?;
    match t.kind {
        TokenKind::Ident(s) => Ok(s),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("found {}", other.describe()),
            what,
        )),
    }
}

fn keyword_on(toks: &mut Tokens, line: usize, kw: &str) -> Result<(), ParseError> {
    let t = toks.expect_on(line, &format!("`{kw}`"))?;
    match &t.kind {
        TokenKind::Ident(s) if s == kw => Ok(()),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("found {}", other.describe()),
            format!("`{kw}`"),
        )),
    }
}

fn number_on(toks: &mut Tokens, line: usize) -> Result<f64, ParseError> {
    let t = toks.expect_on(line, "number")?;
    match t.kind {
        TokenKind::Number(v) => Ok(v),
        other => Err(ParseError::new(t.line, t.col, format!("found {}", other.describe()), "number")),
    }
}

fn string_on(toks: &mut Tokens, line: usize) -> Result<String, ParseError> {
    let t = toks.expect_on(line, "string")?;
    match t.kind {
        TokenKind::Str(s) => Ok(s),
        other => Err(ParseError::new(t.line, t.col, format!("found {}", other.describe()), "string")),
    }
}

fn kind_on(toks: &mut Tokens, line: usize, kind: TokenKind, what: &str) -> Result<(), ParseError> {
    let t = toks.expect_on(line, what)?;
    if t.kind == kind {
        Ok(())
    } else {
        Err(ParseError::new(t.line, t.col, format!("found {}", t.kind.describe()), what))
    }
}

/// Does the upcoming token implicitly close an open block? That happens at
/// EOF or when a top-level keyword starts a fresh line (a missing `}`).
fn implicit_close(toks: &Tokens, keywords: &[&str]) -> bool {
    match toks.peek() {
        None => true,
        Some(t) => {
            matches!(&t.kind, TokenKind::Ident(s) if keywords.contains(&s.as_str()))
                && toks.at_line_start()
        }
    }
}

/// Syntax-only parse of a knowledge model document.
pub fn parse_model(source: &str) -> Result<ModelDocument, ParseError> {
    let mut toks = Tokens::new(source)?;
    let mut declarations = Vec::new();
    while let Some(head) = toks.next() {
        let line = head.line;
        let kw = match &head.kind {
            TokenKind::Ident(s) => s.clone(),
            other => {
                return Err(ParseError::new(
                    head.line,
                    head.col,
                    format!("found {}", other.describe()),
                    "declaration keyword",
                ))
            }
        };
        let decl = match kw.as_str() {
            "qa_type" => {
                let id = ident_on(&mut toks, line, "QA type id")?;
                let pol = ident_on(&mut toks, line, "polarity")?;
                let polarity = match pol.as_str() {
                    "higher_is_better" => Polarity::HigherIsBetter,
                    "lower_is_better" => Polarity::LowerIsBetter,
                    _ => {
                        return Err(ParseError::new(
                            line,
                            toks.last_col(),
                            format!("unknown polarity `{pol}`"),
                            "`higher_is_better` or `lower_is_better`",
                        ))
                    }
                };
                Decl::QaType { id, polarity }
            }
            "function" => Decl::Function { id: ident_on(&mut toks, line, "function id")? },
            "design" => parse_design(&mut toks, line)?,
            "objective" => parse_objective(&mut toks, line)?,
            _ => {
                return Err(ParseError::new(
                    head.line,
                    head.col,
                    format!("unknown declaration `{kw}`"),
                    "`qa_type`, `function`, `design` or `objective`",
                ))
            }
        };
        declarations.push(Declaration { decl, line });
    }
    Ok(ModelDocument { declarations })
}

fn parse_design(toks: &mut Tokens, line: usize) -> Result<Decl, ParseError> {
    let id = ident_on(toks, line, "design id")?;
    keyword_on(toks, line, "solves")?;
    let solves = ident_on(toks, line, "function id")?;
    kind_on(toks, line, TokenKind::LBrace, "`{`")?;
    let mut qas = Vec::new();
    let mut config_ref: Option<String> = None;
    loop {
        if implicit_close(toks, MODEL_KEYWORDS) {
            break;
        }
        let t = toks.next().unwrap();
        match &t.kind {
            TokenKind::RBrace => break,
            TokenKind::Ident(s) if s == "qa" && config_ref.is_none() => {
                let item_line = t.line;
                let type_id = ident_on(toks, item_line, "QA type id")?;
                kind_on(toks, item_line, TokenKind::Eq, "`=`")?;
                let value = number_on(toks, item_line)?;
                qas.push((type_id, value));
            }
            TokenKind::Ident(s) if s == "config" => {
                if config_ref.is_some() {
                    return Err(ParseError::new(
                        t.line,
                        t.col,
                        "duplicate `config` entry".to_string(),
                        "`}`",
                    ));
                }
                config_ref = Some(string_on(toks, t.line)?);
            }
            other => {
                return Err(ParseError::new(
                    t.line,
                    t.col,
                    format!("found {}", other.describe()),
                    "`qa`, `config` or `}`",
                ))
            }
        }
    }
    // A missing config block defaults to the design's own id, which is the
    // conventional mapping anyway.
    let config_ref = config_ref.unwrap_or_else(|| id.clone());
    Ok(Decl::Design { id, solves, qas, config_ref })
}

fn parse_objective(toks: &mut Tokens, line: usize) -> Result<Decl, ParseError> {
    let id = ident_on(toks, line, "objective id")?;
    keyword_on(toks, line, "of")?;
    let of_function = ident_on(toks, line, "function id")?;
    kind_on(toks, line, TokenKind::LBrace, "`{`")?;
    let mut nfrs = Vec::new();
    loop {
        if implicit_close(toks, MODEL_KEYWORDS) {
            break;
        }
        let t = toks.next().unwrap();
        match &t.kind {
            TokenKind::RBrace => break,
            TokenKind::Ident(s) if s == "require" => {
                let item_line = t.line;
                let type_id = ident_on(toks, item_line, "QA type id")?;
                let cmp_tok = toks.expect_on(item_line, "`>=` or `<=`")?;
                let cmp = match cmp_tok.kind {
                    TokenKind::Ge => Cmp::Ge,
                    TokenKind::Le => Cmp::Le,
                    other => {
                        return Err(ParseError::new(
                            cmp_tok.line,
                            cmp_tok.col,
                            format!("found {}", other.describe()),
                            "`>=` or `<=`",
                        ))
                    }
                };
                let threshold = number_on(toks, item_line)?;
                nfrs.push((type_id, cmp, threshold));
            }
            other => {
                return Err(ParseError::new(
                    t.line,
                    t.col,
                    format!("found {}", other.describe()),
                    "`require` or `}`",
                ))
            }
        }
    }
    Ok(Decl::Objective { id, of_function, nfrs })
}

/// Comma-separated string list on one line, at least one entry.
fn string_list_on(toks: &mut Tokens, line: usize) -> Result<Vec<String>, ParseError> {
    let mut out = vec![string_on(toks, line)?];
    while let Some(t) = toks.peek() {
        if t.line != line || t.kind != TokenKind::Comma {
            break;
        }
        toks.next();
        out.push(string_on(toks, line)?);
    }
    Ok(out)
}

pub fn parse_metacontrol_config(source: &str) -> Result<MetacontrolConfig, ParseError> {
    let mut toks = Tokens::new(source)?;
    let mut cfg = MetacontrolConfig::default();
    let mut seen_save_goal = false;
    let mut seen_latency = false;
    while let Some(head) = toks.next() {
        let line = head.line;
        let kw = match &head.kind {
            TokenKind::Ident(s) => s.clone(),
            other => {
                return Err(ParseError::new(
                    head.line,
                    head.col,
                    format!("found {}", other.describe()),
                    "configuration keyword",
                ))
            }
        };
        match kw.as_str() {
            "configuration" => {
                let spec = parse_configuration(&mut toks, line)?;
                if cfg.configurations.contains_key(&spec.fd_id) {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        format!("duplicate configuration `{}`", spec.fd_id),
                        "unique configuration id",
                    ));
                }
                cfg.configurations.insert(spec.fd_id.clone(), spec);
            }
            "kill_components" => {
                if !cfg.kill_components.is_empty() {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        "duplicate `kill_components`".to_string(),
                        "single kill_components entry",
                    ));
                }
                cfg.kill_components = string_list_on(&mut toks, line)?;
            }
            "save_goal" => {
                if seen_save_goal {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        "duplicate `save_goal`".to_string(),
                        "single save_goal entry",
                    ));
                }
                seen_save_goal = true;
                let t = toks.expect_on(line, "`true` or `false`")?;
                cfg.save_goal = match t.kind {
                    TokenKind::True => true,
                    TokenKind::False => false,
                    other => {
                        return Err(ParseError::new(
                            t.line,
                            t.col,
                            format!("found {}", other.describe()),
                            "`true` or `false`",
                        ))
                    }
                };
            }
            "reconfig_latency_s" => {
                if seen_latency {
                    return Err(ParseError::new(
                        line,
                        head.col,
                        "duplicate `reconfig_latency_s`".to_string(),
                        "single reconfig_latency_s entry",
                    ));
                }
                seen_latency = true;
                cfg.reconfig_latency_s = number_on(&mut toks, line)?;
            }
            _ => {
                return Err(ParseError::new(
                    head.line,
                    head.col,
                    format!("unknown entry `{kw}`"),
                    "`configuration`, `kill_components`, `save_goal` or `reconfig_latency_s`",
                ))
            }
        }
    }
    Ok(cfg)
}

fn parse_configuration(toks: &mut Tokens, line: usize) -> Result<ConfigurationSpec, ParseError> {
    let fd_id = ident_on(toks, line, "configuration id")?;
    kind_on(toks, line, TokenKind::LBrace, "`{`")?;
    let mut params = BTreeMap::new();
    let mut restart_components = Vec::new();
    let close_line;
    loop {
        if implicit_close(toks, CONFIG_KEYWORDS) {
            close_line = toks.peek().map(|t| t.line).unwrap_or(line);
            break;
        }
        let t = toks.next().unwrap();
        match &t.kind {
            TokenKind::RBrace => {
                close_line = t.line;
                break;
            }
            TokenKind::Ident(s) if s == "param" => {
                let item_line = t.line;
                let name = ident_on(toks, item_line, "parameter name")?;
                kind_on(toks, item_line, TokenKind::Eq, "`=`")?;
                let value = number_on(toks, item_line)?;
                if params.insert(name.clone(), value).is_some() {
                    return Err(ParseError::new(
                        item_line,
                        t.col,
                        format!("duplicate param `{name}`"),
                        "unique parameter name",
                    ));
                }
            }
            TokenKind::Ident(s) if s == "restart" => {
                restart_components.extend(string_list_on(toks, t.line)?);
            }
            other => {
                return Err(ParseError::new(
                    t.line,
                    t.col,
                    format!("found {}", other.describe()),
                    "`param`, `restart` or `}`",
                ))
            }
        }
    }
    if params.is_empty() {
        return Err(ParseError::new(
            close_line,
            1,
            format!("configuration `{fd_id}` has no params"),
            "at least one `param`",
        ));
    }
    Ok(ConfigurationSpec { fd_id, params, restart_components })
}
