//! Tokenizer for the model and metacontrol-config files.
//!
//! Tokenized line by line so every lexical error carries the line it
//! occurred on. `#` starts a comment to end of line (outside strings).

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    Eq,
    Comma,
    Ge,
    Le,
    True,
    False,
}

impl TokenKind {
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Number(n) => format!("number `{n}`"),
            TokenKind::Str(s) => format!("string \"{s}\""),
            TokenKind::LBrace => "`{`".into(),
            TokenKind::RBrace => "`}`".into(),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Comma => "`,`".into(),
            TokenKind::Ge => "`>=`".into(),
            TokenKind::Le => "`<=`".into(),
            TokenKind::True => "`true`".into(),
            TokenKind::False => "`false`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based.
    pub line: usize,
    /// 1-based column of the first character.
    pub col: usize,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    for (line_idx, line) in source.lines().enumerate() {
        let line_no = line_idx + 1;
        tokenize_line(line, line_no, &mut tokens)?;
    }
    Ok(tokens)
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn tokenize_line(line: &str, line_no: usize, out: &mut Vec<Token>) -> Result<(), ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '#' => break, // comment to end of line
            '{' => {
                out.push(Token { kind: TokenKind::LBrace, line: line_no, col });
                i += 1;
            }
            '}' => {
                out.push(Token { kind: TokenKind::RBrace, line: line_no, col });
                i += 1;
            }
            '=' => {
                out.push(Token { kind: TokenKind::Eq, line: line_no, col });
                i += 1;
            }
            ',' => {
                out.push(Token { kind: TokenKind::Comma, line: line_no, col });
                i += 1;
            }
            '>' | '<' => {
                if chars.get(i + 1) != Some(&'=') {
                    return Err(ParseError::new(
                        line_no,
                        col,
                        format!("stray `{c}`"),
                        if c == '>' { ">=" } else { "<=" },
                    ));
                }
                let kind = if c == '>' { TokenKind::Ge } else { TokenKind::Le };
                out.push(Token { kind, line: line_no, col });
                i += 2;
            }
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(ParseError::new(
                        line_no,
                        col,
                        "unterminated string".to_string(),
                        "closing `\"`",
                    ));
                }
                let s: String = chars[start..j].iter().collect();
                out.push(Token { kind: TokenKind::Str(s), line: line_no, col });
                i = j + 1;
            }
            _ if c.is_ascii_digit() || c == '-' => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && is_word_char(chars[j]) {
                    j += 1;
                }
                let word: String = chars[start..j].iter().collect();
                let value: f64 = word.parse().map_err(|_| {
                    ParseError::new(line_no, col, format!("malformed number `{word}`"), "number")
                })?;
                if !value.is_finite() {
                    return Err(ParseError::new(
                        line_no,
                        col,
                        format!("non-finite number `{word}`"),
                        "finite number",
                    ));
                }
                out.push(Token { kind: TokenKind::Number(value), line: line_no, col });
                i = j;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && is_word_char(chars[j]) {
                    j += 1;
                }
                let word: String = chars[start..j].iter().collect();
                let kind = match word.as_str() {
                    "true" => TokenKind::True,
                    "false" => TokenKind::False,
                    _ => {
                        if word.contains('.') {
                            return Err(ParseError::new(
                                line_no,
                                col,
                                format!("`.` not allowed in identifier `{word}`"),
                                "identifier",
                            ));
                        }
                        TokenKind::Ident(word)
                    }
                };
                out.push(Token { kind, line: line_no, col });
                i = j;
            }
            _ => {
                return Err(ParseError::new(
                    line_no,
                    col,
                    format!("unexpected character `{c}`"),
                    "declaration",
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_tokens_with_positions() {
        let toks = tokenize("qa_type safety higher_is_better\ndesign x { }").unwrap();
        assert_eq!(toks.len(), 7);
        assert_eq!(toks[0].kind, TokenKind::Ident("qa_type".into()));
        assert_eq!((toks[3].line, toks[3].col), (2, 1));
    }

    #[test]
    fn comments_and_strings() {
        let toks = tokenize("config \"fd # not a comment\" # trailing").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[1].kind, TokenKind::Str("fd # not a comment".into()));
    }

    #[test]
    fn unterminated_string_reports_line() {
        let err = tokenize("function f\nconfig \"oops").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn malformed_number() {
        let err = tokenize("qa x = 0.7.2").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("malformed number"));
    }
}
