use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::span::SourceSpan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    IntLiteral,
    RealLiteral,
    TimeLiteral,
    StringLiteral,
    BoolLiteral,
    Operator,
    Punctuation,
    Comment,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source slice, original casing preserved.
    pub text: String,
    pub span: SourceSpan,
    /// Byte offset of the token's first character.
    pub offset: usize,
}

impl Token {
    /// Case-insensitive keyword test.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text.eq_ignore_ascii_case(kw)
    }

    pub fn is_op(&self, op: &str) -> bool {
        matches!(self.kind, TokenKind::Operator | TokenKind::Punctuation) && self.text == op
    }

    pub fn end_offset(&self) -> usize {
        self.offset + self.text.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("{span}: unterminated string literal")]
    UnterminatedString { span: SourceSpan },
    #[error("{span}: unterminated block comment")]
    UnterminatedComment { span: SourceSpan },
    #[error("{span}: illegal character {ch:?}")]
    IllegalCharacter { ch: char, span: SourceSpan },
    #[error("{span}: malformed literal `{text}`")]
    MalformedLiteral { text: String, span: SourceSpan },
}

impl LexError {
    pub fn span(&self) -> SourceSpan {
        match self {
            LexError::UnterminatedString { span }
            | LexError::UnterminatedComment { span }
            | LexError::IllegalCharacter { span, .. }
            | LexError::MalformedLiteral { span, .. } => *span,
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "PROGRAM",
    "END_PROGRAM",
    "FUNCTION",
    "END_FUNCTION",
    "FUNCTION_BLOCK",
    "END_FUNCTION_BLOCK",
    "VAR",
    "VAR_INPUT",
    "VAR_OUTPUT",
    "VAR_IN_OUT",
    "VAR_EXTERNAL",
    "VAR_CONSTANT",
    "CONSTANT",
    "END_VAR",
    "ARRAY",
    "OF",
    "IF",
    "THEN",
    "ELSIF",
    "ELSE",
    "END_IF",
    "CASE",
    "END_CASE",
    "FOR",
    "TO",
    "BY",
    "DO",
    "END_FOR",
    "WHILE",
    "END_WHILE",
    "REPEAT",
    "UNTIL",
    "END_REPEAT",
    "EXIT",
    "RETURN",
    "AND",
    "OR",
    "XOR",
    "NOT",
    "MOD",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(word))
}

/// Legal identifier shape: letter or underscore first, then letters, digits,
/// underscores.
pub fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !is_keyword(word)
}

const OPERATORS: &[&str] = &[
    ":=", "=>", "<=", ">=", "<>", "**", "+", "-", "*", "/", "=", "<", ">", "&",
];
const PUNCTUATION: &[&str] = &["..", ";", ":", ",", "(", ")", "[", "]", "."];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, pred: impl Fn(char) -> bool) {
        while matches!(self.peek(), Some(c) if pred(c)) {
            self.bump();
        }
    }

    fn here(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    fn span_from(&self, start: (usize, u32, u32)) -> SourceSpan {
        SourceSpan::new(start.1, start.2, self.line, self.col)
    }
}

/// Splits ST source into tokens, comments included.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        let start = cur.here();
        let kind = if c == '(' && cur.peek_at(1) == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match cur.peek() {
                    None => {
                        return Err(LexError::UnterminatedComment {
                            span: cur.span_from(start),
                        })
                    }
                    Some('*') if cur.peek_at(1) == Some(')') => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            TokenKind::Comment
        } else if c == '/' && cur.peek_at(1) == Some('/') {
            cur.bump_while(|c| c != '\n' && c != '\r');
            TokenKind::Comment
        } else if c == '\'' {
            cur.bump();
            loop {
                match cur.bump() {
                    None => {
                        return Err(LexError::UnterminatedString {
                            span: cur.span_from(start),
                        })
                    }
                    Some('$') => {
                        if cur.bump().is_none() {
                            return Err(LexError::UnterminatedString {
                                span: cur.span_from(start),
                            });
                        }
                    }
                    Some('\'') => break,
                    Some(_) => {}
                }
            }
            TokenKind::StringLiteral
        } else if c.is_ascii_alphabetic() || c == '_' {
            cur.bump_while(|c| c.is_ascii_alphanumeric() || c == '_');
            let word = &source[start.0..cur.pos];
            if cur.peek() == Some('#') && (word.eq_ignore_ascii_case("T") || word.eq_ignore_ascii_case("TIME")) {
                cur.bump();
                cur.bump_while(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
                let text = &source[start.0..cur.pos];
                if parse_time_ms(text).is_none() {
                    return Err(LexError::MalformedLiteral {
                        text: text.to_string(),
                        span: cur.span_from(start),
                    });
                }
                TokenKind::TimeLiteral
            } else if word.eq_ignore_ascii_case("TRUE") || word.eq_ignore_ascii_case("FALSE") {
                TokenKind::BoolLiteral
            } else if is_keyword(word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c.is_ascii_digit() {
            lex_number(&mut cur, start)?
        } else if let Some(op) = match_prefix(cur.rest(), OPERATORS, PUNCTUATION) {
            let kind = if OPERATORS.contains(&op) {
                TokenKind::Operator
            } else {
                TokenKind::Punctuation
            };
            for _ in 0..op.chars().count() {
                cur.bump();
            }
            kind
        } else {
            cur.bump();
            return Err(LexError::IllegalCharacter {
                ch: c,
                span: cur.span_from(start),
            });
        };
        tokens.push(Token {
            kind,
            text: source[start.0..cur.pos].to_string(),
            span: cur.span_from(start),
            offset: start.0,
        });
    }
    Ok(tokens)
}

fn match_prefix(rest: &str, ops: &[&'static str], punct: &[&'static str]) -> Option<&'static str> {
    // Longest match wins; `..` must beat `.`, `:=` must beat `:`.
    ops.iter()
        .chain(punct.iter())
        .filter(|p| rest.starts_with(**p))
        .max_by_key(|p| p.len())
        .copied()
}

fn lex_number(cur: &mut Cursor<'_>, start: (usize, u32, u32)) -> Result<TokenKind, LexError> {
    cur.bump_while(|c| c.is_ascii_digit() || c == '_');
    let digits = &cur.src[start.0..cur.pos];
    if cur.peek() == Some('#') {
        let radix = match digits {
            "2" => 2,
            "8" => 8,
            "16" => 16,
            _ => {
                cur.bump();
                return Err(LexError::MalformedLiteral {
                    text: cur.src[start.0..cur.pos].to_string(),
                    span: cur.span_from(start),
                });
            }
        };
        cur.bump();
        cur.bump_while(|c| c.is_ascii_alphanumeric() || c == '_');
        let text = &cur.src[start.0..cur.pos];
        let body: String = text[digits.len() + 1..].chars().filter(|c| *c != '_').collect();
        if body.is_empty() || i64::from_str_radix(&body, radix).is_err() {
            return Err(LexError::MalformedLiteral {
                text: text.to_string(),
                span: cur.span_from(start),
            });
        }
        return Ok(TokenKind::IntLiteral);
    }
    let mut kind = TokenKind::IntLiteral;
    if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(c) if c.is_ascii_digit()) {
        cur.bump();
        cur.bump_while(|c| c.is_ascii_digit() || c == '_');
        kind = TokenKind::RealLiteral;
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = matches!(cur.peek_at(1), Some('+' | '-'));
        let digit_at = if sign { 2 } else { 1 };
        if matches!(cur.peek_at(digit_at), Some(c) if c.is_ascii_digit()) {
            for _ in 0..digit_at {
                cur.bump();
            }
            cur.bump_while(|c| c.is_ascii_digit());
            kind = TokenKind::RealLiteral;
        }
    }
    Ok(kind)
}

/// Parses a `T#...` / `TIME#...` literal into milliseconds. Components are
/// `d`, `h`, `m`, `s`, `ms`, each optionally fractional, in any combination.
pub fn parse_time_ms(text: &str) -> Option<f64> {
    let (_, body) = text.split_once('#')?;
    let body: String = body
        .chars()
        .filter(|c| *c != '_')
        .collect::<String>()
        .to_ascii_lowercase();
    if body.is_empty() {
        return None;
    }
    let bytes = body.as_bytes();
    let mut i = 0;
    let mut total = 0.0;
    while i < bytes.len() {
        let num_start = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        let value: f64 = body[num_start..i].parse().ok()?;
        let unit_start = i;
        while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
            i += 1;
        }
        let factor = match &body[unit_start..i] {
            "d" => 86_400_000.0,
            "h" => 3_600_000.0,
            "m" => 60_000.0,
            "s" => 1_000.0,
            "ms" => 1.0,
            _ => return None,
        };
        total += value * factor;
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
    }

    #[test]
    fn smallest_statement() {
        assert_eq!(
            kinds("x := 1;"),
            vec![
                (TokenKind::Identifier, "x".into()),
                (TokenKind::Operator, ":=".into()),
                (TokenKind::IntLiteral, "1".into()),
                (TokenKind::Punctuation, ";".into()),
            ]
        );
    }

    #[test]
    fn comment_then_if() {
        assert_eq!(
            kinds("(* note *) IF b THEN"),
            vec![
                (TokenKind::Comment, "(* note *)".into()),
                (TokenKind::Keyword, "IF".into()),
                (TokenKind::Identifier, "b".into()),
                (TokenKind::Keyword, "THEN".into()),
            ]
        );
    }

    #[test]
    fn keywords_keep_casing() {
        let toks = tokenize("end_if").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Keyword);
        assert_eq!(toks[0].text, "end_if");
        assert!(toks[0].is_keyword("END_IF"));
    }

    #[test]
    fn literals() {
        assert_eq!(
            kinds("16#FF 1.5 2.0E3 T#5s TIME#1h2m30s500ms 'a$'b' TRUE 1..10"),
            vec![
                (TokenKind::IntLiteral, "16#FF".into()),
                (TokenKind::RealLiteral, "1.5".into()),
                (TokenKind::RealLiteral, "2.0E3".into()),
                (TokenKind::TimeLiteral, "T#5s".into()),
                (TokenKind::TimeLiteral, "TIME#1h2m30s500ms".into()),
                (TokenKind::StringLiteral, "'a$'b'".into()),
                (TokenKind::BoolLiteral, "TRUE".into()),
                (TokenKind::IntLiteral, "1".into()),
                (TokenKind::Punctuation, "..".into()),
                (TokenKind::IntLiteral, "10".into()),
            ]
        );
    }

    #[test]
    fn time_values() {
        assert_eq!(parse_time_ms("T#5s"), Some(5_000.0));
        assert_eq!(parse_time_ms("T#100ms"), Some(100.0));
        assert_eq!(parse_time_ms("TIME#1h2m30s500ms"), Some(3_750_500.0));
        assert_eq!(parse_time_ms("T#1.5s"), Some(1_500.0));
        assert_eq!(parse_time_ms("T#5x"), None);
        assert_eq!(parse_time_ms("T#"), None);
    }

    #[test]
    fn line_comment_and_spans() {
        let toks = tokenize("a // tail\n  b").unwrap();
        assert_eq!(toks[1].kind, TokenKind::Comment);
        assert_eq!(toks[2].span, SourceSpan::new(2, 3, 2, 4));
    }

    #[test]
    fn errors_carry_spans() {
        assert!(matches!(
            tokenize("x := 'abc"),
            Err(LexError::UnterminatedString { span }) if span.start() == (1, 6)
        ));
        assert!(matches!(tokenize("(* open"), Err(LexError::UnterminatedComment { .. })));
        assert!(matches!(
            tokenize("x := 1 ? 2;"),
            Err(LexError::IllegalCharacter { ch: '?', span }) if span == SourceSpan::new(1, 8, 1, 9)
        ));
    }

    #[test]
    fn nested_block_comment_closes_early() {
        // The first `*)` closes the comment; the remainder lexes as code.
        let toks = kinds("(* a (* b *) c *)");
        assert_eq!(toks[0], (TokenKind::Comment, "(* a (* b *)".into()));
        assert_eq!(toks[1], (TokenKind::Identifier, "c".into()));
    }
}
