//! Tokenizer shared by the PRISM and property parsers.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(String),
    Real(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(s) | TokenKind::Real(s) => write!(f, "number `{s}`"),
            TokenKind::Str(s) => write!(f, "string \"{s}\""),
            TokenKind::Sym(s) => write!(f, "`{s}`"),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: unexpected character `{found}`")]
pub struct LexError {
    pub line: usize,
    pub column: usize,
    pub found: char,
}

// longest first so that greedy matching works
const SYMBOLS: &[&str] = &[
    "<=>", "=?", "->", "=>", "<=", ">=", "!=", "..", "(", ")", "[", "]", "{", "}", ";", ":",
    ",", "'", "=", "<", ">", "+", "-", "*", "/", "&", "|", "!", "?",
];

/// Splits `input` into tokens; `//` starts a comment running to end of line.
/// The returned vector always ends with an [`TokenKind::Eof`] token.
pub fn tokenize(input: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = input.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, column);
        let push = |tokens: &mut Vec<Token>, kind| {
            tokens.push(Token {
                kind,
                line: start.0,
                column: start.1,
            })
        };
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - begin;
            push(&mut tokens, TokenKind::Ident(chars[begin..i].iter().collect()));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let begin = i;
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            column += i - begin;
            push(
                &mut tokens,
                if real { TokenKind::Real(text) } else { TokenKind::Int(text) },
            );
            continue;
        }
        if c == '"' {
            let begin = i + 1;
            let mut j = begin;
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(LexError {
                    line,
                    column,
                    found: '"',
                });
            }
            let text: String = chars[begin..j].iter().collect();
            column += j + 1 - i;
            i = j + 1;
            push(&mut tokens, TokenKind::Str(text));
            continue;
        }
        let rest: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                column += sym.len();
                push(&mut tokens, TokenKind::Sym(sym));
            }
            None => {
                return Err(LexError {
                    line,
                    column,
                    found: c,
                })
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        column,
    });
    Ok(tokens)
}
