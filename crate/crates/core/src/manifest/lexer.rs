//! Line-oriented lexer for the manifest DSL. `#` starts a comment.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Eq,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    macro_rules! push {
        ($t:expr) => {
            out.push(Spanned {
                tok: $t,
                line,
                col,
            })
        };
    }
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '{' => {
                push!(Tok::LBrace);
                chars.next();
                col += 1;
            }
            '}' => {
                push!(Tok::RBrace);
                chars.next();
                col += 1;
            }
            '[' => {
                push!(Tok::LBracket);
                chars.next();
                col += 1;
            }
            ']' => {
                push!(Tok::RBracket);
                chars.next();
                col += 1;
            }
            '(' => {
                push!(Tok::LParen);
                chars.next();
                col += 1;
            }
            ')' => {
                push!(Tok::RParen);
                chars.next();
                col += 1;
            }
            ':' => {
                push!(Tok::Colon);
                chars.next();
                col += 1;
            }
            ';' => {
                push!(Tok::Semi);
                chars.next();
                col += 1;
            }
            ',' => {
                push!(Tok::Comma);
                chars.next();
                col += 1;
            }
            '=' => {
                push!(Tok::Eq);
                chars.next();
                col += 1;
            }
            '+' => {
                push!(Tok::Plus);
                chars.next();
                col += 1;
            }
            '*' => {
                push!(Tok::Star);
                chars.next();
                col += 1;
            }
            '/' => {
                push!(Tok::Slash);
                chars.next();
                col += 1;
            }
            '^' => {
                push!(Tok::Caret);
                chars.next();
                col += 1;
            }
            '-' => {
                chars.next();
                if chars.peek() == Some(&'>') {
                    push!(Tok::Arrow);
                    chars.next();
                    col += 2;
                } else {
                    push!(Tok::Minus);
                    col += 1;
                }
            }
            c if c.is_ascii_digit() => {
                let start_col = col;
                let mut n = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_digit() {
                        n.push(c2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let v = n.parse::<i64>().map_err(|_| Error::Parse {
                    line,
                    col: start_col,
                    msg: format!("integer literal `{n}` out of range"),
                    expected: "a smaller integer".into(),
                })?;
                out.push(Spanned {
                    tok: Tok::Int(v),
                    line,
                    col: start_col,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start_col = col;
                let mut s = String::new();
                while let Some(&c2) = chars.peek() {
                    if c2.is_ascii_alphanumeric() || c2 == '_' || c2 == '\'' {
                        s.push(c2);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Tok::Ident(s),
                    line,
                    col: start_col,
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                    expected: "a token".into(),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
