use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{ParseDiagnostic, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Lt,
    Gt,
    Bang,
    Quest,
    Dot,
    Comma,
    Colon,
    Semi,
    Bar,
    Eq,
    Plus,
    At,
    Underscore,
    SelOp,
    BrnOp,
    Choice,
    AndAnd,
    OrOr,
    EqEq,
    PlusPlus,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            t => format!("`{}`", t.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Bang => "!",
            Tok::Quest => "?",
            Tok::Dot => ".",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Bar => "|",
            Tok::Eq => "=",
            Tok::Plus => "+",
            Tok::At => "@",
            Tok::Underscore => "_",
            Tok::SelOp => "<+",
            Tok::BrnOp => ">+",
            Tok::Choice => "(+)",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::EqEq => "==",
            Tok::PlusPlus => "++",
            Tok::Ident(_) | Tok::Int(_) | Tok::Str(_) => "",
        }
    }
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseDiagnostic> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if bytes[i..].starts_with(b"//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if bytes[i..].starts_with(b"/*") {
            match src[i + 2..].find("*/") {
                Some(end) => i += end + 4,
                None => return Err(ParseDiagnostic::error(start..src.len(), "unterminated block comment")),
            }
            continue;
        }
        let three = &bytes[i..bytes.len().min(i + 3)];
        let two = &bytes[i..bytes.len().min(i + 2)];
        let (tok, len) = if three == b"(+)" {
            (Tok::Choice, 3)
        } else if two == b"<+" {
            (Tok::SelOp, 2)
        } else if two == b">+" {
            (Tok::BrnOp, 2)
        } else if two == b"&&" {
            (Tok::AndAnd, 2)
        } else if two == b"||" {
            (Tok::OrOr, 2)
        } else if two == b"==" {
            (Tok::EqEq, 2)
        } else if two == b"++" {
            (Tok::PlusPlus, 2)
        } else {
            match c {
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b'{' => (Tok::LBrace, 1),
                b'}' => (Tok::RBrace, 1),
                b'[' => (Tok::LBrack, 1),
                b']' => (Tok::RBrack, 1),
                b'<' => (Tok::Lt, 1),
                b'>' => (Tok::Gt, 1),
                b'!' => (Tok::Bang, 1),
                b'?' => (Tok::Quest, 1),
                b'.' => (Tok::Dot, 1),
                b',' => (Tok::Comma, 1),
                b':' => (Tok::Colon, 1),
                b';' => (Tok::Semi, 1),
                b'|' => (Tok::Bar, 1),
                b'=' => (Tok::Eq, 1),
                b'+' => (Tok::Plus, 1),
                b'@' => (Tok::At, 1),
                b'"' => {
                    let (s, len) = lex_string(src, i)?;
                    (Tok::Str(s), len)
                }
                b'-' | b'0'..=b'9' => {
                    let mut j = i + 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if c == b'-' && j == i + 1 {
                        return Err(ParseDiagnostic::error(i..i + 1, "unexpected `-`"));
                    }
                    let n = src[i..j]
                        .parse::<i64>()
                        .map_err(|_| ParseDiagnostic::error(i..j, "integer literal out of range"))?;
                    (Tok::Int(n), j - i)
                }
                b'_' if !bytes.get(i + 1).is_some_and(|b| is_ident_byte(*b)) => (Tok::Underscore, 1),
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let mut j = i + 1;
                    while j < bytes.len() && is_ident_byte(bytes[j]) {
                        j += 1;
                    }
                    (Tok::Ident(String::from(&src[i..j])), j - i)
                }
                _ => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(ParseDiagnostic::error(i..i + ch.len_utf8(), format!("unexpected character {ch:?}")));
                }
            }
        };
        out.push((tok, start..start + len));
        i += len;
    }
    Ok(out)
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'\''
}

fn lex_string(src: &str, start: usize) -> Result<(String, usize), ParseDiagnostic> {
    let mut out = String::new();
    let mut chars = src[start + 1..].char_indices();
    while let Some((k, ch)) = chars.next() {
        match ch {
            '"' => return Ok((out, k + 2)),
            '\\' => match chars.next() {
                Some((_, 'n')) => out.push('\n'),
                Some((_, 't')) => out.push('\t'),
                Some((_, '"')) => out.push('"'),
                Some((_, '\\')) => out.push('\\'),
                Some((j, c)) => {
                    let at = start + 1 + j;
                    return Err(ParseDiagnostic::error(at..at + c.len_utf8(), format!("unknown escape `\\{c}`")));
                }
                None => break,
            },
            c => out.push(c),
        }
    }
    Err(ParseDiagnostic::error(start..src.len(), "unterminated string literal"))
}
