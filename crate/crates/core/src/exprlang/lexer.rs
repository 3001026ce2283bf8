use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'.' => {
                i = scan_number(bytes, i)?;
                let text = &src[start..i];
                let x: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    expected: "a decimal number".into(),
                })?;
                out.push(Token { tok: Tok::Num(x), offset: start });
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(src[start..i].to_string()), offset: start });
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => out.push(Token { tok: Tok::Op(c as char), offset: start }),
            b'(' => out.push(Token { tok: Tok::LParen, offset: start }),
            b')' => out.push(Token { tok: Tok::RParen, offset: start }),
            b',' => out.push(Token { tok: Tok::Comma, offset: start }),
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    expected: "number, identifier, operator or parenthesis".into(),
                })
            }
        }
        i += 1;
    }
    out.push(Token { tok: Tok::End, offset: src.len() });
    Ok(out)
}

fn scan_number(bytes: &[u8], mut i: usize) -> Result<usize> {
    let start = i;
    let digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i - s
    };
    let mut mantissa = digits(&mut i);
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        mantissa += digits(&mut i);
    }
    if mantissa == 0 {
        return Err(Error::Syntax { offset: start, expected: "digits".into() });
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if digits(&mut j) == 0 {
            return Err(Error::Syntax { offset: j, expected: "exponent digits".into() });
        }
        i = j;
    }
    Ok(i)
}
