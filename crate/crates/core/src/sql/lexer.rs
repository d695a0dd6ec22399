use super::{SqlError, SqlErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    /// Bare identifier or keyword; `upper` holds the upper-cased form.
    Word { text: String, upper: String },
    /// `"x"`, `` `x` `` or `[x]`; never a keyword.
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    /// Byte offset into the source.
    pub offset: usize,
}

const SYMBOLS: [&str; 18] = [
    "<>", "!=", "<=", ">=", "||", "==", ",", ".", "(", ")", "*", "+", "-", "/", "%", "=", "<", ">",
];

pub(crate) fn lex(src: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            match src[i + 2..].find("*/") {
                Some(end) => i += end + 4,
                None => return Err(SqlError::new(SqlErrorKind::Syntax, i, "unterminated comment")),
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$' || bytes[i] >= 0x80) {
                i += 1;
            }
            let text = src[start..i].to_string();
            out.push(Token {
                tok: Tok::Word {
                    upper: text.to_ascii_uppercase(),
                    text,
                },
                offset: start,
            });
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Number(src[start..i].to_string()),
                offset: start,
            });
        } else if c == b'\'' {
            let mut value = String::new();
            i += 1;
            loop {
                match src[i..].find('\'') {
                    None => return Err(SqlError::new(SqlErrorKind::Syntax, start, "unterminated string literal")),
                    Some(k) => {
                        value.push_str(&src[i..i + k]);
                        i += k + 1;
                        if bytes.get(i) == Some(&b'\'') {
                            value.push('\'');
                            i += 1;
                        } else {
                            break;
                        }
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(value),
                offset: start,
            });
        } else if c == b'"' || c == b'`' || c == b'[' {
            let close = if c == b'[' { ']' } else { c as char };
            match src[i + 1..].find(close) {
                None => return Err(SqlError::new(SqlErrorKind::Syntax, start, "unterminated quoted identifier")),
                Some(k) => {
                    out.push(Token {
                        tok: Tok::Quoted(src[i + 1..i + 1 + k].to_string()),
                        offset: start,
                    });
                    i += k + 2;
                }
            }
        } else if c == b';' {
            // A trailing statement terminator is allowed; anything after it is not.
            if src[i + 1..].trim().is_empty() {
                i = bytes.len();
            } else {
                return Err(SqlError::new(SqlErrorKind::Unsupported, i, "multiple statements"));
            }
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push(Token {
                tok: Tok::Sym(sym),
                offset: start,
            });
            i += sym.len();
        } else {
            let ch = src[i..].chars().next().unwrap();
            return Err(SqlError::new(SqlErrorKind::Syntax, start, format!("unexpected character `{ch}`")));
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}
