use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Int(i64),
    Ident(String),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

const KEYWORDS: [&str; 14] = [
    "int", "void", "if", "else", "while", "for", "switch", "case", "default", "goto", "break",
    "continue", "return", "do",
];

// Longest first so that greedy matching works.
const PUNCTS: [&str; 33] = [
    "&&", "||", "==", "!=", "<=", ">=", "++", "--", "+=", "-=", "*=", "/=", "->", "+", "-", "*",
    "/", "%", "<", ">", "=", "!", "&", "(", ")", "{", "}", ";", ",", ":", "[", "]", "?",
];

/// `//@` annotations as `(line, text)`.
pub type Annotations = Vec<(u32, String)>;

/// Tokens plus the annotations found along the way.
pub fn tokenize(src: &str, file: &str) -> Result<(Vec<Token>, Annotations), FrontendError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut annotations = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;

    let err = |line: u32, col: u32, msg: String| FrontendError::Parse {
        file: file.to_string(),
        line,
        col,
        msg,
    };

    while i < bytes.len() {
        let c = bytes[i];
        let col = (i - line_start + 1) as u32;
        if c == b'\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            let end = src[i..].find('\n').map(|o| i + o).unwrap_or(bytes.len());
            let body = &src[i + 2..end];
            if let Some(rest) = body.strip_prefix('@') {
                annotations.push((line, rest.trim().to_string()));
            }
            i = end;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let Some(off) = src[i + 2..].find("*/") else {
                return Err(err(line, col, "unterminated block comment".into()));
            };
            let end = i + 2 + off + 2;
            for (k, b) in bytes[i..end].iter().enumerate() {
                if *b == b'\n' {
                    line += 1;
                    line_start = i + k + 1;
                }
            }
            i = end;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let v: i64 = text
                .parse()
                .map_err(|_| err(line, col, format!("integer literal `{text}` out of range")))?;
            toks.push(Token {
                tok: Tok::Int(v),
                line,
                col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word.to_string()),
            };
            toks.push(Token { tok, line, col });
            continue;
        }
        match PUNCTS.iter().find(|p| src[i..].starts_with(**p)) {
            Some(p) => {
                toks.push(Token {
                    tok: Tok::Punct(p),
                    line,
                    col,
                });
                i += p.len();
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(err(line, col, format!("unexpected character `{ch}`")));
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col: (i - line_start + 1) as u32,
    });
    Ok((toks, annotations))
}
