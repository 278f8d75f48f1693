//! Line-oriented tokenizer with Python-style indentation tokens.

use super::{ParseError, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Assign,
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(v) => format!("number {v}"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indentation".into(),
            Tok::Dedent => "end of block".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out: Vec<Token> = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut depth = 0usize;
    let mut last_line = 1u32;

    for (lineno, line) in src.lines().enumerate() {
        let line_no = lineno as u32 + 1;
        last_line = line_no;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;

        if depth == 0 {
            let mut width = 0;
            while i < chars.len() && (chars[i] == ' ' || chars[i] == '\t') {
                width = if chars[i] == '\t' { (width / 8 + 1) * 8 } else { width + 1 };
                i += 1;
            }
            if i == chars.len() || chars[i] == '#' {
                continue;
            }
            let span = Span::new(line_no, i as u32 + 1);
            let current = *indents.last().unwrap();
            if width > current {
                indents.push(width);
                out.push(Token { tok: Tok::Indent, span });
            } else {
                while width < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Token { tok: Tok::Dedent, span });
                }
                if width != *indents.last().unwrap() {
                    return Err(ParseError::new(span, "inconsistent indentation"));
                }
            }
        }

        while i < chars.len() {
            let c = chars[i];
            let span = Span::new(line_no, i as u32 + 1);
            if c == ' ' || c == '\t' || c == '\r' {
                i += 1;
                continue;
            }
            if c == '#' {
                break;
            }
            let simple = match c {
                '+' => Some(Tok::Plus),
                '-' => Some(Tok::Minus),
                '*' => Some(Tok::Star),
                '/' => Some(Tok::Slash),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                ':' => Some(Tok::Colon),
                ';' => Some(Tok::Semi),
                '=' => Some(Tok::Assign),
                _ => None,
            };
            if let Some(tok) = simple {
                match tok {
                    Tok::LParen | Tok::LBracket => depth += 1,
                    Tok::RParen | Tok::RBracket => {
                        depth = depth
                            .checked_sub(1)
                            .ok_or_else(|| ParseError::new(span, "unbalanced closing bracket"))?
                    }
                    _ => {}
                }
                out.push(Token { tok, span });
                i += 1;
                continue;
            }
            if c == '"' || c == '\'' {
                let quote = c;
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != quote {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(ParseError::new(span, "unterminated string literal"));
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Str(text),
                    span,
                });
                i += 1;
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let (value, next) = lex_number(&chars, i, span)?;
                out.push(Token {
                    tok: Tok::Number(value),
                    span,
                });
                i = next;
                // `2X` reads as `2 * X`
                if chars.get(i).is_some_and(|&d| is_ident_start(d)) {
                    out.push(Token {
                        tok: Tok::Star,
                        span: Span::new(line_no, i as u32 + 1),
                    });
                }
                continue;
            }
            if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    span,
                });
                continue;
            }
            return Err(ParseError::new(span, format!("unexpected character `{c}`")));
        }

        if depth == 0 && out.last().is_some_and(|t| t.tok != Tok::Newline) {
            out.push(Token {
                tok: Tok::Newline,
                span: Span::new(line_no, chars.len() as u32 + 1),
            });
        }
    }

    let end = Span::new(last_line + 1, 1);
    if depth != 0 {
        return Err(ParseError::new(end, "unclosed bracket at end of input"));
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { tok: Tok::Dedent, span: end });
    }
    out.push(Token { tok: Tok::Eof, span: end });
    Ok(out)
}

fn lex_number(chars: &[char], mut i: usize, span: Span) -> Result<(f64, usize), ParseError> {
    let mut text = String::new();
    let digits = |i: &mut usize, text: &mut String| {
        while *i < chars.len() && (chars[*i].is_ascii_digit() || chars[*i] == '_') {
            if chars[*i] != '_' {
                text.push(chars[*i]);
            }
            *i += 1;
        }
    };
    digits(&mut i, &mut text);
    if i < chars.len() && chars[i] == '.' {
        text.push('.');
        i += 1;
        digits(&mut i, &mut text);
    }
    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
        let mut j = i + 1;
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            text.push('e');
            text.extend(&chars[i + 1..j]);
            i = j;
            digits(&mut i, &mut text);
        }
    }
    text.parse::<f64>()
        .map(|v| (v, i))
        .map_err(|_| ParseError::new(span, format!("malformed number `{text}`")))
}
