use super::CalcError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// Body of an f-string with escapes already processed.
    FStr(String),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
}

const OPS: &[&str] = &[
    "**=", "//=", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "->", "+", "-",
    "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", ",", ":", "{", "}", ".", ";", "@", "&", "|",
    "^", "~",
];

fn syntax(line: usize, msg: impl Into<String>) -> CalcError {
    CalcError::Syntax {
        line,
        message: msg.into(),
    }
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, CalcError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out: Vec<Token> = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut depth = 0usize;
    let mut line = 1;
    let mut i = 0;
    let mut at_line_start = true;

    while i < chars.len() {
        if at_line_start && depth == 0 {
            let mut width = 0;
            let mut j = i;
            while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
                width += if chars[j] == '\t' { 4 } else { 1 };
                j += 1;
            }
            // Blank and comment-only lines do not affect indentation.
            if j >= chars.len() || chars[j] == '\n' || chars[j] == '#' || chars[j] == '\r' {
                while j < chars.len() && chars[j] != '\n' {
                    j += 1;
                }
                i = j + 1;
                line += 1;
                continue;
            }
            let current = *indents.last().expect("indent stack is never empty");
            if width > current {
                indents.push(width);
                out.push(Token {
                    tok: Tok::Indent,
                    line,
                });
            } else {
                while width < *indents.last().expect("indent stack is never empty") {
                    indents.pop();
                    out.push(Token {
                        tok: Tok::Dedent,
                        line,
                    });
                }
                if width != *indents.last().expect("indent stack is never empty") {
                    return Err(syntax(line, "inconsistent indentation"));
                }
            }
            i = j;
            at_line_start = false;
            continue;
        }
        let c = chars[i];
        match c {
            '\n' => {
                if depth == 0 {
                    out.push(Token {
                        tok: Tok::Newline,
                        line,
                    });
                    at_line_start = true;
                }
                line += 1;
                i += 1;
            }
            ' ' | '\t' | '\r' => i += 1,
            '\\' if chars.get(i + 1) == Some(&'\n') => {
                line += 1;
                i += 2;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '0'..='9' => {
                let (tok, next) = number(&chars, i, line)?;
                out.push(Token { tok, line });
                i = next;
            }
            '.' if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                let (tok, next) = number(&chars, i, line)?;
                out.push(Token { tok, line });
                i = next;
            }
            '"' | '\'' => {
                let (s, next) = string(&chars, i, line)?;
                out.push(Token {
                    tok: Tok::Str(s),
                    line,
                });
                i = next;
            }
            'f' | 'F' if matches!(chars.get(i + 1), Some('"') | Some('\'')) => {
                let (s, next) = string(&chars, i + 1, line)?;
                out.push(Token {
                    tok: Tok::FStr(s),
                    line,
                });
                i = next;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Name(chars[start..i].iter().collect()),
                    line,
                });
            }
            _ => {
                let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
                let Some(op) = OPS.iter().find(|op| rest.starts_with(**op)) else {
                    return Err(syntax(line, format!("unexpected character `{c}`")));
                };
                match *op {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => {
                        depth = depth
                            .checked_sub(1)
                            .ok_or_else(|| syntax(line, format!("unmatched `{op}`")))?
                    }
                    _ => {}
                }
                out.push(Token {
                    tok: Tok::Op(op),
                    line,
                });
                i += op.len();
            }
        }
    }
    if depth != 0 {
        return Err(syntax(line, "unclosed bracket"));
    }
    if !matches!(
        out.last(),
        None | Some(Token {
            tok: Tok::Newline,
            ..
        })
    ) {
        out.push(Token {
            tok: Tok::Newline,
            line,
        });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token {
            tok: Tok::Dedent,
            line,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
    });
    Ok(out)
}

fn number(chars: &[char], start: usize, line: usize) -> Result<(Tok, usize), CalcError> {
    let mut i = start;
    let mut is_float = false;
    let digits = |i: &mut usize| {
        while *i < chars.len() && (chars[*i].is_ascii_digit() || chars[*i] == '_') {
            *i += 1;
        }
    };
    digits(&mut i);
    if chars.get(i) == Some(&'.') {
        is_float = true;
        i += 1;
        digits(&mut i);
    }
    if matches!(chars.get(i), Some('e') | Some('E')) {
        let mut j = i + 1;
        if matches!(chars.get(j), Some('+') | Some('-')) {
            j += 1;
        }
        if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            i = j;
            digits(&mut i);
        }
    }
    let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
    if chars
        .get(i)
        .is_some_and(|c| c.is_alphanumeric() || *c == '_')
    {
        return Err(syntax(
            line,
            format!("invalid number literal `{text}{}`", chars[i]),
        ));
    }
    if is_float {
        let v: f64 = text
            .parse()
            .map_err(|_| syntax(line, format!("invalid number `{text}`")))?;
        Ok((Tok::Float(v), i))
    } else {
        let v: i64 = text
            .parse()
            .map_err(|_| CalcError::Overflow(format!("integer literal {text}")))?;
        Ok((Tok::Int(v), i))
    }
}

fn string(chars: &[char], start: usize, line: usize) -> Result<(String, usize), CalcError> {
    let quote = chars[start];
    if chars.get(start + 1) == Some(&quote) && chars.get(start + 2) == Some(&quote) {
        return Err(syntax(line, "triple-quoted strings are not supported"));
    }
    let mut s = String::new();
    let mut i = start + 1;
    loop {
        match chars.get(i) {
            None | Some('\n') => return Err(syntax(line, "unterminated string")),
            Some(&c) if c == quote => return Ok((s, i + 1)),
            Some('\\') => {
                let e = *chars
                    .get(i + 1)
                    .ok_or_else(|| syntax(line, "unterminated string"))?;
                match e {
                    'n' => s.push('\n'),
                    't' => s.push('\t'),
                    '\\' => s.push('\\'),
                    '\'' => s.push('\''),
                    '"' => s.push('"'),
                    '\n' => {}
                    other => {
                        s.push('\\');
                        s.push(other);
                    }
                }
                i += 2;
            }
            Some(&c) => {
                s.push(c);
                i += 1;
            }
        }
    }
}
