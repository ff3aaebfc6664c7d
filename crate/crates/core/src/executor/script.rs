//! The closed command-script grammar.
//!
//! ```text
//! script    := statement+            (newline separated, `#` comments ignored)
//! statement := binding | exec_assign
//! binding   := IDENT "=" expr
//! exec_assign := "execution" "=" "tool.execute" "(" kwargs? ")"
//! kwargs    := IDENT "=" expr {"," IDENT "=" expr}
//! expr      := STRING | NUMBER | BOOLEAN | NULL | IDENT | IDENT "[" NUMBER "]" | list | map
//! list      := "[" [expr {"," expr}] "]"
//! map       := "{" [STRING ":" expr {"," STRING ":" expr}] "}"
//! ```
//!
//! Newlines inside brackets are ignored, and a trailing comma is accepted
//! in lists, maps and argument lists.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

pub const EXEC_TARGET: &str = "execution";

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
    Ident(String),
    Index(String, i64),
    List(Vec<Expr>),
    Map(Vec<(String, Expr)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Binding { target: String, value: Expr },
    ExecAssign { kwargs: Vec<(String, Expr)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Binding,
    ExecAssign,
}

impl Statement {
    pub fn kind(&self) -> StatementKind {
        match self {
            Statement::Binding { .. } => StatementKind::Binding,
            Statement::ExecAssign { .. } => StatementKind::ExecAssign,
        }
    }

    pub fn target(&self) -> &str {
        match self {
            Statement::Binding { target, .. } => target,
            Statement::ExecAssign { .. } => EXEC_TARGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandScript {
    pub raw: String,
    pub statements: Vec<Statement>,
}

impl CommandScript {
    pub fn exec_count(&self) -> usize {
        self.statements
            .iter()
            .filter(|s| s.kind() == StatementKind::ExecAssign)
            .count()
    }

    /// Canonical source text for the statement list.
    pub fn render(&self) -> String {
        render_statements(&self.statements)
    }
}

// Scripts persist as their raw text and are re-parsed on load, so the stored
// form is exactly what the model produced.
impl serde::Serialize for CommandScript {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> serde::Deserialize<'de> for CommandScript {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        parse_script(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleViolation {
    #[error("only `execution = tool.execute(...)` may receive a tool call ({0})")]
    ForbiddenTarget(String),
    #[error("the command contains no `execution = tool.execute(...)` call")]
    MissingExecCall,
    #[error("the last statement must be `execution = tool.execute(...)`")]
    NonFinalExecRule,
    #[error("construct outside the command grammar: {0}")]
    ForbiddenConstruct(String),
    #[error(
        "items of list `{0}` are passed to separate executions; process them in a single execution"
    )]
    SeparatePerItemExecutions(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("syntax error on line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("rule violation on line {line}: {violation}")]
    Rule {
        line: usize,
        violation: RuleViolation,
    },
}

impl ScriptError {
    pub fn violation(&self) -> Option<&RuleViolation> {
        match self {
            ScriptError::Rule { violation, .. } => Some(violation),
            ScriptError::Syntax { .. } => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    Punct(char),
    Newline,
    Other(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

const FORBIDDEN_KEYWORDS: &[&str] = &[
    "import", "from", "for", "while", "if", "elif", "else", "def", "class", "lambda", "return",
    "with", "try", "except", "finally", "raise", "yield", "global", "nonlocal", "del", "assert",
    "async", "await", "exec", "eval", "print", "open", "in", "not", "and", "or", "is", "pass",
];

fn syntax(line: usize, reason: impl Into<String>) -> ScriptError {
    ScriptError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn rule(line: usize, violation: RuleViolation) -> ScriptError {
    ScriptError::Rule { line, violation }
}

fn lex(src: &str) -> Result<Vec<Token>, ScriptError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut depth: i32 = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                if depth == 0 {
                    out.push(Token {
                        tok: Tok::Newline,
                        line,
                    });
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
            '"' | '\'' => {
                let (s, next, newlines) = lex_string(&chars, i, line)?;
                out.push(Token {
                    tok: Tok::Str(s),
                    line,
                });
                line += newlines;
                i = next;
            }
            '0'..='9' => {
                let (tok, next) = lex_number(&chars, i, line)?;
                out.push(Token { tok, line });
                i = next;
            }
            '-' if chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                let (tok, next) = lex_number(&chars, i + 1, line)?;
                let tok = match tok {
                    Tok::Int(v) => Tok::Int(-v),
                    Tok::Float(v) => Tok::Float(-v),
                    other => other,
                };
                out.push(Token { tok, line });
                i = next;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Ident(word),
                    line,
                });
            }
            '(' | '[' | '{' => {
                depth += 1;
                out.push(Token {
                    tok: Tok::Punct(c),
                    line,
                });
                i += 1;
            }
            ')' | ']' | '}' => {
                depth -= 1;
                if depth < 0 {
                    return Err(syntax(line, format!("unbalanced `{c}`")));
                }
                out.push(Token {
                    tok: Tok::Punct(c),
                    line,
                });
                i += 1;
            }
            '=' if chars.get(i + 1) == Some(&'=') => {
                out.push(Token {
                    tok: Tok::Other("==".into()),
                    line,
                });
                i += 2;
            }
            '=' | ',' | ':' | '.' => {
                out.push(Token {
                    tok: Tok::Punct(c),
                    line,
                });
                i += 1;
            }
            other => {
                out.push(Token {
                    tok: Tok::Other(other.to_string()),
                    line,
                });
                i += 1;
            }
        }
    }
    if depth != 0 {
        return Err(syntax(line, "unclosed bracket"));
    }
    out.push(Token {
        tok: Tok::Newline,
        line,
    });
    Ok(out)
}

fn lex_string(
    chars: &[char],
    start: usize,
    line: usize,
) -> Result<(String, usize, usize), ScriptError> {
    let quote = chars[start];
    if chars.get(start + 1) == Some(&quote) && chars.get(start + 2) == Some(&quote) {
        return Err(rule(
            line,
            RuleViolation::ForbiddenConstruct("triple-quoted strings".into()),
        ));
    }
    let mut s = String::new();
    let mut i = start + 1;
    let newlines = 0;
    loop {
        let Some(&c) = chars.get(i) else {
            return Err(syntax(line, "unterminated string"));
        };
        match c {
            c if c == quote => return Ok((s, i + 1, newlines)),
            '\n' => return Err(syntax(line, "unterminated string")),
            '\\' => {
                let Some(&e) = chars.get(i + 1) else {
                    return Err(syntax(line, "unterminated string"));
                };
                i += 2;
                match e {
                    'n' => s.push('\n'),
                    't' => s.push('\t'),
                    'r' => s.push('\r'),
                    '0' => s.push('\0'),
                    '\\' | '\'' | '"' => s.push(e),
                    'u' => {
                        let hex: String = chars.get(i..i + 4).unwrap_or(&[]).iter().collect();
                        let code = u32::from_str_radix(&hex, 16)
                            .ok()
                            .filter(|_| hex.len() == 4)
                            .and_then(char::from_u32)
                            .ok_or_else(|| syntax(line, "bad \\u escape"))?;
                        s.push(code);
                        i += 4;
                    }
                    other => {
                        // Unknown escapes are kept verbatim, as Python does.
                        s.push('\\');
                        s.push(other);
                    }
                }
            }
            c => {
                s.push(c);
                i += 1;
            }
        }
    }
}

fn lex_number(chars: &[char], start: usize, line: usize) -> Result<(Tok, usize), ScriptError> {
    let mut i = start;
    let mut is_float = false;
    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
        i += 1;
    }
    if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
        is_float = true;
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
    }
    if matches!(chars.get(i), Some('e') | Some('E')) {
        let mut j = i + 1;
        if matches!(chars.get(j), Some('+') | Some('-')) {
            j += 1;
        }
        if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
            is_float = true;
            i = j;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    let text: String = chars[start..i].iter().filter(|c| **c != '_').collect();
    if chars
        .get(i)
        .is_some_and(|c| c.is_alphanumeric() || *c == '_')
    {
        return Err(syntax(
            line,
            format!("malformed number `{text}{}`", chars[i]),
        ));
    }
    let tok = if is_float {
        let v: f64 = text
            .parse()
            .map_err(|_| syntax(line, format!("bad number `{text}`")))?;
        if !v.is_finite() {
            return Err(syntax(line, format!("number `{text}` out of range")));
        }
        Tok::Float(v)
    } else {
        Tok::Int(
            text.parse()
                .map_err(|_| syntax(line, format!("integer `{text}` out of range")))?,
        )
    };
    Ok((tok, i))
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.toks[self.pos.min(self.toks.len() - 1)].line
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len() - 1
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ScriptError> {
        if self.peek() == &Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{c}`")))
        }
    }

    fn unexpected(&self, context: &str) -> ScriptError {
        let line = self.line();
        match self.peek() {
            Tok::Punct('(') => rule(
                line,
                RuleViolation::ForbiddenConstruct("function call".into()),
            ),
            Tok::Punct('.') => rule(
                line,
                RuleViolation::ForbiddenConstruct("attribute access".into()),
            ),
            Tok::Other(op) => rule(
                line,
                RuleViolation::ForbiddenConstruct(format!("operator `{op}`")),
            ),
            Tok::Newline => syntax(line, format!("{context}, found end of line")),
            other => syntax(line, format!("{context}, found {}", describe(other))),
        }
    }

    fn is_exec_call(&self) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == "tool")
            && self.peek_at(1) == Some(&Tok::Punct('.'))
            && matches!(self.peek_at(2), Some(Tok::Ident(w)) if w == "execute")
    }

    fn statement(&mut self) -> Result<Statement, ScriptError> {
        let line = self.line();
        if self.is_exec_call() {
            return Err(rule(
                line,
                RuleViolation::ForbiddenTarget("tool.execute result is not assigned".into()),
            ));
        }
        let target = match self.bump() {
            Tok::Ident(w) if FORBIDDEN_KEYWORDS.contains(&w.as_str()) => {
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct(format!("`{w}`")),
                ));
            }
            Tok::Ident(w) if w == "tool" => {
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenTarget("`tool` cannot be rebound".into()),
                ));
            }
            Tok::Ident(w) => w,
            other => {
                return Err(syntax(
                    line,
                    format!("expected an assignment, found {}", describe(&other)),
                ))
            }
        };
        match self.peek() {
            Tok::Punct('=') => {
                self.bump();
            }
            Tok::Punct('(') => {
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct(format!("call to `{target}`")),
                ))
            }
            Tok::Punct('.') => {
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct("attribute access".into()),
                ))
            }
            Tok::Punct('[') => {
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct("item assignment".into()),
                ))
            }
            Tok::Other(op) => {
                let op = op.clone();
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct(format!("operator `{op}`")),
                ));
            }
            _ => return Err(self.unexpected("expected `=`")),
        }
        let stmt = if self.is_exec_call() {
            self.pos += 3;
            if target != EXEC_TARGET {
                return Err(rule(line, RuleViolation::ForbiddenTarget(target)));
            }
            Statement::ExecAssign {
                kwargs: self.kwargs()?,
            }
        } else {
            if target == EXEC_TARGET {
                return Err(rule(
                    line,
                    RuleViolation::ForbiddenTarget(
                        "`execution` may only hold tool.execute results".into(),
                    ),
                ));
            }
            Statement::Binding {
                target,
                value: self.expr()?,
            }
        };
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(stmt)
            }
            _ => Err(self.unexpected("expected end of statement")),
        }
    }

    fn kwargs(&mut self) -> Result<Vec<(String, Expr)>, ScriptError> {
        self.expect_punct('(')?;
        let mut out: Vec<(String, Expr)> = Vec::new();
        loop {
            if self.peek() == &Tok::Punct(')') {
                self.bump();
                return Ok(out);
            }
            let line = self.line();
            let name = match (self.peek().clone(), self.peek_at(1)) {
                (Tok::Ident(name), Some(Tok::Punct('='))) => name,
                _ => {
                    return Err(syntax(
                        line,
                        "tool.execute takes keyword arguments only (name=value)",
                    ))
                }
            };
            self.pos += 2;
            if out.iter().any(|(k, _)| *k == name) {
                return Err(syntax(line, format!("duplicate keyword argument `{name}`")));
            }
            let value = self.expr()?;
            out.push((name, value));
            match self.peek() {
                Tok::Punct(',') => {
                    self.bump();
                }
                Tok::Punct(')') => {}
                _ => return Err(self.unexpected("expected `,` or `)`")),
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ScriptError> {
        let line = self.line();
        if self.is_exec_call() {
            return Err(rule(
                line,
                RuleViolation::ForbiddenConstruct("nested tool.execute call".into()),
            ));
        }
        match self.bump() {
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Float(v) => Ok(Expr::Float(v)),
            Tok::Ident(w) => match w.as_str() {
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                "None" => Ok(Expr::Null),
                _ if FORBIDDEN_KEYWORDS.contains(&w.as_str()) => Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct(format!("`{w}`")),
                )),
                "tool" => Err(rule(
                    line,
                    RuleViolation::ForbiddenConstruct(
                        "reference to `tool` outside an exec call".into(),
                    ),
                )),
                _ => {
                    if self.peek() == &Tok::Punct('[') {
                        self.bump();
                        let index = match self.bump() {
                            Tok::Int(v) => v,
                            _ => {
                                return Err(rule(
                                    line,
                                    RuleViolation::ForbiddenConstruct("non-literal index".into()),
                                ))
                            }
                        };
                        self.expect_punct(']')?;
                        Ok(Expr::Index(w, index))
                    } else {
                        Ok(Expr::Ident(w))
                    }
                }
            },
            Tok::Punct('[') => {
                let mut items = Vec::new();
                loop {
                    if self.peek() == &Tok::Punct(']') {
                        self.bump();
                        return Ok(Expr::List(items));
                    }
                    items.push(self.expr()?);
                    match self.peek() {
                        Tok::Punct(',') => {
                            self.bump();
                        }
                        Tok::Punct(']') => {}
                        _ => return Err(self.unexpected("expected `,` or `]`")),
                    }
                }
            }
            Tok::Punct('{') => {
                let mut entries: Vec<(String, Expr)> = Vec::new();
                loop {
                    if self.peek() == &Tok::Punct('}') {
                        self.bump();
                        return Ok(Expr::Map(entries));
                    }
                    let key = match self.bump() {
                        Tok::Str(k) => k,
                        other => {
                            return Err(syntax(
                                self.line(),
                                format!("map keys must be strings, found {}", describe(&other)),
                            ))
                        }
                    };
                    self.expect_punct(':')?;
                    entries.push((key, self.expr()?));
                    match self.peek() {
                        Tok::Punct(',') => {
                            self.bump();
                        }
                        Tok::Punct('}') => {}
                        _ => return Err(self.unexpected("expected `,` or `}`")),
                    }
                }
            }
            Tok::Punct('(') => Err(rule(
                line,
                RuleViolation::ForbiddenConstruct("parenthesized expression or tuple".into()),
            )),
            Tok::Other(op) => Err(rule(
                line,
                RuleViolation::ForbiddenConstruct(format!("operator `{op}`")),
            )),
            other => Err(syntax(
                line,
                format!("expected a value, found {}", describe(&other)),
            )),
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Str(_) => "a string".into(),
        Tok::Int(_) | Tok::Float(_) => "a number".into(),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::Newline => "end of line".into(),
        Tok::Other(o) => format!("`{o}`"),
    }
}

/// Parses and validates a command script against the grammar and the
/// execution-variable rules.
pub fn parse_script(text: &str) -> Result<CommandScript, ScriptError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, pos: 0 };
    let mut statements = Vec::new();
    let mut lines = Vec::new();
    loop {
        while parser.peek() == &Tok::Newline && !parser.at_end() {
            parser.bump();
        }
        if parser.at_end() {
            break;
        }
        lines.push(parser.line());
        statements.push(parser.statement()?);
    }
    let last_line = lines.last().copied().unwrap_or(1);
    if !statements
        .iter()
        .any(|s| s.kind() == StatementKind::ExecAssign)
    {
        return Err(rule(last_line, RuleViolation::MissingExecCall));
    }
    if statements.last().map(Statement::kind) != Some(StatementKind::ExecAssign) {
        return Err(rule(last_line, RuleViolation::NonFinalExecRule));
    }
    check_per_item_executions(&statements, &lines)?;
    Ok(CommandScript {
        raw: text.to_string(),
        statements,
    })
}

/// Rejects scripts that index one list binding from several separate
/// executions (`url=urls[0]`, `url=urls[1]`, ...).
fn check_per_item_executions(statements: &[Statement], lines: &[usize]) -> Result<(), ScriptError> {
    let lists: HashSet<&str> = statements
        .iter()
        .filter_map(|s| match s {
            Statement::Binding {
                target,
                value: Expr::List(_),
            } => Some(target.as_str()),
            _ => None,
        })
        .collect();
    let mut uses: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (stmt, line) in statements.iter().zip(lines) {
        if let Statement::ExecAssign { kwargs } = stmt {
            let mut seen = HashSet::new();
            for (_, value) in kwargs {
                collect_indexed(value, &mut seen);
            }
            for name in seen {
                if lists.contains(name) {
                    uses.entry(name).or_default().push(*line);
                }
            }
        }
    }
    match uses.into_iter().find(|(_, lines)| lines.len() > 1) {
        Some((name, lines)) => Err(rule(
            lines[1],
            RuleViolation::SeparatePerItemExecutions(name.to_string()),
        )),
        None => Ok(()),
    }
}

fn collect_indexed<'a>(expr: &'a Expr, out: &mut HashSet<&'a str>) {
    match expr {
        Expr::Index(name, _) => {
            out.insert(name.as_str());
        }
        Expr::List(items) => items.iter().for_each(|e| collect_indexed(e, out)),
        Expr::Map(entries) => entries.iter().for_each(|(_, e)| collect_indexed(e, out)),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn render_str(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                out.push_str(&format!("\\u{:04x}", c as u32))
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Str(s) => render_str(s, out),
        Expr::Int(v) => out.push_str(&v.to_string()),
        Expr::Float(v) => out.push_str(&format!("{v:?}")),
        Expr::Bool(true) => out.push_str("True"),
        Expr::Bool(false) => out.push_str("False"),
        Expr::Null => out.push_str("None"),
        Expr::Ident(name) => out.push_str(name),
        Expr::Index(name, i) => out.push_str(&format!("{name}[{i}]")),
        Expr::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_expr(item, out);
            }
            out.push(']');
        }
        Expr::Map(entries) => {
            out.push('{');
            for (i, (k, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_str(k, out);
                out.push_str(": ");
                render_expr(v, out);
            }
            out.push('}');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        render_expr(self, &mut s);
        f.write_str(&s)
    }
}

pub fn render_statements(statements: &[Statement]) -> String {
    let mut out = String::new();
    for stmt in statements {
        match stmt {
            Statement::Binding { target, value } => {
                out.push_str(target);
                out.push_str(" = ");
                render_expr(value, &mut out);
            }
            Statement::ExecAssign { kwargs } => {
                out.push_str("execution = tool.execute(");
                for (i, (k, v)) in kwargs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(k);
                    out.push('=');
                    render_expr(v, &mut out);
                }
                out.push(')');
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violation(text: &str) -> RuleViolation {
        parse_script(text)
            .unwrap_err()
            .violation()
            .cloned()
            .unwrap_or_else(|| panic!("expected a rule violation for {text:?}"))
    }

    #[test]
    fn single_line_exec() {
        let s =
            parse_script(r#"execution = tool.execute(image="path/to/image", labels=["baseball"])"#)
                .unwrap();
        assert_eq!(s.statements.len(), 1);
        let Statement::ExecAssign { kwargs } = &s.statements[0] else {
            panic!()
        };
        assert_eq!(
            kwargs[0],
            ("image".into(), Expr::Str("path/to/image".into()))
        );
        assert_eq!(kwargs[1].1, Expr::List(vec![Expr::Str("baseball".into())]));
    }

    #[test]
    fn bindings_then_exec() {
        let s = parse_script(
            "image = \"path/to/image\"\nlabels = [\"baseball\", \"football\", \"basketball\"]\nthreshold = 0.5\nexecution = tool.execute(image=image, labels=labels, threshold=threshold)",
        )
        .unwrap();
        let kinds: Vec<_> = s.statements.iter().map(Statement::kind).collect();
        assert_eq!(
            kinds,
            [
                StatementKind::Binding,
                StatementKind::Binding,
                StatementKind::Binding,
                StatementKind::ExecAssign
            ]
        );
    }

    #[test]
    fn numbered_targets_are_forbidden() {
        assert_eq!(
            violation("execution1 = tool.execute(query=\"...\")\nexecution2 = tool.execute(query=\"...\")"),
            RuleViolation::ForbiddenTarget("execution1".into())
        );
    }

    #[test]
    fn empty_script_has_no_exec() {
        assert_eq!(violation(""), RuleViolation::MissingExecCall);
        assert_eq!(
            violation("# just a comment\n\n"),
            RuleViolation::MissingExecCall
        );
        assert_eq!(violation("x = 1"), RuleViolation::MissingExecCall);
    }

    #[test]
    fn exec_must_be_last() {
        assert_eq!(
            violation("execution = tool.execute(q=1)\nx = 2"),
            RuleViolation::NonFinalExecRule
        );
    }

    #[test]
    fn per_item_executions_are_rejected() {
        let text = "urls = [\n    \"https://example.com/article1\",\n    \"https://example.com/article2\"\n]\n\nexecution = tool.execute(url=urls[0])\nexecution = tool.execute(url=urls[1])";
        assert_eq!(
            violation(text),
            RuleViolation::SeparatePerItemExecutions("urls".into())
        );
        // a single indexed use is fine
        parse_script("urls = [\"a\", \"b\"]\nexecution = tool.execute(url=urls[0])").unwrap();
    }

    #[test]
    fn adversarial_scripts_are_rejected_at_parse() {
        let corpus = [
            "import os\nexecution = tool.execute(query=\"x\")",
            "from os import system\nexecution = tool.execute(query=\"x\")",
            "x = os.system(\"rm -rf /\")\nexecution = tool.execute(query=x)",
            "x = __import__(\"os\")\nexecution = tool.execute(query=x)",
            "execution = tool.execute(query=open(\"/etc/passwd\"))",
            "execution = tool.execute(query=tool.execute(query=\"x\"))",
            "for u in urls:\n    execution = tool.execute(url=u)",
            "x = [i for i in range(3)]\nexecution = tool.execute(q=x)",
            "x = 1 + 2\nexecution = tool.execute(q=x)",
            "tool.execute(query=\"x\")",
            "execution = tool.__class__",
            "execution = tool.execute(query=\"x\").strip()",
            "x = lambda: 0\nexecution = tool.execute(q=x)",
            "x = tool\nexecution = tool.execute(q=x)",
            "execution = tool.execute(q=x.y)",
            "x = \"\"\"doc\"\"\"\nexecution = tool.execute(q=x)",
            "exec(\"print(1)\")\nexecution = tool.execute(q=1)",
            "execution = tool.execute(q=(1, 2))",
            "x = {}\nx[\"a\"] = 1\nexecution = tool.execute(q=x)",
            "x = y[z]\nexecution = tool.execute(q=x)",
        ];
        for text in corpus {
            if let Ok(s) = parse_script(text) {
                panic!("accepted adversarial script {text:?}: {s:?}")
            }
        }
    }

    #[test]
    fn other_rejections_carry_the_right_kind() {
        assert!(matches!(
            violation("import os\nexecution = tool.execute(q=1)"),
            RuleViolation::ForbiddenConstruct(_)
        ));
        assert!(matches!(
            violation("execution = tool.execute(q=open(\"f\"))"),
            RuleViolation::ForbiddenConstruct(_)
        ));
        assert!(matches!(
            violation("tool.execute(q=1)"),
            RuleViolation::ForbiddenTarget(_)
        ));
        assert!(matches!(
            violation("result = tool.execute(q=1)"),
            RuleViolation::ForbiddenTarget(_)
        ));
        assert!(matches!(
            violation("execution = 5\nexecution = tool.execute(q=1)"),
            RuleViolation::ForbiddenTarget(_)
        ));
    }

    #[test]
    fn syntax_errors_report_lines() {
        let err =
            parse_script("x = 1\ny = \"unterminated\nexecution = tool.execute()").unwrap_err();
        assert!(
            matches!(err, ScriptError::Syntax { line: 2, .. }),
            "{err:?}"
        );
        let err = parse_script("execution = tool.execute(\"positional\")").unwrap_err();
        assert!(matches!(err, ScriptError::Syntax { .. }));
        let err = parse_script("execution = tool.execute(a=1, a=2)").unwrap_err();
        assert!(matches!(err, ScriptError::Syntax { .. }));
    }

    #[test]
    fn literals_and_escapes() {
        let s = parse_script(
            "m = {\"k\": [1, -2, 3.5, True, False, None], \"s\": 'it\\'s'}\nexecution = tool.execute(m=m, n=-1e-3, i=m)",
        )
        .unwrap();
        let Statement::Binding {
            value: Expr::Map(entries),
            ..
        } = &s.statements[0]
        else {
            panic!()
        };
        assert_eq!(entries[1].1, Expr::Str("it's".into()));
        let Statement::ExecAssign { kwargs } = &s.statements[1] else {
            panic!()
        };
        assert_eq!(kwargs[1].1, Expr::Float(-1e-3));
    }

    #[test]
    fn trailing_commas_and_comments() {
        let s =
            parse_script("# prep\nx = [1, 2,]  # two\nexecution = tool.execute(q=x,)\n").unwrap();
        assert_eq!(s.statements.len(), 2);
    }

    #[test]
    fn render_is_parseable() {
        let s = parse_script(
            "a = \"line\\nbreak \\\"q\\\"\"\nexecution = tool.execute(x=a, y={\"k\": 2.0})",
        )
        .unwrap();
        let again = parse_script(&s.render()).unwrap();
        assert_eq!(again.statements, s.statements);
    }
}
