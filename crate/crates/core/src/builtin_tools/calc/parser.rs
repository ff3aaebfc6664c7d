use super::lexer::{tokenize, Tok, Token};
use super::CalcError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    In,
    NotIn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FPart {
    Lit(String),
    Expr {
        expr: Expr,
        precision: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Str(String),
    FStr(Vec<FPart>),
    Bool(bool),
    None,
    Name(String),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Neg(Box<Expr>),
    Pos(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(Box<Expr>, Vec<(CmpOp, Expr)>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    IfElse {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
        kwargs: Vec<(String, Expr)>,
    },
    Index(Box<Expr>, Box<Expr>),
    Slice(Box<Expr>, Option<Box<Expr>>, Option<Box<Expr>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Name(String),
    Index(String, Expr),
    Tuple(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Assign(Vec<Target>, Expr),
    AugAssign(Target, BinOp, Expr),
    Expr(Expr),
    If(Vec<(Expr, Vec<Stmt>)>, Vec<Stmt>),
    For(Target, Expr, Vec<Stmt>),
    While(Expr, Vec<Stmt>),
    Break,
    Continue,
    Pass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

const FORBIDDEN: &[&str] = &[
    "import", "from", "def", "class", "lambda", "return", "with", "try", "except", "finally",
    "raise", "yield", "global", "nonlocal", "del", "assert", "async", "await", "is",
];

/// Bound on expression and block nesting, so that neither parsing nor
/// evaluation can exhaust the stack.
/// Positional and keyword arguments of a call.
type CallArgs = (Vec<Expr>, Vec<(String, Expr)>);

const MAX_NESTING: usize = 64;

/// Largest accepted `.Nf` precision.
const MAX_PRECISION: usize = 100;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

fn syntax(line: usize, msg: impl Into<String>) -> CalcError {
    CalcError::Syntax {
        line,
        message: msg.into(),
    }
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser {
            toks,
            pos: 0,
            depth: 0,
        }
    }

    fn nest(&mut self) -> Result<(), CalcError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(syntax(
                self.line(),
                "expression or block is nested too deeply",
            ));
        }
        Ok(())
    }

    /// Runs `f` one nesting level deeper.
    fn nested<T>(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<T, CalcError>,
    ) -> Result<T, CalcError> {
        self.nest()?;
        let out = f(self);
        self.depth -= 1;
        out
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), CalcError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), CalcError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{kw}`")))
        }
    }

    fn unexpected(&self, context: &str) -> CalcError {
        let found = match self.peek() {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Int(v) => v.to_string(),
            Tok::Float(v) => v.to_string(),
            Tok::Str(_) | Tok::FStr(_) => "a string".into(),
            Tok::Op(o) => format!("`{o}`"),
            Tok::Newline => "end of line".into(),
            Tok::Indent => "indent".into(),
            Tok::Dedent => "dedent".into(),
            Tok::Eof => "end of input".into(),
        };
        syntax(self.line(), format!("{context}, found {found}"))
    }

    fn program(&mut self) -> Result<Vec<Stmt>, CalcError> {
        let mut out = Vec::new();
        while self.peek() != &Tok::Eof {
            if self.peek() == &Tok::Newline {
                self.bump();
                continue;
            }
            out.push(self.statement()?);
        }
        Ok(out)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, CalcError> {
        self.nested(Self::block_body)
    }

    fn block_body(&mut self) -> Result<Vec<Stmt>, CalcError> {
        self.expect_op(":")?;
        if self.peek() != &Tok::Newline {
            // Single-line body: `if x: y = 1`.
            let stmt = self.simple_statement()?;
            self.end_of_statement()?;
            return Ok(vec![stmt]);
        }
        self.bump();
        if self.peek() != &Tok::Indent {
            return Err(self.unexpected("expected an indented block"));
        }
        self.bump();
        let mut body = Vec::new();
        while !matches!(self.peek(), Tok::Dedent | Tok::Eof) {
            if self.peek() == &Tok::Newline {
                self.bump();
                continue;
            }
            body.push(self.statement()?);
        }
        if self.peek() == &Tok::Dedent {
            self.bump();
        }
        Ok(body)
    }

    fn end_of_statement(&mut self) -> Result<(), CalcError> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            Tok::Op(";") => Err(syntax(
                self.line(),
                "`;` separated statements are not supported",
            )),
            _ => Err(self.unexpected("expected end of statement")),
        }
    }

    fn statement(&mut self) -> Result<Stmt, CalcError> {
        let line = self.line();
        let kind = match self.peek().clone() {
            Tok::Name(kw) if kw == "if" => {
                self.bump();
                let mut branches = vec![(self.expr()?, self.block()?)];
                let mut otherwise = Vec::new();
                loop {
                    if self.is_kw("elif") {
                        self.bump();
                        branches.push((self.expr()?, self.block()?));
                    } else if self.is_kw("else") {
                        self.bump();
                        otherwise = self.block()?;
                        break;
                    } else {
                        break;
                    }
                }
                StmtKind::If(branches, otherwise)
            }
            Tok::Name(kw) if kw == "for" => {
                self.bump();
                let target = self.for_target()?;
                self.expect_kw("in")?;
                let iter = self.expr_list()?;
                StmtKind::For(target, iter, self.block()?)
            }
            Tok::Name(kw) if kw == "while" => {
                self.bump();
                let cond = self.expr()?;
                StmtKind::While(cond, self.block()?)
            }
            _ => {
                let stmt = self.simple_statement()?;
                self.end_of_statement()?;
                return Ok(stmt);
            }
        };
        Ok(Stmt { line, kind })
    }

    fn for_target(&mut self) -> Result<Target, CalcError> {
        let mut names = Vec::new();
        let parens = self.eat_op("(");
        loop {
            match self.bump() {
                Tok::Name(n) if !is_reserved(&n) => names.push(n),
                _ => return Err(syntax(self.line(), "loop variables must be plain names")),
            }
            if !self.eat_op(",") || self.is_kw("in") || self.is_op(")") {
                break;
            }
        }
        if parens {
            self.expect_op(")")?;
        }
        Ok(if names.len() == 1 && !parens {
            Target::Name(names.remove(0))
        } else {
            Target::Tuple(names)
        })
    }

    fn simple_statement(&mut self) -> Result<Stmt, CalcError> {
        let line = self.line();
        if let Tok::Name(kw) = self.peek().clone() {
            match kw.as_str() {
                "pass" => {
                    self.bump();
                    return Ok(Stmt {
                        line,
                        kind: StmtKind::Pass,
                    });
                }
                "break" => {
                    self.bump();
                    return Ok(Stmt {
                        line,
                        kind: StmtKind::Break,
                    });
                }
                "continue" => {
                    self.bump();
                    return Ok(Stmt {
                        line,
                        kind: StmtKind::Continue,
                    });
                }
                k if FORBIDDEN.contains(&k) => {
                    return Err(syntax(
                        line,
                        format!("`{k}` is not available in the calculation dialect"),
                    ));
                }
                _ => {}
            }
        }
        let first = self.expr_list()?;
        let aug = match self.peek() {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            _ => None,
        };
        if let Some(op) = aug {
            self.bump();
            let target = to_target(first, line)?;
            if matches!(target, Target::Tuple(_)) {
                return Err(syntax(line, "augmented assignment needs a single target"));
            }
            let value = self.expr_list()?;
            return Ok(Stmt {
                line,
                kind: StmtKind::AugAssign(target, op, value),
            });
        }
        if !self.is_op("=") {
            return Ok(Stmt {
                line,
                kind: StmtKind::Expr(first),
            });
        }
        let mut targets = vec![to_target(first, line)?];
        let mut value;
        loop {
            self.expect_op("=")?;
            value = self.expr_list()?;
            if !self.is_op("=") {
                break;
            }
            targets.push(to_target(value, line)?);
        }
        Ok(Stmt {
            line,
            kind: StmtKind::Assign(targets, value),
        })
    }

    /// One expression, or a bare tuple `a, b`.
    fn expr_list(&mut self) -> Result<Expr, CalcError> {
        let first = self.expr()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if matches!(
                self.peek(),
                Tok::Newline | Tok::Eof | Tok::Op("=") | Tok::Op(":") | Tok::Op(")")
            ) {
                break;
            }
            items.push(self.expr()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn expr(&mut self) -> Result<Expr, CalcError> {
        self.nested(Self::conditional)
    }

    fn conditional(&mut self) -> Result<Expr, CalcError> {
        if self.is_kw("lambda") {
            return Err(syntax(
                self.line(),
                "`lambda` is not available in the calculation dialect",
            ));
        }
        let value = self.or_expr()?;
        if self.is_kw("if") {
            self.bump();
            let cond = self.or_expr()?;
            self.expect_kw("else")?;
            let otherwise = self.expr()?;
            return Ok(Expr::IfElse {
                cond: Box::new(cond),
                then: Box::new(value),
                otherwise: Box::new(otherwise),
            });
        }
        Ok(value)
    }

    fn or_expr(&mut self) -> Result<Expr, CalcError> {
        let depth = self.depth;
        let mut left = self.and_expr()?;
        while self.is_kw("or") {
            self.bump();
            self.nest()?;
            left = Expr::Or(Box::new(left), Box::new(self.and_expr()?));
        }
        self.depth = depth;
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, CalcError> {
        let depth = self.depth;
        let mut left = self.not_expr()?;
        while self.is_kw("and") {
            self.bump();
            self.nest()?;
            left = Expr::And(Box::new(left), Box::new(self.not_expr()?));
        }
        self.depth = depth;
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, CalcError> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Expr::Not(Box::new(self.nested(Self::not_expr)?)));
        }
        self.comparison()
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::Le,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::Ge,
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::Ne,
            Tok::Name(n) if n == "in" => CmpOp::In,
            Tok::Name(n) if n == "not" => {
                let next = self.toks.get(self.pos + 1).map(|t| &t.tok);
                if matches!(next, Some(Tok::Name(n)) if n == "in") {
                    self.bump();
                    CmpOp::NotIn
                } else {
                    return None;
                }
            }
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    fn comparison(&mut self) -> Result<Expr, CalcError> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        while let Some(op) = self.cmp_op() {
            rest.push((op, self.arith()?));
        }
        Ok(if rest.is_empty() {
            first
        } else {
            Expr::Compare(Box::new(first), rest)
        })
    }

    fn arith(&mut self) -> Result<Expr, CalcError> {
        let depth = self.depth;
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => {
                    self.depth = depth;
                    return Ok(left);
                }
            };
            self.bump();
            self.nest()?;
            left = Expr::Binary(op, Box::new(left), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, CalcError> {
        let depth = self.depth;
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => {
                    self.depth = depth;
                    return Ok(left);
                }
            };
            self.bump();
            self.nest()?;
            left = Expr::Binary(op, Box::new(left), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, CalcError> {
        if self.eat_op("-") {
            return Ok(Expr::Neg(Box::new(self.nested(Self::unary)?)));
        }
        if self.eat_op("+") {
            return Ok(Expr::Pos(Box::new(self.nested(Self::unary)?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, CalcError> {
        let base = self.postfix()?;
        if self.eat_op("**") {
            // Right-associative, and binds tighter than a unary minus on its left.
            let exp = self.nested(Self::unary)?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, CalcError> {
        let depth = self.depth;
        let mut value = self.atom()?;
        loop {
            if self.is_op("[") {
                self.bump();
                self.nest()?;
                let start = if self.is_op(":") {
                    None
                } else {
                    Some(self.expr()?)
                };
                if self.eat_op(":") {
                    let stop = if self.is_op("]") {
                        None
                    } else {
                        Some(Box::new(self.expr()?))
                    };
                    if self.is_op(":") {
                        return Err(syntax(self.line(), "slice steps are not supported"));
                    }
                    self.expect_op("]")?;
                    value = Expr::Slice(Box::new(value), start.map(Box::new), stop);
                } else {
                    self.expect_op("]")?;
                    let index = start.ok_or_else(|| syntax(self.line(), "empty index"))?;
                    value = Expr::Index(Box::new(value), Box::new(index));
                }
            } else if self.is_op("(") {
                return Err(syntax(self.line(), "only built-in functions can be called"));
            } else if self.is_op(".") {
                return Err(syntax(
                    self.line(),
                    "attribute access is not available in the calculation dialect",
                ));
            } else {
                self.depth = depth;
                return Ok(value);
            }
        }
    }

    fn call_args(&mut self) -> Result<CallArgs, CalcError> {
        let mut args = Vec::new();
        let mut kwargs = Vec::new();
        while !self.is_op(")") {
            let is_kwarg = matches!(self.peek(), Tok::Name(_))
                && matches!(
                    self.toks.get(self.pos + 1).map(|t| &t.tok),
                    Some(Tok::Op("="))
                );
            if is_kwarg {
                let Tok::Name(name) = self.bump() else {
                    unreachable!()
                };
                self.bump();
                kwargs.push((name, self.expr()?));
            } else {
                if !kwargs.is_empty() {
                    return Err(syntax(
                        self.line(),
                        "positional argument follows keyword argument",
                    ));
                }
                let arg = self.expr()?;
                if self.is_kw("for") {
                    return Err(syntax(
                        self.line(),
                        "comprehensions are not available in the calculation dialect",
                    ));
                }
                args.push(arg);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok((args, kwargs))
    }

    fn atom(&mut self) -> Result<Expr, CalcError> {
        let line = self.line();
        match self.bump() {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Float(v) => Ok(Expr::Float(v)),
            Tok::Str(s) => {
                let mut s = s;
                // Adjacent literals concatenate.
                while let Tok::Str(next) = self.peek().clone() {
                    self.bump();
                    s.push_str(&next);
                }
                Ok(Expr::Str(s))
            }
            Tok::FStr(body) => Ok(Expr::FStr(parse_fstring(&body, line)?)),
            Tok::Name(n) => match n.as_str() {
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                "None" => Ok(Expr::None),
                _ if is_reserved(&n) => Err(syntax(line, format!("unexpected keyword `{n}`"))),
                _ => {
                    if self.is_op("(") {
                        self.bump();
                        let (args, kwargs) = self.call_args()?;
                        Ok(Expr::Call {
                            name: n,
                            args,
                            kwargs,
                        })
                    } else {
                        Ok(Expr::Name(n))
                    }
                }
            },
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.expr()?;
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op(")") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                let mut items = Vec::new();
                while !self.is_op("]") {
                    items.push(self.expr()?);
                    if self.is_kw("for") {
                        return Err(syntax(
                            line,
                            "comprehensions are not available in the calculation dialect",
                        ));
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => Err(syntax(
                line,
                "dictionaries and sets are not available in the calculation dialect",
            )),
            other => {
                self.pos -= 1;
                let _ = other;
                Err(self.unexpected("expected a value"))
            }
        }
    }
}

fn is_reserved(name: &str) -> bool {
    FORBIDDEN.contains(&name)
        || matches!(
            name,
            "if" | "elif"
                | "else"
                | "for"
                | "while"
                | "in"
                | "not"
                | "and"
                | "or"
                | "pass"
                | "break"
                | "continue"
        )
}

fn to_target(expr: Expr, line: usize) -> Result<Target, CalcError> {
    match expr {
        Expr::Name(n) => Ok(Target::Name(n)),
        Expr::Index(base, index) => match *base {
            Expr::Name(n) => Ok(Target::Index(n, *index)),
            _ => Err(syntax(line, "only `name[index]` can be assigned to")),
        },
        Expr::Tuple(items) => items
            .into_iter()
            .map(|e| match e {
                Expr::Name(n) => Ok(n),
                _ => Err(syntax(line, "tuple assignment targets must be names")),
            })
            .collect::<Result<_, _>>()
            .map(Target::Tuple),
        _ => Err(syntax(line, "invalid assignment target")),
    }
}

/// Splits an f-string body into literal text and `{expr}` / `{expr:.Nf}`
/// fields.
fn parse_fstring(body: &str, line: usize) -> Result<Vec<FPart>, CalcError> {
    let chars: Vec<char> = body.chars().collect();
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '{' if chars.get(i + 1) == Some(&'{') => {
                lit.push('{');
                i += 2;
            }
            '}' if chars.get(i + 1) == Some(&'}') => {
                lit.push('}');
                i += 2;
            }
            '}' => return Err(syntax(line, "single `}` in f-string")),
            '{' => {
                let mut depth = 0;
                let mut j = i + 1;
                let mut colon = None;
                while j < chars.len() {
                    match chars[j] {
                        '(' | '[' => depth += 1,
                        ')' | ']' => depth -= 1,
                        ':' if depth == 0 && colon.is_none() => colon = Some(j),
                        '}' if depth == 0 => break,
                        _ => {}
                    }
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(syntax(line, "unterminated `{` in f-string"));
                }
                let expr_end = colon.unwrap_or(j);
                let source: String = chars[i + 1..expr_end].iter().collect();
                let precision = match colon {
                    None => None,
                    Some(c) => {
                        let spec: String = chars[c + 1..j].iter().collect();
                        Some(parse_spec(&spec).ok_or_else(|| {
                            syntax(line, format!("unsupported format spec `{spec}`; use `.Nf`"))
                        })?)
                    }
                };
                if !lit.is_empty() {
                    parts.push(FPart::Lit(std::mem::take(&mut lit)));
                }
                parts.push(FPart::Expr {
                    expr: parse_expression(&source, line)?,
                    precision,
                });
                i = j + 1;
            }
            c => {
                lit.push(c);
                i += 1;
            }
        }
    }
    if !lit.is_empty() {
        parts.push(FPart::Lit(lit));
    }
    Ok(parts)
}

fn parse_spec(spec: &str) -> Option<usize> {
    spec.strip_prefix('.')?
        .strip_suffix('f')?
        .parse()
        .ok()
        .filter(|p| *p <= MAX_PRECISION)
}

fn parse_expression(source: &str, line: usize) -> Result<Expr, CalcError> {
    if source.trim().is_empty() {
        return Err(syntax(line, "empty expression in f-string"));
    }
    let mut toks = tokenize(source.trim()).map_err(|e| e.at_line(line))?;
    for t in &mut toks {
        t.line = line;
    }
    let mut p = Parser::new(toks);
    let expr = p.expr()?;
    while p.peek() == &Tok::Newline {
        p.bump();
    }
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected("unexpected text in f-string field"));
    }
    Ok(expr)
}

pub fn parse_program(source: &str) -> Result<Vec<Stmt>, CalcError> {
    let toks = tokenize(source)?;
    Parser::new(toks).program()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_of_power_and_negation() {
        let p = parse_program("x = -2 ** 2").unwrap();
        let StmtKind::Assign(_, Expr::Neg(inner)) = &p[0].kind else {
            panic!("{p:?}")
        };
        assert!(matches!(**inner, Expr::Binary(BinOp::Pow, _, _)));
    }

    #[test]
    fn chained_comparison() {
        let p = parse_program("ok = 1 < x <= 3").unwrap();
        let StmtKind::Assign(_, Expr::Compare(_, rest)) = &p[0].kind else {
            panic!()
        };
        assert_eq!(rest.len(), 2);
    }

    #[test]
    fn fstring_fields() {
        let parts = parse_fstring("a {x} b {y:.2f} {{c}}", 1).unwrap();
        assert_eq!(parts.len(), 5);
        assert!(matches!(
            &parts[3],
            FPart::Expr {
                precision: Some(2),
                ..
            }
        ));
        assert_eq!(parts[4], FPart::Lit(" {c}".into()));
    }

    #[test]
    fn forbidden_constructs() {
        for src in [
            "import os",
            "from math import sqrt",
            "def f():\n    pass",
            "x = lambda y: y",
            "x = os.system",
            "x = [i for i in range(3)]",
            "x = {}",
            "f = open",
            "x = foo.bar",
            "class A:\n    pass",
        ] {
            let err = parse_program(src);
            if src == "f = open" {
                // a bare name parses; calling it fails at run time
                assert!(err.is_ok());
                continue;
            }
            assert!(err.is_err(), "{src}");
        }
    }

    #[test]
    fn blocks_and_elif() {
        let p = parse_program(
            "if a:\n    b = 1\nelif c:\n    b = 2\nelse:\n    b = 3\nfor i in range(3): pass\n",
        )
        .unwrap();
        assert_eq!(p.len(), 2);
        let StmtKind::If(branches, otherwise) = &p[0].kind else {
            panic!()
        };
        assert_eq!(branches.len(), 2);
        assert_eq!(otherwise.len(), 1);
    }

    #[test]
    fn nesting_is_bounded() {
        let deep = format!("x = {}1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse_program(&deep)
            .unwrap_err()
            .to_string()
            .contains("nested too deeply"));
        let chain = format!("x = 1{}", " + 1".repeat(5000));
        assert!(parse_program(&chain).is_err());
        assert!(parse_program(&format!("x = {}", "-".repeat(5000) + "1")).is_err());
        assert!(parse_program(&format!("x = 1{}", " + 1".repeat(40))).is_ok());
        assert!(parse_program(&format!("x = {}1{}", "(".repeat(40), ")".repeat(40))).is_ok());
    }

    #[test]
    fn tuple_targets() {
        let p = parse_program("a, b = 1, 2\nfor (i, j) in pairs:\n    pass").unwrap();
        assert!(
            matches!(&p[0].kind, StmtKind::Assign(t, Expr::Tuple(_)) if matches!(&t[0], Target::Tuple(n) if n.len() == 2))
        );
    }
}
