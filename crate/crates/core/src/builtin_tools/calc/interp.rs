use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::rc::Rc;

use super::parser::{BinOp, CmpOp, Expr, FPart, Stmt, StmtKind, Target};
use super::{CalcError, Host, Limits};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    /// Shared and mutable: `b = a` aliases, as in the host language.
    List(Rc<RefCell<Vec<Value>>>),
    Tuple(Rc<Vec<Value>>),
    Range {
        start: i64,
        stop: i64,
        step: i64,
    },
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Range { .. } => "range",
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(v) => *v != 0,
            Value::Float(v) => *v != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(v) => !v.borrow().is_empty(),
            Value::Tuple(v) => !v.is_empty(),
            Value::Range { .. } => range_len(self) > 0,
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Bool(b) => Some(f64::from(u8::from(*b))),
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    fn as_int(&self) -> Option<i64> {
        match self {
            Value::Bool(b) => Some(i64::from(*b)),
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    /// Element count of sized values, used to charge steps.
    fn size(&self) -> usize {
        match self {
            Value::Str(s) => s.len(),
            Value::List(v) => v.borrow().len(),
            Value::Tuple(v) => v.len(),
            _ => 0,
        }
    }

    /// Python `str()`.
    pub fn to_text(&self) -> String {
        match self {
            Value::Str(s) => s.to_string(),
            other => other.repr(),
        }
    }

    /// Python `repr()`.
    pub fn repr(&self) -> String {
        self.repr_at(0)
    }

    fn repr_at(&self, depth: usize) -> String {
        let join = |items: &[Value]| {
            items
                .iter()
                .map(|v| v.repr_at(depth + 1))
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self {
            Value::None => "None".into(),
            Value::Bool(true) => "True".into(),
            Value::Bool(false) => "False".into(),
            Value::Int(v) => v.to_string(),
            Value::Float(v) => float_repr(*v),
            Value::Str(s) => {
                let quote = if s.contains('\'') && !s.contains('"') {
                    '"'
                } else {
                    '\''
                };
                let mut out = String::from(quote);
                for c in s.chars() {
                    match c {
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => out.push_str("\\r"),
                        c if c == quote => {
                            out.push('\\');
                            out.push(c);
                        }
                        c => out.push(c),
                    }
                }
                out.push(quote);
                out
            }
            Value::List(_) | Value::Tuple(_) if depth > MAX_DEPTH => "[...]".into(),
            Value::List(items) => format!("[{}]", join(&items.borrow())),
            Value::Tuple(items) if items.len() == 1 => {
                format!("({},)", items[0].repr_at(depth + 1))
            }
            Value::Tuple(items) => format!("({})", join(items)),
            Value::Range { start, stop, step } if *step == 1 => format!("range({start}, {stop})"),
            Value::Range { start, stop, step } => format!("range({start}, {stop}, {step})"),
        }
    }
}

/// Shortest round-trip float text in the host-language style: `18.0`,
/// `0.1`, `1e+16`, `1.5e-05`.
pub fn float_repr(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0.0".into()
        } else {
            "0.0".into()
        };
    }
    let sci = format!("{:e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent digits");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if v < 0.0 { "-" } else { "" };
    if !(-4..16).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let frac = if tail.is_empty() {
            String::new()
        } else {
            format!(".{tail}")
        };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{head}{frac}e{esign}{:02}", exp.abs());
    }
    if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        return format!("{sign}0.{zeros}{digits}");
    }
    let int_len = exp as usize + 1;
    if digits.len() <= int_len {
        let pad = "0".repeat(int_len - digits.len());
        format!("{sign}{digits}{pad}.0")
    } else {
        format!("{sign}{}.{}", &digits[..int_len], &digits[int_len..])
    }
}

/// Nesting bound for printing and comparing containers, which may be
/// self-referential.
const MAX_DEPTH: usize = 64;

/// Largest string or sequence a single operation may build.
const MAX_SEQUENCE: usize = 10_000_000;

fn range_len(v: &Value) -> i64 {
    let Value::Range { start, stop, step } = *v else {
        return 0;
    };
    let (start, stop, step) = (i128::from(start), i128::from(stop), i128::from(step));
    let n = if step > 0 && start < stop {
        (stop - start - 1) / step + 1
    } else if step < 0 && start > stop {
        (start - stop - 1) / (-step) + 1
    } else {
        0
    };
    n as i64
}

fn range_item(start: i64, step: i64, k: i64) -> i64 {
    (i128::from(start) + i128::from(k) * i128::from(step)) as i64
}

fn type_error(msg: impl Into<String>) -> CalcError {
    CalcError::TypeError(msg.into())
}

fn overflow(what: &str) -> CalcError {
    CalcError::Overflow(format!("integer result of {what} does not fit in 64 bits"))
}

enum Flow {
    Normal,
    Break,
    Continue,
}

pub(crate) struct Interp<'h> {
    vars: HashMap<String, Value>,
    steps: u64,
    written: usize,
    limits: Limits,
    host: &'h mut dyn Host,
    /// Line of the statement being executed, for error reports.
    pub(crate) line: usize,
}

impl<'h> Interp<'h> {
    pub(crate) fn new(limits: Limits, host: &'h mut dyn Host) -> Self {
        Self {
            vars: HashMap::new(),
            steps: 0,
            written: 0,
            limits,
            host,
            line: 0,
        }
    }

    fn tick(&mut self, n: u64) -> Result<(), CalcError> {
        self.steps += n;
        if self.steps > self.limits.max_steps {
            return Err(CalcError::StepLimitExceeded(self.limits.max_steps));
        }
        Ok(())
    }

    fn emit(&mut self, text: &str) -> Result<(), CalcError> {
        if self.written + text.len() > self.limits.max_output {
            return Err(CalcError::OutputLimitExceeded(self.limits.max_output));
        }
        self.written += text.len();
        self.host.write(text);
        Ok(())
    }

    pub(crate) fn run(&mut self, program: &[Stmt]) -> Result<(), CalcError> {
        match self.block(program)? {
            Flow::Normal => Ok(()),
            Flow::Break | Flow::Continue => Err(CalcError::Syntax {
                line: self.line,
                message: "`break` or `continue` outside a loop".into(),
            }),
        }
    }

    fn block(&mut self, body: &[Stmt]) -> Result<Flow, CalcError> {
        for stmt in body {
            self.line = stmt.line;
            match self.stmt(stmt)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, CalcError> {
        self.tick(1)?;
        match &stmt.kind {
            StmtKind::Pass => {}
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Continue => return Ok(Flow::Continue),
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::Assign(targets, value) => {
                let v = self.eval(value)?;
                for t in targets {
                    self.assign(t, v.clone())?;
                }
            }
            StmtKind::AugAssign(target, op, value) => {
                let current = match target {
                    Target::Name(n) => self.lookup(n)?,
                    Target::Index(n, idx) => {
                        let base = self.lookup(n)?;
                        let i = self.eval(idx)?;
                        index(&base, &i)?
                    }
                    Target::Tuple(_) => unreachable!("rejected by the parser"),
                };
                let rhs = self.eval(value)?;
                if let (BinOp::Add, Value::List(items), Value::List(extra)) = (op, &current, &rhs) {
                    // `a += b` extends the list in place.
                    let extra = extra.borrow().clone();
                    self.tick(extra.len() as u64)?;
                    if items.borrow().len() + extra.len() > MAX_SEQUENCE {
                        return Err(CalcError::ValueError("list is too large".into()));
                    }
                    items.borrow_mut().extend(extra);
                } else {
                    let v = binary(*op, &current, &rhs)?;
                    self.tick(v.size() as u64)?;
                    self.assign(target, v)?;
                }
            }
            StmtKind::If(branches, otherwise) => {
                for (cond, body) in branches {
                    if self.eval(cond)?.truthy() {
                        return self.block(body);
                    }
                }
                return self.block(otherwise);
            }
            StmtKind::While(cond, body) => {
                while self.eval(cond)?.truthy() {
                    self.tick(1)?;
                    if let Flow::Break = self.block(body)? {
                        break;
                    }
                }
            }
            StmtKind::For(target, iter, body) => {
                let seq = self.eval(iter)?;
                if let Value::Range { start, step, .. } = seq {
                    let n = range_len(&seq);
                    for k in 0..n {
                        self.tick(1)?;
                        self.assign(target, Value::Int(range_item(start, step, k)))?;
                        if let Flow::Break = self.block(body)? {
                            break;
                        }
                    }
                } else {
                    for item in iterate(&seq, MAX_SEQUENCE)? {
                        self.tick(1)?;
                        self.assign(target, item)?;
                        if let Flow::Break = self.block(body)? {
                            break;
                        }
                    }
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn lookup(&self, name: &str) -> Result<Value, CalcError> {
        self.vars
            .get(name)
            .cloned()
            .ok_or_else(|| CalcError::UndefinedName(name.to_string()))
    }

    fn assign(&mut self, target: &Target, value: Value) -> Result<(), CalcError> {
        match target {
            Target::Name(n) => {
                self.vars.insert(n.clone(), value);
            }
            Target::Tuple(names) => {
                let items = iterate(&value, MAX_SEQUENCE)?;
                if items.len() != names.len() {
                    return Err(CalcError::ValueError(format!(
                        "expected {} values to unpack, got {}",
                        names.len(),
                        items.len()
                    )));
                }
                for (n, v) in names.iter().zip(items) {
                    self.vars.insert(n.clone(), v);
                }
            }
            Target::Index(n, idx) => {
                let i = self.eval(idx)?;
                let slot = self.lookup(n)?;
                let Value::List(items) = slot else {
                    return Err(type_error(format!(
                        "'{}' object does not support item assignment",
                        slot.type_name()
                    )));
                };
                let i = i
                    .as_int()
                    .ok_or_else(|| type_error("list indices must be integers"))?;
                let len = items.borrow().len();
                let pos = normalize_index(i, len).ok_or_else(|| {
                    CalcError::IndexError("list assignment index out of range".into())
                })?;
                items.borrow_mut()[pos] = value;
            }
        }
        Ok(())
    }

    fn eval(&mut self, expr: &Expr) -> Result<Value, CalcError> {
        self.tick(1)?;
        Ok(match expr {
            Expr::Int(v) => Value::Int(*v),
            Expr::Float(v) => Value::Float(*v),
            Expr::Str(s) => Value::str(s),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::None => Value::None,
            Expr::Name(n) => self.lookup(n)?,
            Expr::FStr(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        FPart::Lit(s) => out.push_str(s),
                        FPart::Expr { expr, precision } => {
                            let v = self.eval(expr)?;
                            match precision {
                                None => out.push_str(&v.to_text()),
                                Some(p) => {
                                    let f = v.as_f64().ok_or_else(|| {
                                        CalcError::ValueError(format!(
                                            "unknown format code 'f' for object of type '{}'",
                                            v.type_name()
                                        ))
                                    })?;
                                    out.push_str(&format!("{f:.p$}", p = *p));
                                }
                            }
                        }
                    }
                }
                Value::str(&out)
            }
            Expr::List(items) => Value::list(self.eval_all(items)?),
            Expr::Tuple(items) => Value::Tuple(Rc::new(self.eval_all(items)?)),
            Expr::Neg(e) => match self.eval(e)? {
                Value::Float(v) => Value::Float(-v),
                v => {
                    let i = v.as_int().ok_or_else(|| {
                        type_error(format!("bad operand type for unary -: '{}'", v.type_name()))
                    })?;
                    Value::Int(i.checked_neg().ok_or_else(|| overflow("negation"))?)
                }
            },
            Expr::Pos(e) => match self.eval(e)? {
                v @ Value::Float(_) => v,
                v => Value::Int(v.as_int().ok_or_else(|| {
                    type_error(format!("bad operand type for unary +: '{}'", v.type_name()))
                })?),
            },
            Expr::Not(e) => Value::Bool(!self.eval(e)?.truthy()),
            Expr::And(a, b) => {
                let left = self.eval(a)?;
                if left.truthy() {
                    self.eval(b)?
                } else {
                    left
                }
            }
            Expr::Or(a, b) => {
                let left = self.eval(a)?;
                if left.truthy() {
                    left
                } else {
                    self.eval(b)?
                }
            }
            Expr::IfElse {
                cond,
                then,
                otherwise,
            } => {
                if self.eval(cond)?.truthy() {
                    self.eval(then)?
                } else {
                    self.eval(otherwise)?
                }
            }
            Expr::Binary(op, a, b) => {
                let left = self.eval(a)?;
                let right = self.eval(b)?;
                let v = binary(*op, &left, &right)?;
                self.tick(v.size() as u64)?;
                v
            }
            Expr::Compare(first, rest) => {
                let mut left = self.eval(first)?;
                for (op, e) in rest {
                    let right = self.eval(e)?;
                    if !compare(*op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            Expr::Index(base, idx) => {
                let b = self.eval(base)?;
                let i = self.eval(idx)?;
                index(&b, &i)?
            }
            Expr::Slice(base, start, stop) => {
                let b = self.eval(base)?;
                let start = match start {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                let stop = match stop {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                let v = slice(&b, start.as_ref(), stop.as_ref())?;
                self.tick(v.size() as u64)?;
                v
            }
            Expr::Call { name, args, kwargs } => {
                let args = self.eval_all(args)?;
                let mut kw = Vec::with_capacity(kwargs.len());
                for (k, e) in kwargs {
                    kw.push((k.as_str(), self.eval(e)?));
                }
                self.call(name, args, kw)?
            }
        })
    }

    /// Materializes an iterable, charging one step per element before
    /// allocating.
    fn items(&mut self, v: &Value) -> Result<Vec<Value>, CalcError> {
        let n = match v {
            Value::Range { .. } => range_len(v) as usize,
            Value::Str(s) => s.chars().count(),
            other => other.size(),
        };
        self.tick(n as u64)?;
        iterate(v, MAX_SEQUENCE)
    }

    fn eval_all(&mut self, items: &[Expr]) -> Result<Vec<Value>, CalcError> {
        items.iter().map(|e| self.eval(e)).collect()
    }

    fn call(
        &mut self,
        name: &str,
        args: Vec<Value>,
        kwargs: Vec<(&str, Value)>,
    ) -> Result<Value, CalcError> {
        let allowed: &[&str] = match name {
            "print" => &["sep", "end"],
            "sorted" => &["reverse"],
            _ => &[],
        };
        if let Some((k, _)) = kwargs.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(type_error(format!(
                "{name}() got an unexpected keyword argument '{k}'"
            )));
        }
        let arity = |lo: usize, hi: usize| -> Result<(), CalcError> {
            if args.len() < lo || args.len() > hi {
                Err(type_error(format!(
                    "{name}() takes {lo} to {hi} arguments ({} given)",
                    args.len()
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "print" => {
                let mut sep = " ".to_string();
                let mut end = "\n".to_string();
                for (k, v) in &kwargs {
                    let text = match v {
                        Value::None => continue,
                        Value::Str(s) => s.to_string(),
                        other => {
                            return Err(type_error(format!(
                                "{k} must be None or a string, not {}",
                                other.type_name()
                            )))
                        }
                    };
                    if *k == "sep" {
                        sep = text;
                    } else {
                        end = text;
                    }
                }
                let body = args
                    .iter()
                    .map(Value::to_text)
                    .collect::<Vec<_>>()
                    .join(&sep);
                self.tick(args.len() as u64)?;
                self.emit(&format!("{body}{end}"))?;
                Ok(Value::None)
            }
            "range" => {
                arity(1, 3)?;
                let ints = args
                    .iter()
                    .map(|a| {
                        a.as_int().ok_or_else(|| {
                            type_error(format!(
                                "'{}' object cannot be interpreted as an integer",
                                a.type_name()
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let (start, stop, step) = match ints.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    _ => unreachable!(),
                };
                if step == 0 {
                    return Err(CalcError::ValueError(
                        "range() arg 3 must not be zero".into(),
                    ));
                }
                Ok(Value::Range { start, stop, step })
            }
            "len" => {
                arity(1, 1)?;
                let n = match &args[0] {
                    Value::Str(s) => s.chars().count() as i64,
                    Value::List(v) => v.borrow().len() as i64,
                    Value::Tuple(v) => v.len() as i64,
                    r @ Value::Range { .. } => range_len(r),
                    other => {
                        return Err(type_error(format!(
                            "object of type '{}' has no len()",
                            other.type_name()
                        )))
                    }
                };
                Ok(Value::Int(n))
            }
            "abs" => {
                arity(1, 1)?;
                match &args[0] {
                    Value::Float(v) => Ok(Value::Float(v.abs())),
                    v => {
                        let i = v.as_int().ok_or_else(|| {
                            type_error(format!("bad operand type for abs(): '{}'", v.type_name()))
                        })?;
                        Ok(Value::Int(i.checked_abs().ok_or_else(|| overflow("abs"))?))
                    }
                }
            }
            "min" | "max" => {
                let items = if args.len() == 1 {
                    self.items(&args[0])?
                } else {
                    args
                };
                let mut it = items.into_iter();
                let mut best = it.next().ok_or_else(|| {
                    CalcError::ValueError(format!("{name}() arg is an empty sequence"))
                })?;
                let want = if name == "min" {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
                for v in it {
                    if order(&v, &best)? == want {
                        best = v;
                    }
                }
                Ok(best)
            }
            "sum" => {
                arity(1, 2)?;
                let items = self.items(&args[0])?;
                let mut total = args.get(1).cloned().unwrap_or(Value::Int(0));
                for v in &items {
                    total = binary(BinOp::Add, &total, v)?;
                }
                Ok(total)
            }
            "round" => {
                arity(1, 2)?;
                let x = &args[0];
                match args.get(1) {
                    None | Some(Value::None) => match x {
                        Value::Float(v) => {
                            let r = v.round_ties_even();
                            if !r.is_finite() || r.abs() >= 9.2e18 {
                                return Err(CalcError::Overflow(format!(
                                    "cannot convert {} to integer",
                                    float_repr(*v)
                                )));
                            }
                            Ok(Value::Int(r as i64))
                        }
                        v => Ok(Value::Int(v.as_int().ok_or_else(|| {
                            type_error(format!("type {} doesn't define __round__", v.type_name()))
                        })?)),
                    },
                    Some(n) => {
                        let n = n
                            .as_int()
                            .ok_or_else(|| type_error("round() digits must be an integer"))?;
                        match x {
                            Value::Float(v) => {
                                if !(0..=300).contains(&n) || !v.is_finite() {
                                    let scale = 10f64.powi(n as i32);
                                    return Ok(Value::Float((v * scale).round_ties_even() / scale));
                                }
                                let text = format!("{v:.p$}", p = n as usize);
                                Ok(Value::Float(text.parse().expect("formatted float parses")))
                            }
                            v => Ok(Value::Int(v.as_int().ok_or_else(|| {
                                type_error(format!(
                                    "type {} doesn't define __round__",
                                    v.type_name()
                                ))
                            })?)),
                        }
                    }
                }
            }
            "int" => {
                arity(1, 1)?;
                match &args[0] {
                    Value::Float(v) => {
                        if !v.is_finite() || v.abs() >= 9.2e18 {
                            return Err(CalcError::Overflow(format!(
                                "cannot convert {} to integer",
                                float_repr(*v)
                            )));
                        }
                        Ok(Value::Int(v.trunc() as i64))
                    }
                    Value::Str(s) => s.trim().parse().map(Value::Int).map_err(|_| {
                        CalcError::ValueError(format!(
                            "invalid literal for int(): {}",
                            args[0].repr()
                        ))
                    }),
                    v => Ok(Value::Int(v.as_int().ok_or_else(|| {
                        type_error(format!(
                            "int() argument must be a string or a number, not '{}'",
                            v.type_name()
                        ))
                    })?)),
                }
            }
            "float" => {
                arity(1, 1)?;
                match &args[0] {
                    Value::Str(s) => s.trim().parse().map(Value::Float).map_err(|_| {
                        CalcError::ValueError(format!(
                            "could not convert string to float: {}",
                            args[0].repr()
                        ))
                    }),
                    v => Ok(Value::Float(v.as_f64().ok_or_else(|| {
                        type_error(format!(
                            "float() argument must be a string or a number, not '{}'",
                            v.type_name()
                        ))
                    })?)),
                }
            }
            "str" => {
                arity(1, 1)?;
                Ok(Value::str(&args[0].to_text()))
            }
            "bool" => {
                arity(1, 1)?;
                Ok(Value::Bool(args[0].truthy()))
            }
            "list" => {
                arity(0, 1)?;
                let items = match args.first() {
                    Some(v) => self.items(v)?,
                    None => Vec::new(),
                };
                Ok(Value::list(items))
            }
            "sorted" => {
                arity(1, 1)?;
                let mut items = self.items(&args[0])?;
                let mut err = None;
                items.sort_by(|a, b| {
                    order(a, b).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        Ordering::Equal
                    })
                });
                if let Some(e) = err {
                    return Err(e);
                }
                if kwargs.iter().any(|(_, v)| v.truthy()) {
                    items.reverse();
                }
                Ok(Value::list(items))
            }
            "any" | "all" => {
                arity(1, 1)?;
                let items = self.items(&args[0])?;
                Ok(Value::Bool(if name == "any" {
                    items.iter().any(Value::truthy)
                } else {
                    items.iter().all(Value::truthy)
                }))
            }
            "enumerate" => {
                arity(1, 1)?;
                let items = self.items(&args[0])?;
                Ok(Value::list(
                    items
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| Value::Tuple(Rc::new(vec![Value::Int(i as i64), v])))
                        .collect(),
                ))
            }
            _ => Err(CalcError::UndefinedName(name.to_string())),
        }
    }
}

fn normalize_index(i: i64, len: usize) -> Option<usize> {
    let len = len as i64;
    let pos = if i < 0 { i + len } else { i };
    (0..len).contains(&pos).then_some(pos as usize)
}

fn iterate(v: &Value, cap: usize) -> Result<Vec<Value>, CalcError> {
    match v {
        Value::List(items) => Ok(items.borrow().clone()),
        Value::Tuple(items) => Ok(items.as_ref().clone()),
        Value::Str(s) => Ok(s.chars().map(|c| Value::str(&c.to_string())).collect()),
        Value::Range { start, step, .. } => {
            let n = range_len(v);
            if n as u64 > cap as u64 {
                return Err(CalcError::ValueError(
                    "range is too large to materialize".into(),
                ));
            }
            Ok((0..n)
                .map(|k| Value::Int(range_item(*start, *step, k)))
                .collect())
        }
        other => Err(type_error(format!(
            "'{}' object is not iterable",
            other.type_name()
        ))),
    }
}

fn index(base: &Value, idx: &Value) -> Result<Value, CalcError> {
    let i = idx
        .as_int()
        .ok_or_else(|| type_error(format!("indices must be integers, not {}", idx.type_name())))?;
    let out_of_range = || CalcError::IndexError(format!("{} index out of range", base.type_name()));
    match base {
        Value::List(items) => {
            let items = items.borrow();
            let pos = normalize_index(i, items.len()).ok_or_else(out_of_range)?;
            Ok(items[pos].clone())
        }
        Value::Tuple(items) => {
            let pos = normalize_index(i, items.len()).ok_or_else(out_of_range)?;
            Ok(items[pos].clone())
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let pos = normalize_index(i, chars.len()).ok_or_else(out_of_range)?;
            Ok(Value::str(&chars[pos].to_string()))
        }
        Value::Range { start, step, .. } => {
            let pos = normalize_index(i, range_len(base) as usize).ok_or_else(out_of_range)?;
            Ok(Value::Int(range_item(*start, *step, pos as i64)))
        }
        other => Err(type_error(format!(
            "'{}' object is not subscriptable",
            other.type_name()
        ))),
    }
}

fn slice(base: &Value, start: Option<&Value>, stop: Option<&Value>) -> Result<Value, CalcError> {
    let bound = |v: Option<&Value>, default: i64, len: i64| -> Result<usize, CalcError> {
        let raw = match v {
            None | Some(Value::None) => default,
            Some(v) => v
                .as_int()
                .ok_or_else(|| type_error("slice indices must be integers"))?,
        };
        let adjusted = if raw < 0 { raw + len } else { raw };
        Ok(adjusted.clamp(0, len) as usize)
    };
    match base {
        Value::List(_) | Value::Tuple(_) => {
            let items = iterate(base, MAX_SEQUENCE)?;
            let len = items.len() as i64;
            let (a, b) = (bound(start, 0, len)?, bound(stop, len, len)?);
            let part = if a < b {
                items[a..b].to_vec()
            } else {
                Vec::new()
            };
            Ok(match base {
                Value::List(_) => Value::list(part),
                _ => Value::Tuple(Rc::new(part)),
            })
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let len = chars.len() as i64;
            let (a, b) = (bound(start, 0, len)?, bound(stop, len, len)?);
            let part: String = if a < b {
                chars[a..b].iter().collect()
            } else {
                String::new()
            };
            Ok(Value::str(&part))
        }
        other => Err(type_error(format!(
            "'{}' object is not subscriptable",
            other.type_name()
        ))),
    }
}

fn python_mod(a: f64, b: f64) -> f64 {
    let r = a % b;
    if r != 0.0 && (r < 0.0) != (b < 0.0) {
        r + b
    } else {
        r
    }
}

fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, CalcError> {
    use BinOp::*;
    // Sequence operators first.
    match (op, a, b) {
        (Add, Value::Str(x), Value::Str(y)) => {
            if x.len() + y.len() > MAX_SEQUENCE {
                return Err(CalcError::ValueError("string is too large".into()));
            }
            return Ok(Value::str(&format!("{x}{y}")));
        }
        (Add, Value::List(x), Value::List(y)) => {
            if x.borrow().len() + y.borrow().len() > MAX_SEQUENCE {
                return Err(CalcError::ValueError("list is too large".into()));
            }
            let mut v = x.borrow().clone();
            v.extend(y.borrow().iter().cloned());
            return Ok(Value::list(v));
        }
        (Add, Value::Tuple(x), Value::Tuple(y)) => {
            let mut v = x.as_ref().clone();
            v.extend(y.iter().cloned());
            return Ok(Value::Tuple(Rc::new(v)));
        }
        (Mul, Value::Str(_) | Value::List(_) | Value::Tuple(_), n)
        | (Mul, n, Value::Str(_) | Value::List(_) | Value::Tuple(_))
            if n.as_int().is_some() =>
        {
            let seq = if matches!(a, Value::Str(_) | Value::List(_) | Value::Tuple(_)) {
                a
            } else {
                b
            };
            let n = n.as_int().unwrap_or(0).max(0) as usize;
            if seq.size().saturating_mul(n) > MAX_SEQUENCE {
                return Err(CalcError::ValueError(
                    "sequence repetition is too large".into(),
                ));
            }
            return Ok(match seq {
                Value::Str(s) => Value::str(&s.repeat(n)),
                Value::List(v) => {
                    let v = v.borrow();
                    Value::list(v.iter().cloned().cycle().take(v.len() * n).collect())
                }
                Value::Tuple(v) => Value::Tuple(Rc::new(
                    v.iter().cloned().cycle().take(v.len() * n).collect(),
                )),
                _ => unreachable!(),
            });
        }
        _ => {}
    }
    let unsupported = || {
        let sym = match op {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            FloorDiv => "//",
            Mod => "%",
            Pow => "**",
        };
        type_error(format!(
            "unsupported operand type(s) for {sym}: '{}' and '{}'",
            a.type_name(),
            b.type_name()
        ))
    };
    if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
        return Ok(match op {
            Add => Value::Int(x.checked_add(y).ok_or_else(|| overflow("addition"))?),
            Sub => Value::Int(x.checked_sub(y).ok_or_else(|| overflow("subtraction"))?),
            Mul => Value::Int(x.checked_mul(y).ok_or_else(|| overflow("multiplication"))?),
            Div => {
                if y == 0 {
                    return Err(CalcError::DivisionByZero);
                }
                Value::Float(x as f64 / y as f64)
            }
            FloorDiv => {
                if y == 0 {
                    return Err(CalcError::DivisionByZero);
                }
                let q = x.checked_div(y).ok_or_else(|| overflow("division"))?;
                let q = if (x % y != 0) && ((x < 0) != (y < 0)) {
                    q - 1
                } else {
                    q
                };
                Value::Int(q)
            }
            Mod => {
                if y == 0 {
                    return Err(CalcError::DivisionByZero);
                }
                let r = x.checked_rem(y).unwrap_or(0);
                Value::Int(if r != 0 && ((r < 0) != (y < 0)) {
                    r + y
                } else {
                    r
                })
            }
            Pow => {
                if y < 0 {
                    if x == 0 {
                        return Err(CalcError::DivisionByZero);
                    }
                    Value::Float((x as f64).powf(y as f64))
                } else {
                    let e = u32::try_from(y).map_err(|_| overflow("exponentiation"))?;
                    Value::Int(x.checked_pow(e).ok_or_else(|| overflow("exponentiation"))?)
                }
            }
        });
    }
    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
        return Err(unsupported());
    };
    Ok(Value::Float(match op {
        Add => x + y,
        Sub => x - y,
        Mul => x * y,
        Div => {
            if y == 0.0 {
                return Err(CalcError::DivisionByZero);
            }
            x / y
        }
        FloorDiv => {
            if y == 0.0 {
                return Err(CalcError::DivisionByZero);
            }
            (x / y).floor()
        }
        Mod => {
            if y == 0.0 {
                return Err(CalcError::DivisionByZero);
            }
            python_mod(x, y)
        }
        Pow => {
            if x == 0.0 && y < 0.0 {
                return Err(CalcError::DivisionByZero);
            }
            if x < 0.0 && y.fract() != 0.0 {
                return Err(CalcError::ValueError(
                    "negative number cannot be raised to a fractional power".into(),
                ));
            }
            let r = x.powf(y);
            if r.is_infinite() {
                return Err(CalcError::Overflow(
                    "float exponentiation result too large".into(),
                ));
            }
            r
        }
    }))
}

fn equal(a: &Value, b: &Value) -> bool {
    equal_at(a, b, 0)
}

fn equal_at(a: &Value, b: &Value, depth: usize) -> bool {
    let seq_eq = |x: &[Value], y: &[Value]| {
        depth <= MAX_DEPTH
            && x.len() == y.len()
            && x.iter().zip(y).all(|(p, q)| equal_at(p, q, depth + 1))
    };
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::List(x), Value::List(y)) => Rc::ptr_eq(x, y) || seq_eq(&x.borrow(), &y.borrow()),
        (Value::Tuple(x), Value::Tuple(y)) => seq_eq(x, y),
        (Value::None, Value::None) => true,
        (Value::Range { .. }, Value::Range { .. }) => a == b,
        _ => match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => x == y,
            _ => matches!((a.as_f64(), b.as_f64()), (Some(x), Some(y)) if x == y),
        },
    }
}

fn order(a: &Value, b: &Value) -> Result<Ordering, CalcError> {
    order_at(a, b, 0)
}

fn order_at(a: &Value, b: &Value, depth: usize) -> Result<Ordering, CalcError> {
    let seq_order = |x: &[Value], y: &[Value]| {
        if depth > MAX_DEPTH {
            return Err(CalcError::ValueError(
                "containers are nested too deeply to compare".into(),
            ));
        }
        for (p, q) in x.iter().zip(y) {
            if !equal_at(p, q, depth + 1) {
                return order_at(p, q, depth + 1);
            }
        }
        Ok(x.len().cmp(&y.len()))
    };
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        (Value::List(x), Value::List(y)) => {
            let (x, y) = (x.borrow().clone(), y.borrow().clone());
            seq_order(&x, &y)
        }
        (Value::Tuple(x), Value::Tuple(y)) => seq_order(x, y),
        _ => {
            if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
                return Ok(x.cmp(&y));
            }
            match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x
                    .partial_cmp(&y)
                    .ok_or_else(|| CalcError::ValueError("cannot order nan".into())),
                _ => Err(type_error(format!(
                    "'<' not supported between instances of '{}' and '{}'",
                    a.type_name(),
                    b.type_name()
                ))),
            }
        }
    }
}

fn contains(container: &Value, item: &Value) -> Result<bool, CalcError> {
    match container {
        Value::List(items) => Ok(items.borrow().iter().any(|v| equal(v, item))),
        Value::Tuple(items) => Ok(items.iter().any(|v| equal(v, item))),
        Value::Str(s) => match item {
            Value::Str(needle) => Ok(s.contains(needle.as_ref())),
            other => Err(type_error(format!(
                "'in <string>' requires string as left operand, not {}",
                other.type_name()
            ))),
        },
        Value::Range { start, step, .. } => {
            let Some(x) = item.as_int() else {
                return Ok(false);
            };
            let n = range_len(container);
            let offset = i128::from(x) - i128::from(*start);
            let step = i128::from(*step);
            Ok(n > 0 && offset % step == 0 && (0..i128::from(n)).contains(&(offset / step)))
        }
        other => Err(type_error(format!(
            "argument of type '{}' is not iterable",
            other.type_name()
        ))),
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, CalcError> {
    Ok(match op {
        CmpOp::Eq => equal(a, b),
        CmpOp::Ne => !equal(a, b),
        CmpOp::In => contains(b, a)?,
        CmpOp::NotIn => !contains(b, a)?,
        CmpOp::Lt => order(a, b)? == Ordering::Less,
        CmpOp::Le => order(a, b)? != Ordering::Greater,
        CmpOp::Gt => order(a, b)? == Ordering::Greater,
        CmpOp::Ge => order(a, b)? != Ordering::Less,
    })
}
