//! A small, step-limited calculation language in a host-language-like
//! surface syntax.
//!
//! Supported: assignment (including `a, b = ...` and `x[i] = ...`),
//! augmented assignment, arithmetic `+ - * / // % **`, comparisons
//! (chained, `in`, `not in`), `and`/`or`/`not`, `x if c else y`,
//! `if`/`elif`/`else`, `for` over ranges, lists, tuples and strings,
//! `while`, `break`, `continue`, `pass`, indexing and slicing, f-strings
//! with `{expr}` and `{expr:.Nf}` fields, and the builtins `print`, `range`,
//! `len`, `abs`, `min`, `max`, `sum`, `round`, `int`, `float`, `str`,
//! `bool`, `list`, `sorted`, `any`, `all`, `enumerate`.
//!
//! Not supported: imports, function and class definitions, lambdas,
//! attribute access, comprehensions, dictionaries. Integers are 64-bit and
//! overflow is an error.
//!
//! Evaluation can only reach the outside world through [`Host::write`].

mod interp;
mod lexer;
mod parser;

pub use interp::{float_repr, Value};
pub use parser::Stmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalcError {
    #[error("SyntaxError: line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("ZeroDivisionError: division by zero")]
    DivisionByZero,
    #[error("NameError: name '{0}' is not defined")]
    UndefinedName(String),
    #[error("StepLimitExceeded: program exceeded {0} evaluation steps")]
    StepLimitExceeded(u64),
    #[error("OutputLimitExceeded: program printed more than {0} bytes")]
    OutputLimitExceeded(usize),
    #[error("TypeError: {0}")]
    TypeError(String),
    #[error("IndexError: {0}")]
    IndexError(String),
    #[error("OverflowError: {0}")]
    Overflow(String),
    #[error("ValueError: {0}")]
    ValueError(String),
}

impl CalcError {
    /// Re-homes a syntax error found while parsing an f-string field.
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            CalcError::Syntax { message, .. } => CalcError::Syntax { line, message },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_steps: u64,
    /// Bytes of printed output.
    pub max_output: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            max_output: 64 * 1024,
        }
    }
}

/// The only capability a running program has.
pub trait Host {
    fn write(&mut self, text: &str);
}

impl Host for String {
    fn write(&mut self, text: &str) {
        self.push_str(text);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalcProgram {
    pub source: String,
    pub parsed: Vec<Stmt>,
}

pub fn parse_program(source: &str) -> Result<CalcProgram, CalcError> {
    Ok(CalcProgram {
        source: source.to_string(),
        parsed: parser::parse_program(source)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalcOutcome {
    /// Printed output, with one trailing newline removed.
    pub stdout: String,
    pub error: Option<CalcError>,
    /// Line of the statement that failed, when `error` is a runtime error.
    pub error_line: Option<usize>,
}

impl CalcOutcome {
    pub fn error_text(&self) -> Option<String> {
        let err = self.error.as_ref()?;
        Some(match (err, self.error_line) {
            (CalcError::Syntax { .. }, _) | (_, None) => err.to_string(),
            (_, Some(line)) => format!("line {line}: {err}"),
        })
    }
}

pub fn interpret(program: &CalcProgram, limits: Limits) -> CalcOutcome {
    let mut out = String::new();
    let mut outcome = interpret_with_host(program, limits, &mut out);
    if out.ends_with('\n') {
        out.pop();
    }
    outcome.stdout = out;
    outcome
}

/// Runs `program`, sending printed text to `host`. The returned outcome
/// has an empty `stdout`; the host holds the output.
pub fn interpret_with_host(
    program: &CalcProgram,
    limits: Limits,
    host: &mut dyn Host,
) -> CalcOutcome {
    let mut interp = interp::Interp::new(limits, host);
    let result = interp.run(&program.parsed);
    let line = interp.line;
    let error = result.err();
    CalcOutcome {
        stdout: String::new(),
        error_line: error
            .as_ref()
            .filter(|e| !matches!(e, CalcError::Syntax { .. }))
            .map(|_| line),
        error,
    }
}

/// Parses and runs `source` in one go; a parse error becomes the outcome's
/// error.
pub fn run_source(source: &str, limits: Limits) -> CalcOutcome {
    match parse_program(source) {
        Ok(program) => interpret(&program, limits),
        Err(e) => CalcOutcome {
            stdout: String::new(),
            error: Some(e),
            error_line: None,
        },
    }
}
