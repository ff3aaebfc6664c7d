//! Runs programs through the restricted calculation dialect, including ones
//! that fail: division by zero, a runaway loop and a forbidden import.
//!
//! cargo run --example restricted_calculator

use toolcards::builtin_tools::calc::{run_source, Limits};

const PROGRAMS: [(&str, &str); 5] = [
    ("sum", "numbers = [1, 2, 3, 4, 5]\nresult = sum(numbers)\nprint(f\"The sum is: {result}\")"),
    (
        "primes",
        "total = 0\nfor n in range(2, 50):\n    prime = True\n    for d in range(2, n):\n        if n % d == 0:\n            prime = False\n            break\n    if prime:\n        total += n\nprint(total)",
    ),
    ("divide", "x = 10\ny = 0\nprint(x / y)"),
    ("runaway", "i = 0\nwhile True:\n    i += 1"),
    ("import", "import os\nprint(os.getcwd())"),
];

fn main() {
    for (name, source) in PROGRAMS {
        let outcome = run_source(source, Limits::default());
        println!("== {name}");
        if !outcome.stdout.is_empty() {
            println!("stdout: {}", outcome.stdout);
        }
        if let Some(err) = outcome.error_text() {
            println!("error:  {err}");
        }
    }
}
