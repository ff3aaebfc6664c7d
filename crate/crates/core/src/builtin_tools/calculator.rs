use serde_json::{json, Value};

use super::calc::{self, Limits};
use super::MetaSpec;
use crate::engine::{extract_code_block, tags, EngineRequest};
use crate::toolbox::{
    required_str, ToolArgs, ToolCard, ToolContext, ToolError, ToolMetadata, ToolOutput,
};

/// Instructions sent to the engine ahead of the query. They describe the
/// calculation dialect the interpreter accepts.
pub const DIALECT_PROMPT: &str = "\
Write a short program that solves the task below. The program runs in a restricted calculation language with Python-like syntax.

Allowed:
- assignment, including `a, b = 1, 2` and `items[0] = 5`
- arithmetic: + - * / // % ** and parentheses
- comparisons (including chained ones and `in`), and, or, not
- if / elif / else, for loops over range(...) or lists, while loops, break, continue
- lists, tuples, indexing and slicing
- built-in functions: print, range, len, abs, min, max, sum, round, int, float, str, bool, list, sorted, any, all, enumerate
- f-strings with {expression} and {expression:.2f} fields

Not allowed: import, def, lambda, class, attribute access such as x.append(...), comprehensions, dictionaries, files, network.

Print the final result with a descriptive message, for example print(f\"The sum is: {total}\").
Return only the program in a fenced code block.

Task: ";

pub struct CalculatorTool {
    metadata: ToolMetadata,
    limits: Limits,
}

impl CalculatorTool {
    pub fn new() -> Self {
        let metadata = MetaSpec {
            name: "Python_Code_Generator_Tool",
            description: "A tool that generates and executes simple Python code snippets for basic arithmetical calculations and math-related problems. The generated code runs in a highly restricted environment with only basic mathematical operations available.",
            inputs: &[(
                "query",
                "str - A clear, specific description of the arithmetic calculation or math problem to be solved, including any necessary numerical inputs.",
            )],
            output: "dict - A dictionary containing the generated code, calculation result, and any error messages.",
            demos: &[
                ("execution = tool.execute(query=\"Calculate the factorial of 5\")", "Generate a Python code snippet to calculate the factorial of 5."),
                ("execution = tool.execute(query=\"Find the sum of prime numbers up to 50\")", "Generate a Python code snippet to find the sum of prime numbers up to 50."),
                ("query=\"Given the list [1, 2, 3, 4, 5, 6, 7, 8, 9, 10], calculate the sum of squares of odd numbers\"\nexecution = tool.execute(query=query)", "Generate a Python function for a specific mathematical operation on a given list of numbers."),
            ],
            user: &[
                ("limitations", "Restricted to basic arithmetic, comparisons, loops, lists and the built-in functions print, range, len, abs, min, max, sum, round, int, float, str, bool, list, sorted, any, all and enumerate. No imports, function definitions, attribute access, files or network. Integers are 64-bit. Input must be provided directly in the query string. Programs stop after 1,000,000 evaluation steps."),
                ("best_practices", "Provide clear and specific queries that describe the desired mathematical calculation. Include all necessary numerical inputs directly in the query string. Keep tasks focused on basic arithmetic, algebraic calculations, or simple mathematical algorithms."),
            ],
            engine: true,
            network: false,
        }
        .build();
        Self {
            metadata,
            limits: Limits::default(),
        }
    }

    pub fn with_limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }
}

impl Default for CalculatorTool {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolCard for CalculatorTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let query = required_str(args, "query")?;
        let request = EngineRequest::new(
            tags::tool(&self.metadata.tool_name),
            format!("{DIALECT_PROMPT}{query}"),
        )
        .deterministic();
        let response = ctx.engine.complete(&request)?;
        let code = extract_code_block(&response.text);
        let outcome = calc::run_source(&code, self.limits);
        let error = outcome
            .error_text()
            .map(Value::String)
            .unwrap_or(Value::Null);
        Ok(ToolOutput::new(json!({
            "generated_code": code,
            "execution_result": outcome.stdout,
            "error": error,
        })))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::{FnEngine, Playbook, PlaybookEntry, ScriptedEngine};

    fn run(program: &str, query: &str) -> Value {
        let reply = format!("Here you go:\n```python\n{program}\n```\n");
        let engine = Arc::new(ScriptedEngine::new(Playbook::strict(vec![
            PlaybookEntry::new("tool:Python_Code_Generator_Tool", reply),
        ])));
        let dir = tempfile::tempdir().unwrap();
        let ctx = ToolContext::new(engine, dir.path());
        let args = [("query".to_string(), Value::String(query.into()))]
            .into_iter()
            .collect();
        CalculatorTool::new().execute(&args, &ctx).unwrap().payload
    }

    #[test]
    fn sum_example() {
        let p = run(
            "numbers = [1, 2, 3, 4, 5]\nresult = sum(numbers)\nprint(f'The sum is: {result}')",
            "Given the number list: [1, 2, 3, 4, 5], calculate the sum of all the numbers in the list.",
        );
        assert_eq!(p["execution_result"], "The sum is: 15");
        assert_eq!(p["error"], Value::Null);
        assert!(p["generated_code"]
            .as_str()
            .unwrap()
            .starts_with("numbers = "));
    }

    #[test]
    fn factorial() {
        let p = run(
            "f = 1\nfor i in range(1, 6):\n    f *= i\nprint(f\"5! = {f}\")",
            "Calculate the factorial of 5",
        );
        assert!(p["execution_result"].as_str().unwrap().contains("120"));
    }

    #[test]
    fn division_by_zero_is_reported_in_the_payload() {
        let p = run("x = 1 / 0", "divide");
        assert!(p["error"].as_str().unwrap().contains("division by zero"));
    }

    #[test]
    fn engine_failure_is_an_error() {
        let engine = Arc::new(FnEngine::new(|_| {
            Err(crate::engine::EngineError::Provider {
                status: Some(500),
                message: "down".into(),
            })
        }));
        let dir = tempfile::tempdir().unwrap();
        let ctx = ToolContext::new(engine, dir.path());
        let args = [("query".to_string(), Value::String("1+1".into()))]
            .into_iter()
            .collect();
        assert!(matches!(
            CalculatorTool::new().execute(&args, &ctx),
            Err(ToolError::Engine(_))
        ));
    }
}
