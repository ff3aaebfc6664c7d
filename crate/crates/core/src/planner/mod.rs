//! Query analyzer, action predictor, context verifier and solution
//! summarizer: prompt renderers plus response parsers over an [`Engine`].

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{parse_tagged_fields, tags, Engine, EngineError, EngineRequest};
use crate::memory::{render_for_prompt_with, Trajectory, DEFAULT_RESULT_LIMIT};
use crate::toolbox::{RegistryError, ToolRegistry};

/// The five prompt templates, keyed by component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub query_analyzer: String,
    pub action_predictor: String,
    pub command_generator: String,
    pub context_verifier: String,
    pub solution_summarizer: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            query_analyzer: include_str!("../../prompts/query_analyzer.txt").into(),
            action_predictor: include_str!("../../prompts/action_predictor.txt").into(),
            command_generator: include_str!("../../prompts/command_generator.txt").into(),
            context_verifier: include_str!("../../prompts/context_verifier.txt").into(),
            solution_summarizer: include_str!("../../prompts/solution_summarizer.txt").into(),
        }
    }

    /// Built-in templates, with any `<component>.txt` found in `dir`
    /// replacing its counterpart.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for (name, slot) in [
            ("query_analyzer", &mut set.query_analyzer),
            ("action_predictor", &mut set.action_predictor),
            ("command_generator", &mut set.command_generator),
            ("context_verifier", &mut set.context_verifier),
            ("solution_summarizer", &mut set.solution_summarizer),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                *slot = std::fs::read_to_string(path)?;
            }
        }
        Ok(set)
    }

    /// Single-pass `{slot}` substitution. Braces that do not name a known
    /// slot are left untouched, and substituted text is never rescanned.
    pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let hit = after.find('}').and_then(|close| {
                let name = &after[..close];
                slots
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| (close, *v))
            });
            match hit {
                Some((close, value)) => {
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                None => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// `{image}` slot: the path, or `None`.
pub fn image_slot(image: Option<&Path>) -> String {
    image.map_or_else(|| "None".to_string(), |p| p.display().to_string())
}

/// `{image_info}` slot: path plus pixel size when the file decodes.
pub fn image_info(image: Option<&Path>) -> String {
    match image {
        None => "None".into(),
        Some(path) => match image::image_dimensions(path) {
            Ok((w, h)) => format!("Image path: {}\nImage size: {w}x{h}", path.display()),
            Err(_) => format!("Image path: {}", path.display()),
        },
    }
}

/// `{available_tools}` slot, rendered like a Python list literal.
pub fn tool_list(names: &[String]) -> String {
    let quoted: Vec<String> = names.iter().map(|n| format!("'{n}'")).collect();
    format!("[{}]", quoted.join(", "))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialPlan {
    pub raw_text: String,
    pub summary: Option<String>,
    pub required_skills: Option<String>,
    pub relevant_tools: Option<String>,
    pub additional_considerations: Option<String>,
}

#[derive(Clone, Copy)]
enum PlanSection {
    Summary,
    Skills,
    Tools,
    Considerations,
}

fn plan_heading(line: &str) -> Option<(PlanSection, &str)> {
    let stripped = line.trim_start_matches(|c: char| {
        c == '#' || c == '*' || c.is_whitespace() || c.is_ascii_digit() || c == '.'
    });
    let lower = stripped.to_ascii_lowercase();
    let section = [
        ("summary", PlanSection::Summary),
        ("required skills", PlanSection::Skills),
        ("skills", PlanSection::Skills),
        ("relevant tools", PlanSection::Tools),
        ("tools", PlanSection::Tools),
        ("additional considerations", PlanSection::Considerations),
        ("considerations", PlanSection::Considerations),
    ]
    .into_iter()
    .find(|(key, _)| lower.starts_with(key))?;
    let colon = stripped.find(':')?;
    if colon > 40 {
        return None;
    }
    let tail = stripped[colon + 1..].trim_start_matches(['*', ' ']);
    Some((section.1, tail))
}

impl InitialPlan {
    /// Splits an analyzer response into its sections where headings such as
    /// `Summary:` or `**Relevant Tools**:` are recognizable.
    pub fn from_response(text: &str) -> Self {
        let mut plan = InitialPlan {
            raw_text: text.to_string(),
            ..Default::default()
        };
        let mut current: Option<(PlanSection, Vec<&str>)> = None;
        let flush = |plan: &mut InitialPlan, current: Option<(PlanSection, Vec<&str>)>| {
            if let Some((section, lines)) = current {
                let body = lines.join("\n").trim().to_string();
                let slot = match section {
                    PlanSection::Summary => &mut plan.summary,
                    PlanSection::Skills => &mut plan.required_skills,
                    PlanSection::Tools => &mut plan.relevant_tools,
                    PlanSection::Considerations => &mut plan.additional_considerations,
                };
                if slot.is_none() && !body.is_empty() {
                    *slot = Some(body);
                }
            }
        };
        for line in text.lines() {
            match plan_heading(line) {
                Some((section, tail)) => {
                    flush(&mut plan, current.take());
                    current = Some((section, vec![tail]));
                }
                None => {
                    if let Some((_, lines)) = current.as_mut() {
                        lines.push(line);
                    }
                }
            }
        }
        flush(&mut plan, current);
        plan
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub step_index: usize,
    pub justification: String,
    pub context: String,
    pub sub_goal: String,
    pub tool_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub analysis: String,
    pub stop_signal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub text: String,
    /// The "Answer to the Query" section, or the whole text when absent.
    pub direct_answer: String,
    pub failed: bool,
    pub budget_exhausted: bool,
}

impl FinalAnswer {
    pub fn from_response(text: &str) -> Self {
        Self {
            text: text.to_string(),
            direct_answer: extract_direct_answer(text),
            failed: false,
            budget_exhausted: false,
        }
    }
}

fn is_numbered_heading(line: &str) -> bool {
    let t = line.trim_start_matches(|c: char| c == '#' || c == '*' || c.is_whitespace());
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    digits > 0 && t[digits..].starts_with('.')
}

/// Pulls the body of the "Answer to the Query" section out of a summary.
pub fn extract_direct_answer(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    const HEADING: &str = "answer to the query";
    let Some(start) = lines
        .iter()
        .position(|l| l.to_ascii_lowercase().contains(HEADING))
    else {
        return text.trim().to_string();
    };
    let head = lines[start];
    // ASCII lowercasing keeps byte offsets, so the match position carries over.
    let at = head.to_ascii_lowercase().find(HEADING).unwrap_or(0) + HEADING.len();
    let tail = head[at..].trim_start_matches(['*', ':', ' ']);
    let mut body = vec![tail];
    for line in &lines[start + 1..] {
        if is_numbered_heading(line) || line.trim_start().starts_with('#') {
            break;
        }
        body.push(line);
    }
    let answer = body.join("\n").trim().to_string();
    if answer.is_empty() {
        text.trim().to_string()
    } else {
        answer
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("action could not be parsed: {reason}")]
    ActionParseFailure {
        partial: Box<Action>,
        reason: String,
    },
}

const ACTION_FIELDS: [&str; 4] = ["justification", "context", "sub_goal", "tool_name"];
const VERDICT_FIELDS: [&str; 2] = ["analysis", "stop_signal"];

fn clean_tool_name(raw: &str) -> String {
    raw.lines()
        .next()
        .unwrap_or("")
        .trim()
        .trim_matches(|c: char| c == '`' || c == '*' || c == '"' || c == '\'' || c == '.')
        .trim()
        .to_string()
}

/// Parses the `<stop_signal>` field. Only the literal tokens `True` and
/// `False` count; anything else is `None`.
pub fn parse_stop_signal(field: &str) -> Option<bool> {
    let token: String = field
        .trim()
        .trim_start_matches(['"', '\'', '`', '*'])
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    match token.as_str() {
        "True" => Some(true),
        "False" => Some(false),
        _ => None,
    }
}

/// A per-solve planner bound to an engine, a registry and the enabled set.
pub struct Planner<'a> {
    engine: &'a dyn Engine,
    registry: &'a ToolRegistry,
    enabled: Vec<String>,
    prompts: &'a PromptSet,
    digest: String,
    result_limit: usize,
}

impl<'a> Planner<'a> {
    pub fn new(
        engine: &'a dyn Engine,
        registry: &'a ToolRegistry,
        enabled: &BTreeSet<String>,
        prompts: &'a PromptSet,
    ) -> Result<Self, RegistryError> {
        Ok(Self {
            engine,
            registry,
            enabled: registry.ordered(enabled)?,
            prompts,
            digest: registry.metadata_digest(enabled)?,
            result_limit: DEFAULT_RESULT_LIMIT,
        })
    }

    /// Per-result character cap used when rendering the trajectory.
    pub fn with_result_limit(mut self, limit: usize) -> Self {
        self.result_limit = limit;
        self
    }

    pub fn enabled(&self) -> &[String] {
        &self.enabled
    }

    pub fn registry(&self) -> &ToolRegistry {
        self.registry
    }

    pub fn analyzer_prompt(&self, query: &str, image: Option<&Path>) -> String {
        PromptSet::fill(
            &self.prompts.query_analyzer,
            &[
                ("available_tools", &tool_list(&self.enabled)),
                ("toolbox_metadata", &self.digest),
                ("image_info", &image_info(image)),
                ("question", query),
            ],
        )
    }

    pub fn analyze_query(
        &self,
        query: &str,
        image: Option<&Path>,
    ) -> Result<InitialPlan, PlannerError> {
        if query.trim().is_empty() {
            return Err(EngineError::InvalidRequest("query is empty".into()).into());
        }
        let mut request =
            EngineRequest::new(tags::QUERY_ANALYZER, self.analyzer_prompt(query, image));
        if let Some(path) = image {
            request = request.with_image(path);
        }
        let response = self.engine.complete(&request)?;
        Ok(InitialPlan::from_response(&response.text))
    }

    pub fn action_prompt(
        &self,
        query: &str,
        image: Option<&Path>,
        plan: &InitialPlan,
        trajectory: &Trajectory,
        step_count: usize,
        max_steps: usize,
    ) -> String {
        PromptSet::fill(
            &self.prompts.action_predictor,
            &[
                ("question", query),
                ("image", &image_slot(image)),
                ("query_analysis", &plan.raw_text),
                ("available_tools", &tool_list(&self.enabled)),
                ("toolbox_metadata", &self.digest),
                (
                    "memory",
                    &render_for_prompt_with(trajectory, self.result_limit),
                ),
                ("step_count", &step_count.to_string()),
                ("max_step_count", &max_steps.to_string()),
                (
                    "remaining_steps",
                    &max_steps.saturating_sub(step_count).to_string(),
                ),
            ],
        )
    }

    /// Predicts the next action. An invalid or missing tool name gets one
    /// corrective re-ask before the step is declared unparseable.
    pub fn predict_action(
        &self,
        query: &str,
        image: Option<&Path>,
        plan: &InitialPlan,
        trajectory: &Trajectory,
        step_count: usize,
        max_steps: usize,
    ) -> Result<Action, PlannerError> {
        let base_prompt = self.action_prompt(query, image, plan, trajectory, step_count, max_steps);
        let mut prompt = base_prompt.clone();
        let mut last_reason = String::new();
        let mut partial = Action::default();
        for attempt in 0..2 {
            let response = self.engine.complete(
                &EngineRequest::new(tags::ACTION_PREDICTOR, prompt.clone()).deterministic(),
            )?;
            let fields = parse_tagged_fields(&response.text, &ACTION_FIELDS);
            let get = |k: &str| fields.get(k).cloned().unwrap_or_default();
            partial = Action {
                step_index: step_count,
                justification: get("justification"),
                context: get("context"),
                sub_goal: get("sub_goal"),
                tool_name: clean_tool_name(&get("tool_name")),
            };
            last_reason = if !self.enabled.contains(&partial.tool_name) {
                format!(
                    "tool name `{}` is not one of the available tools {}",
                    partial.tool_name,
                    tool_list(&self.enabled)
                )
            } else if partial.sub_goal.is_empty() {
                "the <sub_goal> field is missing or empty".to_string()
            } else {
                return Ok(partial);
            };
            if attempt == 0 {
                tracing::warn!(reason = %last_reason, "re-asking action predictor");
                prompt = format!(
                    "{base_prompt}\n\nYour previous answer was invalid: {last_reason}. Answer again with all four fields; <tool_name> MUST exactly match one of {}.",
                    tool_list(&self.enabled)
                );
            }
        }
        Err(PlannerError::ActionParseFailure {
            partial: Box::new(partial),
            reason: last_reason,
        })
    }

    pub fn verifier_prompt(
        &self,
        query: &str,
        image: Option<&Path>,
        plan: &InitialPlan,
        trajectory: &Trajectory,
    ) -> String {
        PromptSet::fill(
            &self.prompts.context_verifier,
            &[
                ("question", query),
                ("image_info", &image_info(image)),
                ("available_tools", &tool_list(&self.enabled)),
                ("toolbox_metadata", &self.digest),
                ("query_analysis", &plan.raw_text),
                (
                    "memory",
                    &render_for_prompt_with(trajectory, self.result_limit),
                ),
            ],
        )
    }

    /// Asks whether the trajectory suffices. Malformed output means continue.
    pub fn verify_context(
        &self,
        query: &str,
        image: Option<&Path>,
        plan: &InitialPlan,
        trajectory: &Trajectory,
    ) -> Result<Verdict, PlannerError> {
        let prompt = self.verifier_prompt(query, image, plan, trajectory);
        let response = self
            .engine
            .complete(&EngineRequest::new(tags::CONTEXT_VERIFIER, prompt).deterministic())?;
        let fields = parse_tagged_fields(&response.text, &VERDICT_FIELDS);
        let raw_signal = fields.get("stop_signal").map(String::as_str).unwrap_or("");
        let stop_signal = parse_stop_signal(raw_signal).unwrap_or_else(|| {
            tracing::warn!(field = raw_signal, "unparseable stop_signal, continuing");
            false
        });
        Ok(Verdict {
            analysis: fields
                .get("analysis")
                .cloned()
                .unwrap_or_else(|| response.text.trim().to_string()),
            stop_signal,
        })
    }

    pub fn summarize(
        &self,
        query: &str,
        image: Option<&Path>,
        trajectory: &Trajectory,
    ) -> Result<FinalAnswer, PlannerError> {
        summarize(
            self.engine,
            self.prompts,
            query,
            image,
            trajectory,
            self.result_limit,
        )
    }
}

pub fn summarizer_prompt(
    prompts: &PromptSet,
    query: &str,
    image: Option<&Path>,
    trajectory: &Trajectory,
    result_limit: usize,
) -> String {
    PromptSet::fill(
        &prompts.solution_summarizer,
        &[
            ("question", query),
            ("image_info", &image_info(image)),
            ("memory", &render_for_prompt_with(trajectory, result_limit)),
        ],
    )
}

/// Compiles the final answer from the trajectory.
pub fn summarize(
    engine: &dyn Engine,
    prompts: &PromptSet,
    query: &str,
    image: Option<&Path>,
    trajectory: &Trajectory,
    result_limit: usize,
) -> Result<FinalAnswer, PlannerError> {
    let prompt = summarizer_prompt(prompts, query, image, trajectory, result_limit);
    let response =
        engine.complete(&EngineRequest::new(tags::SOLUTION_SUMMARIZER, prompt).deterministic())?;
    Ok(FinalAnswer::from_response(&response.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_is_single_pass() {
        let out = PromptSet::fill("a {x} b {y} {unknown} {x}", &[("x", "{y}"), ("y", "Y")]);
        assert_eq!(out, "a {y} b Y {unknown} {y}");
        assert_eq!(PromptSet::fill("tail {", &[]), "tail {");
    }

    #[test]
    fn builtin_templates_carry_their_slots() {
        let p = PromptSet::builtin();
        assert!(p.query_analyzer.contains("{toolbox_metadata}"));
        assert!(p
            .action_predictor
            .contains("Current Step: {step_count} in {max_step_count} steps"));
        assert!(p.command_generator.contains("{tool_metadata}"));
        assert!(p.context_verifier.contains("<stop_signal>"));
        assert!(p.solution_summarizer.contains("Answer to the Query"));
    }

    #[test]
    fn stop_signal_is_strict() {
        assert_eq!(parse_stop_signal("True"), Some(true));
        assert_eq!(parse_stop_signal("\"False\""), Some(false));
        assert_eq!(parse_stop_signal("**True**"), Some(true));
        assert_eq!(parse_stop_signal("true"), None);
        assert_eq!(parse_stop_signal("STOP"), None);
        assert_eq!(parse_stop_signal(""), None);
    }

    #[test]
    fn plan_sections_are_best_effort() {
        let plan = InitialPlan::from_response(
            "**Summary**: count balls\n\n**Required Skills**:\n1. Counting\n\n**Relevant Tools**:\n1. Image_Captioner_Tool\n2. Object_Detector_Tool\n\n**Additional Considerations**:\nNone",
        );
        assert_eq!(plan.summary.as_deref(), Some("count balls"));
        assert!(plan
            .relevant_tools
            .unwrap()
            .contains("Object_Detector_Tool"));
        assert!(plan.required_skills.unwrap().contains("Counting"));
        assert_eq!(plan.additional_considerations.as_deref(), Some("None"));
        assert_eq!(InitialPlan::from_response("free prose").summary, None);
    }

    #[test]
    fn direct_answer_section() {
        let text = "1. Summary:\nx\n\n4. Answer to the Query:\nThere are 20 baseballs.\n\n5. Additional Insights:\nnone";
        assert_eq!(extract_direct_answer(text), "There are 20 baseballs.");
        assert_eq!(extract_direct_answer("  just 7 "), "just 7");
        assert_eq!(extract_direct_answer("**Answer to the Query**: 42"), "42");
        assert_eq!(
            extract_direct_answer("Answer to the query: a total of 20 baseballs."),
            "a total of 20 baseballs."
        );
    }

    #[test]
    fn tool_names_are_cleaned() {
        assert_eq!(
            clean_tool_name(" `Image_Captioner_Tool`\nextra"),
            "Image_Captioner_Tool"
        );
        assert_eq!(clean_tool_name("**X_Tool**"), "X_Tool");
    }

    #[test]
    fn tool_list_looks_like_python() {
        assert_eq!(tool_list(&["A".into(), "B".into()]), "['A', 'B']");
        assert_eq!(tool_list(&[]), "[]");
    }
}
