use serde_json::Value;

use super::MetaSpec;
use crate::engine::{tags, EngineRequest};
use crate::toolbox::{
    required_str, str_arg, ToolArgs, ToolCard, ToolContext, ToolError, ToolMetadata, ToolOutput,
};

pub const DEFAULT_CAPTION_PROMPT: &str = "Describe this image in detail.";

/// Sends `prompt` (and optionally an image) to the engine and returns the
/// reply verbatim.
fn ask(
    tool: &str,
    prompt: &str,
    image: Option<&str>,
    ctx: &ToolContext,
) -> Result<ToolOutput, ToolError> {
    let mut request = EngineRequest::new(tags::tool(tool), prompt);
    if let Some(raw) = image {
        let path = ctx.resolve_input(raw);
        if !path.is_file() {
            return Err(ToolError::InvalidArgument {
                name: "image".into(),
                reason: format!("file `{raw}` does not exist"),
            });
        }
        request = request.with_image(path);
    }
    let response = ctx.engine.complete(&request)?;
    Ok(ToolOutput::new(Value::String(response.text)))
}

pub struct GeneralistTool {
    metadata: ToolMetadata,
}

impl GeneralistTool {
    pub fn new() -> Self {
        let metadata = MetaSpec {
            name: "Generalist_Solution_Generator_Tool",
            description: "A generalized tool that takes query from the user as prompt, and answers the question step by step to the best of its ability. It can also accept an image.",
            inputs: &[
                ("prompt", "str - The prompt that includes query from the user to guide the agent to generate response (Examples: 'Describe this image in detail')."),
                ("image", "str - The path to the image file if applicable (default: None)."),
            ],
            output: "str - The generated response to the original query prompt",
            demos: &[
                ("execution = tool.execute(prompt=\"Summarize the following text in a few lines\")", "Generate a short summary given the prompt from the user."),
                ("execution = tool.execute(prompt=\"Explain the mood of this scene.\", image=\"path/to/image1.png\")", "Generate a caption focusing on the mood using a specific prompt and image."),
                ("execution = tool.execute(prompt=\"Give your best coordinate estimate for the pacemaker in the image and return (x1, y1, x2, y2)\", image=\"path/to/image2.png\")", "Generate bounding box coordinates given the image and prompt from the user. The format should be (x1, y1, x2, y2)."),
                ("execution = tool.execute(prompt=\"Is the number of tiny objects that are behind the small metal jet less than the number of tiny things left of the tiny sedan?\", image=\"path/to/image2.png\")", "Answer a question step by step given the image."),
            ],
            user: &[
                ("limitation", "The Generalist_Solution_Generator_Tool may provide hallucinated or incorrect responses."),
                ("best_practice", "Use the Generalist_Solution_Generator_Tool for general queries or tasks that don't require specialized knowledge or specific tools in the toolbox. For optimal results:\n\n1) Provide clear, specific prompts.\n2) Use it to answer the original query through step by step reasoning for tasks without complex or multi-step reasoning.\n3) For complex queries, break them down into subtasks and use the tool multiple times.\n4) Use it as a starting point for complex tasks, then refine with specialized tools.\n5) Verify important information from its responses.\n6) For image-related tasks, ensure the image path is correct and the prompt is relevant to the image content."),
            ],
            engine: true,
            network: false,
        }
        .build();
        Self { metadata }
    }
}

impl Default for GeneralistTool {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolCard for GeneralistTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let prompt = required_str(args, "prompt")?;
        ask(
            &self.metadata.tool_name,
            prompt,
            str_arg(args, "image")?,
            ctx,
        )
    }
}

/// The generalist call with an image and a default prompt.
pub struct ImageCaptionerTool {
    metadata: ToolMetadata,
}

impl ImageCaptionerTool {
    pub fn new() -> Self {
        let metadata = MetaSpec {
            name: "Image_Captioner_Tool",
            description: "A tool that generates captions for images using OpenAI's multimodal model.",
            inputs: &[
                ("image", "str - The path to the image file."),
                ("prompt", "str - The prompt to guide the image captioning (default: 'Describe this image in detail.')."),
            ],
            output: "str - The generated caption for the image.",
            demos: &[
                ("execution = tool.execute(image=\"path/to/image.png\")", "Generate a caption for an image using the default prompt and model."),
                ("execution = tool.execute(image=\"path/to/image.png\", prompt=\"Explain the mood of this scene.\")", "Generate a caption focusing on the mood using a specific prompt and model."),
            ],
            user: &[(
                "limitation",
                "The Image_Captioner_Tool provides general image descriptions but has limitations: 1) May make mistakes in complex scenes, counting, attribute detection, and understanding object relationships. 2) Might not generate comprehensive captions, especially for images with multiple objects or abstract concepts. 3) Performance varies with image complexity. 4) Struggles with culturally specific or domain-specific content. 5) May overlook details or misinterpret object relationships. For precise descriptions, consider: using it with other tools for context/verification, as an initial step before refinement, or in multi-step processes for ambiguity resolution. Verify critical information with specialized tools or human expertise when necessary.",
            )],
            engine: true,
            network: false,
        }
        .build();
        Self { metadata }
    }
}

impl Default for ImageCaptionerTool {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolCard for ImageCaptionerTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let image = required_str(args, "image")?;
        let prompt = str_arg(args, "prompt")?.unwrap_or(DEFAULT_CAPTION_PROMPT);
        ask(&self.metadata.tool_name, prompt, Some(image), ctx)
    }
}
