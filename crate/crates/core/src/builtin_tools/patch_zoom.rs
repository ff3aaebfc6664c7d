use std::path::{Path, PathBuf};

use image::{DynamicImage, GenericImageView, RgbaImage};
use serde_json::{json, Value};

use super::MetaSpec;
use crate::engine::{parse_tagged_fields, tags, EngineRequest};
use crate::toolbox::{
    required_str, ToolArgs, ToolCard, ToolContext, ToolError, ToolMetadata, ToolOutput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Region {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Center,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::TopLeft,
        Region::TopRight,
        Region::BottomLeft,
        Region::BottomRight,
        Region::Center,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Region::TopLeft => "top-left",
            Region::TopRight => "top-right",
            Region::BottomLeft => "bottom-left",
            Region::BottomRight => "bottom-right",
            Region::Center => "center",
        }
    }

    /// The option letter used in the engine prompt.
    pub fn letter(&self) -> char {
        match self {
            Region::TopLeft => 'A',
            Region::TopRight => 'B',
            Region::BottomLeft => 'C',
            Region::BottomRight => 'D',
            Region::Center => 'E',
        }
    }
}

/// `(x, y, width, height)` of each region. Quarters split at integer
/// halves so they tile the image exactly; the center covers the middle
/// half in each dimension.
pub fn crop_regions(width: u32, height: u32) -> [(Region, (u32, u32, u32, u32)); 5] {
    let (hw, hh) = (width / 2, height / 2);
    let (cw, ch) = (width / 2, height / 2);
    [
        (Region::TopLeft, (0, 0, hw, hh)),
        (Region::TopRight, (hw, 0, width - hw, hh)),
        (Region::BottomLeft, (0, hh, hw, height - hh)),
        (Region::BottomRight, (hw, hh, width - hw, height - hh)),
        (
            Region::Center,
            ((width - cw) / 2, (height - ch) / 2, cw, ch),
        ),
    ]
}

fn upscale_2x(src: &RgbaImage) -> RgbaImage {
    RgbaImage::from_fn(src.width() * 2, src.height() * 2, |x, y| {
        *src.get_pixel(x / 2, y / 2)
    })
}

/// Region letters mentioned in the engine's selection, in first-mention
/// order.
fn selected_regions(text: &str) -> Vec<Region> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    for w in chars.windows(3) {
        if w[0] == '(' && w[2] == ')' {
            if let Some(r) = Region::ALL.iter().find(|r| r.letter() == w[1]) {
                if !out.contains(r) {
                    out.push(*r);
                }
            }
        }
    }
    out
}

const PROMPT: &str = "\
Analyze this image to identify the most relevant region(s) for answering the question:

Question: {question}

The image is divided into 5 regions:
- (A) Top-left quarter
- (B) Top-right quarter
- (C) Bottom-left quarter
- (D) Bottom-right quarter
- (E) Center region (1/4 size, overlapping middle section)

Instructions:
1. First describe what you see in each of the five regions.
2. Then select the most relevant region(s) to answer the question.
3. Choose only the minimum necessary regions - avoid selecting redundant areas that show the same content. For example, if one patch contains the entire object(s), do not select another patch that only shows a part of the same object(s).

Response format:
<analysis>: Describe the image and five patches first. Then analyze the question and select the most relevant patch or list of patches.
<regions>: The selected region letters, for example (A) or (B), (E). Write None if no region is relevant.";

pub struct PatchZoomerTool {
    metadata: ToolMetadata,
}

impl PatchZoomerTool {
    pub fn new() -> Self {
        let metadata = MetaSpec {
            name: "Relevant_Patch_Zoomer_Tool",
            description: "A tool that analyzes an image, divides it into 5 regions (4 quarters + center), and identifies the most relevant patches based on a question. The returned patches are zoomed in by a factor of 2.",
            inputs: &[
                ("image", "str - The path to the image file."),
                ("question", "str - The question about the image content."),
            ],
            output: "dict - Contains analysis text and list of saved zoomed patch paths.",
            demos: &[(
                "execution = tool.execute(image=\"path/to/image.jpg\", question=\"What is the color of the car?\")",
                "Analyze image and return relevant zoomed patches that show the car's color.",
            )],
            user: &[(
                "best_practices",
                "It might be helpful to zoom in on the image first to get a better look at the object(s). It might be helpful if the question requires a close-up view of the object(s), symbols, texts, etc. The tool should be used to provide a high-level analysis first, and then use other tools for fine-grained analysis. For example, you can use Relevant_Patch_Zoomer_Tool first to get a zoomed patch of specific objects, and then use Image_Captioner_Tool to describe the objects in detail.",
            )],
            engine: true,
            network: false,
        }
        .build();
        Self { metadata }
    }

    fn save_patch(
        &self,
        img: &DynamicImage,
        source: &Path,
        region: Region,
        geometry: (u32, u32, u32, u32),
        dir: &Path,
    ) -> Result<PathBuf, ToolError> {
        let (x, y, w, h) = geometry;
        let crop = img.crop_imm(x, y, w, h).to_rgba8();
        let zoomed = upscale_2x(&crop);
        let stem = source
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image");
        let ext = source
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .filter(|e| matches!(e.as_str(), "png" | "jpg" | "jpeg"))
            .unwrap_or_else(|| "png".into());
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{stem}_{}_zoomed_2x.{ext}", region.label()));
        let result = if ext == "png" {
            zoomed.save(&path)
        } else {
            DynamicImage::ImageRgba8(zoomed).to_rgb8().save(&path)
        };
        result.map_err(|e| ToolError::Image(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}

impl Default for PatchZoomerTool {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolCard for PatchZoomerTool {
    fn metadata(&self) -> &ToolMetadata {
        &self.metadata
    }

    fn execute(&self, args: &ToolArgs, ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let raw = required_str(args, "image")?;
        let question = required_str(args, "question")?;
        let source = ctx.resolve_input(raw);
        let img = image::open(&source)
            .map_err(|e| ToolError::Image(format!("cannot decode `{raw}`: {e}")))?;
        let (width, height) = img.dimensions();
        if width < 2 || height < 2 {
            return Err(ToolError::Image(format!(
                "`{raw}` is too small to split ({width}x{height})"
            )));
        }

        let request = EngineRequest::new(
            tags::tool(&self.metadata.tool_name),
            PROMPT.replace("{question}", question),
        )
        .with_image(&source)
        .deterministic();
        let response = ctx.engine.complete(&request)?;
        let fields = parse_tagged_fields(&response.text, &["analysis", "regions"]);
        let analysis = fields
            .get("analysis")
            .cloned()
            .unwrap_or_else(|| response.text.trim().to_string());
        let selection = fields.get("regions").map(String::as_str).unwrap_or("");

        let geometry = crop_regions(width, height);
        let file_name = source.file_name().and_then(|s| s.to_str()).unwrap_or(raw);
        let mut patches = Vec::new();
        let mut artifacts = Vec::new();
        for region in selected_regions(selection) {
            let (_, rect) = geometry
                .iter()
                .find(|(r, _)| *r == region)
                .expect("all regions have geometry");
            let path = self.save_patch(&img, &source, region, *rect, &ctx.work_dir)?;
            let shown = path
                .strip_prefix(&ctx.root_dir)
                .unwrap_or(&path)
                .to_path_buf();
            patches.push(json!({
                "path": shown.to_string_lossy(),
                "description": format!("The {} region of the image: {file_name}.", region.label()),
                "region": region.label(),
            }));
            artifacts.push(path);
        }
        Ok(ToolOutput {
            payload: json!({ "analysis": analysis, "patches": Value::Array(patches) }),
            artifacts,
        })
    }
}
