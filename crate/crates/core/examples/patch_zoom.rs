//! Crops an image into four quarters and a center patch, lets a scripted
//! engine pick the relevant one, and writes it zoomed 2x.
//!
//! cargo run --example patch_zoom

use std::sync::Arc;

use anyhow::Result;
use image::{Rgb, RgbImage};
use serde_json::Value;
use toolcards::builtin_tools::PatchZoomerTool;
use toolcards::engine::{Playbook, PlaybookEntry, ScriptedEngine};
use toolcards::toolbox::ToolArgs;
use toolcards::{ToolCard, ToolContext};

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("toolcards-patch-zoom");
    std::fs::create_dir_all(&dir)?;
    // A red square in the bottom-right quarter.
    let img = RgbImage::from_fn(64, 48, |x, y| {
        if x > 40 && y > 30 {
            Rgb([220, 30, 30])
        } else {
            Rgb([240, 240, 240])
        }
    });
    img.save(dir.join("street.png"))?;

    let engine = Arc::new(ScriptedEngine::new(Playbook::strict(vec![
        PlaybookEntry::new(
            "tool:Relevant_Patch_Zoomer_Tool",
            "<analysis>: The red car is in the bottom-right quarter.\n<regions>: (D)",
        ),
    ])));
    let ctx = ToolContext::new(engine, &dir);
    let args: ToolArgs = [
        ("image".to_string(), Value::from("street.png")),
        (
            "question".to_string(),
            Value::from("What color is the car?"),
        ),
    ]
    .into_iter()
    .collect();
    let out = PatchZoomerTool::new().execute(&args, &ctx)?;

    println!("{}", serde_json::to_string_pretty(&out.payload)?);
    for path in &out.artifacts {
        let (w, h) = image::image_dimensions(dir.join(path))?;
        println!("wrote {} ({w}x{h})", path.display());
    }
    Ok(())
}
