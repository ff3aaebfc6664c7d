//! Every shipped demo command parses; those of offline cards also run.

use std::sync::Arc;

use image::{Rgba, RgbaImage};
use serde_json::Value;

use toolcards::builtin_tools::{default_registry, net::FixtureTransport};
use toolcards::clock::SystemClock;
use toolcards::engine::{Playbook, PlaybookEntry, ScriptedEngine};
use toolcards::executor::{execute_script, parse_script};
use toolcards::toolbox::ToolStatus;
use toolcards::ToolContext;

/// Calculator programs per demo, with the value each must print.
const PROGRAMS: [(&str, &str, &str); 3] = [
    ("factorial", "result = 1\nfor i in range(1, 6):\n    result *= i\nprint(result)", "120"),
    (
        "prime",
        "total = 0\nfor n in range(2, 51):\n    prime = True\n    for d in range(2, n):\n        if n % d == 0:\n            prime = False\n    if prime:\n        total += n\nprint(total)",
        "328",
    ),
    (
        "squares",
        "numbers = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]\ntotal = 0\nfor x in numbers:\n    if x % 2 == 1:\n        total += x * x\nprint(total)",
        "165",
    ),
];

fn engine() -> Arc<ScriptedEngine> {
    let mut entries: Vec<PlaybookEntry> = PROGRAMS
        .iter()
        .map(|(needle, code, _)| {
            PlaybookEntry::new(
                "tool:Python_Code_Generator_Tool",
                format!("```python\n{code}\n```"),
            )
            .containing(*needle)
        })
        .collect();
    entries.push(PlaybookEntry::new(
        "tool:Generalist_Solution_Generator_Tool",
        "A considered answer.",
    ));
    entries.push(PlaybookEntry::new(
        "tool:Image_Captioner_Tool",
        "A red car parked on a street.",
    ));
    entries.push(PlaybookEntry::new(
        "tool:Relevant_Patch_Zoomer_Tool",
        "<analysis>: The car is bottom right.\n<regions>: (D)",
    ));
    Arc::new(ScriptedEngine::new(Playbook::lenient(entries)))
}

#[test]
fn every_demo_command_parses() {
    let registry = default_registry(Arc::new(FixtureTransport::new("unused"))).unwrap();
    for name in registry.names() {
        for demo in &registry.get(name).unwrap().metadata().demo_commands {
            parse_script(&demo.command).unwrap_or_else(|e| panic!("{name}: {e}\n{}", demo.command));
        }
    }
}

#[test]
fn offline_demo_commands_execute() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("path/to");
    std::fs::create_dir_all(&images).unwrap();
    let mut img = RgbaImage::new(8, 6);
    img.put_pixel(7, 5, Rgba([255, 0, 0, 255]));
    for file in ["image.png", "image1.png", "image2.png", "image.jpg"] {
        image::DynamicImage::ImageRgba8(img.clone())
            .to_rgb8()
            .save(images.join(file))
            .unwrap();
    }

    let registry = default_registry(Arc::new(FixtureTransport::new("unused"))).unwrap();
    let ctx = ToolContext::new(engine(), dir.path());
    let mut ran = 0;
    for name in registry.names() {
        let card = registry.get(name).unwrap();
        let meta = card.metadata();
        if meta.requires_network {
            continue;
        }
        for demo in &meta.demo_commands {
            let script = parse_script(&demo.command).unwrap();
            let step = execute_script(&script, card, &ctx, &SystemClock::default(), None).unwrap();
            assert_eq!(step.results.len(), script.exec_count());
            for result in &step.results {
                assert_eq!(
                    result.status,
                    ToolStatus::Ok,
                    "{name}: {:?}\n{}",
                    result.error_message,
                    demo.command
                );
            }
            if name == "Python_Code_Generator_Tool" {
                let payload = &step.results[0].payload;
                assert_eq!(payload["error"], Value::Null, "{}", demo.command);
                let (_, _, expected) = PROGRAMS
                    .iter()
                    .find(|(needle, _, _)| demo.command.contains(needle))
                    .unwrap();
                assert_eq!(payload["execution_result"], *expected, "{}", demo.command);
            }
            ran += 1;
        }
    }
    // Generalist 4, captioner 2, calculator 3, patch zoomer 1.
    assert_eq!(ran, 10);
}
