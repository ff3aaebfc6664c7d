//! Parses command scripts the way the executor does and shows which rule a
//! rejected script breaks.
//!
//! cargo run --example command_grammar

use toolcards::executor::parse_script;

const SCRIPTS: [&str; 5] = [
    "execution = tool.execute(query=\"weather in Paris\")",
    "labels = [\"baseball\"]\nthreshold = 0.5\nexecution = tool.execute(image=\"a.png\", labels=labels, threshold=threshold)",
    "execution1 = tool.execute(query=\"...\")\nexecution2 = tool.execute(query=\"...\")",
    "urls = [\"https://example.com/1\", \"https://example.com/2\"]\nexecution = tool.execute(url=urls[0])\nexecution = tool.execute(url=urls[1])",
    "import os\nexecution = tool.execute(path=os.getcwd())",
];

fn main() {
    for source in SCRIPTS {
        println!("---\n{source}");
        match parse_script(source) {
            Ok(script) => println!(
                "=> ok, {} call(s); canonical form:\n{}",
                script.exec_count(),
                script.render()
            ),
            Err(e) => println!("=> rejected: {e}"),
        }
    }
}
