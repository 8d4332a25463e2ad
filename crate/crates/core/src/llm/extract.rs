use serde::{Deserialize, Serialize};

/// An LLM reply split into the natural-language plan and the macro.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroGeneration {
    pub plan_text: String,
    pub macro_text: String,
    pub raw_response: String,
}

/// Extracts the single fenced code block from a reply. Everything outside
/// the block becomes the plan.
pub fn extract_generation(raw: &str) -> Result<MacroGeneration, String> {
    let mut blocks: Vec<String> = Vec::new();
    let mut plan: Vec<&str> = Vec::new();
    let mut open: Option<Vec<&str>> = None;

    for line in raw.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match open.as_mut() {
            None if is_fence => open = Some(Vec::new()),
            None => plan.push(line),
            Some(body) if is_fence && line.trim() == "```" => {
                blocks.push(body.join("\n"));
                open = None;
            }
            Some(body) => body.push(line),
        }
    }
    if open.is_some() {
        return Err("unterminated fenced code block".into());
    }
    match blocks.len() {
        0 => Err("no fenced code block in response".into()),
        1 => {
            let macro_text = blocks.pop().unwrap();
            if macro_text.trim().is_empty() {
                return Err("fenced code block is empty".into());
            }
            Ok(MacroGeneration {
                plan_text: plan.join("\n").trim().to_string(),
                macro_text: format!("{}\n", macro_text.trim_end()),
                raw_response: raw.to_string(),
            })
        }
        n => Err(format!("expected exactly one fenced code block, found {n}")),
    }
}
