use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed model output: {reason}")]
pub struct MalformedOutput {
    pub reason: String,
    pub raw: String,
}

/// Contents of every ``` fenced block, in order. An unterminated final
/// fence runs to the end of the text.
fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

/// Parses the last fenced block of `text` as JSON, or the whole trimmed
/// text when there is no fence.
pub fn extract_structured(text: &str) -> Result<Value, MalformedOutput> {
    let payload = match fenced_blocks(text).pop() {
        Some(block) => block,
        None => text.trim().to_string(),
    };
    serde_json::from_str(payload.trim()).map_err(|e| MalformedOutput {
        reason: e.to_string(),
        raw: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fenced_payload() {
        let v = extract_structured("Here you go:\n```\n{\"examples\": []}\n```").unwrap();
        assert_eq!(v["examples"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn last_block_wins_and_language_tag_ignored() {
        let t = "```json\n{\"a\": 1}\n```\nthen\n```json\n{\"a\": 2}\n```\n";
        assert_eq!(extract_structured(t).unwrap()["a"], 2);
    }

    #[test]
    fn bare_object() {
        assert_eq!(extract_structured("  {\"a\": 1} ").unwrap()["a"], 1);
    }

    #[test]
    fn prose_is_malformed() {
        let err = extract_structured("I cannot help with that.").unwrap_err();
        assert_eq!(err.raw, "I cannot help with that.");
    }

    #[test]
    fn unterminated_fence() {
        assert_eq!(extract_structured("ok\n```json\n{\"a\": 3}").unwrap()["a"], 3);
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC*") {
            let _ = extract_structured(&s);
        }
    }
}
