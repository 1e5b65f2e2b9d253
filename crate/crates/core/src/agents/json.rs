//! Pulling structured JSON out of free-form completions.

use serde::de::DeserializeOwned;

/// The first balanced top-level `{...}` in `text`, honouring string literals
/// and escapes. An object that never closes yields `None`.
pub fn extract_first_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts and deserializes the first JSON object of a completion.
pub fn parse_completion<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let object = extract_first_object(text).ok_or_else(|| "no JSON object in completion".to_string())?;
    serde_json::from_str(object).map_err(|e| e.to_string())
}
