//! Prompt templates shipped as text files with `{{name}}` placeholders.

#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! template {
    ($name:literal) => {
        Template {
            name: $name,
            text: include_str!(concat!("../../prompts/", $name, ".txt")),
        }
    };
}

pub const SYSTEM: Template = template!("system");
pub const DATASET: Template = template!("dataset");
pub const CHECKS: Template = template!("checks");
pub const CHECKPOINT: Template = template!("checkpoint");
pub const HYPOTHESIS: Template = template!("hypothesis");
pub const SYNTHESIS: Template = template!("synthesis");
pub const REPAIR: Template = template!("repair");

pub const ALL: [Template; 7] = [SYSTEM, DATASET, CHECKS, CHECKPOINT, HYPOTHESIS, SYNTHESIS, REPAIR];

impl Template {
    /// Substitutes every `{{key}}`. Values are inserted verbatim, so a value
    /// containing a placeholder is not expanded again.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            match after.find("}}") {
                Some(close) => {
                    let key = &after[..close];
                    match vars.iter().find(|(k, _)| *k == key) {
                        Some((_, v)) => out.push_str(v),
                        None => {
                            debug_assert!(false, "template {} has no value for {key}", self.name);
                            out.push_str(&rest[open..open + 4 + close]);
                        }
                    }
                    rest = &after[close + 2..];
                }
                None => {
                    out.push_str(&rest[open..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out.trim_end().to_string()
    }

    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        let mut rest = self.text;
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            if !names.contains(&&after[..close]) {
                names.push(&after[..close]);
            }
            rest = &after[close + 2..];
        }
        names
    }
}
