//! Prompt templates shipped as assets, with `{placeholder}` substitution.

use sha2::{Digest, Sha256};

use crate::dsl::ReasoningMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Template {
    Diagnosis(ReasoningMode),
    Coding(ReasoningMode),
    Initialize,
}

pub const SHA256SUMS: &str = include_str!("../../assets/prompts/SHA256SUMS");

impl Template {
    pub const ALL: [Template; 7] = [
        Template::Coding(ReasoningMode::Combine),
        Template::Coding(ReasoningMode::Explore),
        Template::Coding(ReasoningMode::Mutate),
        Template::Diagnosis(ReasoningMode::Combine),
        Template::Diagnosis(ReasoningMode::Explore),
        Template::Diagnosis(ReasoningMode::Mutate),
        Template::Initialize,
    ];

    pub fn file_name(&self) -> &'static str {
        use ReasoningMode::*;
        match self {
            Template::Diagnosis(Combine) => "diagnosis_combine.txt",
            Template::Diagnosis(Mutate) => "diagnosis_mutate.txt",
            Template::Diagnosis(Explore) => "diagnosis_explore.txt",
            Template::Coding(Combine) => "coding_combine.txt",
            Template::Coding(Mutate) => "coding_mutate.txt",
            Template::Coding(Explore) => "coding_explore.txt",
            Template::Initialize => "initialize.txt",
        }
    }

    pub fn text(&self) -> &'static str {
        use ReasoningMode::*;
        match self {
            Template::Diagnosis(Combine) => include_str!("../../assets/prompts/diagnosis_combine.txt"),
            Template::Diagnosis(Mutate) => include_str!("../../assets/prompts/diagnosis_mutate.txt"),
            Template::Diagnosis(Explore) => include_str!("../../assets/prompts/diagnosis_explore.txt"),
            Template::Coding(Combine) => include_str!("../../assets/prompts/coding_combine.txt"),
            Template::Coding(Mutate) => include_str!("../../assets/prompts/coding_mutate.txt"),
            Template::Coding(Explore) => include_str!("../../assets/prompts/coding_explore.txt"),
            Template::Initialize => include_str!("../../assets/prompts/initialize.txt"),
        }
    }

    pub fn sha256(&self) -> String {
        Sha256::digest(self.text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Checksum recorded for this template in `SHA256SUMS`.
    pub fn shipped_sha256(&self) -> Option<&'static str> {
        SHA256SUMS.lines().find_map(|l| {
            let (sum, name) = l.split_once("  ")?;
            (name.trim() == self.file_name()).then_some(sum)
        })
    }

    /// Substitutes every `{name}` in `vars`. Unknown placeholders are left as is.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        render(self.text(), vars)
    }
}

pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                let key = &after[..end];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
