//! The four-part system prompt sent to chat models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractionError;

const BUNDLED_SPEC: &str = include_str!("../../data/prompt_spec.json");
const BUNDLED_CONTEXT: &str = include_str!("../../data/background_context.md");

/// Role, task, background and expected behaviour, rendered in that order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub role: String,
    pub task_description: String,
    pub background_context: String,
    pub expected_behaviour: String,
}

#[derive(Deserialize)]
struct PromptSpecFile {
    role: String,
    task_description: String,
    #[serde(default)]
    background_context: Option<String>,
    expected_behaviour: String,
}

impl PromptSpec {
    pub fn new(
        role: impl Into<String>,
        task_description: impl Into<String>,
        background_context: impl Into<String>,
        expected_behaviour: impl Into<String>,
    ) -> Result<Self, ExtractionError> {
        let spec = PromptSpec {
            role: role.into(),
            task_description: task_description.into(),
            background_context: background_context.into(),
            expected_behaviour: expected_behaviour.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The prompt spec shipped in `data/`, with the bundled background excerpt.
    pub fn bundled() -> Self {
        PromptSpec::from_json(BUNDLED_SPEC).expect("bundled prompt spec is valid")
    }

    /// Parses a spec file. A missing `background_context` falls back to the
    /// bundled excerpt.
    pub fn from_json(text: &str) -> Result<Self, ExtractionError> {
        let file: PromptSpecFile =
            serde_json::from_str(text).map_err(|e| ExtractionError::Prompt(e.to_string()))?;
        PromptSpec::new(
            file.role,
            file.task_description,
            file.background_context
                .unwrap_or_else(|| BUNDLED_CONTEXT.trim_end().to_string()),
            file.expected_behaviour,
        )
    }

    pub fn load(path: &Path) -> Result<Self, ExtractionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExtractionError::Prompt(format!("{}: {e}", path.display())))?;
        PromptSpec::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExtractionError> {
        for (name, value) in [
            ("role", &self.role),
            ("task_description", &self.task_description),
            ("background_context", &self.background_context),
            ("expected_behaviour", &self.expected_behaviour),
        ] {
            if value.trim().is_empty() {
                return Err(ExtractionError::Prompt(format!("`{name}` is empty")));
            }
        }
        Ok(())
    }
}

/// Renders the system prompt: the four parts joined by blank lines.
pub fn build_prompt(spec: &PromptSpec) -> String {
    [
        spec.role.as_str(),
        spec.task_description.as_str(),
        spec.background_context.as_str(),
        spec.expected_behaviour.as_str(),
    ]
    .join("\n\n")
}
