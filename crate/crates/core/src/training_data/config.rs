use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::FormatError;

/// One `- name: X` entry under `pipeline:` or `policies:`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, Value>,
}

impl ComponentSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn f64_param(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    pub fn usize_param(&self, key: &str) -> Option<usize> {
        self.params.get(key).and_then(Value::as_u64).map(|v| v as usize)
    }

    pub fn str_param(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    pub fn is_classifier(&self) -> bool {
        self.name.ends_with("Classifier")
    }
}

/// `config.yml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    #[serde(default = "default_language")]
    pub language: String,
    pub pipeline: Vec<ComponentSpec>,
    pub policies: Vec<ComponentSpec>,
}

fn default_language() -> String {
    "ur".to_string()
}

impl ProjectConfig {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let config: ProjectConfig = serde_yaml::from_str(text).map_err(|e| {
            let line = e.location().map(|l| l.line()).unwrap_or(0);
            FormatError::parse(line, e.to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), FormatError> {
        let classifiers = self.pipeline.iter().filter(|c| c.is_classifier()).count();
        if classifiers != 1 {
            return Err(FormatError::validation(
                None,
                format!("pipeline must contain exactly one classifier, found {classifiers}"),
            ));
        }
        if !self.pipeline.last().is_some_and(ComponentSpec::is_classifier) {
            return Err(FormatError::validation(
                None,
                "pipeline must end with its classifier component",
            ));
        }
        if self.policies.is_empty() {
            return Err(FormatError::validation(None, "policy list is empty"));
        }
        Ok(())
    }

    pub fn component(&self, name: &str) -> Option<&ComponentSpec> {
        self.pipeline.iter().find(|c| c.name == name)
    }

    pub fn classifier(&self) -> &ComponentSpec {
        self.pipeline.last().expect("validated pipeline is non-empty")
    }

    pub fn policy(&self, name: &str) -> Option<&ComponentSpec> {
        self.policies.iter().find(|c| c.name == name)
    }
}
