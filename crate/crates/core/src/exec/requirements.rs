use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Methodology {
    #[serde(rename = "SHARD")]
    Shard,
    #[serde(rename = "STPA")]
    Stpa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RequirementCategory {
    Functional,
    Safety,
    #[serde(rename = "HRI")]
    Hri,
    Additional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequirementSpec {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<String>,
    pub category: RequirementCategory,
    pub methodology: BTreeSet<Methodology>,
    pub monitor_binding: String,
}

impl RequirementSpec {
    pub fn number(&self) -> u32 {
        self.id.trim_start_matches('R').parse().unwrap_or(0)
    }

    pub fn is_informational(&self) -> bool {
        self.monitor_binding == "informational"
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Registry {
    schema_version: u32,
    requirements: Vec<RequirementSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("reading registry: {0}")]
    Io(#[from] std::io::Error),
    #[error("registry JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported registry schemaVersion {0}")]
    Version(u32),
    #[error("bad requirement id `{0}`")]
    BadId(String),
    #[error("duplicate requirement id `{0}`")]
    Duplicate(String),
    #[error("requirement {0} has an empty methodology set")]
    NoMethodology(String),
}

pub fn parse_requirements(text: &str) -> Result<Vec<RequirementSpec>, RegistryError> {
    let reg: Registry = serde_json::from_str(text)?;
    if reg.schema_version != 1 {
        return Err(RegistryError::Version(reg.schema_version));
    }
    let mut seen = BTreeSet::new();
    for r in &reg.requirements {
        if r.number() == 0 || r.id != format!("R{}", r.number()) {
            return Err(RegistryError::BadId(r.id.clone()));
        }
        if !seen.insert(r.id.clone()) {
            return Err(RegistryError::Duplicate(r.id.clone()));
        }
        if r.methodology.is_empty() {
            return Err(RegistryError::NoMethodology(r.id.clone()));
        }
    }
    let mut reqs = reg.requirements;
    reqs.sort_by_key(RequirementSpec::number);
    Ok(reqs)
}

pub fn load_requirements(path: &Path) -> Result<Vec<RequirementSpec>, RegistryError> {
    parse_requirements(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_ids() {
        let text = r#"{"schemaVersion":1,"requirements":[{"id":"X1","text":"t","category":"Safety","methodology":["SHARD"],"monitorBinding":"informational"}]}"#;
        assert!(matches!(parse_requirements(text), Err(RegistryError::BadId(_))));
    }

    #[test]
    fn parses_minimal_registry() {
        let text = r#"{"schemaVersion":1,"requirements":[{"id":"R2","text":"t","category":"HRI","methodology":["STPA","SHARD"],"monitorBinding":"x"},{"id":"R1","text":"t","category":"Safety","methodology":["SHARD"],"monitorBinding":"informational"}]}"#;
        let reqs = parse_requirements(text).unwrap();
        assert_eq!(reqs[0].id, "R1");
        assert!(reqs[0].is_informational());
        assert_eq!(reqs[1].methodology.len(), 2);
    }
}
