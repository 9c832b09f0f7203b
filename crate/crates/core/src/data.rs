//! The shipped data set, embedded at build time, plus a loader for an
//! on-disk copy.

use std::path::{Path, PathBuf};

use crate::exec::{parse_requirements, ConfigError, ExecConfig, RegistryError, RequirementSpec};
use crate::model::{parse_model, ParseError, ProcessModel};
use crate::sim::{Scenario, ScenarioError};
use crate::shard::{parse_shard_catalog, ApplicabilityRule, CatalogError, DeviationRecord, RuleError};
use crate::stpa::{
    parse_cue_catalog, parse_trace_links, parse_uca_catalog, CueRecord, TraceLink, UcaCatalogError,
    UcaRecord,
};

pub const MODEL_FILE: &str = "mammobot.proc";
pub const RULES_FILE: &str = "shard_rules.json";
pub const CONFIG_FILE: &str = "exec_config.json";
pub const SHARD_FILE: &str = "shard_catalog.csv";
pub const UCA_FILE: &str = "uca_catalog.csv";
pub const CUE_FILE: &str = "cue_catalog.csv";
pub const REQUIREMENTS_FILE: &str = "requirements.json";
pub const LINKS_FILE: &str = "trace_links.json";

pub const MODEL_DSL: &str = include_str!("../../../data/mammobot.proc");
pub const RULES_JSON: &str = include_str!("../../../data/shard_rules.json");
pub const CONFIG_JSON: &str = include_str!("../../../data/exec_config.json");
pub const SHARD_CSV: &str = include_str!("../../../data/shard_catalog.csv");
pub const UCA_CSV: &str = include_str!("../../../data/uca_catalog.csv");
pub const CUE_CSV: &str = include_str!("../../../data/cue_catalog.csv");
pub const REQUIREMENTS_JSON: &str = include_str!("../../../data/requirements.json");
pub const LINKS_JSON: &str = include_str!("../../../data/trace_links.json");

/// Shipped scenario scripts by name.
pub const SCENARIOS: [(&str, &str); 5] = [
    ("nominal", include_str!("../../../data/scenarios/nominal.json")),
    ("capture_commission", include_str!("../../../data/scenarios/capture_commission.json")),
    ("arm_positioning_early", include_str!("../../../data/scenarios/arm_positioning_early.json")),
    ("uca28", include_str!("../../../data/scenarios/uca28.json")),
    ("uca30", include_str!("../../../data/scenarios/uca30.json")),
];

/// The four High-severity hazard scenarios.
pub const HAZARD_SCENARIOS: [&str; 4] = ["capture_commission", "arm_positioning_early", "uca28", "uca30"];

pub fn scenario(name: &str) -> Option<Result<Scenario, ScenarioError>> {
    SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text))
}

pub fn canonical_model() -> ProcessModel {
    parse_model(MODEL_DSL).expect("shipped model is valid")
}

pub fn canonical_rules() -> ApplicabilityRule {
    ApplicabilityRule::from_json(RULES_JSON).expect("shipped rules are valid")
}

pub fn canonical_config() -> ExecConfig {
    ExecConfig::from_json(CONFIG_JSON).expect("shipped config is valid")
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{MODEL_FILE}: {0}")]
    Model(#[from] ParseError),
    #[error("{RULES_FILE}: {0}")]
    Rules(#[from] RuleError),
    #[error("{CONFIG_FILE}: {0}")]
    Config(#[from] ConfigError),
    #[error("{SHARD_FILE}: {0}")]
    Shard(#[from] CatalogError),
    #[error("UCA/CUE catalog: {0}")]
    Uca(#[from] UcaCatalogError),
    #[error("{REQUIREMENTS_FILE}: {0}")]
    Requirements(#[from] RegistryError),
    #[error("{LINKS_FILE}: {0}")]
    Links(String),
}

/// Everything the analyses and the simulator read.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub model: ProcessModel,
    pub rules: ApplicabilityRule,
    pub config: ExecConfig,
    pub shard: Vec<DeviationRecord>,
    pub ucas: Vec<UcaRecord>,
    pub cues: Vec<CueRecord>,
    pub requirements: Vec<RequirementSpec>,
    pub links: Vec<TraceLink>,
}

struct Texts<'a> {
    model: &'a str,
    rules: &'a str,
    config: &'a str,
    shard: &'a str,
    uca: &'a str,
    cue: &'a str,
    requirements: &'a str,
    links: &'a str,
}

impl DataSet {
    pub fn canonical() -> Self {
        Self::from_texts(Texts {
            model: MODEL_DSL,
            rules: RULES_JSON,
            config: CONFIG_JSON,
            shard: SHARD_CSV,
            uca: UCA_CSV,
            cue: CUE_CSV,
            requirements: REQUIREMENTS_JSON,
            links: LINKS_JSON,
        })
        .expect("shipped data set is valid")
    }

    /// Load from a directory laid out like the shipped `data/`.
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| DataError::Io { path, source })
        };
        let (model, rules, config, shard, uca, cue, requirements, links) = (
            read(MODEL_FILE)?,
            read(RULES_FILE)?,
            read(CONFIG_FILE)?,
            read(SHARD_FILE)?,
            read(UCA_FILE)?,
            read(CUE_FILE)?,
            read(REQUIREMENTS_FILE)?,
            read(LINKS_FILE)?,
        );
        Self::from_texts(Texts {
            model: &model,
            rules: &rules,
            config: &config,
            shard: &shard,
            uca: &uca,
            cue: &cue,
            requirements: &requirements,
            links: &links,
        })
    }

    fn from_texts(t: Texts<'_>) -> Result<Self, DataError> {
        let model = parse_model(t.model)?;
        let shard = parse_shard_catalog(t.shard, Some(&model))?;
        Ok(DataSet {
            rules: ApplicabilityRule::from_json(t.rules)?,
            config: ExecConfig::from_json(t.config)?,
            shard,
            ucas: parse_uca_catalog(t.uca)?,
            cues: parse_cue_catalog(t.cue)?,
            requirements: parse_requirements(t.requirements)?,
            links: parse_trace_links(t.links).map_err(DataError::Links)?,
            model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_is_the_default() {
        assert_eq!(canonical_config(), ExecConfig::default());
    }

    #[test]
    fn on_disk_copy_matches_embedded() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
        let disk = DataSet::load(&dir).unwrap();
        let emb = DataSet::canonical();
        assert_eq!(disk.model, emb.model);
        assert_eq!(disk.shard, emb.shard);
        assert_eq!(disk.links, emb.links);
    }
}
