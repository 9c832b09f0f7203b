use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CueRecord, UcaRecord};
use crate::exec::{Methodology, RequirementSpec};
use crate::model::normalize_label;
use crate::shard::{DeviationRecord, Guideword};
use crate::HazardLevel;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArtifactRef {
    Uca(String),
    Cue(String),
    Shard { node_label: String, guideword: Guideword },
}

impl ArtifactRef {
    pub fn methodology(&self) -> Methodology {
        match self {
            ArtifactRef::Uca(_) | ArtifactRef::Cue(_) => Methodology::Stpa,
            ArtifactRef::Shard { .. } => Methodology::Shard,
        }
    }
}

impl fmt::Display for ArtifactRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArtifactRef::Uca(id) | ArtifactRef::Cue(id) => f.write_str(id),
            ArtifactRef::Shard { node_label, guideword } => write!(f, "SHARD:{node_label}/{guideword}"),
        }
    }
}

impl FromStr for ArtifactRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("SHARD:") {
            let (label, g) = rest
                .rsplit_once('/')
                .ok_or_else(|| format!("SHARD reference `{s}` needs `label/guideword`"))?;
            return Ok(ArtifactRef::Shard {
                node_label: label.to_string(),
                guideword: g.parse()?,
            });
        }
        if s.starts_with("UCA") {
            return Ok(ArtifactRef::Uca(s.to_string()));
        }
        if s.starts_with("CUE") {
            return Ok(ArtifactRef::Cue(s.to_string()));
        }
        Err(format!("unrecognised artifact reference `{s}`"))
    }
}

impl Serialize for ArtifactRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArtifactRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LinkRelation {
    DerivesFrom,
    Mitigates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LinkProvenance {
    Stated,
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceLink {
    pub requirement: String,
    pub artifact: ArtifactRef,
    pub relation: LinkRelation,
    pub provenance: LinkProvenance,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct LinkFile {
    schema_version: u32,
    links: Vec<TraceLink>,
}

pub fn parse_trace_links(text: &str) -> Result<Vec<TraceLink>, String> {
    let f: LinkFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if f.schema_version != 1 {
        return Err(format!("unsupported schemaVersion {}", f.schema_version));
    }
    Ok(f.links)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum TraceDiagnostic {
    /// The requirement is tagged with a methodology that none of its links use.
    UnlinkedMethodology { requirement: String, methodology: Methodology },
    /// A link points at an artifact of a methodology the requirement is not tagged with.
    ForeignMethodology { requirement: String, artifact: String },
    /// R20 onwards need at least one derivesFrom link.
    MissingDerivation { requirement: String },
    UnknownRequirement { requirement: String },
}

impl TraceDiagnostic {
    pub fn is_methodology_mismatch(&self) -> bool {
        matches!(
            self,
            TraceDiagnostic::UnlinkedMethodology { .. } | TraceDiagnostic::ForeignMethodology { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceRow {
    pub requirement: String,
    pub methodology: BTreeSet<Methodology>,
    pub links: Vec<TraceLink>,
}

impl TraceRow {
    pub fn stated(&self) -> impl Iterator<Item = &TraceLink> {
        self.links.iter().filter(|l| l.provenance == LinkProvenance::Stated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceabilityMatrix {
    pub rows: Vec<TraceRow>,
    pub diagnostics: Vec<TraceDiagnostic>,
    /// High and Medium findings no requirement links to.
    pub residual_risks: Vec<String>,
    /// Links whose artifact is absent from the loaded catalogs.
    pub unresolved: Vec<String>,
}

impl TraceabilityMatrix {
    pub fn row(&self, id: &str) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.requirement == id)
    }

    pub fn methodology_mismatches(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.is_methodology_mismatch()).count()
    }
}

pub fn trace_to_requirements(
    ucas: &[UcaRecord],
    cues: &[CueRecord],
    shard: &[DeviationRecord],
    requirements: &[RequirementSpec],
    links: &[TraceLink],
) -> TraceabilityMatrix {
    let uca_ids: BTreeSet<&str> = ucas.iter().map(|u| u.id.as_str()).collect();
    let cue_ids: BTreeSet<&str> = cues.iter().map(|c| c.id.as_str()).collect();
    let shard_keys: BTreeSet<(String, Guideword)> = shard.iter().map(DeviationRecord::key).collect();
    let resolves = |a: &ArtifactRef| match a {
        ArtifactRef::Uca(id) => uca_ids.contains(id.as_str()),
        ArtifactRef::Cue(id) => cue_ids.contains(id.as_str()),
        ArtifactRef::Shard { node_label, guideword } => {
            shard_keys.contains(&(normalize_label(node_label), *guideword))
        }
    };

    let known: BTreeSet<&str> = requirements.iter().map(|r| r.id.as_str()).collect();
    let mut diagnostics = Vec::new();
    let mut unresolved = Vec::new();
    let mut by_req: BTreeMap<&str, Vec<TraceLink>> = BTreeMap::new();
    for l in links {
        if !known.contains(l.requirement.as_str()) {
            diagnostics.push(TraceDiagnostic::UnknownRequirement {
                requirement: l.requirement.clone(),
            });
        } else if resolves(&l.artifact) {
            by_req.entry(l.requirement.as_str()).or_default().push(l.clone());
        } else {
            unresolved.push(format!("{} -> {}", l.requirement, l.artifact));
        }
    }

    let mut rows = Vec::new();
    for r in requirements {
        let links = by_req.remove(r.id.as_str()).unwrap_or_default();
        let used: BTreeSet<Methodology> = links.iter().map(|l| l.artifact.methodology()).collect();
        for m in r.methodology.difference(&used) {
            diagnostics.push(TraceDiagnostic::UnlinkedMethodology {
                requirement: r.id.clone(),
                methodology: *m,
            });
        }
        for l in links.iter().filter(|l| !r.methodology.contains(&l.artifact.methodology())) {
            diagnostics.push(TraceDiagnostic::ForeignMethodology {
                requirement: r.id.clone(),
                artifact: l.artifact.to_string(),
            });
        }
        if r.number() >= 20 && !links.iter().any(|l| l.relation == LinkRelation::DerivesFrom) {
            diagnostics.push(TraceDiagnostic::MissingDerivation {
                requirement: r.id.clone(),
            });
        }
        rows.push(TraceRow {
            requirement: r.id.clone(),
            methodology: r.methodology.clone(),
            links,
        });
    }

    let linked: BTreeSet<String> = rows
        .iter()
        .flat_map(|r| r.links.iter().map(|l| l.artifact.to_string()))
        .collect();
    let serious = |l: HazardLevel| l >= HazardLevel::Medium;
    let mut residual_risks = Vec::new();
    for u in ucas.iter().filter(|u| serious(u.hazard_level)) {
        if !linked.contains(&u.id) {
            residual_risks.push(u.id.clone());
        }
    }
    for c in cues.iter().filter(|c| serious(c.hazard_level)) {
        if !linked.contains(&c.id) {
            residual_risks.push(c.id.clone());
        }
    }
    for d in shard.iter().filter(|d| serious(d.hazard_level)) {
        let a = format!("SHARD:{}", d.reference());
        if !linked.contains(&a) {
            residual_risks.push(a);
        }
    }

    TraceabilityMatrix {
        rows,
        diagnostics,
        residual_risks,
        unresolved,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artifact_refs_round_trip() {
        for s in ["UCA28", "CUE04", "SHARD:Capture X-ray/Early", "SHARD:\"Release\" patient/Value"] {
            let a: ArtifactRef = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert_eq!("UCA01".parse::<ArtifactRef>().unwrap().methodology(), Methodology::Stpa);
        assert!("SHARD:x/Sideways".parse::<ArtifactRef>().is_err());
    }
}
