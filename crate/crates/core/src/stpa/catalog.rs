use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Controller, UcaCategory};
use crate::model::Node;
use crate::HazardLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UcaRole {
    /// Radiographer.
    R,
    /// Patient.
    P,
}

impl UcaRole {
    pub fn controller(self) -> Controller {
        match self {
            UcaRole::R => Controller::Radiographer,
            UcaRole::P => Controller::Patient,
        }
    }
}

impl fmt::Display for UcaRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UcaRole::R => "R",
            UcaRole::P => "P",
        })
    }
}

impl FromStr for UcaRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "R" => Ok(UcaRole::R),
            "P" => Ok(UcaRole::P),
            other => Err(format!("role must be R or P, found `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UcaRecord {
    pub id: String,
    pub node_label: String,
    pub role: UcaRole,
    pub category: UcaCategory,
    pub causes: String,
    pub effects: String,
    pub detection: String,
    pub recommendation: String,
    pub hazard_level: HazardLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CueRecord {
    pub id: String,
    pub description: String,
    pub causes: String,
    pub effects: String,
    pub detection: String,
    pub recommendation: String,
    pub hazard_level: HazardLevel,
}

#[derive(Debug, thiserror::Error)]
pub enum UcaCatalogError {
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("record {record}: {message}")]
    Schema { record: usize, message: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

const UCA_HEADER: [&str; 9] = [
    "id",
    "node",
    "role",
    "category",
    "causes",
    "effects",
    "detection",
    "recommendation",
    "hazard_level",
];
const CUE_HEADER: [&str; 7] = [
    "id",
    "description",
    "causes",
    "effects",
    "detection",
    "recommendation",
    "hazard_level",
];

fn rows(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, UcaCatalogError> {
    if text.lines().all(|l| l.trim().is_empty() || l.starts_with('#')) {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    if rdr.headers()?.iter().ne(header.iter().copied()) {
        return Err(UcaCatalogError::Schema {
            record: 0,
            message: format!("expected header `{}`", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, r) in rdr.records().enumerate() {
        let r = r?;
        if r.len() != header.len() {
            return Err(UcaCatalogError::Schema {
                record: i + 1,
                message: format!("expected {} fields, found {}", header.len(), r.len()),
            });
        }
        out.push(r);
    }
    Ok(out)
}

fn check_id(id: &str, prefix: &str, max: u32, record: usize) -> Result<(), UcaCatalogError> {
    let ok = id
        .strip_prefix(prefix)
        .filter(|d| d.len() == 2)
        .and_then(|d| d.parse::<u32>().ok())
        .is_some_and(|n| (1..=max).contains(&n));
    if ok {
        Ok(())
    } else {
        Err(UcaCatalogError::Schema {
            record,
            message: format!("id `{id}` outside {prefix}01..{prefix}{max:02}"),
        })
    }
}

fn level(value: &str, record: usize) -> Result<HazardLevel, UcaCatalogError> {
    value.parse().map_err(|_| UcaCatalogError::Schema {
        record,
        message: format!("unknown hazard level `{value}`"),
    })
}

pub fn parse_uca_catalog(text: &str) -> Result<Vec<UcaRecord>, UcaCatalogError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, r) in rows(text, &UCA_HEADER)?.into_iter().enumerate() {
        let record = i + 1;
        check_id(&r[0], "UCA", 99, record)?;
        if !seen.insert(r[0].to_string()) {
            return Err(UcaCatalogError::DuplicateId(r[0].to_string()));
        }
        let schema = |message| UcaCatalogError::Schema { record, message };
        out.push(UcaRecord {
            id: r[0].to_string(),
            node_label: r[1].to_string(),
            role: r[2].parse().map_err(schema)?,
            category: r[3].parse().map_err(schema)?,
            causes: r[4].to_string(),
            effects: r[5].to_string(),
            detection: r[6].to_string(),
            recommendation: r[7].to_string(),
            hazard_level: level(&r[8], record)?,
        });
    }
    Ok(out)
}

pub fn parse_cue_catalog(text: &str) -> Result<Vec<CueRecord>, UcaCatalogError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, r) in rows(text, &CUE_HEADER)?.into_iter().enumerate() {
        let record = i + 1;
        check_id(&r[0], "CUE", 7, record)?;
        if !seen.insert(r[0].to_string()) {
            return Err(UcaCatalogError::DuplicateId(r[0].to_string()));
        }
        out.push(CueRecord {
            id: r[0].to_string(),
            description: r[1].to_string(),
            causes: r[2].to_string(),
            effects: r[3].to_string(),
            detection: r[4].to_string(),
            recommendation: r[5].to_string(),
            hazard_level: level(&r[6], record)?,
        });
    }
    Ok(out)
}

pub fn load_uca_catalog(
    uca_path: &Path,
    cue_path: &Path,
) -> Result<(Vec<UcaRecord>, Vec<CueRecord>), UcaCatalogError> {
    Ok((
        parse_uca_catalog(&std::fs::read_to_string(uca_path)?)?,
        parse_cue_catalog(&std::fs::read_to_string(cue_path)?)?,
    ))
}

/// CUEs are cross-cutting: every one applies at every node.
pub fn cue_applicability(_cue: &CueRecord, _node: &Node) -> bool {
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,node,role,category,causes,effects,detection,recommendation,hazard_level\n";

    #[test]
    fn role_c_rejected() {
        let text = format!("{HEADER}UCA01,Capture X-ray,C,NotProvided,a,b,c,d,High\n");
        assert!(matches!(parse_uca_catalog(&text), Err(UcaCatalogError::Schema { record: 1, .. })));
    }

    #[test]
    fn unknown_category_and_duplicates() {
        let bad = format!("{HEADER}UCA01,X,R,TooSoon,a,b,c,d,High\n");
        assert!(parse_uca_catalog(&bad).is_err());
        let dup = format!("{HEADER}UCA01,X,R,NotProvided,a,b,c,d,High\nUCA01,X,P,NotProvided,a,b,c,d,Low\n");
        assert!(matches!(parse_uca_catalog(&dup), Err(UcaCatalogError::DuplicateId(_))));
    }

    #[test]
    fn cue_ids_bounded() {
        let text = "id,description,causes,effects,detection,recommendation,hazard_level\nCUE08,x,a,b,c,d,Low\n";
        assert!(parse_cue_catalog(text).is_err());
    }
}
