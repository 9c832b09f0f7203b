use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Guideword;
use crate::model::{normalize_label, ProcessModel};
use crate::HazardLevel;

pub const CATALOG_HEADER: [&str; 8] = [
    "node",
    "guideword",
    "deviation",
    "causes",
    "effects",
    "detection",
    "recommendation",
    "hazard_level",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviationRecord {
    pub node_label: String,
    pub guideword: Guideword,
    pub deviation: String,
    pub causes: String,
    pub effects: String,
    pub detection: String,
    pub recommendation: String,
    pub hazard_level: HazardLevel,
}

impl DeviationRecord {
    /// `"<label>/<guideword>"`, the form used in trace links.
    pub fn reference(&self) -> String {
        format!("{}/{}", self.node_label, self.guideword)
    }

    pub fn key(&self) -> (String, Guideword) {
        (normalize_label(&self.node_label), self.guideword)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("catalog JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at record {record}: {message}")]
    Schema { record: usize, message: String },
    #[error("record {record}: unknown hazard level `{value}`")]
    UnknownLevel { record: usize, value: String },
    #[error("record {record}: node label `{label}` not found in the model")]
    UnknownNode { record: usize, label: String },
    #[error("record {record}: duplicate ({label}, {guideword}, deviation)")]
    Duplicate {
        record: usize,
        label: String,
        guideword: Guideword,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct JsonCatalog {
    schema_version: u32,
    records: Vec<DeviationRecord>,
}

/// Parse the CSV catalog. Lines starting with `#` are comments. When `model`
/// is given every node label must resolve against it.
pub fn parse_shard_catalog(
    text: &str,
    model: Option<&ProcessModel>,
) -> Result<Vec<DeviationRecord>, CatalogError> {
    if text.lines().all(|l| l.trim().is_empty() || l.starts_with('#')) {
        return Ok(Vec::new());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CATALOG_HEADER {
        return Err(CatalogError::Schema {
            record: 0,
            message: format!("expected header `{}`", CATALOG_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let record = i + 1;
        let row = row?;
        if row.len() != CATALOG_HEADER.len() {
            return Err(CatalogError::Schema {
                record,
                message: format!("expected {} fields, found {}", CATALOG_HEADER.len(), row.len()),
            });
        }
        let guideword = row[1]
            .parse::<Guideword>()
            .map_err(|message| CatalogError::Schema { record, message })?;
        let hazard_level = row[7]
            .parse::<HazardLevel>()
            .map_err(|_| CatalogError::UnknownLevel {
                record,
                value: row[7].to_string(),
            })?;
        out.push(DeviationRecord {
            node_label: row[0].to_string(),
            guideword,
            deviation: row[2].to_string(),
            causes: row[3].to_string(),
            effects: row[4].to_string(),
            detection: row[5].to_string(),
            recommendation: row[6].to_string(),
            hazard_level,
        });
    }
    check_records(&out, model)?;
    Ok(out)
}

fn check_records(records: &[DeviationRecord], model: Option<&ProcessModel>) -> Result<(), CatalogError> {
    let labels: Option<BTreeSet<String>> =
        model.map(|m| m.process_nodes().map(|n| normalize_label(&n.label)).collect());
    let mut seen = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        let record = i + 1;
        if r.node_label.trim().is_empty() || r.deviation.trim().is_empty() {
            return Err(CatalogError::Schema {
                record,
                message: "node and deviation must be non-empty".into(),
            });
        }
        if let Some(labels) = &labels {
            if !labels.contains(&normalize_label(&r.node_label)) {
                return Err(CatalogError::UnknownNode {
                    record,
                    label: r.node_label.clone(),
                });
            }
        }
        if !seen.insert((normalize_label(&r.node_label), r.guideword, r.deviation.clone())) {
            return Err(CatalogError::Duplicate {
                record,
                label: r.node_label.clone(),
                guideword: r.guideword,
            });
        }
    }
    Ok(())
}

/// Load a catalog from `.csv` or its `.json` mirror.
pub fn load_shard_catalog(
    path: &Path,
    model: Option<&ProcessModel>,
) -> Result<Vec<DeviationRecord>, CatalogError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let cat: JsonCatalog = serde_json::from_str(&text)?;
        if cat.schema_version != 1 {
            return Err(CatalogError::Schema {
                record: 0,
                message: format!("unsupported schemaVersion {}", cat.schema_version),
            });
        }
        check_records(&cat.records, model)?;
        return Ok(cat.records);
    }
    parse_shard_catalog(&text, model)
}

/// JSON mirror of the CSV catalog.
pub fn shard_catalog_json(records: &[DeviationRecord]) -> String {
    let cat = JsonCatalog {
        schema_version: 1,
        records: records.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&cat).expect("catalog serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "node,guideword,deviation,causes,effects,detection,recommendation,hazard_level\n";

    #[test]
    fn empty_file_is_empty_catalog() {
        assert!(parse_shard_catalog("", None).unwrap().is_empty());
        assert!(parse_shard_catalog("# schema_version: 1\n", None).unwrap().is_empty());
        assert!(parse_shard_catalog(HEADER, None).unwrap().is_empty());
    }

    #[test]
    fn unknown_level_rejected() {
        let text = format!("{HEADER}Capture X-ray,Omission,d,c,e,det,rec,Catastrophic\n");
        assert!(matches!(
            parse_shard_catalog(&text, None),
            Err(CatalogError::UnknownLevel { record: 1, .. })
        ));
    }

    #[test]
    fn duplicates_rejected() {
        let text = format!("{HEADER}A,Omission,d,c,e,det,rec,High\nA,Omission,d,c2,e,det,rec,Low\n");
        assert!(matches!(
            parse_shard_catalog(&text, None),
            Err(CatalogError::Duplicate { record: 2, .. })
        ));
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            parse_shard_catalog("a,b\n1,2\n", None),
            Err(CatalogError::Schema { .. })
        ));
    }
}
