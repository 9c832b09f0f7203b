//! Report bundles and their Markdown, CSV and JSON renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::exec::{Methodology, RequirementSpec};
use crate::model::ProcessModel;
use crate::shard::{
    coverage_report, generate_worksheet, severity_histogram, ApplicabilityRule, CoverageReport,
    DeviationRecord, SeverityHistogram, WorksheetSlot,
};
use crate::sim::CampaignReport;
use crate::stpa::{
    trace_to_requirements, CueRecord, LinkProvenance, TraceLink, TraceabilityMatrix, UcaRecord,
};
use crate::HazardLevel;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunMetadata {
    pub tool_version: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
}

impl RunMetadata {
    pub fn new(config_hash: impl Into<String>, inputs: impl IntoIterator<Item = impl Into<String>>) -> Self {
        RunMetadata {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            seed: None,
            inputs: inputs.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShardSection {
    pub worksheet: Vec<WorksheetSlot>,
    pub coverage: CoverageReport,
    pub histogram: SeverityHistogram,
}

impl ShardSection {
    pub fn build(m: &ProcessModel, rules: &ApplicabilityRule, catalog: &[DeviationRecord]) -> Self {
        let worksheet = generate_worksheet(m, rules);
        let coverage = coverage_report(&worksheet, catalog);
        let histogram = severity_histogram(catalog.iter().map(DeviationRecord::level_entry));
        ShardSection {
            worksheet,
            coverage,
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StpaSection {
    pub uca_count: usize,
    pub cue_count: usize,
    pub uca_levels: BTreeMap<HazardLevel, usize>,
    pub cue_levels: BTreeMap<HazardLevel, usize>,
    pub uca_roles: BTreeMap<String, usize>,
    pub uca_categories: BTreeMap<String, usize>,
    pub requirements: Vec<RequirementSpec>,
    pub matrix: TraceabilityMatrix,
}

impl StpaSection {
    pub fn build(
        ucas: &[UcaRecord],
        cues: &[CueRecord],
        shard: &[DeviationRecord],
        requirements: &[RequirementSpec],
        links: &[TraceLink],
    ) -> Self {
        let count = |it: &mut dyn Iterator<Item = String>| {
            let mut m = BTreeMap::new();
            for k in it {
                *m.entry(k).or_insert(0) += 1;
            }
            m
        };
        let mut uca_levels = BTreeMap::new();
        for u in ucas {
            *uca_levels.entry(u.hazard_level).or_insert(0) += 1;
        }
        let mut cue_levels = BTreeMap::new();
        for c in cues {
            *cue_levels.entry(c.hazard_level).or_insert(0) += 1;
        }
        StpaSection {
            uca_count: ucas.len(),
            cue_count: cues.len(),
            uca_levels,
            cue_levels,
            uca_roles: count(&mut ucas.iter().map(|u| u.role.to_string())),
            uca_categories: count(&mut ucas.iter().map(|u| u.category.as_str().to_string())),
            requirements: requirements.to_vec(),
            matrix: trace_to_requirements(ucas, cues, shard, requirements, links),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportBundle {
    pub schema_version: u32,
    pub metadata: RunMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shard: Option<ShardSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stpa: Option<StpaSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub campaigns: Vec<CampaignReport>,
}

impl ReportBundle {
    pub fn new(metadata: RunMetadata) -> Self {
        ReportBundle {
            schema_version: 1,
            metadata,
            shard: None,
            stpa: None,
            campaigns: Vec::new(),
        }
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Markdown => self.to_markdown(),
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
                s.push('\n');
                s
            }
        }
    }

    /// The bundle's main table: the severity histogram when a SHARD section
    /// is present, else the traceability matrix, else campaign verdicts.
    pub fn to_csv(&self) -> String {
        if let Some(s) = &self.shard {
            return s.histogram.to_csv();
        }
        if let Some(s) = &self.stpa {
            return traceability_csv(&s.matrix);
        }
        campaign_csv(&self.campaigns)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let m = &self.metadata;
        let _ = writeln!(md, "# Hazard analysis report\n");
        let _ = writeln!(md, "- tool version: {}", m.tool_version);
        let _ = writeln!(md, "- config hash: `{}`", m.config_hash);
        if let Some(seed) = m.seed {
            let _ = writeln!(md, "- seed: {seed}");
        }
        for i in &m.inputs {
            let _ = writeln!(md, "- input: `{i}`");
        }
        if let Some(s) = &self.shard {
            md.push('\n');
            md.push_str(&shard_markdown(s));
        }
        if let Some(s) = &self.stpa {
            md.push('\n');
            md.push_str(&stpa_markdown(s));
        }
        for c in &self.campaigns {
            md.push('\n');
            md.push_str(&c.to_markdown().replacen("# ", "## ", 1));
        }
        md
    }
}

fn shard_markdown(s: &ShardSection) -> String {
    let mut md = String::new();
    let c = &s.coverage;
    let _ = writeln!(md, "## SHARD coverage\n");
    let _ = writeln!(
        md,
        "{} of {} worksheet slots filled ({:.1}%), {} drifted rows\n",
        c.filled,
        c.total,
        c.fill_ratio * 100.0,
        c.drift.len()
    );
    for p in &c.pending {
        let _ = writeln!(md, "- pending: {p}");
    }
    for d in &c.drift {
        let _ = writeln!(md, "- drift: {d}");
    }
    let _ = writeln!(md, "### Severity by node\n");
    let _ = writeln!(md, "| node | High | Medium | Low | Annoyance |\n|---|---|---|---|---|");
    for n in &s.histogram.per_node {
        let g = |l| n.counts.get(&l).copied().unwrap_or(0);
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            n.node,
            g(HazardLevel::High),
            g(HazardLevel::Medium),
            g(HazardLevel::Low),
            g(HazardLevel::Annoyance)
        );
    }
    md
}

fn methodology_list(m: &std::collections::BTreeSet<Methodology>) -> String {
    m.iter()
        .map(|m| match m {
            Methodology::Shard => "SHARD",
            Methodology::Stpa => "STPA",
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn stpa_markdown(s: &StpaSection) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "## STPA catalogs\n");
    let _ = writeln!(md, "{} UCAs, {} CUEs\n", s.uca_count, s.cue_count);
    let _ = writeln!(md, "| level | UCA | CUE |\n|---|---|---|");
    for l in HazardLevel::ALL {
        let _ = writeln!(
            md,
            "| {l} | {} | {} |",
            s.uca_levels.get(&l).copied().unwrap_or(0),
            s.cue_levels.get(&l).copied().unwrap_or(0)
        );
    }
    md.push('\n');
    md.push_str(&traceability_markdown(&s.matrix, &s.requirements));
    md
}

/// One row per requirement. Stated links are listed before inferred ones,
/// inferred ones marked with `*`.
pub fn traceability_markdown(t: &TraceabilityMatrix, requirements: &[RequirementSpec]) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "## Traceability\n");
    let _ = writeln!(md, "| requirement | category | methodology | artifacts |\n|---|---|---|---|");
    for row in &t.rows {
        let category = requirements
            .iter()
            .find(|r| r.id == row.requirement)
            .map(|r| format!("{:?}", r.category))
            .unwrap_or_default();
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            row.requirement,
            category,
            methodology_list(&row.methodology),
            artifact_list(row.links.iter(), "*")
        );
    }
    let _ = writeln!(md, "\nMethodology mismatches: {}", t.methodology_mismatches());
    for d in &t.diagnostics {
        let _ = writeln!(md, "- {}", serde_json::to_string(d).expect("diagnostic serializes"));
    }
    if !t.residual_risks.is_empty() {
        let _ = writeln!(md, "\nResidual risks (Medium or above, no requirement link):\n");
        for r in &t.residual_risks {
            let _ = writeln!(md, "- {r}");
        }
    }
    md
}

fn artifact_list<'a>(links: impl Iterator<Item = &'a TraceLink>, inferred_mark: &str) -> String {
    let mut links: Vec<&TraceLink> = links.collect();
    links.sort_by_key(|l| (l.provenance != LinkProvenance::Stated, l.artifact.clone()));
    links
        .iter()
        .map(|l| match l.provenance {
            LinkProvenance::Stated => l.artifact.to_string(),
            LinkProvenance::Inferred => format!("{}{inferred_mark}", l.artifact),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn traceability_csv(t: &TraceabilityMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["requirement", "methodology", "stated", "inferred"])
        .expect("in-memory write");
    for row in &t.rows {
        let of = |p| {
            row.links
                .iter()
                .filter(|l| l.provenance == p)
                .map(|l| l.artifact.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        w.write_record([
            row.requirement.clone(),
            methodology_list(&row.methodology).replace(", ", ";"),
            of(LinkProvenance::Stated),
            of(LinkProvenance::Inferred),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn campaign_csv(campaigns: &[CampaignReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "executive", "requirement", "satisfied", "violated", "not_applicable"])
        .expect("in-memory write");
    for c in campaigns {
        for (req, counts) in &c.verdicts {
            let g = |s| counts.get(&s).copied().unwrap_or(0).to_string();
            w.write_record([
                c.seed.to_string(),
                c.executive_enabled.to_string(),
                req.clone(),
                g(crate::sim::MonitorStatus::Satisfied),
                g(crate::sim::MonitorStatus::Violated),
                g(crate::sim::MonitorStatus::NotApplicable),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn emit_report(bundle: &ReportBundle, format: ReportFormat, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, bundle.render(format))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{self, DataSet};

    fn bundle() -> ReportBundle {
        let d = DataSet::canonical();
        let mut b = ReportBundle::new(RunMetadata::new(d.config.hash(), [data::MODEL_FILE, data::SHARD_FILE]));
        b.shard = Some(ShardSection::build(&d.model, &d.rules, &d.shard));
        b.stpa = Some(StpaSection::build(&d.ucas, &d.cues, &d.shard, &d.requirements, &d.links));
        b
    }

    #[test]
    fn traceability_table_has_27_rows() {
        let b = bundle();
        let md = b.to_markdown();
        let rows = md.lines().filter(|l| l.starts_with("| R") && l[3..4].chars().all(|c| c.is_ascii_digit())).count();
        assert_eq!(rows, 27);
        assert!(md.contains("| R24 | Additional | SHARD, STPA |"), "{md}");
    }

    #[test]
    fn csv_header_and_determinism() {
        let b = bundle();
        assert!(b.to_csv().starts_with("node,high,medium,low,annoyance\n"));
        for f in [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json] {
            assert_eq!(b.render(f), bundle().render(f));
        }
        assert!(traceability_csv(&b.stpa.unwrap().matrix).starts_with("requirement,methodology,stated,inferred\n"));
    }
}
