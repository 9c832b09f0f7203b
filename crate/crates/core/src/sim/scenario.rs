use std::path::Path;

use serde::{Deserialize, Serialize};

use super::inject::{apply_all, InjectError, Injection};
use super::run::{run_timeline, Outcome, RunResult};
use super::timeline::nominal_timeline;
use crate::exec::{Event, ExecConfig, ExecError};
use crate::model::ProcessModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimelineSpec {
    /// A named generator; only `"nominal"` is defined.
    Generated(String),
    Events(Vec<Event>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectedOutcome {
    SafeCompletion,
    BlockedSafely,
    ViolationExpected(String),
}

impl ExpectedOutcome {
    pub fn met_by(&self, r: &RunResult) -> bool {
        match self {
            ExpectedOutcome::SafeCompletion => r.outcome == Outcome::SafeCompletion,
            ExpectedOutcome::BlockedSafely => r.outcome == Outcome::BlockedSafely,
            ExpectedOutcome::ViolationExpected(req) => r.violated(req),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    #[serde(default = "one")]
    pub schema_version: u32,
    pub name: String,
    pub base_timeline: TimelineSpec,
    #[serde(default)]
    pub injections: Vec<Injection>,
    pub expected_outcome: ExpectedOutcome,
    /// Whether `expectedOutcome` describes a run with the executive enabled.
    #[serde(default = "yes")]
    pub executive_enabled: bool,
    /// Expectation for the opposite executive setting, if stated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_with_executive: Option<ExpectedOutcome>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scenario schemaVersion {0}")]
    Version(u32),
    #[error("unknown timeline generator `{0}`")]
    UnknownGenerator(String),
    #[error("base timeline is not ordered by time at index {0}")]
    Unordered(usize),
    #[error("{0} expects a violation but is marked for an executive-enabled run")]
    ViolationWithExecutive(String),
    #[error("injection: {0}")]
    Inject(#[from] InjectError),
    #[error("executive: {0}")]
    Exec(#[from] ExecError),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = serde_json::from_str(text)?;
        if sc.schema_version != 1 {
            return Err(ScenarioError::Version(sc.schema_version));
        }
        if sc.executive_enabled && matches!(sc.expected_outcome, ExpectedOutcome::ViolationExpected(_)) {
            return Err(ScenarioError::ViolationWithExecutive(sc.name));
        }
        sc.base()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn base(&self) -> Result<Vec<Event>, ScenarioError> {
        let tl = match &self.base_timeline {
            TimelineSpec::Generated(g) if g == "nominal" => nominal_timeline(),
            TimelineSpec::Generated(g) => return Err(ScenarioError::UnknownGenerator(g.clone())),
            TimelineSpec::Events(ev) => ev.clone(),
        };
        if let Some(i) = tl.windows(2).position(|w| w[0].t > w[1].t) {
            return Err(ScenarioError::Unordered(i + 1));
        }
        Ok(tl)
    }

    /// Base timeline with every injection applied in order.
    pub fn compile(&self) -> Result<Vec<Event>, ScenarioError> {
        Ok(apply_all(&self.base()?, &self.injections)?)
    }

    /// The expectation for a run with the given executive setting.
    pub fn expectation(&self, executive_enabled: bool) -> Option<&ExpectedOutcome> {
        if executive_enabled == self.executive_enabled {
            Some(&self.expected_outcome)
        } else {
            self.expected_with_executive.as_ref()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioResult {
    pub name: String,
    pub executive_enabled: bool,
    pub run: RunResult,
    /// None when the scenario states no expectation for this setting.
    pub expectation_met: Option<bool>,
}

pub fn run_scenario(
    m: &ProcessModel,
    cfg: &ExecConfig,
    sc: &Scenario,
    executive_enabled: bool,
) -> Result<ScenarioResult, ScenarioError> {
    let events = sc.compile()?;
    let run = run_timeline(m, cfg, &events, executive_enabled)?;
    let expectation_met = sc.expectation(executive_enabled).map(|x| x.met_by(&run));
    Ok(ScenarioResult {
        name: sc.name.clone(),
        executive_enabled,
        run,
        expectation_met,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data;
    use crate::sim::{MonitorStatus, TraceStatus};

    fn canon() -> (ProcessModel, ExecConfig) {
        (data::canonical_model(), data::canonical_config())
    }

    #[test]
    fn nominal_completes_with_three_views() {
        let (m, cfg) = canon();
        let sc = data::scenario("nominal").unwrap().unwrap();
        assert_eq!(sc.base().unwrap(), nominal_timeline());
        let r = run_scenario(&m, &cfg, &sc, true).unwrap();
        assert_eq!(r.run.trace.status, TraceStatus::Completed, "{:#?}", r.run.trace.steps.last());
        assert_eq!(r.run.outcome, Outcome::SafeCompletion);
        assert_eq!(r.expectation_met, Some(true));
        let fin = r.run.trace.final_state.as_ref().unwrap();
        assert_eq!(fin.views_acquired.len(), 3);
        for v in &r.run.verdicts {
            assert_ne!(v.status, MonitorStatus::Violated, "{v:?}");
        }
    }

    #[test]
    fn hazards_violate_without_executive_and_block_with_it() {
        let (m, cfg) = canon();
        for name in data::HAZARD_SCENARIOS {
            let sc = data::scenario(name).unwrap().unwrap();
            let ExpectedOutcome::ViolationExpected(req) = &sc.expected_outcome else {
                panic!("{name} should expect a violation");
            };
            let off = run_scenario(&m, &cfg, &sc, false).unwrap();
            assert_eq!(off.expectation_met, Some(true), "{name} off: {:#?}", off.run.verdicts);
            assert!(off.run.verdict(req).unwrap().witness.is_some());
            let on = run_scenario(&m, &cfg, &sc, true).unwrap();
            assert_eq!(on.expectation_met, Some(true), "{name} on: {:?} {:#?}", on.run.outcome, on.run.verdicts);
            assert!(!sc.expected_outcome.met_by(&on.run), "{name}: monitor is vacuous");
        }
    }

    #[test]
    fn violation_expectation_rejected_for_enabled_runs() {
        let text = r#"{"name":"x","baseTimeline":"nominal","expectedOutcome":{"ViolationExpected":"R24"}}"#;
        assert!(matches!(Scenario::from_json(text), Err(ScenarioError::ViolationWithExecutive(_))));
        let text = r#"{"name":"x","baseTimeline":"bogus","expectedOutcome":"SafeCompletion"}"#;
        assert!(matches!(Scenario::from_json(text), Err(ScenarioError::UnknownGenerator(_))));
    }

    #[test]
    fn trace_export_is_deterministic() {
        let (m, cfg) = canon();
        let sc = data::scenario("uca28").unwrap().unwrap();
        let a = run_scenario(&m, &cfg, &sc, true).unwrap().run.trace.to_jsonl();
        let b = run_scenario(&m, &cfg, &sc, true).unwrap().run.trace.to_jsonl();
        assert_eq!(a, b);
        assert!(a.contains("\"status\":\"refused\""));
    }
}
