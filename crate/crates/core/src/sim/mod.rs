//! Fault injection, scenario runs, requirement monitors and the bounded
//! reachability oracle.

mod campaign;
mod inject;
mod monitor;
mod reach;
mod run;
mod scenario;
mod sweep;
mod timeline;

pub use inject::{
    apply_all, apply_injection, EventTemplate, InjectError, Injection, Mutation, Selector,
    Transform, ValueField,
};
pub use monitor::{
    evaluate_monitors, monitored_requirements, MonitorStatus, MonitorVerdict, Witness,
    HARD_REQUIREMENTS, MONITOR_BINDINGS, SOFT_MONITORS,
};
pub use run::{
    classify, order_events, run_timeline, simulate, Outcome, RunResult, Snapshot, Trace,
    TraceStatus, TraceStep,
};
pub use scenario::{run_scenario, ExpectedOutcome, Scenario, ScenarioError, ScenarioResult, TimelineSpec};
pub use timeline::{nominal_timeline, random_timeline, TimelineBuilder, Variation, FIRST_VIEW_AT, VIEW_SPACING};
pub use campaign::{run_random_campaign, CampaignCatalogs, CampaignReport, ViolationSample};
pub use reach::{
    brute_force_reachability, reach_prefix, symbols_to_events, Counterexample, Disagreement,
    ReachBounds, ReachabilityResult, Symbol, EVENT_STEP_MS,
};
pub use sweep::{stop_sweep, SweepReport, SweepRow};
