use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use hazgate_core::data::{self, DataSet};
use hazgate_core::exec::{parse_requirements, ExecConfig};
use hazgate_core::model::{parse_model, validate_model, ParseError, ProcessModel};
use hazgate_core::report::{
    emit_report, ReportBundle, ReportFormat, RunMetadata, ShardSection, StpaSection,
};
use hazgate_core::shard::{generate_worksheet, parse_shard_catalog, ApplicabilityRule, DeviationRecord};
use hazgate_core::sim::{
    brute_force_reachability, run_random_campaign, run_scenario, CampaignCatalogs, ReachBounds,
    Scenario,
};
use hazgate_core::stpa::{parse_cue_catalog, parse_trace_links, parse_uca_catalog};

#[derive(Parser)]
#[command(name = "hazgate", version, about = "Process models, hazard catalogs and a safety executive for robot-assisted mammography")]
struct Cli {
    /// Directory holding the data files used when an input is not given.
    /// Without it the copies built into the binary are used.
    #[arg(long, global = true, env = "HAZGATE_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Output {
    /// md, csv or json
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a process model.
    Validate { model: Option<PathBuf> },
    /// List the SHARD worksheet slots for a model.
    Worksheet {
        model: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Coverage and severity report for a SHARD catalog.
    ShardReport {
        model: Option<PathBuf>,
        catalog: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// STPA catalog summary and requirement traceability.
    StpaReport {
        uca: Option<PathBuf>,
        cue: Option<PathBuf>,
        reqs: Option<PathBuf>,
        #[arg(long)]
        links: Option<PathBuf>,
        #[arg(long)]
        shard: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run one scenario script through the executive.
    Simulate {
        model: PathBuf,
        config: PathBuf,
        /// Scenario file, or the name of a shipped scenario.
        scenario: String,
        #[arg(long)]
        no_executive: bool,
        /// Write the trace as JSON Lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Seeded random fault-injection campaign.
    Campaign {
        model: Option<PathBuf>,
        config: Option<PathBuf>,
        #[arg(short = 'n', default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        no_executive: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Bounded exhaustive search for unsafe exposure.
    Reach {
        model: Option<PathBuf>,
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long)]
        no_executive: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run every acceptance criterion.
    Check {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<u8>,
    },
}

/// Exit status: 0 clean, 1 findings, 2 usage or input errors.
const FINDINGS: u8 = 1;
const INPUT_ERROR: u8 = 2;

struct Inputs {
    dir: Option<PathBuf>,
}

impl Inputs {
    /// Text of `arg`, else `<data dir>/<name>`, else the built-in copy.
    fn read(&self, arg: Option<&Path>, name: &str, builtin: &str) -> Result<(String, String)> {
        let path = match (arg, &self.dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(d)) => d.join(name),
            (None, None) => return Ok((builtin.to_string(), format!("builtin:{name}"))),
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok((text, path.display().to_string()))
    }

    fn model(&self, arg: Option<&Path>) -> Result<(ProcessModel, String)> {
        let (text, name) = self.read(arg, data::MODEL_FILE, data::MODEL_DSL)?;
        let m = parse_model(&text).with_context(|| format!("parsing {name}"))?;
        Ok((m, name))
    }

    fn config(&self, arg: Option<&Path>) -> Result<(ExecConfig, String)> {
        let (text, name) = self.read(arg, data::CONFIG_FILE, data::CONFIG_JSON)?;
        let c = ExecConfig::from_json(&text).with_context(|| format!("parsing {name}"))?;
        Ok((c, name))
    }

    fn rules(&self, arg: Option<&Path>) -> Result<(ApplicabilityRule, String)> {
        let (text, name) = self.read(arg, data::RULES_FILE, data::RULES_JSON)?;
        let r = ApplicabilityRule::from_json(&text).with_context(|| format!("parsing {name}"))?;
        Ok((r, name))
    }

    fn shard(&self, arg: Option<&Path>, m: Option<&ProcessModel>) -> Result<(Vec<DeviationRecord>, String)> {
        let (text, name) = self.read(arg, data::SHARD_FILE, data::SHARD_CSV)?;
        let c = parse_shard_catalog(&text, m).with_context(|| format!("parsing {name}"))?;
        Ok((c, name))
    }

    fn dataset(&self) -> Result<DataSet> {
        match &self.dir {
            Some(d) => DataSet::load(d).with_context(|| format!("loading {}", d.display())),
            None => Ok(DataSet::canonical()),
        }
    }
}

fn write_output(output: &Output, text: String) -> Result<()> {
    match &output.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(output: &Output, bundle: &ReportBundle) -> Result<()> {
    match &output.out {
        Some(p) => emit_report(bundle, output.format, p).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", bundle.render(output.format));
            Ok(())
        }
    }
}

fn worksheet_text(slots: &[hazgate_core::shard::WorksheetSlot], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(slots).expect("slots serialize") + "\n",
        ReportFormat::Csv => {
            let mut s = String::from("node_id,node,guideword\n");
            for slot in slots {
                let _ = writeln!(s, "{},\"{}\",{}", slot.node_id, slot.node_label.replace('"', "\"\""), slot.guideword);
            }
            s
        }
        ReportFormat::Markdown => {
            let mut s = format!("# SHARD worksheet\n\n{} slots\n\n| node | guideword |\n|---|---|\n", slots.len());
            for slot in slots {
                let _ = writeln!(s, "| {} | {} |", slot.node_label, slot.guideword);
            }
            s
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let inputs = Inputs { dir: cli.data_dir };
    match cli.command {
        Cmd::Validate { model } => {
            let (text, name) = inputs.read(model.as_deref(), data::MODEL_FILE, data::MODEL_DSL)?;
            let m = match parse_model(&text) {
                Ok(m) => m,
                Err(ParseError::Invalid(diags)) => {
                    for d in &diags {
                        println!("{d}");
                    }
                    println!("{name}: {} diagnostics", diags.len());
                    return Ok(FINDINGS);
                }
                Err(e) => {
                    println!("{name}: {e}");
                    return Ok(FINDINGS);
                }
            };
            let diags = validate_model(&m);
            for d in &diags {
                println!("{d}");
            }
            if diags.is_empty() {
                println!(
                    "{name}: valid, {} nodes ({} actions, {} decisions), {} edges",
                    m.nodes.len(),
                    m.actions().count(),
                    m.decisions().count(),
                    m.edges.len()
                );
                Ok(0)
            } else {
                println!("{name}: {} diagnostics", diags.len());
                Ok(FINDINGS)
            }
        }
        Cmd::Worksheet { model, rules, output } => {
            let (m, _) = inputs.model(model.as_deref())?;
            let (r, _) = inputs.rules(rules.as_deref())?;
            write_output(&output, worksheet_text(&generate_worksheet(&m, &r), output.format))?;
            Ok(0)
        }
        Cmd::ShardReport { model, catalog, rules, output } => {
            let (m, mname) = inputs.model(model.as_deref())?;
            let (r, rname) = inputs.rules(rules.as_deref())?;
            let (c, cname) = inputs.shard(catalog.as_deref(), None)?;
            let (cfg, _) = inputs.config(None)?;
            let mut b = ReportBundle::new(RunMetadata::new(cfg.hash(), [mname, cname, rname]));
            let section = ShardSection::build(&m, &r, &c);
            let complete = section.coverage.complete();
            b.shard = Some(section);
            emit(&output, &b)?;
            Ok(if complete { 0 } else { FINDINGS })
        }
        Cmd::StpaReport { uca, cue, reqs, links, shard, output } => {
            let (ut, un) = inputs.read(uca.as_deref(), data::UCA_FILE, data::UCA_CSV)?;
            let (ct, cn) = inputs.read(cue.as_deref(), data::CUE_FILE, data::CUE_CSV)?;
            let (rt, rn) = inputs.read(reqs.as_deref(), data::REQUIREMENTS_FILE, data::REQUIREMENTS_JSON)?;
            let (lt, ln) = inputs.read(links.as_deref(), data::LINKS_FILE, data::LINKS_JSON)?;
            let ucas = parse_uca_catalog(&ut).with_context(|| format!("parsing {un}"))?;
            let cues = parse_cue_catalog(&ct).with_context(|| format!("parsing {cn}"))?;
            let requirements = parse_requirements(&rt).with_context(|| format!("parsing {rn}"))?;
            let links = parse_trace_links(&lt).map_err(|e| anyhow!("parsing {ln}: {e}"))?;
            let (shard, sn) = inputs.shard(shard.as_deref(), None)?;
            let (cfg, _) = inputs.config(None)?;
            let mut b = ReportBundle::new(RunMetadata::new(cfg.hash(), [un, cn, rn, ln, sn]));
            let section = StpaSection::build(&ucas, &cues, &shard, &requirements, &links);
            let clean = section.matrix.methodology_mismatches() == 0;
            b.stpa = Some(section);
            emit(&output, &b)?;
            Ok(if clean { 0 } else { FINDINGS })
        }
        Cmd::Simulate { model, config, scenario, no_executive, trace, json } => {
            let (m, _) = inputs.model(Some(&model))?;
            let (cfg, _) = inputs.config(Some(&config))?;
            let sc = load_scenario(&inputs, &scenario)?;
            let enabled = !no_executive;
            let r = run_scenario(&m, &cfg, &sc, enabled)?;
            if let Some(p) = trace {
                std::fs::write(&p, r.run.trace.to_jsonl()).with_context(|| format!("writing {}", p.display()))?;
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!(
                    "{}: executive {}, {:?}, {} steps, {} refusals",
                    r.name,
                    if enabled { "on" } else { "off" },
                    r.run.outcome,
                    r.run.trace.steps.len(),
                    r.run.trace.refusals()
                );
                for step in &r.run.trace.steps {
                    for v in step.verdicts.iter().filter(|v| v.status == hazgate_core::exec::VerdictStatus::Refused) {
                        println!("  refused at t={}: {} ({})", step.event.t, v.reason, v.requirement.as_deref().unwrap_or("-"));
                    }
                }
                for v in r.run.violations() {
                    let w = v.witness.as_ref().map(|w| format!(" at step {}: {}", w.index, w.explanation)).unwrap_or_default();
                    println!("  {} violated{w}", v.requirement);
                }
                match r.expectation_met {
                    Some(true) => println!("expectation met"),
                    Some(false) => println!("expectation NOT met"),
                    None => {}
                }
            }
            let ok = r.expectation_met.unwrap_or_else(|| r.run.violations().next().is_none());
            Ok(if ok { 0 } else { FINDINGS })
        }
        Cmd::Campaign { model, config, n, seed, no_executive, output } => {
            if n == 0 {
                return Err(anyhow!("-n must be at least 1"));
            }
            let (m, mname) = inputs.model(model.as_deref())?;
            let (cfg, cname) = inputs.config(config.as_deref())?;
            let (shard, sname) = inputs.shard(None, Some(&m))?;
            let (ut, un) = inputs.read(None, data::UCA_FILE, data::UCA_CSV)?;
            let (ct, cn) = inputs.read(None, data::CUE_FILE, data::CUE_CSV)?;
            let ucas = parse_uca_catalog(&ut)?;
            let cues = parse_cue_catalog(&ct)?;
            let cats = CampaignCatalogs {
                shard: &shard,
                ucas: &ucas,
                cues: &cues,
            };
            let report = run_random_campaign(&m, &cfg, cats, n, seed, !no_executive);
            let hard = report.hard_violations();
            let mut meta = RunMetadata::new(cfg.hash(), [mname, cname, sname, un, cn]);
            meta.seed = Some(seed);
            let mut b = ReportBundle::new(meta);
            b.campaigns.push(report);
            emit(&output, &b)?;
            Ok(if hard == 0 || no_executive { 0 } else { FINDINGS })
        }
        Cmd::Reach { model, config, depth, no_executive, json } => {
            let (m, _) = inputs.model(model.as_deref())?;
            let (cfg, _) = inputs.config(config.as_deref())?;
            let bounds = ReachBounds {
                max_steps: depth,
                ..ReachBounds::default()
            };
            let r = brute_force_reachability(&m, &cfg, &bounds, !no_executive)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!(
                    "depth {}: {} states{}, unsafe exposure {}, {} sequences cross-checked, {} disagreements",
                    depth,
                    r.explored_states,
                    if r.complete { "" } else { " (budget exhausted)" },
                    if r.unsafe_reachable() { "REACHABLE" } else { "unreachable" },
                    r.cross_checked,
                    r.disagreements.len()
                );
                if let Some(cx) = &r.counterexample {
                    println!("counterexample {:?}, failed {:?}", cx.symbols, cx.failed);
                }
            }
            let clean = !r.unsafe_reachable() && r.disagreements.is_empty() && r.complete;
            Ok(if clean { 0 } else { FINDINGS })
        }
        Cmd::Check { only } => {
            let d = inputs.dataset()?;
            let ids: Vec<u8> = match only {
                Some(id) => vec![id],
                None => hazgate_core::acceptance::criterion_ids().collect(),
            };
            let mut failed = 0;
            for id in ids {
                let r = hazgate_core::acceptance::run_criterion(id, &d).ok_or_else(|| anyhow!("no criterion {id}"))?;
                println!("{r}");
                failed += usize::from(!r.passed);
            }
            Ok(if failed == 0 { 0 } else { FINDINGS })
        }
    }
}

fn load_scenario(inputs: &Inputs, arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::load(path).with_context(|| format!("loading {arg}"));
    }
    let name = arg.trim_end_matches(".json");
    if let Some(dir) = &inputs.dir {
        let p = dir.join("scenarios").join(format!("{name}.json"));
        if p.exists() {
            return Scenario::load(&p).with_context(|| format!("loading {}", p.display()));
        }
    }
    data::scenario(name)
        .ok_or_else(|| anyhow!("no scenario file or shipped scenario named `{arg}`"))?
        .map_err(Into::into)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
