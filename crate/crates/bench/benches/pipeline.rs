use criterion::{black_box, criterion_group, criterion_main, Criterion};
use hazgate_core::data::{self, DataSet};
use hazgate_core::model::parse_model;
use hazgate_core::shard::{coverage_report, generate_worksheet};
use hazgate_core::sim::{
    brute_force_reachability, nominal_timeline, run_random_campaign, run_timeline, CampaignCatalogs,
    ReachBounds,
};

fn parse(c: &mut Criterion) {
    c.bench_function("parse_model", |b| b.iter(|| parse_model(black_box(data::MODEL_DSL)).unwrap()));
}

fn worksheet(c: &mut Criterion) {
    let d = DataSet::canonical();
    c.bench_function("worksheet_and_coverage", |b| {
        b.iter(|| {
            let slots = generate_worksheet(&d.model, &d.rules);
            coverage_report(&slots, &d.shard)
        })
    });
}

fn simulate(c: &mut Criterion) {
    let d = DataSet::canonical();
    let tl = nominal_timeline();
    c.bench_function("nominal_run", |b| b.iter(|| run_timeline(&d.model, &d.config, black_box(&tl), true).unwrap()));
}

fn campaign(c: &mut Criterion) {
    let d = DataSet::canonical();
    let cats = CampaignCatalogs {
        shard: &d.shard,
        ucas: &d.ucas,
        cues: &d.cues,
    };
    let mut g = c.benchmark_group("campaign");
    g.sample_size(10);
    g.bench_function("100_scenarios", |b| b.iter(|| run_random_campaign(&d.model, &d.config, cats, 100, 42, true)));
    g.finish();
}

fn reach(c: &mut Criterion) {
    let d = DataSet::canonical();
    let bounds = ReachBounds {
        max_steps: 6,
        ..ReachBounds::default()
    };
    let mut g = c.benchmark_group("reach");
    g.sample_size(10);
    g.bench_function("depth_6", |b| {
        b.iter(|| brute_force_reachability(&d.model, &d.config, &bounds, true).unwrap())
    });
    g.finish();
}

criterion_group!(benches, parse, worksheet, simulate, campaign, reach);
criterion_main!(benches);
