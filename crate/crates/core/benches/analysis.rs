use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use diverge::cli::{synth_corpus, SynthConfig};
use diverge::exec::WidenConfig;
use diverge::frontend::{build_cfg, parse, Cfg};
use diverge::interproc::analyze_program;
use diverge::report::ModelTable;

fn corpus(c: &mut Criterion) {
    let src = synth_corpus(&SynthConfig::default());
    let program = parse(&src).unwrap();
    let cfgs: BTreeMap<String, Cfg> = program
        .functions
        .iter()
        .map(|f| (f.name.clone(), build_cfg(f)))
        .collect();
    let models = ModelTable::new();
    let config = WidenConfig::default();
    let threads = std::thread::available_parallelism()
        .map_or(4, |n| n.get())
        .max(2);

    let mut group = c.benchmark_group("synthetic_corpus");
    group.sample_size(10);
    for jobs in [1, threads] {
        let label = if jobs == 1 { "sequential" } else { "parallel" };
        group.bench_with_input(BenchmarkId::new(label, jobs), &jobs, |b, &jobs| {
            b.iter(|| analyze_program(&program, &cfgs, &models, &config, jobs, None))
        });
    }
    group.finish();
}

criterion_group!(benches, corpus);
criterion_main!(benches);
