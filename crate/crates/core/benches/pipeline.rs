use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use scoped_search::audit::{check_index_isolation, measure_bloom_fpr, FprGrid};
use scoped_search::gen::{generate_corpus, Scale, WorkbenchConfig};
use scoped_search::metadata::RefreshConfig;
use scoped_search::par::Exec;
use scoped_search::sim::Simulation;

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn config(servers: usize) -> WorkbenchConfig {
    WorkbenchConfig {
        scale: Scale {
            servers,
            pods_per_server: 8,
            resources_per_pod: 40,
            ..Scale::default()
        },
        ..WorkbenchConfig::default()
    }
}

fn refresh(c: &mut Criterion) {
    let mut group = c.benchmark_group("refresh");
    group.sample_size(10);
    for servers in [4, 16] {
        let corpus = generate_corpus(&config(servers)).unwrap();
        for (name, exec) in EXECS {
            let cfg = RefreshConfig { exec, ..RefreshConfig::default() };
            group.bench_with_input(BenchmarkId::new(name, servers), &corpus, |b, corpus| {
                b.iter(|| Simulation::ready(corpus.clone(), 3, cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn index_audit(c: &mut Criterion) {
    let mut group = c.benchmark_group("index_isolation");
    group.sample_size(10);
    let corpus = generate_corpus(&config(16)).unwrap();
    for (name, exec) in EXECS {
        group.bench_function(name, |b| b.iter(|| check_index_isolation(&corpus, exec)));
    }
    group.finish();
}

fn bloom_fpr(c: &mut Criterion) {
    let mut group = c.benchmark_group("bloom_fpr");
    group.sample_size(10);
    let grid = FprGrid::default();
    for (name, exec) in EXECS {
        group.bench_function(name, |b| b.iter(|| measure_bloom_fpr(&grid, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, refresh, index_audit, bloom_fpr);
criterion_main!(benches);
