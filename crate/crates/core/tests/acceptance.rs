//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use scoped_search::audit::{
    self, check_conservativity, check_index_isolation, check_scope_isolation, f_ns, f_s,
    measure_bloom_fpr, random_workload, AuditConfig, FaultKind, FprGrid, ResultRecord,
};
use scoped_search::fixtures;
use scoped_search::gen::{generate_corpus, webid_name, WorkbenchConfig};
use scoped_search::metadata::RefreshConfig;
use scoped_search::model::{global_visibility, AccessControlList, Corpus, Mutation, Resource, WebId};
use scoped_search::par::Exec;
use scoped_search::search::{result_pods, MetadataMode, Query, SearchContext, Strategy, TouchCounters};
use scoped_search::sim::Simulation;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ready(corpus: Corpus, nodes: usize) -> Result<Simulation, String> {
    Simulation::ready(corpus, nodes, RefreshConfig::default()).map_err(|e| e.to_string())
}

fn desk_sim(seed: u64) -> Result<Simulation, String> {
    let cfg = WorkbenchConfig::random_desk(seed);
    let corpus = generate_corpus(&cfg).map_err(|e| e.to_string())?;
    ready(corpus, cfg.overlay_nodes)
}

fn urls(prefix: &str, names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|n| format!("{prefix}{n}")).collect()
}

fn strs(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn worked_examples() -> Outcome {
    let vis = fixtures::visibility_example();
    let p = fixtures::VISIBILITY_POD;
    for (w, expected) in [
        ("UUID1", urls(p, &["r1", "r3"])),
        ("UUID2", urls(p, &["r2"])),
        ("UUID4", BTreeSet::new()),
    ] {
        let got = global_visibility(&vis, &w.into()).resources;
        ensure(got == expected, || format!("V({w}) = {got:?}"))?;
    }

    let sim = ready(fixtures::system_tier_example(), 2)?;
    let snap = sim.snapshot().map_err(|e| e.to_string())?;
    for (w, t, n) in [("UUID1", "kwd1", 1), ("UUID1", "kwd2", 2), ("UUID2", "kwd1", 0), ("UUID2", "kwd2", 1)] {
        let got = snap.system.entry(&w.into(), t).stats.source_count;
        ensure(got == n, || format!("system tier ({w}, {t}) count {got}, expected {n}"))?;
    }

    let sim = ready(fixtures::server_tier_example(), 1)?;
    let snap = sim.snapshot().map_err(|e| e.to_string())?;
    let meta = &snap.servers[fixtures::SERVER_TIER_SERVER];
    for (w, t, n) in [("UUID1", "kwd1", 1), ("UUID1", "kwd2", 2), ("UUID2", "kwd1", 0), ("UUID2", "kwd2", 1)] {
        let got = meta.entry(&w.into(), t).stats.source_count;
        ensure(got == n, || format!("server tier ({w}, {t}) count {got}, expected {n}"))?;
    }

    let sim = ready(fixtures::scope_isolation_example(), 1)?;
    let q = Query::new("U_A".into(), ["diabetes"]).map_err(|e| e.to_string())?;
    let got = sim.search(&q).map_err(|e| e.to_string())?;
    ensure(got.results.is_empty(), || format!("U_A diabetes returned {:?}", got.urls()))?;

    let sim = ready(fixtures::index_isolation_example(), 1)?;
    let set = sim.corpus.pod(fixtures::PG2_POD).and_then(|p| p.index.as_ref()).ok_or("PG2 pod not indexed")?;
    for (w, terms) in [("U1", strs(&["genetic", "therapy"])), ("U2", strs(&["cancer", "diabetes", "diet"]))] {
        let got: BTreeSet<String> = set
            .scoped_index(&w.into())
            .map(|i| i.terms().map(str::to_string).collect())
            .unwrap_or_default();
        ensure(got == terms, || format!("scoped[{w}] terms {got:?}"))?;
    }

    let sim = ready(fixtures::separability_example(), 2)?;
    let snap = sim.snapshot().map_err(|e| e.to_string())?;
    let mut rebuilt = Vec::new();
    for server in ["S1", "S2"] {
        let log: Vec<ResultRecord> = ["w1", "w2"]
            .iter()
            .map(|w| ResultRecord {
                webid: (*w).into(),
                terms: vec!["q".into()],
                server_id: server.into(),
                result_pod_urls: result_pods(&sim.corpus, server, &(*w).into(), "q"),
            })
            .collect();
        rebuilt.push((server, f_s(&log).map_err(|e| e.to_string())?));
    }
    let snaps: Vec<_> = rebuilt.iter().map(|(s, m)| (*s, 1, m)).collect();
    let msn = f_ns(&snaps);
    for (w, servers) in [("w1", strs(&["S1", "S2"])), ("w2", strs(&["S1"]))] {
        let maintained = snap.system.entry(&w.into(), "q");
        let r = msn.get(&w.into(), "q");
        ensure(
            maintained.sources == servers && maintained.stats.source_count == servers.len() as u64,
            || format!("MSN[{w}][q] = {maintained:?}"),
        )?;
        ensure(r.sources == servers && r.count == servers.len() as u64, || {
            format!("reconstructed MSN[{w}][q] = {r:?}")
        })?;
    }
    Ok("visibility, both metadata tiers, scope, index and separability examples exact".into())
}

fn scope_isolation_suite() -> Outcome {
    let mut queries = 0u64;
    for seed in 0..1000u64 {
        let sim = desk_sim(seed)?;
        let workload = random_workload(&sim.corpus, 10, seed);
        let v = check_scope_isolation(&sim, &workload, None).map_err(|e| e.to_string())?;
        ensure(v.pass, || format!("corpus {seed}: {:?}", v.counterexamples.first()))?;
        queries += workload.len() as u64;
    }
    Ok(format!("1000 corpora, {queries} queries, 0 counterexamples"))
}

fn index_isolation_suite() -> Outcome {
    let mut checks = 0u64;
    for seed in 0..1000u64 {
        let sim = desk_sim(seed)?;
        let v = check_index_isolation(&sim.corpus, Exec::Sequential);
        ensure(v.pass, || format!("corpus {seed}: {:?}", v.counterexamples.first()))?;
        checks += v.checked;
    }
    Ok(format!("1000 corpora, {checks} index comparisons, 0 cross-scope postings"))
}

fn conservativity_suite() -> Outcome {
    let mut cells = 0u64;
    let classes = [FaultKind::CrossScopePosting, FaultKind::InflatedMetadata, FaultKind::SharedPartition];
    let mut runs = [0u32; 3];
    let cfg = AuditConfig {
        queries: 5,
        ..AuditConfig::default()
    };
    for seed in 0..200u64 {
        let sim = desk_sim(seed)?;
        let report = check_conservativity(&sim).map_err(|e| e.to_string())?;
        ensure(report.structure.pass, || {
            format!("corpus {seed}: {:?}", report.structure.counterexamples.first())
        })?;
        cells += report.structure.checked;
        let sep = audit::check_separability(&sim, None).map_err(|e| e.to_string())?;
        ensure(sep.pass, || format!("corpus {seed}: {:?}", sep.counterexamples.first()))?;
        for (i, kind) in classes.iter().enumerate() {
            let f = audit::run_fault(&sim, *kind, &AuditConfig { seed, ..cfg.clone() }).map_err(|e| e.to_string())?;
            if f.applicable {
                runs[i] += 1;
                ensure(f.detected(), || format!("corpus {seed}: {kind:?} not detected ({})", f.description))?;
            }
        }
    }
    ensure(runs.iter().all(|&r| r >= 100), || format!("too few applicable injections: {runs:?}"))?;
    Ok(format!(
        "200 corpora, {cells} cells equal, separability holds; injections detected {}/{} cross-scope, {}/{} inflated, {}/{} shared",
        runs[0], runs[0], runs[1], runs[1], runs[2], runs[2]
    ))
}

fn bloom_measurements() -> Outcome {
    let grid = FprGrid {
        sized_for: vec![1000],
        probes: 100_000,
        ..FprGrid::default()
    };
    let report = measure_bloom_fpr(&grid, Exec::Parallel).map_err(|e| e.to_string())?;
    let at = report
        .cells
        .iter()
        .find(|c| c.n == 1000)
        .ok_or("no n=1000 cell")?;
    ensure(report.false_negatives == 0, || format!("{} false negatives", report.false_negatives))?;
    ensure(report.monotone_in_n, || "FPR decreased as n grew".into())?;
    ensure((0.005..=0.02).contains(&at.measured_fpr), || {
        format!("measured FPR {} at n=1000", at.measured_fpr)
    })?;
    let small = measure_bloom_fpr(&FprGrid::default(), Exec::Parallel).map_err(|e| e.to_string())?;
    ensure(small.pass, || format!("default grid failed: {:?}", small.out_of_band))?;
    Ok(format!(
        "m={} k={} measured {:.4} (theory {:.4}) at 1e5 probes; 0 false negatives; monotone",
        at.m, at.k, at.measured_fpr, at.theoretical_fpr
    ))
}

fn equivalence_suite() -> Outcome {
    let mut nonempty = 0;
    for seed in 0..500u64 {
        let sim = desk_sim(seed)?;
        let base = random_workload(&sim.corpus, 1, seed ^ 0x5151).remove(0);
        let mut results = Vec::new();
        for strategy in [Strategy::Direct, Strategy::Propagate] {
            let exact = sim
                .search(&base.clone().with_strategy(strategy).with_mode(MetadataMode::Exact))
                .map_err(|e| e.to_string())?;
            let bloom = sim
                .search(&base.clone().with_strategy(strategy).with_mode(MetadataMode::Bloom))
                .map_err(|e| e.to_string())?;
            ensure(bloom.selected_pods.is_superset(&exact.selected_pods), || {
                format!("trial {seed}: bloom pods not a superset under {strategy:?}")
            })?;
            ensure(bloom.selected_servers.is_superset(&exact.selected_servers), || {
                format!("trial {seed}: bloom servers not a superset under {strategy:?}")
            })?;
            results.push(exact.urls());
            results.push(bloom.urls());
        }
        ensure(results.windows(2).all(|w| w[0] == w[1]), || {
            format!("trial {seed}: result sets differ {results:?}")
        })?;
        nonempty += usize::from(!results[0].is_empty());
    }
    Ok(format!("500 trials identical across strategies and modes ({nonempty} non-empty); bloom selection superset"))
}

fn selection_efficiency() -> Outcome {
    let mut cfg = WorkbenchConfig::default();
    cfg.scale.servers = 10;
    cfg.scale.pods_per_server = 5;
    cfg.scale.resources_per_pod = 8;
    let mut corpus = generate_corpus(&cfg).map_err(|e| e.to_string())?;
    let target = corpus.servers.keys().nth(3).ok_or("too few servers")?.clone();
    let pod_url = corpus.servers[&target].pods.keys().next().ok_or("empty server")?.clone();
    let searcher: WebId = webid_name(0);
    corpus
        .mutate(Mutation::AddResource {
            pod_url: pod_url.clone(),
            resource: Resource::new(
                format!("{pod_url}rare-note"),
                "zygomycosis consult",
                AccessControlList::readers([searcher.clone()]),
            ),
        })
        .map_err(|e| e.to_string())?;
    let sim = ready(corpus, 3)?;
    let total = sim.corpus.pod_count();
    let server_pods: BTreeSet<String> = sim.corpus.servers[&target].pods.keys().cloned().collect();
    let mut worst = 0;
    let mut strays = 0;
    for strategy in [Strategy::Direct, Strategy::Propagate] {
        for mode in [MetadataMode::Exact, MetadataMode::Bloom] {
            let counters = TouchCounters::new();
            let mut ctx: SearchContext<'_> = sim.context().map_err(|e| e.to_string())?;
            ctx.counters = Some(&counters);
            let q = Query::new(searcher.clone(), ["zygomycosis"])
                .map_err(|e| e.to_string())?
                .with_strategy(strategy)
                .with_mode(mode);
            let out = scoped_search::search::search(&ctx, &q).map_err(|e| e.to_string())?;
            ensure(out.results.len() == 1, || format!("{strategy:?}/{mode:?}: {:?}", out.urls()))?;
            let touched = counters.pods_touched();
            // Bloom sketches may admit a false-positive pod elsewhere; exact
            // metadata must not.
            let stray = touched.difference(&server_pods).count();
            if mode == MetadataMode::Exact {
                ensure(stray == 0, || {
                    format!("{strategy:?}/{mode:?} touched pods off the target server: {touched:?}")
                })?;
            }
            strays += stray;
            ensure(touched.len() * 5 < total, || {
                format!("{strategy:?}/{mode:?} touched {} of {total} pods", touched.len())
            })?;
            worst = worst.max(touched.len());
        }
    }
    Ok(format!(
        "at most {worst} of {total} pods touched; exact mode confined to {target}; {strays} bloom false-positive pod reads"
    ))
}

fn determinism() -> Outcome {
    let cfg = WorkbenchConfig::default();
    let run = |exec: Exec| -> Result<(std::collections::BTreeMap<String, String>, String), String> {
        let corpus = generate_corpus(&cfg).map_err(|e| e.to_string())?;
        let sim = Simulation::ready(
            corpus,
            cfg.overlay_nodes,
            RefreshConfig {
                bloom: cfg.bloom,
                exec,
            },
        )
        .map_err(|e| e.to_string())?;
        let files = sim.artifacts().map_err(|e| e.to_string())?;
        let report = audit::run_audit(
            &sim,
            &AuditConfig {
                inject_faults: true,
                queries: 50,
                ..AuditConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        Ok((files, report.to_json().map_err(|e| e.to_string())?))
    };
    let first = run(Exec::Parallel)?;
    let second = run(Exec::Parallel)?;
    let sequential = run(Exec::Sequential)?;
    for (label, other) in [("repeat", &second), ("sequential", &sequential)] {
        ensure(first.0 == other.0, || {
            let differing: Vec<&String> = first
                .0
                .iter()
                .filter(|(k, v)| other.0.get(*k) != Some(*v))
                .map(|(k, _)| k)
                .collect();
            format!("{label}: artifacts differ: {differing:?}")
        })?;
        ensure(first.1 == other.1, || format!("{label}: audit reports differ"))?;
    }
    Ok(format!(
        "{} artifacts and the audit report byte-identical across 3 runs",
        first.0.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 8] = [
        (1, "worked examples", 1, worked_examples),
        (2, "scope isolation", 120, scope_isolation_suite),
        (3, "index isolation", 60, index_isolation_suite),
        (4, "conservativity and separability", 120, conservativity_suite),
        (5, "bloom measurements", 60, bloom_measurements),
        (6, "strategy and mode equivalence", 60, equivalence_suite),
        (7, "source selection efficiency", 30, selection_efficiency),
        (8, "determinism", 60, determinism),
    ];
    let mut failed = 0;
    for (n, name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed <= Duration::from_secs(limit) {
                Ok(d)
            } else {
                Err(format!("{d}; over the {limit}s limit"))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {n} ({name}): PASS [{:.2}s] {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{:.2}s] {detail}", elapsed.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
