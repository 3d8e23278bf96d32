mod store;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use scoped_search::audit::{run_audit, AuditConfig};
use scoped_search::gen::{generate_corpus, WorkbenchConfig};
use scoped_search::index::reindex;
use scoped_search::metadata::RefreshConfig;
use scoped_search::model::{metadata_location, WebId};
use scoped_search::search::{search, MetadataMode, Query, Strategy, TouchCounters};
use scoped_search::sim::{Simulation, CORPUS_FILE};
use scoped_search::Error;
use serde::Serialize;
use serde_json::json;

use store::{State, Store, CONFIG_FILE, STATE_FILE};

#[derive(Parser)]
#[command(name = "scoped-search", version, about = "Access-scoped decentralized search workbench")]
struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    text: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus directory from a config file.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build per-WebID index files for every pod whose owner allows it.
    Index {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Register servers with the overlay, or a pod for search.
    Register {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, conflicts_with = "pod")]
        server: Option<String>,
        #[arg(long)]
        pod: Option<String>,
    },
    /// Reindex changed pods and rebuild both metadata tiers and the sketches.
    Refresh {
        #[arg(long)]
        corpus: PathBuf,
        /// Metadata used for source selection by later searches.
        #[arg(long, default_value = "exact")]
        mode: MetadataMode,
    },
    /// Run a keyword query as a WebID.
    Search {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        webid: String,
        #[arg(long)]
        query: String,
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Override the mode chosen at refresh.
        #[arg(long)]
        mode: Option<MetadataMode>,
    },
    /// Check every privacy guarantee and write the report.
    Audit {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        inject_faults: bool,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Time each pipeline stage at growing corpus scales.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Server-count multipliers applied to the config's scale.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        factors: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        queries: usize,
    },
}

fn emit<T: Serialize>(text: bool, value: &T, render: impl FnOnce() -> String) -> Result<()> {
    if text {
        println!("{}", render());
    } else {
        println!("{}", serde_json::to_string_pretty(value)?);
    }
    Ok(())
}

fn read_config(path: &PathBuf) -> Result<WorkbenchConfig> {
    let json = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: WorkbenchConfig = serde_json::from_str(&json).with_context(|| format!("parsing {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn generate(text: bool, config: &PathBuf, out: &PathBuf) -> Result<()> {
    let cfg = read_config(config)?;
    let corpus = generate_corpus(&cfg)?;
    let store = Store::new(out);
    store.write(CORPUS_FILE, &corpus.to_json()?)?;
    store.write(CONFIG_FILE, &serde_json::to_string_pretty(&cfg)?)?;
    let summary = json!({
        "corpus": out.join(CORPUS_FILE),
        "servers": corpus.servers.len(),
        "pods": corpus.pod_count(),
        "resources": corpus.resource_count(),
        "webids": corpus.webids.len(),
        "digest": corpus.digest()?,
    });
    emit(text, &summary, || {
        format!(
            "wrote {} ({} servers, {} pods, {} resources)",
            out.join(CORPUS_FILE).display(),
            corpus.servers.len(),
            corpus.pod_count(),
            corpus.resource_count()
        )
    })
}

fn index(text: bool, dir: &PathBuf) -> Result<()> {
    let store = Store::new(dir);
    let mut sim = store.load()?;
    let pods: Vec<String> = sim.corpus.pods().map(|p| p.url.clone()).collect();
    let (mut indexed, mut skipped) = (Vec::new(), Vec::new());
    for url in pods {
        match reindex(&mut sim.corpus, &url) {
            Ok(_) => indexed.push(url),
            Err(Error::IndexingNotAuthorized(_)) => skipped.push(url),
            Err(e) => return Err(e.into()),
        }
    }
    store.save(&sim)?;
    let out = json!({ "indexed": indexed, "not_authorized": skipped });
    emit(text, &out, || format!("indexed {} pods, {} not authorized", indexed.len(), skipped.len()))
}

fn register(text: bool, dir: &PathBuf, server: Option<String>, pod: Option<String>) -> Result<()> {
    let store = Store::new(dir);
    let mut sim = store.load()?;
    if let Some(url) = pod {
        sim.corpus.set_registered(&url, true)?;
        store.write(CORPUS_FILE, &sim.corpus.to_json()?)?;
        let out = json!({ "pod": url, "registered": true });
        return emit(text, &out, || format!("pod {url} registered for search; refresh to publish"));
    }
    let targets: Vec<String> = match server {
        Some(id) => {
            if !sim.corpus.servers.contains_key(&id) {
                return Err(Error::UnknownTarget(id).into());
            }
            vec![id]
        }
        None => sim.corpus.servers.keys().cloned().collect(),
    };
    let results: Vec<_> = targets
        .iter()
        .map(|id| {
            let location = metadata_location(id);
            let status = sim.overlay.register_server(id, &location);
            json!({ "server": id, "location": location, "status": status })
        })
        .collect();
    store.save(&sim)?;
    emit(text, &results, || {
        results
            .iter()
            .map(|r| {
                let field = |k: &str| r[k].as_str().unwrap_or_default().to_string();
                format!("{} {} at {}", field("server"), field("status"), field("location"))
            })
            .collect::<Vec<_>>()
            .join("\n")
    })
}

fn refresh(text: bool, dir: &PathBuf, mode: MetadataMode) -> Result<()> {
    let store = Store::new(dir);
    let mut sim = store.load()?;
    let report = sim.refresh()?;
    store.save(&sim)?;
    let as_of = sim.snapshot()?.as_of;
    let state = State {
        corpus_digest: sim.corpus.digest()?,
        as_of,
        mode,
    };
    store.write(STATE_FILE, &serde_json::to_string_pretty(&state)?)?;
    let out = json!({
        "reindexed": report.reindexed,
        "not_authorized": report.unindexed,
        "servers": sim.snapshot()?.servers.len(),
        "as_of": as_of,
        "mode": mode,
    });
    emit(text, &out, || {
        format!(
            "refreshed: {} pods reindexed, {} servers, mode {mode}",
            report.reindexed.len(),
            sim.corpus.servers.len()
        )
    })
}

fn run_search(
    text: bool,
    dir: &PathBuf,
    webid: &str,
    query: &str,
    strategy: Option<Strategy>,
    mode: Option<MetadataMode>,
) -> Result<()> {
    let store = Store::new(dir);
    let (sim, state) = store.load_fresh()?;
    let cfg = store.config()?;
    let q = Query::new(WebId::new(webid), query.split_whitespace())?
        .with_strategy(strategy.unwrap_or(cfg.strategy))
        .with_mode(mode.unwrap_or(state.mode));
    let outcome = sim.search(&q)?;
    emit(text, &outcome.results, || {
        outcome
            .results
            .iter()
            .map(|r| format!("{:>6}  {}", r.score, r.url))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

fn audit(text: bool, dir: &PathBuf, out: &PathBuf, inject_faults: bool, queries: usize, seed: u64) -> Result<ExitCode> {
    let store = Store::new(dir);
    let (sim, _) = store.load_fresh()?;
    let cfg = AuditConfig {
        seed,
        queries,
        inject_faults,
        ..AuditConfig::default()
    };
    let report = run_audit(&sim, &cfg)?;
    std::fs::write(out, report.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    let summary = json!({
        "report": out,
        "pass": report.exit_ok(),
        "goal_matrix": report.goal_matrix,
    });
    emit(text, &summary, || report.to_text())?;
    Ok(if report.exit_ok() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[derive(Serialize)]
struct BenchRow {
    servers: usize,
    pods: usize,
    resources: usize,
    generate_ms: f64,
    index_ms: f64,
    refresh_ms: f64,
    search_ms: f64,
    queries: usize,
    pod_index_reads: u64,
    pods_touched_per_query: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn bench(text: bool, config: &PathBuf, factors: &[usize], queries: usize) -> Result<()> {
    let base = read_config(config)?;
    let mut rows = Vec::new();
    for &f in factors {
        let mut cfg = base.clone();
        cfg.scale.servers = base.scale.servers * f.max(1);
        let t = Instant::now();
        let corpus = generate_corpus(&cfg)?;
        let generate_ms = ms(t);
        let mut sim = Simulation::new(corpus, cfg.overlay_nodes, RefreshConfig { bloom: cfg.bloom, ..RefreshConfig::default() });
        let t = Instant::now();
        let pods: Vec<String> = sim.corpus.pods().map(|p| p.url.clone()).collect();
        for url in &pods {
            match reindex(&mut sim.corpus, url) {
                Ok(_) | Err(Error::IndexingNotAuthorized(_)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let index_ms = ms(t);
        let t = Instant::now();
        sim.refresh()?;
        let refresh_ms = ms(t);
        let workload = scoped_search::audit::random_workload(&sim.corpus, queries, cfg.seed);
        let counters = TouchCounters::new();
        let mut ctx = sim.context()?;
        ctx.counters = Some(&counters);
        let t = Instant::now();
        let mut touched = 0usize;
        for q in &workload {
            let before = counters.index_reads();
            search(&ctx, q)?;
            touched += (counters.index_reads() - before) as usize;
        }
        let search_ms = ms(t);
        rows.push(BenchRow {
            servers: sim.corpus.servers.len(),
            pods: sim.corpus.pod_count(),
            resources: sim.corpus.resource_count(),
            generate_ms,
            index_ms,
            refresh_ms,
            search_ms,
            queries: workload.len(),
            pod_index_reads: counters.index_reads(),
            pods_touched_per_query: touched as f64 / workload.len().max(1) as f64,
        });
    }
    emit(text, &rows, || {
        let mut out = format!(
            "{:>8} {:>6} {:>9} {:>10} {:>10} {:>10} {:>10} {:>12}\n",
            "servers", "pods", "resources", "gen ms", "index ms", "refresh ms", "search ms", "pods/query"
        );
        for r in &rows {
            out.push_str(&format!(
                "{:>8} {:>6} {:>9} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>12.2}\n",
                r.servers, r.pods, r.resources, r.generate_ms, r.index_ms, r.refresh_ms, r.search_ms, r.pods_touched_per_query
            ));
        }
        out
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { config, out } => generate(cli.text, config, out).map(|_| ExitCode::SUCCESS),
        Command::Index { corpus } => index(cli.text, corpus).map(|_| ExitCode::SUCCESS),
        Command::Register { corpus, server, pod } => {
            register(cli.text, corpus, server.clone(), pod.clone()).map(|_| ExitCode::SUCCESS)
        }
        Command::Refresh { corpus, mode } => refresh(cli.text, corpus, *mode).map(|_| ExitCode::SUCCESS),
        Command::Search { corpus, webid, query, strategy, mode } => {
            run_search(cli.text, corpus, webid, query, *strategy, *mode).map(|_| ExitCode::SUCCESS)
        }
        Command::Audit { corpus, out, inject_faults, queries, seed } => {
            audit(cli.text, corpus, out, *inject_faults, *queries, *seed)
        }
        Command::Bench { config, factors, queries } => bench(cli.text, config, factors, *queries).map(|_| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
