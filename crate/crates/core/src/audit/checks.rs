use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{anonymous, brute_index, known_webids, oracle_search_searchable, BruteIndex};
use super::reconstruct::{f_ns, f_s, ReconstructedServerMetadata, ResultRecord};
use super::verdict::{Counterexample, Tally, Verdict};
use crate::error::Result;
use crate::index::InvertedIndex;
use crate::metadata::{AccessTrace, MetadataSnapshot};
use crate::model::{global_visibility, tokenize, Corpus, Partition, Pod, WebId};
use crate::par;
use crate::search::{
    evaluate_pod, result_pods, search, MetadataMode, Query, SearchFaults, Strategy,
};
use crate::sim::Simulation;

/// Seeded random queries. About half take their terms from a single
/// resource so conjunctive queries have a fair chance of matching.
pub fn random_workload(corpus: &Corpus, count: usize, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts: Vec<Vec<String>> = corpus
        .pods()
        .flat_map(|p| p.resources.values())
        .map(|r| tokenize(&r.text))
        .filter(|t| !t.is_empty())
        .collect();
    let mut vocab: Vec<String> = texts.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    vocab.push("absentterm".into());
    let webids: Vec<WebId> = known_webids(corpus)
        .into_iter()
        .chain(std::iter::once(anonymous()))
        .collect();
    (0..count)
        .map(|_| {
            let webid = webids.choose(&mut rng).expect("anonymous is always present").clone();
            let n = rng.gen_range(1..=3);
            let terms: Vec<String> = match texts.choose(&mut rng) {
                Some(doc) if rng.gen_bool(0.5) => doc.iter().cloned().choose_multiple(&mut rng, n.min(2)),
                _ => (0..n).map(|_| vocab.choose(&mut rng).expect("non-empty").clone()).collect(),
            };
            let strategy = if rng.gen_bool(0.5) { Strategy::Direct } else { Strategy::Propagate };
            let mode = if rng.gen_bool(0.5) { MetadataMode::Exact } else { MetadataMode::Bloom };
            Query::new(webid, terms)
                .expect("terms are already tokens")
                .with_strategy(strategy)
                .with_mode(mode)
        })
        .collect()
}

/// Every result must lie in the caller's visibility and equal the
/// brute-force answer over searchable pods.
pub fn check_scope_isolation(
    sim: &Simulation,
    workload: &[Query],
    faults: Option<&SearchFaults>,
) -> Result<Verdict> {
    let mut ctx = sim.context()?;
    ctx.faults = faults;
    let outcomes = par::map(ctx.exec, workload, |q| -> Result<Tally> {
        let mut tally = Tally::default();
        let got = search(&ctx, q)?.urls();
        let visible = global_visibility(&sim.corpus, &q.webid);
        let leaked: Vec<&String> = got.iter().filter(|u| !visible.contains(u)).collect();
        tally.check(leaked.is_empty(), || {
            Counterexample::new("outside-visibility", format!("returned {leaked:?}"))
                .webid(&q.webid)
                .term(q.terms.join(" "))
        });
        let expected = oracle_search_searchable(&sim.corpus, &q.webid, &q.terms);
        tally.check(got == expected, || {
            Counterexample::new(
                "oracle-mismatch",
                format!(
                    "{:?}/{:?}: extra {:?}, missing {:?}",
                    q.strategy,
                    q.mode,
                    got.difference(&expected).collect::<Vec<_>>(),
                    expected.difference(&got).collect::<Vec<_>>()
                ),
            )
            .webid(&q.webid)
            .term(q.terms.join(" "))
        });
        Ok(tally)
    });
    Ok(outcomes.into_iter().collect::<Result<Tally>>()?.verdict())
}

fn as_brute(index: Option<&InvertedIndex>) -> BruteIndex {
    let mut out = BruteIndex::new();
    for (term, url, tf) in index.into_iter().flat_map(InvertedIndex::iter) {
        out.entry(term.to_string()).or_default().insert(url.to_string(), tf);
    }
    out
}

fn describe_diff(expected: &BruteIndex, got: &BruteIndex) -> String {
    let terms: BTreeSet<&String> = expected.keys().chain(got.keys()).collect();
    for t in terms {
        let (e, g) = (expected.get(t), got.get(t));
        if e != g {
            return format!("term {t:?}: expected {e:?}, indexed {g:?}");
        }
    }
    String::new()
}

fn check_pod_indexes(pod: &Pod, webids: &BTreeSet<WebId>) -> Tally {
    let mut tally = Tally::default();
    let Some(set) = pod.index.as_ref() else {
        tally.check(!pod.indexing_enabled, || {
            Counterexample::new("missing-index", "indexing enabled but no index built").at(&pod.url)
        });
        return tally;
    };
    tally.check(pod.indexing_enabled, || {
        Counterexample::new("unauthorized-index", "index exists without owner authorization").at(&pod.url)
    });
    tally.check(set.built_at == pod.revision, || {
        Counterexample::new(
            "stale-index",
            format!("built at {}, pod revision {}", set.built_at, pod.revision),
        )
        .at(&pod.url)
    });
    let public = brute_index(pod, |r| r.acl.public);
    let got = as_brute(Some(&set.public_index));
    tally.check(public == got, || {
        Counterexample::new("public-index-mismatch", describe_diff(&public, &got)).at(&pod.url)
    });
    let scopes: BTreeSet<&WebId> = webids.iter().chain(set.scoped.keys()).collect();
    for w in scopes {
        let got = as_brute(set.scoped.get(w));
        for (term, urls) in &got {
            for url in urls.keys() {
                let readable = pod.resources.get(url).is_some_and(|r| r.acl.can_read(w));
                tally.check(readable, || {
                    Counterexample::new("cross-scope-posting", format!("posting for {url}"))
                        .webid(w)
                        .term(term)
                        .at(&pod.url)
                });
            }
        }
        let expected = brute_index(pod, |r| !r.acl.public && r.acl.readers.contains(w));
        tally.check(expected == got, || {
            Counterexample::new("scoped-index-mismatch", describe_diff(&expected, &got))
                .webid(w)
                .at(&pod.url)
        });
    }
    tally
}

/// Each scoped index must equal a brute-force index over exactly the
/// resources its WebID is listed on; the public index likewise over public
/// resources.
pub fn check_index_isolation(corpus: &Corpus, exec: par::Exec) -> Verdict {
    let webids = known_webids(corpus);
    let pods: Vec<&Pod> = corpus.pods().collect();
    par::map(exec, &pods, |p| check_pod_indexes(p, &webids))
        .into_iter()
        .collect::<Tally>()
        .verdict()
}

/// WebIDs to audit: everyone known to the corpus, everyone with a metadata
/// partition, and an identity that reads public resources only.
fn audit_webids(corpus: &Corpus, snap: &MetadataSnapshot) -> BTreeSet<WebId> {
    let mut out = known_webids(corpus);
    for meta in snap.servers.values() {
        out.extend(meta.map.per_webid.keys().cloned());
    }
    out.extend(snap.system.map.per_webid.keys().cloned());
    out.insert(anonymous());
    out
}

/// Terms the maintained metadata exposes to `webid` at either tier.
fn term_domain(snap: &MetadataSnapshot, webid: &WebId) -> BTreeSet<String> {
    snap.servers
        .values()
        .map(|m| &m.map)
        .chain(std::iter::once(&snap.system.map))
        .flat_map(|m| m.view(webid).into_keys())
        .collect()
}

/// Server-local result records for every (webid, term) in the domain.
fn result_log(corpus: &Corpus, snap: &MetadataSnapshot, webids: &[WebId], exec: par::Exec) -> BTreeMap<String, Vec<ResultRecord>> {
    let per_webid = par::map(exec, webids, |w| {
        let terms = term_domain(snap, w);
        let mut recs = Vec::new();
        for server in corpus.servers.keys() {
            for t in &terms {
                recs.push(ResultRecord {
                    webid: w.clone(),
                    terms: vec![t.clone()],
                    server_id: server.clone(),
                    result_pod_urls: result_pods(corpus, server, w, t),
                });
            }
        }
        recs
    });
    let mut by_server: BTreeMap<String, Vec<ResultRecord>> =
        corpus.servers.keys().map(|s| (s.clone(), Vec::new())).collect();
    for rec in per_webid.into_iter().flatten() {
        by_server.get_mut(&rec.server_id).expect("server listed").push(rec);
    }
    by_server
}

fn reconstruct(log: &BTreeMap<String, Vec<ResultRecord>>) -> Result<BTreeMap<String, ReconstructedServerMetadata>> {
    log.iter()
        .map(|(s, recs)| {
            let mut m = f_s(recs)?;
            m.server_id = s.clone();
            Ok((s.clone(), m))
        })
        .collect()
}

fn compare_sources(
    tally: &mut Tally,
    tier: &str,
    location: &str,
    webid: &WebId,
    term: &str,
    maintained: (&BTreeSet<String>, u64),
    rebuilt: (&BTreeSet<String>, u64),
) {
    tally.check(maintained == rebuilt, || {
        let extra: Vec<_> = maintained.0.difference(rebuilt.0).collect();
        let missing: Vec<_> = rebuilt.0.difference(maintained.0).collect();
        Counterexample::new(
            tier,
            format!(
                "maintained count {} vs reconstructed {}; unexplained {extra:?}; missing {missing:?}",
                maintained.1, rebuilt.1
            ),
        )
        .webid(webid)
        .term(term)
        .at(extra.first().map(|s| s.as_str()).unwrap_or(location))
    });
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservativityReport {
    /// Sources and source counts at both tiers against the reconstructions.
    pub structure: Verdict,
    /// Term frequency and collection size against authorized postings.
    pub statistics: Verdict,
}

impl ConservativityReport {
    pub fn pass(&self) -> bool {
        self.structure.pass && self.statistics.pass
    }
}

/// Maintained metadata must equal what each WebID could rebuild from its
/// own authorized results, cell for cell, over the closure of (webid, term)
/// pairs the metadata itself exposes.
pub fn check_conservativity(sim: &Simulation) -> Result<ConservativityReport> {
    let snap = sim.snapshot()?;
    let corpus = &sim.corpus;
    let exec = sim.config.exec;
    let webids: Vec<WebId> = audit_webids(corpus, snap).into_iter().collect();
    let log = result_log(corpus, snap, &webids, exec);
    let rebuilt = reconstruct(&log)?;
    let times: Vec<(&str, u64, &ReconstructedServerMetadata)> = rebuilt
        .iter()
        .map(|(s, m)| (s.as_str(), snap.system.snapshot_times.get(s).copied().unwrap_or(snap.as_of), m))
        .collect();
    let system = f_ns(&times);

    let per_webid = par::map(exec, &webids, |w| {
        let mut structure = Tally::default();
        let mut statistics = Tally::default();
        for t in term_domain(snap, w) {
            let mut sys_tf = 0u64;
            let mut sys_size = 0u64;
            for (server_id, server) in &corpus.servers {
                let maintained = snap.servers.get(server_id).map(|m| m.entry(w, &t)).unwrap_or_default();
                let r = rebuilt.get(server_id).map(|m| m.get(w, &t)).unwrap_or_default();
                compare_sources(
                    &mut structure,
                    "server-tier",
                    server_id,
                    w,
                    &t,
                    (&maintained.sources, maintained.stats.source_count),
                    (&r.sources, r.count),
                );
                let terms = [t.clone()];
                let (mut tf, mut size) = (0u64, 0u64);
                for pod in server.pods.values().filter(|p| p.discoverable()) {
                    for (_, tfs) in pod.index.iter().flat_map(|i| evaluate_pod(i, w, &terms, None)) {
                        tf += u64::from(tfs[0]);
                        size += 1;
                    }
                }
                sys_tf += tf;
                sys_size += size;
                statistics.check(
                    (maintained.stats.tf_total, maintained.stats.collection_size) == (tf, size),
                    || {
                        Counterexample::new(
                            "server-tier-stats",
                            format!(
                                "maintained (tf {}, size {}) vs postings (tf {tf}, size {size})",
                                maintained.stats.tf_total, maintained.stats.collection_size
                            ),
                        )
                        .webid(w)
                        .term(&t)
                        .at(server_id)
                    },
                );
            }
            let maintained = snap.system.entry(w, &t);
            let r = system.get(w, &t);
            compare_sources(
                &mut structure,
                "system-tier",
                "system",
                w,
                &t,
                (&maintained.sources, maintained.stats.source_count),
                (&r.sources, r.count),
            );
            statistics.check(
                (maintained.stats.tf_total, maintained.stats.collection_size) == (sys_tf, sys_size),
                || {
                    Counterexample::new(
                        "system-tier-stats",
                        format!(
                            "maintained (tf {}, size {}) vs postings (tf {sys_tf}, size {sys_size})",
                            maintained.stats.tf_total, maintained.stats.collection_size
                        ),
                    )
                    .webid(w)
                    .term(&t)
                },
            );
        }
        (structure, statistics)
    });
    let mut structure = Tally::default();
    let mut statistics = Tally::default();
    for (s, st) in per_webid {
        structure.merge(s);
        statistics.merge(st);
    }
    Ok(ConservativityReport {
        structure: structure.verdict(),
        statistics: statistics.verdict(),
    })
}

/// Terms searched per WebID when tracing the read path.
const TRACED_TERMS: usize = 6;

/// Each WebID's slice of the metadata must be rebuildable from that WebID's
/// own results alone, and its read path must stay inside its own partition
/// and the public one.
pub fn check_separability(sim: &Simulation, faults: Option<&SearchFaults>) -> Result<Verdict> {
    let snap = sim.snapshot()?;
    let corpus = &sim.corpus;
    let exec = sim.config.exec;
    let webids: Vec<WebId> = audit_webids(corpus, snap).into_iter().collect();
    let anon = anonymous();
    let public_log = result_log(corpus, snap, std::slice::from_ref(&anon), par::Exec::Sequential);
    let public_rebuilt = reconstruct(&public_log)?;

    let mut ctx = sim.context()?;
    ctx.faults = faults;
    let ctx = ctx;
    let per_webid = par::map(exec, &webids, |w| -> Result<Tally> {
        let mut tally = Tally::default();
        let own_log = result_log(corpus, snap, std::slice::from_ref(w), par::Exec::Sequential);
        let own = reconstruct(&own_log)?;
        for (server_id, meta) in &snap.servers {
            let rebuilt = own.get(server_id).cloned().unwrap_or_default();
            let own_partition = meta.map.per_webid.get(w);
            for (t, e) in own_partition.into_iter().flatten() {
                let r = rebuilt.get(w, t);
                let foreign: Vec<_> = e.sources.difference(&r.sources).collect();
                tally.check(foreign.is_empty(), || {
                    Counterexample::new(
                        "partition-not-own",
                        format!("partition lists {foreign:?} beyond the WebID's own results"),
                    )
                    .webid(w)
                    .term(t)
                    .at(foreign[0])
                });
            }
            for t in meta.map.view(w).keys() {
                let m = meta.entry(w, t);
                let r = rebuilt.get(w, t);
                compare_sources(&mut tally, "view-not-own", server_id, w, t, (&m.sources, m.stats.source_count), (&r.sources, r.count));
            }
        }
        if let Some(own_sys) = snap.system.map.per_webid.get(w) {
            let snaps: Vec<_> = own.iter().map(|(s, m)| (s.as_str(), snap.as_of, m)).collect();
            let rebuilt = f_ns(&snaps);
            for (t, e) in own_sys {
                let r = rebuilt.get(w, t);
                let foreign: Vec<_> = e.sources.difference(&r.sources).collect();
                tally.check(foreign.is_empty(), || {
                    Counterexample::new(
                        "system-partition-not-own",
                        format!("partition lists servers {foreign:?} beyond the WebID's own results"),
                    )
                    .webid(w)
                    .term(t)
                });
            }
        }
        let mut terms: Vec<String> = term_domain(snap, w).into_iter().take(TRACED_TERMS).collect();
        if terms.is_empty() {
            terms.push("absentterm".into());
        }
        let allowed: BTreeSet<Partition> = [Partition::WebId(w.clone()), Partition::Public].into();
        for t in terms {
            for strategy in [Strategy::Direct, Strategy::Propagate] {
                let trace = AccessTrace::new();
                let mut traced = ctx;
                traced.trace = Some(&trace);
                let q = Query::new(w.clone(), [t.as_str()])?
                    .with_strategy(strategy)
                    .with_mode(MetadataMode::Exact);
                search(&traced, &q)?;
                let foreign: Vec<Partition> = trace.partitions().difference(&allowed).cloned().collect();
                tally.check(foreign.is_empty(), || {
                    Counterexample::new("foreign-partition-read", format!("read path touched {foreign:?}"))
                        .webid(w)
                        .term(&t)
                });
            }
        }
        Ok(tally)
    });
    let mut tally = per_webid.into_iter().collect::<Result<Tally>>()?;
    for (server_id, meta) in &snap.servers {
        let rebuilt = public_rebuilt.get(server_id).cloned().unwrap_or_default();
        for (t, e) in &meta.map.public {
            let r = rebuilt.get(&anon, t);
            let foreign: Vec<_> = e.sources.difference(&r.sources).collect();
            tally.check(foreign.is_empty(), || {
                Counterexample::new("public-partition-not-public", format!("lists {foreign:?}"))
                    .term(t)
                    .at(server_id)
            });
        }
    }
    Ok(tally.verdict())
}
