//! The search app: binds a query to an authenticated WebID, narrows the
//! fan-out through system- and server-tier metadata, evaluates conjunctive
//! matches on the WebID's own index files and ranks the result.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bloom::bloom_select;
use crate::error::{Error, Result};
use crate::index::{lookup_postings, PodIndexSet};
use crate::metadata::{AccessTrace, MetadataSnapshot, ServerMetadata};
use crate::model::{tokenize, Corpus, Partition, WebId};
use crate::overlay::{self, OverlayNetwork};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Overlay returns candidate servers; the search app walks them.
    #[default]
    Direct,
    /// Overlay nodes fan the query out and return aggregated matches.
    Propagate,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "propagate" => Ok(Self::Propagate),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Direct => "direct",
            Self::Propagate => "propagate",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetadataMode {
    #[default]
    Exact,
    Bloom,
}

impl FromStr for MetadataMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "bloom" => Ok(Self::Bloom),
            other => Err(Error::UnknownMode(other.to_string())),
        }
    }
}

impl fmt::Display for MetadataMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Bloom => "bloom",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub webid: WebId,
    /// Tokenizer-normal, sorted, deduplicated.
    pub terms: Vec<String>,
    pub strategy: Strategy,
    pub mode: MetadataMode,
}

impl Query {
    /// Tokenize every input and keep the distinct terms.
    pub fn new<I, S>(webid: WebId, raw_terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: BTreeSet<String> = raw_terms
            .into_iter()
            .flat_map(|t| tokenize(t.as_ref()))
            .collect();
        if terms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        Ok(Self {
            webid,
            terms: terms.into_iter().collect(),
            strategy: Strategy::default(),
            mode: MetadataMode::default(),
        })
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_mode(mut self, mode: MetadataMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedResult {
    pub url: String,
    pub score: u64,
    pub server: String,
    pub pod: String,
}

/// A resource containing every query term, with per-term frequencies in
/// query-term order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    pub url: String,
    pub server: String,
    pub pod: String,
    pub tfs: Vec<u32>,
}

/// Score = sum of per-term tf; descending, ties by ascending url.
pub fn rank(matches: impl IntoIterator<Item = Match>) -> Vec<RankedResult> {
    let mut out: Vec<RankedResult> = matches
        .into_iter()
        .map(|m| RankedResult {
            score: m.tfs.iter().map(|&tf| tf as u64).sum(),
            url: m.url,
            server: m.server,
            pod: m.pod,
        })
        .collect();
    out.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.url.cmp(&b.url)));
    out
}

/// Counters for what a search physically touched.
#[derive(Debug, Default)]
pub struct TouchCounters {
    pub pod_index_reads: AtomicU64,
    pub server_metadata_reads: AtomicU64,
    pods: Mutex<BTreeSet<String>>,
}

impl TouchCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pods_touched(&self) -> BTreeSet<String> {
        self.pods.lock().expect("counter lock").clone()
    }

    pub fn index_reads(&self) -> u64 {
        self.pod_index_reads.load(Ordering::Relaxed)
    }

    fn touch_pod(&self, pod: &str) {
        self.pod_index_reads.fetch_add(1, Ordering::Relaxed);
        self.pods.lock().expect("counter lock").insert(pod.to_string());
    }
}

/// Deliberate protocol violations, used to show the audit catches them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchFaults {
    /// Read every index file in the pod instead of only the caller's.
    pub merged_index_lookup: bool,
    /// Also read this WebID's server-tier partition during pod selection.
    pub foreign_partition: Option<WebId>,
}

/// Sources picked during one search, for inspection by tests and the audit.
#[derive(Debug, Default)]
pub struct Selection {
    pub servers: Mutex<BTreeSet<String>>,
    pub pods: Mutex<BTreeSet<String>>,
}

#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub corpus: &'a Corpus,
    pub metadata: &'a MetadataSnapshot,
    pub overlay: &'a OverlayNetwork,
    pub counters: Option<&'a TouchCounters>,
    pub trace: Option<&'a AccessTrace>,
    pub faults: Option<&'a SearchFaults>,
    pub exec: Exec,
}

impl<'a> SearchContext<'a> {
    pub fn new(corpus: &'a Corpus, metadata: &'a MetadataSnapshot, overlay: &'a OverlayNetwork) -> Self {
        Self {
            corpus,
            metadata,
            overlay,
            counters: None,
            trace: None,
            faults: None,
            exec: Exec::Sequential,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchOutcome {
    pub results: Vec<RankedResult>,
    pub selected_servers: BTreeSet<String>,
    pub selected_pods: BTreeSet<String>,
}

impl SearchOutcome {
    pub fn urls(&self) -> BTreeSet<String> {
        self.results.iter().map(|r| r.url.clone()).collect()
    }
}

pub fn search(ctx: &SearchContext<'_>, query: &Query) -> Result<SearchOutcome> {
    if query.terms.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if ctx.metadata.as_of < ctx.corpus.clock() {
        return Err(Error::StaleMetadata(format!(
            "metadata as of event {} but corpus is at event {}",
            ctx.metadata.as_of,
            ctx.corpus.clock()
        )));
    }
    let selection = Selection::default();
    let matches = match query.strategy {
        Strategy::Direct => {
            let servers = overlay::select_servers(
                ctx.overlay,
                ctx.metadata,
                &query.webid,
                &query.terms,
                query.mode,
            )?;
            selection
                .servers
                .lock()
                .expect("selection lock")
                .extend(servers.iter().cloned());
            let batches = par::map(ctx.exec, &servers, |s| search_server(ctx, s, query, &selection));
            let mut merged = Vec::new();
            for b in batches {
                merged.extend(b?);
            }
            merged
        }
        Strategy::Propagate => overlay::propagate_query(ctx.overlay, ctx, query, &selection)?,
    };
    Ok(SearchOutcome {
        results: rank(matches),
        selected_servers: selection.servers.into_inner().expect("selection lock"),
        selected_pods: selection.pods.into_inner().expect("selection lock"),
    })
}

/// Pods on this server whose entries for `webid` are non-empty for every term.
pub fn select_pods(meta: &ServerMetadata, webid: &WebId, terms: &[String]) -> BTreeSet<String> {
    select_pods_traced(meta, webid, terms, None, None)
}

fn select_pods_traced(
    meta: &ServerMetadata,
    webid: &WebId,
    terms: &[String],
    trace: Option<&AccessTrace>,
    foreign: Option<&WebId>,
) -> BTreeSet<String> {
    let mut selected: Option<BTreeSet<String>> = None;
    for t in terms {
        let mut pods = meta
            .map
            .entry(webid, t, trace.map(|tr| (tr, meta.server_id.as_str())))
            .sources;
        if let Some(other) = foreign {
            if let Some(tr) = trace {
                tr.record(&meta.server_id, &Partition::WebId(other.clone()));
            }
            pods.extend(meta.entry(other, t).sources);
        }
        selected = Some(match selected {
            None => pods,
            Some(acc) => acc.intersection(&pods).cloned().collect(),
        });
    }
    selected.unwrap_or_default()
}

/// Resources in one pod containing every term, via `webid`'s index files.
pub fn evaluate_pod(
    index: &PodIndexSet,
    webid: &WebId,
    terms: &[String],
    faults: Option<&SearchFaults>,
) -> Vec<(String, Vec<u32>)> {
    let mut acc: Option<BTreeMap<String, Vec<u32>>> = None;
    for t in terms {
        let mut postings = lookup_postings(index, webid, t);
        if faults.is_some_and(|f| f.merged_index_lookup) {
            postings.extend(index.scoped.values().flat_map(|i| i.postings(t)));
        }
        let hits: BTreeMap<String, u32> = postings.into_iter().map(|p| (p.url, p.tf)).collect();
        acc = Some(match acc {
            None => hits.into_iter().map(|(u, tf)| (u, vec![tf])).collect(),
            Some(prev) => prev
                .into_iter()
                .filter_map(|(u, mut tfs)| {
                    hits.get(&u).map(|&tf| {
                        tfs.push(tf);
                        (u, tfs)
                    })
                })
                .collect(),
        });
        if acc.as_ref().is_some_and(BTreeMap::is_empty) {
            break;
        }
    }
    acc.unwrap_or_default().into_iter().collect()
}

/// Server-level step: select pods from this server's metadata, then read
/// the WebID's index files in each selected pod.
pub(crate) fn search_server(
    ctx: &SearchContext<'_>,
    server_id: &str,
    query: &Query,
    selection: &Selection,
) -> Result<Vec<Match>> {
    let Some(meta) = ctx.metadata.servers.get(server_id) else {
        return Ok(Vec::new());
    };
    let Some(server) = ctx.corpus.servers.get(server_id) else {
        return Ok(Vec::new());
    };
    if let Some(c) = ctx.counters {
        c.server_metadata_reads.fetch_add(1, Ordering::Relaxed);
    }
    let pods = match query.mode {
        MetadataMode::Exact => select_pods_traced(
            meta,
            &query.webid,
            &query.terms,
            ctx.trace,
            ctx.faults.and_then(|f| f.foreign_partition.as_ref()),
        ),
        MetadataMode::Bloom => {
            let sketches = ctx.metadata.sketches.server_for(server_id, &query.webid);
            let mut selected: BTreeSet<String> = server
                .pods
                .values()
                .filter(|p| server.readable_profile(&p.url).is_some())
                .map(|p| p.url.clone())
                .collect();
            for t in &query.terms {
                selected = bloom_select(&query.webid, &sketches, t, selected.iter().map(String::as_str))?;
            }
            selected
        }
    };
    selection
        .pods
        .lock()
        .expect("selection lock")
        .extend(pods.iter().cloned());
    let mut out = Vec::new();
    for pod_url in &pods {
        let Some(pod) = server.pods.get(pod_url) else {
            continue;
        };
        let Some(index) = pod.index.as_ref().filter(|_| pod.discoverable()) else {
            continue;
        };
        if let Some(c) = ctx.counters {
            c.touch_pod(pod_url);
        }
        for (url, tfs) in evaluate_pod(index, &query.webid, &query.terms, ctx.faults) {
            out.push(Match {
                url,
                server: server_id.to_string(),
                pod: pod_url.clone(),
                tfs,
            });
        }
    }
    Ok(out)
}

/// Authorized evaluation of one term on every searchable pod of a server,
/// bypassing metadata. Returns the pods that produced at least one result.
pub fn result_pods(corpus: &Corpus, server_id: &str, webid: &WebId, term: &str) -> BTreeSet<String> {
    let terms = [term.to_string()];
    corpus
        .servers
        .get(server_id)
        .into_iter()
        .flat_map(|s| s.pods.values())
        .filter(|p| p.discoverable())
        .filter_map(|p| p.index.as_ref().map(|i| (p, i)))
        .filter(|(_, i)| !evaluate_pod(i, webid, &terms, None).is_empty())
        .map(|(p, _)| p.url.clone())
        .collect()
}

/// Binds caller handles to authenticated WebIDs.
#[derive(Clone, Debug, Default)]
pub struct SessionLedger {
    bindings: BTreeMap<String, WebId>,
}

impl SessionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, handle: impl Into<String>, webid: WebId) {
        self.bindings.insert(handle.into(), webid);
    }

    pub fn authorize(&self, handle: &str) -> Result<WebId> {
        self.bindings
            .get(handle)
            .cloned()
            .ok_or_else(|| Error::Unauthenticated(handle.to_string()))
    }
}

/// A query as submitted by a caller: the handle decides the identity, any
/// WebID the caller claims is ignored.
#[derive(Clone, Debug)]
pub struct SearchRequest {
    pub handle: String,
    pub claimed_webid: Option<WebId>,
    pub terms: Vec<String>,
    pub strategy: Strategy,
    pub mode: MetadataMode,
}

pub fn authorize(request: &SearchRequest, ledger: &SessionLedger) -> Result<Query> {
    let webid = ledger.authorize(&request.handle)?;
    Ok(Query::new(webid, &request.terms)?
        .with_strategy(request.strategy)
        .with_mode(request.mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::metadata::{refresh, RefreshConfig};
    use crate::model::{metadata_location, Mutation};

    struct World {
        corpus: Corpus,
        snap: MetadataSnapshot,
        net: OverlayNetwork,
    }

    fn world(mut corpus: Corpus) -> World {
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let mut net = OverlayNetwork::new(2);
        for id in corpus.servers.keys() {
            net.register_server(id, &metadata_location(id));
        }
        net.publish(&snap);
        World { corpus, snap, net }
    }

    fn run(w: &World, webid: &str, terms: &[&str], strategy: Strategy, mode: MetadataMode) -> SearchOutcome {
        let ctx = SearchContext::new(&w.corpus, &w.snap, &w.net);
        let q = Query::new(webid.into(), terms).unwrap().with_strategy(strategy).with_mode(mode);
        search(&ctx, &q).unwrap()
    }

    fn urls(o: &SearchOutcome) -> Vec<String> {
        o.results.iter().map(|r| r.url.clone()).collect()
    }

    #[test]
    fn scope_isolation_example_returns_nothing() {
        let w = world(fixtures::scope_isolation_example());
        for s in [Strategy::Direct, Strategy::Propagate] {
            assert!(run(&w, "U_A", &["diabetes"], s, MetadataMode::Exact).results.is_empty());
        }
    }

    #[test]
    fn conjunctive_match() {
        let w = world(fixtures::index_isolation_example());
        let o = run(&w, "U2", &["diabetes", "diet"], Strategy::Direct, MetadataMode::Exact);
        assert_eq!(urls(&o), [format!("{}r3", fixtures::PG2_POD)]);
        let o = run(&w, "U2", &["diabetes", "cancer"], Strategy::Direct, MetadataMode::Exact);
        assert!(o.results.is_empty());
    }

    #[test]
    fn visibility_example_alpha() {
        let w = world(fixtures::visibility_example());
        let pod = fixtures::VISIBILITY_POD;
        let o = run(&w, "UUID1", &["alpha"], Strategy::Direct, MetadataMode::Exact);
        assert_eq!(urls(&o), [format!("{pod}r1"), format!("{pod}r3")]);
        let o = run(&w, "UUID2", &["alpha"], Strategy::Propagate, MetadataMode::Bloom);
        assert!(o.results.is_empty());
    }

    #[test]
    fn select_pods_worked_example() {
        let w = world(fixtures::server_tier_example());
        let meta = &w.snap.servers[fixtures::SERVER_TIER_SERVER];
        let t = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(
            select_pods(meta, &"UUID1".into(), &t(&["kwd2"])),
            [fixtures::dstore("dstore2"), fixtures::dstore("dstore3")].into()
        );
        assert!(select_pods(meta, &"UUID2".into(), &t(&["kwd1"])).is_empty());
        assert!(select_pods(meta, &"UUID1".into(), &t(&["kwd1", "kwd2"])).is_empty());
    }

    #[test]
    fn rank_orders_by_tf_sum_then_url() {
        let m = |url: &str, tfs: &[u32]| Match {
            url: url.into(),
            server: "s".into(),
            pod: "p".into(),
            tfs: tfs.to_vec(),
        };
        let r = rank([m("rB", &[1, 1]), m("rA", &[2, 1])]);
        assert_eq!((r[0].url.as_str(), r[0].score), ("rA", 3));
        assert_eq!((r[1].url.as_str(), r[1].score), ("rB", 2));
        let r = rank([m("z", &[1]), m("a", &[1])]);
        assert_eq!(r[0].url, "a");
        assert_eq!(rank([m("only", &[4])]).len(), 1);
    }

    #[test]
    fn strategies_and_modes_agree() {
        let w = world(fixtures::system_tier_example());
        for (webid, terms) in [("UUID1", vec!["kwd2"]), ("UUID2", vec!["kwd2"]), ("UUID1", vec!["kwd1", "kwd2"])] {
            let base = run(&w, webid, &terms, Strategy::Direct, MetadataMode::Exact);
            for s in [Strategy::Direct, Strategy::Propagate] {
                for m in [MetadataMode::Exact, MetadataMode::Bloom] {
                    assert_eq!(run(&w, webid, &terms, s, m).results, base.results);
                }
            }
        }
    }

    #[test]
    fn stale_metadata_refused() {
        let mut w = world(fixtures::system_tier_example());
        w.corpus
            .mutate(Mutation::RevokeRead {
                url: fixtures::system_tier_uuid2_doc(),
                webid: "UUID2".into(),
            })
            .unwrap();
        let ctx = SearchContext::new(&w.corpus, &w.snap, &w.net);
        let q = Query::new("UUID2".into(), ["kwd2"]).unwrap();
        assert!(matches!(search(&ctx, &q), Err(Error::StaleMetadata(_))));
    }

    #[test]
    fn query_validation() {
        assert!(matches!(Query::new("U".into(), ["", "--"]), Err(Error::EmptyQuery)));
        let q = Query::new("U".into(), ["Diet diabetes", "diet"]).unwrap();
        assert_eq!(q.terms, ["diabetes", "diet"]);
        assert!(matches!("sideways".parse::<Strategy>(), Err(Error::UnknownStrategy(_))));
        assert_eq!("propagate".parse::<Strategy>().unwrap(), Strategy::Propagate);
    }

    #[test]
    fn authorization_binds_identity() {
        let mut ledger = SessionLedger::new();
        ledger.bind("h1", "U1".into());
        assert_eq!(ledger.authorize("h1").unwrap(), WebId::from("U1"));
        assert!(matches!(ledger.authorize("h9"), Err(Error::Unauthenticated(_))));
        let req = SearchRequest {
            handle: "h1".into(),
            claimed_webid: Some("U2".into()),
            terms: vec!["cancer".into()],
            strategy: Strategy::Direct,
            mode: MetadataMode::Exact,
        };
        let q = authorize(&req, &ledger).unwrap();
        assert_eq!(q.webid, WebId::from("U1"));

        let w = world(fixtures::index_isolation_example());
        let ctx = SearchContext::new(&w.corpus, &w.snap, &w.net);
        assert!(search(&ctx, &q).unwrap().results.is_empty());
    }

    #[test]
    fn cross_scope_fault_leaks() {
        let w = world(fixtures::index_isolation_example());
        let faults = SearchFaults {
            merged_index_lookup: true,
            ..Default::default()
        };
        let pod = &w.corpus.pod(fixtures::PG2_POD).unwrap();
        let hits = evaluate_pod(pod.index.as_ref().unwrap(), &"U1".into(), &["cancer".into()], Some(&faults));
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn counters_see_only_selected_pods() {
        let w = world(fixtures::server_tier_example());
        let counters = TouchCounters::new();
        let mut ctx = SearchContext::new(&w.corpus, &w.snap, &w.net);
        ctx.counters = Some(&counters);
        let q = Query::new("UUID1".into(), ["kwd1"]).unwrap();
        search(&ctx, &q).unwrap();
        assert_eq!(counters.pods_touched(), [fixtures::dstore("dstore1")].into());
        assert_eq!(counters.index_reads(), 1);
    }
}
