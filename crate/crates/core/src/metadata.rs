//! Source-selection metadata: server-level and system-level mappings, both
//! partitioned by WebID, plus the Bloom sketch variants of each tier.
//!
//! Every tier keeps ACL-derived entries in per-WebID partitions and public
//! entries in one shared partition. A WebID's view of a tier is the merge of
//! its own partition with the public one, computed at read time.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::bloom::{bloom_build, BloomParams, BloomSketch, SketchFile, Tier};
use crate::error::{Error, Result};
use crate::index::{self, build_metadata_profile, build_pod_index_set};
use crate::model::{Corpus, Partition, Server, WebId};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRecord {
    /// Matching pods (server tier) or servers (system tier).
    pub source_count: u64,
    pub tf_total: u64,
    /// Matching resources across those sources.
    pub collection_size: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub sources: BTreeSet<String>,
    pub stats: StatsRecord,
}

impl SourceEntry {
    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    fn absorb(&mut self, source: &str, tf_total: u64, collection_size: u64) {
        self.sources.insert(source.to_string());
        self.stats.tf_total += tf_total;
        self.stats.collection_size += collection_size;
        self.stats.source_count = self.sources.len() as u64;
    }

    fn merge(&mut self, other: &SourceEntry) {
        self.sources.extend(other.sources.iter().cloned());
        self.stats.tf_total += other.stats.tf_total;
        self.stats.collection_size += other.stats.collection_size;
        self.stats.source_count = self.sources.len() as u64;
    }
}

pub type TermMap = BTreeMap<String, SourceEntry>;

/// Records which partitions a read path touched.
#[derive(Debug, Default)]
pub struct AccessTrace {
    reads: Mutex<BTreeSet<(String, Partition)>>,
}

impl AccessTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, location: &str, partition: &Partition) {
        self.reads
            .lock()
            .expect("trace lock")
            .insert((location.to_string(), partition.clone()));
    }

    pub fn reads(&self) -> BTreeSet<(String, Partition)> {
        self.reads.lock().expect("trace lock").clone()
    }

    pub fn partitions(&self) -> BTreeSet<Partition> {
        self.reads().into_iter().map(|(_, p)| p).collect()
    }
}

/// WebID partitions plus the shared public partition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartitionedMap {
    pub per_webid: BTreeMap<WebId, TermMap>,
    pub public: TermMap,
}

impl PartitionedMap {
    pub fn partition(&self, p: &Partition) -> Option<&TermMap> {
        match p {
            Partition::Public => Some(&self.public),
            Partition::WebId(w) => self.per_webid.get(w),
        }
    }

    pub fn partition_mut(&mut self, p: &Partition) -> &mut TermMap {
        match p {
            Partition::Public => &mut self.public,
            Partition::WebId(w) => self.per_webid.entry(w.clone()).or_default(),
        }
    }

    /// All partitions with at least one entry.
    pub fn partitions(&self) -> impl Iterator<Item = (Partition, &TermMap)> {
        self.per_webid
            .iter()
            .map(|(w, m)| (Partition::WebId(w.clone()), m))
            .chain(std::iter::once((Partition::Public, &self.public)))
            .filter(|(_, m)| !m.is_empty())
    }

    /// Merged entry for `webid`; `(∅, 0)` when nothing visible matches.
    pub fn entry(&self, webid: &WebId, term: &str, trace: Option<(&AccessTrace, &str)>) -> SourceEntry {
        let mut out = SourceEntry::default();
        for p in [Partition::WebId(webid.clone()), Partition::Public] {
            if let Some((t, loc)) = trace {
                t.record(loc, &p);
            }
            if let Some(e) = self.partition(&p).and_then(|m| m.get(term)) {
                out.merge(e);
            }
        }
        out
    }

    /// The full merged view for `webid`.
    pub fn view(&self, webid: &WebId) -> TermMap {
        let mut out = self.public.clone();
        if let Some(own) = self.per_webid.get(webid) {
            for (term, e) in own {
                out.entry(term.clone()).or_default().merge(e);
            }
        }
        out
    }

    fn finalize(&mut self) {
        self.per_webid.retain(|_, m| {
            m.retain(|_, e| !e.is_empty());
            !m.is_empty()
        });
        self.public.retain(|_, e| !e.is_empty());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerMetadata {
    pub server_id: String,
    pub map: PartitionedMap,
    pub as_of: u64,
}

impl ServerMetadata {
    pub fn entry(&self, webid: &WebId, term: &str) -> SourceEntry {
        self.map.entry(webid, term, None)
    }

    pub fn to_dump(&self) -> MetadataDump {
        MetadataDump::new(Tier::Server, self.as_of, &self.map, None)
    }

    pub fn from_dump(server_id: &str, dump: MetadataDump) -> Result<Self> {
        if dump.tier != Tier::Server {
            return Err(Error::StaleMetadata(format!("expected server tier for {server_id}")));
        }
        Ok(Self {
            server_id: server_id.to_string(),
            as_of: dump.as_of,
            map: dump.into_map(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SystemMetadata {
    pub map: PartitionedMap,
    pub as_of: u64,
    /// Event counter of the server snapshot each server contributed.
    pub snapshot_times: BTreeMap<String, u64>,
}

impl SystemMetadata {
    pub fn entry(&self, webid: &WebId, term: &str) -> SourceEntry {
        self.map.entry(webid, term, None)
    }

    pub fn to_dump(&self) -> MetadataDump {
        MetadataDump::new(Tier::System, self.as_of, &self.map, Some(&self.snapshot_times))
    }

    pub fn from_dump(dump: MetadataDump) -> Result<Self> {
        if dump.tier != Tier::System {
            return Err(Error::StaleMetadata("expected system tier".into()));
        }
        let snapshot_times = dump.snapshot_times.clone().unwrap_or_default();
        Ok(Self {
            as_of: dump.as_of,
            map: dump.into_map(),
            snapshot_times,
        })
    }
}

/// JSON form of either tier; the public partition appears under the
/// reserved `@public` key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataDump {
    pub tier: Tier,
    pub as_of: u64,
    pub per_webid: BTreeMap<String, TermMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<BTreeMap<String, u64>>,
}

impl MetadataDump {
    fn new(tier: Tier, as_of: u64, map: &PartitionedMap, snapshot_times: Option<&BTreeMap<String, u64>>) -> Self {
        Self {
            tier,
            as_of,
            per_webid: map
                .partitions()
                .map(|(p, m)| (p.key().to_string(), m.clone()))
                .collect(),
            snapshot_times: snapshot_times.cloned(),
        }
    }

    fn into_map(self) -> PartitionedMap {
        let mut map = PartitionedMap::default();
        for (key, terms) in self.per_webid {
            *map.partition_mut(&Partition::from_key(&key)) = terms;
        }
        map
    }
}

/// Aggregate the readable profiles of a server's registered pods.
pub fn aggregate_server_metadata(server: &Server, as_of: u64) -> Result<ServerMetadata> {
    let mut map = PartitionedMap::default();
    for pod in server.pods.values().filter(|p| p.discoverable()) {
        let profile = server
            .readable_profile(&pod.url)
            .ok_or_else(|| Error::StaleProfile {
                pod: pod.url.clone(),
                built_at: 0,
                revision: pod.revision,
            })?;
        if profile.built_at != pod.revision || pod.dirty {
            return Err(Error::StaleProfile {
                pod: pod.url.clone(),
                built_at: profile.built_at,
                revision: pod.revision,
            });
        }
        for (webid, terms) in &profile.per_webid {
            let part = map.partition_mut(&Partition::WebId(webid.clone()));
            for (term, s) in terms {
                part.entry(term.clone())
                    .or_default()
                    .absorb(&pod.url, s.tf_total, s.resources);
            }
        }
        for (term, s) in &profile.public_terms {
            map.public
                .entry(term.clone())
                .or_default()
                .absorb(&pod.url, s.tf_total, s.resources);
        }
    }
    map.finalize();
    Ok(ServerMetadata {
        server_id: server.id.clone(),
        map,
        as_of,
    })
}

/// Merge server snapshots. A server joins an entry's source set iff its
/// snapshot shows a non-empty match for that (partition, term).
pub fn aggregate_system_metadata(snapshots: &[(&str, &ServerMetadata, u64)]) -> SystemMetadata {
    let mut map = PartitionedMap::default();
    let mut snapshot_times = BTreeMap::new();
    for (server_id, meta, at) in snapshots {
        snapshot_times.insert(server_id.to_string(), *at);
        for (partition, terms) in meta.map.partitions() {
            let part = map.partition_mut(&partition);
            for (term, e) in terms.iter().filter(|(_, e)| e.stats.source_count > 0) {
                part.entry(term.clone()).or_default().absorb(
                    server_id,
                    e.stats.tf_total,
                    e.stats.collection_size,
                );
            }
        }
    }
    map.finalize();
    SystemMetadata {
        as_of: snapshot_times.values().copied().max().unwrap_or(0),
        map,
        snapshot_times,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BloomConfig {
    pub target_fpr: f64,
    /// Fixed (m, k) for every sketch instead of sizing from the target.
    #[serde(default)]
    pub explicit: Option<(usize, u32)>,
    pub seed: u64,
}

impl Default for BloomConfig {
    fn default() -> Self {
        Self {
            target_fpr: 0.01,
            explicit: None,
            seed: 0x5eed,
        }
    }
}

impl BloomConfig {
    fn params(&self, n: usize, label: &str) -> Result<BloomParams> {
        let seed = xxh3_64_with_seed(label.as_bytes(), self.seed);
        match self.explicit {
            Some((m, k)) => BloomParams::new(m, k, seed),
            None => BloomParams::for_target(n, self.target_fpr, seed),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SketchStore {
    pub system: BTreeMap<Partition, BloomSketch>,
    pub servers: BTreeMap<String, BTreeMap<Partition, BloomSketch>>,
}

fn sketch_partition(map: &TermMap, partition: &Partition, tier: Tier, label: &str, cfg: &BloomConfig) -> Result<BloomSketch> {
    let n = map.values().map(|e| e.sources.len()).sum();
    let params = cfg.params(n, label)?;
    bloom_build(
        map.iter()
            .flat_map(|(t, e)| e.sources.iter().map(move |s| (t.as_str(), s.as_str()))),
        params,
        partition.clone(),
        tier,
    )
}

impl SketchStore {
    pub fn build(servers: &BTreeMap<String, ServerMetadata>, system: &SystemMetadata, cfg: &BloomConfig) -> Result<Self> {
        let mut store = SketchStore::default();
        for (p, m) in system.map.partitions() {
            let label = format!("system/{}", p.key());
            store
                .system
                .insert(p.clone(), sketch_partition(m, &p, Tier::System, &label, cfg)?);
        }
        for (id, meta) in servers {
            let slot = store.servers.entry(id.clone()).or_default();
            for (p, m) in meta.map.partitions() {
                let label = format!("server/{id}/{}", p.key());
                slot.insert(p.clone(), sketch_partition(m, &p, Tier::Server, &label, cfg)?);
            }
        }
        Ok(store)
    }

    /// The system-tier sketches `webid` is allowed to read.
    pub fn system_for(&self, webid: &WebId) -> Vec<&BloomSketch> {
        readable(&self.system, webid)
    }

    pub fn server_for(&self, server_id: &str, webid: &WebId) -> Vec<&BloomSketch> {
        self.servers
            .get(server_id)
            .map(|m| readable(m, webid))
            .unwrap_or_default()
    }

    pub fn to_file(&self) -> SketchStoreFile {
        let files = |m: &BTreeMap<Partition, BloomSketch>| {
            m.iter()
                .map(|(p, s)| (p.key().to_string(), s.to_file()))
                .collect::<BTreeMap<_, _>>()
        };
        SketchStoreFile {
            system: files(&self.system),
            servers: self.servers.iter().map(|(id, m)| (id.clone(), files(m))).collect(),
        }
    }

    pub fn from_file(file: &SketchStoreFile) -> Result<Self> {
        let load = |m: &BTreeMap<String, SketchFile>, tier| -> Result<BTreeMap<Partition, BloomSketch>> {
            m.iter()
                .map(|(k, f)| {
                    let p = Partition::from_key(k);
                    Ok((p.clone(), BloomSketch::from_file(f, p, tier)?))
                })
                .collect()
        };
        Ok(Self {
            system: load(&file.system, Tier::System)?,
            servers: file
                .servers
                .iter()
                .map(|(id, m)| Ok((id.clone(), load(m, Tier::Server)?)))
                .collect::<Result<_>>()?,
        })
    }
}

fn readable<'a>(m: &'a BTreeMap<Partition, BloomSketch>, webid: &WebId) -> Vec<&'a BloomSketch> {
    [Partition::WebId(webid.clone()), Partition::Public]
        .iter()
        .filter_map(|p| m.get(p))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchStoreFile {
    pub system: BTreeMap<String, SketchFile>,
    pub servers: BTreeMap<String, BTreeMap<String, SketchFile>>,
}

/// One consistent version of all metadata, as produced by [`refresh`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetadataSnapshot {
    pub as_of: u64,
    pub servers: BTreeMap<String, ServerMetadata>,
    pub system: SystemMetadata,
    pub sketches: SketchStore,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub reindexed: Vec<String>,
    /// Pods whose owners have not authorized indexing.
    pub unindexed: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RefreshConfig {
    pub bloom: BloomConfig,
    pub exec: Exec,
}

/// Reindex dirty pods, re-aggregate both tiers and rebuild every sketch.
pub fn refresh(corpus: &mut Corpus, cfg: &RefreshConfig) -> Result<(MetadataSnapshot, RefreshReport)> {
    let mut report = RefreshReport::default();
    let dirty: Vec<String> = corpus
        .pods()
        .filter(|p| p.dirty || (p.indexing_enabled && p.index.is_none()))
        .map(|p| p.url.clone())
        .collect();
    let built = {
        let pods: Vec<_> = dirty.iter().filter_map(|u| corpus.pod(u)).collect();
        par::map(cfg.exec, &pods, |pod| {
            build_pod_index_set(pod).and_then(|set| {
                let profile = build_metadata_profile(pod, &set)?;
                Ok((set, profile))
            })
        })
    };
    for (url, result) in dirty.iter().zip(built) {
        match result {
            Ok((set, profile)) => {
                index::install(corpus, set, profile);
                report.reindexed.push(url.clone());
            }
            Err(Error::IndexingNotAuthorized(_)) => index::withdraw(corpus, url),
            Err(e) => return Err(e),
        }
    }
    report.unindexed = corpus
        .pods()
        .filter(|p| !p.indexing_enabled)
        .map(|p| p.url.clone())
        .collect();

    let as_of = corpus.clock();
    let servers: Vec<&Server> = corpus.servers.values().collect();
    let aggregated = par::map(cfg.exec, &servers, |s| aggregate_server_metadata(s, as_of));
    let mut server_meta = BTreeMap::new();
    for meta in aggregated {
        let meta = meta?;
        server_meta.insert(meta.server_id.clone(), meta);
    }
    for (id, meta) in &server_meta {
        let server = corpus.servers.get_mut(id).expect("aggregated server exists");
        server.espresso_pod.server_metadata = Some(meta.clone());
        server.espresso_pod.metadata_stale = false;
    }
    let inputs: Vec<(&str, &ServerMetadata, u64)> = server_meta
        .iter()
        .map(|(id, m)| (id.as_str(), m, m.as_of))
        .collect();
    let system = aggregate_system_metadata(&inputs);
    let sketches = SketchStore::build(&server_meta, &system, &cfg.bloom)?;
    Ok((
        MetadataSnapshot {
            as_of,
            servers: server_meta,
            system,
            sketches,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{AccessControlList, Mutation, Pod, Resource};

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn server_tier_matches_worked_example() {
        let mut corpus = fixtures::server_tier_example();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let meta = &snap.servers[fixtures::SERVER_TIER_SERVER];
        let u1 = WebId::from("UUID1");
        let u2 = WebId::from("UUID2");
        let e = meta.entry(&u1, "kwd1");
        assert_eq!(e.sources, ["dstore1"].map(fixtures::dstore).into());
        assert_eq!(e.stats.source_count, 1);
        let e = meta.entry(&u1, "kwd2");
        assert_eq!(e.sources, ["dstore2", "dstore3"].map(fixtures::dstore).into());
        assert_eq!(e.stats.source_count, 2);
        assert_eq!(meta.entry(&u2, "kwd1"), SourceEntry::default());
        assert_eq!(meta.entry(&u2, "kwd2").stats.source_count, 1);
    }

    #[test]
    fn server_without_registered_pods_is_empty() {
        let mut corpus = Corpus::new();
        corpus.add_server("s").unwrap();
        let mut pod = Pod::new("https://s/p/", "o").with_flags(true, false);
        pod.insert_resource(Resource::new("https://s/p/a", "x", AccessControlList::readers(["U"])))
            .unwrap();
        corpus.add_pod("s", pod).unwrap();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        assert!(snap.servers["s"].map.per_webid.is_empty());
        assert!(snap.system.map.per_webid.is_empty());
    }

    #[test]
    fn system_tier_matches_worked_example() {
        let mut corpus = fixtures::system_tier_example();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let u1 = WebId::from("UUID1");
        let u2 = WebId::from("UUID2");
        assert_eq!(snap.system.entry(&u1, "kwd1").sources, set(&["server1"]));
        assert_eq!(snap.system.entry(&u1, "kwd2").sources, set(&["server1", "server2"]));
        assert_eq!(snap.system.entry(&u1, "kwd2").stats.source_count, 2);
        assert_eq!(snap.system.entry(&u2, "kwd1"), SourceEntry::default());
        assert_eq!(snap.system.entry(&u2, "kwd2").sources, set(&["server3"]));
    }

    #[test]
    fn single_server_mirrors_into_system() {
        let mut corpus = fixtures::server_tier_example();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let meta = &snap.servers[fixtures::SERVER_TIER_SERVER];
        for (p, terms) in meta.map.partitions() {
            let sys = snap.system.map.partition(&p).unwrap();
            assert_eq!(sys.keys().collect::<Vec<_>>(), terms.keys().collect::<Vec<_>>());
            for e in sys.values() {
                assert_eq!(e.sources, set(&[fixtures::SERVER_TIER_SERVER]));
            }
        }
    }

    #[test]
    fn only_matching_server_is_listed() {
        let mut a = ServerMetadata {
            server_id: "A".into(),
            map: PartitionedMap::default(),
            as_of: 1,
        };
        let b_entry = SourceEntry {
            sources: set(&["pod-b"]),
            stats: StatsRecord {
                source_count: 1,
                tf_total: 2,
                collection_size: 1,
            },
        };
        a.map.partition_mut(&Partition::WebId("U".into()));
        let mut b = a.clone();
        b.server_id = "B".into();
        b.map
            .partition_mut(&Partition::WebId("U".into()))
            .insert("t".into(), b_entry);
        let sys = aggregate_system_metadata(&[("A", &a, 1), ("B", &b, 1)]);
        let e = sys.entry(&"U".into(), "t");
        assert_eq!(e.sources, set(&["B"]));
        assert_eq!(e.stats.source_count, 1);
        assert_eq!(e.stats.tf_total, 2);
    }

    #[test]
    fn revoke_then_refresh_empties_entry() {
        let mut corpus = fixtures::system_tier_example();
        refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        corpus
            .mutate(Mutation::RevokeRead {
                url: fixtures::system_tier_uuid2_doc(),
                webid: "UUID2".into(),
            })
            .unwrap();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        assert_eq!(snap.system.entry(&"UUID2".into(), "kwd2"), SourceEntry::default());
    }

    #[test]
    fn refresh_is_idempotent() {
        let mut corpus = fixtures::system_tier_example();
        let (a, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let (b, report) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        assert!(report.reindexed.is_empty());
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a.system.to_dump()).unwrap(),
            serde_json::to_string(&b.system.to_dump()).unwrap()
        );
    }

    #[test]
    fn unindexed_pod_stays_undiscoverable() {
        let mut corpus = Corpus::new();
        corpus.add_server("s").unwrap();
        let mut pod = Pod::new("https://s/p/", "o").with_flags(false, true);
        pod.insert_resource(Resource::new("https://s/p/a", "secret", AccessControlList::readers(["U"])))
            .unwrap();
        corpus.add_pod("s", pod).unwrap();
        let (snap, report) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        assert_eq!(report.unindexed, ["https://s/p/"]);
        assert!(snap.servers["s"].entry(&"U".into(), "secret").is_empty());
        assert!(snap.system.entry(&"U".into(), "secret").is_empty());
        assert!(snap.sketches.system.is_empty());
    }

    #[test]
    fn stale_profile_rejected() {
        let mut corpus = fixtures::server_tier_example();
        refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let url = fixtures::dstore("dstore1");
        corpus
            .mutate(Mutation::SetPublic {
                url: format!("{url}doc-a"),
                public: true,
            })
            .unwrap();
        let server = &corpus.servers[fixtures::SERVER_TIER_SERVER];
        assert!(matches!(
            aggregate_server_metadata(server, 9),
            Err(Error::StaleProfile { .. })
        ));
    }

    #[test]
    fn public_partition_merges_into_views() {
        let mut corpus = Corpus::new();
        corpus.add_server("s").unwrap();
        let mut pod = Pod::new("https://s/p/", "o");
        pod.insert_resource(Resource::new("https://s/p/a", "flu flu", AccessControlList::public()))
            .unwrap();
        pod.insert_resource(Resource::new("https://s/p/b", "flu", AccessControlList::readers(["U"])))
            .unwrap();
        corpus.add_pod("s", pod).unwrap();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let meta = &snap.servers["s"];
        let e = meta.entry(&"U".into(), "flu");
        assert_eq!(e.stats, StatsRecord { source_count: 1, tf_total: 3, collection_size: 2 });
        let e = meta.entry(&"stranger".into(), "flu");
        assert_eq!(e.stats, StatsRecord { source_count: 1, tf_total: 2, collection_size: 1 });
        let trace = AccessTrace::new();
        meta.map.entry(&"U".into(), "flu", Some((&trace, "s")));
        assert_eq!(
            trace.partitions(),
            [Partition::WebId("U".into()), Partition::Public].into()
        );
    }

    #[test]
    fn dumps_round_trip() {
        let mut corpus = fixtures::system_tier_example();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        let dump = snap.system.to_dump();
        let json = serde_json::to_string(&dump).unwrap();
        let back: MetadataDump = serde_json::from_str(&json).unwrap();
        assert_eq!(SystemMetadata::from_dump(back).unwrap(), snap.system);
        let file = snap.sketches.to_file();
        let again = SketchStore::from_file(&file).unwrap();
        assert_eq!(again.to_file(), file);
    }

    #[test]
    fn sketches_cover_exact_sources() {
        let mut corpus = fixtures::system_tier_example();
        let (snap, _) = refresh(&mut corpus, &RefreshConfig::default()).unwrap();
        for (p, terms) in snap.system.map.partitions() {
            let sketch = &snap.sketches.system[&p];
            for (t, e) in terms {
                for s in &e.sources {
                    assert!(sketch.contains(t, s));
                }
            }
        }
    }
}
