//! A whole deployment: corpus, overlay and the current metadata snapshot,
//! with the orchestration that keeps them in step.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::index::{self, build_metadata_profile, PodIndexSet};
use crate::metadata::{
    refresh, MetadataDump, MetadataSnapshot, RefreshConfig, RefreshReport, ServerMetadata,
    SketchStore, SketchStoreFile, SystemMetadata,
};
use crate::model::{metadata_location, Corpus};
use crate::overlay::{NodeDump, OverlayNetwork};
use crate::search::{search, Query, SearchContext, SearchOutcome};

pub const CORPUS_FILE: &str = "corpus.json";
pub const SYSTEM_METADATA_FILE: &str = "metadata/system.json";
pub const SKETCH_FILE: &str = "sketches.json";
pub const OVERLAY_FILE: &str = "overlay.json";

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    while out.contains("__") {
        out = out.replace("__", "_");
    }
    out.trim_matches('_').to_string()
}

/// Relative path of a pod's index file. The digest suffix keeps distinct
/// URLs apart even when their slugs collide.
pub fn index_file(server_id: &str, pod_url: &str) -> String {
    format!(
        "indexes/{}/{}-{:08x}.json",
        slug(server_id),
        slug(pod_url),
        xxhash_rust::xxh3::xxh3_64(pod_url.as_bytes()) as u32
    )
}

pub fn server_metadata_file(server_id: &str) -> String {
    format!(
        "metadata/servers/{}-{:08x}.json",
        slug(server_id),
        xxhash_rust::xxh3::xxh3_64(server_id.as_bytes()) as u32
    )
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub corpus: Corpus,
    pub overlay: OverlayNetwork,
    pub metadata: Option<MetadataSnapshot>,
    pub config: RefreshConfig,
}

impl Simulation {
    pub fn new(corpus: Corpus, overlay_nodes: usize, config: RefreshConfig) -> Self {
        Self {
            corpus,
            overlay: OverlayNetwork::new(overlay_nodes),
            metadata: None,
            config,
        }
    }

    /// Build a simulation and bring everything up to date.
    pub fn ready(corpus: Corpus, overlay_nodes: usize, config: RefreshConfig) -> Result<Self> {
        let mut sim = Self::new(corpus, overlay_nodes, config);
        sim.refresh()?;
        Ok(sim)
    }

    /// Register every server's metadata location in the overlay.
    pub fn register_servers(&mut self) {
        for id in self.corpus.servers.keys() {
            self.overlay.register_server(id, &metadata_location(id));
        }
    }

    /// Reindex, re-aggregate, rebuild sketches and republish logical tables.
    pub fn refresh(&mut self) -> Result<RefreshReport> {
        let (snapshot, report) = refresh(&mut self.corpus, &self.config)?;
        self.register_servers();
        self.overlay.publish(&snapshot);
        self.metadata = Some(snapshot);
        Ok(report)
    }

    pub fn snapshot(&self) -> Result<&MetadataSnapshot> {
        self.metadata
            .as_ref()
            .ok_or_else(|| Error::StaleMetadata("metadata has never been refreshed".into()))
    }

    pub fn context(&self) -> Result<SearchContext<'_>> {
        let mut ctx = SearchContext::new(&self.corpus, self.snapshot()?, &self.overlay);
        ctx.exec = self.config.exec;
        Ok(ctx)
    }

    pub fn search(&self, query: &Query) -> Result<SearchOutcome> {
        search(&self.context()?, query)
    }

    /// Every persisted artifact keyed by relative path: the corpus, each
    /// pod's index file, and, once refreshed, both metadata tiers, the
    /// sketches and the overlay tables.
    pub fn artifacts(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        out.insert(CORPUS_FILE.to_string(), self.corpus.to_json()?);
        for (server_id, server) in &self.corpus.servers {
            for pod in server.pods.values() {
                if let Some(set) = &pod.index {
                    out.insert(index_file(server_id, &pod.url), set.to_json()?);
                }
            }
        }
        out.insert(OVERLAY_FILE.to_string(), pretty(&self.overlay.to_dump())?);
        if let Some(snap) = &self.metadata {
            out.insert(SYSTEM_METADATA_FILE.to_string(), pretty(&snap.system.to_dump())?);
            for (id, meta) in &snap.servers {
                out.insert(server_metadata_file(id), pretty(&meta.to_dump())?);
            }
            out.insert(SKETCH_FILE.to_string(), pretty(&snap.sketches.to_file())?);
        }
        Ok(out)
    }

    /// Rebuild a simulation from artifacts. `read` returns a file's contents
    /// by relative path, or `None` when it does not exist. Index files are
    /// installed only when they match the pod's current revision; metadata
    /// is loaded only when the system tier file exists.
    pub fn restore<F>(overlay_nodes: usize, config: RefreshConfig, read: F) -> Result<Self>
    where
        F: Fn(&str) -> Result<Option<String>>,
    {
        let corpus_json = read(CORPUS_FILE)?
            .ok_or_else(|| Error::InvalidCorpus(format!("{CORPUS_FILE} not found")))?;
        let mut corpus = Corpus::from_json(&corpus_json)?;
        let pods: Vec<(String, String)> = corpus
            .servers
            .iter()
            .flat_map(|(s, srv)| srv.pods.keys().map(move |p| (s.clone(), p.clone())))
            .collect();
        for (server_id, pod_url) in pods {
            let Some(json) = read(&index_file(&server_id, &pod_url))? else {
                continue;
            };
            let set = PodIndexSet::from_json(&json)?;
            let pod = corpus.pod(&pod_url).expect("listed pod");
            if set.pod_url != pod_url || !pod.indexing_enabled {
                continue;
            }
            if let Ok(profile) = build_metadata_profile(pod, &set) {
                index::install(&mut corpus, set, profile);
            }
        }
        let overlay = match read(OVERLAY_FILE)? {
            Some(json) => OverlayNetwork::from_dump(&serde_json::from_str::<Vec<NodeDump>>(&json)?),
            None => OverlayNetwork::new(overlay_nodes),
        };
        let metadata = match read(SYSTEM_METADATA_FILE)? {
            None => None,
            Some(json) => {
                let system = SystemMetadata::from_dump(serde_json::from_str::<MetadataDump>(&json)?)?;
                let mut servers = BTreeMap::new();
                for id in corpus.servers.keys() {
                    let json = read(&server_metadata_file(id))?.ok_or_else(|| {
                        Error::StaleMetadata(format!("no server metadata for {id}"))
                    })?;
                    let meta = ServerMetadata::from_dump(id, serde_json::from_str(&json)?)?;
                    servers.insert(id.clone(), meta);
                }
                let sketches = match read(SKETCH_FILE)? {
                    Some(json) => SketchStore::from_file(&serde_json::from_str::<SketchStoreFile>(&json)?)?,
                    None => return Err(Error::StaleMetadata(format!("{SKETCH_FILE} not found"))),
                };
                for (id, meta) in &servers {
                    let espresso = &mut corpus.servers.get_mut(id).expect("listed server").espresso_pod;
                    espresso.server_metadata = Some(meta.clone());
                    espresso.metadata_stale = false;
                }
                Some(MetadataSnapshot {
                    as_of: system.as_of,
                    servers,
                    system,
                    sketches,
                })
            }
        };
        Ok(Self {
            corpus,
            overlay,
            metadata,
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_corpus, WorkbenchConfig};

    #[test]
    fn artifacts_round_trip() {
        let corpus = generate_corpus(&WorkbenchConfig::default()).unwrap();
        let sim = Simulation::ready(corpus, 3, RefreshConfig::default()).unwrap();
        let files = sim.artifacts().unwrap();
        let back = Simulation::restore(3, RefreshConfig::default(), |p| Ok(files.get(p).cloned())).unwrap();
        assert_eq!(back.artifacts().unwrap(), files);
        let q = Query::new(crate::gen::webid_name(1), ["patient"]).unwrap();
        assert_eq!(back.search(&q).unwrap(), sim.search(&q).unwrap());
    }

    #[test]
    fn restore_without_metadata_refuses_search() {
        let corpus = crate::fixtures::scope_isolation_example();
        let files: BTreeMap<String, String> = [(CORPUS_FILE.to_string(), corpus.to_json().unwrap())].into();
        let sim = Simulation::restore(1, RefreshConfig::default(), |p| Ok(files.get(p).cloned())).unwrap();
        let q = Query::new("U_A".into(), ["diabetes"]).unwrap();
        assert!(matches!(sim.search(&q), Err(Error::StaleMetadata(_))));
    }

    #[test]
    fn index_paths_are_distinct() {
        assert_ne!(index_file("s", "https://a.example/x/"), index_file("s", "https://a.example/x_/"));
    }
}
