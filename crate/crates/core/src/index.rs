//! Per-pod inverted indexes scoped to WebIDs, the public index, and the
//! metadata profile the indexing app deposits in the server's espresso pod.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{tokenize, Corpus, Pod, WebId};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Posting {
    pub url: String,
    pub tf: u32,
}

/// term -> (resource url -> tf). Posting lists are never empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BTreeMap<String, Vec<Posting>>", into = "BTreeMap<String, Vec<Posting>>")]
pub struct InvertedIndex {
    entries: BTreeMap<String, BTreeMap<String, u32>>,
}

impl InvertedIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_document(&mut self, url: &str, text: &str) {
        for term in tokenize(text) {
            *self
                .entries
                .entry(term)
                .or_default()
                .entry(url.to_string())
                .or_insert(0) += 1;
        }
    }

    /// Raw insertion. Only the fault injector and tests should need this.
    pub fn insert_posting(&mut self, term: &str, posting: Posting) {
        if posting.tf == 0 {
            return;
        }
        self.entries
            .entry(term.to_string())
            .or_default()
            .insert(posting.url, posting.tf);
    }

    pub fn postings(&self, term: &str) -> impl Iterator<Item = Posting> + '_ {
        self.entries
            .get(term)
            .into_iter()
            .flat_map(|p| p.iter().map(|(url, &tf)| Posting { url: url.clone(), tf }))
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.entries.contains_key(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// (term, url, tf) triples in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.entries.iter().flat_map(|(t, p)| {
            p.iter()
                .map(move |(url, &tf)| (t.as_str(), url.as_str(), tf))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.entries.len()
    }

    /// (tf total, matching resources) for one term.
    pub fn term_stats(&self, term: &str) -> Option<TermStats> {
        let postings = self.entries.get(term)?;
        Some(TermStats {
            tf_total: postings.values().map(|&tf| tf as u64).sum(),
            resources: postings.len() as u64,
        })
    }
}

impl From<BTreeMap<String, Vec<Posting>>> for InvertedIndex {
    fn from(map: BTreeMap<String, Vec<Posting>>) -> Self {
        let mut index = Self::new();
        for (term, postings) in map {
            for p in postings {
                index.insert_posting(&term, p);
            }
        }
        index
    }
}

impl From<InvertedIndex> for BTreeMap<String, Vec<Posting>> {
    fn from(index: InvertedIndex) -> Self {
        index
            .entries
            .into_iter()
            .map(|(t, p)| (t, p.into_iter().map(|(url, tf)| Posting { url, tf }).collect()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodIndexSet {
    pub pod_url: String,
    pub built_at: u64,
    #[serde(rename = "public")]
    pub public_index: InvertedIndex,
    pub scoped: BTreeMap<WebId, InvertedIndex>,
}

impl PodIndexSet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn scoped_index(&self, webid: &WebId) -> Option<&InvertedIndex> {
        self.scoped.get(webid)
    }
}

pub fn build_pod_index_set(pod: &Pod) -> Result<PodIndexSet> {
    if !pod.indexing_enabled {
        return Err(Error::IndexingNotAuthorized(pod.url.clone()));
    }
    let mut public_index = InvertedIndex::new();
    let mut scoped: BTreeMap<WebId, InvertedIndex> = BTreeMap::new();
    for r in pod.resources.values() {
        if r.acl.public {
            public_index.add_document(&r.url, &r.text);
            continue;
        }
        for reader in &r.acl.readers {
            scoped
                .entry(reader.clone())
                .or_default()
                .add_document(&r.url, &r.text);
        }
    }
    scoped.retain(|_, idx| !idx.is_empty());
    Ok(PodIndexSet {
        pod_url: pod.url.clone(),
        built_at: pod.revision,
        public_index,
        scoped,
    })
}

/// Postings `webid` may see for `term`: its own index file plus the public one.
pub fn lookup_postings(index_set: &PodIndexSet, webid: &WebId, term: &str) -> Vec<Posting> {
    let mut out: Vec<Posting> = index_set
        .scoped
        .get(webid)
        .into_iter()
        .flat_map(|idx| idx.postings(term))
        .chain(index_set.public_index.postings(term))
        .collect();
    out.sort();
    out.dedup_by(|a, b| a.url == b.url);
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermStats {
    pub tf_total: u64,
    pub resources: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataProfile {
    pub pod_url: String,
    pub per_webid: BTreeMap<WebId, BTreeMap<String, TermStats>>,
    pub public_terms: BTreeMap<String, TermStats>,
    pub built_at: u64,
}

fn summarize(index: &InvertedIndex) -> BTreeMap<String, TermStats> {
    index
        .terms()
        .filter_map(|t| index.term_stats(t).map(|s| (t.to_string(), s)))
        .collect()
}

pub fn build_metadata_profile(pod: &Pod, index_set: &PodIndexSet) -> Result<MetadataProfile> {
    if index_set.pod_url != pod.url {
        return Err(Error::UnknownTarget(index_set.pod_url.clone()));
    }
    if index_set.built_at != pod.revision {
        return Err(Error::StaleIndex {
            pod: pod.url.clone(),
            built_at: index_set.built_at,
            revision: pod.revision,
        });
    }
    Ok(MetadataProfile {
        pod_url: pod.url.clone(),
        per_webid: index_set
            .scoped
            .iter()
            .map(|(w, idx)| (w.clone(), summarize(idx)))
            .collect(),
        public_terms: summarize(&index_set.public_index),
        built_at: index_set.built_at,
    })
}

/// Store a freshly built index in its pod and deposit the profile in the
/// hosting server's espresso pod. Clears the dirty marker.
pub(crate) fn install(corpus: &mut Corpus, index_set: PodIndexSet, profile: MetadataProfile) {
    let pod_url = index_set.pod_url.clone();
    if let Some(server_id) = corpus.server_of(&pod_url).map(str::to_string) {
        let server = corpus.servers.get_mut(&server_id).expect("pod's server exists");
        server.espresso_pod.profiles.insert(pod_url.clone(), profile);
        server.espresso_pod.metadata_stale = true;
        let pod = server.pods.get_mut(&pod_url).expect("pod exists");
        pod.index = Some(index_set);
        pod.dirty = false;
    }
}

/// Remove any index and profile of a pod whose owner has not authorized
/// indexing, so it stays undiscoverable.
pub(crate) fn withdraw(corpus: &mut Corpus, pod_url: &str) {
    if let Some(server_id) = corpus.server_of(pod_url).map(str::to_string) {
        let server = corpus.servers.get_mut(&server_id).expect("pod's server exists");
        if server.espresso_pod.profiles.remove(pod_url).is_some() {
            server.espresso_pod.metadata_stale = true;
        }
        if let Some(pod) = server.pods.get_mut(pod_url) {
            pod.index = None;
            pod.dirty = false;
        }
    }
}

/// Rebuild one pod's indexes and profile from scratch.
pub fn reindex(corpus: &mut Corpus, pod_url: &str) -> Result<(PodIndexSet, MetadataProfile)> {
    let pod = corpus
        .pod(pod_url)
        .ok_or_else(|| Error::UnknownTarget(pod_url.to_string()))?;
    let built = build_pod_index_set(pod).and_then(|set| {
        let profile = build_metadata_profile(pod, &set)?;
        Ok((set, profile))
    });
    match built {
        Ok((set, profile)) => {
            install(corpus, set.clone(), profile.clone());
            Ok((set, profile))
        }
        Err(e) => {
            withdraw(corpus, pod_url);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccessControlList, Mutation, Resource};

    fn pg2_pod() -> Pod {
        let mut pod = Pod::new("https://s/p/", "owner");
        for (name, text, readers) in [
            ("r1", "genetic therapy", vec!["U1"]),
            ("r2", "cancer", vec!["U2"]),
            ("r3", "diabetes diet", vec!["U2"]),
        ] {
            pod.insert_resource(Resource::new(
                format!("https://s/p/{name}"),
                text,
                AccessControlList::readers(readers),
            ))
            .unwrap();
        }
        pod
    }

    fn terms(idx: &InvertedIndex) -> Vec<&str> {
        idx.terms().collect()
    }

    #[test]
    fn scoped_indexes_partition_terms() {
        let set = build_pod_index_set(&pg2_pod()).unwrap();
        assert_eq!(terms(&set.scoped[&"U1".into()]), ["genetic", "therapy"]);
        assert_eq!(terms(&set.scoped[&"U2".into()]), ["cancer", "diabetes", "diet"]);
        assert!(set.public_index.is_empty());
    }

    #[test]
    fn empty_pod_builds_empty_indexes() {
        let set = build_pod_index_set(&Pod::new("https://s/e/", "o")).unwrap();
        assert!(set.public_index.is_empty() && set.scoped.is_empty());
        let profile = build_metadata_profile(&Pod::new("https://s/e/", "o"), &set).unwrap();
        assert!(profile.per_webid.is_empty() && profile.public_terms.is_empty());
    }

    #[test]
    fn public_resource_only_in_public_index() {
        let mut pod = Pod::new("https://s/q/", "o");
        pod.insert_resource(Resource::new(
            "https://s/q/doc",
            "cancer cancer",
            AccessControlList {
                readers: ["U1".into()].into(),
                public: true,
            },
        ))
        .unwrap();
        let set = build_pod_index_set(&pod).unwrap();
        assert_eq!(
            set.public_index.postings("cancer").collect::<Vec<_>>(),
            [Posting { url: "https://s/q/doc".into(), tf: 2 }]
        );
        assert!(set.scoped.is_empty());
        let hits = lookup_postings(&set, &"stranger".into(), "cancer");
        assert_eq!(hits.len(), 1);
    }

    #[test]
    fn unauthorized_pod_is_not_indexed() {
        let pod = pg2_pod().with_flags(false, true);
        assert!(matches!(
            build_pod_index_set(&pod),
            Err(Error::IndexingNotAuthorized(_))
        ));
    }

    #[test]
    fn lookup_never_crosses_scopes() {
        let set = build_pod_index_set(&pg2_pod()).unwrap();
        assert!(lookup_postings(&set, &"U1".into(), "cancer").is_empty());
        assert_eq!(
            lookup_postings(&set, &"U2".into(), "diabetes"),
            [Posting { url: "https://s/p/r3".into(), tf: 1 }]
        );
    }

    #[test]
    fn profile_aggregates_index() {
        let pod = pg2_pod();
        let set = build_pod_index_set(&pod).unwrap();
        let profile = build_metadata_profile(&pod, &set).unwrap();
        assert_eq!(
            profile.per_webid[&"U2".into()]["diabetes"],
            TermStats { tf_total: 1, resources: 1 }
        );
        assert!(!profile.per_webid[&"U1".into()].contains_key("cancer"));
    }

    #[test]
    fn stale_index_rejected() {
        let mut pod = pg2_pod();
        let set = build_pod_index_set(&pod).unwrap();
        pod.revision = 7;
        assert!(matches!(
            build_metadata_profile(&pod, &set),
            Err(Error::StaleIndex { built_at: 0, revision: 7, .. })
        ));
    }

    fn corpus() -> Corpus {
        let mut pod = pg2_pod();
        pod.insert_resource(Resource::new(
            "https://s/p/r4",
            "diabetes",
            AccessControlList::readers(["U3"]),
        ))
        .unwrap();
        let mut c = Corpus::new();
        c.add_server("s").unwrap();
        c.add_pod("s", pod).unwrap();
        c
    }

    #[test]
    fn reindex_after_revoke_drops_terms() {
        let mut c = corpus();
        let (before, _) = reindex(&mut c, "https://s/p/").unwrap();
        assert!(before.scoped[&"U3".into()].contains_term("diabetes"));
        c.mutate(Mutation::RevokeRead {
            url: "https://s/p/r4".into(),
            webid: "U3".into(),
        })
        .unwrap();
        let (after, profile) = reindex(&mut c, "https://s/p/").unwrap();
        assert!(after.scoped_index(&"U3".into()).is_none());
        assert!(!profile.per_webid.contains_key(&WebId::from("U3")));
        assert!(!c.pod("https://s/p/").unwrap().dirty);
        assert!(c.servers["s"].espresso_pod.metadata_stale);
    }

    #[test]
    fn reindex_is_idempotent() {
        let mut c = corpus();
        let a = reindex(&mut c, "https://s/p/").unwrap();
        let b = reindex(&mut c, "https://s/p/").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.to_json().unwrap(), b.0.to_json().unwrap());
    }

    #[test]
    fn reindex_picks_up_new_public_doc() {
        let mut c = corpus();
        reindex(&mut c, "https://s/p/").unwrap();
        c.mutate(Mutation::AddResource {
            pod_url: "https://s/p/".into(),
            resource: Resource::new("https://s/p/news", "vaccine update", AccessControlList::public()),
        })
        .unwrap();
        let (set, _) = reindex(&mut c, "https://s/p/").unwrap();
        assert_eq!(terms(&set.public_index), ["update", "vaccine"]);
    }

    #[test]
    fn reindex_unauthorized_withdraws_profile() {
        let mut c = corpus();
        reindex(&mut c, "https://s/p/").unwrap();
        c.pod_mut("https://s/p/").unwrap().indexing_enabled = false;
        assert!(reindex(&mut c, "https://s/p/").is_err());
        assert!(c.pod("https://s/p/").unwrap().index.is_none());
        assert!(c.servers["s"].espresso_pod.profiles.is_empty());
    }

    #[test]
    fn index_json_sorted_and_round_trips() {
        let set = build_pod_index_set(&pg2_pod()).unwrap();
        let json = set.to_json().unwrap();
        assert!(json.contains("\"public\""));
        assert_eq!(PodIndexSet::from_json(&json).unwrap(), set);
    }

    #[test]
    fn profile_is_unreadable_until_registered() {
        let mut c = Corpus::new();
        c.add_server("s").unwrap();
        c.add_pod("s", pg2_pod().with_flags(true, false)).unwrap();
        reindex(&mut c, "https://s/p/").unwrap();
        let server = &c.servers["s"];
        assert!(server.espresso_pod.profiles.contains_key("https://s/p/"));
        assert!(server.readable_profile("https://s/p/").is_none());
        c.set_registered("https://s/p/", true).unwrap();
        assert!(c.servers["s"].readable_profile("https://s/p/").is_some());
    }
}
