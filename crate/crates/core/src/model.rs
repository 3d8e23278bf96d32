//! The simulated world: WebIDs, access-controlled resources, pods, servers
//! and the corpus that owns them.
//!
//! A [`Corpus`] is a single-writer value. Every mutation goes through
//! [`Corpus::mutate`], which bumps the event counter, marks the owning pod
//! dirty and appends to the mutation log. Indexes and metadata are never
//! touched here; they are rebuilt by [`crate::index::reindex`] and
//! [`crate::metadata::refresh`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Bound::{Excluded, Included, Unbounded};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{MetadataProfile, PodIndexSet};
use crate::metadata::ServerMetadata;

/// Identifier of a search party. Compared by exact string equality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WebId(String);

impl WebId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for WebId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for WebId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// A WebID-owned slice of metadata, or the shared slice covering public
/// resources that every search party may read.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    WebId(WebId),
    Public,
}

/// Reserved key naming the public partition in serialized maps.
pub const PUBLIC_PARTITION: &str = "@public";

impl Partition {
    pub fn readable_by(&self, requester: &WebId) -> bool {
        match self {
            Partition::Public => true,
            Partition::WebId(owner) => owner == requester,
        }
    }

    pub fn key(&self) -> &str {
        match self {
            Partition::Public => PUBLIC_PARTITION,
            Partition::WebId(w) => w.as_str(),
        }
    }

    pub fn from_key(key: &str) -> Self {
        if key == PUBLIC_PARTITION {
            Partition::Public
        } else {
            Partition::WebId(WebId::new(key))
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessControlList {
    pub readers: BTreeSet<WebId>,
    pub public: bool,
}

impl AccessControlList {
    /// Owner-only: nobody but the pod owner's tooling can read it.
    pub fn private() -> Self {
        Self::default()
    }

    pub fn public() -> Self {
        Self {
            readers: BTreeSet::new(),
            public: true,
        }
    }

    pub fn readers<I, W>(readers: I) -> Self
    where
        I: IntoIterator<Item = W>,
        W: Into<WebId>,
    {
        Self {
            readers: readers.into_iter().map(Into::into).collect(),
            public: false,
        }
    }

    pub fn can_read(&self, webid: &WebId) -> bool {
        self.public || self.readers.contains(webid)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Resource {
    pub url: String,
    pub text: String,
    pub acl: AccessControlList,
}

impl Resource {
    pub fn new(url: impl Into<String>, text: impl Into<String>, acl: AccessControlList) -> Self {
        Self {
            url: url.into(),
            text: text.into(),
            acl,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Pod {
    pub url: String,
    pub owner: WebId,
    pub resources: BTreeMap<String, Resource>,
    pub indexing_enabled: bool,
    pub registered_for_search: bool,
    /// Event counter of the last mutation touching this pod.
    pub revision: u64,
    pub dirty: bool,
    /// The index files the indexing app keeps inside the pod.
    pub index: Option<PodIndexSet>,
}

impl Pod {
    pub fn new(url: impl Into<String>, owner: impl Into<WebId>) -> Self {
        Self {
            url: url.into(),
            owner: owner.into(),
            resources: BTreeMap::new(),
            indexing_enabled: true,
            registered_for_search: true,
            revision: 0,
            dirty: true,
            index: None,
        }
    }

    pub fn with_flags(mut self, indexing_enabled: bool, registered_for_search: bool) -> Self {
        self.indexing_enabled = indexing_enabled;
        self.registered_for_search = registered_for_search;
        self
    }

    /// Insert a resource while building a pod. Does not log a mutation.
    pub fn insert_resource(&mut self, resource: Resource) -> Result<()> {
        if !resource.url.starts_with(&self.url) || resource.url == self.url {
            return Err(Error::InvalidCorpus(format!(
                "resource {} is not inside pod {}",
                resource.url, self.url
            )));
        }
        if self.resources.contains_key(&resource.url) {
            return Err(Error::DuplicateUrl(resource.url));
        }
        self.resources.insert(resource.url.clone(), resource);
        Ok(())
    }

    /// Whether this pod can contribute results to search at all.
    pub fn discoverable(&self) -> bool {
        self.indexing_enabled && self.registered_for_search
    }
}

/// The per-server container reserved for search metadata.
///
/// Profiles are deposited by the indexing app; they become readable by the
/// search app only once the owning pod is registered for search.
#[derive(Clone, Debug, Default)]
pub struct EspressoPod {
    pub profiles: BTreeMap<String, MetadataProfile>,
    pub server_metadata: Option<ServerMetadata>,
    /// Set when a profile or registration changed since the last aggregation.
    pub metadata_stale: bool,
}

#[derive(Clone, Debug)]
pub struct Server {
    pub id: String,
    pub pods: BTreeMap<String, Pod>,
    pub espresso_pod: EspressoPod,
}

impl Server {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            pods: BTreeMap::new(),
            espresso_pod: EspressoPod::default(),
        }
    }

    /// Location of the server-level metadata inside the espresso pod.
    pub fn metadata_location(&self) -> String {
        metadata_location(&self.id)
    }

    /// The profile for `pod_url` as seen by the search app identity.
    pub fn readable_profile(&self, pod_url: &str) -> Option<&MetadataProfile> {
        let pod = self.pods.get(pod_url)?;
        if !pod.registered_for_search {
            return None;
        }
        self.espresso_pod.profiles.get(pod_url)
    }
}

pub fn metadata_location(server_id: &str) -> String {
    format!("espresso://{server_id}/server-metadata")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    AddResource,
    DeleteResource,
    GrantRead,
    RevokeRead,
    SetPublic,
    RegisterPod,
    SetIndexing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub kind: MutationKind,
    pub target: String,
    pub at: u64,
}

#[derive(Clone, Debug)]
pub enum Mutation {
    AddResource { pod_url: String, resource: Resource },
    DeleteResource { url: String },
    GrantRead { url: String, webid: WebId },
    RevokeRead { url: String, webid: WebId },
    SetPublic { url: String, public: bool },
}

impl Mutation {
    fn kind(&self) -> MutationKind {
        match self {
            Mutation::AddResource { .. } => MutationKind::AddResource,
            Mutation::DeleteResource { .. } => MutationKind::DeleteResource,
            Mutation::GrantRead { .. } => MutationKind::GrantRead,
            Mutation::RevokeRead { .. } => MutationKind::RevokeRead,
            Mutation::SetPublic { .. } => MutationKind::SetPublic,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub servers: BTreeMap<String, Server>,
    pub webids: BTreeSet<WebId>,
    pub mutation_log: Vec<MutationRecord>,
    clock: u64,
    /// pod url -> server id
    pod_server: BTreeMap<String, String>,
}

/// Resources of one pod (or of the whole corpus) readable by one WebID.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityScope {
    pub webid: WebId,
    pub resources: BTreeSet<String>,
}

impl VisibilityScope {
    pub fn contains(&self, url: &str) -> bool {
        self.resources.contains(url)
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }
}

pub fn visibility_scope(pod: &Pod, webid: &WebId) -> VisibilityScope {
    VisibilityScope {
        webid: webid.clone(),
        resources: pod
            .resources
            .values()
            .filter(|r| r.acl.can_read(webid))
            .map(|r| r.url.clone())
            .collect(),
    }
}

pub fn global_visibility(corpus: &Corpus, webid: &WebId) -> VisibilityScope {
    let resources = corpus
        .pods()
        .flat_map(|pod| visibility_scope(pod, webid).resources)
        .collect();
    VisibilityScope {
        webid: webid.clone(),
        resources,
    }
}

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current value of the event counter.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn add_webid(&mut self, webid: impl Into<WebId>) {
        self.webids.insert(webid.into());
    }

    pub fn add_server(&mut self, id: impl Into<String>) -> Result<&mut Server> {
        let id = id.into();
        if self.servers.contains_key(&id) {
            return Err(Error::DuplicateUrl(id));
        }
        Ok(self.servers.entry(id.clone()).or_insert_with(|| Server::new(id)))
    }

    /// Attach a fully built pod to a server. Pod urls must not nest.
    pub fn add_pod(&mut self, server_id: &str, pod: Pod) -> Result<()> {
        if self.pod_server.contains_key(&pod.url) {
            return Err(Error::DuplicateUrl(pod.url));
        }
        // Existing pods never nest, so only the sorted neighbours can clash.
        let before = self
            .pod_server
            .range::<str, _>((Unbounded, Excluded(pod.url.as_str())))
            .next_back();
        let after = self
            .pod_server
            .range::<str, _>((Included(pod.url.as_str()), Unbounded))
            .next();
        if let Some((other, _)) = before
            .filter(|(u, _)| pod.url.starts_with(u.as_str()))
            .or(after.filter(|(u, _)| u.starts_with(&pod.url)))
        {
            return Err(Error::InvalidCorpus(format!(
                "pod {} nests with pod {other}",
                pod.url
            )));
        }
        let server = self
            .servers
            .get_mut(server_id)
            .ok_or_else(|| Error::UnknownTarget(server_id.to_string()))?;
        self.webids.insert(pod.owner.clone());
        for r in pod.resources.values() {
            self.webids.extend(r.acl.readers.iter().cloned());
        }
        self.pod_server.insert(pod.url.clone(), server_id.to_string());
        server.pods.insert(pod.url.clone(), pod);
        Ok(())
    }

    pub fn pods(&self) -> impl Iterator<Item = &Pod> {
        self.servers.values().flat_map(|s| s.pods.values())
    }

    pub fn pod_count(&self) -> usize {
        self.pod_server.len()
    }

    pub fn resource_count(&self) -> usize {
        self.pods().map(|p| p.resources.len()).sum()
    }

    pub fn server_of(&self, pod_url: &str) -> Option<&str> {
        self.pod_server.get(pod_url).map(String::as_str)
    }

    pub fn pod(&self, pod_url: &str) -> Option<&Pod> {
        let server = self.pod_server.get(pod_url)?;
        self.servers.get(server)?.pods.get(pod_url)
    }

    pub fn pod_mut(&mut self, pod_url: &str) -> Option<&mut Pod> {
        let server = self.pod_server.get(pod_url)?;
        self.servers.get_mut(server)?.pods.get_mut(pod_url)
    }

    /// Url of the pod that contains (or would contain) `resource_url`.
    pub fn pod_of(&self, resource_url: &str) -> Option<&str> {
        let (pod_url, _) = self
            .pod_server
            .range::<str, _>((Unbounded, Included(resource_url)))
            .next_back()?;
        resource_url
            .starts_with(pod_url.as_str())
            .then_some(pod_url.as_str())
    }

    pub fn resource(&self, url: &str) -> Option<&Resource> {
        self.pod(self.pod_of(url)?)?.resources.get(url)
    }

    /// Log an event. Content and ACL events bump the pod revision and mark
    /// it dirty; registration events only invalidate server metadata.
    fn tick(&mut self, kind: MutationKind, target: &str, pod_url: &str, content: bool) {
        self.clock += 1;
        let at = self.clock;
        self.mutation_log.push(MutationRecord {
            kind,
            target: target.to_string(),
            at,
        });
        if content {
            if let Some(pod) = self.pod_mut(pod_url) {
                pod.revision = at;
                pod.dirty = true;
            }
        }
        if let Some(server) = self.pod_server.get(pod_url).cloned() {
            if let Some(s) = self.servers.get_mut(&server) {
                s.espresso_pod.metadata_stale = true;
            }
        }
    }

    /// Apply one mutation. Returns the url of the pod now marked dirty.
    pub fn mutate(&mut self, event: Mutation) -> Result<String> {
        let kind = event.kind();
        let (pod_url, target) = match event {
            Mutation::AddResource { pod_url, resource } => {
                if self.resource(&resource.url).is_some() {
                    return Err(Error::DuplicateUrl(resource.url));
                }
                let owner = self.pod_of(&resource.url).map(str::to_string);
                if owner.as_deref() != Some(pod_url.as_str()) {
                    return Err(Error::UnknownTarget(pod_url));
                }
                let readers: Vec<WebId> = resource.acl.readers.iter().cloned().collect();
                let target = resource.url.clone();
                self.pod_mut(&pod_url)
                    .ok_or_else(|| Error::UnknownTarget(pod_url.clone()))?
                    .insert_resource(resource)?;
                self.webids.extend(readers);
                (pod_url, target)
            }
            Mutation::DeleteResource { url } => {
                let pod_url = self.owning_pod(&url)?;
                self.pod_mut(&pod_url)
                    .and_then(|p| p.resources.remove(&url))
                    .ok_or_else(|| Error::UnknownTarget(url.clone()))?;
                (pod_url, url)
            }
            Mutation::GrantRead { url, webid } => {
                let pod_url = self.owning_pod(&url)?;
                self.resource_mut(&pod_url, &url)?
                    .acl
                    .readers
                    .insert(webid.clone());
                self.webids.insert(webid);
                (pod_url, url)
            }
            Mutation::RevokeRead { url, webid } => {
                let pod_url = self.owning_pod(&url)?;
                self.resource_mut(&pod_url, &url)?.acl.readers.remove(&webid);
                (pod_url, url)
            }
            Mutation::SetPublic { url, public } => {
                let pod_url = self.owning_pod(&url)?;
                self.resource_mut(&pod_url, &url)?.acl.public = public;
                (pod_url, url)
            }
        };
        self.tick(kind, &target, &pod_url, true);
        Ok(pod_url)
    }

    /// Pod owner registers (or withdraws) the pod for search, granting the
    /// search app read access to its metadata profile.
    pub fn set_registered(&mut self, pod_url: &str, registered: bool) -> Result<()> {
        let pod = self
            .pod_mut(pod_url)
            .ok_or_else(|| Error::UnknownTarget(pod_url.to_string()))?;
        pod.registered_for_search = registered;
        self.tick(MutationKind::RegisterPod, pod_url, pod_url, false);
        Ok(())
    }

    pub fn set_indexing(&mut self, pod_url: &str, enabled: bool) -> Result<()> {
        let pod = self
            .pod_mut(pod_url)
            .ok_or_else(|| Error::UnknownTarget(pod_url.to_string()))?;
        pod.indexing_enabled = enabled;
        self.tick(MutationKind::SetIndexing, pod_url, pod_url, true);
        Ok(())
    }

    fn owning_pod(&self, url: &str) -> Result<String> {
        match self.pod_of(url) {
            Some(p) if self.resource(url).is_some() => Ok(p.to_string()),
            _ => Err(Error::UnknownTarget(url.to_string())),
        }
    }

    fn resource_mut(&mut self, pod_url: &str, url: &str) -> Result<&mut Resource> {
        self.pod_mut(pod_url)
            .and_then(|p| p.resources.get_mut(url))
            .ok_or_else(|| Error::UnknownTarget(url.to_string()))
    }

    pub fn dirty_pods(&self) -> Vec<String> {
        self.pods()
            .filter(|p| p.dirty)
            .map(|p| p.url.clone())
            .collect()
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: CorpusFile = serde_json::from_str(json)?;
        file.into_corpus()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CorpusFile::from_corpus(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Content hash of the serialized corpus, as 16 hex digits.
    pub fn digest(&self) -> Result<String> {
        Ok(format!("{:016x}", xxhash_rust::xxh3::xxh3_64(self.to_json()?.as_bytes())))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusFile {
    servers: Vec<ServerFile>,
    webids: Vec<WebId>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerFile {
    id: String,
    pods: Vec<PodFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PodFile {
    url: String,
    owner: WebId,
    indexing_enabled: bool,
    registered: bool,
    resources: Vec<ResourceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResourceFile {
    url: String,
    text: String,
    readers: Vec<WebId>,
    public: bool,
}

impl CorpusFile {
    fn from_corpus(corpus: &Corpus) -> Self {
        Self {
            servers: corpus
                .servers
                .values()
                .map(|s| ServerFile {
                    id: s.id.clone(),
                    pods: s
                        .pods
                        .values()
                        .map(|p| PodFile {
                            url: p.url.clone(),
                            owner: p.owner.clone(),
                            indexing_enabled: p.indexing_enabled,
                            registered: p.registered_for_search,
                            resources: p
                                .resources
                                .values()
                                .map(|r| ResourceFile {
                                    url: r.url.clone(),
                                    text: r.text.clone(),
                                    readers: r.acl.readers.iter().cloned().collect(),
                                    public: r.acl.public,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            webids: corpus.webids.iter().cloned().collect(),
        }
    }

    fn into_corpus(self) -> Result<Corpus> {
        let mut corpus = Corpus::new();
        for w in self.webids {
            if !corpus.webids.insert(w.clone()) {
                return Err(Error::InvalidCorpus(format!("duplicate webid {w}")));
            }
        }
        for s in self.servers {
            corpus.add_server(s.id.clone())?;
            for p in s.pods {
                let mut pod = Pod::new(p.url, p.owner).with_flags(p.indexing_enabled, p.registered);
                for r in p.resources {
                    let acl = AccessControlList {
                        readers: r.readers.into_iter().collect(),
                        public: r.public,
                    };
                    pod.insert_resource(Resource::new(r.url, r.text, acl))?;
                }
                corpus.add_pod(&s.id, pod)?;
            }
        }
        Ok(corpus)
    }
}
