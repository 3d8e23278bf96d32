//! Deliberate violations planted in a deployment so that a passing audit
//! is falsifiable.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{anonymous, known_webids};
use crate::index::Posting;
use crate::model::{tokenize, Partition, WebId};
use crate::search::{MetadataMode, Query, SearchFaults, Strategy};
use crate::sim::Simulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    /// A posting from a resource the WebID cannot read, in its scoped index.
    CrossScopePosting,
    /// A server-tier entry listing a pod the WebID gets no results from.
    InflatedMetadata,
    /// One WebID's server-tier partition merged into another's.
    SharedPartition,
    /// Query evaluation reads every index file in the pod.
    MergedIndexLookup,
    /// Pod selection also reads another WebID's partition.
    ForeignPartitionRead,
}

impl FaultKind {
    pub const ALL: [FaultKind; 5] = [
        FaultKind::CrossScopePosting,
        FaultKind::InflatedMetadata,
        FaultKind::SharedPartition,
        FaultKind::MergedIndexLookup,
        FaultKind::ForeignPartitionRead,
    ];
}

/// What an injection did to the deployment.
#[derive(Clone, Debug, Default)]
pub struct FaultPlan {
    pub applicable: bool,
    pub description: String,
    pub faults: SearchFaults,
    /// Queries that exercise the fault; appended to the PG1 workload.
    pub queries: Vec<Query>,
}

impl FaultPlan {
    fn skipped(reason: &str) -> Self {
        Self {
            description: reason.to_string(),
            ..Self::default()
        }
    }
}

fn webid_pool(sim: &Simulation) -> Vec<WebId> {
    known_webids(&sim.corpus).into_iter().collect()
}

/// Plant `kind` in `sim`. Targets are drawn from the candidates with a
/// seeded RNG; when the deployment offers no candidate the plan is marked
/// not applicable and `sim` is left untouched.
pub fn inject_fault(sim: &mut Simulation, kind: FaultKind, seed: u64) -> FaultPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ kind as u64);
    match kind {
        FaultKind::CrossScopePosting => cross_scope_posting(sim, &mut rng),
        FaultKind::InflatedMetadata => inflated_metadata(sim, &mut rng),
        FaultKind::SharedPartition => shared_partition(sim, &mut rng),
        FaultKind::MergedIndexLookup => merged_index_lookup(sim, &mut rng),
        FaultKind::ForeignPartitionRead => foreign_partition_read(sim, &mut rng),
    }
}

fn cross_scope_posting(sim: &mut Simulation, rng: &mut ChaCha8Rng) -> FaultPlan {
    let webids = webid_pool(sim);
    let mut candidates = Vec::new();
    for pod in sim.corpus.pods().filter(|p| p.index.is_some()) {
        for r in pod.resources.values() {
            let Some(term) = tokenize(&r.text).into_iter().next() else {
                continue;
            };
            for w in webids.iter().filter(|w| !r.acl.can_read(w)) {
                candidates.push((pod.url.clone(), r.url.clone(), term.clone(), w.clone()));
            }
        }
    }
    let Some((pod_url, url, term, webid)) = candidates.choose(rng).cloned() else {
        return FaultPlan::skipped("no resource hidden from any WebID");
    };
    let set = sim
        .corpus
        .pod_mut(&pod_url)
        .and_then(|p| p.index.as_mut())
        .expect("candidate pod is indexed");
    set.scoped
        .entry(webid.clone())
        .or_default()
        .insert_posting(&term, Posting { url: url.clone(), tf: 1 });
    FaultPlan {
        applicable: true,
        description: format!("posting ({term}, {url}) planted in the index of {webid}"),
        ..FaultPlan::default()
    }
}

fn inflated_metadata(sim: &mut Simulation, rng: &mut ChaCha8Rng) -> FaultPlan {
    let Some(snap) = sim.metadata.as_ref() else {
        return FaultPlan::skipped("metadata never refreshed");
    };
    let webids: Vec<WebId> = webid_pool(sim).into_iter().chain([anonymous()]).collect();
    let mut candidates = Vec::new();
    for (server_id, meta) in &snap.servers {
        let pods: Vec<&String> = sim.corpus.servers[server_id].pods.keys().collect();
        let terms: BTreeSet<&String> = meta.map.partitions().flat_map(|(_, m)| m.keys()).collect();
        for w in &webids {
            for t in &terms {
                let seen = meta.entry(w, t).sources;
                for p in pods.iter().filter(|p| !seen.contains(**p)) {
                    candidates.push((server_id.clone(), w.clone(), (*t).clone(), (*p).clone()));
                }
            }
        }
    }
    let Some((server_id, webid, term, pod)) = candidates.choose(rng).cloned() else {
        return FaultPlan::skipped("no server-tier cell can be inflated");
    };
    let meta = sim
        .metadata
        .as_mut()
        .and_then(|s| s.servers.get_mut(&server_id))
        .expect("candidate server has metadata");
    let e = meta
        .map
        .partition_mut(&Partition::WebId(webid.clone()))
        .entry(term.clone())
        .or_default();
    e.sources.insert(pod.clone());
    e.stats.source_count = e.sources.len() as u64;
    FaultPlan {
        applicable: true,
        description: format!("{server_id}: pod {pod} added to ({webid}, {term})"),
        ..FaultPlan::default()
    }
}

fn shared_partition(sim: &mut Simulation, rng: &mut ChaCha8Rng) -> FaultPlan {
    let Some(snap) = sim.metadata.as_ref() else {
        return FaultPlan::skipped("metadata never refreshed");
    };
    let webids = webid_pool(sim);
    let mut candidates = Vec::new();
    for (server_id, meta) in &snap.servers {
        for (donor, terms) in &meta.map.per_webid {
            for victim in webids.iter().filter(|w| *w != donor) {
                let leaks = terms
                    .iter()
                    .any(|(t, e)| !e.sources.is_subset(&meta.entry(victim, t).sources));
                if leaks {
                    candidates.push((server_id.clone(), donor.clone(), victim.clone()));
                }
            }
        }
    }
    let Some((server_id, donor, victim)) = candidates.choose(rng).cloned() else {
        return FaultPlan::skipped("no pair of WebIDs with distinguishable partitions");
    };
    let meta = sim
        .metadata
        .as_mut()
        .and_then(|s| s.servers.get_mut(&server_id))
        .expect("candidate server has metadata");
    let donated = meta.map.per_webid[&donor].clone();
    let target = meta.map.partition_mut(&Partition::WebId(victim.clone()));
    for (t, e) in donated {
        let mine = target.entry(t).or_default();
        mine.sources.extend(e.sources);
        mine.stats.source_count = mine.sources.len() as u64;
        mine.stats.tf_total += e.stats.tf_total;
        mine.stats.collection_size += e.stats.collection_size;
    }
    FaultPlan {
        applicable: true,
        description: format!("{server_id}: partition of {donor} shared into {victim}"),
        ..FaultPlan::default()
    }
}

fn merged_index_lookup(sim: &mut Simulation, rng: &mut ChaCha8Rng) -> FaultPlan {
    // Needs a pod the WebID is routed to for a term where another resource
    // with the same term is hidden from it.
    let webids = webid_pool(sim);
    let mut candidates = Vec::new();
    for pod in sim.corpus.pods().filter(|p| p.discoverable() && p.index.is_some()) {
        for w in &webids {
            let (mine, hidden): (Vec<_>, Vec<_>) =
                pod.resources.values().partition(|r| r.acl.can_read(w));
            let visible_terms: BTreeSet<String> = mine.iter().flat_map(|r| tokenize(&r.text)).collect();
            let hidden_scoped: BTreeSet<String> = hidden
                .iter()
                .filter(|r| !r.acl.readers.is_empty())
                .flat_map(|r| tokenize(&r.text))
                .collect();
            let shared: Vec<&String> = visible_terms.intersection(&hidden_scoped).collect();
            for t in shared {
                candidates.push((w.clone(), t.clone()));
            }
        }
    }
    let Some((webid, term)) = candidates.choose(rng).cloned() else {
        return FaultPlan::skipped("no term both visible and hidden to one WebID in a pod");
    };
    let queries = [Strategy::Direct, Strategy::Propagate]
        .into_iter()
        .flat_map(|s| {
            let q = Query::new(webid.clone(), [term.as_str()]).expect("term is a token");
            [
                q.clone().with_strategy(s).with_mode(MetadataMode::Exact),
                q.with_strategy(s).with_mode(MetadataMode::Bloom),
            ]
        })
        .collect();
    FaultPlan {
        applicable: true,
        description: format!("merged index lookup; witness query ({webid}, {term})"),
        faults: SearchFaults {
            merged_index_lookup: true,
            ..SearchFaults::default()
        },
        queries,
    }
}

fn foreign_partition_read(sim: &mut Simulation, rng: &mut ChaCha8Rng) -> FaultPlan {
    let Some(snap) = sim.metadata.as_ref() else {
        return FaultPlan::skipped("metadata never refreshed");
    };
    let owners: Vec<&WebId> = snap
        .servers
        .values()
        .flat_map(|m| m.map.per_webid.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    // Another partition owner must exist whose searches reach a server.
    if owners.len() < 2 {
        return FaultPlan::skipped("fewer than two WebIDs own partitions");
    }
    let other = (*owners.choose(rng).expect("non-empty")).clone();
    FaultPlan {
        applicable: true,
        description: format!("pod selection also reads the partition of {other}"),
        faults: SearchFaults {
            foreign_partition: Some(other),
            ..SearchFaults::default()
        },
        queries: Vec::new(),
    }
}
