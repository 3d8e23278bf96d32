//! Simulated overlay federation. Every node holds a replica of the logical
//! table mapping WebID partitions to server-metadata locations; each server
//! is additionally homed on one node, which executes propagated queries for
//! it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bloom::bloom_select;
use crate::error::Result;
use crate::metadata::MetadataSnapshot;
use crate::model::{Partition, WebId};
use crate::par;
use crate::search::{self, Match, MetadataMode, Query, SearchContext, Selection};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TableEntry {
    pub server_id: String,
    pub location: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlayNode {
    pub node_id: String,
    pub logical_table: BTreeMap<Partition, BTreeSet<TableEntry>>,
    /// Registered servers and their metadata locations.
    pub catalogue: BTreeMap<String, String>,
    pub peers: BTreeSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Registration {
    Registered,
    Duplicate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlayNetwork {
    pub nodes: Vec<OverlayNode>,
}

impl OverlayNetwork {
    pub fn new(node_count: usize) -> Self {
        let ids: Vec<String> = (0..node_count.max(1)).map(|i| format!("node-{i}")).collect();
        let nodes = ids
            .iter()
            .map(|id| OverlayNode {
                node_id: id.clone(),
                logical_table: BTreeMap::new(),
                catalogue: BTreeMap::new(),
                peers: ids.iter().filter(|p| *p != id).cloned().collect(),
            })
            .collect();
        Self { nodes }
    }

    /// Record a server's metadata location on every node.
    pub fn register_server(&mut self, server_id: &str, location: &str) -> Registration {
        if self.nodes[0].catalogue.contains_key(server_id) {
            return Registration::Duplicate;
        }
        for node in &mut self.nodes {
            node.catalogue
                .insert(server_id.to_string(), location.to_string());
        }
        Registration::Registered
    }

    pub fn location(&self, server_id: &str) -> Option<&str> {
        self.nodes[0].catalogue.get(server_id).map(String::as_str)
    }

    pub fn registered_servers(&self) -> impl Iterator<Item = &str> {
        self.nodes[0].catalogue.keys().map(String::as_str)
    }

    /// Rebuild the logical tables from a metadata snapshot: a partition gets
    /// an entry for each registered server whose metadata has anything in it.
    pub fn publish(&mut self, snapshot: &MetadataSnapshot) {
        let catalogue = self.nodes[0].catalogue.clone();
        let mut table: BTreeMap<Partition, BTreeSet<TableEntry>> = BTreeMap::new();
        for (server_id, location) in &catalogue {
            let Some(meta) = snapshot.servers.get(server_id) else {
                continue;
            };
            for (p, _) in meta.map.partitions() {
                table.entry(p).or_default().insert(TableEntry {
                    server_id: server_id.clone(),
                    location: location.clone(),
                });
            }
        }
        for node in &mut self.nodes {
            node.logical_table = table.clone();
        }
    }

    /// Servers whose metadata may hold something for `webid`, as resolved
    /// by `node`'s replica.
    pub fn servers_for(&self, node: usize, webid: &WebId) -> BTreeSet<String> {
        let table = &self.nodes[node].logical_table;
        [Partition::WebId(webid.clone()), Partition::Public]
            .iter()
            .filter_map(|p| table.get(p))
            .flatten()
            .map(|e| e.server_id.clone())
            .collect()
    }

    /// The node that stores `server_id`'s metadata locally.
    pub fn home_node(&self, server_id: &str) -> Option<usize> {
        let pos = self.registered_servers().position(|s| s == server_id)?;
        Some(pos % self.nodes.len())
    }

    pub fn to_dump(&self) -> Vec<NodeDump> {
        self.nodes
            .iter()
            .map(|n| NodeDump {
                node_id: n.node_id.clone(),
                table: n
                    .logical_table
                    .iter()
                    .map(|(p, es)| (p.key().to_string(), es.iter().cloned().collect()))
                    .collect(),
                servers: n.catalogue.clone(),
            })
            .collect()
    }

    pub fn from_dump(dump: &[NodeDump]) -> Self {
        let ids: BTreeSet<String> = dump.iter().map(|n| n.node_id.clone()).collect();
        let nodes = dump
            .iter()
            .map(|n| OverlayNode {
                node_id: n.node_id.clone(),
                logical_table: n
                    .table
                    .iter()
                    .map(|(k, es)| (Partition::from_key(k), es.iter().cloned().collect()))
                    .collect(),
                catalogue: n.servers.clone(),
                peers: ids.iter().filter(|p| **p != n.node_id).cloned().collect(),
            })
            .collect::<Vec<_>>();
        if nodes.is_empty() {
            return Self::new(1);
        }
        Self { nodes }
    }
}

/// Serialized logical table of one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDump {
    pub node_id: String,
    pub table: BTreeMap<String, Vec<TableEntry>>,
    pub servers: BTreeMap<String, String>,
}

/// Servers relevant to every term for `webid`, best first.
///
/// Exact mode reads the system-tier view and ranks by summed term frequency
/// (ties by server id). Bloom mode probes the system-tier sketches over the
/// servers the logical table lists for `webid`, in server id order.
pub fn select_servers(
    network: &OverlayNetwork,
    snapshot: &MetadataSnapshot,
    webid: &WebId,
    terms: &[String],
    mode: MetadataMode,
) -> Result<Vec<String>> {
    if terms.is_empty() {
        return Ok(Vec::new());
    }
    let reachable = network.servers_for(0, webid);
    match mode {
        MetadataMode::Exact => {
            let mut scored: Vec<(u64, String)> = Vec::new();
            let entries: Vec<_> = terms
                .iter()
                .map(|t| snapshot.system.entry(webid, t))
                .collect();
            'servers: for server in &entries[0].sources {
                if !reachable.contains(server) {
                    continue;
                }
                for e in &entries[1..] {
                    if !e.sources.contains(server) {
                        continue 'servers;
                    }
                }
                // The system entry sums over servers; rank by this server's share.
                let score = terms
                    .iter()
                    .map(|t| {
                        snapshot
                            .servers
                            .get(server)
                            .map(|m| m.entry(webid, t).stats.tf_total)
                            .unwrap_or(0)
                    })
                    .sum();
                scored.push((score, server.clone()));
            }
            scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            Ok(scored.into_iter().map(|(_, s)| s).collect())
        }
        MetadataMode::Bloom => {
            let sketches = snapshot.sketches.system_for(webid);
            let mut selected = reachable;
            for t in terms {
                selected = bloom_select(webid, &sketches, t, selected.iter().map(String::as_str))?;
            }
            Ok(selected.into_iter().collect())
        }
    }
}

/// Forward the query to every node; each node runs the per-server search on
/// the servers homed there. Results are merged and deduplicated; ranking is
/// left to the caller.
pub fn propagate_query(
    network: &OverlayNetwork,
    ctx: &SearchContext<'_>,
    query: &Query,
    selection: &Selection,
) -> Result<Vec<Match>> {
    let nodes: Vec<usize> = (0..network.nodes.len()).collect();
    let per_node = par::map(ctx.exec, &nodes, |&node| -> Result<Vec<Match>> {
        let mut out = Vec::new();
        for server in network.servers_for(node, &query.webid) {
            if network.home_node(&server) != Some(node) {
                continue;
            }
            selection.servers.lock().expect("selection lock").insert(server.clone());
            out.extend(search::search_server(ctx, &server, query, selection)?);
        }
        Ok(out)
    });
    let mut merged: BTreeMap<String, Match> = BTreeMap::new();
    for batch in per_node {
        for m in batch? {
            merged.entry(m.url.clone()).or_insert(m);
        }
    }
    Ok(merged.into_values().collect())
}
