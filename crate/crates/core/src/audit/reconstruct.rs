//! Rebuilding metadata from what search parties legitimately observe: the
//! server-local result records of their own authorized queries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::WebId;

/// One authorized query and the pods on one server that produced results.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub webid: WebId,
    pub terms: Vec<String>,
    pub server_id: String,
    pub result_pod_urls: BTreeSet<String>,
}

impl ResultRecord {
    pub fn query_key(&self) -> String {
        self.terms.join(" ")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCount {
    pub sources: BTreeSet<String>,
    pub count: u64,
}

pub type Cells = BTreeMap<WebId, BTreeMap<String, SourceCount>>;

fn lookup<'a>(cells: &'a Cells, webid: &WebId, query: &str) -> Option<&'a SourceCount> {
    cells.get(webid).and_then(|m| m.get(query))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructedServerMetadata {
    pub server_id: String,
    pub cells: Cells,
}

impl ReconstructedServerMetadata {
    /// Missing cells read as `(∅, 0)`.
    pub fn get(&self, webid: &WebId, query: &str) -> SourceCount {
        lookup(&self.cells, webid, query).cloned().unwrap_or_default()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructedSystemMetadata {
    pub cells: Cells,
}

impl ReconstructedSystemMetadata {
    pub fn get(&self, webid: &WebId, query: &str) -> SourceCount {
        lookup(&self.cells, webid, query).cloned().unwrap_or_default()
    }
}

/// Server-level reconstruction: union the result pods per (webid, query).
pub fn f_s(log: &[ResultRecord]) -> Result<ReconstructedServerMetadata> {
    let server_id = log.first().map(|r| r.server_id.clone()).unwrap_or_default();
    let mut cells = Cells::new();
    for rec in log {
        if rec.server_id != server_id {
            return Err(Error::MixedServerLog(server_id, rec.server_id.clone()));
        }
        let cell = cells
            .entry(rec.webid.clone())
            .or_default()
            .entry(rec.query_key())
            .or_default();
        cell.sources.extend(rec.result_pod_urls.iter().cloned());
        cell.count = cell.sources.len() as u64;
    }
    Ok(ReconstructedServerMetadata { server_id, cells })
}

/// Overlay-level reconstruction: a server joins a cell iff its snapshot has
/// a positive count there.
pub fn f_ns(snapshots: &[(&str, u64, &ReconstructedServerMetadata)]) -> ReconstructedSystemMetadata {
    let mut cells = Cells::new();
    for (server_id, _at, meta) in snapshots {
        for (webid, queries) in &meta.cells {
            for (q, _) in queries.iter().filter(|(_, sc)| sc.count > 0) {
                let cell = cells.entry(webid.clone()).or_default().entry(q.clone()).or_default();
                cell.sources.insert(server_id.to_string());
                cell.count = cell.sources.len() as u64;
            }
        }
    }
    ReconstructedSystemMetadata { cells }
}
