//! Ground truth computed by scanning raw resources. Nothing here looks at an
//! index or at metadata.

use std::collections::{BTreeSet, HashMap};

use crate::model::{tokenize, Corpus, Pod, Resource, WebId};

fn matches_all(resource: &Resource, terms: &[String]) -> bool {
    let tokens: BTreeSet<String> = tokenize(&resource.text).into_iter().collect();
    terms.iter().all(|t| tokens.contains(t))
}

fn scan<'a>(pods: impl Iterator<Item = &'a Pod>, webid: &WebId, terms: &[String]) -> BTreeSet<String> {
    if terms.is_empty() {
        return BTreeSet::new();
    }
    pods.flat_map(|p| p.resources.values())
        .filter(|r| r.acl.can_read(webid) && matches_all(r, terms))
        .map(|r| r.url.clone())
        .collect()
}

/// Every readable resource containing all `terms`, across all pods.
pub fn oracle_search(corpus: &Corpus, webid: &WebId, terms: &[String]) -> BTreeSet<String> {
    scan(corpus.pods(), webid, terms)
}

/// As [`oracle_search`], limited to pods that are indexed and registered.
pub fn oracle_search_searchable(corpus: &Corpus, webid: &WebId, terms: &[String]) -> BTreeSet<String> {
    scan(
        corpus.pods().filter(|p| p.discoverable() && p.index.is_some()),
        webid,
        terms,
    )
}

/// term -> url -> tf over the resources accepted by `include`.
pub type BruteIndex = HashMap<String, HashMap<String, u32>>;

pub fn brute_index(pod: &Pod, include: impl Fn(&Resource) -> bool) -> BruteIndex {
    let mut out: BruteIndex = HashMap::new();
    for r in pod.resources.values().filter(|r| include(r)) {
        for tok in tokenize(&r.text) {
            *out.entry(tok).or_default().entry(r.url.clone()).or_default() += 1;
        }
    }
    out
}

/// Every identity that could plausibly issue a query against this corpus:
/// declared WebIDs, ACL readers and pod owners.
pub fn known_webids(corpus: &Corpus) -> BTreeSet<WebId> {
    let mut out = corpus.webids.clone();
    for pod in corpus.pods() {
        out.insert(pod.owner.clone());
        for r in pod.resources.values() {
            out.extend(r.acl.readers.iter().cloned());
        }
    }
    out
}

/// An identity listed on no ACL; it sees public resources only.
pub const ANONYMOUS: &str = "urn:audit:anonymous";

pub fn anonymous() -> WebId {
    WebId::new(ANONYMOUS)
}
