//! Small hand-built corpora reproducing the worked examples used throughout
//! the tests, the acceptance suite and the CLI demos.

use crate::model::{AccessControlList, Corpus, Pod, Resource};

fn pod_with(url: &str, owner: &str, docs: &[(&str, &str, AccessControlList)]) -> Pod {
    let mut pod = Pod::new(url, owner);
    for (name, text, acl) in docs {
        pod.insert_resource(Resource::new(format!("{url}{name}"), *text, acl.clone()))
            .expect("fixture resources are well formed");
    }
    pod
}

fn readers(ids: &[&str]) -> AccessControlList {
    AccessControlList::readers(ids.iter().copied())
}

/// One pod with r1 (UUID1), r2 (UUID2), r3 (UUID1, UUID3). UUID4 is known
/// but reads nothing. r1 and r3 mention "alpha".
pub const VISIBILITY_POD: &str = "https://server1.example/p1/";

pub fn visibility_example() -> Corpus {
    let mut corpus = Corpus::new();
    corpus.add_server("server1").unwrap();
    corpus
        .add_pod(
            "server1",
            pod_with(
                VISIBILITY_POD,
                "owner1",
                &[
                    ("r1", "alpha beta", readers(&["UUID1"])),
                    ("r2", "gamma", readers(&["UUID2"])),
                    ("r3", "alpha delta", readers(&["UUID1", "UUID3"])),
                ],
            ),
        )
        .unwrap();
    corpus.add_webid("UUID4");
    corpus
}

pub const SERVER_TIER_SERVER: &str = "server1";

pub fn dstore(name: &str) -> String {
    format!("https://server1.example/{name}/")
}

/// One server with dstore1..dstore4: UUID1 sees kwd1 in dstore1 and kwd2 in
/// dstore2 and dstore3; UUID2 sees kwd2 in dstore4 only.
pub fn server_tier_example() -> Corpus {
    let mut corpus = Corpus::new();
    corpus.add_server(SERVER_TIER_SERVER).unwrap();
    for (name, text, who) in [
        ("dstore1", "kwd1 notes", "UUID1"),
        ("dstore2", "kwd2 notes", "UUID1"),
        ("dstore3", "kwd2 kwd2 summary", "UUID1"),
        ("dstore4", "kwd2 report", "UUID2"),
    ] {
        let url = dstore(name);
        corpus
            .add_pod(
                SERVER_TIER_SERVER,
                pod_with(&url, &format!("owner-{name}"), &[("doc-a", text, readers(&[who]))]),
            )
            .unwrap();
    }
    corpus
}

pub fn system_pod(server: &str) -> String {
    format!("https://{server}.example/pod/")
}

pub fn system_tier_uuid2_doc() -> String {
    format!("{}doc-c", system_pod("server3"))
}

/// Three servers: UUID1 sees kwd1 on server1 and kwd2 on server1 and
/// server2; UUID2 sees kwd2 on server3 only.
pub fn system_tier_example() -> Corpus {
    let mut corpus = Corpus::new();
    let layout: [(&str, &[(&str, &str, AccessControlList)]); 3] = [
        (
            "server1",
            &[
                ("doc-a", "kwd1 intake", readers(&["UUID1"])),
                ("doc-b", "kwd2 followup", readers(&["UUID1"])),
            ],
        ),
        ("server2", &[("doc-a", "kwd2 referral", readers(&["UUID1"]))]),
        ("server3", &[("doc-c", "kwd2 discharge", readers(&["UUID2"]))]),
    ];
    for (server, docs) in layout {
        corpus.add_server(server).unwrap();
        corpus
            .add_pod(server, pod_with(&system_pod(server), &format!("owner-{server}"), docs))
            .unwrap();
    }
    corpus
}

pub const PG1_POD: &str = "https://server1.example/clinic/";

/// r1, r2 readable by U_A; r3 readable by U_B; "diabetes" only in r3.
pub fn scope_isolation_example() -> Corpus {
    let mut corpus = Corpus::new();
    corpus.add_server("server1").unwrap();
    corpus
        .add_pod(
            "server1",
            pod_with(
                PG1_POD,
                "owner",
                &[
                    ("r1", "blood pressure reading", readers(&["U_A"])),
                    ("r2", "cholesterol panel", readers(&["U_A"])),
                    ("r3", "diabetes management plan", readers(&["U_B"])),
                ],
            ),
        )
        .unwrap();
    corpus
}

pub const PG2_POD: &str = "https://server1.example/records/";

/// r1 {genetic, therapy} for U1; r2 {cancer}, r3 {diabetes, diet} for U2.
pub fn index_isolation_example() -> Corpus {
    let mut corpus = Corpus::new();
    corpus.add_server("server1").unwrap();
    corpus
        .add_pod(
            "server1",
            pod_with(
                PG2_POD,
                "owner",
                &[
                    ("r1", "genetic therapy", readers(&["U1"])),
                    ("r2", "cancer", readers(&["U2"])),
                    ("r3", "diabetes diet", readers(&["U2"])),
                ],
            ),
        )
        .unwrap();
    corpus
}

pub fn separability_pod(server: &str, name: &str) -> String {
    format!("https://{server}.example/{name}/")
}

/// S1 hosts P_A and P_B, S2 hosts P_C. For keyword q, w1 reads P_A and P_C,
/// w2 reads P_B.
pub fn separability_example() -> Corpus {
    let mut corpus = Corpus::new();
    for (server, pods) in [
        ("S1", vec![("P_A", "w1"), ("P_B", "w2")]),
        ("S2", vec![("P_C", "w1")]),
    ] {
        corpus.add_server(server).unwrap();
        for (name, who) in pods {
            let url = separability_pod(server, name);
            corpus
                .add_pod(server, pod_with(&url, "owner", &[("doc", "q", readers(&[who]))]))
                .unwrap();
        }
    }
    corpus
}
