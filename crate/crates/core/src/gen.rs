//! Seeded synthetic corpora with a healthcare flavour.
//!
//! The vocabulary starts with a fixed list of clinical words, a handful of
//! them sensitive conditions that drag correlated symptom words along with
//! them; beyond that list terms are synthetic (`term57`). Word choice is
//! skewed towards the front of the vocabulary so some terms are common.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metadata::BloomConfig;
use crate::model::{AccessControlList, Corpus, Pod, Resource, WebId};
use crate::search::{MetadataMode, Strategy};

const BASE_VOCABULARY: &[&str] = &[
    "patient", "appointment", "clinic", "referral", "prescription", "blood", "pressure", "allergy",
    "vaccine", "xray", "scan", "followup", "discharge", "nurse", "therapy", "dosage", "diet",
    "exercise", "sleep", "headache", "fever", "cough", "fatigue", "insomnia", "thirst", "insulin",
    "glucose", "chemotherapy", "biopsy", "tumour", "antiretroviral", "viral", "load", "mood",
    "counselling", "pregnancy", "ultrasound", "midwife", "diabetes", "depression", "cancer", "hiv",
    "genetic", "cholesterol", "asthma", "inhaler", "cardiology", "dermatology",
];

/// Sensitive condition terms and the observable words that tend to appear
/// alongside them.
pub const CORRELATED: &[(&str, &[&str])] = &[
    ("diabetes", &["insulin", "glucose", "thirst"]),
    ("depression", &["insomnia", "fatigue", "mood"]),
    ("cancer", &["chemotherapy", "biopsy", "tumour"]),
    ("hiv", &["antiretroviral", "viral", "load"]),
    ("pregnancy", &["ultrasound", "midwife"]),
];

pub fn vocabulary(size: usize) -> Vec<String> {
    (0..size)
        .map(|i| match BASE_VOCABULARY.get(i) {
            Some(w) => w.to_string(),
            None => format!("term{i}"),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scale {
    pub servers: usize,
    pub pods_per_server: usize,
    pub resources_per_pod: usize,
    pub webids: usize,
    pub vocabulary: usize,
    /// Probability that a given WebID is listed on a given resource's ACL.
    pub acl_density: f64,
    pub public_fraction: f64,
    /// Pods whose owners never authorized indexing.
    pub unindexed_fraction: f64,
    /// Pods never registered for search.
    pub unregistered_fraction: f64,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for Scale {
    fn default() -> Self {
        Self {
            servers: 4,
            pods_per_server: 6,
            resources_per_pod: 20,
            webids: 8,
            vocabulary: 40,
            acl_density: 0.3,
            public_fraction: 0.1,
            unindexed_fraction: 0.0,
            unregistered_fraction: 0.0,
            min_words: 3,
            max_words: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkbenchConfig {
    pub seed: u64,
    pub scale: Scale,
    pub bloom: BloomConfig,
    pub strategy: Strategy,
    pub mode: MetadataMode,
    pub overlay_nodes: usize,
}

impl Default for WorkbenchConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            scale: Scale::default(),
            bloom: BloomConfig::default(),
            strategy: Strategy::Direct,
            mode: MetadataMode::Exact,
            overlay_nodes: 3,
        }
    }
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")))
    }
}

impl WorkbenchConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.scale;
        fraction("acl_density", s.acl_density)?;
        fraction("public_fraction", s.public_fraction)?;
        fraction("unindexed_fraction", s.unindexed_fraction)?;
        fraction("unregistered_fraction", s.unregistered_fraction)?;
        if s.min_words > s.max_words {
            return Err(Error::InvalidConfig(format!(
                "min_words {} exceeds max_words {}",
                s.min_words, s.max_words
            )));
        }
        if s.vocabulary == 0 && s.resources_per_pod > 0 && s.max_words > 0 {
            return Err(Error::InvalidConfig("vocabulary must not be empty".into()));
        }
        if s.webids == 0 && s.pods_per_server > 0 && s.servers > 0 {
            return Err(Error::InvalidConfig("pods need owners; webids must be > 0".into()));
        }
        if !(self.bloom.target_fpr > 0.0 && self.bloom.target_fpr < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bloom target_fpr {} is outside (0, 1)",
                self.bloom.target_fpr
            )));
        }
        if self.overlay_nodes == 0 {
            return Err(Error::InvalidConfig("overlay_nodes must be > 0".into()));
        }
        Ok(())
    }

    /// A small random configuration in the desk-scale envelope used by the
    /// property suites: up to 4 servers, 6 pods each, 20 resources per pod
    /// and 8 WebIDs.
    pub fn random_desk(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
        let scale = Scale {
            servers: rng.gen_range(1..=4),
            pods_per_server: rng.gen_range(1..=6),
            resources_per_pod: rng.gen_range(0..=20),
            webids: rng.gen_range(1..=8),
            vocabulary: rng.gen_range(4..=48),
            acl_density: rng.gen_range(0.0..0.6),
            public_fraction: rng.gen_range(0.0..0.3),
            unindexed_fraction: rng.gen_range(0.0..0.2),
            unregistered_fraction: rng.gen_range(0.0..0.2),
            min_words: 1,
            max_words: rng.gen_range(1..=10),
        };
        Self {
            seed,
            scale,
            overlay_nodes: rng.gen_range(1..=4),
            ..Self::default()
        }
    }
}

pub fn webid_name(i: usize) -> WebId {
    WebId::new(format!("https://id.example/person{i:03}#me"))
}

pub fn server_name(i: usize) -> String {
    format!("srv{i:02}")
}

/// Skewed pick: lower indexes come up more often.
fn pick_word(rng: &mut ChaCha8Rng, vocab: &[String]) -> usize {
    let u: f64 = rng.gen();
    ((u * u) * vocab.len() as f64) as usize
}

pub fn generate_corpus(config: &WorkbenchConfig) -> Result<Corpus> {
    config.validate()?;
    let s = &config.scale;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = vocabulary(s.vocabulary);
    let webids: Vec<WebId> = (0..s.webids).map(webid_name).collect();
    let mut corpus = Corpus::new();
    for w in &webids {
        corpus.add_webid(w.clone());
    }
    for si in 0..s.servers {
        let server_id = server_name(si);
        corpus.add_server(server_id.clone())?;
        for pi in 0..s.pods_per_server {
            let owner = webids[(si * s.pods_per_server + pi) % webids.len()].clone();
            let pod_url = format!("https://{server_id}.example/pod{pi:03}/");
            let indexing = !rng.gen_bool(s.unindexed_fraction);
            let registered = !rng.gen_bool(s.unregistered_fraction);
            let mut pod = Pod::new(pod_url.clone(), owner).with_flags(indexing, registered);
            for ri in 0..s.resources_per_pod {
                let n_words = rng.gen_range(s.min_words..=s.max_words);
                let mut words: Vec<&str> = Vec::with_capacity(n_words);
                for _ in 0..n_words {
                    let w = vocab[pick_word(&mut rng, &vocab)].as_str();
                    words.push(w);
                    if let Some((_, symptoms)) = CORRELATED.iter().find(|(c, _)| *c == w) {
                        if rng.gen_bool(0.8) {
                            if let Some(sym) = symptoms.choose(&mut rng) {
                                words.push(sym);
                            }
                        }
                    }
                }
                let public = rng.gen_bool(s.public_fraction);
                let readers = webids
                    .iter()
                    .filter(|_| rng.gen_bool(s.acl_density))
                    .cloned()
                    .collect();
                pod.insert_resource(Resource::new(
                    format!("{pod_url}doc{ri:04}"),
                    words.join(" "),
                    AccessControlList { readers, public },
                ))?;
            }
            corpus.add_pod(&server_id, pod)?;
        }
    }
    Ok(corpus)
}
