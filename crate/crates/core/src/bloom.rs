//! Bloom sketches used as probabilistic source-selection metadata.
//!
//! Keys bind a term to a context (a pod url at server tier, a server id at
//! system tier) so a membership probe doubles as source selection. Probe
//! positions come from double hashing over two seeded xxh3 digests.

use std::collections::BTreeSet;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::error::{Error, Result};
use crate::model::{Partition, WebId};

const SEPARATOR: char = '\u{1f}';
const SECOND_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Server,
    System,
}

/// Who may read a sketch.
pub type SketchScope = Partition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomParams {
    pub m: usize,
    pub k: u32,
    pub seed: u64,
}

impl BloomParams {
    pub fn new(m: usize, k: u32, seed: u64) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidParams(format!("m = {m} must be at least 8")));
        }
        if k < 1 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        Ok(Self { m, k, seed })
    }

    /// m = ceil(-n ln p / ln^2 2), k = ceil((m / n) ln 2), clamped to the
    /// valid range. An empty set gets the minimum filter.
    pub fn for_target(n: usize, fpr: f64, seed: u64) -> Result<Self> {
        if !(fpr > 0.0 && fpr < 1.0) {
            return Err(Error::InvalidParams(format!("target fpr {fpr} outside (0, 1)")));
        }
        if n == 0 {
            return Self::new(8, 1, seed);
        }
        let ln2 = std::f64::consts::LN_2;
        let m = (-(n as f64) * fpr.ln() / (ln2 * ln2)).ceil() as usize;
        let m = m.max(8);
        let k = ((m as f64 / n as f64) * ln2).ceil() as u32;
        Self::new(m, k.max(1), seed)
    }

    /// (1 - e^{-kn/m})^k
    pub fn theoretical_fpr(&self, n: usize) -> f64 {
        let k = self.k as f64;
        (1.0 - (-k * n as f64 / self.m as f64).exp()).powf(k)
    }
}

pub fn membership_key(term: &str, context: &str) -> String {
    let mut key = String::with_capacity(term.len() + context.len() + 1);
    key.push_str(term);
    key.push(SEPARATOR);
    key.push_str(context);
    key
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomSketch {
    bits: Vec<u8>,
    pub params: BloomParams,
    pub scope: SketchScope,
    pub tier: Tier,
    pub inserted_count: usize,
}

impl BloomSketch {
    pub fn empty(params: BloomParams, scope: SketchScope, tier: Tier) -> Self {
        Self {
            bits: vec![0; params.m.div_ceil(8)],
            params,
            scope,
            tier,
            inserted_count: 0,
        }
    }

    fn positions(&self, key: &[u8]) -> impl Iterator<Item = usize> {
        let m = self.params.m as u64;
        let h1 = xxh3_64_with_seed(key, self.params.seed);
        let h2 = xxh3_64_with_seed(key, self.params.seed ^ SECOND_SEED) | 1;
        (0..self.params.k as u64).map(move |i| (h1.wrapping_add(i.wrapping_mul(h2)) % m) as usize)
    }

    pub fn insert_key(&mut self, key: &str) {
        let positions: Vec<usize> = self.positions(key.as_bytes()).collect();
        for p in positions {
            self.bits[p / 8] |= 1 << (p % 8);
        }
        self.inserted_count += 1;
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.positions(key.as_bytes())
            .all(|p| self.bits[p / 8] & (1 << (p % 8)) != 0)
    }

    pub fn insert(&mut self, term: &str, context: &str) {
        self.insert_key(&membership_key(term, context));
    }

    pub fn contains(&self, term: &str, context: &str) -> bool {
        self.contains_key(&membership_key(term, context))
    }

    pub fn set_bits(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn to_file(&self) -> SketchFile {
        SketchFile {
            m: self.params.m,
            k: self.params.k,
            seed: self.params.seed,
            bits: B64.encode(&self.bits),
        }
    }

    /// `inserted_count` is not persisted and reads back as zero.
    pub fn from_file(file: &SketchFile, scope: SketchScope, tier: Tier) -> Result<Self> {
        let params = BloomParams::new(file.m, file.k, file.seed)?;
        let bits = B64
            .decode(&file.bits)
            .map_err(|e| Error::InvalidParams(format!("bad bit array: {e}")))?;
        if bits.len() != params.m.div_ceil(8) {
            return Err(Error::InvalidParams(format!(
                "bit array of {} bytes does not fit m = {}",
                bits.len(),
                params.m
            )));
        }
        Ok(Self {
            bits,
            params,
            scope,
            tier,
            inserted_count: 0,
        })
    }
}

/// Serialized form: `{m, k, seed, bits}` with the bit array in base64.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SketchFile {
    pub m: usize,
    pub k: u32,
    pub seed: u64,
    pub bits: String,
}

pub fn bloom_build<'a, I>(keys: I, params: BloomParams, scope: SketchScope, tier: Tier) -> Result<BloomSketch>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let params = BloomParams::new(params.m, params.k, params.seed)?;
    let mut sketch = BloomSketch::empty(params, scope, tier);
    for (term, context) in keys {
        sketch.insert(term, context);
    }
    Ok(sketch)
}

/// Contexts among `candidates` that may hold `term` for `requester`,
/// according to the given sketches. Never drops a true match.
pub fn bloom_select<'c, I>(
    requester: &WebId,
    sketches: &[&BloomSketch],
    term: &str,
    candidates: I,
) -> Result<BTreeSet<String>>
where
    I: IntoIterator<Item = &'c str>,
{
    for s in sketches {
        if let SketchScope::WebId(owner) = &s.scope {
            if owner != requester {
                return Err(Error::ScopeViolation {
                    requester: requester.to_string(),
                    owner: owner.to_string(),
                });
            }
        }
    }
    Ok(candidates
        .into_iter()
        .filter(|ctx| sketches.iter().any(|s| s.contains(term, ctx)))
        .map(str::to_string)
        .collect())
}
