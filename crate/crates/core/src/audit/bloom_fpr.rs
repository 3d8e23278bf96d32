//! Monte-Carlo false-positive measurement for the sketches.
//!
//! For each sizing target `n0` the sketch parameters are fixed and filled
//! with nested prefixes of one key stream, so a larger `n` always sets a
//! superset of bits. Probes come from a disjoint stream and are identical
//! across cells.

use serde::{Deserialize, Serialize};

use crate::bloom::{BloomParams, BloomSketch, Tier};
use crate::error::{Error, Result};
use crate::model::Partition;
use crate::par::{self, Exec};

pub const MIN_PROBES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FprGrid {
    pub target_fpr: f64,
    /// Insertion counts the sketches are sized for.
    pub sized_for: Vec<usize>,
    /// Fill levels as quarters of the sizing target.
    pub fill_quarters: Vec<usize>,
    pub probes: usize,
    pub seed: u64,
}

impl Default for FprGrid {
    fn default() -> Self {
        Self {
            target_fpr: 0.01,
            sized_for: vec![100, 1000],
            fill_quarters: vec![0, 1, 2, 4, 8, 16],
            probes: MIN_PROBES,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FprCell {
    pub sized_for: usize,
    pub n: usize,
    pub m: usize,
    pub k: u32,
    pub probes: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub measured_fpr: f64,
    pub theoretical_fpr: f64,
    /// Rate at which three independent absent terms all pass.
    pub conjunctive_fpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FprReport {
    pub target_fpr: f64,
    pub cells: Vec<FprCell>,
    pub false_negatives: usize,
    pub monotone_in_n: bool,
    /// Cells filled to their sizing target whose rate fell outside
    /// [target / 2, 2 * target].
    pub out_of_band: Vec<(usize, f64)>,
    pub pass: bool,
}

fn member(i: usize) -> String {
    format!("member-{i}")
}

fn probe(j: usize) -> String {
    format!("probe-{j}")
}

fn measure_cell(params: BloomParams, sized_for: usize, n: usize, probes: usize) -> FprCell {
    let mut sketch = BloomSketch::empty(params, Partition::Public, Tier::System);
    for i in 0..n {
        sketch.insert_key(&member(i));
    }
    let false_negatives = (0..n).filter(|&i| !sketch.contains_key(&member(i))).count();
    let hits: Vec<bool> = (0..probes).map(|j| sketch.contains_key(&probe(j))).collect();
    let false_positives = hits.iter().filter(|&&h| h).count();
    let triples = probes / 3;
    let conj = hits.chunks_exact(3).filter(|c| c.iter().all(|&h| h)).count();
    FprCell {
        sized_for,
        n,
        m: params.m,
        k: params.k,
        probes,
        false_positives,
        false_negatives,
        measured_fpr: false_positives as f64 / probes as f64,
        theoretical_fpr: params.theoretical_fpr(n),
        conjunctive_fpr: if triples == 0 { 0.0 } else { conj as f64 / triples as f64 },
    }
}

/// Expected false positives below which the band check is too noisy.
const BAND_MIN_EXPECTED: f64 = 50.0;

pub fn measure_bloom_fpr(grid: &FprGrid, exec: Exec) -> Result<FprReport> {
    if grid.probes < MIN_PROBES {
        return Err(Error::InvalidConfig(format!(
            "{} probes per cell; at least {MIN_PROBES} required",
            grid.probes
        )));
    }
    let mut plan = Vec::new();
    for &n0 in &grid.sized_for {
        let params = BloomParams::for_target(n0, grid.target_fpr, grid.seed)?;
        let mut fills: Vec<usize> = grid.fill_quarters.iter().map(|q| n0 * q / 4).collect();
        fills.sort_unstable();
        fills.dedup();
        plan.extend(fills.into_iter().map(|n| (params, n0, n)));
    }
    let cells = par::map(exec, &plan, |&(params, n0, n)| measure_cell(params, n0, n, grid.probes));

    let false_negatives = cells.iter().map(|c| c.false_negatives).sum();
    let monotone_in_n = cells.windows(2).all(|w| {
        w[0].sized_for != w[1].sized_for || w[0].false_positives <= w[1].false_positives
    });
    let out_of_band: Vec<(usize, f64)> = cells
        .iter()
        .filter(|c| c.n == c.sized_for && c.n > 0)
        .filter(|_| grid.target_fpr * grid.probes as f64 >= BAND_MIN_EXPECTED)
        .filter(|c| !(grid.target_fpr / 2.0..=grid.target_fpr * 2.0).contains(&c.measured_fpr))
        .map(|c| (c.n, c.measured_fpr))
        .collect();
    let empty_ok = cells.iter().filter(|c| c.n == 0).all(|c| c.false_positives == 0);
    Ok(FprReport {
        target_fpr: grid.target_fpr,
        pass: false_negatives == 0 && monotone_in_n && out_of_band.is_empty() && empty_ok,
        cells,
        false_negatives,
        monotone_in_n,
        out_of_band,
    })
}
