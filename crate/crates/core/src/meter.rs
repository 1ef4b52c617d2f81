//! Communication accounting.
//!
//! Two costs are tracked for everything a client uploads: the number of
//! nonzero transmitted elements and the empirical Shannon entropy of the
//! transmitted values after binning with `floor(v / bin)` (bin 0.01 by
//! default). Binning exists only for accounting; payloads delivered to the
//! server are never quantised.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamVector;

pub const DEFAULT_BIN: f64 = 0.01;

/// Zero every coordinate with `|v| <= epsilon`.
pub fn threshold(delta: &[f64], epsilon: f64) -> ParamVector {
    delta
        .iter()
        .map(|&v| if v.abs() <= epsilon { 0.0 } else { v })
        .collect::<Vec<_>>()
        .into()
}

pub fn count_nonzero(values: &[f64]) -> usize {
    values.iter().filter(|&&v| v != 0.0).count()
}

#[inline]
pub fn bin_index(value: f64, bin: f64) -> i64 {
    (value / bin).floor() as i64
}

pub fn discretize(values: &[f64], bin: f64) -> Vec<i64> {
    values.iter().map(|&v| bin_index(v, bin)).collect()
}

/// Occupancy counts per bin index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BinHistogram {
    counts: BTreeMap<i64, u64>,
}

impl BinHistogram {
    pub fn add(&mut self, values: &[f64], bin: f64) {
        for &v in values {
            *self.counts.entry(bin_index(v, bin)).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: &BinHistogram) {
        for (&b, &c) in &other.counts {
            *self.counts.entry(b).or_default() += c;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&b, &c)| (b, c))
    }

    /// Entropy in bits per element; 0 for an empty histogram.
    pub fn entropy(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        let h: f64 = self
            .counts
            .values()
            .map(|&c| {
                let p = c as f64 / total;
                -p * p.log2()
            })
            .sum();
        h.max(0.0)
    }
}

/// Bits per element of the binned empirical distribution of `values`.
pub fn empirical_entropy(values: &[f64], bin: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Metering("entropy of an empty payload".into()));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
    if !(bin > 0.0) {
        return Err(Error::Metering(format!("bin size must be positive (got {bin})")));
    }
    let mut h = BinHistogram::default();
    h.add(values, bin);
    Ok(h.entropy())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    ModelDelta,
    ControlDelta,
    ModelFull,
}

/// One uploaded vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmittedUpdate {
    pub payload: ParamVector,
    pub round: usize,
    pub client: usize,
    pub channel: Channel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// One histogram over every element sent in the round.
    #[default]
    Pooled,
    /// Entropy per upload, weighted by its length.
    PerClient,
}

/// Cost of a single round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundCost {
    pub elements: u64,
    pub nonzero: u64,
    /// Bits per element.
    pub entropy: f64,
    pub bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommLedger {
    pub bin: f64,
    pub mode: EntropyMode,
    pub cumulative_nonzero: u64,
    pub cumulative_elements: u64,
    pub cumulative_bits: f64,
    pub rounds: Vec<RoundCost>,
}

impl CommLedger {
    pub fn new(bin: f64, mode: EntropyMode) -> Self {
        CommLedger {
            bin,
            mode,
            cumulative_nonzero: 0,
            cumulative_elements: 0,
            cumulative_bits: 0.0,
            rounds: Vec::new(),
        }
    }

    /// Account for every upload of one round. An empty round leaves the
    /// ledger untouched.
    pub fn record_round(&mut self, updates: &[TransmittedUpdate]) -> RoundCost {
        if updates.is_empty() {
            return RoundCost::default();
        }
        let elements: u64 = updates.iter().map(|u| u.payload.len() as u64).sum();
        let nonzero: u64 = updates.iter().map(|u| count_nonzero(&u.payload) as u64).sum();
        let bits = match self.mode {
            EntropyMode::Pooled => {
                let mut h = BinHistogram::default();
                for u in updates {
                    h.add(&u.payload, self.bin);
                }
                h.entropy() * elements as f64
            }
            EntropyMode::PerClient => updates
                .iter()
                .filter(|u| !u.payload.is_empty())
                .map(|u| {
                    let mut h = BinHistogram::default();
                    h.add(&u.payload, self.bin);
                    h.entropy() * u.payload.len() as f64
                })
                .sum(),
        };
        let cost = RoundCost {
            elements,
            nonzero,
            entropy: if elements > 0 { bits / elements as f64 } else { 0.0 },
            bits,
        };
        self.cumulative_nonzero += nonzero;
        self.cumulative_elements += elements;
        self.cumulative_bits += bits;
        self.rounds.push(cost);
        cost
    }
}
