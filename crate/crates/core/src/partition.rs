//! Splitting a dataset across simulated clients.
//!
//! Two label regimes are supported. IID shuffles and deals examples. The
//! Dirichlet regime draws each client's label proportions from
//! `Dir(α·1)` and then deals each class's examples across clients by those
//! proportions. Client sizes are either equal or proportional to
//! `Lognormal(0, σ²)` draws.
//!
//! Dirichlet dealing builds a client × class weight matrix
//! `W[k][c] = size_k · p_k[c]`, balances it with a fixed number of Sinkhorn
//! passes so row totals track the target sizes, and then floors
//! `n_c · W[k][c] / Σ_j W[j][c]`. Leftover examples of a class go to clients
//! in ascending id order. Within a class, which concrete examples each client
//! receives is a seeded shuffle.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::{stream, Purpose};

const SINKHORN_PASSES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelMode {
    Iid,
    Dirichlet { alpha: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeMode {
    #[default]
    Equal,
    Lognormal {
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub mode: LabelMode,
    pub clients: usize,
    pub sizes: SizeMode,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn iid(clients: usize, seed: u64) -> Self {
        PartitionSpec {
            mode: LabelMode::Iid,
            clients,
            sizes: SizeMode::Equal,
            seed,
        }
    }

    pub fn dirichlet(alpha: f64, clients: usize, seed: u64) -> Self {
        PartitionSpec {
            mode: LabelMode::Dirichlet { alpha },
            clients,
            sizes: SizeMode::Equal,
            seed,
        }
    }

    pub fn with_sizes(mut self, sizes: SizeMode) -> Self {
        self.sizes = sizes;
        self
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.clients == 0 {
            errors.push("partition.clients must be at least 1".into());
        }
        if let LabelMode::Dirichlet { alpha } = self.mode {
            if !(alpha > 0.0 && alpha.is_finite()) {
                errors.push(format!("partition.mode.alpha must be positive (got {alpha})"));
            }
        }
        if let SizeMode::Lognormal { sigma } = self.sizes {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                errors.push(format!("partition.sizes.sigma must be non-negative (got {sigma})"));
            }
        }
        errors
    }
}

/// One client's share of the parent dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    /// Rows of the parent dataset, ascending.
    pub indices: Vec<usize>,
    pub data: Dataset,
}

impl ClientShard {
    pub fn n_k(&self) -> usize {
        self.data.len()
    }

    /// Wrap an already client-specific dataset (no parent).
    pub fn standalone(client_id: usize, data: Dataset) -> Self {
        ClientShard {
            client_id,
            indices: (0..data.len()).collect(),
            data,
        }
    }
}

/// Target example count per client, summing to `n`, each at least one.
fn target_sizes(n: usize, m: usize, mode: SizeMode, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if n < m {
        return Err(Error::Partition(format!(
            "{n} examples cannot give each of {m} clients at least one"
        )));
    }
    let mut sizes = match mode {
        SizeMode::Equal => vec![n / m; m],
        SizeMode::Lognormal { sigma } => {
            let dist =
                LogNormal::new(0.0, sigma).map_err(|e| Error::Partition(format!("lognormal sigma {sigma}: {e}")))?;
            let draws: Vec<f64> = (0..m).map(|_| dist.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            draws
                .iter()
                .map(|d| ((n as f64 * d / total).floor() as usize).max(1))
                .collect()
        }
    };
    rebalance(&mut sizes, n)?;
    Ok(sizes)
}

/// Adjust sizes to sum to `n`: surplus slots go to ascending ids, excess is
/// taken from the largest client (lowest id on ties) while it keeps ≥ 1.
fn rebalance(sizes: &mut [usize], n: usize) -> Result<()> {
    let m = sizes.len();
    let mut total: usize = sizes.iter().sum();
    let mut next = 0;
    while total < n {
        sizes[next % m] += 1;
        next += 1;
        total += 1;
    }
    while total > n {
        let (k, &largest) = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .unwrap();
        if largest <= 1 {
            return Err(Error::Partition("cannot shrink any client below one example".into()));
        }
        sizes[k] -= 1;
        total -= 1;
    }
    Ok(())
}

fn dirichlet(alpha: f64, classes: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Partition(format!("alpha {alpha}: {e}")))?;
    let draws: Vec<f64> = (0..classes).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        Ok(draws.into_iter().map(|g| g / total).collect())
    } else {
        Ok(vec![1.0 / classes as f64; classes])
    }
}

/// Client × class example counts for the Dirichlet regime.
fn dirichlet_counts(
    class_counts: &[usize],
    sizes: &[usize],
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>> {
    let m = sizes.len();
    let classes = class_counts.len();
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &size in sizes {
        let p = dirichlet(alpha, classes, rng)?;
        weights.push(p.into_iter().map(|q| q * size as f64).collect());
    }

    for _ in 0..SINKHORN_PASSES {
        for c in 0..classes {
            let col: f64 = weights.iter().map(|row| row[c]).sum();
            if col > 0.0 {
                let scale = class_counts[c] as f64 / col;
                weights.iter_mut().for_each(|row| row[c] *= scale);
            }
        }
        for (row, &size) in weights.iter_mut().zip(sizes) {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                let scale = size as f64 / total;
                row.iter_mut().for_each(|w| *w *= scale);
            }
        }
    }

    let mut counts = vec![vec![0usize; classes]; m];
    for c in 0..classes {
        let col: f64 = weights.iter().map(|row| row[c]).sum();
        let mut dealt = 0;
        for k in 0..m {
            let share = if col > 0.0 { weights[k][c] / col } else { 1.0 / m as f64 };
            let q = ((class_counts[c] as f64 * share).floor() as usize).min(class_counts[c] - dealt);
            counts[k][c] = q;
            dealt += q;
        }
        for k in 0..class_counts[c] - dealt {
            counts[k % m][c] += 1;
        }
    }

    // Clamp: every client keeps at least one example.
    for k in 0..m {
        if counts[k].iter().sum::<usize>() == 0 {
            let donor = (0..m)
                .max_by(|&a, &b| {
                    let (sa, sb) = (counts[a].iter().sum::<usize>(), counts[b].iter().sum::<usize>());
                    sa.cmp(&sb).then(b.cmp(&a))
                })
                .unwrap();
            if counts[donor].iter().sum::<usize>() <= 1 {
                return Err(Error::Partition(format!("client {k} would receive no examples")));
            }
            let c = (0..classes)
                .max_by_key(|&c| (counts[donor][c], std::cmp::Reverse(c)))
                .unwrap();
            counts[donor][c] -= 1;
            counts[k][c] += 1;
        }
    }
    Ok(counts)
}

/// Split `dataset` into `spec.clients` disjoint shards covering every row.
pub fn split(dataset: &Dataset, spec: &PartitionSpec) -> Result<Vec<ClientShard>> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    let m = spec.clients;
    let n = dataset.len();
    let mut rng = stream(spec.seed, Purpose::Partition, 0, 0);
    let sizes = target_sizes(n, m, spec.sizes, &mut rng)?;

    let mut assignments: Vec<Vec<usize>> = match spec.mode {
        LabelMode::Iid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut start = 0;
            sizes
                .iter()
                .map(|&s| {
                    let part = order[start..start + s].to_vec();
                    start += s;
                    part
                })
                .collect()
        }
        LabelMode::Dirichlet { alpha } => {
            let labels = dataset
                .labels()
                .ok_or_else(|| Error::Partition("Dirichlet label partitioning needs class labels".into()))?;
            let hist = dataset.label_histogram();
            if let Some(empty) = hist.iter().position(|&c| c == 0) {
                return Err(Error::Partition(format!("class {empty} has no examples")));
            }
            let counts = dirichlet_counts(&hist, &sizes, alpha, &mut rng)?;
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); hist.len()];
            for (i, &l) in labels.iter().enumerate() {
                by_class[l as usize].push(i);
            }
            let mut out = vec![Vec::new(); m];
            for (c, pool) in by_class.iter_mut().enumerate() {
                pool.shuffle(&mut rng);
                let mut start = 0;
                for k in 0..m {
                    let take = counts[k][c];
                    out[k].extend_from_slice(&pool[start..start + take]);
                    start += take;
                }
            }
            out
        }
    };

    Ok(assignments
        .iter_mut()
        .enumerate()
        .map(|(client_id, idx)| {
            idx.sort_unstable();
            ClientShard {
                client_id,
                data: dataset.subset(idx),
                indices: std::mem::take(idx),
            }
        })
        .collect())
}

/// Shard index lists as JSON, for audit.
pub fn export_json(shards: &[ClientShard]) -> String {
    #[derive(Serialize)]
    struct Entry<'a> {
        client_id: usize,
        n_k: usize,
        indices: &'a [usize],
    }
    let entries: Vec<Entry<'_>> = shards
        .iter()
        .map(|s| Entry {
            client_id: s.client_id,
            n_k: s.n_k(),
            indices: &s.indices,
        })
        .collect();
    serde_json::to_string(&entries).expect("shard export serialises")
}

fn normalized(hist: &[usize]) -> Vec<f64> {
    let total = hist.iter().sum::<usize>().max(1) as f64;
    hist.iter().map(|&c| c as f64 / total).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total-variation distance of a shard's label histogram from uniform.
pub fn tv_from_uniform(shard: &ClientShard) -> f64 {
    let p = normalized(&shard.data.label_histogram());
    let u = vec![1.0 / p.len() as f64; p.len()];
    total_variation(&p, &u)
}

/// Mean total-variation distance over all client pairs' label histograms.
pub fn mean_pairwise_tv(shards: &[ClientShard]) -> f64 {
    let hists: Vec<Vec<f64>> = shards.iter().map(|s| normalized(&s.data.label_histogram())).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..hists.len() {
        for j in i + 1..hists.len() {
            total += total_variation(&hists[i], &hists[j]);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}
