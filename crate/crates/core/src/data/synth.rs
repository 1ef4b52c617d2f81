//! Seeded synthetic data for desk-scale runs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{stream, Purpose};

/// Gaussian class clusters with identity covariance.
///
/// Class `c` is centred at `class_separation * v_c`, where `v_c` is the
/// `c`-th unit axis when `num_classes <= input_dim` and a seeded random unit
/// vector otherwise. Labels are balanced (`i mod num_classes`) and then
/// shuffled.
pub fn make_synthetic(
    num_classes: usize,
    input_dim: usize,
    n: usize,
    class_separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 || input_dim == 0 {
        return Err(Error::Config(
            "synthetic data needs num_classes >= 2 and input_dim >= 1".into(),
        ));
    }
    if n < num_classes {
        return Err(Error::Config(format!(
            "synthetic data needs n >= num_classes ({n} < {num_classes})"
        )));
    }

    let mut rng = stream(seed, Purpose::Data, 0, 0);
    let directions: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| {
            if num_classes <= input_dim {
                let mut v = vec![0.0; input_dim];
                v[c] = 1.0;
                v
            } else {
                let v: Vec<f64> = (0..input_dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x / norm).collect()
            }
        })
        .collect();

    let mut labels: Vec<u32> = (0..n).map(|i| (i % num_classes) as u32).collect();
    labels.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n * input_dim);
    for &label in &labels {
        let centre = &directions[label as usize];
        for &c in centre {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(class_separation * c + noise);
        }
    }
    Dataset::classification(features, input_dim, labels, num_classes)
}

/// Per-client linear-regression datasets with client-specific ground truth.
///
/// Client `k` draws features `x ~ N(0, I)` and targets
/// `y = x·(w* + heterogeneity·u_k) + noise·z`, with `w*`, `u_k`, `z` standard
/// normal. Larger `heterogeneity` moves the client optima apart.
pub fn make_regression_clients(
    m: usize,
    input_dim: usize,
    n_per_client: usize,
    heterogeneity: f64,
    noise: f64,
    seed: u64,
) -> Result<Vec<Dataset>> {
    if m == 0 || input_dim == 0 || n_per_client == 0 {
        return Err(Error::Config(
            "regression clients need m, input_dim and n_per_client >= 1".into(),
        ));
    }
    let mut shared = stream(seed, Purpose::Data, 0, u64::MAX);
    let w_star: Vec<f64> = (0..input_dim).map(|_| shared.sample(StandardNormal)).collect();
    (0..m)
        .map(|k| {
            let mut rng = stream(seed, Purpose::Data, 1, k as u64);
            let w: Vec<f64> = w_star
                .iter()
                .map(|&w| w + heterogeneity * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut features = Vec::with_capacity(n_per_client * input_dim);
            let mut targets = Vec::with_capacity(n_per_client);
            for _ in 0..n_per_client {
                let x: Vec<f64> = (0..input_dim).map(|_| rng.sample(StandardNormal)).collect();
                let z: f64 = rng.sample(StandardNormal);
                targets.push(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + noise * z);
                features.extend(x);
            }
            Dataset::regression(features, input_dim, targets)
        })
        .collect()
}
