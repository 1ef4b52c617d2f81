//! Dataset containers and mini-batch views.

mod mnist;
mod synth;

pub use mnist::load_mnist_idx;
pub use synth::{make_regression_clients, make_synthetic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supervision attached to each row of a [`Dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes { labels: Vec<u32>, num_classes: usize },
    Real(Vec<f64>),
}

/// Row-major feature matrix plus targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    input_dim: usize,
    targets: Targets,
}

impl Dataset {
    pub fn classification(features: Vec<f64>, input_dim: usize, labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Config(format!("label {bad} outside [0, {num_classes})")));
        }
        Self::checked(features, input_dim, Targets::Classes { labels, num_classes })
    }

    pub fn regression(features: Vec<f64>, input_dim: usize, targets: Vec<f64>) -> Result<Self> {
        Self::checked(features, input_dim, Targets::Real(targets))
    }

    fn checked(features: Vec<f64>, input_dim: usize, targets: Targets) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        let rows = match &targets {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Real(y) => y.len(),
        };
        if features.len() != rows * input_dim {
            return Err(Error::Config(format!(
                "{} feature values do not form {rows} rows of width {input_dim}",
                features.len()
            )));
        }
        Ok(Dataset {
            features,
            input_dim,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Classes { num_classes, .. } => Some(*num_classes),
            Targets::Real(_) => None,
        }
    }

    pub fn labels(&self) -> Option<&[u32]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Real(_) => None,
        }
    }

    /// Class label of row `i`; regression datasets report 0.
    pub fn label(&self, i: usize) -> u32 {
        match &self.targets {
            Targets::Classes { labels, .. } => labels[i],
            Targets::Real(_) => 0,
        }
    }

    /// Real target of row `i`; classification datasets report the label as a real.
    pub fn target(&self, i: usize) -> f64 {
        match &self.targets {
            Targets::Classes { labels, .. } => labels[i] as f64,
            Targets::Real(y) => y[i],
        }
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let targets = match &self.targets {
            Targets::Classes { labels, num_classes } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                num_classes: *num_classes,
            },
            Targets::Real(y) => Targets::Real(indices.iter().map(|&i| y[i]).collect()),
        };
        Dataset {
            features,
            input_dim: self.input_dim,
            targets,
        }
    }

    /// Split into the first `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let head: Vec<usize> = (0..n.min(self.len())).collect();
        let tail: Vec<usize> = (n.min(self.len())..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    /// Per-class example counts (empty for regression data).
    pub fn label_histogram(&self) -> Vec<usize> {
        match &self.targets {
            Targets::Classes { labels, num_classes } => {
                let mut h = vec![0; *num_classes];
                for &l in labels {
                    h[l as usize] += 1;
                }
                h
            }
            Targets::Real(_) => Vec::new(),
        }
    }

    pub fn all(&self) -> Examples<'_> {
        Examples { data: self, idx: None }
    }

    pub fn batch<'a>(&'a self, batch: &'a Batch) -> Examples<'a> {
        Examples {
            data: self,
            idx: Some(&batch.0),
        }
    }
}

/// Index set selecting a mini-batch of a dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch(Vec<usize>);

impl Batch {
    /// Validates that indices are non-empty, unique and below `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("batch must contain at least one index".into()));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::Config(format!("batch index {i} out of range {n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("batch index {i} repeated")));
            }
        }
        Ok(Batch(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Either a whole dataset or a batch of it; what losses and gradients consume.
#[derive(Clone, Copy, Debug)]
pub struct Examples<'a> {
    data: &'a Dataset,
    idx: Option<&'a [usize]>,
}

impl<'a> Examples<'a> {
    pub fn len(&self) -> usize {
        self.idx.map_or(self.data.len(), <[usize]>::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.data
    }

    #[inline]
    pub fn index(&self, j: usize) -> usize {
        self.idx.map_or(j, |idx| idx[j])
    }

    #[inline]
    pub fn row(&self, j: usize) -> &'a [f64] {
        self.data.row(self.index(j))
    }

    #[inline]
    pub fn label(&self, j: usize) -> u32 {
        self.data.label(self.index(j))
    }

    #[inline]
    pub fn target(&self, j: usize) -> f64 {
        self.data.target(self.index(j))
    }
}

impl<'a> From<&'a Dataset> for Examples<'a> {
    fn from(data: &'a Dataset) -> Self {
        data.all()
    }
}
