//! Differentiable models over flat parameter vectors.
//!
//! Every model exposes the mean per-example loss and its gradient with
//! respect to the flattened parameters. Classification losses are
//! cross-entropy; regression is half squared error, so a linear model's
//! Hessian is exactly `(1/n) XᵀX`.

mod linear;
mod mlp;

pub use mlp::{LayerParams, MlpLayout};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Examples;
use crate::error::{Error, Result};
use crate::param::ParamVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    /// `y ≈ x·w (+ b)` with loss `½(x·w + b − y)²`.
    LinearRegression {
        #[serde(default)]
        bias: bool,
    },
    /// Sigmoid head for two classes, softmax head otherwise.
    LogisticRegression {
        num_classes: usize,
        #[serde(default = "yes")]
        bias: bool,
    },
    /// Fully connected network with a softmax + cross-entropy head.
    Mlp {
        hidden: Vec<usize>,
        #[serde(default)]
        activation: Activation,
        num_classes: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
}

impl ModelSpec {
    pub fn linear(input_dim: usize, bias: bool) -> Self {
        ModelSpec {
            kind: ModelKind::LinearRegression { bias },
            input_dim,
        }
    }

    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::LogisticRegression {
                num_classes,
                bias: true,
            },
            input_dim,
        }
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>, num_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp {
                hidden,
                activation: Activation::Relu,
                num_classes,
            },
            input_dim,
        }
    }

    /// The MNIST network: 784 → 200 → 100 → 10.
    pub fn mnist_mlp() -> Self {
        Self::mlp(784, vec![200, 100], 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("model.input_dim must be positive".into()));
        }
        match &self.kind {
            ModelKind::LinearRegression { .. } => Ok(()),
            ModelKind::LogisticRegression { num_classes, .. } if *num_classes < 2 => {
                Err(Error::Config("model.num_classes must be at least 2".into()))
            }
            ModelKind::LogisticRegression { .. } => Ok(()),
            ModelKind::Mlp {
                hidden, num_classes, ..
            } => {
                if hidden.is_empty() || hidden.contains(&0) {
                    Err(Error::Config(
                        "model.hidden must list at least one positive layer width".into(),
                    ))
                } else if *num_classes < 2 {
                    Err(Error::Config("model.num_classes must be at least 2".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, ModelKind::Mlp { .. })
    }

    pub fn is_classifier(&self) -> bool {
        !matches!(self.kind, ModelKind::LinearRegression { .. })
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.kind {
            ModelKind::LinearRegression { .. } => None,
            ModelKind::LogisticRegression { num_classes, .. } | ModelKind::Mlp { num_classes, .. } => {
                Some(*num_classes)
            }
        }
    }

    pub fn has_bias(&self) -> bool {
        match &self.kind {
            ModelKind::LinearRegression { bias } | ModelKind::LogisticRegression { bias, .. } => *bias,
            ModelKind::Mlp { .. } => true,
        }
    }

    pub fn param_count(&self) -> usize {
        let width = self.input_dim + usize::from(self.has_bias());
        match &self.kind {
            ModelKind::LinearRegression { .. } => width,
            ModelKind::LogisticRegression { num_classes: 2, .. } => width,
            ModelKind::LogisticRegression { num_classes, .. } => num_classes * width,
            ModelKind::Mlp { .. } => self.mlp_layout().param_count(),
        }
    }

    pub fn mlp_layout(&self) -> MlpLayout {
        match &self.kind {
            ModelKind::Mlp {
                hidden, num_classes, ..
            } => MlpLayout::new(self.input_dim, hidden, *num_classes),
            _ => panic!("mlp_layout called on a non-MLP model"),
        }
    }

    /// Initial parameters: zeros for linear models, fan-in scaled uniform
    /// weights (He for ReLU, Glorot for tanh) and zero biases for MLPs.
    pub fn init_params(&self, rng: &mut impl Rng) -> ParamVector {
        match &self.kind {
            ModelKind::Mlp { activation, .. } => {
                let layout = self.mlp_layout();
                let mut theta = ParamVector::zeros(layout.param_count());
                for layer in layout.layers() {
                    let bound = match activation {
                        Activation::Relu => (6.0 / layer.inputs as f64).sqrt(),
                        Activation::Tanh => (6.0 / (layer.inputs + layer.outputs) as f64).sqrt(),
                    };
                    for w in &mut theta[layer.weight_range()] {
                        *w = rng.random_range(-bound..bound);
                    }
                }
                theta
            }
            _ => ParamVector::zeros(self.param_count()),
        }
    }

    fn check(&self, theta: &[f64], data: &Examples<'_>) -> Result<()> {
        let expected = self.param_count();
        if theta.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: theta.len(),
            });
        }
        if data.dataset().input_dim() != self.input_dim {
            return Err(Error::Config(format!(
                "model expects input_dim {}, data has {}",
                self.input_dim,
                data.dataset().input_dim()
            )));
        }
        if self.is_classifier() != data.dataset().num_classes().is_some() {
            return Err(Error::Config(
                "model head and dataset targets disagree (classification vs regression)".into(),
            ));
        }
        if data.is_empty() {
            return Err(Error::Config("loss over zero examples".into()));
        }
        Ok(())
    }
}

/// Mean per-example loss.
pub fn loss<'a>(spec: &ModelSpec, theta: &[f64], data: impl Into<Examples<'a>>) -> Result<f64> {
    let data = data.into();
    spec.check(theta, &data)?;
    Ok(match &spec.kind {
        ModelKind::Mlp { activation, .. } => mlp::loss(&spec.mlp_layout(), *activation, theta, &data),
        _ => linear::loss_and_grad(spec, theta, &data, None),
    })
}

/// Gradient of the mean loss.
pub fn grad<'a>(spec: &ModelSpec, theta: &[f64], data: impl Into<Examples<'a>>) -> Result<ParamVector> {
    Ok(loss_and_grad(spec, theta, data)?.1)
}

pub fn loss_and_grad<'a>(spec: &ModelSpec, theta: &[f64], data: impl Into<Examples<'a>>) -> Result<(f64, ParamVector)> {
    let data = data.into();
    spec.check(theta, &data)?;
    let mut g = ParamVector::zeros(theta.len());
    let l = match &spec.kind {
        ModelKind::Mlp { activation, .. } => mlp::loss_and_grad(&spec.mlp_layout(), *activation, theta, &data, &mut g),
        _ => linear::loss_and_grad(spec, theta, &data, Some(&mut g)),
    };
    Ok((l, g))
}

/// Predicted class per example (classifiers only).
pub fn predict<'a>(spec: &ModelSpec, theta: &[f64], data: impl Into<Examples<'a>>) -> Result<Vec<u32>> {
    let data = data.into();
    spec.check(theta, &data)?;
    Ok(match &spec.kind {
        ModelKind::LinearRegression { .. } => return Err(Error::Config("predict needs a classification model".into())),
        ModelKind::Mlp { activation, .. } => mlp::predict(&spec.mlp_layout(), *activation, theta, &data),
        _ => linear::predict(spec, theta, &data),
    })
}

/// Fraction of correctly classified examples.
pub fn accuracy<'a>(spec: &ModelSpec, theta: &[f64], data: impl Into<Examples<'a>>) -> Result<f64> {
    let data = data.into();
    let predicted = predict(spec, theta, data)?;
    let hits = predicted
        .iter()
        .enumerate()
        .filter(|&(j, &p)| p == data.label(j))
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Step of the central differences in [`gradient_check`].
pub const FD_STEP: f64 = 1e-6;

/// `‖g − g_fd‖ / ‖g_fd‖` between the analytic gradient and central
/// differences of the loss (step [`FD_STEP`]).
pub fn gradient_check<'a>(spec: &ModelSpec, theta: &[f64], data: impl Into<Examples<'a>>) -> Result<f64> {
    let data = data.into();
    let g = grad(spec, theta, data)?;
    let mut probe = theta.to_vec();
    let (mut diff, mut scale) = (0.0, 0.0);
    for i in 0..theta.len() {
        probe[i] = theta[i] + FD_STEP;
        let up = loss(spec, &probe, data)?;
        probe[i] = theta[i] - FD_STEP;
        let down = loss(spec, &probe, data)?;
        probe[i] = theta[i];
        let fd = (up - down) / (2.0 * FD_STEP);
        diff += (g[i] - fd) * (g[i] - fd);
        scale += fd * fd;
    }
    Ok(diff.sqrt() / scale.sqrt().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Batch, Dataset};

    #[test]
    fn parameter_counts() {
        assert_eq!(ModelSpec::linear(3, false).param_count(), 3);
        assert_eq!(ModelSpec::linear(3, true).param_count(), 4);
        assert_eq!(ModelSpec::logistic(3, 2).param_count(), 4);
        assert_eq!(ModelSpec::logistic(3, 4).param_count(), 16);
        assert_eq!(
            ModelSpec::mnist_mlp().param_count(),
            784 * 200 + 200 + 200 * 100 + 100 + 100 * 10 + 10
        );
    }

    #[test]
    fn zero_residual_is_zero_loss() {
        let d = Dataset::regression(vec![1.0, -2.0, 0.5, 3.0], 2, vec![0.0, 0.0]).unwrap();
        let spec = ModelSpec::linear(2, true);
        assert_eq!(loss(&spec, &[0.0; 3], &d).unwrap(), 0.0);
    }

    #[test]
    fn uniform_logistic_is_ln2() {
        let d = Dataset::classification(vec![0.3, -1.0, 2.0, 0.1, 5.0, 5.0], 2, vec![0, 1, 1], 2).unwrap();
        let l = loss(&ModelSpec::logistic(2, 2), &[0.0; 3], &d).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let l3 = loss(&ModelSpec::logistic(2, 3), &[0.0; 9], &d).unwrap();
        assert!((l3 - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn half_squared_norm_has_identity_gradient() {
        // Rows sqrt(n)·e_i with zero targets make the loss exactly ½‖θ‖².
        let n = 3;
        let s = (n as f64).sqrt();
        let mut x = vec![0.0; n * n];
        for i in 0..n {
            x[i * n + i] = s;
        }
        let d = Dataset::regression(x, n, vec![0.0; n]).unwrap();
        let theta = [0.7, -1.3, 2.0];
        let (l, g) = loss_and_grad(&ModelSpec::linear(n, false), &theta, &d).unwrap();
        assert!((l - 0.5 * (0.49 + 1.69 + 4.0)).abs() < 1e-12);
        for (a, b) in g.iter().zip(theta) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_logistic_bias_gradient_vanishes_at_zero() {
        let d = Dataset::classification(vec![1.0, 2.0, -0.5, 4.0], 1, vec![0, 1, 0, 1], 2).unwrap();
        let g = grad(&ModelSpec::logistic(1, 2), &[0.0, 0.0], &d).unwrap();
        assert_eq!(g[1], 0.0);
        let g3 = grad(&ModelSpec::logistic(1, 3), &[0.0; 6], &d).unwrap();
        // Softmax bias gradients are mean(p_c − 1[y=c]) = 1/3 − ½ for the two
        // populated classes and 1/3 for the empty one; they sum to zero.
        assert!((g3[3..].iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = Dataset::regression(vec![1.0], 1, vec![1.0]).unwrap();
        assert!(matches!(
            loss(&ModelSpec::linear(1, true), &[0.0], &d),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn loss_is_permutation_invariant_over_batch() {
        let d = crate::data::make_synthetic(3, 4, 12, 1.0, 3).unwrap();
        let spec = ModelSpec::mlp(4, vec![5], 3);
        let theta = spec.init_params(&mut crate::seed::stream(1, crate::seed::Purpose::Init, 0, 0));
        let a = Batch::new(vec![0, 3, 5, 7, 9], 12).unwrap();
        let b = Batch::new(vec![9, 5, 0, 7, 3], 12).unwrap();
        let la = loss(&spec, &theta, d.batch(&a)).unwrap();
        let lb = loss(&spec, &theta, d.batch(&b)).unwrap();
        assert!((la - lb).abs() <= 1e-15 * la.abs().max(1.0));
    }
}
