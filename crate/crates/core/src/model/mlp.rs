//! Fully connected network with a softmax head.
//!
//! Parameters are stored layer by layer: `W` (outputs × inputs, row-major)
//! followed by `b` (outputs). Forward and backward passes operate on ndarray
//! views straight into the flat vector.

use std::ops::Range;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};

use super::Activation;
use crate::data::Examples;
use crate::param::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    pub fn bias_range(&self) -> Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn end(&self) -> usize {
        self.bias_range().end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpLayout {
    layers: Vec<LayerShape>,
}

/// One layer's parameters in matrix form.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl MlpLayout {
    pub fn new(input_dim: usize, hidden: &[usize], num_classes: usize) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(num_classes);
        let mut offset = 0;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let layer = LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    offset,
                };
                offset = layer.end();
                layer
            })
            .collect();
        MlpLayout { layers }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.last().map_or(0, LayerShape::end)
    }

    pub fn unflatten(&self, theta: &[f64]) -> Vec<LayerParams> {
        assert_eq!(theta.len(), self.param_count());
        self.layers
            .iter()
            .map(|l| LayerParams {
                weights: Array2::from_shape_vec((l.outputs, l.inputs), theta[l.weight_range()].to_vec())
                    .expect("layer shape"),
                bias: Array1::from(theta[l.bias_range()].to_vec()),
            })
            .collect()
    }

    pub fn flatten(&self, params: &[LayerParams]) -> ParamVector {
        let mut theta = ParamVector::zeros(self.param_count());
        for (l, p) in self.layers.iter().zip(params) {
            assert_eq!(p.weights.dim(), (l.outputs, l.inputs));
            for (dst, src) in theta[l.weight_range()].iter_mut().zip(p.weights.iter()) {
                *dst = *src;
            }
            theta[l.bias_range()].copy_from_slice(p.bias.as_slice().expect("contiguous bias"));
        }
        theta
    }

    fn weights<'a>(&self, l: usize, theta: &'a [f64]) -> ArrayView2<'a, f64> {
        let s = &self.layers[l];
        ArrayView2::from_shape((s.outputs, s.inputs), &theta[s.weight_range()]).expect("layer shape")
    }
}

fn gather(data: &Examples<'_>) -> Array2<f64> {
    let d = data.dataset().input_dim();
    let mut x = Array2::zeros((data.len(), d));
    for (j, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        row.as_slice_mut().expect("row-major").copy_from_slice(data.row(j));
    }
    x
}

/// Post-activation outputs of every layer; the last entry holds the logits.
fn forward(layout: &MlpLayout, act: Activation, theta: &[f64], x: Array2<f64>) -> Vec<Array2<f64>> {
    let n = x.nrows();
    let last = layout.layers.len() - 1;
    let mut acts = Vec::with_capacity(layout.layers.len() + 1);
    acts.push(x);
    for (l, shape) in layout.layers.iter().enumerate() {
        let w = layout.weights(l, theta);
        let b = &theta[shape.bias_range()];
        let mut z = Array2::zeros((n, shape.outputs));
        general_mat_mul(1.0, &acts[l], &w.t(), 0.0, &mut z);
        for mut row in z.axis_iter_mut(Axis(0)) {
            for (v, bias) in row.iter_mut().zip(b) {
                *v += bias;
                if l != last {
                    *v = match act {
                        Activation::Relu => v.max(0.0),
                        Activation::Tanh => v.tanh(),
                    };
                }
            }
        }
        acts.push(z);
    }
    acts
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub(super) fn loss(layout: &MlpLayout, act: Activation, theta: &[f64], data: &Examples<'_>) -> f64 {
    let acts = forward(layout, act, theta, gather(data));
    let logits = acts.last().unwrap();
    let total: f64 = logits
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(j, row)| {
            let row = row.as_slice().unwrap();
            log_sum_exp(row) - row[data.label(j) as usize]
        })
        .sum();
    total / data.len() as f64
}

pub(super) fn loss_and_grad(
    layout: &MlpLayout,
    act: Activation,
    theta: &[f64],
    data: &Examples<'_>,
    grad: &mut ParamVector,
) -> f64 {
    let n = data.len();
    let inv_n = 1.0 / n as f64;
    let acts = forward(layout, act, theta, gather(data));

    // dL/dlogits = (softmax − onehot) / n
    let mut delta = acts.last().unwrap().clone();
    let mut total = 0.0;
    for (j, mut row) in delta.axis_iter_mut(Axis(0)).enumerate() {
        let row = row.as_slice_mut().unwrap();
        let y = data.label(j) as usize;
        let lse = log_sum_exp(row);
        total += lse - row[y];
        for v in row.iter_mut() {
            *v = (*v - lse).exp() * inv_n;
        }
        row[y] -= inv_n;
    }

    for l in (0..layout.layers.len()).rev() {
        let shape = layout.layers[l];
        {
            let g = grad.as_mut_slice();
            let mut dw = ArrayViewMut2::from_shape((shape.outputs, shape.inputs), &mut g[shape.weight_range()])
                .expect("layer shape");
            general_mat_mul(1.0, &delta.t(), &acts[l], 0.0, &mut dw);
            for (gb, s) in g[shape.bias_range()].iter_mut().zip(delta.sum_axis(Axis(0)).iter()) {
                *gb = *s;
            }
        }
        if l > 0 {
            let w = layout.weights(l, theta);
            let mut back = Array2::zeros((n, shape.inputs));
            general_mat_mul(1.0, &delta, &w, 0.0, &mut back);
            back.zip_mut_with(&acts[l], |g, &a| {
                *g *= match act {
                    Activation::Relu => {
                        if a > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => 1.0 - a * a,
                }
            });
            delta = back;
        }
    }
    total * inv_n
}

pub(super) fn predict(layout: &MlpLayout, act: Activation, theta: &[f64], data: &Examples<'_>) -> Vec<u32> {
    let acts = forward(layout, act, theta, gather(data));
    acts.last()
        .unwrap()
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0usize, f64::NEG_INFINITY),
                    |best, (c, &z)| if z > best.1 { (c, z) } else { best },
                )
                .0 as u32
        })
        .collect()
}
