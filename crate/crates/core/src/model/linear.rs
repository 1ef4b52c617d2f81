//! Linear, binary logistic and softmax regression.

use super::{ModelKind, ModelSpec};
use crate::data::Examples;
use crate::param::ParamVector;

#[inline]
fn affine(w: &[f64], bias: Option<f64>, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias.unwrap_or(0.0)
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean loss; accumulates the mean gradient into `grad` when given.
pub(super) fn loss_and_grad(
    spec: &ModelSpec,
    theta: &[f64],
    data: &Examples<'_>,
    mut grad: Option<&mut ParamVector>,
) -> f64 {
    let d = spec.input_dim;
    let bias = spec.has_bias();
    let width = d + usize::from(bias);
    let inv_n = 1.0 / data.len() as f64;
    let mut total = 0.0;

    match spec.kind {
        ModelKind::LinearRegression { .. } | ModelKind::LogisticRegression { num_classes: 2, .. } => {
            let regression = matches!(spec.kind, ModelKind::LinearRegression { .. });
            let (w, b) = theta.split_at(d);
            let b = b.first().copied();
            for j in 0..data.len() {
                let x = data.row(j);
                let z = affine(w, b, x);
                let (l, dz) = if regression {
                    let r = z - data.target(j);
                    (0.5 * r * r, r)
                } else {
                    let y = data.label(j) as f64;
                    (softplus(z) - y * z, sigmoid(z) - y)
                };
                total += l;
                if let Some(g) = grad.as_deref_mut() {
                    let scale = dz * inv_n;
                    for (gi, xi) in g[..d].iter_mut().zip(x) {
                        *gi += scale * xi;
                    }
                    if bias {
                        g[d] += scale;
                    }
                }
            }
        }
        ModelKind::LogisticRegression { num_classes, .. } => {
            // theta = [W (K × d) row-major, b (K)]
            let (w, b) = theta.split_at(num_classes * d);
            let mut logits = vec![0.0; num_classes];
            for j in 0..data.len() {
                let x = data.row(j);
                for (c, z) in logits.iter_mut().enumerate() {
                    *z = affine(&w[c * d..(c + 1) * d], bias.then(|| b[c]), x);
                }
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                let lse = max + sum.ln();
                let y = data.label(j) as usize;
                total += lse - logits[y];
                if let Some(g) = grad.as_deref_mut() {
                    for (c, &z) in logits.iter().enumerate() {
                        let p = (z - lse).exp();
                        let dz = (p - if c == y { 1.0 } else { 0.0 }) * inv_n;
                        for (gi, xi) in g[c * d..(c + 1) * d].iter_mut().zip(x) {
                            *gi += dz * xi;
                        }
                        if bias {
                            g[num_classes * d + c] += dz;
                        }
                    }
                }
            }
            debug_assert_eq!(theta.len(), num_classes * width);
        }
        ModelKind::Mlp { .. } => unreachable!("MLPs are handled by the mlp module"),
    }
    total * inv_n
}

pub(super) fn predict(spec: &ModelSpec, theta: &[f64], data: &Examples<'_>) -> Vec<u32> {
    let d = spec.input_dim;
    let bias = spec.has_bias();
    match spec.kind {
        ModelKind::LogisticRegression { num_classes: 2, .. } => {
            let (w, b) = theta.split_at(d);
            (0..data.len())
                .map(|j| u32::from(affine(w, b.first().copied(), data.row(j)) > 0.0))
                .collect()
        }
        ModelKind::LogisticRegression { num_classes, .. } => {
            let (w, b) = theta.split_at(num_classes * d);
            (0..data.len())
                .map(|j| {
                    let x = data.row(j);
                    (0..num_classes)
                        .map(|c| affine(&w[c * d..(c + 1) * d], bias.then(|| b[c]), x))
                        .enumerate()
                        .fold(
                            (0usize, f64::NEG_INFINITY),
                            |best, (c, z)| {
                                if z > best.1 {
                                    (c, z)
                                } else {
                                    best
                                }
                            },
                        )
                        .0 as u32
                })
                .collect()
        }
        _ => unreachable!(),
    }
}
