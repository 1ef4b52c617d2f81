//! Client-side solvers for one round.
//!
//! Every variant minimises the same elastic-net regularised local objective
//!
//! ```text
//! L_k(θ) + ⟨lin, θ⟩ + (λ2/2)‖θ − anchor‖² + λ1‖θ − anchor‖₁
//! ```
//!
//! where `lin` is zero (FedAvg/FedProx), `c − c_k` (SCAFFOLD) or
//! `−∇L_k(θ_k^{t−1})` (FedDyn). The default inner step is mini-batch SGD with
//! the ℓ1 subgradient `λ1·sign(θ − anchor)`, `sign(0) = 0`. A proximal inner
//! step (soft-thresholding toward the anchor) is available for the plain and
//! FedDyn variants. Terms whose coefficient is zero are skipped entirely, so
//! a `λ1 = 0` solve runs exactly the unregularised code path.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Batch, Dataset};
use crate::error::{Error, Result};
use crate::model::{self, ModelSpec};
use crate::param::{sign0, ParamVector};

/// Objective growth factor that aborts a local solve.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Smallest reference value the growth factor is applied to. Without it a
/// client whose loss is already near zero trips the rule on SGD noise.
pub const DIVERGENCE_FLOOR: f64 = 1.0;

/// Algorithm-specific linear correction carried into a local solve.
#[derive(Clone, Copy, Debug)]
pub enum LocalVariant<'a> {
    Plain,
    Scaffold {
        client_control: &'a [f64],
        server_control: &'a [f64],
    },
    FedDyn {
        grad_cache: &'a [f64],
    },
}

#[derive(Clone, Copy, Debug)]
pub struct LocalProblem<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a Dataset,
    /// The model received from the server (θ^{t−1}).
    pub anchor: &'a [f64],
    pub lambda1: f64,
    pub lambda2: f64,
    pub variant: LocalVariant<'a>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStep {
    #[default]
    Subgradient,
    Proximal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBudget {
    pub epochs: usize,
    pub batch_size: usize,
    pub local_lr: f64,
    /// SCAFFOLD local steps per round; defaults to `epochs · ⌈n_k / batch_size⌉`.
    #[serde(default)]
    pub scaffold_steps: Option<usize>,
    #[serde(default)]
    pub inner_step: InnerStep,
}

impl SolveBudget {
    pub fn new(epochs: usize, batch_size: usize, local_lr: f64) -> Self {
        SolveBudget {
            epochs,
            batch_size,
            local_lr,
            scaffold_steps: None,
            inner_step: InnerStep::Subgradient,
        }
    }

    pub fn proximal(mut self) -> Self {
        self.inner_step = InnerStep::Proximal;
        self
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.epochs == 0 {
            errors.push("algorithm.epochs must be positive".into());
        }
        if self.batch_size == 0 {
            errors.push("algorithm.batch_size must be positive".into());
        }
        if !(self.local_lr > 0.0 && self.local_lr.is_finite()) {
            errors.push(format!("algorithm.local_lr must be positive (got {})", self.local_lr));
        }
        if self.scaffold_steps == Some(0) {
            errors.push("algorithm.scaffold_steps must be positive".into());
        }
        errors
    }

    fn batches_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

/// `sign(v)·max(|v| − τ, 0)`, the minimiser of `½(x − v)² + τ|x|`.
#[inline]
pub fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

impl LocalProblem<'_> {
    fn check(&self) -> Result<()> {
        let d = self.spec.param_count();
        let lens = [
            Some(self.anchor.len()),
            match self.variant {
                LocalVariant::Plain => None,
                LocalVariant::Scaffold { client_control, .. } => Some(client_control.len()),
                LocalVariant::FedDyn { grad_cache } => Some(grad_cache.len()),
            },
            match self.variant {
                LocalVariant::Scaffold { server_control, .. } => Some(server_control.len()),
                _ => None,
            },
        ];
        for got in lens.into_iter().flatten() {
            if got != d {
                return Err(Error::Dimension { expected: d, got });
            }
        }
        Ok(())
    }

    /// Adds the variant's linear term to `g`.
    fn add_linear(&self, g: &mut [f64]) {
        match self.variant {
            LocalVariant::Plain => {}
            LocalVariant::Scaffold {
                client_control,
                server_control,
            } => {
                for ((gi, ck), c) in g.iter_mut().zip(client_control).zip(server_control) {
                    *gi = *gi - ck + c;
                }
            }
            LocalVariant::FedDyn { grad_cache } => {
                for (gi, h) in g.iter_mut().zip(grad_cache) {
                    *gi -= h;
                }
            }
        }
    }

    fn linear_value(&self, theta: &[f64]) -> f64 {
        match self.variant {
            LocalVariant::Plain => 0.0,
            LocalVariant::Scaffold {
                client_control,
                server_control,
            } => theta
                .iter()
                .zip(client_control.iter().zip(server_control))
                .map(|(t, (ck, c))| t * (c - ck))
                .sum(),
            LocalVariant::FedDyn { grad_cache } => -theta.iter().zip(grad_cache).map(|(t, h)| t * h).sum::<f64>(),
        }
    }

    /// Gradient of everything except the ℓ1 term on one batch (or all data).
    fn smooth_direction(&self, theta: &[f64], batch: Option<&Batch>) -> Result<ParamVector> {
        let mut g = match batch {
            Some(b) => model::grad(self.spec, theta, self.data.batch(b))?,
            None => model::grad(self.spec, theta, self.data)?,
        };
        self.add_linear(&mut g);
        if self.lambda2 != 0.0 {
            for ((gi, t), a) in g.iter_mut().zip(theta).zip(self.anchor) {
                *gi += self.lambda2 * (t - a);
            }
        }
        Ok(g)
    }
}

/// Value of the local objective at `theta` over the client's full data.
pub fn local_objective(problem: &LocalProblem<'_>, theta: &[f64]) -> Result<f64> {
    problem.check()?;
    let mut value = model::loss(problem.spec, theta, problem.data)? + problem.linear_value(theta);
    if problem.lambda2 != 0.0 || problem.lambda1 != 0.0 {
        let (mut sq, mut abs) = (0.0, 0.0);
        for (t, a) in theta.iter().zip(problem.anchor) {
            let d = t - a;
            sq += d * d;
            abs += d.abs();
        }
        value += 0.5 * problem.lambda2 * sq + problem.lambda1 * abs;
    }
    Ok(value)
}

/// The local objective shifted by the constant `−⟨lin, anchor⟩`, so it
/// equals `L_k(anchor)` at the anchor. The divergence rule compares against
/// this form because the raw linear term has an arbitrary offset.
fn anchored_objective(problem: &LocalProblem<'_>, theta: &[f64]) -> Result<f64> {
    Ok(local_objective(problem, theta)? - problem.linear_value(problem.anchor))
}

struct DivergenceGuard {
    initial: f64,
    lr: f64,
}

impl DivergenceGuard {
    fn new(problem: &LocalProblem<'_>, theta: &[f64], lr: f64) -> Result<Self> {
        Ok(DivergenceGuard {
            initial: anchored_objective(problem, theta)?,
            lr,
        })
    }

    /// Cheap per-epoch test: abort as soon as the iterate stops being finite.
    fn check_finite(&self, theta: &[f64]) -> Result<()> {
        if theta.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Diverged {
                lr: self.lr,
                initial: self.initial,
                objective: f64::NAN,
            })
        }
    }

    /// Final test on the returned iterate. Mini-batch noise can spike the
    /// objective transiently, so the 10x rule applies to the result only.
    fn check(&self, problem: &LocalProblem<'_>, theta: &[f64]) -> Result<()> {
        let objective = anchored_objective(problem, theta)?;
        let limit = DIVERGENCE_FACTOR * self.initial.abs().max(DIVERGENCE_FLOOR);
        if !objective.is_finite() || objective > limit || !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                lr: self.lr,
                initial: self.initial,
                objective,
            });
        }
        Ok(())
    }
}

/// One inner update of `theta` along the smooth direction `g`.
fn inner_update(problem: &LocalProblem<'_>, theta: &mut [f64], g: &[f64], lr: f64, step: InnerStep) {
    let l1 = problem.lambda1;
    match step {
        InnerStep::Subgradient => {
            if l1 != 0.0 {
                for ((t, gi), a) in theta.iter_mut().zip(g).zip(problem.anchor) {
                    *t -= lr * (gi + l1 * sign0(*t - a));
                }
            } else {
                for (t, gi) in theta.iter_mut().zip(g) {
                    *t -= lr * gi;
                }
            }
        }
        InnerStep::Proximal => {
            for ((t, gi), a) in theta.iter_mut().zip(g).zip(problem.anchor) {
                let v = *t - lr * gi;
                *t = a + soft_threshold(v - a, lr * l1);
            }
        }
    }
}

/// Splits one shuffled epoch into `⌈n / batch_size⌉` batches whose sizes
/// differ by at most one (larger batches first), so no step ever runs on a
/// lone leftover example.
pub fn epoch_batches(order: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    let n = order.len();
    let count = n.div_ceil(batch_size.max(1));
    let (base, extra) = n.checked_div(count).map_or((0, 0), |b| (b, n % count));
    let mut start = 0;
    (0..count).map(move |i| {
        let len = base + usize::from(i < extra);
        let chunk = &order[start..start + len];
        start += len;
        chunk
    })
}

/// Approximate minimiser of the local objective by `epochs` passes of
/// shuffled mini-batch steps starting from the anchor.
pub fn solve_local(problem: &LocalProblem<'_>, budget: &SolveBudget, rng: &mut impl Rng) -> Result<ParamVector> {
    problem.check()?;
    let n = problem.data.len();
    let mut theta = ParamVector::from_vec(problem.anchor.to_vec());
    let guard = DivergenceGuard::new(problem, &theta, budget.local_lr)?;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..budget.epochs {
        order.shuffle(rng);
        for chunk in epoch_batches(&order, budget.batch_size) {
            let batch = Batch::new(chunk.to_vec(), n)?;
            let g = problem.smooth_direction(&theta, Some(&batch))?;
            inner_update(problem, &mut theta, &g, budget.local_lr, budget.inner_step);
        }
        guard.check_finite(&theta)?;
    }
    guard.check(problem, &theta)?;
    Ok(theta)
}

/// SCAFFOLD local pass: `B` corrected steps, then the new client control
/// variate `c_k − c + (anchor − θ_k)/(B·η_l)`.
pub fn scaffold_local_pass(
    problem: &LocalProblem<'_>,
    budget: &SolveBudget,
    rng: &mut impl Rng,
) -> Result<(ParamVector, ParamVector)> {
    problem.check()?;
    let LocalVariant::Scaffold {
        client_control,
        server_control,
    } = problem.variant
    else {
        return Err(Error::Config("scaffold_local_pass needs the scaffold variant".into()));
    };
    let n = problem.data.len();
    let per_epoch = budget.batches_per_epoch(n);
    let steps = budget.scaffold_steps.unwrap_or(budget.epochs * per_epoch);
    let mut theta = ParamVector::from_vec(problem.anchor.to_vec());
    let guard = DivergenceGuard::new(problem, &theta, budget.local_lr)?;

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch: Vec<Vec<usize>> = Vec::new();
    for step in 0..steps {
        if step % per_epoch == 0 {
            order.shuffle(rng);
            epoch = epoch_batches(&order, budget.batch_size)
                .map(<[usize]>::to_vec)
                .collect();
            epoch.reverse();
        }
        let batch = Batch::new(epoch.pop().expect("one batch per step"), n)?;
        let g = problem.smooth_direction(&theta, Some(&batch))?;
        inner_update(problem, &mut theta, &g, budget.local_lr, InnerStep::Subgradient);
        if (step + 1) % per_epoch == 0 {
            guard.check_finite(&theta)?;
        }
    }
    guard.check(problem, &theta)?;

    let scale = 1.0 / (steps as f64 * budget.local_lr);
    let c_new: Vec<f64> = client_control
        .iter()
        .zip(server_control)
        .zip(problem.anchor.iter().zip(theta.iter()))
        .map(|((ck, c), (a, t))| ck - c + scale * (a - t))
        .collect();
    Ok((theta, c_new.into()))
}

/// FedDyn gradient-cache update from the first-order condition:
/// `cache − λ2·Δ − λ1·sign(Δ)` with `Δ = θ_k − anchor`.
pub fn feddyn_grad_cache_update(
    grad_cache: &[f64],
    theta_k: &[f64],
    anchor: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> ParamVector {
    grad_cache
        .iter()
        .zip(theta_k.iter().zip(anchor))
        .map(|(h, (t, a))| {
            let delta = t - a;
            let mut v = h - lambda2 * delta;
            if lambda1 != 0.0 {
                v -= lambda1 * sign0(delta);
            }
            v
        })
        .collect::<Vec<_>>()
        .into()
}

/// Per-coordinate first-order residual of the local objective at `theta`.
///
/// Away from the ℓ1 kink this is the full gradient including
/// `λ1·sign(θ − anchor)`. Where `θ_i = anchor_i` it is the distance of the
/// smooth gradient from the subdifferential interval `[−λ1, λ1]`.
pub fn first_order_residual(problem: &LocalProblem<'_>, theta: &[f64]) -> Result<ParamVector> {
    problem.check()?;
    let g = problem.smooth_direction(theta, None)?;
    Ok(g.iter()
        .zip(theta.iter().zip(problem.anchor))
        .map(|(gi, (t, a))| {
            let delta = t - a;
            if delta != 0.0 {
                gi + problem.lambda1 * sign0(delta)
            } else {
                (gi.abs() - problem.lambda1).max(0.0)
            }
        })
        .collect::<Vec<_>>()
        .into())
}
