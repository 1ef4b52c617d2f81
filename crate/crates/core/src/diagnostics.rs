//! Executable checks of the convergence analysis.
//!
//! Everything here works in convex mode (linear or logistic models) where a
//! global optimum `θ*` can be computed to high precision:
//!
//! * the FedDyn identities `h^t = (1/m)Σ_k cache_k` and
//!   `γ^t = θ^t + h^t/λ2`,
//! * the theorem constants `κ`, `κ0`, `κ'` and the `λ1` floor,
//! * per-round traces of the running-average risk gap, `C_t`, and (heavy
//!   mode) `ε_t` and the sign term,
//! * the concentration of averaged Rademacher signs,
//! * a diagonal-quadratic client family whose FedAvg fixed point has a
//!   closed form.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{self, ModelKind, ModelSpec};
use crate::param::{sign0, ParamVector};
use crate::partition::ClientShard;
use crate::protocol::{ExperimentResult, Family, Federation, ProtocolConfig, RoundRecord, Simulation, VariantState};
use crate::seed::{stream, Purpose};
use crate::solver::{solve_local, LocalProblem, LocalVariant};

/// Default tolerance on `‖∇R(θ*)‖∞`.
pub const OPTIMUM_TOLERANCE: f64 = 1e-10;

/// `‖h − (1/m)Σ_k cache_k‖∞`.
pub fn verify_h_identity(state: &crate::protocol::ServerState) -> Result<f64> {
    state.h_identity_deviation()
}

/// Constants of the FedDyn+EN convergence bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoremConstants {
    pub beta: f64,
    pub lambda2: f64,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    pub kappa: f64,
    pub kappa0: f64,
    pub kappa_prime: f64,
}

impl TheoremConstants {
    /// Requires `λ2 > 27β` (strict).
    pub fn compute(beta: f64, lambda2: f64, m: usize, p: usize, d: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Precondition(format!("beta must be positive (got {beta})")));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
        if !(lambda2 > 27.0 * beta) {
            return Err(Error::Precondition(format!(
                "the convergence bound assumes lambda2 > 27*beta; got lambda2 = {lambda2}, 27*beta = {}",
                27.0 * beta
            )));
        }
        if m == 0 || p == 0 || p > m {
            return Err(Error::Precondition(format!("need 1 <= P <= m (got P = {p}, m = {m})")));
        }
        let (l, b) = (lambda2, beta);
        let denom = l * l - 25.0 * b * b;
        let kappa = 10.0 * m as f64 / p as f64 / l * (l + b) / denom;
        let kappa0 = 2.0 / l * (l * l - 25.0 * l * b - 50.0 * b * b) / denom;
        let kappa_prime = 5.0 / l * (l + b) / denom;
        let consts = TheoremConstants {
            beta,
            lambda2,
            m,
            p,
            d,
            kappa,
            kappa0,
            kappa_prime,
        };
        let cross = kappa * p as f64 / (2.0 * m as f64);
        if (cross - kappa_prime).abs() > 1e-12 * kappa_prime.abs().max(1.0) {
            return Err(Error::Diagnostic(format!(
                "kappa' = {kappa_prime} disagrees with kappa*P/(2m) = {cross}"
            )));
        }
        Ok(consts)
    }

    /// `κ'λ1²d/κ0`, the part of the bound that does not vanish with `T`.
    pub fn floor(&self, lambda1: f64) -> f64 {
        self.kappa_prime * lambda1 * lambda1 * self.d as f64 / self.kappa0
    }

    /// `(1/(T κ0))·(‖γ^0 − θ*‖² + κ·C0) + floor`.
    pub fn bound(&self, t: usize, gamma0_dist_sq: f64, c0: f64, lambda1: f64) -> f64 {
        (gamma0_dist_sq + self.kappa * c0) / (t as f64 * self.kappa0) + self.floor(lambda1)
    }
}

/// Largest eigenvalue of `(1/n)X̃ᵀX̃` (X̃ = features plus a ones column when
/// the model has a bias) by power iteration.
pub fn gram_max_eigenvalue(data: &Dataset, bias: bool) -> f64 {
    let n = data.len();
    let d = data.input_dim() + usize::from(bias);
    if n == 0 || d == 0 {
        return 0.0;
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for i in 0..n {
            let row = data.row(i);
            let mut xv: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            if bias {
                xv += v[d - 1];
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xv;
            }
            if bias {
                out[d - 1] += xv;
            }
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        out
    };
    // Deterministic start with every coordinate represented.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
    let mut estimate = 0.0;
    for _ in 0..10_000 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let w = apply(&v);
        let rayleigh: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        v = w;
        if (rayleigh - estimate).abs() <= 1e-14 * rayleigh.abs().max(1e-300) {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

/// Smoothness constant of one client's loss. Linear regression: the Gram
/// eigenvalue. Binary logistic: a quarter of it. Softmax: half of it (the
/// logit Hessian `diag(p) − ppᵀ` has spectral norm at most ½).
pub fn estimate_beta(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    let gram = gram_max_eigenvalue(data, spec.has_bias());
    match &spec.kind {
        ModelKind::LinearRegression { .. } => Ok(gram),
        ModelKind::LogisticRegression { num_classes, .. } if *num_classes == 2 => Ok(0.25 * gram),
        ModelKind::LogisticRegression { .. } => Ok(0.5 * gram),
        ModelKind::Mlp { .. } => Err(Error::Diagnostic(
            "smoothness estimates need a convex model (linear or logistic regression); switch to convex mode".into(),
        )),
    }
}

/// `max_k β_k` over the federation.
pub fn federation_beta(fed: &Federation) -> Result<f64> {
    let mut beta: f64 = 0.0;
    for shard in &fed.shards {
        beta = beta.max(estimate_beta(&fed.spec, &shard.data)?);
    }
    Ok(beta)
}

fn global_gradient(fed: &Federation, theta: &[f64]) -> Result<(f64, ParamVector)> {
    let n = fed.total_examples() as f64;
    let mut loss = 0.0;
    let mut grad = ParamVector::zeros(theta.len());
    for shard in &fed.shards {
        let w = shard.n_k() as f64 / n;
        let (l, g) = model::loss_and_grad(&fed.spec, theta, &shard.data)?;
        loss += w * l;
        grad.axpy(w, &g);
    }
    Ok((loss, grad))
}

/// `θ* = argmin R` by full-batch gradient descent with step `1/β_R`, stopped
/// once `‖∇R‖∞ ≤ tolerance`.
pub fn solve_global_optimum(fed: &Federation, tolerance: f64) -> Result<ParamVector> {
    if !fed.spec.is_convex() {
        return Err(Error::Diagnostic(
            "the global optimum oracle needs a convex model; switch to convex mode".into(),
        ));
    }
    let n = fed.total_examples() as f64;
    // Smoothness of the weighted sum: Σ (n_k/n)·β_k bounds it.
    let mut beta = 0.0;
    for shard in &fed.shards {
        beta += shard.n_k() as f64 / n * estimate_beta(&fed.spec, &shard.data)?;
    }
    if beta <= 0.0 {
        return Err(Error::Diagnostic("degenerate design: zero smoothness".into()));
    }
    let step = 1.0 / beta;
    let mut theta = ParamVector::zeros(fed.spec.param_count());
    const MAX_ITERS: usize = 2_000_000;
    for _ in 0..MAX_ITERS {
        let (_, g) = global_gradient(fed, &theta)?;
        if g.max_abs() <= tolerance {
            return Ok(theta);
        }
        theta.axpy(-step, &g);
    }
    let (_, g) = global_gradient(fed, &theta)?;
    Err(Error::Diagnostic(format!(
        "gradient descent for the global optimum stopped at ‖∇R‖∞ = {:.3e} after {MAX_ITERS} iterations",
        g.max_abs()
    )))
}

/// One row of a convergence trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceEntry {
    pub round: usize,
    pub gamma_deviation: Option<f64>,
    /// `R(γ̄_t) − R(θ*)` with `γ̄_t = (1/t)Σ_{s<t} γ^s`.
    pub risk_gap: f64,
    /// `R(γ^t) − R(θ*)`.
    pub iterate_gap: f64,
    /// `(1/m)Σ_k ‖∇L_k(θ_k^t) − ∇L_k(θ*)‖²`.
    pub c_t: Option<f64>,
    /// Same with the unsquared norm.
    pub c_t_unsquared: Option<f64>,
    pub eps_t: Option<f64>,
    pub sign_term: Option<f64>,
    pub h_deviation: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvergenceTrace {
    pub risk_star: f64,
    pub gamma0_dist_sq: f64,
    /// `C_0` with squared and with plain norms.
    pub c0_squared: f64,
    pub c0_unsquared: f64,
    pub entries: Vec<TraceEntry>,
}

impl ConvergenceTrace {
    pub fn entry(&self, round: usize) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.round == round)
    }
}

/// Client models `θ_k^t` as the diagnostics see them: FedDyn keeps them; for
/// the other families every client is taken to hold the server model.
fn client_models(state: &crate::protocol::ServerState, m: usize) -> Vec<&ParamVector> {
    match &state.variant {
        VariantState::FedDyn { client_models, .. } => client_models.iter().collect(),
        _ => vec![&state.theta; m],
    }
}

/// `γ^t`: the mean of the latest client models for FedDyn (via the identity
/// `θ^t + h^t/λ2`), the server model otherwise.
fn gamma_of(state: &crate::protocol::ServerState, lambda2: f64) -> ParamVector {
    match &state.variant {
        VariantState::FedDyn { h, .. } if lambda2 > 0.0 => {
            let mut g = state.theta.clone();
            g.axpy(1.0 / lambda2, h);
            g
        }
        _ => state.theta.clone(),
    }
}

fn c_terms(fed: &Federation, models: &[&ParamVector], star_grads: &[ParamVector]) -> Result<(f64, f64)> {
    let m = fed.num_clients() as f64;
    let per_client: Vec<Result<f64>> = fed
        .shards
        .par_iter()
        .zip(models.par_iter())
        .zip(star_grads.par_iter())
        .map(|((shard, theta_k), star)| {
            let g = model::grad(&fed.spec, theta_k, &shard.data)?;
            Ok(g.sub(star).norm_sq())
        })
        .collect();
    let mut sq = 0.0;
    let mut plain = 0.0;
    for v in per_client {
        let v = v?;
        sq += v / m;
        plain += v.sqrt() / m;
    }
    Ok((sq, plain))
}

/// Runs a convex-mode experiment while recording a [`ConvergenceTrace`].
///
/// `heavy` additionally solves every client's local problem each round
/// (the hypothetical all-client solve) to obtain `ε_t` and the sign term;
/// this multiplies the compute by `m/P`. Heavy solves draw from their own
/// seed streams and never perturb training.
///
/// `on_round` sees every record as soon as its round completes.
pub fn trace_experiment(
    fed: &Federation,
    config: ProtocolConfig,
    theta_star: &ParamVector,
    heavy: bool,
    mut on_round: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<(ConvergenceTrace, ExperimentResult)> {
    if !fed.spec.is_convex() {
        return Err(Error::Diagnostic("convergence traces need a convex model".into()));
    }
    let mut sim = Simulation::new(fed, config)?;
    let alg = sim.config.algorithm.clone();
    let m = fed.num_clients();
    let star_grads: Vec<ParamVector> = fed
        .shards
        .iter()
        .map(|s| model::grad(&fed.spec, theta_star, &s.data))
        .collect::<Result<_>>()?;
    let risk_star = fed.global_loss(theta_star)?;
    let gamma0 = gamma_of(&sim.state, alg.lambda2);
    let (c0_squared, c0_unsquared) = c_terms(fed, &client_models(&sim.state, m), &star_grads)?;
    let mut trace = ConvergenceTrace {
        risk_star,
        gamma0_dist_sq: gamma0.sub(theta_star).norm_sq(),
        c0_squared,
        c0_unsquared,
        entries: Vec::new(),
    };

    let mut gamma_sum = gamma0.clone();
    let mut previous_gamma = gamma0;
    while sim.state.round < sim.config.rounds {
        let round = sim.state.round + 1;
        let (eps_t, sign_term) = if heavy {
            let (e, s) = heavy_terms(fed, &sim, &previous_gamma, theta_star, round)?;
            (Some(e), s)
        } else {
            (None, None)
        };
        let record = sim.step()?.clone();
        on_round(&record)?;
        let gamma = gamma_of(&sim.state, alg.lambda2);
        let mut running = gamma_sum.clone();
        running.scale(1.0 / round as f64);
        let (c_t, c_un) = c_terms(fed, &client_models(&sim.state, m), &star_grads)?;
        trace.entries.push(TraceEntry {
            round,
            gamma_deviation: record.gamma_deviation,
            risk_gap: fed.global_loss(&running)? - risk_star,
            iterate_gap: fed.global_loss(&gamma)? - risk_star,
            c_t: Some(c_t),
            c_t_unsquared: Some(c_un),
            eps_t,
            sign_term,
            h_deviation: match sim.state.variant {
                VariantState::FedDyn { .. } => Some(sim.state.h_identity_deviation()?),
                _ => None,
            },
        });
        gamma_sum.axpy(1.0, &gamma);
        previous_gamma = gamma;
    }
    Ok((trace, sim.into_result()))
}

/// `ε_t` and `−(2λ1/λ2)⟨γ^{t−1} − θ*, (1/m)Σ_k sign(θ̃_k^t − θ^{t−1})⟩`.
fn heavy_terms(
    fed: &Federation,
    sim: &Simulation<'_>,
    previous_gamma: &ParamVector,
    theta_star: &ParamVector,
    round: usize,
) -> Result<(f64, Option<f64>)> {
    let alg = &sim.config.algorithm;
    let budget = alg.budget();
    let anchor = &sim.state.theta;
    let caches = match &sim.state.variant {
        VariantState::FedDyn { grad_caches, .. } => Some(grad_caches),
        _ => None,
    };
    let solved: Vec<Result<ParamVector>> = (0..fed.num_clients())
        .into_par_iter()
        .map(|k| {
            let variant = match (alg.variant.family(), caches) {
                (Family::FedDyn, Some(c)) => LocalVariant::FedDyn { grad_cache: &c[k] },
                _ => LocalVariant::Plain,
            };
            let problem = LocalProblem {
                spec: &fed.spec,
                data: &fed.shards[k].data,
                anchor,
                lambda1: alg.lambda1,
                lambda2: alg.lambda2,
                variant,
            };
            let mut rng = stream(sim.config.seed, Purpose::Heavy, round as u64, k as u64);
            solve_local(&problem, &budget, &mut rng)
        })
        .collect();
    let m = fed.num_clients() as f64;
    let mut eps = 0.0;
    let mut sign_mean = ParamVector::zeros(anchor.len());
    for theta_k in solved {
        let theta_k = theta_k?;
        eps += theta_k.sub(previous_gamma).norm_sq() / m;
        for ((s, t), a) in sign_mean.iter_mut().zip(theta_k.iter()).zip(anchor.iter()) {
            *s += sign0(t - a) / m;
        }
    }
    let sign_term =
        (alg.lambda2 > 0.0).then(|| -2.0 * alg.lambda1 / alg.lambda2 * previous_gamma.sub(theta_star).dot(&sign_mean));
    Ok((eps, sign_term))
}

/// Field-wise mean of traces from several seeds (same rounds).
pub fn average_traces(traces: &[ConvergenceTrace]) -> Result<ConvergenceTrace> {
    let Some(first) = traces.first() else {
        return Err(Error::Diagnostic("no traces to average".into()));
    };
    if traces.iter().any(|t| t.entries.len() != first.entries.len()) {
        return Err(Error::Diagnostic("traces cover different numbers of rounds".into()));
    }
    let k = traces.len() as f64;
    let mean = |f: &dyn Fn(&ConvergenceTrace) -> f64| traces.iter().map(f).sum::<f64>() / k;
    let mean_opt = |i: usize, f: &dyn Fn(&TraceEntry) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = traces.iter().map(|t| f(&t.entries[i])).collect();
        vals.map(|v| v.iter().sum::<f64>() / k)
    };
    let max_opt = |i: usize, f: &dyn Fn(&TraceEntry) -> Option<f64>| -> Option<f64> {
        traces.iter().filter_map(|t| f(&t.entries[i])).reduce(f64::max)
    };
    Ok(ConvergenceTrace {
        risk_star: mean(&|t| t.risk_star),
        gamma0_dist_sq: mean(&|t| t.gamma0_dist_sq),
        c0_squared: mean(&|t| t.c0_squared),
        c0_unsquared: mean(&|t| t.c0_unsquared),
        entries: (0..first.entries.len())
            .map(|i| TraceEntry {
                round: first.entries[i].round,
                // Identity deviations are worst-case, not averaged.
                gamma_deviation: max_opt(i, &|e| e.gamma_deviation),
                risk_gap: mean_opt(i, &|e| Some(e.risk_gap)).unwrap_or_default(),
                iterate_gap: mean_opt(i, &|e| Some(e.iterate_gap)).unwrap_or_default(),
                c_t: mean_opt(i, &|e| e.c_t),
                c_t_unsquared: mean_opt(i, &|e| e.c_t_unsquared),
                eps_t: mean_opt(i, &|e| e.eps_t),
                sign_term: mean_opt(i, &|e| e.sign_term),
                h_deviation: max_opt(i, &|e| e.h_deviation),
            })
            .collect(),
    })
}

/// Verdict of the `O(1/T)` check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub early_round: usize,
    pub late_round: usize,
    pub early_gap: f64,
    pub late_gap: f64,
    /// `late_gap / early_gap`.
    pub ratio: f64,
    pub floor: f64,
    pub passed: bool,
}

/// `gap(late) ≤ ¼·gap(early) + floor` on the running-average risk gap.
pub fn check_convergence_rate(trace: &ConvergenceTrace, early: usize, late: usize, floor: f64) -> Result<RateReport> {
    let get = |t: usize| {
        trace
            .entry(t)
            .map(|e| e.risk_gap)
            .ok_or_else(|| Error::Diagnostic(format!("trace has no round {t}")))
    };
    let (early_gap, late_gap) = (get(early)?, get(late)?);
    Ok(RateReport {
        early_round: early,
        late_round: late,
        early_gap,
        late_gap,
        ratio: if early_gap != 0.0 {
            late_gap / early_gap
        } else {
            f64::NAN
        },
        floor,
        passed: late_gap <= 0.25 * early_gap + floor,
    })
}

/// Empirical tails of the mean of `m` independent ±1 signs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignTail {
    pub m: usize,
    pub delta: f64,
    pub trials: usize,
    /// `P[mean > δ]`.
    pub upper: f64,
    /// `P[|mean| > δ]`.
    pub two_sided: f64,
    /// `exp(−mδ²/2)`.
    pub bound: f64,
}

pub fn sign_concentration(m: usize, delta: f64, trials: usize, seed: u64) -> SignTail {
    let mut rng = stream(seed, Purpose::Probe, m as u64, delta.to_bits());
    let (mut upper, mut both) = (0usize, 0usize);
    for _ in 0..trials {
        let sum: i64 = (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).sum();
        let mean = sum as f64 / m as f64;
        upper += usize::from(mean > delta);
        both += usize::from(mean.abs() > delta);
    }
    SignTail {
        m,
        delta,
        trials,
        upper: upper as f64 / trials as f64,
        two_sided: both as f64 / trials as f64,
        bound: (-(m as f64) * delta * delta / 2.0).exp(),
    }
}

/// A client with loss `½ Σ_i h_i (θ_i − μ_i)²`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalQuadratic {
    pub curvature: Vec<f64>,
    pub minimum: Vec<f64>,
}

impl DiagonalQuadratic {
    /// A linear-regression dataset (no bias) whose loss is exactly this
    /// quadratic up to a constant: one row `√(d·h_i)·e_i` per coordinate with
    /// target `√(d·h_i)·μ_i`.
    pub fn to_dataset(&self) -> Result<Dataset> {
        let d = self.curvature.len();
        let mut features = vec![0.0; d * d];
        let mut targets = Vec::with_capacity(d);
        for i in 0..d {
            let a = (d as f64 * self.curvature[i]).sqrt();
            features[i * d + i] = a;
            targets.push(a * self.minimum[i]);
        }
        Dataset::regression(features, d, targets)
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.curvature
            .iter()
            .zip(&self.minimum)
            .zip(theta)
            .map(|((h, mu), t)| 0.5 * h * (t - mu) * (t - mu))
            .sum()
    }
}

/// Federation of diagonal quadratics with equal client sizes.
pub fn quadratic_federation(clients: &[DiagonalQuadratic]) -> Result<Federation> {
    let d = clients.first().map_or(0, |c| c.curvature.len());
    Ok(Federation {
        spec: ModelSpec::linear(d, false),
        shards: clients
            .iter()
            .enumerate()
            .map(|(k, c)| Ok(ClientShard::standalone(k, c.to_dataset()?)))
            .collect::<Result<_>>()?,
        test: None,
    })
}

/// `θ* = Σ_k h_k μ_k / Σ_k h_k` per coordinate (equal weights).
pub fn quadratic_optimum(clients: &[DiagonalQuadratic]) -> ParamVector {
    let d = clients[0].curvature.len();
    (0..d)
        .map(|i| {
            let num: f64 = clients.iter().map(|c| c.curvature[i] * c.minimum[i]).sum();
            let den: f64 = clients.iter().map(|c| c.curvature[i]).sum();
            num / den
        })
        .collect::<Vec<_>>()
        .into()
}

/// Fixed point of full-participation FedAvg with `steps` full-batch local
/// gradient steps of size `lr`: each client maps `θ ↦ μ + (1 − lr·h)^steps
/// (θ − μ)` coordinatewise, and the server averages with equal weights.
pub fn fedavg_fixed_point(clients: &[DiagonalQuadratic], lr: f64, steps: usize) -> ParamVector {
    let d = clients[0].curvature.len();
    let w = 1.0 / clients.len() as f64;
    (0..d)
        .map(|i| {
            let contraction: Vec<f64> = clients
                .iter()
                .map(|c| (1.0 - lr * c.curvature[i]).powi(steps as i32))
                .collect();
            let num: f64 = clients
                .iter()
                .zip(&contraction)
                .map(|(c, q)| w * (1.0 - q) * c.minimum[i])
                .sum();
            let den = 1.0 - contraction.iter().map(|q| w * q).sum::<f64>();
            num / den
        })
        .collect::<Vec<_>>()
        .into()
}

/// Two clients with swapped curvatures `(1, ½)` and opposite minima; `scale`
/// sets how far apart the local optima are. `β = 1`, and the curvature ratio
/// is mild enough that `λ2 ≈ 30` still contracts every direction quickly.
pub fn two_client_quadratic(scale: f64) -> Vec<DiagonalQuadratic> {
    vec![
        DiagonalQuadratic {
            curvature: vec![1.0, 0.5],
            minimum: vec![scale, -scale],
        },
        DiagonalQuadratic {
            curvature: vec![0.5, 1.0],
            minimum: vec![-scale, scale],
        },
    ]
}
