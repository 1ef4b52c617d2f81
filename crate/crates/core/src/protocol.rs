//! Server round loop for the three algorithm families.
//!
//! * `Avg`: FedAvg / FedProx and their elastic-net form. Clients upload the
//!   thresholded update `Δ_k`; the server applies `θ += Σ (n_k/n)·Δ_k`.
//! * `Scaffold`: corrected local steps with control variates. `Δ_k` is
//!   thresholded, `Δc_k` is sent as is on a second channel.
//! * `FedDyn`: per-client gradient caches and the server drift term `h`.
//!
//! Client solves within a round run on the ambient rayon pool. Every
//! reduction walks participants in ascending client id, so the result does
//! not depend on scheduling.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meter::{self, BinHistogram, Channel, CommLedger, EntropyMode, RoundCost, TransmittedUpdate};
use crate::model::{self, ModelSpec};
use crate::param::{sign0, ParamVector};
use crate::partition::ClientShard;
use crate::seed::{stream, Purpose};
use crate::solver::{
    feddyn_grad_cache_update, scaffold_local_pass, solve_local, InnerStep, LocalProblem, LocalVariant, SolveBudget,
};
use crate::Dataset;

/// Requested algorithm. The `_en` forms add the elastic-net terms and
/// thresholding on top of their baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fedavg,
    Fedprox,
    FedproxEn,
    Scaffold,
    ScaffoldEn,
    Feddyn,
    FeddynEn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Avg,
    Scaffold,
    FedDyn,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Fedavg,
        Variant::Fedprox,
        Variant::FedproxEn,
        Variant::Scaffold,
        Variant::ScaffoldEn,
        Variant::Feddyn,
        Variant::FeddynEn,
    ];

    pub fn family(self) -> Family {
        match self {
            Variant::Fedavg | Variant::Fedprox | Variant::FedproxEn => Family::Avg,
            Variant::Scaffold | Variant::ScaffoldEn => Family::Scaffold,
            Variant::Feddyn | Variant::FeddynEn => Family::FedDyn,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fedavg => "fedavg",
            Variant::Fedprox => "fedprox",
            Variant::FedproxEn => "fedprox_en",
            Variant::Scaffold => "scaffold",
            Variant::ScaffoldEn => "scaffold_en",
            Variant::Feddyn => "feddyn",
            Variant::FeddynEn => "feddyn_en",
        }
    }

    pub fn is_elastic(self) -> bool {
        matches!(self, Variant::FedproxEn | Variant::ScaffoldEn | Variant::FeddynEn)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
            Error::Config(format!("unknown variant `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How `Σ (n_k/n)·Δ_k` is weighted under partial participation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `n_k / n` over all clients; weights sum to less than one when only a
    /// subset participates.
    #[default]
    AsPrinted,
    /// `n_k / Σ_{j∈P} n_j`.
    Renormalized,
}

/// What a FedDyn client uploads, for metering purposes. Both forms carry the
/// same information; the other one is metered on a shadow ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FedDynPayload {
    #[default]
    Delta,
    Model,
}

fn one() -> f64 {
    1.0
}

fn default_bin() -> f64 {
    meter::DEFAULT_BIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub variant: Variant,
    #[serde(default)]
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    #[serde(default)]
    pub epsilon: f64,
    pub local_lr: f64,
    /// SCAFFOLD server step size.
    #[serde(default = "one")]
    pub global_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub scaffold_steps: Option<usize>,
    #[serde(default)]
    pub inner_step: InnerStep,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub feddyn_payload: FedDynPayload,
    #[serde(default)]
    pub entropy_mode: EntropyMode,
    #[serde(default = "default_bin")]
    pub bin: f64,
}

impl AlgorithmConfig {
    pub fn new(variant: Variant, local_lr: f64, epochs: usize, batch_size: usize) -> Self {
        AlgorithmConfig {
            variant,
            lambda1: 0.0,
            lambda2: 0.0,
            epsilon: 0.0,
            local_lr,
            global_lr: 1.0,
            epochs,
            batch_size,
            scaffold_steps: None,
            inner_step: InnerStep::Subgradient,
            aggregation: Aggregation::AsPrinted,
            feddyn_payload: FedDynPayload::Delta,
            entropy_mode: EntropyMode::Pooled,
            bin: meter::DEFAULT_BIN,
        }
    }

    pub fn with_penalties(mut self, lambda1: f64, lambda2: f64, epsilon: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self.epsilon = epsilon;
        self
    }

    pub fn budget(&self) -> SolveBudget {
        SolveBudget {
            epochs: self.epochs,
            batch_size: self.batch_size,
            local_lr: self.local_lr,
            scaffold_steps: self.scaffold_steps,
            inner_step: self.inner_step,
        }
    }

    /// Label of the algorithm actually run. An `_en` variant whose extra terms
    /// are all zero is its baseline, and FedProx without a proximal term is
    /// FedAvg, so degenerate configurations produce identical output.
    pub fn label(&self) -> &'static str {
        let extra = self.lambda1 != 0.0 || self.epsilon != 0.0;
        match self.variant.family() {
            Family::Avg if extra => "fedprox_en",
            Family::Avg if self.lambda2 != 0.0 => "fedprox",
            Family::Avg => "fedavg",
            Family::Scaffold if extra || self.lambda2 != 0.0 => "scaffold_en",
            Family::Scaffold => "scaffold",
            Family::FedDyn if extra => "feddyn_en",
            Family::FedDyn => "feddyn",
        }
    }

    /// Every problem with the configuration, keyed by its `algorithm.*` name.
    pub fn validate(&self) -> Vec<String> {
        let mut errors: Vec<String> = self.budget().validate().into_iter().collect();
        let nonneg = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("epsilon", self.epsilon),
        ];
        for (key, value) in nonneg {
            if !(value >= 0.0 && value.is_finite()) {
                errors.push(format!(
                    "algorithm.{key} must be a finite non-negative number (got {value})"
                ));
            }
        }
        if !(self.global_lr > 0.0 && self.global_lr.is_finite()) {
            errors.push(format!("algorithm.global_lr must be positive (got {})", self.global_lr));
        }
        if !(self.bin > 0.0 && self.bin.is_finite()) {
            errors.push(format!("algorithm.bin must be positive (got {})", self.bin));
        }
        let v = self.variant;
        if !v.is_elastic() && (self.lambda1 != 0.0 || self.epsilon != 0.0) {
            errors.push(format!(
                "algorithm.variant = {v} is a baseline and needs lambda1 = 0 and epsilon = 0; use {v}_en"
            ));
        }
        match v {
            Variant::Fedavg if self.lambda2 != 0.0 => {
                errors.push("algorithm.variant = fedavg needs lambda2 = 0; use fedprox".into())
            }
            Variant::Scaffold if self.lambda2 != 0.0 => {
                errors.push("algorithm.variant = scaffold needs lambda2 = 0; use scaffold_en".into())
            }
            Variant::Feddyn | Variant::FeddynEn if self.lambda2 <= 0.0 => errors.push(
                "algorithm.lambda2 must be positive for feddyn variants: the server model update divides h by lambda2"
                    .into(),
            ),
            _ => {}
        }
        if v.family() == Family::Scaffold && self.inner_step == InnerStep::Proximal {
            errors.push("algorithm.inner_step = proximal is not available for scaffold variants".into());
        }
        if v.family() != Family::Scaffold && self.scaffold_steps.is_some() {
            errors.push("algorithm.scaffold_steps only applies to scaffold variants".into());
        }
        errors
    }
}

/// Static inputs of a run.
#[derive(Clone, Debug)]
pub struct Federation {
    pub spec: ModelSpec,
    pub shards: Vec<ClientShard>,
    pub test: Option<Dataset>,
}

impl Federation {
    pub fn num_clients(&self) -> usize {
        self.shards.len()
    }

    pub fn total_examples(&self) -> usize {
        self.shards.iter().map(ClientShard::n_k).sum()
    }

    /// `R(θ) = Σ_k (n_k/n)·L_k(θ)`, i.e. the mean loss over the pooled data.
    pub fn global_loss(&self, theta: &[f64]) -> Result<f64> {
        let n = self.total_examples() as f64;
        let mut total = 0.0;
        for shard in &self.shards {
            total += shard.n_k() as f64 / n * model::loss(&self.spec, theta, &shard.data)?;
        }
        Ok(total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipationSpec {
    pub rate: f64,
}

impl ParticipationSpec {
    pub fn full() -> Self {
        ParticipationSpec { rate: 1.0 }
    }

    /// `round(rate·m)`, at least one.
    pub fn count(&self, m: usize) -> usize {
        ((self.rate * m as f64).round() as usize).clamp(1, m.max(1))
    }

    pub fn validate(&self) -> Vec<String> {
        if self.rate > 0.0 && self.rate <= 1.0 {
            Vec::new()
        } else {
            vec![format!("participation.rate must lie in (0, 1] (got {})", self.rate)]
        }
    }
}

/// Uniform sample of `round(rate·m)` distinct clients, ascending.
pub fn sample_participants(m: usize, spec: &ParticipationSpec, seed: u64, round: usize) -> Vec<usize> {
    if m == 0 {
        return Vec::new();
    }
    let p = spec.count(m);
    if p == m {
        return (0..m).collect();
    }
    let mut rng = stream(seed, Purpose::Sampling, round as u64, 0);
    let mut ids = index::sample(&mut rng, m, p).into_vec();
    ids.sort_unstable();
    ids
}

#[derive(Clone, Debug, PartialEq)]
pub enum VariantState {
    Avg,
    Scaffold {
        c: ParamVector,
        client_controls: Vec<ParamVector>,
    },
    FedDyn {
        h: ParamVector,
        grad_caches: Vec<ParamVector>,
        /// Each client's last local model (kept locally, never uploaded).
        client_models: Vec<ParamVector>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServerState {
    /// Rounds completed so far.
    pub round: usize,
    pub theta: ParamVector,
    pub variant: VariantState,
}

impl ServerState {
    pub fn new(family: Family, theta: ParamVector, m: usize) -> Self {
        let d = theta.len();
        let variant = match family {
            Family::Avg => VariantState::Avg,
            Family::Scaffold => VariantState::Scaffold {
                c: ParamVector::zeros(d),
                client_controls: vec![ParamVector::zeros(d); m],
            },
            Family::FedDyn => VariantState::FedDyn {
                h: ParamVector::zeros(d),
                grad_caches: vec![ParamVector::zeros(d); m],
                client_models: vec![theta.clone(); m],
            },
        };
        ServerState {
            round: 0,
            theta,
            variant,
        }
    }

    /// `‖h − (1/m)Σ_k cache_k‖∞` for FedDyn states.
    pub fn h_identity_deviation(&self) -> Result<f64> {
        let VariantState::FedDyn { h, grad_caches, .. } = &self.variant else {
            return Err(Error::Diagnostic("h identity needs a feddyn state".into()));
        };
        let mean = ParamVector::mean(grad_caches, h.len());
        Ok(h.sub(&mean).max_abs())
    }
}

/// What one round produced, before metering.
#[derive(Clone, Debug)]
pub struct RoundOutcome {
    pub round: usize,
    pub participants: Vec<usize>,
    /// Uploads metered on the main ledger.
    pub uploads: Vec<TransmittedUpdate>,
    /// FedDyn only: the same uploads in the other payload form.
    pub shadow_uploads: Vec<TransmittedUpdate>,
    /// FedDyn only: `‖(1/P)Σ θ̂_k − (θ^t + h^t/λ2)‖∞`.
    pub gamma_deviation: Option<f64>,
}

fn solve_all<T: Send>(participants: &[usize], round: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = participants.par_iter().map(|&k| f(k)).collect();
    results
        .into_iter()
        .zip(participants)
        .map(|(r, &k)| r.map_err(|e| e.at_client(round, k)))
        .collect()
}

fn upload(payload: ParamVector, round: usize, client: usize, channel: Channel) -> TransmittedUpdate {
    TransmittedUpdate {
        payload,
        round,
        client,
        channel,
    }
}

/// One FedAvg/FedProx(+EN) round over the given participants.
pub fn run_round_avg(
    state: &mut ServerState,
    fed: &Federation,
    config: &AlgorithmConfig,
    participants: &[usize],
    seed: u64,
) -> Result<RoundOutcome> {
    let round = state.round + 1;
    let budget = config.budget();
    let anchor = state.theta.clone();
    let deltas = solve_all(participants, round, |k| {
        let problem = LocalProblem {
            spec: &fed.spec,
            data: &fed.shards[k].data,
            anchor: &anchor,
            lambda1: config.lambda1,
            lambda2: config.lambda2,
            variant: LocalVariant::Plain,
        };
        let mut rng = stream(seed, Purpose::LocalSolve, round as u64, k as u64);
        let theta_k = solve_local(&problem, &budget, &mut rng)?;
        Ok(meter::threshold(&theta_k.sub(&anchor), config.epsilon))
    })?;

    let denom = match config.aggregation {
        Aggregation::AsPrinted => fed.total_examples(),
        Aggregation::Renormalized => participants.iter().map(|&k| fed.shards[k].n_k()).sum(),
    } as f64;
    for (&k, delta) in participants.iter().zip(&deltas) {
        state.theta.axpy(fed.shards[k].n_k() as f64 / denom, delta);
    }
    state.round = round;
    Ok(RoundOutcome {
        round,
        participants: participants.to_vec(),
        uploads: participants
            .iter()
            .zip(deltas)
            .map(|(&k, d)| upload(d, round, k, Channel::ModelDelta))
            .collect(),
        shadow_uploads: Vec::new(),
        gamma_deviation: None,
    })
}

/// One SCAFFOLD(+EN) round.
pub fn run_round_scaffold(
    state: &mut ServerState,
    fed: &Federation,
    config: &AlgorithmConfig,
    participants: &[usize],
    seed: u64,
) -> Result<RoundOutcome> {
    let round = state.round + 1;
    let m = fed.num_clients();
    let budget = config.budget();
    let anchor = state.theta.clone();
    let VariantState::Scaffold { c, client_controls } = &mut state.variant else {
        return Err(Error::Config("scaffold round on a non-scaffold state".into()));
    };
    let solved = {
        let (c, controls) = (&*c, &*client_controls);
        solve_all(participants, round, |k| {
            let problem = LocalProblem {
                spec: &fed.spec,
                data: &fed.shards[k].data,
                anchor: &anchor,
                lambda1: config.lambda1,
                lambda2: config.lambda2,
                variant: LocalVariant::Scaffold {
                    client_control: &controls[k],
                    server_control: c,
                },
            };
            let mut rng = stream(seed, Purpose::LocalSolve, round as u64, k as u64);
            let (theta_k, c_new) = scaffold_local_pass(&problem, &budget, &mut rng)?;
            let delta = meter::threshold(&theta_k.sub(&anchor), config.epsilon);
            let delta_c = c_new.sub(&controls[k]);
            Ok((delta, delta_c, c_new))
        })?
    };

    let p = participants.len() as f64;
    let mut uploads = Vec::with_capacity(2 * participants.len());
    for (&k, (delta, delta_c, c_new)) in participants.iter().zip(solved) {
        state.theta.axpy(config.global_lr / p, &delta);
        c.axpy(1.0 / m as f64, &delta_c);
        client_controls[k] = c_new;
        uploads.push(upload(delta, round, k, Channel::ModelDelta));
        uploads.push(upload(delta_c, round, k, Channel::ControlDelta));
    }
    state.round = round;
    Ok(RoundOutcome {
        round,
        participants: participants.to_vec(),
        uploads,
        shadow_uploads: Vec::new(),
        gamma_deviation: None,
    })
}

/// One FedDyn(+EN) round.
pub fn run_round_feddyn(
    state: &mut ServerState,
    fed: &Federation,
    config: &AlgorithmConfig,
    participants: &[usize],
    seed: u64,
) -> Result<RoundOutcome> {
    if config.lambda2 <= 0.0 {
        return Err(Error::Config(
            "feddyn needs lambda2 > 0: the server model update divides h by lambda2".into(),
        ));
    }
    let round = state.round + 1;
    let m = fed.num_clients() as f64;
    let (l1, l2) = (config.lambda1, config.lambda2);
    let budget = config.budget();
    let anchor = state.theta.clone();
    let VariantState::FedDyn {
        h,
        grad_caches,
        client_models,
    } = &mut state.variant
    else {
        return Err(Error::Config("feddyn round on a non-feddyn state".into()));
    };
    let solved = {
        let caches = &*grad_caches;
        solve_all(participants, round, |k| {
            let problem = LocalProblem {
                spec: &fed.spec,
                data: &fed.shards[k].data,
                anchor: &anchor,
                lambda1: l1,
                lambda2: l2,
                variant: LocalVariant::FedDyn { grad_cache: &caches[k] },
            };
            let mut rng = stream(seed, Purpose::LocalSolve, round as u64, k as u64);
            let theta_k = solve_local(&problem, &budget, &mut rng)?;
            let cache = feddyn_grad_cache_update(&caches[k], &theta_k, &anchor, l1, l2);
            let delta = meter::threshold(&theta_k.sub(&anchor), config.epsilon);
            Ok((theta_k, cache, delta))
        })?
    };

    let d = anchor.len();
    let mut gamma = ParamVector::zeros(d);
    let mut uploads = Vec::with_capacity(participants.len());
    let mut shadow = Vec::with_capacity(participants.len());
    for (&k, (theta_k, cache, delta)) in participants.iter().zip(solved) {
        h.axpy(-l2 / m, &delta);
        if l1 != 0.0 {
            for (hi, di) in h.iter_mut().zip(delta.iter()) {
                *hi -= l1 / m * sign0(*di);
            }
        }
        let reconstructed = anchor.add(&delta);
        gamma.axpy(1.0, &reconstructed);
        grad_caches[k] = cache;
        client_models[k] = theta_k;
        let (main, other) = match config.feddyn_payload {
            FedDynPayload::Delta => ((delta, Channel::ModelDelta), (reconstructed, Channel::ModelFull)),
            FedDynPayload::Model => ((reconstructed, Channel::ModelFull), (delta, Channel::ModelDelta)),
        };
        uploads.push(upload(main.0, round, k, main.1));
        shadow.push(upload(other.0, round, k, other.1));
    }
    gamma.scale(1.0 / participants.len() as f64);
    let mut theta = gamma.clone();
    theta.axpy(-1.0 / l2, h);
    let gamma_deviation = gamma
        .iter()
        .zip(theta.iter().zip(h.iter()))
        .fold(0.0f64, |acc, (g, (t, hi))| acc.max((g - (t + hi / l2)).abs()));
    state.theta = theta;
    state.round = round;
    Ok(RoundOutcome {
        round,
        participants: participants.to_vec(),
        uploads,
        shadow_uploads: shadow,
        gamma_deviation: Some(gamma_deviation),
    })
}

/// Everything a run needs besides the federation itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub algorithm: AlgorithmConfig,
    pub participation: ParticipationSpec,
    pub rounds: usize,
    pub seed: u64,
    /// Evaluate every this many rounds (and always after the last); 0 means
    /// only after the last.
    pub eval_every: usize,
    /// Record `‖h − mean(caches)‖∞` every FedDyn round (costs one pass over
    /// all caches).
    pub track_h_identity: bool,
}

/// Per-round output row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub variant: &'static str,
    pub participants: usize,
    pub cost: RoundCost,
    pub nnz_cum: u64,
    pub bits_cum: f64,
    pub elements_cum: u64,
    /// FedDyn only: cumulative cost of the alternative payload form.
    pub shadow_nnz_cum: Option<u64>,
    pub shadow_bits_cum: Option<f64>,
    pub update_norm: f64,
    pub train_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub gamma_deviation: Option<f64>,
    pub h_deviation: Option<f64>,
}

/// Stateful driver that owns the server state and the ledgers.
pub struct Simulation<'a> {
    pub fed: &'a Federation,
    pub config: ProtocolConfig,
    pub state: ServerState,
    pub ledger: CommLedger,
    pub shadow_ledger: Option<CommLedger>,
    /// Pooled histogram of every metered model-channel payload.
    pub histogram: BinHistogram,
    pub records: Vec<RoundRecord>,
}

impl<'a> Simulation<'a> {
    pub fn new(fed: &'a Federation, config: ProtocolConfig) -> Result<Self> {
        let problems = config
            .algorithm
            .validate()
            .into_iter()
            .chain(config.participation.validate())
            .collect::<Vec<_>>();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        if fed.shards.is_empty() {
            return Err(Error::Config("federation has no clients".into()));
        }
        let d = fed.spec.param_count();
        let theta = fed.spec.init_params(&mut stream(config.seed, Purpose::Init, 0, 0));
        theta.check_len(d)?;
        let family = config.algorithm.variant.family();
        let alg = &config.algorithm;
        Ok(Simulation {
            fed,
            state: ServerState::new(family, theta, fed.num_clients()),
            ledger: CommLedger::new(alg.bin, alg.entropy_mode),
            shadow_ledger: (family == Family::FedDyn).then(|| CommLedger::new(alg.bin, alg.entropy_mode)),
            histogram: BinHistogram::default(),
            records: Vec::new(),
            config,
        })
    }

    fn due_for_eval(&self, round: usize) -> bool {
        round == self.config.rounds || (self.config.eval_every > 0 && round % self.config.eval_every == 0)
    }

    /// Test accuracy for classifiers, `None` without a test set or for regression.
    pub fn test_accuracy(&self) -> Result<Option<f64>> {
        match &self.fed.test {
            Some(test) if self.fed.spec.is_classifier() && !test.is_empty() => {
                model::accuracy(&self.fed.spec, &self.state.theta, test).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// Runs one round and appends its record.
    pub fn step(&mut self) -> Result<&RoundRecord> {
        let round = self.state.round + 1;
        let participants = sample_participants(
            self.fed.num_clients(),
            &self.config.participation,
            self.config.seed,
            round,
        );
        let previous = self.state.theta.clone();
        let alg = &self.config.algorithm;
        let seed = self.config.seed;
        let outcome = match alg.variant.family() {
            Family::Avg => run_round_avg(&mut self.state, self.fed, alg, &participants, seed)?,
            Family::Scaffold => run_round_scaffold(&mut self.state, self.fed, alg, &participants, seed)?,
            Family::FedDyn => run_round_feddyn(&mut self.state, self.fed, alg, &participants, seed)?,
        };
        if !self.state.theta.is_finite() {
            return Err(Error::Diverged {
                lr: alg.local_lr,
                initial: previous.max_abs(),
                objective: f64::NAN,
            });
        }

        for u in &outcome.uploads {
            if u.channel != Channel::ControlDelta {
                self.histogram.add(&u.payload, self.ledger.bin);
            }
        }
        let cost = self.ledger.record_round(&outcome.uploads);
        if let Some(shadow) = &mut self.shadow_ledger {
            shadow.record_round(&outcome.shadow_uploads);
        }
        let h_deviation = match (&self.state.variant, self.config.track_h_identity) {
            (VariantState::FedDyn { .. }, true) => Some(self.state.h_identity_deviation()?),
            _ => None,
        };
        let (train_loss, test_accuracy) = if self.due_for_eval(round) {
            (Some(self.fed.global_loss(&self.state.theta)?), self.test_accuracy()?)
        } else {
            (None, None)
        };
        self.records.push(RoundRecord {
            round,
            variant: self.config.algorithm.label(),
            participants: outcome.participants.len(),
            cost,
            nnz_cum: self.ledger.cumulative_nonzero,
            bits_cum: self.ledger.cumulative_bits,
            elements_cum: self.ledger.cumulative_elements,
            shadow_nnz_cum: self.shadow_ledger.as_ref().map(|l| l.cumulative_nonzero),
            shadow_bits_cum: self.shadow_ledger.as_ref().map(|l| l.cumulative_bits),
            update_norm: self.state.theta.sub(&previous).norm(),
            train_loss,
            test_accuracy,
            gamma_deviation: outcome.gamma_deviation,
            h_deviation,
        });
        Ok(self.records.last().expect("record just pushed"))
    }

    /// Runs the remaining rounds.
    pub fn run(&mut self) -> Result<()> {
        while self.state.round < self.config.rounds {
            self.step()?;
        }
        Ok(())
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.test_accuracy)
    }

    pub fn into_result(self) -> ExperimentResult {
        ExperimentResult {
            records: self.records,
            state: self.state,
            ledger: self.ledger,
            shadow_ledger: self.shadow_ledger,
            histogram: self.histogram,
        }
    }
}

/// Final products of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub records: Vec<RoundRecord>,
    pub state: ServerState,
    pub ledger: CommLedger,
    pub shadow_ledger: Option<CommLedger>,
    pub histogram: BinHistogram,
}

impl ExperimentResult {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.test_accuracy)
    }
}

pub fn run_experiment(fed: &Federation, config: ProtocolConfig) -> Result<ExperimentResult> {
    let mut sim = Simulation::new(fed, config)?;
    sim.run()?;
    Ok(sim.into_result())
}
