//! Experiment harness: config files, presets, run orchestration and report
//! emission. The CLI is a thin layer over [`run`], [`compare`] and
//! [`diagnose`].

pub mod config;
pub mod manifest;
pub mod presets;
pub mod report;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{
    average_traces, check_convergence_rate, fedavg_fixed_point, federation_beta, sign_concentration,
    solve_global_optimum, trace_experiment, two_client_quadratic, ConvergenceTrace, RateReport, SignTail,
    TheoremConstants, OPTIMUM_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::partition;
use crate::protocol::{ExperimentResult, Family, Federation, Simulation};
use crate::ParamVector;

use config::{DataConfig, ExperimentConfig, LoadedConfig};
use manifest::RunManifest;
use report::{CsvSink, IdentityVerdict, RoundRow, GAMMA_TOLERANCE, H_TOLERANCE};

pub const SUMMARY_SCHEMA: &str = "fedelastic summary v1";
pub const COMPARE_FILE: &str = "compare.json";
pub const VERDICT_FILE: &str = "verdict.json";

/// Sign-concentration grid checked by `diagnose`.
pub const SIGN_DELTAS: [f64; 3] = [0.1, 0.3, 0.5];
pub const SIGN_CLIENTS: [usize; 2] = [20, 100];
pub const SIGN_TRIALS: usize = 10_000;

/// Cost of the payload form not selected by `feddyn_payload`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlternateCost {
    pub payload: &'static str,
    pub cumulative_nnz: u64,
    pub cumulative_bits: f64,
}

/// What the closed-form FedAvg fixed point looks like on a quadratic instance
/// with the same local budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FedAvgReference {
    pub local_lr: f64,
    pub local_steps: usize,
    pub fixed_point: Vec<f64>,
    pub risk_gap: f64,
    /// Final iterate risk gap of this run is strictly below the fixed point's.
    pub beaten: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub beta: f64,
    pub constants: Option<TheoremConstants>,
    /// Why the bound does not apply (e.g. `λ2 ≤ 27β`).
    pub precondition_error: Option<String>,
    pub rate: Option<RateReport>,
    pub rate_skipped: Option<String>,
    pub final_risk_gap: Option<f64>,
    pub final_iterate_gap: Option<f64>,
    pub fedavg_reference: Option<FedAvgReference>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Verdicts {
    pub gamma_identity: Option<IdentityVerdict>,
    pub h_identity: Option<IdentityVerdict>,
    pub convergence: Option<ConvergenceVerdict>,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub name: Option<String>,
    pub variant: &'static str,
    pub seed: u64,
    pub rounds: usize,
    pub clients: usize,
    pub participants_per_round: usize,
    pub parameters: usize,
    pub cumulative_nnz: u64,
    pub cumulative_elements: u64,
    pub cumulative_bits: f64,
    pub alternate_payload: Option<AlternateCost>,
    /// Entropy (bits/element) of every model-channel value sent in the run.
    pub pooled_entropy: f64,
    pub final_accuracy: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub verdicts: Verdicts,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Summary,
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("threads: {e}")))
}

/// Creates the output directory and proves it is writable before any
/// compute starts.
fn preflight(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Runs `body` between a `running` manifest and its finalized form.
fn with_manifest<T>(
    command: &str,
    loaded: &LoadedConfig,
    config: &ExperimentConfig,
    dir: &Path,
    body: impl FnOnce() -> Result<T>,
) -> Result<T> {
    preflight(dir)?;
    let effective = serde_json::to_value(config).map_err(|e| Error::Output(e.to_string()))?;
    let mut manifest = RunManifest::start(
        command,
        &loaded.source_text,
        loaded.source_path.as_deref(),
        effective,
        config.seed,
        config.threads,
    );
    manifest.write(dir)?;
    let outcome = body();
    manifest.finish(dir, outcome.as_ref().err())?;
    outcome
}

/// Executes one experiment and writes every output file into
/// `config.output.dir`.
pub fn run(loaded: &LoadedConfig) -> Result<RunOutcome> {
    let config = loaded.config.clone().validated()?;
    let dir = config.output.dir.clone();
    let summary = with_manifest("run", loaded, &config, &dir, || {
        build_pool(config.threads)?.install(|| execute(&config, &loaded.base_dir, &dir))
    })?;
    Ok(RunOutcome { dir, summary })
}

fn execute(config: &ExperimentConfig, base_dir: &Path, dir: &Path) -> Result<Summary> {
    let fed = config.build_federation(base_dir)?;
    if config.output.export_shards {
        let path = dir.join(report::SHARDS_FILE);
        std::fs::write(&path, partition::export_json(&fed.shards)).map_err(|e| Error::io(&path, e))?;
    }
    let mut sink = CsvSink::<RoundRow>::create(&dir.join(report::ROUNDS_FILE))?;
    let protocol = config.protocol();

    let (result, convergence) = if config.diagnostics.convex_mode {
        let theta_star = solve_global_optimum(&fed, OPTIMUM_TOLERANCE)?;
        let (trace, result) = trace_experiment(&fed, protocol, &theta_star, config.diagnostics.heavy, |r| {
            sink.write(&RoundRow::from(r))
        })?;
        report::write_diagnostics(&dir.join(report::DIAGNOSTICS_FILE), &trace.entries)?;
        let verdict = convergence_verdict(config, &fed, &trace)?;
        (result, Some(verdict))
    } else {
        let mut sim = Simulation::new(&fed, protocol)?;
        while sim.state.round < config.rounds {
            let record = sim.step()?;
            sink.write(&RoundRow::from(record))?;
        }
        (sim.into_result(), None)
    };
    sink.finish()?;
    report::write_histogram(
        &dir.join(report::HISTOGRAM_FILE),
        &result.histogram,
        config.algorithm.bin,
    )?;

    let summary = summarize(config, &fed, &result, convergence);
    report::write_json(&dir.join(report::SUMMARY_FILE), &summary)?;
    Ok(summary)
}

fn identity_verdicts(
    config: &ExperimentConfig,
    records: &[crate::protocol::RoundRecord],
) -> (Option<IdentityVerdict>, Option<IdentityVerdict>) {
    if config.algorithm.variant.family() != Family::FedDyn {
        return (None, None);
    }
    let gamma = IdentityVerdict::new(records.iter().map(|r| r.gamma_deviation), GAMMA_TOLERANCE, true);
    let h = config.diagnostics.track_h_identity.then(|| {
        IdentityVerdict::new(
            records.iter().map(|r| r.h_deviation),
            H_TOLERANCE,
            config.algorithm.epsilon == 0.0,
        )
    });
    (Some(gamma), h)
}

fn summarize(
    config: &ExperimentConfig,
    fed: &Federation,
    result: &ExperimentResult,
    convergence: Option<ConvergenceVerdict>,
) -> Summary {
    let alternate_payload = result.shadow_ledger.as_ref().map(|l| AlternateCost {
        payload: match config.algorithm.feddyn_payload {
            crate::protocol::FedDynPayload::Delta => "model",
            crate::protocol::FedDynPayload::Model => "delta",
        },
        cumulative_nnz: l.cumulative_nonzero,
        cumulative_bits: l.cumulative_bits,
    });
    let (gamma_identity, h_identity) = identity_verdicts(config, &result.records);
    Summary {
        schema: SUMMARY_SCHEMA,
        name: config.name.clone(),
        variant: config.label(),
        seed: config.seed,
        rounds: result.records.len(),
        clients: fed.num_clients(),
        participants_per_round: config.participation.count(fed.num_clients()),
        parameters: fed.spec.param_count(),
        cumulative_nnz: result.ledger.cumulative_nonzero,
        cumulative_elements: result.ledger.cumulative_elements,
        cumulative_bits: result.ledger.cumulative_bits,
        alternate_payload,
        pooled_entropy: result.histogram.entropy(),
        final_accuracy: result.final_accuracy(),
        final_train_loss: result.records.iter().rev().find_map(|r| r.train_loss),
        verdicts: Verdicts {
            gamma_identity,
            h_identity,
            convergence,
        },
    }
}

/// FedAvg fixed point for quadratic data whose local solves are full-batch
/// gradient descent (batch covers every row), where it has a closed form.
fn fedavg_reference(
    config: &ExperimentConfig,
    fed: &Federation,
    final_iterate_gap: Option<f64>,
) -> Result<Option<FedAvgReference>> {
    let DataConfig::Quadratic { scale } = config.data else {
        return Ok(None);
    };
    let rows = fed.shards.iter().map(|s| s.n_k()).max().unwrap_or(0);
    if config.algorithm.batch_size < rows || config.algorithm.scaffold_steps.is_some() {
        return Ok(None);
    }
    let clients = two_client_quadratic(scale);
    let steps = config.algorithm.epochs;
    let fixed_point = fedavg_fixed_point(&clients, config.algorithm.local_lr, steps);
    let theta_star = crate::diagnostics::quadratic_optimum(&clients);
    let risk_gap = fed.global_loss(&fixed_point)? - fed.global_loss(&theta_star)?;
    Ok(Some(FedAvgReference {
        local_lr: config.algorithm.local_lr,
        local_steps: steps,
        fixed_point: fixed_point.to_vec(),
        risk_gap,
        beaten: final_iterate_gap.is_some_and(|g| g < risk_gap),
    }))
}

fn convergence_verdict(
    config: &ExperimentConfig,
    fed: &Federation,
    trace: &ConvergenceTrace,
) -> Result<ConvergenceVerdict> {
    let beta = federation_beta(fed)?;
    let m = fed.num_clients();
    let p = config.participation.count(m);
    let d = fed.spec.param_count();
    let alg = &config.algorithm;
    let (constants, precondition_error) = match TheoremConstants::compute(beta, alg.lambda2, m, p, d) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (early, late) = (config.diagnostics.early_round, config.diagnostics.late_round);
    let (rate, rate_skipped) = match (&constants, trace.entries.len()) {
        (None, _) => (None, Some("theorem constants unavailable".to_string())),
        (Some(_), n) if n < late => (None, Some(format!("run has {n} rounds; the rate check needs {late}"))),
        (Some(c), _) => (
            Some(check_convergence_rate(trace, early, late, c.floor(alg.lambda1))?),
            None,
        ),
    };
    let last = trace.entries.last();
    let final_iterate_gap = last.map(|e| e.iterate_gap);
    Ok(ConvergenceVerdict {
        beta,
        constants,
        precondition_error,
        rate,
        rate_skipped,
        final_risk_gap: last.map(|e| e.risk_gap),
        final_iterate_gap,
        fedavg_reference: fedavg_reference(config, fed, final_iterate_gap)?,
    })
}

/// One side of a comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunBrief {
    pub name: Option<String>,
    pub variant: &'static str,
    pub dir: PathBuf,
    pub cumulative_nnz: u64,
    pub cumulative_bits: f64,
    pub final_accuracy: Option<f64>,
}

impl RunBrief {
    fn from_outcome(o: &RunOutcome) -> Self {
        RunBrief {
            name: o.summary.name.clone(),
            variant: o.summary.variant,
            dir: o.dir.clone(),
            cumulative_nnz: o.summary.cumulative_nnz,
            cumulative_bits: o.summary.cumulative_bits,
            final_accuracy: o.summary.final_accuracy,
        }
    }
}

/// Contents of `compare.json`. Ratios are first over second, so listing the
/// baseline first gives the reduction factor of the second run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub first: RunBrief,
    pub second: RunBrief,
    pub nnz_ratio: f64,
    pub bits_ratio: f64,
    /// Second minus first, in percentage points.
    pub accuracy_difference_pp: Option<f64>,
}

impl Comparison {
    pub fn new(first: RunBrief, second: RunBrief) -> Self {
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
        Comparison {
            nnz_ratio: ratio(first.cumulative_nnz as f64, second.cumulative_nnz as f64),
            bits_ratio: ratio(first.cumulative_bits, second.cumulative_bits),
            accuracy_difference_pp: first
                .final_accuracy
                .zip(second.final_accuracy)
                .map(|(a, b)| 100.0 * (b - a)),
            first,
            second,
        }
    }
}

/// Runs two configs into `out/first` and `out/second` and writes
/// `out/compare.json`.
pub fn compare(first: LoadedConfig, second: LoadedConfig, out: &Path) -> Result<Comparison> {
    let mut outcomes = Vec::with_capacity(2);
    for (mut loaded, sub) in [(first, "first"), (second, "second")] {
        loaded.config.output.dir = out.join(sub);
        outcomes.push(run(&loaded)?);
    }
    let comparison = Comparison::new(
        RunBrief::from_outcome(&outcomes[0]),
        RunBrief::from_outcome(&outcomes[1]),
    );
    report::write_json(&out.join(COMPARE_FILE), &comparison)?;
    Ok(comparison)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignCheck {
    #[serde(flatten)]
    pub tail: SignTail,
    /// Two-sided tail within twice the one-sided bound.
    pub passed: bool,
}

/// Contents of `verdict.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnoseVerdict {
    pub variant: &'static str,
    pub seeds: Vec<u64>,
    pub rounds: usize,
    pub heavy: bool,
    pub convergence: ConvergenceVerdict,
    pub gamma_identity: Option<IdentityVerdict>,
    pub h_identity: Option<IdentityVerdict>,
    pub sign_concentration: Vec<SignCheck>,
    /// Every applicable check passed.
    pub passed: bool,
}

/// Sign-concentration grid with the given master seed.
pub fn sign_grid(seed: u64) -> Vec<SignCheck> {
    let mut out = Vec::new();
    for m in SIGN_CLIENTS {
        for delta in SIGN_DELTAS {
            let tail = sign_concentration(m, delta, SIGN_TRIALS, seed);
            out.push(SignCheck {
                passed: tail.two_sided <= 2.0 * tail.bound,
                tail,
            });
        }
    }
    out
}

/// Convex-mode diagnostics averaged over `diagnostics.seeds` protocol seeds
/// (the data and partition stay fixed at the configured seed). Writes the
/// averaged `diagnostics.csv` and `verdict.json`.
pub fn diagnose(loaded: &LoadedConfig) -> Result<DiagnoseVerdict> {
    let mut config = loaded.config.clone();
    config.diagnostics.convex_mode = true;
    let config = config.validated()?;
    let dir = config.output.dir.clone();
    with_manifest("diagnose", loaded, &config, &dir, || {
        build_pool(config.threads)?.install(|| diagnose_in(&config, &loaded.base_dir, &dir))
    })
}

fn diagnose_in(config: &ExperimentConfig, base_dir: &Path, dir: &Path) -> Result<DiagnoseVerdict> {
    let fed = config.build_federation(base_dir)?;
    let theta_star: ParamVector = solve_global_optimum(&fed, OPTIMUM_TOLERANCE)?;
    let seeds: Vec<u64> = (0..config.diagnostics.seeds as u64).map(|i| config.seed + i).collect();
    let mut traces = Vec::with_capacity(seeds.len());
    let mut records = Vec::new();
    for &seed in &seeds {
        let mut protocol = config.protocol();
        protocol.seed = seed;
        let (trace, result) = trace_experiment(&fed, protocol, &theta_star, config.diagnostics.heavy, |_| Ok(()))?;
        traces.push(trace);
        records.extend(result.records);
    }
    let trace = average_traces(&traces)?;
    report::write_diagnostics(&dir.join(report::DIAGNOSTICS_FILE), &trace.entries)?;

    let convergence = convergence_verdict(config, &fed, &trace)?;
    let (gamma_identity, h_identity) = identity_verdicts(config, &records);
    let sign = sign_grid(config.seed);
    let passed = convergence.rate.as_ref().is_none_or(|r| r.passed)
        && convergence.fedavg_reference.as_ref().is_none_or(|f| f.beaten)
        && [&gamma_identity, &h_identity]
            .iter()
            .all(|v| v.as_ref().and_then(|v| v.passed).unwrap_or(true))
        && sign.iter().all(|s| s.passed);
    let verdict = DiagnoseVerdict {
        variant: config.label(),
        seeds,
        rounds: config.rounds,
        heavy: config.diagnostics.heavy,
        convergence,
        gamma_identity,
        h_identity,
        sign_concentration: sign,
        passed,
    };
    report::write_json(&dir.join(VERDICT_FILE), &verdict)?;
    Ok(verdict)
}
