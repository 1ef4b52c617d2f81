//! Output files of a run: per-round CSV, diagnostics CSV, histogram CSV and
//! the JSON summary. Everything written here is a pure function of the
//! config and seed, so repeated runs produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::TraceEntry;
use crate::error::{Error, Result};
use crate::meter::BinHistogram;
use crate::protocol::RoundRecord;

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SHARDS_FILE: &str = "shards.json";

pub const ROUNDS_SCHEMA: &str = "# fedelastic rounds v1";
pub const DIAGNOSTICS_SCHEMA: &str = "# fedelastic diagnostics v1";
pub const HISTOGRAM_SCHEMA: &str = "# fedelastic histogram v1";

/// Worst `γ` identity deviation tolerated.
pub const GAMMA_TOLERANCE: f64 = 1e-12;
/// Worst `h` identity deviation tolerated in `ε = 0` runs.
pub const H_TOLERANCE: f64 = 1e-9;

fn output_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Output(format!("{}: {e}", path.display()))
}

/// A row type with a fixed column list and schema comment.
pub trait CsvRow: Serialize {
    const SCHEMA: &'static str;
    const COLUMNS: &'static [&'static str];
}

/// CSV writer with a leading schema comment line. Rows are flushed as they
/// arrive so a crashed run still leaves every completed round on disk.
pub struct CsvSink<R> {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    _row: PhantomData<R>,
}

impl<R: CsvRow> CsvSink<R> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{}", R::SCHEMA).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(buf);
        writer.write_record(R::COLUMNS).map_err(|e| output_err(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(CsvSink {
            path: path.to_path_buf(),
            writer,
            _row: PhantomData,
        })
    }

    pub fn write(&mut self, row: &R) -> Result<()> {
        self.writer.serialize(row).map_err(|e| output_err(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// One line of `rounds.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundRow {
    pub round: usize,
    pub variant: &'static str,
    pub nnz_cum: u64,
    pub bits_cum: f64,
    #[serde(rename = "H_round")]
    pub h_round: f64,
    pub elements_round: u64,
    pub participants: usize,
    pub nnz_round: u64,
    pub bits_round: f64,
    pub update_norm: f64,
    pub train_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub gamma_identity_dev: Option<f64>,
    pub h_identity_dev: Option<f64>,
    pub alt_nnz_cum: Option<u64>,
    pub alt_bits_cum: Option<f64>,
}

impl CsvRow for RoundRow {
    const SCHEMA: &'static str = ROUNDS_SCHEMA;
    const COLUMNS: &'static [&'static str] = &[
        "round",
        "variant",
        "nnz_cum",
        "bits_cum",
        "H_round",
        "elements_round",
        "participants",
        "nnz_round",
        "bits_round",
        "update_norm",
        "train_loss",
        "test_accuracy",
        "gamma_identity_dev",
        "h_identity_dev",
        "alt_nnz_cum",
        "alt_bits_cum",
    ];
}

impl From<&RoundRecord> for RoundRow {
    fn from(r: &RoundRecord) -> Self {
        RoundRow {
            round: r.round,
            variant: r.variant,
            nnz_cum: r.nnz_cum,
            bits_cum: r.bits_cum,
            h_round: r.cost.entropy,
            elements_round: r.cost.elements,
            participants: r.participants,
            nnz_round: r.cost.nonzero,
            bits_round: r.cost.bits,
            update_norm: r.update_norm,
            train_loss: r.train_loss,
            test_accuracy: r.test_accuracy,
            gamma_identity_dev: r.gamma_deviation,
            h_identity_dev: r.h_deviation,
            alt_nnz_cum: r.shadow_nnz_cum,
            alt_bits_cum: r.shadow_bits_cum,
        }
    }
}

/// One line of `diagnostics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub round: usize,
    pub gamma_gap: Option<f64>,
    pub risk_gap: f64,
    #[serde(rename = "C_t")]
    pub c_t: Option<f64>,
    pub eps_t: Option<f64>,
    pub sign_term: Option<f64>,
    pub h_identity_dev: Option<f64>,
    pub iterate_gap: f64,
    #[serde(rename = "C_t_unsquared")]
    pub c_t_unsquared: Option<f64>,
}

impl CsvRow for DiagnosticsRow {
    const SCHEMA: &'static str = DIAGNOSTICS_SCHEMA;
    const COLUMNS: &'static [&'static str] = &[
        "round",
        "gamma_gap",
        "risk_gap",
        "C_t",
        "eps_t",
        "sign_term",
        "h_identity_dev",
        "iterate_gap",
        "C_t_unsquared",
    ];
}

impl From<&TraceEntry> for DiagnosticsRow {
    fn from(e: &TraceEntry) -> Self {
        DiagnosticsRow {
            round: e.round,
            gamma_gap: e.gamma_deviation,
            risk_gap: e.risk_gap,
            c_t: e.c_t,
            eps_t: e.eps_t,
            sign_term: e.sign_term,
            h_identity_dev: e.h_deviation,
            iterate_gap: e.iterate_gap,
            c_t_unsquared: e.c_t_unsquared,
        }
    }
}

/// One occupied bin of the pooled update histogram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin: i64,
    pub lower: f64,
    pub upper: f64,
    pub count: u64,
}

impl CsvRow for HistogramRow {
    const SCHEMA: &'static str = HISTOGRAM_SCHEMA;
    const COLUMNS: &'static [&'static str] = &["bin", "lower", "upper", "count"];
}

pub fn write_histogram(path: &Path, histogram: &BinHistogram, bin: f64) -> Result<()> {
    let mut sink = CsvSink::<HistogramRow>::create(path)?;
    for (index, count) in histogram.iter() {
        sink.write(&HistogramRow {
            bin: index,
            lower: index as f64 * bin,
            upper: (index + 1) as f64 * bin,
            count,
        })?;
    }
    sink.finish()
}

pub fn write_diagnostics(path: &Path, entries: &[TraceEntry]) -> Result<()> {
    let mut sink = CsvSink::<DiagnosticsRow>::create(path)?;
    for e in entries {
        sink.write(&DiagnosticsRow::from(e))?;
    }
    sink.finish()
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pass/fail of a numeric identity against its tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityVerdict {
    /// Worst deviation seen; `None` if the run never measured it.
    pub max_deviation: Option<f64>,
    pub tolerance: f64,
    /// `false` when the identity is not expected to hold (e.g. `ε > 0`).
    pub applicable: bool,
    pub passed: Option<bool>,
}

impl IdentityVerdict {
    pub fn new(values: impl Iterator<Item = Option<f64>>, tolerance: f64, applicable: bool) -> Self {
        let max_deviation = values.flatten().reduce(f64::max);
        IdentityVerdict {
            max_deviation,
            tolerance,
            applicable,
            passed: max_deviation.filter(|_| applicable).map(|v| v <= tolerance),
        }
    }
}
