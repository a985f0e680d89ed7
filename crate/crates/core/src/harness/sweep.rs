//! Seeded Monte-Carlo sweeps and their CSV outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::generate_channels;
use crate::driver::{alternating_optimize, no_ris_baseline, passive_baseline, AoResult};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method, SweepVariable};
use crate::system::{audit_constraints, watts_to_dbm, ReflectCoefficients, RisModel};

pub const RESULTS_HEADER: &str = "sweep_var,sweep_value,method,realization,seed,sr_nats,sr_bits,outer_iters,status,wall_ms";
pub const TRACE_HEADER: &str = "iter,sr_nats,subproblem,inner_iter,value,rank_gap";

/// One run of one method on one channel realization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub method: &'static str,
    pub realization: usize,
    pub seed: u64,
    /// Operational rate `max(SR, 0)`.
    pub sr_nats: f64,
    pub sr_bits: f64,
    pub outer_iters: usize,
    pub status: String,
    pub wall_ms: u64,
}

/// Per-run quantities that do not belong in the results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub method: &'static str,
    pub realization: usize,
    pub sr_raw_nats: f64,
    pub ris_power_w: f64,
    pub ris_power_dbm: f64,
    pub ris_budget_active: bool,
    pub element_caps_active: bool,
    pub max_rank_gap: f64,
    pub median_mm_iters: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub sr_nats: f64,
    pub subproblem: &'static str,
    pub inner_iter: usize,
    pub value: f64,
    pub rank_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub method: &'static str,
    pub runs: usize,
    pub mean_sr_nats: f64,
    pub mean_sr_bits: f64,
    pub mean_outer_iters: f64,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub row: ResultRow,
    pub diagnostics: Diagnostics,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Sorted by sweep value, method and realization.
    pub runs: Vec<RunRecord>,
}

impl SweepOutcome {
    pub fn rows(&self) -> Vec<&ResultRow> {
        self.runs.iter().map(|r| &r.row).collect()
    }

    /// Runs whose optimizer failed or never started.
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.row.status == "failed" || r.row.status == "error").count()
    }

    /// Means over the rows of each `(sweep value, method)` group.
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.runs
            .chunk_by(|a, b| a.row.sweep_value == b.row.sweep_value && a.row.method == b.row.method)
            .map(|group| {
                let k = group.len() as f64;
                let first = &group[0].row;
                SummaryRow {
                    sweep_var: first.sweep_var,
                    sweep_value: first.sweep_value,
                    method: first.method,
                    runs: group.len(),
                    mean_sr_nats: group.iter().map(|r| r.row.sr_nats).sum::<f64>() / k,
                    mean_sr_bits: group.iter().map(|r| r.row.sr_bits).sum::<f64>() / k,
                    mean_outer_iters: group.iter().map(|r| r.row.outer_iters as f64).sum::<f64>() / k,
                    failures: group.iter().filter(|r| r.row.status == "failed" || r.row.status == "error").count(),
                }
            })
            .collect()
    }

    /// Mean operational rate of `method` at the sweep value `value`.
    pub fn mean_sr(&self, value: f64, method: Method) -> Option<f64> {
        self.summary().into_iter().find(|s| s.sweep_value == value && s.method == method.name()).map(|s| s.mean_sr_nats)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Flattens the nested subproblem traces of an AO run.
pub fn ao_trace(result: &AoResult) -> Vec<TraceRow> {
    let mut rows = vec![TraceRow {
        iter: 0,
        sr_nats: result.sr_trace[0],
        subproblem: "start",
        inner_iter: 0,
        value: result.sr_trace[0],
        rank_gap: 0.0,
    }];
    for k in 1..result.sr_trace.len() {
        let sr = result.sr_trace[k];
        if let Some(steps) = result.w_traces.get(k - 1) {
            rows.extend(steps.iter().map(|s| TraceRow {
                iter: k,
                sr_nats: sr,
                subproblem: "beamformer",
                inner_iter: s.iteration,
                value: s.objective,
                rank_gap: s.gap,
            }));
        }
        if let Some(steps) = result.q_traces.get(k - 1) {
            rows.extend(steps.iter().map(|s| TraceRow {
                iter: k,
                sr_nats: sr,
                subproblem: "reflection",
                inner_iter: s.iteration,
                value: s.objective,
                rank_gap: s.rank_gap,
            }));
        }
    }
    rows
}

struct Job {
    point: usize,
    method: Method,
    realization: usize,
}

fn run_one(config: &ExperimentConfig, job: &Job) -> RunRecord {
    let point = &config.points[job.point];
    let params = &point.params;
    let seed = config.seed(job.realization);
    let start = Instant::now();
    let mut diagnostics = Diagnostics {
        sweep_var: config.variable.name(),
        sweep_value: point.value,
        method: job.method.name(),
        realization: job.realization,
        sr_raw_nats: 0.0,
        ris_power_w: 0.0,
        ris_power_dbm: f64::NEG_INFINITY,
        ris_budget_active: false,
        element_caps_active: false,
        max_rank_gap: 0.0,
        median_mm_iters: f64::NAN,
        error: String::new(),
    };

    let outcome: Result<(f64, usize, String, Vec<TraceRow>)> = generate_channels(params, &config.geometry, seed).and_then(|ch| {
        match job.method {
            Method::NoRis => {
                let (w, sr) = no_ris_baseline(&ch, params)?;
                let q = ReflectCoefficients::zeros(params.n);
                let report = audit_constraints(&ch, &w, &q, params);
                diagnostics.ris_power_w = report.ris_power;
                let trace =
                    vec![TraceRow { iter: 1, sr_nats: sr, subproblem: "closed_form", inner_iter: 0, value: sr, rank_gap: 0.0 }];
                Ok((sr, 1, "converged".to_string(), trace))
            }
            Method::Active | Method::Passive => {
                let result = if job.method == Method::Active {
                    alternating_optimize(&ch, params, &config.ao)?
                } else {
                    passive_baseline(&ch, params, &config.ao)?
                };
                let view = params.for_model(if job.method == Method::Active { RisModel::Active } else { RisModel::Passive });
                let report = audit_constraints(&ch, &result.w, &result.q, &view);
                diagnostics.ris_power_w = result.ris_power;
                diagnostics.ris_budget_active = report.ris_power_active;
                diagnostics.element_caps_active = report.all_elements_active();
                diagnostics.max_rank_gap = result.max_rank_gap;
                diagnostics.median_mm_iters = median(result.q_traces.iter().map(|t| (t.len() - 1) as f64).collect());
                if let crate::driver::AoStatus::Failed(msg) = &result.status {
                    diagnostics.error = msg.clone();
                }
                let trace = ao_trace(&result);
                Ok((result.sr, result.outer_iterations().max(1), result.status.label().to_string(), trace))
            }
        }
    });
    let wall_ms = start.elapsed().as_millis() as u64;

    let (sr, outer_iters, status, trace) = match outcome {
        Ok(v) => v,
        Err(e) => {
            diagnostics.error = e.to_string();
            (0.0, 1, "error".to_string(), Vec::new())
        }
    };
    diagnostics.sr_raw_nats = sr;
    diagnostics.ris_power_dbm = watts_to_dbm(diagnostics.ris_power_w);
    let sr_nats = sr.max(0.0);
    let row = ResultRow {
        sweep_var: config.variable.name(),
        sweep_value: point.value,
        method: job.method.name(),
        realization: job.realization,
        seed,
        sr_nats,
        sr_bits: sr_nats / std::f64::consts::LN_2,
        outer_iters,
        status,
        wall_ms,
    };
    RunRecord { row, diagnostics, trace }
}

/// Runs every `(sweep value, method, realization)` triple on `workers`
/// threads. Individual failures are recorded in the status column.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepOutcome> {
    let mut jobs = Vec::with_capacity(config.total_runs());
    for point in 0..config.points.len() {
        for &method in &config.methods {
            for realization in 0..config.realizations {
                jobs.push(Job { point, method, realization });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    // Jobs are generated in output order and collect() preserves it.
    let runs: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let record = run_one(config, job);
                log::info!(
                    "{}={} {} realization {}: sr {:.4} nats ({})",
                    record.row.sweep_var,
                    record.row.sweep_value,
                    record.row.method,
                    record.row.realization,
                    record.row.sr_nats,
                    record.row.status
                );
                record
            })
            .collect()
    });
    Ok(SweepOutcome { runs })
}

fn write_csv<T: Serialize>(path: &Path, header: Option<&str>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(header.is_none()).from_path(path)?;
    if let Some(h) = header {
        writer.write_record(h.split(','))?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn trace_file_name(variable: SweepVariable, value: f64, method: Method, realization: usize) -> String {
    format!("{}_{}_{}_r{:03}.csv", variable.name(), value, method.name(), realization)
}

/// Writes `results.csv`, `summary.csv`, `diagnostics.csv` and, when
/// `traces` is set, one convergence trace per run under `traces/`.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, outcome: &SweepOutcome, traces: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let results = dir.join("results.csv");
    write_csv(&results, Some(RESULTS_HEADER), outcome.runs.iter().map(|r| &r.row))?;
    let summary = dir.join("summary.csv");
    write_csv(&summary, None, outcome.summary())?;
    let diagnostics = dir.join("diagnostics.csv");
    write_csv(&diagnostics, None, outcome.runs.iter().map(|r| &r.diagnostics))?;
    let mut written = vec![results, summary, diagnostics];
    if traces {
        let trace_dir = dir.join("traces");
        fs::create_dir_all(&trace_dir)?;
        for run in &outcome.runs {
            let method: Method = run.row.method.parse().map_err(Error::InvalidInput)?;
            let path = trace_dir.join(trace_file_name(config.variable, run.row.sweep_value, method, run.row.realization));
            write_csv(&path, Some(TRACE_HEADER), &run.trace)?;
            written.push(path);
        }
    }
    Ok(written)
}
