//! Command implementations behind the `lonscape` binary.

pub mod config;

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lonscape::evaluate::EvalError;
use lonscape::lon::export::{comparison_csv, edges_csv, lon_stats_csv, nodes_csv, run_stats_csv, to_dot, to_graphml};
use lonscape::lon::{build_lon, classify_quartiles, lon_summary, Lon, LonError, LonFileError};
use lonscape::sampler::{ils_run, LogError, RunLog};
use lonscape::stats::compare_encodings;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LON_FILE: &str = "lon.json";
pub const LON_STATS_FILE: &str = "lon_stats.csv";
pub const RUN_STATS_FILE: &str = "run_stats.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Backend(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Schema(_) => 4,
            CliError::Io(_) | CliError::Input(_) => 1,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Backend(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub logs: Vec<String>,
}

pub fn log_file_name(run_id: u32) -> String {
    format!("run-{run_id:03}.jsonl")
}

/// Run every ILS trajectory of `cfg` on a pool of `jobs` workers (0 picks
/// the processor count) and write one log per run plus a manifest.
pub fn cmd_sample(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let ils = cfg.ils();
    let run_ids: Vec<u32> = (0..ils.runs)
        .map(|r| u32::try_from(r).map_err(|_| CliError::Config("too many runs".into())))
        .collect::<Result<_, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let logs: Vec<RunLog> = pool.install(|| {
        run_ids
            .par_iter()
            .map(|&r| {
                let mut evaluator = cfg.evaluator.connect()?;
                Ok(ils_run(r, &ils, evaluator.as_mut())?)
            })
            .collect::<Result<_, CliError>>()
    })?;

    create_dir(out)?;
    let mut paths = Vec::new();
    for log in &logs {
        let path = out.join(log_file_name(log.run_id));
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        log.write_jsonl(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&path, e))?;
        paths.push(path);
    }
    let manifest = Manifest {
        schema: lonscape::SCHEMA_VERSION,
        config_digest: cfg.digest(),
        config: cfg.clone(),
        logs: logs.iter().map(|l| log_file_name(l.run_id)).collect(),
    };
    let path = out.join(MANIFEST_FILE);
    write_file(
        &path,
        &(serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n"),
    )?;
    Ok(paths)
}

fn read_manifest(dir: &Path) -> Result<Option<Manifest>, CliError> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if v.get("schema").and_then(|s| s.as_u64()) != Some(u64::from(lonscape::SCHEMA_VERSION)) {
        return Err(CliError::Schema(format!(
            "{} has an unsupported schema",
            path.display()
        )));
    }
    serde_json::from_value(v)
        .map(Some)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Read every `*.jsonl` run log in `dir`, ordered by run id.
pub fn read_logs(dir: &Path) -> Result<Vec<RunLog>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut logs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            continue;
        }
        let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
        let log = RunLog::read_jsonl(BufReader::new(file)).map_err(|e| match e {
            LogError::Schema(_) => CliError::Schema(format!("{}: {e}", path.display())),
            LogError::Io(err) => io_err(&path, err),
            other => CliError::Input(format!("{}: {other}", path.display())),
        })?;
        logs.push(log);
    }
    if logs.is_empty() {
        return Err(CliError::Input(format!("no run logs found in {}", dir.display())));
    }
    logs.sort_by_key(|l| l.run_id);
    Ok(logs)
}

fn lon_err(context: &Path, e: LonError) -> CliError {
    match e {
        LonError::SchemaMismatch(_) => CliError::Schema(format!("{}: {e}", context.display())),
        other => CliError::Input(format!("{}: {other}", context.display())),
    }
}

/// Merge the logs in `log_dir` into `out/lon.json`.
pub fn cmd_build(log_dir: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let logs = read_logs(log_dir)?;
    let mut lon = build_lon(&logs).map_err(|e| lon_err(log_dir, e))?;
    if let Some(m) = read_manifest(log_dir)? {
        lon.provenance.config_digest = m.config_digest;
    }
    create_dir(out)?;
    let path = out.join(LON_FILE);
    write_file(&path, &(lon.to_json() + "\n"))?;
    Ok(path)
}

pub fn read_lon(path: &Path) -> Result<Lon, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Lon::from_json(&text).map_err(|e| match e {
        LonFileError::Lon(inner) => lon_err(path, inner),
        LonFileError::Json(inner) => CliError::Input(format!("{}: {inner}", path.display())),
    })
}

/// Column labels: the encoding name, suffixed when an encoding repeats.
pub fn lon_labels(lons: &[Lon]) -> Vec<String> {
    let mut labels = Vec::with_capacity(lons.len());
    for (i, lon) in lons.iter().enumerate() {
        let name = lon.provenance.encoding.name();
        let earlier = lons[..i]
            .iter()
            .filter(|l| l.provenance.encoding == lon.provenance.encoding)
            .count();
        labels.push(if earlier == 0 {
            name.to_string()
        } else {
            format!("{name}-{}", earlier + 1)
        });
    }
    labels
}

fn read_lons(paths: &[PathBuf]) -> Result<Vec<Lon>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Input("no LON files given".into()));
    }
    paths.iter().map(|p| read_lon(p)).collect()
}

/// Network and run statistics tables, one column per LON.
pub fn cmd_metrics(lon_paths: &[PathBuf], out: &Path) -> Result<[PathBuf; 2], CliError> {
    let lons = read_lons(lon_paths)?;
    let labels = lon_labels(&lons);
    let summaries: Vec<_> = labels.iter().cloned().zip(lons.iter().map(lon_summary)).collect();
    let runs: Vec<_> = labels
        .iter()
        .cloned()
        .zip(lons.iter().map(|l| l.run_statistics))
        .collect();
    create_dir(out)?;
    let a = out.join(LON_STATS_FILE);
    let b = out.join(RUN_STATS_FILE);
    write_file(&a, &lon_stats_csv(&summaries))?;
    write_file(&b, &run_stats_csv(&runs))?;
    Ok([a, b])
}

/// Pairwise U tests of every per-LON distribution.
pub fn cmd_compare(lon_paths: &[PathBuf], out: &Path) -> Result<PathBuf, CliError> {
    let lons = read_lons(lon_paths)?;
    if lons.len() < 2 {
        return Err(CliError::Input("compare needs at least two LON files".into()));
    }
    let labels = lon_labels(&lons);
    let samples: Vec<_> = lons.iter().map(Lon::metric_samples).collect();
    let mut rows = Vec::new();
    for (m, (metric, _)) in samples[0].iter().enumerate() {
        let groups: Vec<(String, Vec<f64>)> = labels
            .iter()
            .cloned()
            .zip(samples.iter().map(|s| s[m].1.clone()))
            .collect();
        rows.extend(compare_encodings(metric, &groups));
    }
    create_dir(out)?;
    let path = out.join(COMPARISON_FILE);
    write_file(&path, &comparison_csv(&rows))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Graphml,
    Dot,
    Csv,
}

/// Write each LON in `format`, colouring nodes by quartiles pooled over all
/// of the given LONs.
pub fn cmd_export(lon_paths: &[PathBuf], format: ExportFormat, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut lons = read_lons(lon_paths)?;
    classify_quartiles(&mut lons);
    let labels = lon_labels(&lons);
    create_dir(out)?;
    let mut written = Vec::new();
    for (lon, label) in lons.iter().zip(&labels) {
        let files = match format {
            ExportFormat::Graphml => vec![(format!("{label}.graphml"), to_graphml(lon))],
            ExportFormat::Dot => vec![(format!("{label}.dot"), to_dot(lon))],
            ExportFormat::Csv => vec![
                (format!("{label}_nodes.csv"), nodes_csv(lon)),
                (format!("{label}_edges.csv"), edges_csv(lon)),
            ],
        };
        for (name, text) in files {
            let path = out.join(name);
            write_file(&path, &text)?;
            written.push(path);
        }
    }
    Ok(written)
}
