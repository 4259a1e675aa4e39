//! Output files and the run manifest.
//!
//! Every file is rendered in memory first and only written once the run has
//! succeeded; files are staged next to their destination and renamed, so a
//! failed run leaves nothing behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use drn_core::harness::{EpisodeLog, MetricsReport, Scenario};
use serde::Serialize;

use crate::error::CliError;
use crate::source::Applied;
use crate::sweep::{Grid, SweepRow};

pub const MANIFEST: &str = "manifest.json";

/// Shortest decimal that round-trips, with `inf`/`-inf`/`NaN` spelled out.
pub fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

pub fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s.into_bytes()
}

fn csv_bytes(
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| CliError::Write(e.into_error()))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn sr_curve_csv(r: &MetricsReport) -> Result<Vec<u8>, CliError> {
    let mut header = strings(&["threshold_m", "success_rate"]);
    header.extend((0..r.agents).map(|i| format!("agent_{i}")));
    let rows = r.thresholds_m.iter().enumerate().map(|(j, t)| {
        let mut row = vec![num(*t), num(r.success_rate[j])];
        row.extend(r.per_agent.iter().map(|a| num(a.success_rate[j])));
        row
    });
    csv_bytes(&header, rows)
}

/// Pooled over all runs and agents first, then one row per agent.
pub fn rmse_csv(r: &MetricsReport) -> Result<Vec<u8>, CliError> {
    let header = strings(&["scope", "target_position_m", "target_velocity_mps"]);
    let mut rows = vec![vec![
        "all".to_string(),
        num(r.rmse_position_m),
        num(r.rmse_velocity_mps),
    ]];
    rows.extend(r.per_agent.iter().map(|a| {
        vec![
            format!("agent_{}", a.agent),
            num(a.rmse_position_m),
            num(a.rmse_velocity_mps),
        ]
    }));
    csv_bytes(&header, rows)
}

pub fn trajectory_csv(log: &EpisodeLog) -> Result<Vec<u8>, CliError> {
    let header = strings(&[
        "k",
        "agent",
        "x_m",
        "y_m",
        "z_m",
        "est_x_m",
        "est_y_m",
        "est_z_m",
        "est_vx_mps",
        "est_vy_mps",
        "est_vz_mps",
        "target_x_m",
        "target_y_m",
        "target_z_m",
        "target_vx_mps",
        "target_vy_mps",
        "target_vz_mps",
        "error_m",
        "cost",
        "active_constraints",
        "los",
        "fallback",
        "blocked",
    ]);
    let mut rows = Vec::new();
    for step in &log.steps {
        let t = &step.target;
        for (i, a) in step.agents.iter().enumerate() {
            let mut row = vec![step.k.to_string(), i.to_string()];
            row.extend(a.position.iter().map(|v| num(*v)));
            row.extend(a.estimate.iter().map(|v| num(*v)));
            row.extend(t.position.iter().chain(t.velocity.iter()).map(|v| num(*v)));
            row.push(num((a.estimate.fixed_rows::<3>(0) - t.position).norm()));
            row.push(num(a.cost));
            row.push(a.active_constraints.to_string());
            row.push(a.los.to_string());
            row.push(a.fallback.to_string());
            row.push(a.blocked.to_string());
            rows.push(row);
        }
    }
    csv_bytes(&header, rows)
}

pub fn sweep_csv(grid: &Grid, thresholds: &[f64], rows: &[SweepRow]) -> Result<Vec<u8>, CliError> {
    let mut header = vec![grid.axis.name().to_string()];
    header.extend(thresholds.iter().map(|t| format!("sr_{}", num(*t))));
    header.extend(strings(&["rmse_position_m", "rmse_velocity_mps"]));
    let body = grid.labels().into_iter().zip(rows).map(|(label, r)| {
        let mut row = vec![label];
        row.extend(r.success_rate.iter().map(|s| num(*s)));
        row.push(num(r.rmse_position_m));
        row.push(num(r.rmse_velocity_mps));
        row
    });
    csv_bytes(&header, body)
}

#[derive(Debug, Serialize)]
pub struct SweepRecord {
    pub axis: String,
    pub values: Vec<String>,
    pub thresholds_m: Vec<f64>,
}

/// Everything needed to repeat a run: the resolved scenario is embedded
/// alongside where it came from and which flags changed it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub scenario_path: Option<String>,
    pub preset: Option<String>,
    pub overrides: Vec<Applied>,
    pub sweep: Option<SweepRecord>,
    pub master_seed: u64,
    pub tool_version: &'static str,
    /// Worker threads requested; `null` means all cores.
    pub threads: Option<usize>,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
    /// File names inside the output directory, the manifest included.
    pub outputs: Vec<String>,
    pub scenario: Scenario,
}

pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    /// Writes every file plus the manifest listing them. Nothing is renamed
    /// into place until all files are staged.
    pub fn commit(mut self, mut manifest: RunManifest) -> Result<(), CliError> {
        manifest.outputs = self.files.iter().map(|(n, _)| n.clone()).collect();
        manifest.outputs.push(MANIFEST.to_string());
        self.files.push((MANIFEST.to_string(), json(&manifest)));

        std::fs::create_dir_all(&self.dir)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = tempfile::Builder::new()
                .prefix(".drn-")
                .tempfile_in(&self.dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, self.dir.join(name)));
        }
        for (tmp, dest) in staged {
            tmp.persist(&dest).map_err(|e| CliError::Write(e.error))?;
        }
        Ok(())
    }
}
