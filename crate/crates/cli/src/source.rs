//! Where a scenario comes from and the command-line overrides applied to it.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use drn_core::harness::presets;
use drn_core::harness::scenario::Capability;
use drn_core::harness::Scenario;
use serde::Serialize;

use crate::error::CliError;

#[derive(Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CapArg {
    Ranging,
    Bearing,
    Doppler,
}

impl From<CapArg> for Capability {
    fn from(c: CapArg) -> Self {
        match c {
            CapArg::Ranging => Capability::Ranging,
            CapArg::Bearing => Capability::Bearing,
            CapArg::Doppler => Capability::Doppler,
        }
    }
}

/// Communication radius; `inf` means unlimited.
#[derive(Debug, Clone, Copy)]
pub struct RMax(pub Option<f64>);

pub fn parse_r_max(s: &str) -> Result<RMax, String> {
    match s {
        "inf" | "none" | "unlimited" => Ok(RMax(None)),
        _ => s
            .parse::<f64>()
            .map(|v| RMax(if v.is_infinite() { None } else { Some(v) }))
            .map_err(|e| e.to_string()),
    }
}

#[derive(Args, Default)]
pub struct Overrides {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo runs.
    #[arg(long)]
    pub mc: Option<usize>,
    /// Time steps per episode.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of UAVs.
    #[arg(long)]
    pub uavs: Option<usize>,
    /// Ranging standard deviation at 1 m against 1 m², m.
    #[arg(long)]
    pub sigma_r0: Option<f64>,
    /// Bearing beamwidth, degrees.
    #[arg(long)]
    pub sigma_b0: Option<f64>,
    /// Target radar cross section, m².
    #[arg(long)]
    pub rho: Option<f64>,
    /// Chirps per frame, used to derive the Doppler variance.
    #[arg(long)]
    pub n_chirp: Option<u32>,
    /// Maximum relay hops per exchange.
    #[arg(long)]
    pub h_max: Option<usize>,
    /// Single-hop radius in metres, or `inf`.
    #[arg(long, value_parser = parse_r_max)]
    pub r_max: Option<RMax>,
    /// Radar capabilities, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub caps: Option<Vec<CapArg>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Applied {
    pub flag: String,
    pub value: String,
}

impl Overrides {
    /// Applies every given override and lists them in flag order.
    pub fn apply(&self, s: &mut Scenario) -> Vec<Applied> {
        let mut applied = Vec::new();
        let mut note = |flag: &str, value: String| {
            applied.push(Applied {
                flag: flag.to_string(),
                value,
            })
        };
        if let Some(v) = self.seed {
            s.seed = v;
            note("seed", v.to_string());
        }
        if let Some(v) = self.mc {
            s.monte_carlo = v;
            note("mc", v.to_string());
        }
        if let Some(v) = self.steps {
            s.steps = v;
            note("steps", v.to_string());
        }
        if let Some(v) = self.uavs {
            s.fleet.count = v;
            note("uavs", v.to_string());
        }
        if let Some(v) = self.sigma_r0 {
            s.radar.sigma_r0_m = v;
            note("sigma-r0", v.to_string());
        }
        if let Some(v) = self.sigma_b0 {
            s.radar.sigma_b0_deg = v;
            note("sigma-b0", v.to_string());
        }
        if let Some(v) = self.rho {
            s.target.rcs_m2 = v;
            note("rho", v.to_string());
        }
        if let Some(v) = self.n_chirp {
            s.radar.chirp.n_chirp = v;
            note("n-chirp", v.to_string());
        }
        if let Some(v) = self.h_max {
            s.comms.h_max = v;
            note("h-max", v.to_string());
        }
        if let Some(RMax(v)) = self.r_max {
            s.comms.r_max_m = v;
            note("r-max", v.map_or("inf".to_string(), |r| r.to_string()));
        }
        if let Some(caps) = &self.caps {
            s.fleet.caps = caps.iter().map(|&c| c.into()).collect();
            let names: Vec<&str> = caps
                .iter()
                .map(|c| match c {
                    CapArg::Ranging => "ranging",
                    CapArg::Bearing => "bearing",
                    CapArg::Doppler => "doppler",
                })
                .collect();
            note("caps", names.join(","));
        }
        applied
    }
}

impl Source {
    pub fn path_string(&self) -> Option<String> {
        self.scenario.as_ref().map(|p| p.display().to_string())
    }

    fn load(&self) -> Result<Scenario, CliError> {
        if let Some(path) = &self.scenario {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.display().to_string(),
                source,
            })?;
            return Ok(Scenario::from_json(&text)?);
        }
        let name = self.preset.as_deref().unwrap_or_default();
        presets::by_name(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown preset {name:?}; known: {}",
                presets::NAMES.join(", ")
            ))
        })
    }

    /// Loads, overrides and validates.
    pub fn resolve(&self, overrides: &Overrides) -> Result<(Scenario, Vec<Applied>), CliError> {
        let mut s = self.load()?;
        let applied = overrides.apply(&mut s);
        s.validate()?;
        Ok((s, applied))
    }
}
