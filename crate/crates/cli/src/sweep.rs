//! One-dimensional parameter sweeps.

use drn_core::exec::Execution;
use drn_core::harness::{run_compiled, MonteCarloOptions, Scenario};

use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    SigmaR0,
    SigmaB0,
    Rho,
    NChirp,
    HMax,
    RMax,
}

impl Axis {
    pub const ALL: [Axis; 7] = [
        Axis::N,
        Axis::SigmaR0,
        Axis::SigmaB0,
        Axis::Rho,
        Axis::NChirp,
        Axis::HMax,
        Axis::RMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::SigmaR0 => "sigma_r0",
            Axis::SigmaB0 => "sigma_b0",
            Axis::Rho => "rho",
            Axis::NChirp => "n_chirp",
            Axis::HMax => "h_max",
            Axis::RMax => "r_max",
        }
    }

    fn from_name(s: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name() == s)
    }

    fn integer(self) -> bool {
        matches!(self, Axis::N | Axis::NChirp | Axis::HMax)
    }

    fn apply(self, s: &mut Scenario, v: f64) {
        match self {
            Axis::N => s.fleet.count = v as usize,
            Axis::SigmaR0 => s.radar.sigma_r0_m = v,
            Axis::SigmaB0 => s.radar.sigma_b0_deg = v,
            Axis::Rho => s.target.rcs_m2 = v,
            Axis::NChirp => s.radar.chirp.n_chirp = v as u32,
            Axis::HMax => s.comms.h_max = v as usize,
            Axis::RMax => s.comms.r_max_m = v.is_finite().then_some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axis: Axis,
    /// Unlimited `r_max` is `+inf`.
    pub values: Vec<f64>,
}

impl Grid {
    /// Parses `axis=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Grid, CliError> {
        let (name, list) = spec.split_once('=').ok_or_else(|| {
            CliError::Usage(format!(
                "axis spec {spec:?} is not of the form axis=v1,v2,..."
            ))
        })?;
        let axis = Axis::from_name(name.trim()).ok_or_else(|| {
            let known: Vec<&str> = Axis::ALL.iter().map(|a| a.name()).collect();
            CliError::Usage(format!(
                "unknown axis {name:?}; known: {}",
                known.join(", ")
            ))
        })?;
        let mut values = Vec::new();
        for item in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let v = match item {
                "inf" | "none" | "unlimited" if axis == Axis::RMax => f64::INFINITY,
                _ => item.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("{}: cannot parse grid value {item:?}", axis.name()))
                })?,
            };
            if v.is_nan() || (axis.integer() && (v.fract() != 0.0 || v < 0.0 || v.is_infinite())) {
                return Err(CliError::Usage(format!(
                    "{}: invalid grid value {item:?}",
                    axis.name()
                )));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(CliError::Usage(format!("{}: empty grid", axis.name())));
        }
        Ok(Grid { axis, values })
    }

    pub fn labels(&self) -> Vec<String> {
        self.values.iter().map(|&v| num(v)).collect()
    }

    /// The scenario at every grid point, validated up front so that a bad
    /// value fails before any run starts.
    pub fn scenarios(&self, base: &Scenario) -> Result<Vec<Scenario>, CliError> {
        self.values
            .iter()
            .map(|&v| {
                let mut s = base.clone();
                self.axis.apply(&mut s, v);
                s.validate()?;
                Ok(s)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub success_rate: Vec<f64>,
    pub rmse_position_m: f64,
    pub rmse_velocity_mps: f64,
}

/// Every grid point uses the same master seed.
pub fn run_sweep(
    base: &Scenario,
    grid: &Grid,
    thresholds: &[f64],
    exec: Execution,
) -> Result<Vec<SweepRow>, CliError> {
    let scenarios = grid.scenarios(base)?;
    let mut rows = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let compiled = s.compile()?;
        let run = run_compiled(
            &s.name,
            &compiled,
            s.seed,
            s.monte_carlo,
            thresholds,
            MonteCarloOptions {
                exec,
                keep_first_log: false,
            },
        )?;
        rows.push(SweepRow {
            success_rate: run.report.success_rate,
            rmse_position_m: run.report.rmse_position_m,
            rmse_velocity_mps: run.report.rmse_velocity_mps,
        });
    }
    Ok(rows)
}
