//! Independent replications of an episode and their aggregate metrics.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{map_indexed, Execution};

use super::episode::{episode_seed, run_episode, EpisodeLog, SafetyStats};
use super::metrics::{rmse, success_rate, ErrorTensor};
use super::scenario::{CompiledScenario, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub index: usize,
    pub seed: u64,
    pub rmse_position_m: f64,
    pub rmse_velocity_mps: f64,
    pub safety: SafetyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub agent: usize,
    pub rmse_position_m: f64,
    pub rmse_velocity_mps: f64,
    pub success_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub master_seed: u64,
    pub steps: usize,
    pub agents: usize,
    pub runs: usize,
    pub thresholds_m: Vec<f64>,
    pub success_rate: Vec<f64>,
    /// Root mean square over every step, agent and run.
    pub rmse_position_m: f64,
    pub rmse_velocity_mps: f64,
    pub per_agent: Vec<AgentMetrics>,
    pub episodes: Vec<EpisodeSummary>,
    /// Worst case over all runs; penetrations are summed.
    pub safety: SafetyStats,
}

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub report: MetricsReport,
    pub errors: ErrorTensor,
    /// Full log of the first run, when requested.
    pub first_log: Option<EpisodeLog>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MonteCarloOptions {
    pub exec: Execution,
    pub keep_first_log: bool,
}

struct EpisodeResult {
    position: Vec<f64>,
    velocity: Vec<f64>,
    summary: EpisodeSummary,
    log: Option<EpisodeLog>,
}

/// Runs the scenario's `monte_carlo` episodes with seeds derived from its
/// master seed.
pub fn run_monte_carlo(scenario: &Scenario, opts: MonteCarloOptions) -> Result<MonteCarloRun> {
    let compiled = scenario.compile()?;
    run_compiled(
        &scenario.name,
        &compiled,
        scenario.seed,
        scenario.monte_carlo,
        &scenario.thresholds_m,
        opts,
    )
}

pub fn run_compiled(
    name: &str,
    sc: &CompiledScenario,
    master_seed: u64,
    runs: usize,
    thresholds: &[f64],
    opts: MonteCarloOptions,
) -> Result<MonteCarloRun> {
    let results = map_indexed(runs, opts.exec, |m| -> Result<EpisodeResult> {
        let seed = episode_seed(master_seed, m as u64);
        let log = run_episode(sc, seed)?;
        let position = log.position_errors();
        let velocity = log.velocity_errors();
        let summary = EpisodeSummary {
            index: m,
            seed,
            rmse_position_m: rmse(&position),
            rmse_velocity_mps: rmse(&velocity),
            safety: log.safety(&sc.obstacles),
        };
        let log = (opts.keep_first_log && m == 0).then_some(log);
        Ok(EpisodeResult {
            position,
            velocity,
            summary,
            log,
        })
    });

    let mut errors = ErrorTensor {
        steps: sc.steps,
        agents: sc.count,
        position: Vec::with_capacity(runs),
        velocity: Vec::with_capacity(runs),
    };
    let mut episodes = Vec::with_capacity(runs);
    let mut first_log = None;
    for r in results {
        let r = r?;
        errors.position.push(r.position);
        errors.velocity.push(r.velocity);
        episodes.push(r.summary);
        if r.log.is_some() {
            first_log = r.log;
        }
    }

    let safety = episodes.iter().fold(
        SafetyStats {
            min_inter_uav_m: f64::INFINITY,
            min_obstacle_clearance_m: f64::INFINITY,
            obstacle_penetrations: 0,
        },
        |acc, e| SafetyStats {
            min_inter_uav_m: acc.min_inter_uav_m.min(e.safety.min_inter_uav_m),
            min_obstacle_clearance_m: acc
                .min_obstacle_clearance_m
                .min(e.safety.min_obstacle_clearance_m),
            obstacle_penetrations: acc.obstacle_penetrations + e.safety.obstacle_penetrations,
        },
    );
    let per_agent = (0..sc.count)
        .map(|i| {
            let p = errors.agent_position(i);
            AgentMetrics {
                agent: i,
                rmse_position_m: rmse(&p),
                rmse_velocity_mps: rmse(&errors.agent_velocity(i)),
                success_rate: success_rate(&p, thresholds),
            }
        })
        .collect();
    let all_p = errors.all_position();
    let report = MetricsReport {
        scenario: name.to_string(),
        master_seed,
        steps: sc.steps,
        agents: sc.count,
        runs,
        thresholds_m: thresholds.to_vec(),
        success_rate: success_rate(&all_p, thresholds),
        rmse_position_m: rmse(&all_p),
        rmse_velocity_mps: rmse(&errors.all_velocity()),
        per_agent,
        episodes,
        safety,
    };
    Ok(MonteCarloRun {
        report,
        errors,
        first_log,
    })
}
