//! Scenarios, the episode loop, Monte Carlo replication and metrics.

pub mod episode;
pub mod metrics;
pub mod monte_carlo;
pub mod presets;
pub mod scenario;

pub use episode::{
    episode_seed, initial_positions, run_episode, AgentStep, EpisodeLog, SafetyStats, StepLog,
};
pub use metrics::{rmse, success_rate, ErrorTensor};
pub use monte_carlo::{
    run_compiled, run_monte_carlo, MetricsReport, MonteCarloOptions, MonteCarloRun,
};
pub use scenario::{CompiledScenario, Scenario};
