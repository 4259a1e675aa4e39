//! Success rate and RMSE over error samples.

/// Fraction of errors `e` with `e <= th`, for every threshold `th`.
/// An empty sample yields zeros.
pub fn success_rate(errors: &[f64], thresholds: &[f64]) -> Vec<f64> {
    if errors.is_empty() {
        return vec![0.0; thresholds.len()];
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    thresholds
        .iter()
        .map(|&th| sorted.partition_point(|&e| e <= th) as f64 / n)
        .collect()
}

/// Root of the mean squared error; zero for an empty sample.
pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Position and velocity errors of every run, each laid out step-major then
/// agent, as produced by [`super::EpisodeLog::position_errors`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTensor {
    pub steps: usize,
    pub agents: usize,
    pub position: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
}

impl ErrorTensor {
    pub fn runs(&self) -> usize {
        self.position.len()
    }

    pub fn all_position(&self) -> Vec<f64> {
        self.position.concat()
    }

    pub fn all_velocity(&self) -> Vec<f64> {
        self.velocity.concat()
    }

    /// Position errors of every run and agent for steps `k` in `from..=to`
    /// (1-based, clipped to the run length).
    pub fn position_window(&self, from: usize, to: usize) -> Vec<f64> {
        let lo = from.max(1) - 1;
        let hi = to.min(self.steps);
        if lo >= hi {
            return Vec::new();
        }
        self.position
            .iter()
            .flat_map(|run| run[lo * self.agents..hi * self.agents].iter().copied())
            .collect()
    }

    pub fn agent_position(&self, agent: usize) -> Vec<f64> {
        column(&self.position, agent, self.agents)
    }

    pub fn agent_velocity(&self, agent: usize) -> Vec<f64> {
        column(&self.velocity, agent, self.agents)
    }
}

fn column(runs: &[Vec<f64>], agent: usize, agents: usize) -> Vec<f64> {
    runs.iter()
        .flat_map(|run| run.iter().skip(agent).step_by(agents.max(1)).copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn success_rate_examples() {
        assert_eq!(
            success_rate(&[0.0; 8], &[0.0, 1.0, 5.0]),
            vec![1.0, 1.0, 1.0]
        );
        let mixed = [2.0, 0.5, 2.0, 0.5];
        assert_eq!(success_rate(&mixed, &[1.0]), vec![0.5]);
        // Equality counts as a success.
        assert_eq!(success_rate(&mixed, &[2.0]), vec![1.0]);
        assert_eq!(success_rate(&[], &[1.0]), vec![0.0]);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0; 5]), 0.0);
        assert!((rmse(&[2.0; 7]) - 2.0).abs() < 1e-15);
        assert!((rmse(&[3.0, 4.0]) - 12.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tensor_slices() {
        // Two runs, three steps, two agents; value = 100 run + 10 k + agent.
        let run = |r: f64| {
            (1..=3)
                .flat_map(move |k| (0..2).map(move |i| 100.0 * r + 10.0 * k as f64 + i as f64))
                .collect()
        };
        let t = ErrorTensor {
            steps: 3,
            agents: 2,
            position: vec![run(0.0), run(1.0)],
            velocity: vec![run(0.0), run(1.0)],
        };
        assert_eq!(t.position_window(2, 2), vec![20.0, 21.0, 120.0, 121.0]);
        assert_eq!(t.position_window(3, 99), vec![30.0, 31.0, 130.0, 131.0]);
        assert!(t.position_window(4, 5).is_empty());
        assert_eq!(
            t.agent_position(1),
            vec![11.0, 21.0, 31.0, 111.0, 121.0, 131.0]
        );
        assert_eq!(t.all_position().len(), 12);
    }

    proptest! {
        #[test]
        fn success_rate_is_monotone(
            errors in prop::collection::vec(0.0f64..50.0, 1..200),
            mut th in prop::collection::vec(0.0f64..60.0, 1..20),
        ) {
            th.sort_by(f64::total_cmp);
            let sr = success_rate(&errors, &th);
            for w in sr.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert!(sr.iter().all(|v| (0.0..=1.0).contains(v)));
            // Brute-force count.
            for (t, s) in th.iter().zip(&sr) {
                let c = errors.iter().filter(|&&e| t - e >= 0.0).count() as f64 / errors.len() as f64;
                prop_assert_eq!(c, *s);
            }
        }

        #[test]
        fn rmse_ignores_order(mut errors in prop::collection::vec(0.0f64..50.0, 1..100)) {
            let a = rmse(&errors);
            errors.reverse();
            prop_assert!((a - rmse(&errors)).abs() <= 1e-12 * a.max(1.0));
            let max = errors.iter().cloned().fold(0.0, f64::max);
            prop_assert!(a <= max + 1e-12);
        }
    }
}
