use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{simulate, World};
use super::log::EpisodeLog;
use super::metrics::{aggregate, compute_metrics, Aggregate, Metrics};
use super::{ControllerKind, Scenario};
use crate::dynamics::RobotState;
use crate::error::{Error, Result};

/// Sampling ranges of the initial joint angles (deg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcRanges {
    pub theta1: [f64; 2],
    pub theta2: [f64; 2],
}

impl Default for IcRanges {
    fn default() -> Self {
        Self { theta1: [-60.0, -30.0], theta2: [-120.0, -60.0] }
    }
}

impl IcRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, [a, b]) in [("theta1", self.theta1), ("theta2", self.theta2)] {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(Error::param(name, format!("range [{a}, {b}] must be finite and ordered")));
            }
        }
        Ok(())
    }
}

/// Draws `n` initial states, replacing the joint angles of `base`. Run `k`
/// uses stream `k` of a ChaCha8 generator seeded with `seed`, so each draw
/// is independent of `n`.
pub fn draw_initial_conditions(base: &RobotState, ranges: &IcRanges, n: usize, seed: u64) -> Vec<RobotState> {
    (0..n)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut uniform = |[a, b]: [f64; 2]| a + (b - a) * rng.random::<f64>();
            let t1 = uniform(ranges.theta1).to_radians();
            let t2 = uniform(ranges.theta2).to_radians();
            let mut s = *base;
            s.q[0] = t1;
            s.q[1] = t2;
            s
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub index: usize,
    pub controller: ControllerKind,
    pub initial: RobotState,
    pub metrics: Metrics,
    pub log: EpisodeLog,
    /// Set when the run could not be simulated at all.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    /// Ordered by run index, then controller.
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Runs every controller of `controllers` on the same `n` drawn initial
/// conditions. Runs execute in parallel; results are merged in index order.
pub fn monte_carlo(
    base: &Scenario,
    controllers: &[ControllerKind],
    ranges: &IcRanges,
    n: usize,
    seed: u64,
) -> Result<MonteCarloResult> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    ranges.validate()?;
    base.validate()?;
    let world = World::initial(base)?;
    let ics = draw_initial_conditions(&world.initial, ranges, n, seed);
    let jobs: Vec<(usize, ControllerKind)> =
        (0..n).flat_map(|k| controllers.iter().map(move |&c| (k, c))).collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(k, controller)| {
            let sc = Scenario { controller, initial: ics[k], seed, ..base.clone() };
            let w = World { initial: ics[k], ..world.clone() };
            match simulate(&sc, w, 1) {
                Ok(log) => {
                    let metrics = compute_metrics(&log).unwrap_or_default();
                    RunRecord { index: k, controller, initial: ics[k], metrics, log, error: None }
                }
                Err(e) => RunRecord {
                    index: k,
                    controller,
                    initial: ics[k],
                    metrics: Metrics::default(),
                    log: EpisodeLog::default(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let aggregates = controllers
        .iter()
        .map(|&c| {
            let ok: Vec<Metrics> = runs.iter().filter(|r| r.controller == c && r.error.is_none()).map(|r| r.metrics).collect();
            let mut a = aggregate(c.label(), &ok);
            a.runs = runs.iter().filter(|r| r.controller == c).count();
            a
        })
        .collect();
    Ok(MonteCarloResult { runs, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_deterministic_and_in_range() {
        let base = RobotState::at_rest(0.0, 0.0, 1.84);
        let r = IcRanges::default();
        let a = draw_initial_conditions(&base, &r, 50, 7);
        let b = draw_initial_conditions(&base, &r, 20, 7);
        assert_eq!(&a[..20], &b[..]);
        for s in &a {
            let (t1, t2) = (s.q[0].to_degrees(), s.q[1].to_degrees());
            assert!((-60.0..=-30.0).contains(&t1) && (-120.0..=-60.0).contains(&t2));
            assert_eq!(s.q[2], 1.84);
        }
        assert_ne!(a[0], a[1]);
        assert_ne!(draw_initial_conditions(&base, &r, 1, 8)[0], a[0]);
    }

    #[test]
    fn degenerate_range_repeats_one_ic() {
        let base = RobotState::at_rest(0.0, 0.0, 1.84);
        let r = IcRanges { theta1: [-40.0, -40.0], theta2: [-90.0, -90.0] };
        let d = draw_initial_conditions(&base, &r, 5, 1);
        assert!(d.iter().all(|s| *s == d[0]));
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(IcRanges { theta1: [0.0, -1.0], ..Default::default() }.validate().is_err());
    }
}
