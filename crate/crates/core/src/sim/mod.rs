//! Episode orchestration: integration, grabs, gripper swaps, logging,
//! metrics and Monte Carlo batches.

mod episode;
mod grab;
mod integrate;
mod log;
mod metrics;
mod monte_carlo;
mod swap;

pub use episode::{run_continuous, run_swing, World};
pub use grab::{grab_check, GrabGeometry, GrabResult, GrabThresholds};
pub use integrate::{augmented_derivative, rk4_step, AugmentedState, ForceModel};
pub use log::{EpisodeLog, Event, EventKind, LogRow, NodeDump, EPISODE_HEADER, EVENTS_HEADER};
pub use metrics::{aggregate, compute_metrics, Aggregate, Metrics, AGGREGATE_HEADER};
pub use monte_carlo::{draw_initial_conditions, monte_carlo, IcRanges, MonteCarloResult, RunRecord};
pub use swap::swap_grippers;

use serde::{Deserialize, Serialize};

use crate::cable::CableParams;
use crate::control::{ControllerGains, PdGains};
use crate::dynamics::{RobotParams, RobotState, SpringDamperParams};
use crate::error::{Error, Result};
use crate::trajectory::{quintic_profile, OutputTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantKind {
    SpringDamper,
    FullCable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    AdaptiveRobust,
    FeedbackLinearization,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::AdaptiveRobust => "adaptive-robust",
            ControllerKind::FeedbackLinearization => "feedback-linearization",
        }
    }
}

/// `F_d(t) = amplitude * sin(2 pi frequency t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Disturbance {
    pub fn force(&self, t: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * self.frequency * t).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantKind,
    pub robot: RobotParams,
    /// Ground truth of the surrogate plant.
    pub spring: SpringDamperParams,
    pub cable: CableParams,
    /// Horizontal station of the first pivot on the full cable (m).
    pub attach_x: f64,
    pub initial: RobotState,
    pub controller: ControllerKind,
    pub gains: ControllerGains,
    pub pd: PdGains,
    /// Starting estimate of the adaptive controller and the fixed model of the baseline.
    pub initial_guess: SpringDamperParams,
    pub disturbance: Option<Disturbance>,
    pub trajectory: OutputTrajectory,
    pub horizon: f64,
    pub swings: usize,
    pub pause: f64,
    /// Plant and adaptation step (s).
    pub dt: f64,
    /// Zero-order-hold rate of the torque (Hz).
    pub control_rate: f64,
    pub dt_cable: f64,
    pub log_rate: f64,
    /// Rate of cable node snapshots (Hz); none disables them.
    pub node_log_rate: Option<f64>,
    pub grab: GrabThresholds,
    pub seed: u64,
}

impl Scenario {
    /// Single swing on the spring-damper surrogate with the default quintic
    /// reference from -97 deg to 94 deg over 1.1 s.
    pub fn surrogate_default() -> Self {
        Self {
            plant: PlantKind::SpringDamper,
            robot: RobotParams::default(),
            spring: SpringDamperParams::reference(),
            cable: CableParams::default(),
            attach_x: 2.0,
            initial: RobotState::from_degrees([-35.0, -110.0, 1.84, 0.0, 0.0, 0.0]),
            controller: ControllerKind::AdaptiveRobust,
            gains: ControllerGains::default(),
            pd: PdGains::default(),
            initial_guess: SpringDamperParams::initial_guess(),
            disturbance: None,
            trajectory: default_trajectory(),
            horizon: 1.1,
            swings: 1,
            pause: 1.0,
            dt: 1e-4,
            control_rate: 1000.0,
            dt_cable: 2e-6,
            log_rate: 1000.0,
            node_log_rate: None,
            grab: GrabThresholds::default(),
            seed: 0,
        }
    }

    pub fn full_cable_default() -> Self {
        Self { plant: PlantKind::FullCable, ..Self::surrogate_default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        self.spring.validate()?;
        self.initial_guess.validate()?;
        self.cable.validate()?;
        let positive = [
            ("horizon", self.horizon),
            ("dt", self.dt),
            ("control_rate", self.control_rate),
            ("dt_cable", self.dt_cable),
            ("log_rate", self.log_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.pause.is_finite() && self.pause >= 0.0) {
            return Err(Error::param("pause", "must be non-negative"));
        }
        if self.swings == 0 {
            return Err(Error::param("swings", "must be at least 1"));
        }
        if !self.initial.is_finite() {
            return Err(Error::param("initial", "state must be finite"));
        }
        for (name, period) in [("control_rate", 1.0 / self.control_rate), ("log_rate", 1.0 / self.log_rate)] {
            if !is_multiple(period, self.dt) {
                return Err(Error::param(name, format!("period {period} s is not a multiple of dt = {}", self.dt)));
            }
        }
        if let Some(rate) = self.node_log_rate {
            if !(rate > 0.0 && is_multiple(1.0 / rate, self.dt)) {
                return Err(Error::param("node_log_rate", "period must be a positive multiple of dt"));
            }
        }
        if !is_multiple(self.horizon, self.dt) || !is_multiple(self.pause, self.dt) {
            return Err(Error::param("horizon/pause", "must be multiples of dt"));
        }
        if self.plant == PlantKind::FullCable {
            if !is_multiple(self.dt, self.dt_cable) {
                return Err(Error::param("dt_cable", "must divide dt"));
            }
            let (a, b) = (self.cable.support_left[0], self.cable.support_right[0]);
            if !(self.attach_x > a.min(b) && self.attach_x < a.max(b)) {
                return Err(Error::param("attach_x", "must lie between the supports"));
            }
        }
        if let Some(d) = self.disturbance {
            if !(d.amplitude.is_finite() && d.frequency.is_finite() && d.frequency >= 0.0) {
                return Err(Error::param("disturbance", "amplitude and frequency must be finite, frequency >= 0"));
            }
        }
        self.grab.validate()
    }
}

pub fn default_trajectory() -> OutputTrajectory {
    quintic_profile((-97f64).to_radians(), 94f64.to_radians(), 1.1).expect("valid default profile")
}

pub(crate) fn steps(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

fn is_multiple(x: f64, dt: f64) -> bool {
    let n = (x / dt).round();
    (n * dt - x).abs() <= 1e-9 * x.abs().max(dt)
}
