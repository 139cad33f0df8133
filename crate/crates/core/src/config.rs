//! TOML run configuration mapped onto [`Scenario`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cable::CableParams;
use crate::control::{ControllerGains, PdGains};
use crate::dynamics::{RobotParams, RobotState, SpringDamperParams};
use crate::error::{Error, Result};
use crate::sim::{ControllerKind, Disturbance, GrabThresholds, IcRanges, PlantKind, Scenario};
use crate::trajectory::{load_trajectory, quintic_profile, OutputTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerChoice {
    AdaptiveRobust,
    FeedbackLinearization,
    Both,
}

impl ControllerChoice {
    pub fn kinds(self) -> Vec<ControllerKind> {
        match self {
            ControllerChoice::AdaptiveRobust => vec![ControllerKind::AdaptiveRobust],
            ControllerChoice::FeedbackLinearization => vec![ControllerKind::FeedbackLinearization],
            ControllerChoice::Both => vec![ControllerKind::AdaptiveRobust, ControllerKind::FeedbackLinearization],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub plant: PlantKind,
    pub controller: ControllerChoice,
    /// `[theta1 deg, theta2 deg, z_g m, dtheta1 deg/s, dtheta2 deg/s, dz_g m/s]`
    pub initial_state: [f64; 6],
    pub attach_x: f64,
    pub horizon: f64,
    pub swings: usize,
    pub pause: f64,
    pub seed: u64,
    pub log_rate: f64,
    pub node_log_rate: Option<f64>,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            plant: PlantKind::SpringDamper,
            controller: ControllerChoice::Both,
            initial_state: [-48.0, -98.0, 1.84, 0.0, 0.0, 0.0],
            attach_x: 2.0,
            horizon: 1.1,
            swings: 1,
            pause: 1.0,
            seed: 0,
            log_rate: 1000.0,
            node_log_rate: None,
            out: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationSection {
    pub dt: f64,
    pub control_rate: f64,
    pub dt_cable: f64,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self { dt: 1e-4, control_rate: 1000.0, dt_cable: 2e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub y0_deg: f64,
    pub yf_deg: f64,
    pub duration: f64,
    /// CSV reference replacing the quintic.
    pub file: Option<PathBuf>,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self { y0_deg: -97.0, yf_deg: 94.0, duration: 1.1, file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub n: usize,
    #[serde(flatten)]
    pub ranges: IcRanges,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { n: 20, ranges: IcRanges::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub integration: IntegrationSection,
    pub robot: RobotParams,
    /// Ground truth of the spring-damper plant.
    pub spring: SpringDamperParams,
    pub guess: GuessSection,
    pub gains: ControllerGains,
    pub baseline: PdGains,
    pub disturbance: Option<Disturbance>,
    pub cable: CableParams,
    pub trajectory: TrajectorySection,
    pub grab: GrabThresholds,
    pub monte_carlo: MonteCarloSection,
}

/// Initial parameter estimate; defaults to the 40 % off guess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuessSection {
    pub k_s: f64,
    pub b_s: f64,
    pub z_s: f64,
}

impl Default for GuessSection {
    fn default() -> Self {
        let g = SpringDamperParams::initial_guess();
        Self { k_s: g.k_s, b_s: g.b_s, z_s: g.z_s }
    }
}

/// Every config key with its unit, for help output.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("run.plant", "spring-damper | full-cable"),
    ("run.controller", "adaptive-robust | feedback-linearization | both"),
    ("run.initial_state", "[deg, deg, m, deg/s, deg/s, m/s] = theta1, theta2, z_g and rates"),
    ("run.attach_x", "m, first pivot station on the full cable"),
    ("run.horizon", "s, swing duration"),
    ("run.swings", "count"),
    ("run.pause", "s, braked pause between swings"),
    ("run.seed", "integer, Monte Carlo RNG seed"),
    ("run.log_rate", "Hz"),
    ("run.node_log_rate", "Hz, cable node dump (omit to disable)"),
    ("run.out", "output directory"),
    ("integration.dt", "s, RK4 step"),
    ("integration.control_rate", "Hz, torque zero-order hold"),
    ("integration.dt_cable", "s, cable substep"),
    ("robot.m0, m1, m2", "kg"),
    ("robot.l1, l2, d1, d2", "m"),
    ("robot.i1, i2", "kg m^2"),
    ("robot.gravity", "m/s^2"),
    ("spring.k_s", "N/m, true spring-damper stiffness"),
    ("spring.b_s", "N s/m"),
    ("spring.z_s", "m"),
    ("guess.k_s, b_s, z_s", "N/m, N s/m, m, initial estimate"),
    ("gains.lambda", "1/s"),
    ("gains.gamma", "[3], adaptation gains"),
    ("gains.phi", "rad/s, boundary-layer width"),
    ("gains.k_d0", "dimensionless, 0 < k_d0 < 1"),
    ("gains.torque_limit", "N m"),
    ("baseline.kp", "1/s^2"),
    ("baseline.kd", "1/s"),
    ("disturbance.amplitude", "N"),
    ("disturbance.frequency", "Hz"),
    ("cable.length", "m"),
    ("cable.linear_mass", "kg/m"),
    ("cable.segment_stiffness", "N/m"),
    ("cable.segment_damping", "N s/m"),
    ("cable.n_segments", "count"),
    ("cable.support_left, support_right", "[m, m]"),
    ("cable.stiffness_mode", "per-segment | total"),
    ("cable.gravity", "m/s^2"),
    ("trajectory.y0_deg, yf_deg", "deg"),
    ("trajectory.duration", "s"),
    ("trajectory.file", "path to t,y_d,yd_dot,yd_ddot CSV"),
    ("grab.capture_radius", "m"),
    ("grab.max_tip_speed", "m/s"),
    ("grab.min_advance", "m"),
    ("monte_carlo.n", "count"),
    ("monte_carlo.theta1, theta2", "[deg, deg] sampling ranges"),
];

fn section<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("[{name}] {e}")))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads a config file; relative trajectory paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(file), Some(dir)) = (&cfg.trajectory.file, path.parent()) {
            if file.is_relative() {
                cfg.trajectory.file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn guess(&self) -> SpringDamperParams {
        SpringDamperParams::new(self.guess.k_s, self.guess.b_s, self.guess.z_s)
    }

    pub fn trajectory(&self) -> Result<OutputTrajectory> {
        let t = &self.trajectory;
        section("trajectory", match &t.file {
            Some(f) => load_trajectory(f),
            None => quintic_profile(t.y0_deg.to_radians(), t.yf_deg.to_radians(), t.duration),
        })
    }

    /// Validates every section and builds the scenario for `controller`.
    pub fn scenario(&self, controller: ControllerKind) -> Result<Scenario> {
        section("robot", self.robot.validate())?;
        section("spring", self.spring.validate())?;
        section("guess", self.guess().validate())?;
        section("gains", self.gains.validate())?;
        section("cable", self.cable.validate())?;
        section("grab", self.grab.validate())?;
        section("monte_carlo", self.monte_carlo.ranges.validate())?;
        if self.baseline.kp < 0.0 || self.baseline.kd < 0.0 || !(self.baseline.kp.is_finite() && self.baseline.kd.is_finite()) {
            return Err(Error::Config("[baseline] kp and kd must be finite and non-negative".into()));
        }
        let sc = Scenario {
            plant: self.run.plant,
            robot: self.robot,
            spring: self.spring,
            cable: self.cable,
            attach_x: self.run.attach_x,
            initial: RobotState::from_degrees(self.run.initial_state),
            controller,
            gains: self.gains,
            pd: self.baseline,
            initial_guess: self.guess(),
            disturbance: self.disturbance,
            trajectory: self.trajectory()?,
            horizon: self.run.horizon,
            swings: self.run.swings,
            pause: self.run.pause,
            dt: self.integration.dt,
            control_rate: self.integration.control_rate,
            dt_cable: self.integration.dt_cable,
            log_rate: self.run.log_rate,
            node_log_rate: self.run.node_log_rate,
            grab: self.grab,
            seed: self.run.seed,
        };
        section("run", sc.validate())?;
        Ok(sc)
    }

    /// Checks the whole document without simulating anything.
    pub fn validate(&self) -> Result<()> {
        for kind in self.run.controller.kinds() {
            self.scenario(kind)?;
        }
        if self.monte_carlo.n == 0 {
            return Err(Error::Config("[monte_carlo] n must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.gains, ControllerGains::default());
        assert_eq!(cfg.guess(), SpringDamperParams::initial_guess());
        assert_eq!(cfg.run.controller.kinds().len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[gains]\nlamda = 3\n").unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
        assert!(RunConfig::from_toml_str("[nope]\n").is_err());
    }

    #[test]
    fn invalid_values_name_the_key() {
        let cfg = RunConfig::from_toml_str("[gains]\nk_d0 = 1.5\n").unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("k_d0") && err.contains("[gains]"), "{err}");
        let cfg = RunConfig::from_toml_str("[integration]\ndt = -1.0\n").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("dt"));
    }

    #[test]
    fn help_lists_every_key() {
        let mut cfg = RunConfig::default();
        cfg.disturbance = Some(Disturbance { amplitude: 1.0, frequency: 1.0 });
        cfg.run.node_log_rate = Some(100.0);
        cfg.trajectory.file = Some("t.csv".into());
        let doc: toml::Table = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        let listed: Vec<String> = CONFIG_KEYS
            .iter()
            .flat_map(|(k, _)| {
                let (section, keys) = k.split_once('.').unwrap();
                keys.split(", ").map(move |key| format!("{section}.{key}"))
            })
            .collect();
        let mut actual = Vec::new();
        for (section, v) in &doc {
            for key in v.as_table().unwrap().keys() {
                actual.push(format!("{section}.{key}"));
            }
        }
        for k in &actual {
            assert!(listed.contains(k), "{k} missing from CONFIG_KEYS");
        }
        for k in &listed {
            assert!(actual.contains(k), "{k} is not a config key");
        }
    }

    #[test]
    fn full_document_round_trip() {
        let text = r#"
            [run]
            plant = "full-cable"
            controller = "adaptive-robust"
            initial_state = [-35.0, -110.0, 1.84, 0.0, 0.0, 0.0]
            [disturbance]
            amplitude = 10.0
            frequency = 5.0
            [cable]
            stiffness_mode = "total"
            [monte_carlo]
            n = 3
            theta1 = [-50.0, -40.0]
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let sc = cfg.scenario(ControllerKind::AdaptiveRobust).unwrap();
        assert_eq!(sc.plant, PlantKind::FullCable);
        assert_eq!(sc.disturbance.unwrap().frequency, 5.0);
        assert!((sc.initial.q[1] - (-110f64).to_radians()).abs() < 1e-15);
        assert_eq!(cfg.monte_carlo.ranges.theta1, [-50.0, -40.0]);
        assert_eq!(cfg.monte_carlo.ranges.theta2, [-120.0, -60.0]);
        let back = RunConfig::from_toml_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
