use nalgebra::Vector2;

use super::grab::{grab_check, GrabGeometry, GrabResult};
use super::integrate::{rk4, AugmentedState, ForceModel, StepInputs};
use super::log::{EpisodeLog, EventKind, LogRow};
use super::metrics::metrics_of;
use super::swap::swap_grippers;
use super::{steps, ControllerKind, PlantKind, Scenario};
use crate::cable::{advance_slaved, attachment_reaction, static_equilibrium, CableState};
use crate::control::{
    adaptive_robust_control, boundary_layer_trajectory, feedback_linearization_control, lyapunov_value,
    matching_gain, sliding_variable, tracking_error, ControllerState, Diagnostics,
};
use crate::dynamics::{output, output_rate, Robot, RobotState, UncertainParamVector};
use crate::error::{Error, Result};

/// Plant state outside the robot: the cable (full-cable plants) and the
/// horizontal station of the pivot gripper.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub cable: Option<CableState>,
    pub pivot_x: f64,
    /// Initial robot state after the pivot height is matched to the relaxed cable.
    pub initial: RobotState,
}

impl World {
    /// Full-cable plants start from the cable relaxed under the robot's
    /// weight at the node nearest `attach_x`; the pivot height of the
    /// initial state is replaced by that node's height.
    pub fn initial(sc: &Scenario) -> Result<World> {
        match sc.plant {
            PlantKind::SpringDamper => Ok(World { cable: None, pivot_x: sc.attach_x, initial: sc.initial }),
            PlantKind::FullCable => {
                let straight = CableState::straight(&sc.cable);
                let node = straight.nearest_node(sc.attach_x);
                let cable = static_equilibrium(&sc.cable, Some((node, sc.robot.weight())))?;
                let p = cable.node_pos[node];
                let mut initial = sc.initial;
                initial.q[2] = p.y;
                Ok(World { cable: Some(cable), pivot_x: p.x, initial })
            }
        }
    }
}

struct Runner<'a> {
    sc: &'a Scenario,
    robot: Robot,
    x: AugmentedState,
    world: World,
    log: EpisodeLog,
    p_assumed: UncertainParamVector,
    u: f64,
    u_raw: f64,
    saturated: bool,
    scratch: Vec<Vector2<f64>>,
    /// Global step counter; `t = k * dt`.
    k: usize,
    swing_start: f64,
}

impl<'a> Runner<'a> {
    fn t(&self) -> f64 {
        self.k as f64 * self.sc.dt
    }

    fn controller_state(&self) -> ControllerState {
        ControllerState { p_hat: UncertainParamVector(self.x.p_hat), k_d: self.x.k_d }
    }

    fn control(&self, t: f64) -> Result<(f64, Diagnostics)> {
        let target = self.sc.trajectory.sample(t - self.swing_start);
        let s = &self.x.robot;
        match self.sc.controller {
            ControllerKind::AdaptiveRobust => {
                adaptive_robust_control(&self.robot, s, &target, &self.controller_state(), &self.sc.gains)
            }
            ControllerKind::FeedbackLinearization => {
                feedback_linearization_control(&self.robot, s, &target, &self.p_assumed, &self.sc.pd, &self.sc.gains)
            }
        }
    }

    fn cable_force(&self) -> Result<f64> {
        match &self.world.cable {
            Some(c) => attachment_reaction(c, &self.sc.cable),
            None => Err(Error::NoAttachment),
        }
    }

    fn force_model(&self) -> Result<ForceModel> {
        Ok(match self.sc.plant {
            PlantKind::SpringDamper => ForceModel::Surrogate { truth: self.sc.spring, disturbance: self.sc.disturbance },
            PlantKind::FullCable => ForceModel::Held(self.cable_force()?),
        })
    }

    fn step(&mut self, braked: bool) -> Result<()> {
        let t = self.t();
        let force = self.force_model()?;
        let inp = StepInputs {
            robot: &self.robot,
            trajectory: &self.sc.trajectory,
            swing_start: self.swing_start,
            gains: &self.sc.gains,
            adapt: !braked && self.sc.controller == ControllerKind::AdaptiveRobust,
            braked,
            u: if braked { 0.0 } else { self.u },
            force,
        };
        let next = rk4(&inp, t, &self.x, self.sc.dt)?;
        if !next.robot.is_finite() {
            return Err(Error::SingularMassMatrix { q: self.x.robot.q.into() });
        }
        if let Some(cable) = &mut self.world.cable {
            let z0 = self.x.robot.q[2];
            let z1 = (next.robot.q[2], next.robot.qdot[2]);
            advance_slaved(cable, &self.sc.cable, z0, z1, self.sc.dt, self.sc.dt_cable, &mut self.scratch)?;
        }
        self.x = next;
        self.k += 1;
        Ok(())
    }

    fn log_row(&mut self, paused: bool) {
        let t = self.t();
        let sc = self.sc;
        let state = self.x.robot;
        let target = sc.trajectory.sample(t - self.swing_start);
        let (e, edot) = tracking_error(&state, &target);
        let s = sliding_variable(e, edot, sc.gains.lambda);
        let s_delta = boundary_layer_trajectory(s, sc.gains.phi);
        let f_d = match sc.plant {
            PlantKind::SpringDamper => sc.disturbance.map_or(0.0, |d| d.force(t)),
            PlantKind::FullCable => 0.0,
        };
        let f_c = self.force_model().map_or(f64::NAN, |f| f.force(t, &state));
        let v = match (sc.plant, sc.controller) {
            (PlantKind::SpringDamper, ControllerKind::AdaptiveRobust) => {
                let p_true = UncertainParamVector::from(&sc.spring).0;
                let beta = self.robot.affine_terms(&state).map_or(0.0, |a| a.beta);
                let k_bar = matching_gain(beta, f_d, sc.gains.k_d0);
                Some(lyapunov_value(s_delta, &(self.x.p_hat - p_true), self.x.k_d - k_bar, &sc.gains.gamma))
            }
            _ => None,
        };
        let (u, u_raw) = if paused { (0.0, 0.0) } else { (self.u, self.u_raw) };
        self.log.rows.push(LogRow {
            t,
            q: state.q.into(),
            qdot: state.qdot.into(),
            y: output(&state.q),
            ydot: output_rate(&state),
            y_d: target.y_d,
            yd_dot: target.yd_dot,
            u,
            u_raw,
            s,
            s_delta,
            k_d: self.x.k_d,
            p_hat: self.x.p_hat.into(),
            f_c,
            f_d,
            v,
            paused,
        });
    }

    fn log_nodes(&mut self) {
        if let (Some(rate), Some(cable)) = (self.sc.node_log_rate, &self.world.cable) {
            let every = steps(1.0 / rate, self.sc.dt).max(1);
            if self.k % every == 0 {
                self.log.nodes.push((self.t(), cable.node_pos.clone()));
            }
        }
    }

    fn apply_control(&mut self) -> Result<()> {
        let (u, diag) = self.control(self.t())?;
        let sat = diag.saturated();
        if sat && !self.saturated {
            self.log.push_event(self.t(), EventKind::Saturation);
        }
        self.saturated = sat;
        self.u = u;
        self.u_raw = diag.u_raw;
        Ok(())
    }

    fn abort(&mut self, err: Error) -> Result<()> {
        match err {
            Error::ControlSingularity { .. } | Error::SingularMassMatrix { .. } => {
                self.log.push_event(self.t(), EventKind::SingularityAbort);
                self.log.aborted = true;
                Ok(())
            }
            other => Err(other),
        }
    }

    fn geometry_check(&self) -> GrabResult {
        let geometry = match &self.world.cable {
            Some(c) => GrabGeometry::Cable(c),
            None => GrabGeometry::Line(self.x.robot.q[2]),
        };
        grab_check(&self.robot, &self.x.robot, self.world.pivot_x, geometry, &self.sc.grab)
    }

    /// Simulates one swing; returns whether the grab succeeded.
    fn swing(&mut self) -> Result<bool> {
        let sc = self.sc;
        let n = steps(sc.horizon, sc.dt);
        let ctrl_every = steps(1.0 / sc.control_rate, sc.dt).max(1);
        let log_every = steps(1.0 / sc.log_rate, sc.dt).max(1);
        let first_row = self.log.rows.len();
        self.swing_start = self.t();
        self.log.push_event(self.t(), EventKind::Release);
        self.log.pivot_stations.push(self.world.pivot_x);
        for j in 0..=n {
            if j % ctrl_every == 0 {
                if let Err(e) = self.apply_control() {
                    self.abort(e)?;
                    break;
                }
            }
            if j % log_every == 0 || j == n {
                self.log_row(false);
            }
            self.log_nodes();
            if j == n {
                break;
            }
            if let Err(e) = self.step(false) {
                self.abort(e)?;
                break;
            }
        }
        if let Ok(m) = metrics_of(self.log.rows[first_row..].iter()) {
            self.log.per_swing.push(m);
        }
        if self.log.aborted {
            return Ok(false);
        }
        let grab = self.geometry_check();
        let ok = grab.success;
        if let Some(m) = self.log.per_swing.last_mut() {
            m.success = ok;
        }
        self.log.push_event(self.t(), if ok { EventKind::Grab } else { EventKind::GrabFailed });
        Ok(ok)
    }

    /// Joints braked while the pivot keeps riding the cable.
    fn pause(&mut self) -> Result<()> {
        let sc = self.sc;
        let n = steps(sc.pause, sc.dt);
        let log_every = steps(1.0 / sc.log_rate, sc.dt).max(1);
        self.x.robot.qdot[0] = 0.0;
        self.x.robot.qdot[1] = 0.0;
        self.log.push_event(self.t(), EventKind::PauseStart);
        for j in 1..=n {
            if let Err(e) = self.step(true) {
                return self.abort(e);
            }
            // the next swing logs the sample at the pause end
            if j % log_every == 0 && j < n {
                self.log_row(true);
            }
            self.log_nodes();
        }
        self.log.push_event(self.t(), EventKind::PauseEnd);
        Ok(())
    }

    /// Hands the pivot role to the swing gripper at the cable point it caught.
    fn swap(&mut self) -> Result<()> {
        let grab = self.geometry_check();
        let point = match &mut self.world.cable {
            Some(cable) => {
                let node = cable.nearest_node(grab.tip.x);
                let p = cable.node_pos[node];
                let (next, x) = swap_grippers(&self.robot, &self.x.robot, &p);
                cable.attach(node, next.q[2], next.qdot[2])?;
                self.x.robot = next;
                x
            }
            None => {
                let (next, x) = swap_grippers(&self.robot, &self.x.robot, &grab.grab_point);
                self.x.robot = next;
                x
            }
        };
        self.world.pivot_x = point;
        self.log.push_event(self.t(), EventKind::Swap);
        Ok(())
    }
}

/// Runs up to `swings` swings from an already prepared world.
pub(crate) fn simulate(sc: &Scenario, world: World, swings: usize) -> Result<EpisodeLog> {
    sc.validate()?;
    let robot = Robot::new(sc.robot)?;
    let p0 = UncertainParamVector::from(&sc.initial_guess);
    let cstate = ControllerState::new(p0, &sc.gains);
    let x = AugmentedState { robot: world.initial, p_hat: p0.0, k_d: cstate.k_d };
    let mut r = Runner {
        sc,
        robot,
        x,
        world,
        log: EpisodeLog::default(),
        p_assumed: p0,
        u: 0.0,
        u_raw: 0.0,
        saturated: false,
        scratch: Vec::new(),
        k: 0,
        swing_start: 0.0,
    };
    for i in 0..swings {
        if !r.swing()? {
            break;
        }
        r.log.swings_completed += 1;
        if i + 1 < swings {
            r.pause()?;
            if r.log.aborted {
                break;
            }
            r.swap()?;
        } else {
            let grab = r.geometry_check();
            r.log.pivot_stations.push(grab.grab_point.x);
        }
    }
    r.log.success = !r.log.aborted && r.log.swings_completed == swings;
    Ok(r.log)
}

/// Single swing over `[0, horizon]` with a grab check at the end.
pub fn run_swing(sc: &Scenario) -> Result<EpisodeLog> {
    simulate(sc, World::initial(sc)?, 1)
}

/// `sc.swings` consecutive swings separated by braked pauses and gripper
/// swaps. Estimates carry over between swings; the run stops at the first
/// failed grab.
pub fn run_continuous(sc: &Scenario) -> Result<EpisodeLog> {
    simulate(sc, World::initial(sc)?, sc.swings)
}

impl EpisodeLog {
    /// Net horizontal progress of the pivot over the episode (m).
    pub fn progress(&self) -> f64 {
        match (self.pivot_stations.first(), self.pivot_stations.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}
