use nalgebra::Vector3;

use super::Disturbance;
use crate::control::{adaptation_rates, boundary_layer_trajectory, sliding_variable, tracking_error, ControllerGains};
use crate::dynamics::{cable_surrogate_force, Robot, RobotState, SpringDamperParams};
use crate::error::Result;
use crate::trajectory::OutputTrajectory;

/// Robot state together with the adaptation states integrated alongside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub robot: RobotState,
    pub p_hat: Vector3<f64>,
    pub k_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceModel {
    /// Spring-damper truth plus optional disturbance, evaluated at every stage.
    Surrogate { truth: SpringDamperParams, disturbance: Option<Disturbance> },
    /// Cable reaction held over the step.
    Held(f64),
}

impl ForceModel {
    pub fn force(&self, t: f64, state: &RobotState) -> f64 {
        match *self {
            ForceModel::Surrogate { truth, disturbance } => {
                let f_d = disturbance.map_or(0.0, |d| d.force(t));
                cable_surrogate_force(state.q[2], state.qdot[2], &truth, f_d)
            }
            ForceModel::Held(f) => f,
        }
    }
}

/// Everything the derivative needs besides the state itself.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepInputs<'a> {
    pub robot: &'a Robot,
    pub trajectory: &'a OutputTrajectory,
    /// Start of the current swing; the reference is sampled at `t - swing_start`.
    pub swing_start: f64,
    pub gains: &'a ControllerGains,
    pub adapt: bool,
    /// Joints locked, only the pivot height moves.
    pub braked: bool,
    pub u: f64,
    pub force: ForceModel,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Derivative {
    qdot: Vector3<f64>,
    qddot: Vector3<f64>,
    p_hat: Vector3<f64>,
    k_d: f64,
}

pub(crate) fn derivative(inp: &StepInputs, t: f64, x: &AugmentedState) -> Result<Derivative> {
    let f_c = inp.force.force(t, &x.robot);
    if inp.braked {
        let p = inp.robot.params();
        let zdd = f_c / p.total_mass() - p.gravity;
        return Ok(Derivative {
            qdot: Vector3::new(0.0, 0.0, x.robot.qdot[2]),
            qddot: Vector3::new(0.0, 0.0, zdd),
            p_hat: Vector3::zeros(),
            k_d: 0.0,
        });
    }
    let qddot = inp.robot.forward_dynamics(&x.robot, inp.u, f_c)?;
    let (p_hat, k_d) = if inp.adapt {
        let at = inp.robot.affine_terms(&x.robot)?;
        let target = inp.trajectory.sample(t - inp.swing_start);
        let (e, edot) = tracking_error(&x.robot, &target);
        let s_delta = boundary_layer_trajectory(sliding_variable(e, edot, inp.gains.lambda), inp.gains.phi);
        adaptation_rates(s_delta, &at.h_row, inp.gains)
    } else {
        (Vector3::zeros(), 0.0)
    };
    Ok(Derivative { qdot: x.robot.qdot, qddot, p_hat, k_d })
}

/// Public form of the derivative: `(qdot, qddot, p_hat_rate, k_d_rate)`.
#[allow(clippy::too_many_arguments)]
pub fn augmented_derivative(
    robot: &Robot,
    trajectory: &OutputTrajectory,
    gains: &ControllerGains,
    adapt: bool,
    u: f64,
    force: ForceModel,
    t: f64,
    x: &AugmentedState,
) -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>, f64)> {
    let inp = StepInputs { robot, trajectory, swing_start: 0.0, gains, adapt, braked: false, u, force };
    let d = derivative(&inp, t, x)?;
    Ok((d.qdot, d.qddot, d.p_hat, d.k_d))
}

fn advance(x: &AugmentedState, d: &Derivative, h: f64) -> AugmentedState {
    AugmentedState {
        robot: RobotState::new(x.robot.q + h * d.qdot, x.robot.qdot + h * d.qddot),
        p_hat: x.p_hat + h * d.p_hat,
        k_d: x.k_d + h * d.k_d,
    }
}

pub(crate) fn rk4(inp: &StepInputs, t: f64, x: &AugmentedState, dt: f64) -> Result<AugmentedState> {
    let k1 = derivative(inp, t, x)?;
    let k2 = derivative(inp, t + 0.5 * dt, &advance(x, &k1, 0.5 * dt))?;
    let k3 = derivative(inp, t + 0.5 * dt, &advance(x, &k2, 0.5 * dt))?;
    let k4 = derivative(inp, t + dt, &advance(x, &k3, dt))?;
    let w = dt / 6.0;
    let mut next = AugmentedState {
        robot: RobotState::new(
            x.robot.q + w * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot),
            x.robot.qdot + w * (k1.qddot + 2.0 * k2.qddot + 2.0 * k3.qddot + k4.qddot),
        ),
        p_hat: x.p_hat + w * (k1.p_hat + 2.0 * k2.p_hat + 2.0 * k3.p_hat + k4.p_hat),
        k_d: x.k_d + w * (k1.k_d + 2.0 * k2.k_d + 2.0 * k3.k_d + k4.k_d),
    };
    if inp.braked {
        next.robot.q.fixed_rows_mut::<2>(0).copy_from(&x.robot.q.fixed_rows::<2>(0));
        next.robot.qdot[0] = 0.0;
        next.robot.qdot[1] = 0.0;
    }
    Ok(next)
}

/// One explicit RK4 step of the robot and adaptation states with `u` held.
#[allow(clippy::too_many_arguments)]
pub fn rk4_step(
    robot: &Robot,
    trajectory: &OutputTrajectory,
    gains: &ControllerGains,
    adapt: bool,
    u: f64,
    force: ForceModel,
    t: f64,
    x: &AugmentedState,
    dt: f64,
) -> Result<AugmentedState> {
    let inp = StepInputs { robot, trajectory, swing_start: 0.0, gains, adapt, braked: false, u, force };
    rk4(&inp, t, x, dt)
}
