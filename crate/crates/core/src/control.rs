//! Output-tracking controllers for the swing phase.
//!
//! The adaptive robust law inverts the control-affine output dynamics with an
//! online estimate of the spring-damper parameters (indirect adaptation) and
//! adds a saturated sliding-mode term whose gain grows with the distance of
//! the sliding variable outside a boundary layer (direct adaptation). Inside
//! the layer both adaptations are frozen.
//!
//! The baseline is plain input-output feedback linearization with PD error
//! feedback and a fixed parameter guess.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{output, output_rate, AffineTerms, Robot, RobotState, UncertainParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerGains {
    /// Error scaling of the sliding variable (1/s).
    pub lambda: f64,
    /// Diagonal of the parameter adaptation gain.
    pub gamma: [f64; 3],
    /// Boundary-layer width.
    pub phi: f64,
    /// Initial robust gain; also scales the gain adaptation rate.
    pub k_d0: f64,
    /// Actuator limit (N m).
    pub torque_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { lambda: 8.0, gamma: [100.0, 10.0, 100.0], phi: 0.4, k_d0: 0.5, torque_limit: 10.0 }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::param("gamma", format!("entries must be positive, got {:?}", self.gamma)));
        }
        if !(self.phi.is_finite() && self.phi > 0.0) {
            return Err(Error::param("phi", format!("must be positive, got {}", self.phi)));
        }
        if !(self.k_d0 > 0.0 && self.k_d0 < 1.0) {
            return Err(Error::param("k_d0", format!("must lie in (0, 1), got {}", self.k_d0)));
        }
        if !(self.torque_limit.is_finite() && self.torque_limit > 0.0) {
            return Err(Error::param("torque_limit", format!("must be positive, got {}", self.torque_limit)));
        }
        Ok(())
    }

    pub fn gamma_matrix(&self) -> Vector3<f64> {
        Vector3::from(self.gamma)
    }
}

/// Desired output sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OutputTarget {
    pub y_d: f64,
    pub yd_dot: f64,
    pub yd_ddot: f64,
}

/// Adaptive part of the controller, owned by one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub p_hat: UncertainParamVector,
    pub k_d: f64,
}

impl ControllerState {
    pub fn new(p_hat: UncertainParamVector, gains: &ControllerGains) -> Self {
        Self { p_hat, k_d: gains.k_d0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub e: f64,
    pub edot: f64,
    pub s: f64,
    pub s_delta: f64,
    pub v: f64,
    pub u_raw: f64,
    pub u: f64,
}

impl Diagnostics {
    pub fn saturated(&self) -> bool {
        self.u != self.u_raw
    }
}

pub fn sliding_variable(e: f64, edot: f64, lambda: f64) -> f64 {
    edot + lambda * e
}

pub fn sat(ratio: f64) -> f64 {
    ratio.clamp(-1.0, 1.0)
}

/// Distance of `s` outside the boundary layer `|s| <= phi`, signed.
pub fn boundary_layer_trajectory(s: f64, phi: f64) -> f64 {
    if s.abs() <= phi {
        0.0
    } else {
        s - phi * sat(s / phi)
    }
}

pub fn robust_term(s: f64, phi: f64, k_d: f64) -> f64 {
    k_d * sat(s / phi)
}

/// Returns `(p_hat_dot, k_d_dot)`.
pub fn adaptation_rates(s_delta: f64, h_row: &Vector3<f64>, gains: &ControllerGains) -> (Vector3<f64>, f64) {
    if s_delta == 0.0 {
        return (Vector3::zeros(), 0.0);
    }
    let p_rate = -gains.gamma_matrix().component_mul(h_row) * s_delta;
    (p_rate, gains.k_d0 * s_delta.abs())
}

/// Tracking errors `(e, edot)` of the current state against a target.
pub fn tracking_error(state: &RobotState, target: &OutputTarget) -> (f64, f64) {
    (target.y_d - output(&state.q), target.yd_dot - output_rate(state))
}

fn clip(u: f64, limit: f64) -> f64 {
    u.clamp(-limit, limit)
}

fn checked_alpha(at: &AffineTerms, state: &RobotState) -> Result<f64> {
    if at.alpha.abs() < crate::dynamics::ALPHA_EPS {
        return Err(Error::ControlSingularity { alpha: at.alpha, q: state.q.into() });
    }
    Ok(at.alpha)
}

pub fn adaptive_robust_control(
    robot: &Robot,
    state: &RobotState,
    target: &OutputTarget,
    cstate: &ControllerState,
    gains: &ControllerGains,
) -> Result<(f64, Diagnostics)> {
    let at = robot.affine_terms(state)?;
    let alpha = checked_alpha(&at, state)?;
    let (e, edot) = tracking_error(state, target);
    let s = sliding_variable(e, edot, gains.lambda);
    let s_delta = boundary_layer_trajectory(s, gains.phi);
    let v = robust_term(s, gains.phi, cstate.k_d);
    let u_raw = (target.yd_ddot - at.drift - at.h_row.dot(&cstate.p_hat.0) + v + gains.lambda * edot) / alpha;
    let u = clip(u_raw, gains.torque_limit);
    Ok((u, Diagnostics { e, edot, s, s_delta, v, u_raw, u }))
}

/// PD gains of the baseline controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 20.0, kd: 5.0 }
    }
}

/// Baseline PD feedback linearization with a fixed parameter guess. Only the
/// torque limit of `gains` acts on the control; `lambda` and `phi` scale the
/// reported sliding variable so both controllers log comparable columns.
pub fn feedback_linearization_control(
    robot: &Robot,
    state: &RobotState,
    target: &OutputTarget,
    p_assumed: &UncertainParamVector,
    pd: &PdGains,
    gains: &ControllerGains,
) -> Result<(f64, Diagnostics)> {
    let at = robot.affine_terms(state)?;
    let alpha = checked_alpha(&at, state)?;
    let (e, edot) = tracking_error(state, target);
    let u_raw = (target.yd_ddot - at.drift - at.h_row.dot(&p_assumed.0) + pd.kp * e + pd.kd * edot) / alpha;
    let u = clip(u_raw, gains.torque_limit);
    let s = sliding_variable(e, edot, gains.lambda);
    Ok((u, Diagnostics { e, edot, s, s_delta: boundary_layer_trajectory(s, gains.phi), v: 0.0, u_raw, u }))
}

/// `1/2 s_delta^2 + 1/2 p_tilde' Gamma^-1 p_tilde + 1/2 k_tilde^2`.
pub fn lyapunov_value(s_delta: f64, p_tilde: &Vector3<f64>, k_tilde: f64, gamma: &[f64; 3]) -> f64 {
    let param: f64 = p_tilde.iter().zip(gamma).map(|(p, g)| p * p / g).sum();
    0.5 * (s_delta * s_delta + param + k_tilde * k_tilde)
}

/// Robust gain that dominates a disturbance `f_d` entering through `beta`.
pub fn matching_gain(beta: f64, f_d: f64, k_d0: f64) -> f64 {
    (beta * f_d).abs() / k_d0
}
