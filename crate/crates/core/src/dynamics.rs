//! Rigid-body model of the two-link robot hanging from a vertically compliant
//! pivot.
//!
//! Generalized coordinates are `q = [theta1, theta2, z_g]`: `theta1` is the
//! pivot link measured counterclockwise from the downward vertical, `theta2`
//! the swing link relative to the extension of the pivot link, and `z_g` the
//! height of the pivot gripper. The main body mass `m0` sits at the elbow
//! joint. Generalized forces are `[0, u, F_c]`: the elbow torque acts on
//! `theta2` and the cable force acts vertically on the pivot.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the input coefficient is treated as zero.
pub const ALPHA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    /// Main body mass at the elbow (kg).
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    /// Link lengths (m).
    pub l1: f64,
    pub l2: f64,
    /// Centre-of-mass offsets, link 1 from the pivot and link 2 from the elbow (m).
    pub d1: f64,
    pub d2: f64,
    /// Link inertias about their centres of mass (kg m^2).
    pub i1: f64,
    pub i2: f64,
    pub gravity: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        let (m, l) = (1.0, 0.71);
        Self {
            m0: 2.0,
            m1: m,
            m2: m,
            l1: l,
            l2: l,
            d1: 2.0 * l / 3.0,
            d2: l / 3.0,
            i1: m * l * l / 12.0,
            i2: m * l * l / 12.0,
            gravity: 9.81,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m0", self.m0),
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("i1", self.i1), ("i2", self.i2), ("d1", self.d1), ("d2", self.d2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.d1 > self.l1 {
            return Err(Error::param("d1", format!("{} exceeds l1 = {}", self.d1, self.l1)));
        }
        if self.d2 > self.l2 {
            return Err(Error::param("d2", format!("{} exceeds l2 = {}", self.d2, self.l2)));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.m0 + self.m1 + self.m2
    }

    pub fn weight(&self) -> f64 {
        self.total_mass() * self.gravity
    }
}

/// Parallel spring-damper standing in for the cable at the pivot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringDamperParams {
    /// Stiffness (N/m).
    pub k_s: f64,
    /// Damping (N s/m).
    pub b_s: f64,
    /// Height of the fixed spring end (m).
    pub z_s: f64,
}

impl SpringDamperParams {
    pub const fn new(k_s: f64, b_s: f64, z_s: f64) -> Self {
        Self { k_s, b_s, z_s }
    }

    /// Plant values used for the spring-damper experiments.
    pub const fn reference() -> Self {
        Self::new(680.0, 20.0, 1.9)
    }

    /// Controller's starting guess, roughly 40 % off the reference plant.
    pub const fn initial_guess() -> Self {
        Self::new(400.0, 12.0, 1.6)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_s.is_finite() && self.k_s > 0.0) {
            return Err(Error::param("k_s", format!("must be positive, got {}", self.k_s)));
        }
        if !(self.b_s.is_finite() && self.b_s >= 0.0) {
            return Err(Error::param("b_s", format!("must be non-negative, got {}", self.b_s)));
        }
        if !self.z_s.is_finite() {
            return Err(Error::param("z_s", "must be finite"));
        }
        Ok(())
    }
}

impl Default for SpringDamperParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// The linearly entering parameters `[k_s, b_s, k_s * z_s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertainParamVector(pub Vector3<f64>);

impl UncertainParamVector {
    pub fn ks(&self) -> f64 {
        self.0[0]
    }

    pub fn bs(&self) -> f64 {
        self.0[1]
    }

    pub fn ks_zs(&self) -> f64 {
        self.0[2]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Spring force predicted by these parameters.
    pub fn spring_force(&self, z_g: f64, zdot_g: f64) -> f64 {
        self.ks_zs() - self.ks() * z_g - self.bs() * zdot_g
    }
}

impl From<&SpringDamperParams> for UncertainParamVector {
    fn from(sd: &SpringDamperParams) -> Self {
        Self(Vector3::new(sd.k_s, sd.b_s, sd.k_s * sd.z_s))
    }
}

impl From<SpringDamperParams> for UncertainParamVector {
    fn from(sd: SpringDamperParams) -> Self {
        Self::from(&sd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub q: Vector3<f64>,
    pub qdot: Vector3<f64>,
}

impl RobotState {
    pub fn new(q: Vector3<f64>, qdot: Vector3<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn at_rest(theta1: f64, theta2: f64, z_g: f64) -> Self {
        Self::new(Vector3::new(theta1, theta2, z_g), Vector3::zeros())
    }

    /// `[theta1, theta2, z_g, dtheta1, dtheta2, dz_g]` with angles in degrees.
    pub fn from_degrees(x: [f64; 6]) -> Self {
        Self::new(
            Vector3::new(x[0].to_radians(), x[1].to_radians(), x[2]),
            Vector3::new(x[3].to_radians(), x[4].to_radians(), x[5]),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManipulatorMatrices {
    pub mass: Matrix3<f64>,
    /// `C(q, qdot) qdot`.
    pub coriolis: Vector3<f64>,
    pub gravity: Vector3<f64>,
}

/// Output dynamics in control-affine form:
/// `yddot = drift + h_row . p + beta F_d + alpha u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTerms {
    pub drift: f64,
    pub h_row: Vector3<f64>,
    pub beta: f64,
    pub alpha: f64,
}

impl AffineTerms {
    pub fn output_acceleration(&self, p: &UncertainParamVector, f_d: f64, u: f64) -> f64 {
        self.drift + self.h_row.dot(&p.0) + self.beta * f_d + self.alpha * u
    }
}

/// Points of the kinematic chain in the vertical (x, z) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPoints {
    pub pivot: Vector2<f64>,
    pub com1: Vector2<f64>,
    pub joint: Vector2<f64>,
    pub com2: Vector2<f64>,
    pub tip: Vector2<f64>,
}

/// Chain geometry for `q`, with the pivot on the line `x = 0`.
pub fn kinematics(q: &Vector3<f64>, params: &RobotParams) -> LinkPoints {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    let pivot = Vector2::new(0.0, q[2]);
    let dir1 = Vector2::new(s1, -c1);
    let dir2 = Vector2::new(s12, -c12);
    let joint = pivot + params.l1 * dir1;
    LinkPoints {
        pivot,
        com1: pivot + params.d1 * dir1,
        joint,
        com2: joint + params.d2 * dir2,
        tip: joint + params.l2 * dir2,
    }
}

/// Force of the spring-damper on the pivot gripper.
pub fn spring_damper_force(z_g: f64, zdot_g: f64, sd: &SpringDamperParams) -> f64 {
    sd.k_s * (sd.z_s - z_g) + sd.b_s * (-zdot_g)
}

pub fn cable_surrogate_force(z_g: f64, zdot_g: f64, sd: &SpringDamperParams, f_d: f64) -> f64 {
    spring_damper_force(z_g, zdot_g, sd) + f_d
}

/// Angle of the pivot-to-tip line from the downward vertical.
pub fn output(q: &Vector3<f64>) -> f64 {
    q[0] + 0.5 * q[1]
}

pub fn output_rate(state: &RobotState) -> f64 {
    state.qdot[0] + 0.5 * state.qdot[1]
}

/// Validated robot model with the inertia constants of the closed-form
/// equations of motion precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    params: RobotParams,
    // theta1^2 coefficient of link-1 rotation plus the elbow masses
    a1: f64,
    // coefficient of (dtheta1 + dtheta2)^2 for link 2
    a2: f64,
    // cross coupling between the two links
    a3: f64,
    // first moments of the chain about the pivot and the elbow
    b1: f64,
    b2: f64,
}

impl Robot {
    pub fn new(params: RobotParams) -> Result<Self> {
        params.validate()?;
        if params.l1 != params.l2 {
            return Err(Error::UnequalLinks { l1: params.l1, l2: params.l2 });
        }
        let RobotParams { m0, m1, m2, l1, d1, d2, i1, i2, .. } = params;
        Ok(Self {
            params,
            a1: m1 * d1 * d1 + (m0 + m2) * l1 * l1 + i1,
            a2: m2 * d2 * d2 + i2,
            a3: m2 * l1 * d2,
            b1: m1 * d1 + (m0 + m2) * l1,
            b2: m2 * d2,
        })
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn kinematics(&self, q: &Vector3<f64>) -> LinkPoints {
        kinematics(q, &self.params)
    }

    pub fn tip_velocity(&self, state: &RobotState) -> Vector2<f64> {
        let (w1, w2, zd) = (state.qdot[0], state.qdot[1], state.qdot[2]);
        let (s1, c1) = state.q[0].sin_cos();
        let (s12, c12) = (state.q[0] + state.q[1]).sin_cos();
        let (l1, l2) = (self.params.l1, self.params.l2);
        Vector2::new(
            l1 * c1 * w1 + l2 * c12 * (w1 + w2),
            zd + l1 * s1 * w1 + l2 * s12 * (w1 + w2),
        )
    }

    pub fn joint_velocity(&self, state: &RobotState) -> Vector2<f64> {
        let (s1, c1) = state.q[0].sin_cos();
        let w1 = state.qdot[0];
        Vector2::new(self.params.l1 * c1 * w1, state.qdot[2] + self.params.l1 * s1 * w1)
    }

    pub fn mass_matrix(&self, q: &Vector3<f64>) -> Matrix3<f64> {
        let (s1, c2) = (q[0].sin(), q[1].cos());
        let s12 = (q[0] + q[1]).sin();
        let m11 = self.a1 + self.a2 + 2.0 * self.a3 * c2;
        let m12 = self.a2 + self.a3 * c2;
        let m13 = self.b1 * s1 + self.b2 * s12;
        let m23 = self.b2 * s12;
        Matrix3::new(
            m11,
            m12,
            m13,
            m12,
            self.a2,
            m23,
            m13,
            m23,
            self.params.total_mass(),
        )
    }

    pub fn manipulator_matrices(&self, state: &RobotState) -> ManipulatorMatrices {
        let q = &state.q;
        let (w1, w2) = (state.qdot[0], state.qdot[1]);
        let (s1, c1) = q[0].sin_cos();
        let (s12, c12) = (q[0] + q[1]).sin_cos();
        let s2 = q[1].sin();
        let w12 = w1 + w2;
        let g = self.params.gravity;

        let coriolis = Vector3::new(
            -self.a3 * s2 * w2 * (2.0 * w1 + w2),
            self.a3 * s2 * w1 * w1,
            self.b1 * c1 * w1 * w1 + self.b2 * c12 * w12 * w12,
        );
        let gravity = Vector3::new(
            g * (self.b1 * s1 + self.b2 * s12),
            g * self.b2 * s12,
            g * self.params.total_mass(),
        );
        ManipulatorMatrices { mass: self.mass_matrix(q), coriolis, gravity }
    }

    /// Solves `M qddot = [0, u, F_c] - C qdot - D`.
    pub fn forward_dynamics(&self, state: &RobotState, u: f64, f_c: f64) -> Result<Vector3<f64>> {
        let mm = self.manipulator_matrices(state);
        let rhs = Vector3::new(0.0, u, f_c) - mm.coriolis - mm.gravity;
        mm.mass
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularMassMatrix { q: state.q.into() })
    }

    pub fn affine_terms(&self, state: &RobotState) -> Result<AffineTerms> {
        let mm = self.manipulator_matrices(state);
        let lu = mm.mass.lu();
        let singular = || Error::SingularMassMatrix { q: state.q.into() };
        let free = lu.solve(&(-mm.coriolis - mm.gravity)).ok_or_else(singular)?;
        let torque = lu.solve(&Vector3::y()).ok_or_else(singular)?;
        let force = lu.solve(&Vector3::z()).ok_or_else(singular)?;

        let project = |v: Vector3<f64>| v[0] + 0.5 * v[1];
        let alpha = project(torque);
        if !(alpha.abs() >= ALPHA_EPS) {
            return Err(Error::ControlSingularity { alpha, q: state.q.into() });
        }
        let beta = project(force);
        Ok(AffineTerms {
            drift: project(free),
            h_row: beta * Vector3::new(-state.q[2], -state.qdot[2], 1.0),
            beta,
            alpha,
        })
    }

    pub fn kinetic_energy(&self, state: &RobotState) -> f64 {
        0.5 * state.qdot.dot(&(self.mass_matrix(&state.q) * state.qdot))
    }

    /// Gravitational potential with heights measured from `z = 0`.
    pub fn potential_energy(&self, q: &Vector3<f64>) -> f64 {
        let g = self.params.gravity;
        g * (self.params.total_mass() * q[2] - self.b1 * q[0].cos() - self.b2 * (q[0] + q[1]).cos())
    }

    pub fn total_energy(&self, state: &RobotState, sd: Option<&SpringDamperParams>) -> f64 {
        let spring = sd.map_or(0.0, |sd| 0.5 * sd.k_s * (sd.z_s - state.q[2]).powi(2));
        self.kinetic_energy(state) + self.potential_energy(&state.q) + spring
    }
}
