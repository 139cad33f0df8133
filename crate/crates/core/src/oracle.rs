//! Finite-difference Lagrangian of the robot, built only from the chain
//! geometry in [`kinematics`]. Used to cross-check the closed-form equations
//! of motion in tests and in the `validate` command.

use std::ops::{Mul, Sub};

use nalgebra::{Matrix2x3, Matrix3, Vector3};

use crate::dynamics::{kinematics, RobotParams};

const JACOBIAN_STEP: f64 = 1e-3;
const COORD_STEP: f64 = 1e-3;

/// Five-point central difference of `f` at zero.
fn derivative<T>(f: impl Fn(f64) -> T, h: f64) -> T
where
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    (f(h) - f(-h)) * (2.0 / (3.0 * h)) - (f(2.0 * h) - f(-2.0 * h)) * (1.0 / (12.0 * h))
}

fn shifted(q: &Vector3<f64>, k: usize, d: f64) -> Vector3<f64> {
    let mut q = *q;
    q[k] += d;
    q
}

pub struct LagrangianOracle {
    params: RobotParams,
}

/// Point-mass Jacobians and absolute-angle gradients at one configuration.
struct ChainJacobians {
    com1: Matrix2x3<f64>,
    joint: Matrix2x3<f64>,
    com2: Matrix2x3<f64>,
    link1_angle: Vector3<f64>,
    link2_angle: Vector3<f64>,
}

impl LagrangianOracle {
    pub fn new(params: RobotParams) -> Self {
        Self { params }
    }

    fn link_angles(&self, q: &Vector3<f64>) -> (f64, f64) {
        let pts = kinematics(q, &self.params);
        let a = pts.joint - pts.pivot;
        let b = pts.tip - pts.joint;
        // angle from the downward vertical
        (a.x.atan2(-a.y), b.x.atan2(-b.y))
    }

    fn jacobians(&self, q: &Vector3<f64>) -> ChainJacobians {
        let mut jac = ChainJacobians {
            com1: Matrix2x3::zeros(),
            joint: Matrix2x3::zeros(),
            com2: Matrix2x3::zeros(),
            link1_angle: Vector3::zeros(),
            link2_angle: Vector3::zeros(),
        };
        let h = JACOBIAN_STEP;
        let a0 = self.link_angles(q);
        for k in 0..3 {
            let pts = |d: f64| kinematics(&shifted(q, k, d), &self.params);
            jac.com1.set_column(k, &derivative(|d| pts(d).com1, h));
            jac.joint.set_column(k, &derivative(|d| pts(d).joint, h));
            jac.com2.set_column(k, &derivative(|d| pts(d).com2, h));
            let angles = |d: f64| self.link_angles(&shifted(q, k, d));
            jac.link1_angle[k] = derivative(|d| wrap(angles(d).0 - a0.0), h);
            jac.link2_angle[k] = derivative(|d| wrap(angles(d).1 - a0.1), h);
        }
        jac
    }

    pub fn kinetic_energy(&self, q: &Vector3<f64>, qdot: &Vector3<f64>) -> f64 {
        let p = &self.params;
        let j = self.jacobians(q);
        let w1 = j.link1_angle.dot(qdot);
        let w2 = j.link2_angle.dot(qdot);
        0.5 * (p.m1 * (j.com1 * qdot).norm_squared()
            + p.m0 * (j.joint * qdot).norm_squared()
            + p.m2 * (j.com2 * qdot).norm_squared()
            + p.i1 * w1 * w1
            + p.i2 * w2 * w2)
    }

    pub fn potential_energy(&self, q: &Vector3<f64>) -> f64 {
        let p = &self.params;
        let pts = kinematics(q, p);
        p.gravity * (p.m1 * pts.com1.y + p.m0 * pts.joint.y + p.m2 * pts.com2.y)
    }

    /// Hessian of the kinetic energy in the velocities. The energy is exactly
    /// quadratic in `qdot`, so a unit step is exact up to rounding.
    pub fn mass_matrix(&self, q: &Vector3<f64>) -> Matrix3<f64> {
        let t = |v: Vector3<f64>| self.kinetic_energy(q, &v);
        let e = |i: usize| Vector3::ith(i, 1.0);
        Matrix3::from_fn(|i, j| (t(e(i) + e(j)) - t(e(i) - e(j)) - t(e(j) - e(i)) + t(-e(i) - e(j))) / 4.0)
    }

    pub fn gravity(&self, q: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|k, _| derivative(|d| self.potential_energy(&shifted(q, k, d)), JACOBIAN_STEP))
    }

    /// `C(q, qdot) qdot = d/dt(dT/dqdot) - dT/dq` evaluated with `qddot = 0`.
    pub fn coriolis(&self, q: &Vector3<f64>, qdot: &Vector3<f64>) -> Vector3<f64> {
        let h = COORD_STEP;
        let dmomentum = derivative(|d| self.mass_matrix(&(q + d * qdot)) * qdot, h);
        let dtdq = Vector3::from_fn(|k, _| derivative(|d| self.kinetic_energy(&shifted(q, k, d), qdot), h));
        dmomentum - dtdq
    }

    pub fn forward_dynamics(&self, q: &Vector3<f64>, qdot: &Vector3<f64>, u: f64, f_c: f64) -> Option<Vector3<f64>> {
        let rhs = Vector3::new(0.0, u, f_c) - self.coriolis(q, qdot) - self.gravity(q);
        self.mass_matrix(q).lu().solve(&rhs)
    }
}

fn wrap(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (a + PI).rem_euclid(TAU) - PI
}

/// Max-norm error of `a` against `b`, relative to `max(|b|, 1)`.
pub fn relative_error<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for (x, y) in a.into_iter().zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(y.abs());
    }
    diff / scale
}
