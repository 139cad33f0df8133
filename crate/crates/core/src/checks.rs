//! Model invariants checked on demand by the `validate` command and by tests.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cable::{attachment_reaction, static_equilibrium, CableParams};
use crate::dynamics::{spring_damper_force, Robot, RobotParams, RobotState, SpringDamperParams, UncertainParamVector};
use crate::error::Result;
use crate::oracle::{relative_error, LagrangianOracle};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Random configuration with angles in `[-pi, pi]`, `z_g` in `[1, 3]` m and
/// rates in `[-5, 5]`.
pub fn random_state(rng: &mut impl Rng) -> RobotState {
    use std::f64::consts::PI;
    let mut r = |a: f64, b: f64| a + (b - a) * rng.random::<f64>();
    RobotState::new(
        Vector3::new(r(-PI, PI), r(-PI, PI), r(1.0, 3.0)),
        Vector3::new(r(-5.0, 5.0), r(-5.0, 5.0), r(-5.0, 5.0)),
    )
}

/// Unforced response to the spring-damper force from `x0`, integrated with
/// RK4. Returns the final state and the energy dissipated by the damper.
pub fn free_response(robot: &Robot, sd: &SpringDamperParams, x0: RobotState, duration: f64, dt: f64) -> Result<(RobotState, f64)> {
    type X = (Vector3<f64>, Vector3<f64>, f64);
    let f = |x: &X| -> Result<X> {
        let s = RobotState::new(x.0, x.1);
        let f_c = spring_damper_force(s.q[2], s.qdot[2], sd);
        let qdd = robot.forward_dynamics(&s, 0.0, f_c)?;
        Ok((x.1, qdd, sd.b_s * x.1[2] * x.1[2]))
    };
    let add = |x: &X, k: &X, h: f64| (x.0 + h * k.0, x.1 + h * k.1, x.2 + h * k.2);
    let mut x: X = (x0.q, x0.qdot, 0.0);
    for _ in 0..(duration / dt).round() as usize {
        let k1 = f(&x)?;
        let k2 = f(&add(&x, &k1, dt / 2.0))?;
        let k3 = f(&add(&x, &k2, dt / 2.0))?;
        let k4 = f(&add(&x, &k3, dt))?;
        x = (
            x.0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            x.1 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
            x.2 + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
        );
    }
    Ok((RobotState::new(x.0, x.1), x.2))
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Runs the invariant suite on `samples` random configurations.
pub fn invariant_suite(params: &RobotParams, cable: &CableParams, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let robot = Robot::new(*params)?;
    let oracle = LagrangianOracle::new(*params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut spd_fail, mut oracle_err, mut affine_err) = (0usize, 0.0f64, 0.0f64);
    let p = UncertainParamVector::from(&SpringDamperParams::reference());
    let mut tested = 0usize;
    for _ in 0..samples {
        let s = random_state(&mut rng);
        let mm = robot.manipulator_matrices(&s);
        if (mm.mass - mm.mass.transpose()).abs().max() > 1e-12 || mm.mass.cholesky().is_none() {
            spd_fail += 1;
        }
        oracle_err = oracle_err
            .max(relative_error(mm.mass.iter(), oracle.mass_matrix(&s.q).iter()))
            .max(relative_error(mm.coriolis.iter(), oracle.coriolis(&s.q, &s.qdot).iter()))
            .max(relative_error(mm.gravity.iter(), oracle.gravity(&s.q).iter()));
        let Ok(aff) = robot.affine_terms(&s) else { continue };
        tested += 1;
        let u = 20.0 * rng.random::<f64>() - 10.0;
        let f_d = 20.0 * rng.random::<f64>() - 10.0;
        let f_c = p.spring_force(s.q[2], s.qdot[2]) + f_d;
        let qdd = robot.forward_dynamics(&s, u, f_c)?;
        let direct = qdd[0] + 0.5 * qdd[1];
        let affine = aff.output_acceleration(&p, f_d, u);
        affine_err = affine_err.max((direct - affine).abs() / direct.abs().max(1.0));
    }

    let sd = SpringDamperParams { b_s: 0.0, ..SpringDamperParams::reference() };
    let x0 = RobotState::from_degrees([-48.0, -98.0, 1.84, 0.0, 0.0, 0.0]);
    let (x1, _) = free_response(&robot, &sd, x0, 1.0, 1e-5)?;
    let (e0, e1) = (robot.total_energy(&x0, Some(&sd)), robot.total_energy(&x1, Some(&sd)));
    let drift = ((e1 - e0) / e0).abs();

    let load = robot.params().weight();
    let mid = cable.n_segments / 2;
    let eq = static_equilibrium(cable, Some((mid, load)))?;
    let reaction = attachment_reaction(&eq, cable)?;

    Ok(vec![
        check("mass-matrix-spd", spd_fail == 0, format!("{spd_fail} of {samples} samples not symmetric positive definite")),
        check("oracle-match", oracle_err <= 1e-6, format!("max relative error {oracle_err:.3e} (tol 1e-6)")),
        check("affine-equivalence", affine_err <= 1e-8, format!("max relative error {affine_err:.3e} over {tested} samples (tol 1e-8)")),
        check("energy-conservation", drift <= 1e-6, format!("relative drift {drift:.3e} over 1 s (tol 1e-6)")),
        check(
            "cable-static-reaction",
            (reaction - load).abs() <= 1e-3,
            format!("reaction {reaction:.6} N vs load {load:.6} N (tol 1e-3)"),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_defaults() {
        let checks = invariant_suite(&RobotParams::default(), &CableParams::default(), 200, 3).unwrap();
        for c in &checks {
            assert!(c.passed, "{c}");
        }
    }
}
