use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};

use crate::dynamics::{Robot, RobotState};

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Re-labels the robot so the gripper that just closed at `grab_point`
/// becomes the pivot. Returns the new state and the new pivot station.
///
/// Both links share one mass layout (each centre of mass sits `l/3` from the
/// elbow), so the physical parameters are unchanged by the relabelling. The
/// new pivot is horizontally fixed, so velocities are continuous in the frame
/// moving with the old tip's horizontal velocity.
pub fn swap_grippers(robot: &Robot, state: &RobotState, grab_point: &Vector2<f64>) -> (RobotState, f64) {
    let (t1, t2) = (state.q[0], state.q[1]);
    let (w1, w2) = (state.qdot[0], state.qdot[1]);
    let tip_vz = robot.tip_velocity(state).y;
    let next = RobotState::new(
        Vector3::new(wrap(t1 + t2 + PI), -t2, grab_point.y),
        Vector3::new(w1 + w2, -w2, tip_vz),
    );
    (next, grab_point.x)
}
