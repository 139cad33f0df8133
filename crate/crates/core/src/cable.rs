//! Lumped-mass cable: point masses joined by tension-only axial
//! spring-dampers, pinned at both supports.
//!
//! While the robot holds the cable, the attachment node is massless. Its
//! horizontal coordinate stays frozen and its height follows the pivot.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StiffnessMode {
    /// `segment_stiffness` is the stiffness of each segment.
    #[default]
    PerSegment,
    /// `segment_stiffness` is the stiffness of the whole cable (EA / L).
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CableParams {
    pub length: f64,
    pub linear_mass: f64,
    pub segment_stiffness: f64,
    pub segment_damping: f64,
    pub n_segments: usize,
    pub support_left: [f64; 2],
    pub support_right: [f64; 2],
    pub stiffness_mode: StiffnessMode,
    pub gravity: f64,
}

impl Default for CableParams {
    fn default() -> Self {
        Self {
            length: 8.0,
            linear_mass: 0.25,
            segment_stiffness: 785_400.0,
            segment_damping: 4.0,
            n_segments: 32,
            support_left: [0.0, 2.0],
            support_right: [8.0, 2.0],
            stiffness_mode: StiffnessMode::PerSegment,
            gravity: GRAVITY,
        }
    }
}

impl CableParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("linear_mass", self.linear_mass),
            ("segment_stiffness", self.segment_stiffness),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.segment_damping.is_finite() && self.segment_damping >= 0.0) {
            return Err(Error::param("segment_damping", "must be non-negative"));
        }
        if self.n_segments < 8 {
            return Err(Error::param("n_segments", format!("must be at least 8, got {}", self.n_segments)));
        }
        let span = (self.right() - self.left()).norm();
        if !(span > 0.0) || self.support_left.iter().chain(&self.support_right).any(|v| !v.is_finite()) {
            return Err(Error::param("support_left/support_right", "supports must be distinct finite points"));
        }
        Ok(())
    }

    pub fn left(&self) -> Vector2<f64> {
        Vector2::from(self.support_left)
    }

    pub fn right(&self) -> Vector2<f64> {
        Vector2::from(self.support_right)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_segments + 1
    }

    pub fn rest_length(&self) -> f64 {
        self.length / self.n_segments as f64
    }

    /// Axial stiffness of one segment after applying [`StiffnessMode`].
    pub fn stiffness(&self) -> f64 {
        match self.stiffness_mode {
            StiffnessMode::PerSegment => self.segment_stiffness,
            StiffnessMode::Total => self.segment_stiffness * self.n_segments as f64,
        }
    }

    /// Mass lumped at an interior node; supports carry half of it.
    pub fn node_mass(&self) -> f64 {
        self.linear_mass * self.rest_length()
    }

    pub fn total_mass(&self) -> f64 {
        self.linear_mass * self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CableState {
    pub node_pos: Vec<Vector2<f64>>,
    pub node_vel: Vec<Vector2<f64>>,
    pub attach_index: Option<usize>,
}

impl CableState {
    /// Unstretched straight line between the supports, at rest.
    pub fn straight(params: &CableParams) -> Self {
        let n = params.n_nodes();
        let (a, b) = (params.left(), params.right());
        let node_pos = (0..n).map(|i| a + (b - a) * (i as f64 / params.n_segments as f64)).collect();
        Self { node_pos, node_vel: vec![Vector2::zeros(); n], attach_index: None }
    }

    fn is_free(&self, i: usize) -> bool {
        i != 0 && i + 1 != self.node_pos.len() && Some(i) != self.attach_index
    }

    /// Index of the interior node closest to horizontal coordinate `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let last = self.node_pos.len() - 2;
        (1..=last)
            .min_by(|&i, &j| (self.node_pos[i].x - x).abs().total_cmp(&(self.node_pos[j].x - x).abs()))
            .unwrap_or(1)
    }

    /// Euclidean distance from `p` to the cable polyline.
    pub fn distance_to(&self, p: &Vector2<f64>) -> f64 {
        self.node_pos
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let s = ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
                (w[0] + s * d - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Moves the robot to node `index`, releasing the previous attachment
    /// node (which keeps its position and velocity).
    pub fn attach(&mut self, index: usize, z: f64, zdot: f64) -> Result<()> {
        if index == 0 || index + 1 >= self.node_pos.len() {
            return Err(Error::param("attach_index", format!("{index} is not an interior node")));
        }
        self.attach_index = Some(index);
        self.clamp_attachment(z, zdot)
    }

    /// Slaves the attachment node height and vertical velocity to the pivot.
    pub fn clamp_attachment(&mut self, z: f64, zdot: f64) -> Result<()> {
        let i = self.attach_index.ok_or(Error::NoAttachment)?;
        self.node_pos[i].y = z;
        self.node_vel[i] = Vector2::new(0.0, zdot);
        Ok(())
    }

    pub fn kinetic_energy(&self, params: &CableParams) -> f64 {
        let m = params.node_mass();
        (0..self.node_pos.len()).filter(|&i| self.is_free(i)).map(|i| 0.5 * m * self.node_vel[i].norm_squared()).sum()
    }

    /// Elastic plus gravitational energy; the massless attachment node has no weight.
    pub fn potential_energy(&self, params: &CableParams) -> f64 {
        let (k, l0) = (params.stiffness(), params.rest_length());
        let elastic: f64 = self
            .node_pos
            .windows(2)
            .map(|w| 0.5 * k * ((w[1] - w[0]).norm() - l0).max(0.0).powi(2))
            .sum();
        let mg = params.node_mass() * params.gravity;
        let gravity: f64 = (0..self.node_pos.len()).filter(|&i| self.is_free(i)).map(|i| mg * self.node_pos[i].y).sum();
        elastic + gravity
    }

    pub fn total_energy(&self, params: &CableParams) -> f64 {
        self.kinetic_energy(params) + self.potential_energy(params)
    }
}

/// Segment forces accumulated to nodes, plus weight on every node except
/// the massless attachment node.
pub fn internal_forces(state: &CableState, params: &CableParams) -> Vec<Vector2<f64>> {
    let mut out = Vec::new();
    internal_forces_into(state, params, &mut out);
    out
}

pub fn internal_forces_into(state: &CableState, params: &CableParams, out: &mut Vec<Vector2<f64>>) {
    let n = state.node_pos.len();
    let weight = Vector2::new(0.0, -params.node_mass() * params.gravity);
    out.clear();
    out.resize(n, weight);
    if let Some(i) = state.attach_index {
        out[i] = Vector2::zeros();
    }
    let (k, c, l0) = (params.stiffness(), params.segment_damping, params.rest_length());
    for i in 0..n - 1 {
        let d = state.node_pos[i + 1] - state.node_pos[i];
        let len = d.norm();
        let stretch = len - l0;
        if stretch <= 0.0 {
            continue;
        }
        let e = d / len;
        let rate = (state.node_vel[i + 1] - state.node_vel[i]).dot(&e);
        let tension = (k * stretch + c * rate).max(0.0);
        out[i] += tension * e;
        out[i + 1] -= tension * e;
    }
}

/// Vertical force the cable exerts on the pivot gripper.
pub fn attachment_reaction(state: &CableState, params: &CableParams) -> Result<f64> {
    let i = state.attach_index.ok_or(Error::NoAttachment)?;
    let (k, c, l0) = (params.stiffness(), params.segment_damping, params.rest_length());
    let mut f = 0.0;
    for j in [i - 1, i + 1] {
        let d = state.node_pos[j] - state.node_pos[i];
        let len = d.norm();
        let stretch = len - l0;
        if stretch > 0.0 {
            let e = d / len;
            let rate = (state.node_vel[j] - state.node_vel[i]).dot(&e);
            f += (k * stretch + c * rate).max(0.0) * e.y;
        }
    }
    Ok(f)
}

/// One semi-implicit Euler step of the free nodes. `scratch` is reused
/// between calls to avoid allocation.
pub fn step(state: &mut CableState, params: &CableParams, dt: f64, scratch: &mut Vec<Vector2<f64>>) {
    internal_forces_into(state, params, scratch);
    let inv_m = 1.0 / params.node_mass();
    for i in 1..state.node_pos.len() - 1 {
        if Some(i) == state.attach_index {
            continue;
        }
        state.node_vel[i] += dt * inv_m * scratch[i];
        state.node_pos[i] += dt * state.node_vel[i];
    }
}

/// Advances the cable over `dt` in substeps of `dt_cable` while the
/// attachment node moves linearly from `z0` to `z1`, then clamps it to
/// `(z1, zdot1)`.
pub fn advance_slaved(
    state: &mut CableState,
    params: &CableParams,
    z0: f64,
    (z1, zdot1): (f64, f64),
    dt: f64,
    dt_cable: f64,
    scratch: &mut Vec<Vector2<f64>>,
) -> Result<()> {
    let n = ((dt / dt_cable).round() as usize).max(1);
    let h = dt / n as f64;
    let rate = (z1 - z0) / dt;
    for j in 0..n {
        state.clamp_attachment(z0 + (z1 - z0) * (j as f64 / n as f64), rate)?;
        step(state, params, h, scratch);
    }
    state.clamp_attachment(z1, zdot1)
}

pub const RELAXATION_TOLERANCE: f64 = 1e-6;
pub const RELAXATION_MAX_ITERATIONS: usize = 2_000_000;

/// Static shape under gravity and an optional downward point load
/// `(node, newtons)` on a massless node, found by dynamic relaxation with
/// kinetic damping. The loaded node becomes the attachment node.
pub fn static_equilibrium(params: &CableParams, load: Option<(usize, f64)>) -> Result<CableState> {
    static_equilibrium_with(params, load, RELAXATION_TOLERANCE, RELAXATION_MAX_ITERATIONS)
}

pub fn static_equilibrium_with(
    params: &CableParams,
    load: Option<(usize, f64)>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<CableState> {
    params.validate()?;
    let mut state = CableState::straight(params);
    let n = state.node_pos.len();
    let mut external = vec![Vector2::zeros(); n];
    if let Some((i, w)) = load {
        if i == 0 || i + 1 >= n {
            return Err(Error::param("attach_index", format!("{i} is not an interior node")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::param("load", format!("must be a non-negative force, got {w}")));
        }
        state.attach_index = Some(i);
        external[i].y = -w;
    }
    let free: Vec<usize> = (1..n - 1).collect();

    // Unit time step with fictitious masses above the stability bound of
    // two axial springs per node.
    let fict_mass = 2.5 * params.stiffness();
    let undamped = CableParams { segment_damping: 0.0, ..*params };
    let mut forces = Vec::with_capacity(n);
    let mut prev_ke = 0.0;
    let mut residual = f64::INFINITY;
    for iteration in 0..max_iterations {
        internal_forces_into(&state, &undamped, &mut forces);
        residual = 0.0;
        for &i in &free {
            forces[i] += external[i];
            residual = residual.max(forces[i].amax());
        }
        if residual < tolerance {
            state.node_vel.iter_mut().for_each(|v| *v = Vector2::zeros());
            return Ok(state);
        }
        let mut ke = 0.0;
        for &i in &free {
            state.node_vel[i] += forces[i] / fict_mass;
            ke += state.node_vel[i].norm_squared();
        }
        if ke < prev_ke && iteration > 0 {
            // kinetic energy peak passed: restart from rest
            state.node_vel.iter_mut().for_each(|v| *v = Vector2::zeros());
            prev_ke = 0.0;
            continue;
        }
        prev_ke = ke;
        for &i in &free {
            state.node_pos[i] += state.node_vel[i];
        }
    }
    Err(Error::RelaxationDiverged { iterations: max_iterations, residual })
}
