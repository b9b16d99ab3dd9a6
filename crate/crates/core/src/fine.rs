//! Small-substep penalty-contact simulator: the expensive, accurate model.
//!
//! Units are kg, mm and s throughout, so forces come out in kg mm/s^2 (mN).
//! Contact stiffness and damping are configured in N/mm and N s/mm and
//! scaled by 1000 internally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::scalar::Scalar;
use crate::scene::SceneSpec;
use crate::state::{wrap, Control, ControlSequence, ModelTag, State, Trajectory};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct PhysicsParams<T> {
    /// s
    pub substep: T,
    /// N/mm
    pub contact_stiffness: T,
    /// N s/mm
    pub contact_damping: T,
    /// mm/s^2
    pub gravity: T,
    /// mm/s; friction is linear in slip below this speed.
    pub vel_regularization: T,
    /// mm; defaults to the slider's mean half-extent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_torque_length: Option<T>,
    pub support_friction: SupportFriction,
}

/// How table friction limits the slider's force and torque.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportFriction {
    /// Force and torque share one budget: the friction wrench opposes the
    /// generalized slip `(v, L w)` and saturates on an ellipse.
    #[default]
    Coupled,
    /// Force and torque saturate separately at `mu m g` and `mu m g L`.
    Independent,
}

impl<T: Scalar> Default for PhysicsParams<T> {
    fn default() -> Self {
        PhysicsParams {
            substep: T::lit(0.001),
            contact_stiffness: T::lit(50.0),
            contact_damping: T::lit(0.05),
            gravity: T::lit(9810.0),
            vel_regularization: T::lit(0.5),
            support_torque_length: None,
            support_friction: SupportFriction::Coupled,
        }
    }
}

impl<T: Scalar> PhysicsParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !pos(self.substep) {
            return Err(Error::invalid("physics.substep must be positive"));
        }
        if !pos(self.contact_stiffness) {
            return Err(Error::invalid("physics.contact_stiffness must be positive"));
        }
        if !(self.contact_damping >= T::zero()) {
            return Err(Error::invalid("physics.contact_damping must be non-negative"));
        }
        if !pos(self.vel_regularization) {
            return Err(Error::invalid("physics.vel_regularization must be positive"));
        }
        if !(self.gravity >= T::zero()) {
            return Err(Error::invalid("physics.gravity must be non-negative"));
        }
        if let Some(l) = self.support_torque_length {
            if !pos(l) {
                return Err(Error::invalid("physics.support_torque_length must be positive"));
            }
        }
        Ok(())
    }

    /// Number of substeps covering `duration`.
    pub fn substeps_for(&self, duration: T) -> Result<usize> {
        let n = (duration / self.substep).round();
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0) * duration.max(T::one()));
        if !(n >= T::one()) || (n * self.substep - duration).abs() > tol {
            return Err(Error::invalid(format!(
                "control duration {duration} is not a positive multiple of substep {}",
                self.substep
            )));
        }
        n.to_usize()
            .ok_or_else(|| Error::invalid("substep count overflow"))
    }
}

/// Speed after one step of regularized Coulomb friction removing at most
/// `budget` of speed. Linear branch is integrated implicitly so the speed
/// decays monotonically and never changes sign.
#[inline]
fn friction_decay<T: Scalar>(speed: T, budget: T, reg: T) -> T {
    if speed - budget >= reg {
        speed - budget
    } else {
        speed / (T::one() + budget / reg)
    }
}

#[inline]
fn signed_decay<T: Scalar>(value: T, budget: T, reg: T) -> T {
    if value == T::zero() {
        return value;
    }
    let mag = friction_decay(value.abs(), budget, reg);
    if value < T::zero() {
        -mag
    } else {
        mag
    }
}

/// Integrates one control with semi-implicit Euler substeps.
pub fn fine_step<T: Scalar>(
    state: &State<T>,
    control: &Control<T>,
    params: &PhysicsParams<T>,
    scene: &SceneSpec<T>,
) -> Result<State<T>> {
    state.ensure_finite()?;
    let steps = params.substeps_for(control.duration)?;
    let h = params.substep;
    let kilo = T::lit(1000.0);
    let stiffness = params.contact_stiffness * kilo;
    let damping = params.contact_damping * kilo;
    let mass = scene.slider_mass;
    let inertia = scene.inertia();
    let reg = params.vel_regularization;
    let torque_length = params
        .support_torque_length
        .unwrap_or_else(|| scene.slider_shape.characteristic_length());
    let support_force = scene.support_friction_mu * mass * params.gravity;
    let lin_budget = support_force / mass * h;
    let ang_budget = support_force * torque_length / inertia * h;
    let ang_reg = reg / torque_length;
    // Angular budget relative to the linear one in (v, L w) coordinates.
    let rot_ratio = mass * torque_length * torque_length / inertia;
    let steps_t = T::count(steps);

    let p0 = state.pusher_pos;
    let mut pose = state.slider_pose;
    let mut v = state.slider_vel.linear();
    let mut w = state.slider_vel.omega;

    for i in 1..=steps {
        let pusher = p0 + control.vel * (control.duration * (T::count(i) / steps_t));
        let q = geometry::penetration(pusher, scene.pusher_radius, &scene.slider_shape, &pose)?;
        if q.penetration_depth > T::zero() {
            let n = q.normal;
            let arm = q.contact_point - pose.position();
            let point_vel = v + arm.perp() * w;
            let closing = (control.vel - point_vel).dot(n);
            let fn_ = (stiffness * q.penetration_depth + damping * closing).max(T::zero());
            let jn = n * (fn_ * h);
            v += jn * mass.recip();
            w = w + arm.cross(jn) / inertia;

            // Tangential friction against the effective mass at the contact.
            let t = n.perp();
            let lever = arm.cross(t);
            let m_t = (mass.recip() + lever * lever / inertia).recip();
            let slip = (v + arm.perp() * w - control.vel).dot(t);
            let budget = scene.contact_friction_mu * fn_ * h / m_t;
            let new_slip = signed_decay(slip, budget, reg);
            let jt = t * ((new_slip - slip) * m_t);
            v += jt * mass.recip();
            w = w + arm.cross(jt) / inertia;
        }

        match params.support_friction {
            SupportFriction::Coupled => {
                let spin = w * torque_length;
                let slip = (v.norm_squared() + spin * spin).sqrt().max(reg);
                let decay = lin_budget / slip;
                v = v * (T::one() + decay).recip();
                w = w / (T::one() + decay * rot_ratio);
            }
            SupportFriction::Independent => {
                let speed = v.norm();
                if speed > T::zero() {
                    v = v * (friction_decay(speed, lin_budget, reg) / speed);
                }
                w = signed_decay(w, ang_budget, ang_reg);
            }
        }

        if !(v.is_finite() && w.is_finite()) {
            return Err(Error::SimulationUnstable {
                substep: i,
                reason: "non-finite slider velocity".into(),
            });
        }
        pose.x = pose.x + v.x * h;
        pose.y = pose.y + v.y * h;
        pose.theta = wrap(pose.theta + w * h);
    }

    Ok(State {
        pusher_pos: p0 + control.vel * control.duration,
        slider_pose: pose,
        pusher_vel: control.vel,
        slider_vel: crate::state::Twist::new(v.x, v.y, w),
    })
}

/// Serial fine rollout from `state0`.
pub fn fine_rollout<T: Scalar>(
    state0: &State<T>,
    controls: &ControlSequence<T>,
    params: &PhysicsParams<T>,
    scene: &SceneSpec<T>,
) -> Result<Trajectory<T>> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*state0);
    for (n, u) in controls.iter().enumerate() {
        let next = fine_step(&states[n], &u, params, scene).map_err(|e| e.at_step(n))?;
        states.push(next);
    }
    Ok(Trajectory::new(states, ModelTag::Fine, controls))
}

/// Slider kinetic energy, kg mm^2/s^2.
pub fn slider_kinetic_energy<T: Scalar>(state: &State<T>, scene: &SceneSpec<T>) -> T {
    let v: Vec2<T> = state.slider_vel.linear();
    let w = state.slider_vel.omega;
    T::lit(0.5) * (scene.slider_mass * v.norm_squared() + scene.inertia() * w * w)
}
