//! Kinematic pushing model: the cheap, inaccurate model.
//!
//! The slider moves with the pusher's velocity for the fraction of the
//! control in which they are in contact, and turns according to the lever
//! arm of the contact about the slider centre.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::scalar::Scalar;
use crate::scene::SceneSpec;
use crate::state::{wrap, Control, ControlSequence, ModelTag, State, Trajectory, Twist};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct CoarseParams<T> {
    /// Gain on the lever-arm angular velocity.
    pub k_omega: T,
}

impl<T: Scalar> Default for CoarseParams<T> {
    fn default() -> Self {
        CoarseParams { k_omega: T::one() }
    }
}

impl<T: Scalar> CoarseParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.k_omega > T::zero() && self.k_omega.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("coarse.k_omega must be positive"))
        }
    }
}

/// Angular velocity induced by a push with velocity `vel` through a contact
/// whose vector to the slider centre is `r_c`. Positive is counter-clockwise.
pub fn lever_omega<T: Scalar>(
    vel: crate::vec2::Vec2<T>,
    r_c: crate::vec2::Vec2<T>,
    theta_push: T,
    k_omega: T,
) -> T {
    let arm = r_c.norm();
    if arm < T::lit(1e-6) {
        return T::zero();
    }
    let magnitude = k_omega * vel.norm() * theta_push.sin() / arm;
    let turn = vel.cross(r_c);
    if turn > T::zero() {
        magnitude
    } else if turn < T::zero() {
        -magnitude
    } else {
        T::zero()
    }
}

/// One coarse prediction. Accepts penetrating input states as they are.
pub fn coarse_step<T: Scalar>(
    state: &State<T>,
    control: &Control<T>,
    params: &CoarseParams<T>,
    scene: &SceneSpec<T>,
) -> Result<State<T>> {
    let sweep = geometry::sweep_state(state, control, scene)?;
    let p_c = sweep.contact_fraction();
    let u = control.vel;
    let mut next = *state;
    next.pusher_pos = state.pusher_pos + u * control.duration;
    next.pusher_vel = u;
    if p_c > T::zero() {
        let omega = match (sweep.r_c, sweep.theta_push) {
            (Some(r_c), Some(theta)) => lever_omega(u, r_c, theta, params.k_omega),
            _ => T::zero(),
        };
        let scale = p_c * control.duration;
        let pose = &mut next.slider_pose;
        pose.x = pose.x + u.x * scale;
        pose.y = pose.y + u.y * scale;
        pose.theta = wrap(pose.theta + omega * scale);
        next.slider_vel = Twist::new(u.x, u.y, omega);
    }
    Ok(next)
}

/// Serial coarse rollout from `state0`.
pub fn coarse_rollout<T: Scalar>(
    state0: &State<T>,
    controls: &ControlSequence<T>,
    params: &CoarseParams<T>,
    scene: &SceneSpec<T>,
) -> Result<Trajectory<T>> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*state0);
    for (n, u) in controls.iter().enumerate() {
        let next = coarse_step(&states[n], &u, params, scene).map_err(|e| e.at_step(n))?;
        states.push(next);
    }
    Ok(Trajectory::new(states, ModelTag::Coarse, controls))
}
