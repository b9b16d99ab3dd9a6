//! Pusher/slider state, controls, and trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vec2::Vec2;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(theta: T) -> Result<T> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("angle must be finite, got {theta}")));
    }
    Ok(wrap(theta))
}

/// Unchecked [`wrap_angle`]. Values already in range are returned untouched,
/// so wrapping is bitwise idempotent.
#[inline]
pub(crate) fn wrap<T: Scalar>(theta: T) -> T {
    let pi = T::PI();
    if theta > -pi && theta <= pi {
        return theta;
    }
    let two_pi = pi + pi;
    let shifted = theta + pi;
    let r = shifted - two_pi * (shifted / two_pi).floor() - pi;
    if r <= -pi {
        pi
    } else {
        r
    }
}

/// Planar rigid-body pose: position in mm, heading in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Pose { x, y, theta }
    }

    #[inline]
    pub fn position(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

/// Planar rigid-body velocity: mm/s and rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Twist<T> {
    pub vx: T,
    pub vy: T,
    pub omega: T,
}

impl<T: Scalar> Twist<T> {
    pub fn new(vx: T, vy: T, omega: T) -> Self {
        Twist { vx, vy, omega }
    }

    #[inline]
    pub fn linear(&self) -> Vec2<T> {
        Vec2::new(self.vx, self.vy)
    }
}

/// Full configuration and velocity of pusher and slider at one time point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct State<T> {
    pub pusher_pos: Vec2<T>,
    pub slider_pose: Pose<T>,
    pub pusher_vel: Vec2<T>,
    pub slider_vel: Twist<T>,
}

impl<T: Scalar> State<T> {
    /// A state with both bodies at rest.
    pub fn at_rest(pusher_pos: Vec2<T>, slider_pose: Pose<T>) -> Self {
        State {
            pusher_pos,
            slider_pose,
            pusher_vel: Vec2::zero(),
            slider_vel: Twist::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Flat layout matching the trajectory CSV column order.
    pub fn to_array(&self) -> [T; 10] {
        [
            self.pusher_pos.x,
            self.pusher_pos.y,
            self.slider_pose.x,
            self.slider_pose.y,
            self.slider_pose.theta,
            self.pusher_vel.x,
            self.pusher_vel.y,
            self.slider_vel.vx,
            self.slider_vel.vy,
            self.slider_vel.omega,
        ]
    }

    pub fn from_array(a: [T; 10]) -> Self {
        State {
            pusher_pos: Vec2::new(a[0], a[1]),
            slider_pose: Pose::new(a[2], a[3], a[4]),
            pusher_vel: Vec2::new(a[5], a[6]),
            slider_vel: Twist::new(a[7], a[8], a[9]),
        }
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("state has non-finite component: {self:?}")))
        }
    }
}

/// Pusher velocity command held for `duration` seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Control<T> {
    pub vel: Vec2<T>,
    pub duration: T,
}

impl<T: Scalar> Control<T> {
    pub fn new(vel: Vec2<T>, duration: T) -> Self {
        Control { vel, duration }
    }

    pub fn displacement(&self) -> Vec2<T> {
        self.vel * self.duration
    }
}

/// N pusher velocities sharing one control duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ControlSequence<T> {
    pub vels: Vec<Vec2<T>>,
    pub duration: T,
}

impl<T: Scalar> ControlSequence<T> {
    pub fn new(vels: Vec<Vec2<T>>, duration: T) -> Self {
        ControlSequence { vels, duration }
    }

    /// `n` copies of the same velocity.
    pub fn constant(vel: Vec2<T>, n: usize, duration: T) -> Self {
        ControlSequence::new(vec![vel; n], duration)
    }

    pub fn len(&self) -> usize {
        self.vels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vels.is_empty()
    }

    pub fn control(&self, n: usize) -> Control<T> {
        Control::new(self.vels[n], self.duration)
    }

    pub fn iter(&self) -> impl Iterator<Item = Control<T>> + '_ {
        self.vels.iter().map(move |&v| Control::new(v, self.duration))
    }

    /// Checks `duration > 0` and `|vel| <= max_speed` for every entry.
    pub fn validate(&self, max_speed: T) -> Result<()> {
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return Err(Error::invalid(format!(
                "control duration must be positive, got {}",
                self.duration
            )));
        }
        let slack = max_speed * T::lit(1e-12);
        for (i, v) in self.vels.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("control {i} is not finite")));
            }
            if v.norm() > max_speed + slack {
                return Err(Error::invalid(format!(
                    "control {i} speed {} exceeds max push speed {max_speed}",
                    v.norm()
                )));
            }
        }
        Ok(())
    }

    /// FNV-1a over the bit patterns; identifies the sequence a trajectory came from.
    pub fn digest(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |x: T| {
            for b in x.as_f64().to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        feed(self.duration);
        for v in &self.vels {
            feed(v.x);
            feed(v.y);
        }
        h
    }
}

/// Which predictor produced a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Coarse,
    Fine,
    /// Parareal iterate `k`.
    Parareal(usize),
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelTag::Coarse => write!(f, "coarse"),
            ModelTag::Fine => write!(f, "fine"),
            ModelTag::Parareal(k) => write!(f, "parareal:{k}"),
        }
    }
}

/// States `x_0..=x_N` predicted for an N-step control sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<State<T>>,
    pub model_tag: ModelTag,
    pub controls_digest: u64,
    /// Shared control duration, used for the time column on export.
    pub duration: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(states: Vec<State<T>>, model_tag: ModelTag, controls: &ControlSequence<T>) -> Self {
        debug_assert_eq!(states.len(), controls.len() + 1);
        Trajectory {
            states,
            model_tag,
            controls_digest: controls.digest(),
            duration: controls.duration,
        }
    }

    /// Number of steps N (one less than the number of states).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn initial(&self) -> &State<T> {
        &self.states[0]
    }

    pub fn last(&self) -> &State<T> {
        self.states.last().expect("trajectory has at least one state")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert!((wrap_angle(3.0 * PI).unwrap() - PI).abs() < 1e-12);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert!((wrap_angle(-3.5 * PI).unwrap() - 0.5 * PI).abs() < 1e-12);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
        assert!((wrap_angle(-PI as f32).unwrap() - std::f32::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn in_range_is_bitwise_identity() {
        for &t in &[1e-300, -0.5, 3.0, -3.1, PI] {
            assert_eq!(wrap(t).to_bits(), t.to_bits());
        }
    }

    #[test]
    fn control_validation() {
        let ok = ControlSequence::constant(Vec2::new(25.0, 0.0), 3, 1.0);
        assert!(ok.validate(100.0).is_ok());
        let fast = ControlSequence::constant(Vec2::new(250.0, 0.0), 1, 1.0);
        assert!(fast.validate(100.0).is_err());
        let zero = ControlSequence::constant(Vec2::new(1.0, 0.0), 1, 0.0);
        assert!(zero.validate(100.0).is_err());
    }

    #[test]
    fn digest_distinguishes_sequences() {
        let a = ControlSequence::constant(Vec2::new(25.0, 0.0), 4, 1.0);
        let mut b = a.clone();
        b.vels[2].y = 1e-9;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.clone().digest());
    }

    proptest::proptest! {
        #[test]
        fn wrap_is_idempotent_and_in_range(x in -1e6f64..1e6) {
            let w = wrap_angle(x).unwrap();
            proptest::prop_assert!(w > -PI && w <= PI);
            proptest::prop_assert_eq!(wrap_angle(w).unwrap().to_bits(), w.to_bits());
            let k = ((x - w) / (2.0 * PI)).round();
            proptest::prop_assert!((x - w - 2.0 * PI * k).abs() < 1e-9 * x.abs().max(1.0));
        }
    }
}
