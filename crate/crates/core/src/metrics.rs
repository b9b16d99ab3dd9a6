//! RMS error between two trajectories, grouped by channel.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::{wrap, Trajectory};

/// Per-channel RMS differences. Angles in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    /// mm
    pub trans_rms: f64,
    /// degrees
    pub rot_rms: f64,
    /// mm/s
    pub vel_rms: f64,
    /// deg/s
    pub angvel_rms: f64,
}

impl ErrorReport {
    pub fn max_channel(&self) -> f64 {
        self.trans_rms
            .max(self.rot_rms)
            .max(self.vel_rms)
            .max(self.angvel_rms)
    }

    pub fn is_zero(&self) -> bool {
        self.max_channel() == 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorOptions {
    /// Adds pusher position/velocity differences to the translation and
    /// linear velocity channels.
    pub include_pusher: bool,
}

/// Slider-only [`trajectory_error_with`].
pub fn trajectory_error<T: Scalar>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<ErrorReport> {
    trajectory_error_with(a, b, ErrorOptions::default())
}

/// RMS over time points `1..=N`; the shared initial state is skipped.
pub fn trajectory_error_with<T: Scalar>(
    a: &Trajectory<T>,
    b: &Trajectory<T>,
    opts: ErrorOptions,
) -> Result<ErrorReport> {
    if a.states.len() != b.states.len() {
        return Err(Error::invalid(format!(
            "trajectory lengths differ: {} vs {}",
            a.states.len(),
            b.states.len()
        )));
    }
    let n = a.states.len().saturating_sub(1);
    if n == 0 {
        return Ok(ErrorReport::default());
    }
    let (mut trans, mut rot, mut vel, mut angvel) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.states.iter().zip(&b.states).skip(1) {
        let dp = x.slider_pose.position() - y.slider_pose.position();
        let dv = x.slider_vel.linear() - y.slider_vel.linear();
        trans += dp.norm_squared().as_f64();
        vel += dv.norm_squared().as_f64();
        if opts.include_pusher {
            trans += (x.pusher_pos - y.pusher_pos).norm_squared().as_f64();
            vel += (x.pusher_vel - y.pusher_vel).norm_squared().as_f64();
        }
        let dtheta = wrap(x.slider_pose.theta - y.slider_pose.theta).as_f64().to_degrees();
        rot += dtheta * dtheta;
        let dw = (x.slider_vel.omega - y.slider_vel.omega).as_f64().to_degrees();
        angvel += dw * dw;
    }
    let n = n as f64;
    Ok(ErrorReport {
        trans_rms: (trans / n).sqrt(),
        rot_rms: (rot / n).sqrt(),
        vel_rms: (vel / n).sqrt(),
        angvel_rms: (angvel / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{ControlSequence, ModelTag, Pose, State};
    use crate::vec2::Vec2;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn traj(states: Vec<State<f64>>) -> Trajectory<f64> {
        let n = states.len() - 1;
        let controls = ControlSequence::constant(Vec2::new(25.0, 0.0), n, 1.0);
        Trajectory::new(states, ModelTag::Fine, &controls)
    }

    fn state(x: f64, y: f64, theta: f64) -> State<f64> {
        State::at_rest(Vec2::new(-100.0, 0.0), Pose::new(x, y, theta))
    }

    #[test]
    fn identical_is_zero() {
        let a = traj(vec![state(0.0, 0.0, 0.0), state(1.0, 2.0, 0.3)]);
        assert!(trajectory_error(&a, &a).unwrap().is_zero());
    }

    #[test]
    fn single_offset() {
        let a = traj(vec![state(0.0, 0.0, 0.0), state(0.0, 0.0, 0.0)]);
        let b = traj(vec![state(0.0, 0.0, 0.0), state(3.0, 0.0, 0.0)]);
        let r = trajectory_error(&a, &b).unwrap();
        assert_eq!(r.trans_rms, 3.0);
        assert_eq!((r.rot_rms, r.vel_rms, r.angvel_rms), (0.0, 0.0, 0.0));
    }

    #[test]
    fn full_turn_is_no_rotation_error() {
        let a = traj(vec![state(0.0, 0.0, 0.0); 3]);
        let b = traj(vec![state(0.0, 0.0, 2.0 * PI); 3]);
        assert!(trajectory_error(&a, &b).unwrap().rot_rms < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let a = traj(vec![state(0.0, 0.0, 0.0); 3]);
        let b = traj(vec![state(0.0, 0.0, 0.0); 2]);
        assert!(trajectory_error(&a, &b).is_err());
    }

    #[test]
    fn pusher_excluded_by_default() {
        let a = traj(vec![state(0.0, 0.0, 0.0); 2]);
        let mut b = a.clone();
        b.states[1].pusher_pos.x += 4.0;
        assert_eq!(trajectory_error(&a, &b).unwrap().trans_rms, 0.0);
        let with = trajectory_error_with(&a, &b, ErrorOptions { include_pusher: true }).unwrap();
        assert_eq!(with.trans_rms, 4.0);
    }

    fn arb_state() -> impl Strategy<Value = State<f64>> {
        prop::array::uniform10(-100.0f64..100.0).prop_map(|mut a| {
            a[4] = wrap(a[4]);
            State::from_array(a)
        })
    }

    proptest! {
        #[test]
        fn pseudometric(a in prop::collection::vec(arb_state(), 4),
                        b in prop::collection::vec(arb_state(), 4),
                        c in prop::collection::vec(arb_state(), 4)) {
            let (a, b, c) = (traj(a), traj(b), traj(c));
            let ab = trajectory_error(&a, &b).unwrap();
            let ba = trajectory_error(&b, &a).unwrap();
            let bc = trajectory_error(&b, &c).unwrap();
            let ac = trajectory_error(&a, &c).unwrap();
            prop_assert!(trajectory_error(&a, &a).unwrap().is_zero());
            let eps = 1e-9;
            for (x, y) in [(ab.trans_rms, ba.trans_rms), (ab.rot_rms, ba.rot_rms),
                           (ab.vel_rms, ba.vel_rms), (ab.angvel_rms, ba.angvel_rms)] {
                prop_assert!((x - y).abs() < eps);
            }
            prop_assert!(ac.trans_rms <= ab.trans_rms + bc.trans_rms + eps);
            prop_assert!(ac.rot_rms <= ab.rot_rms + bc.rot_rms + eps);
            prop_assert!(ac.vel_rms <= ab.vel_rms + bc.vel_rms + eps);
            prop_assert!(ac.angvel_rms <= ab.angvel_rms + bc.angvel_rms + eps);
        }
    }
}
