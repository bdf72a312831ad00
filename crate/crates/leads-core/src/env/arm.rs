//! Two-joint planar arm with torque-limited joints.
//!
//! State is (theta1, theta2, omega1, omega2); the action accelerates the
//! joint velocities. Angles and velocities are clamped to their limits, with
//! a joint's velocity zeroed when its angle saturates. Episodes never
//! terminate early.

use crate::env::{ActionVec, StateVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArmSpec {
    pub lengths: [f64; 2],
    /// Per-joint angle range in radians.
    pub joint_limits: [[f64; 2]; 2],
    /// Angular speed cap, applied symmetrically.
    pub vel_limit: f64,
    pub dt: f64,
    pub horizon: usize,
}

impl Default for ArmSpec {
    fn default() -> Self {
        ArmSpec {
            lengths: [0.5, 0.5],
            joint_limits: [
                [-std::f64::consts::PI, std::f64::consts::PI],
                [-std::f64::consts::PI, std::f64::consts::PI],
            ],
            vel_limit: 4.0,
            dt: 0.1,
            horizon: 50,
        }
    }
}

impl ArmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.iter().any(|l| *l <= 0.0) || self.lengths[0] + self.lengths[1] > 1.0 {
            return Err(Error::InvalidSpec(format!(
                "link lengths {:?} must be positive and sum to at most 1",
                self.lengths
            )));
        }
        if !(self.vel_limit > 0.0) || !(self.dt > 0.0) || self.horizon == 0 {
            return Err(Error::InvalidSpec(
                "arm velocity limit, dt, and horizon must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn step(&self, s: &StateVec, a: &ActionVec) -> StateVec {
        let mut theta = [s.0[0], s.0[1]];
        let mut omega = [s.0[2], s.0[3]];
        for j in 0..2 {
            omega[j] = (omega[j] + self.dt * a.0[j]).clamp(-self.vel_limit, self.vel_limit);
            let lim = self.joint_limits[j];
            let next = theta[j] + self.dt * omega[j];
            if next <= lim[0] {
                theta[j] = lim[0];
                omega[j] = 0.0;
            } else if next >= lim[1] {
                theta[j] = lim[1];
                omega[j] = 0.0;
            } else {
                theta[j] = next;
            }
        }
        StateVec(vec![theta[0], theta[1], omega[0], omega[1]])
    }

    /// Forward kinematics: planar end-effector position. The second joint
    /// angle is relative to the first link.
    pub fn end_effector(&self, s: &StateVec) -> [f64; 2] {
        let (t1, t2) = (s.0[0], s.0[1]);
        [
            self.lengths[0] * t1.cos() + self.lengths[1] * (t1 + t2).cos(),
            self.lengths[0] * t1.sin() + self.lengths[1] * (t1 + t2).sin(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_spec_is_valid() {
        ArmSpec::default().validate().unwrap();
    }

    #[test]
    fn bad_lengths_rejected() {
        let mut sp = ArmSpec::default();
        sp.lengths = [0.7, 0.7];
        assert!(sp.validate().is_err());
    }

    #[test]
    fn straight_up_reaches_unit_height() {
        let sp = ArmSpec::default();
        let p = sp.end_effector(&StateVec(vec![std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0]));
        assert!(p[0].abs() < 1e-12);
        assert!((p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_integrates_and_saturates() {
        let sp = ArmSpec::default();
        let s = sp.step(&StateVec(vec![0.0; 4]), &ActionVec(vec![1.0, -1.0]));
        assert!((s.0[2] - 0.1).abs() < 1e-12);
        assert!((s.0[3] + 0.1).abs() < 1e-12);
        assert!((s.0[0] - 0.01).abs() < 1e-12);

        let fast = sp.step(
            &StateVec(vec![0.0, 0.0, sp.vel_limit, 0.0]),
            &ActionVec(vec![1.0, 0.0]),
        );
        assert_eq!(fast.0[2], sp.vel_limit);
    }

    #[test]
    fn joint_limit_zeroes_velocity() {
        let sp = ArmSpec::default();
        let near = StateVec(vec![std::f64::consts::PI - 1e-4, 0.0, sp.vel_limit, 0.0]);
        let s = sp.step(&near, &ActionVec(vec![1.0, 0.0]));
        assert_eq!(s.0[0], std::f64::consts::PI);
        assert_eq!(s.0[2], 0.0);
    }

    proptest! {
        #[test]
        fn end_effector_stays_in_reach_disc(
            t1 in -3.2f64..3.2, t2 in -3.2f64..3.2,
            w1 in -4.0f64..4.0, w2 in -4.0f64..4.0,
            steps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 0..30)
        ) {
            let sp = ArmSpec::default();
            let mut s = StateVec(vec![
                t1.clamp(sp.joint_limits[0][0], sp.joint_limits[0][1]),
                t2.clamp(sp.joint_limits[1][0], sp.joint_limits[1][1]),
                w1, w2,
            ]);
            for (a1, a2) in steps {
                s = sp.step(&s, &ActionVec(vec![a1, a2]));
                let p = sp.end_effector(&s);
                prop_assert!(p[0].hypot(p[1]) <= sp.lengths[0] + sp.lengths[1] + 1e-12);
                prop_assert!(s.0[2].abs() <= sp.vel_limit && s.0[3].abs() <= sp.vel_limit);
            }
        }
    }
}
