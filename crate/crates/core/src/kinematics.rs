//! Unicycle kinematics `x' = u1 f1(x) + u2 f2(x)` on R^3.
//!
//! The heading `x3` is kept unwrapped: the state space is all of R^3 and the
//! quadratic potentials penalise the raw angle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Configuration of the unicycle: planar position of the contact point and heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct State {
    pub x1: f64,
    pub x2: f64,
    /// Heading in radians, not wrapped.
    pub x3: f64,
}

impl State {
    pub const ORIGIN: State = State::new(0.0, 0.0, 0.0);

    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        State { x1, x2, x3 }
    }

    pub fn to_array(self) -> Vec3 {
        [self.x1, self.x2, self.x3]
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    pub fn distance(&self, other: &State) -> f64 {
        norm(sub(self.to_array(), other.to_array()))
    }

    pub fn planar_norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    /// Heading mapped to (-pi, pi]; for reporting only.
    pub fn wrapped_heading(&self) -> f64 {
        use std::f64::consts::PI;
        let w = (self.x3 + PI).rem_euclid(2.0 * PI) - PI;
        if w == -PI {
            PI
        } else {
            w
        }
    }
}

impl From<Vec3> for State {
    fn from(v: Vec3) -> Self {
        State::new(v[0], v[1], v[2])
    }
}

impl From<State> for Vec3 {
    fn from(s: State) -> Self {
        s.to_array()
    }
}

/// Translational (m/s) and angular (rad/s) velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Control {
    pub u1: f64,
    pub u2: f64,
}

impl Control {
    pub const ZERO: Control = Control { u1: 0.0, u2: 0.0 };

    pub const fn new(u1: f64, u2: f64) -> Self {
        Control { u1, u2 }
    }
}

/// Linear edge velocities of the two wheels of a differential-drive base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSpeeds {
    pub v_l: f64,
    pub v_r: f64,
    /// Wheel separation in metres.
    pub d: f64,
}

/// TurtleBot3 Burger wheel separation.
pub const DEFAULT_WHEEL_SEPARATION: f64 = 0.160;

pub fn vector_fields(x: &State) -> (Vec3, Vec3) {
    let (s, c) = x.x3.sin_cos();
    ([c, s, 0.0], [0.0, 0.0, 1.0])
}

/// `[f1, f2] = Df2 f1 - Df1 f2`, the sideways direction.
pub fn lie_bracket(x: &State) -> Vec3 {
    let (s, c) = x.x3.sin_cos();
    [s, -c, 0.0]
}

/// Velocity of system under control `u` at state `x`.
pub fn velocity(x: &State, u: Control) -> Vec3 {
    let (s, c) = x.x3.sin_cos();
    [u.u1 * c, u.u1 * s, u.u2]
}

/// `F(x) = (f1, f2, [f1, f2])` with the fields as columns.
pub fn frame_matrix(x: &State) -> Mat3 {
    let (s, c) = x.x3.sin_cos();
    [[c, 0.0, s], [s, 0.0, -c], [0.0, 1.0, 0.0]]
}

/// Closed-form inverse of [`frame_matrix`]; `F` is nonsingular for every `x`.
pub fn frame_inverse(x: &State) -> Mat3 {
    let (s, c) = x.x3.sin_cos();
    [[c, s, 0.0], [0.0, 0.0, 1.0], [s, -c, 0.0]]
}

pub fn diff_drive_to_unicycle(w: &WheelSpeeds) -> Result<Control> {
    check_separation(w.d)?;
    Ok(Control::new((w.v_r + w.v_l) / 2.0, (w.v_r - w.v_l) / w.d))
}

pub fn unicycle_to_diff_drive(u: Control, d: f64) -> Result<WheelSpeeds> {
    check_separation(d)?;
    let half = u.u2 * d / 2.0;
    Ok(WheelSpeeds {
        v_l: u.u1 - half,
        v_r: u.u1 + half,
        d,
    })
}

fn check_separation(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::param("d", format!("wheel separation must be positive, got {d}")))
    }
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(a: &Mat3, v: Vec3) -> Vec3 {
    [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
        (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (a[i][j] - b[i][j]).abs())
            .fold(0.0, f64::max)
    }

    /// Central-difference Jacobian of a field, column j = d f / d x_j.
    fn fd_jacobian(f: impl Fn(&State) -> Vec3, x: &State, h: f64) -> Mat3 {
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut plus = x.to_array();
            let mut minus = x.to_array();
            plus[j] += h;
            minus[j] -= h;
            let fp = f(&State::from(plus));
            let fm = f(&State::from(minus));
            for i in 0..3 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    pub(crate) fn fd_bracket(x: &State) -> Vec3 {
        let f1 = |s: &State| vector_fields(s).0;
        let f2 = |s: &State| vector_fields(s).1;
        let (v1, v2) = vector_fields(x);
        let a = mat_vec(&fd_jacobian(f2, x, 1e-5), v1);
        let b = mat_vec(&fd_jacobian(f1, x, 1e-5), v2);
        sub(a, b)
    }

    #[test]
    fn vector_fields_at_reference_headings() {
        assert_eq!(vector_fields(&State::ORIGIN), ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]));
        let (f1, f2) = vector_fields(&State::new(5.0, -3.0, FRAC_PI_2));
        assert!(f1[0].abs() < 1e-15 && (f1[1] - 1.0).abs() < 1e-15 && f1[2] == 0.0);
        assert_eq!(f2, [0.0, 0.0, 1.0]);
        let (f1, _) = vector_fields(&State::new(0.0, 0.0, 0.7));
        // cos 0.7, sin 0.7 to 15 digits
        assert!((f1[0] - 0.764_842_187_284_488_9).abs() < 1e-15);
        assert!((f1[1] - 0.644_217_687_237_691_1).abs() < 1e-15);
    }

    #[test]
    fn bracket_reference_values() {
        let b = lie_bracket(&State::ORIGIN);
        assert_eq!(b, [0.0, -1.0, 0.0]);
        let b = lie_bracket(&State::new(1.0, 1.0, PI));
        assert!(b[0].abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_at_zero_heading() {
        let inv = frame_inverse(&State::ORIGIN);
        assert_eq!(inv, [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]]);
        let inv = frame_inverse(&State::new(0.0, 0.0, 0.7));
        assert!((inv[2][0] - 0.644_218).abs() < 1e-6);
    }

    #[test]
    fn cross_product_of_fields_is_bracket_up_to_sign() {
        let x = State::new(0.0, 0.0, 1.3);
        let (f1, f2) = vector_fields(&x);
        let c = cross(f1, f2);
        assert!((norm(c) - 1.0).abs() < 1e-15);
        assert!(norm(sub(c, lie_bracket(&x))) < 1e-15);
    }

    #[test]
    fn diff_drive_examples() {
        let u = diff_drive_to_unicycle(&WheelSpeeds { v_l: 0.1, v_r: 0.1, d: 0.16 }).unwrap();
        assert_eq!(u, Control::new(0.1, 0.0));
        let u = diff_drive_to_unicycle(&WheelSpeeds { v_l: -0.3, v_r: 0.3, d: 0.16 }).unwrap();
        assert_eq!(u.u1, 0.0);
        let w = unicycle_to_diff_drive(Control::new(0.1, 1.0), 0.16).unwrap();
        assert!((w.v_r - 0.18).abs() < 1e-12 && (w.v_l - 0.02).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_separation_is_rejected() {
        assert!(unicycle_to_diff_drive(Control::ZERO, 0.0).is_err());
        assert!(diff_drive_to_unicycle(&WheelSpeeds { v_l: 0.0, v_r: 0.0, d: -1.0 }).is_err());
    }

    #[test]
    fn wrapped_heading_view() {
        assert!((State::new(0.0, 0.0, 3.0 * PI).wrapped_heading() - PI).abs() < 1e-12);
        assert!((State::new(0.0, 0.0, -0.5).wrapped_heading() + 0.5).abs() < 1e-15);
    }

    fn state() -> impl Strategy<Value = State> {
        (-10.0..10.0f64, -10.0..10.0f64, -20.0..20.0f64).prop_map(|(a, b, c)| State::new(a, b, c))
    }

    proptest! {
        #[test]
        fn fields_are_orthonormal(x in state()) {
            let (f1, f2) = vector_fields(&x);
            prop_assert!((norm(f1) - 1.0).abs() < 1e-15);
            prop_assert!((norm(f2) - 1.0).abs() < 1e-15);
            prop_assert_eq!(dot(f1, f2), 0.0);
        }

        #[test]
        fn frame_times_inverse_is_identity(x in state()) {
            let f = frame_matrix(&x);
            let inv = frame_inverse(&x);
            prop_assert!(max_abs_diff(&mat_mul(&f, &inv), &IDENTITY) <= 1e-12);
            prop_assert!(max_abs_diff(&mat_mul(&inv, &f), &IDENTITY) <= 1e-12);
        }

        #[test]
        fn bracket_is_third_frame_column_and_matches_fd(x in state()) {
            let f = frame_matrix(&x);
            let b = lie_bracket(&x);
            prop_assert_eq!([f[0][2], f[1][2], f[2][2]], b);
            prop_assert!(norm(sub(b, fd_bracket(&x))) <= 1e-8);
        }

        #[test]
        fn diff_drive_round_trip(u1 in -1.0..1.0f64, u2 in -5.0..5.0f64, d in 0.05..1.0f64) {
            let w = unicycle_to_diff_drive(Control::new(u1, u2), d).unwrap();
            let back = diff_drive_to_unicycle(&w).unwrap();
            prop_assert!((back.u1 - u1).abs() <= 1e-12);
            prop_assert!((back.u2 - u2).abs() <= 1e-12);
        }
    }
}
