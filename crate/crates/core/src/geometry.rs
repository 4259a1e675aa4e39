//! Shared domain types, UAV-relative spherical coordinates and UAV kinematics.
//!
//! Angles follow the usual physics convention: azimuth `phi` is measured in
//! the xy-plane from +x, elevation `theta` is measured from +z, so the unit
//! line-of-sight vector is `(cos phi sin theta, sin phi sin theta, cos theta)`.

use std::f64::consts::PI;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;

/// Relative horizontal extent below which the azimuth is treated as undefined.
const POLE_TOLERANCE: f64 = 1e-12;

/// Position (m) and velocity (m/s) of the non-cooperative target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl TargetState {
    pub fn new(position: Vec3, velocity: Vec3) -> Self {
        Self { position, velocity }
    }

    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.velocity.x,
            self.velocity.y,
            self.velocity.z,
        )
    }

    pub fn from_vector(s: &Vec6) -> Self {
        Self {
            position: s.fixed_rows::<3>(0).into_owned(),
            velocity: s.fixed_rows::<3>(3).into_owned(),
        }
    }
}

/// Speed magnitude, heading and tilt of one kinematic step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    /// m/s
    pub speed: f64,
    /// Heading in the xy-plane, rad, wrapped to (-pi, pi].
    pub heading: f64,
    /// Tilt from +z, rad, in [0, pi].
    pub tilt: f64,
}

/// Kinematic state of one UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavPose {
    pub position: Vec3,
    pub speed: f64,
    pub heading: f64,
    pub tilt: f64,
}

impl UavPose {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            speed: 0.0,
            heading: 0.0,
            tilt: PI / 2.0,
        }
    }

    pub fn velocity(&self) -> Vec3 {
        control_from_polar(
            Polar {
                speed: self.speed,
                heading: self.heading,
                tilt: self.tilt,
            },
            1.0,
        )
    }

    pub fn polar(&self) -> Polar {
        Polar {
            speed: self.speed,
            heading: self.heading,
            tilt: self.tilt,
        }
    }
}

/// Target position seen from a UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalRelative {
    pub d: f64,
    pub phi: f64,
    pub theta: f64,
    /// Set when the target lies on the UAV's vertical axis; `phi` is then 0 by convention.
    pub on_pole: bool,
}

impl SphericalRelative {
    pub fn direction(&self) -> Vec3 {
        direction_vector(self.phi, self.theta)
    }
}

/// Speed, turn-rate and tilt-rate limits applied to every control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicLimits {
    pub v_min: f64,
    pub v_max: f64,
    /// Maximum heading change per step, rad.
    pub psi_max: f64,
    /// Maximum tilt change per step, rad.
    pub theta_max: f64,
    /// Step duration, s.
    pub dt: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 20.0,
            psi_max: PI / 6.0,
            theta_max: PI / 6.0,
            dt: 1.0,
        }
    }
}

impl KinematicLimits {
    pub fn is_valid(&self) -> bool {
        self.v_min >= 0.0
            && self.v_min <= self.v_max
            && self.psi_max > 0.0
            && self.theta_max > 0.0
            && self.dt > 0.0
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Distance, azimuth and elevation of `p_target` relative to `p_uav`.
pub fn relative_spherical(p_uav: &Vec3, p_target: &Vec3) -> Result<SphericalRelative> {
    let delta = p_target - p_uav;
    let d = delta.norm();
    if !d.is_finite() {
        return Err(Error::NonFinite("relative position"));
    }
    if d == 0.0 {
        return Err(Error::DegenerateGeometry(
            "UAV and target positions coincide",
        ));
    }
    let horizontal = delta.x.hypot(delta.y);
    let on_pole = horizontal <= POLE_TOLERANCE * d;
    let phi = if on_pole {
        0.0
    } else {
        wrap_angle(delta.y.atan2(delta.x))
    };
    let theta = (delta.z / d).clamp(-1.0, 1.0).acos();
    Ok(SphericalRelative {
        d,
        phi,
        theta,
        on_pole,
    })
}

pub fn direction_vector(phi: f64, theta: f64) -> Vec3 {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Vec3::new(cp * st, sp * st, ct)
}

/// Displacement produced by flying at `polar` for `dt` seconds.
pub fn control_from_polar(polar: Polar, dt: f64) -> Vec3 {
    polar.speed * dt * direction_vector(polar.heading, polar.tilt)
}

/// Inverse of [`control_from_polar`]. A zero displacement keeps `previous`
/// heading and tilt; a vertical one keeps the previous heading.
pub fn polar_from_control(u: &Vec3, dt: f64, previous: Option<(f64, f64)>) -> Polar {
    let (prev_heading, prev_tilt) = previous.unwrap_or((0.0, PI / 2.0));
    let len = u.norm();
    if len == 0.0 {
        return Polar {
            speed: 0.0,
            heading: prev_heading,
            tilt: prev_tilt,
        };
    }
    let horizontal = u.x.hypot(u.y);
    let heading = if horizontal <= POLE_TOLERANCE * len {
        prev_heading
    } else {
        wrap_angle(u.y.atan2(u.x))
    };
    Polar {
        speed: len / dt,
        heading,
        tilt: (u.z / len).clamp(-1.0, 1.0).acos(),
    }
}

/// Applies the speed window and the per-step heading/tilt rate limits.
///
/// Heading differences are taken on the wrapped circle. With no previous
/// attitude only the speed window applies.
pub fn clamp_kinematics(
    proposed: Polar,
    previous: Option<(f64, f64)>,
    limits: &KinematicLimits,
) -> Polar {
    let speed = proposed.speed.clamp(limits.v_min, limits.v_max);
    let mut heading = wrap_angle(proposed.heading);
    let mut tilt = proposed.tilt.clamp(0.0, PI);
    if let Some((psi_prev, theta_prev)) = previous {
        let turn = wrap_angle(heading - psi_prev);
        if turn.abs() > limits.psi_max {
            heading = wrap_angle(psi_prev + limits.psi_max.copysign(turn));
        }
        let climb = tilt - theta_prev;
        if climb.abs() > limits.theta_max {
            tilt = (theta_prev + limits.theta_max.copysign(climb)).clamp(0.0, PI);
        }
    }
    Polar {
        speed,
        heading,
        tilt,
    }
}
