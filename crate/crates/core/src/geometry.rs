//! Angular and spatial primitives shared by the descriptors and the
//! relaxation stage.
//!
//! Coordinates follow the image convention (y grows downward) while all
//! angles are measured counter-clockwise as seen on the fingerprint, i.e.
//! in a frame whose vertical axis points up. Every ray angle in this crate
//! is therefore computed as `atan2(y_from - y_to, x_to - x_from)`.

use std::f64::consts::{PI, TAU};

use crate::template::Minutia;

/// Maps any finite angle into `[0, 2π)`.
#[inline]
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Maps any finite angle into `[-π, π)`.
#[inline]
pub fn wrap_signed(theta: f64) -> f64 {
    let r = normalize_angle(theta + PI) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Circular distance between two directions, in `[0, π]`.
#[inline]
pub fn angular_difference(theta1: f64, theta2: f64) -> f64 {
    let d = (normalize_angle(theta1) - normalize_angle(theta2)).abs();
    d.min(TAU - d)
}

#[inline]
pub fn euclidean_distance(a: &Minutia, b: &Minutia) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[inline]
pub fn direction_difference(a: &Minutia, b: &Minutia) -> f64 {
    angular_difference(a.theta, b.theta)
}

/// Angle of the ray from `(x0, y0)` to `(x1, y1)` in the counter-clockwise
/// fingerprint frame.
#[inline]
pub fn ray_angle(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    (y0 - y1).atan2(x1 - x0)
}

/// Difference between the direction of `a` and the direction of the ray
/// from `a` towards `b`. Not symmetric: `radial_angle(a, b)` is measured
/// against `a`'s direction only. Co-located minutiae yield 0.
#[inline]
pub fn radial_angle(a: &Minutia, b: &Minutia) -> f64 {
    if a.x == b.x && a.y == b.y {
        return 0.0;
    }
    angular_difference(a.theta, ray_angle(a.x, a.y, b.x, b.y))
}
