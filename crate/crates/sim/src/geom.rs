//! Minimal 3-vector math and physical constants shared by the orbital code.

use std::ops::{Add, Mul, Sub};

/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH: f64 = 398_600.4418;
/// Spherical Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6378.137;
/// Speed of light, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;
/// Sidereal day, seconds.
pub const SIDEREAL_DAY_S: f64 = 86_164.0905;
/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 2.0 * std::f64::consts::PI / SIDEREAL_DAY_S;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn unit(self) -> Self {
        let n = self.norm();
        self.scale(1.0 / n)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        self.scale(rhs)
    }
}

/// Minimum distance from the origin to the segment [a, b].
pub fn segment_min_distance_to_origin(a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return a.norm();
    }
    // Projection of the origin onto the segment, clamped to the endpoints.
    let t = (-a.dot(ab) / len2).clamp(0.0, 1.0);
    (a + ab.scale(t)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_through_origin() {
        let a = Vec3::new(-2.0, 1.0, 0.0);
        let b = Vec3::new(2.0, 1.0, 0.0);
        assert!((segment_min_distance_to_origin(a, b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_distance_clamps_to_endpoint() {
        let a = Vec3::new(3.0, 0.0, 0.0);
        let b = Vec3::new(5.0, 0.0, 0.0);
        assert!((segment_min_distance_to_origin(a, b) - 3.0).abs() < 1e-12);
    }
}
