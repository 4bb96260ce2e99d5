//! Coordinate algebra between equirectangular pixels, spherical polar
//! coordinates and 3D Cartesian space, plus ray casting and cross-view
//! point projection.
//!
//! Conventions: `y` is up, latitude `phi` runs from 0 at the north pole
//! (+y) to `pi` at the south pole, longitude `theta` lives in
//! `[-pi/2, 3*pi/2)` so that `theta = u/W * 2*pi - pi/2`. All angles are
//! radians, all distances meters, everything `f64`.

use crate::math::{vec3, Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeomError {
    #[error("cannot convert the zero vector to spherical coordinates")]
    ZeroVector,
    #[error("point coincides with the camera center")]
    DegeneratePoint,
    #[error("rotation matrix is not orthonormal with determinant +1")]
    InvalidRotation,
}

/// Continuous equirectangular image coordinate. `u` is the column and wraps
/// modulo the image width; `v` is the row, clamped to `[0, H]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        PixelCoord { u, v }
    }

    /// Center of the integer pixel `(col, row)`.
    pub fn center(col: usize, row: usize) -> Self {
        PixelCoord {
            u: col as f64 + 0.5,
            v: row as f64 + 0.5,
        }
    }
}

/// Spherical polar coordinate: longitude `theta`, latitude `phi in [0, pi]`,
/// spherical depth `t > 0` (radial distance, not z-depth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    pub theta: f64,
    pub phi: f64,
    pub t: f64,
}

/// Rigid camera-to-world transform: `p_world = rotation * p_cam + center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub rotation: Mat3,
    pub center: Vec3,
}

impl CameraPose {
    /// Validates orthonormality (`R^T R = I` and `det R = +1`, both to 1e-9).
    pub fn new(rotation: Mat3, center: Vec3) -> Result<Self, GeomError> {
        let rtr = rotation.transpose() * rotation;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (rtr.rows[i][j] - expect).abs() > 1e-9 {
                    return Err(GeomError::InvalidRotation);
                }
            }
        }
        if (rotation.det() - 1.0).abs() > 1e-9 {
            return Err(GeomError::InvalidRotation);
        }
        Ok(CameraPose { rotation, center })
    }

    pub fn identity_at(center: Vec3) -> Self {
        CameraPose {
            rotation: Mat3::IDENTITY,
            center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub direction: Vec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + t * self.direction
    }
}

/// `(u, v) -> (theta, phi)` with `phi = v/H * pi` and
/// `theta = u/W * 2*pi - pi/2`. `u` wraps, `v` clamps.
pub fn pixel_to_spherical(p: PixelCoord, h: usize, w: usize) -> (f64, f64) {
    let w_f = w as f64;
    let h_f = h as f64;
    let u = p.u.rem_euclid(w_f);
    let v = p.v.clamp(0.0, h_f);
    let theta = u / w_f * TAU - 0.5 * PI;
    let phi = v / h_f * PI;
    (theta, phi)
}

/// Unit direction `(sin(phi)cos(theta), cos(phi), sin(phi)sin(theta))`.
pub fn spherical_to_cartesian(theta: f64, phi: f64) -> Vec3 {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    vec3(sp * ct, cp, sp * st)
}

/// Inverse of [`spherical_to_cartesian`] with the radial distance recovered
/// as `t = |p|`. Longitude uses the two-argument arctangent of `(z, x)` so
/// the quadrant survives the round trip; at the poles (`x = z = 0`) theta
/// is fixed to `-pi/2` by convention.
pub fn cartesian_to_spherical(p: Vec3) -> Result<SphericalCoord, GeomError> {
    let t = p.norm();
    if t < 1e-12 {
        return Err(GeomError::ZeroVector);
    }
    let phi = (p.y / t).clamp(-1.0, 1.0).acos();
    let theta = if p.x == 0.0 && p.z == 0.0 {
        -0.5 * PI
    } else {
        let a = p.z.atan2(p.x);
        if a < -0.5 * PI {
            a + TAU
        } else {
            a
        }
    };
    Ok(SphericalCoord { theta, phi, t })
}

/// Exact algebraic inverse of [`pixel_to_spherical`]; `u` is reduced
/// modulo `W`.
pub fn spherical_to_pixel(s: SphericalCoord, h: usize, w: usize) -> PixelCoord {
    let w_f = w as f64;
    let u = ((s.theta + 0.5 * PI) / TAU * w_f).rem_euclid(w_f);
    let v = s.phi / PI * h as f64;
    PixelCoord { u, v }
}

/// Ray through pixel `p` of an `h x w` panorama captured at `pose`:
/// `d = R * xyz(theta, phi)`, origin at the camera center.
pub fn cast_ray(p: PixelCoord, pose: &CameraPose, h: usize, w: usize) -> Ray {
    let (theta, phi) = pixel_to_spherical(p, h, w);
    let d = pose.rotation * spherical_to_cartesian(theta, phi);
    Ray {
        origin: pose.center,
        // rotations are orthonormal only to 1e-9; the Ray invariant is 1e-12
        direction: d.normalized(),
    }
}

/// Projects a world point into the panorama at `pose`, returning the pixel
/// and the spherical depth of the point for that view. Total for every
/// point except the camera center itself (full field of view).
pub fn project_point(
    pt_world: Vec3,
    pose: &CameraPose,
    h: usize,
    w: usize,
) -> Result<(PixelCoord, f64), GeomError> {
    let rel = pt_world - pose.center;
    if rel.norm() < 1e-9 {
        return Err(GeomError::DegeneratePoint);
    }
    let cam = pose.rotation.transpose() * rel;
    let s = cartesian_to_spherical(cam)?;
    Ok((spherical_to_pixel(s, h, w), s.t))
}
