//! Procedural synthetic scenes with analytic ray intersection: ground-truth
//! panoramas, spherical depth maps and noisy monocular-depth priors. These
//! closed Lambertian scenes are the verification backbone for everything
//! downstream; surfaces are two-sided so rooms (hit from inside) and
//! occluders (hit from outside) use the same intersection code.

use crate::math::{vec3, Vec3};
use crate::panorama::EquirectImage;
use crate::rng::stream_rng;
use crate::sphere_geom::{cast_ray, project_point, CameraPose, PixelCoord, Ray};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("ray escaped the scene (not closed)")]
    NoHit,
    #[error("invalid scene: {0}")]
    InvalidScene(&'static str),
}

/// Procedural Lambertian texture evaluated at the hit point (in the
/// primitive's local frame, so patterns are anchored to the surface).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Texture {
    /// Checker over the local spherical angles of the hit direction;
    /// longitude cells are offset half a cell so no boundary coincides with
    /// the panorama seam plane.
    CheckerAngular {
        lon_cells: usize,
        lat_cells: usize,
        color_a: [f32; 3],
        color_b: [f32; 3],
    },
    /// Checker over local 3D position, boundaries offset half a cell off
    /// the coordinate planes.
    Checker3 {
        cell: f64,
        color_a: [f32; 3],
        color_b: [f32; 3],
    },
    /// Smooth multi-frequency sinusoid field over local 3D position;
    /// nonzero gradient almost everywhere, which patch descriptors need.
    Trig {
        freq: [f64; 3],
        phase: [f64; 3],
        amplitude: f64,
    },
    Solid { color: [f32; 3] },
}

impl Texture {
    fn eval(&self, local: Vec3) -> [f32; 3] {
        match *self {
            Texture::CheckerAngular {
                lon_cells,
                lat_cells,
                color_a,
                color_b,
            } => {
                let s = crate::sphere_geom::cartesian_to_spherical(local)
                    .expect("hit points are off-center");
                let lon = ((s.theta + std::f64::consts::FRAC_PI_2)
                    / (2.0 * std::f64::consts::PI)
                    * lon_cells as f64
                    + 0.5)
                    .floor() as i64;
                let lat = (s.phi / std::f64::consts::PI * lat_cells as f64).floor() as i64;
                if (lon + lat).rem_euclid(2) == 0 {
                    color_a
                } else {
                    color_b
                }
            }
            Texture::Checker3 {
                cell,
                color_a,
                color_b,
            } => {
                let idx = |x: f64| (x / cell + 0.5).floor() as i64;
                if (idx(local.x) + idx(local.y) + idx(local.z)).rem_euclid(2) == 0 {
                    color_a
                } else {
                    color_b
                }
            }
            Texture::Trig {
                freq,
                phase,
                amplitude,
            } => {
                let axes = [
                    vec3(1.0, 0.4, -0.3),
                    vec3(-0.2, 1.0, 0.5),
                    vec3(0.6, -0.5, 1.0),
                ];
                let mut rgb = [0.0f32; 3];
                for k in 0..3 {
                    let s = (freq[k] * local.dot(axes[k]) + phase[k]).sin();
                    rgb[k] = (0.5 + amplitude * s).clamp(0.0, 1.0) as f32;
                }
                rgb
            }
            Texture::Solid { color } => color,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        center: Vec3,
        radius: f64,
        texture: Texture,
    },
    AxisBox {
        min: Vec3,
        max: Vec3,
        texture: Texture,
    },
}

impl Primitive {
    /// Nearest strictly positive intersection distance, if any.
    fn intersect(&self, ray: &Ray) -> Option<f64> {
        match *self {
            Primitive::Sphere { center, radius, .. } => {
                let oc = ray.origin - center;
                let b = oc.dot(ray.direction);
                let c = oc.dot(oc) - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t0 = -b - sq;
                let t1 = -b + sq;
                if t0 > 0.0 {
                    Some(t0)
                } else if t1 > 0.0 {
                    Some(t1)
                } else {
                    None
                }
            }
            Primitive::AxisBox { min, max, .. } => {
                let mut t_enter = f64::NEG_INFINITY;
                let mut t_exit = f64::INFINITY;
                for axis in 0..3 {
                    let o = ray.origin.get(axis);
                    let d = ray.direction.get(axis);
                    let (lo, hi) = (min.get(axis), max.get(axis));
                    if d.abs() < 1e-15 {
                        if o < lo || o > hi {
                            return None;
                        }
                        continue;
                    }
                    let ta = (lo - o) / d;
                    let tb = (hi - o) / d;
                    let (ta, tb) = if ta < tb { (ta, tb) } else { (tb, ta) };
                    t_enter = t_enter.max(ta);
                    t_exit = t_exit.min(tb);
                }
                if t_exit < t_enter {
                    return None;
                }
                if t_enter > 0.0 {
                    Some(t_enter)
                } else if t_exit > 0.0 {
                    Some(t_exit)
                } else {
                    None
                }
            }
        }
    }

    fn texture(&self) -> &Texture {
        match self {
            Primitive::Sphere { texture, .. } => texture,
            Primitive::AxisBox { texture, .. } => texture,
        }
    }

    fn anchor(&self) -> Vec3 {
        match *self {
            Primitive::Sphere { center, .. } => center,
            Primitive::AxisBox { min, .. } => min,
        }
    }
}

/// A closed scene: every ray from an interior camera hits some primitive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub color: [f32; 3],
}

impl Scene {
    pub fn from_json(json: &str) -> Result<Scene, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Nearest positive intersection along `ray` with its surface color.
    pub fn trace(&self, ray: &Ray) -> Result<Hit, OracleError> {
        let mut best: Option<(f64, &Primitive)> = None;
        for prim in &self.primitives {
            if let Some(t) = prim.intersect(ray) {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, prim));
                }
            }
        }
        let (t, prim) = best.ok_or(OracleError::NoHit)?;
        let local = ray.at(t) - prim.anchor();
        Ok(Hit {
            t,
            color: prim.texture().eval(local),
        })
    }
}

/// Traces every pixel of an `h x w` panorama at `pose`, returning the color
/// image and the spherical (radial) depth map.
pub fn render_gt(
    scene: &Scene,
    pose: &CameraPose,
    h: usize,
    w: usize,
) -> Result<(EquirectImage, EquirectImage), OracleError> {
    let mut color = EquirectImage::new(h, w, 3).expect("2:1 requested");
    let mut depth = EquirectImage::new(h, w, 1).expect("2:1 requested");

    let color_rows: Vec<_> = color.data_mut().chunks_mut(w * 3).collect();
    let depth_rows: Vec<_> = depth.data_mut().chunks_mut(w).collect();
    let failed = std::sync::atomic::AtomicBool::new(false);

    color_rows
        .into_par_iter()
        .zip(depth_rows)
        .enumerate()
        .for_each(|(row, (crow, drow))| {
            for col in 0..w {
                let ray = cast_ray(PixelCoord::center(col, row), pose, h, w);
                match scene.trace(&ray) {
                    Ok(hit) => {
                        crow[col * 3..col * 3 + 3].copy_from_slice(&hit.color);
                        drow[col] = hit.t as f32;
                    }
                    Err(_) => failed.store(true, std::sync::atomic::Ordering::Relaxed),
                }
            }
        });

    if failed.load(std::sync::atomic::Ordering::Relaxed) {
        return Err(OracleError::NoHit);
    }
    Ok((color, depth))
}

/// Pixels of the reference view whose surface point is blocked from
/// `other_pose` by closer geometry (single-view-visible mask).
pub fn occlusion_mask(
    scene: &Scene,
    ref_pose: &CameraPose,
    other_pose: &CameraPose,
    h: usize,
    w: usize,
) -> Result<Vec<bool>, OracleError> {
    let mut mask = vec![false; h * w];
    for row in 0..h {
        for col in 0..w {
            let ray = cast_ray(PixelCoord::center(col, row), ref_pose, h, w);
            let hit = scene.trace(&ray)?;
            let point = ray.at(hit.t);
            let (_, t_expected) =
                project_point(point, other_pose, h, w).map_err(|_| OracleError::NoHit)?;
            let to_point = (point - other_pose.center) / t_expected;
            let back = scene.trace(&Ray {
                origin: other_pose.center,
                direction: to_point,
            })?;
            if back.t < t_expected - 1e-6 {
                mask[row * w + col] = true;
            }
        }
    }
    Ok(mask)
}

/// Smooth random field with unit per-pixel standard deviation: iid normals
/// on a coarse grid, bilinearly upsampled (wrap-aware) and renormalized.
/// Monocular-network depth error is spatially correlated; iid per-pixel
/// noise would make the mono candidate slabs incoherent between neighbors,
/// which no spatial cost aggregation could exploit.
fn smooth_noise_field(h: usize, w: usize, seed: u64, stream: u64) -> Vec<f64> {
    let ch = (h / 8).max(2);
    let cw = 2 * ch;
    let mut rng = stream_rng(seed, stream);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let coarse = EquirectImage::from_fn(ch, cw, 1, |_, _, out| {
        out[0] = normal.sample(&mut rng) as f32;
    })
    .expect("coarse grid is 2:1");

    let mut field = vec![0.0f64; h * w];
    for row in 0..h {
        for col in 0..w {
            let u = (col as f64 + 0.5) / w as f64 * cw as f64;
            let v = (row as f64 + 0.5) / h as f64 * ch as f64;
            field[row * w + col] = coarse.sample_scalar(u, v);
        }
    }
    let mean = field.iter().sum::<f64>() / field.len() as f64;
    let var = field.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / field.len() as f64;
    let inv_std = 1.0 / var.sqrt().max(1e-12);
    field.iter_mut().for_each(|x| *x = (*x - mean) * inv_std);
    field
}

/// Simulates an imperfect monocular depth estimate: multiplicative
/// log-normal noise plus additive Gaussian noise, both spatially smooth
/// with the requested per-pixel standard deviation, clamped to the valid
/// range [0.1, 10]. Deterministic per seed.
pub fn noisy_prior(
    gt_depth: &EquirectImage,
    relative_sigma: f64,
    additive_sigma: f64,
    seed: u64,
) -> EquirectImage {
    debug_assert_eq!(gt_depth.channels(), 1);
    let (h, w) = (gt_depth.height(), gt_depth.width());
    let mut out = gt_depth.clone();
    let rel_field = (relative_sigma > 0.0).then(|| smooth_noise_field(h, w, seed, 1));
    let add_field = (additive_sigma > 0.0).then(|| smooth_noise_field(h, w, seed, 2));
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let mut d = *v as f64;
        if let Some(f) = &rel_field {
            d *= (relative_sigma * f[i]).exp();
        }
        if let Some(f) = &add_field {
            d += additive_sigma * f[i];
        }
        *v = d.clamp(0.1, 10.0) as f32;
    }
    out
}

/// Room made of a single textured sphere of radius 3 m, with a small box
/// pillar off to one side. Smooth trig texture on the shell keeps patch
/// descriptors informative everywhere.
pub fn sphere_room() -> Scene {
    Scene {
        primitives: vec![
            Primitive::Sphere {
                center: Vec3::ZERO,
                radius: 3.0,
                // wavelengths >= ~20 px at 128x256 keep bilinear
                // resampling error under the photo-consistency budget
                texture: Texture::Trig {
                    freq: [2.6, 2.1, 3.4],
                    phase: [0.3, 1.9, 4.4],
                    amplitude: 0.42,
                },
            },
            Primitive::AxisBox {
                min: vec3(1.3, -0.8, 0.9),
                max: vec3(1.9, 0.2, 1.5),
                texture: Texture::Trig {
                    freq: [5.0, 4.4, 6.0],
                    phase: [2.0, 0.7, 3.1],
                    amplitude: 0.42,
                },
            },
        ],
    }
}

/// Camera positions `count` poses spread along the x axis, centred on the
/// origin, spanning `baseline` meters first-to-last.
pub fn baseline_poses(baseline: f64, count: usize) -> Vec<CameraPose> {
    (0..count)
        .map(|i| {
            let frac = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.5
            };
            CameraPose::identity_at(vec3(-baseline / 2.0 + frac * baseline, 0.0, 0.0))
        })
        .collect()
}

/// Box room with a thin occluder slab placed so a patch of the +x wall is
/// seen by exactly one of the two cameras (1 m apart on the x axis).
pub fn make_occlusion_scene() -> (Scene, [CameraPose; 2]) {
    let scene = Scene {
        primitives: vec![
            Primitive::AxisBox {
                min: vec3(-3.0, -1.5, -2.5),
                max: vec3(3.0, 1.5, 2.5),
                texture: Texture::Trig {
                    freq: [4.2, 3.6, 4.8],
                    phase: [0.9, 2.6, 5.0],
                    amplitude: 0.42,
                },
            },
            // occluder between camera B and the +x wall, off-axis in z
            Primitive::AxisBox {
                min: vec3(1.30, -0.65, -0.85),
                max: vec3(1.42, 0.65, 0.40),
                texture: Texture::Trig {
                    freq: [6.3, 5.5, 7.1],
                    phase: [4.1, 1.2, 2.8],
                    amplitude: 0.42,
                },
            },
        ],
    };
    let poses = [
        CameraPose::identity_at(vec3(-0.5, 0.0, 0.0)),
        CameraPose::identity_at(vec3(0.5, 0.0, 0.0)),
    ];
    (scene, poses)
}

/// The occlusion room without its occluder (same walls, empty interior).
pub fn occlusion_room_without_occluder() -> Scene {
    let (mut scene, _) = make_occlusion_scene();
    scene.primitives.truncate(1);
    scene
}
