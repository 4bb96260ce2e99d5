//! 360° sphere-sweep multi-view stereo: photometric feature extraction,
//! cost-volume construction by spherical warping, multi-source fusion,
//! spatial cost aggregation and depth decoding.
//!
//! Features are classical descriptors (the learned encoder is out of
//! scope): raw RGB, zero-mean unit-norm 5x5 gray patches, or census
//! comparisons. Costs are the mean absolute feature difference.

use crate::depth_sampler::CandidateGrid;
use crate::panorama::EquirectImage;
use crate::sphere_geom::{cast_ray, project_point, CameraPose, GeomError, PixelCoord};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MvsError {
    #[error("unknown descriptor {0:?}")]
    UnknownDescriptor(String),
    #[error("feature maps use different descriptors")]
    DescriptorMismatch,
    #[error("shape mismatch between inputs")]
    ShapeMismatch,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    /// Raw color, F = 3.
    Rgb,
    /// Zero-mean, unit-norm 5x5 grayscale patch, F = 25. Constant patches
    /// map to the zero vector via an epsilon floor on the norm.
    ZnccPatch,
    /// 5x5 census: neighbor-greater-than-center bits as floats, F = 24.
    Census,
}

impl std::str::FromStr for Descriptor {
    type Err = MvsError;
    fn from_str(s: &str) -> Result<Self, MvsError> {
        match s {
            "rgb" => Ok(Descriptor::Rgb),
            "zncc_patch" | "zncc" => Ok(Descriptor::ZnccPatch),
            "census" => Ok(Descriptor::Census),
            other => Err(MvsError::UnknownDescriptor(other.to_string())),
        }
    }
}

impl Descriptor {
    pub fn feature_len(self) -> usize {
        match self {
            Descriptor::Rgb => 3,
            Descriptor::ZnccPatch => 25,
            Descriptor::Census => 24,
        }
    }
}

/// Per-pixel photometric descriptors over an equirectangular grid
/// (horizontal wrap, vertical clamp like the images they come from).
///
/// Patch descriptors additionally keep the grayscale plane they were built
/// from: matching a patch across views requires re-gathering its taps at
/// sweep-warped positions (the two views' pixel windows cover differently
/// scaled surface regions, so comparing precomputed patch vectors at a
/// single warped center decorrelates).
#[derive(Debug, Clone)]
pub struct FeatureMap {
    h: usize,
    w: usize,
    f: usize,
    descriptor: Descriptor,
    data: Vec<f32>,
    gray: Option<EquirectImage>,
}

impl FeatureMap {
    pub fn height(&self) -> usize {
        self.h
    }
    pub fn width(&self) -> usize {
        self.w
    }
    pub fn feature_len(&self) -> usize {
        self.f
    }
    pub fn descriptor(&self) -> Descriptor {
        self.descriptor
    }

    pub fn feature(&self, col: usize, row: usize) -> &[f32] {
        let off = (row * self.w + col) * self.f;
        &self.data[off..off + self.f]
    }

    /// Bilinear feature interpolation with horizontal wrap / vertical clamp.
    fn sample(&self, u: f64, v: f64, out: &mut [f64]) {
        let w = self.w as f64;
        let x = u.rem_euclid(w) - 0.5;
        let y = v.clamp(0.5, self.h as f64 - 0.5) - 0.5;
        let x0 = x.floor();
        let fx = x - x0;
        let c0 = (x0.rem_euclid(w)) as usize % self.w;
        let c1 = (c0 + 1) % self.w;
        let y0 = y.floor();
        let fy = y - y0;
        let r0 = (y0.max(0.0) as usize).min(self.h - 1);
        let r1 = (r0 + 1).min(self.h - 1);
        let (p00, p10, p01, p11) = (
            self.feature(c0, r0),
            self.feature(c1, r0),
            self.feature(c0, r1),
            self.feature(c1, r1),
        );
        let (w00, w10, w01, w11) = (
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        );
        for k in 0..self.f {
            out[k] = w00 * p00[k] as f64
                + w10 * p10[k] as f64
                + w01 * p01[k] as f64
                + w11 * p11[k] as f64;
        }
    }
}

fn gray_at(img: &EquirectImage, col: usize, row: usize) -> f64 {
    let p = img.pixel(col, row);
    if img.channels() == 1 {
        p[0] as f64
    } else {
        // Rec.601 luma
        0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
    }
}

fn gray_image(img: &EquirectImage) -> EquirectImage {
    EquirectImage::from_fn(img.height(), img.width(), 1, |col, row, out| {
        out[0] = gray_at(img, col, row) as f32;
    })
    .expect("source image is 2:1")
}

fn zncc_normalize(patch: &mut [f64; 25]) {
    let mean = patch.iter().sum::<f64>() / 25.0;
    let mut ss = 0.0;
    for p in patch.iter_mut() {
        *p -= mean;
        ss += *p * *p;
    }
    let inv_norm = 1.0 / (ss + 1e-12).sqrt();
    for p in patch.iter_mut() {
        *p *= inv_norm;
    }
}

/// Extracts per-pixel descriptors. `downsample4` box-averages the image to
/// quarter resolution first (quarter-resolution sweeps cut matching cost 16x).
pub fn extract_features(
    img: &EquirectImage,
    descriptor: Descriptor,
    downsample4: bool,
) -> Result<FeatureMap, MvsError> {
    let owned;
    let img = if downsample4 {
        owned = img.downsample(4).map_err(|_| MvsError::ShapeMismatch)?;
        &owned
    } else {
        img
    };
    let (h, w) = (img.height(), img.width());
    let f = descriptor.feature_len();
    let mut data = vec![0.0f32; h * w * f];

    match descriptor {
        Descriptor::Rgb => {
            for row in 0..h {
                for col in 0..w {
                    let p = img.pixel(col, row);
                    let off = (row * w + col) * f;
                    if img.channels() == 3 {
                        data[off..off + 3].copy_from_slice(p);
                    } else {
                        data[off..off + 3].fill(p[0]);
                    }
                }
            }
        }
        Descriptor::ZnccPatch => {
            for row in 0..h {
                for col in 0..w {
                    let mut patch = [0.0f64; 25];
                    let mut idx = 0;
                    for dy in -2i64..=2 {
                        let r = (row as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        for dx in -2i64..=2 {
                            let c = (col as i64 + dx).rem_euclid(w as i64) as usize;
                            patch[idx] = gray_at(img, c, r);
                            idx += 1;
                        }
                    }
                    zncc_normalize(&mut patch);
                    let off = (row * w + col) * f;
                    for (k, p) in patch.iter().enumerate() {
                        data[off + k] = *p as f32;
                    }
                }
            }
        }
        Descriptor::Census => {
            for row in 0..h {
                for col in 0..w {
                    let center = gray_at(img, col, row);
                    let off = (row * w + col) * f;
                    let mut k = 0;
                    for dy in -2i64..=2 {
                        let r = (row as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        for dx in -2i64..=2 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let c = (col as i64 + dx).rem_euclid(w as i64) as usize;
                            data[off + k] = (gray_at(img, c, r) > center) as u8 as f32;
                            k += 1;
                        }
                    }
                }
            }
        }
    }

    let gray = match descriptor {
        Descriptor::Rgb => None,
        Descriptor::ZnccPatch | Descriptor::Census => Some(gray_image(img)),
    };
    Ok(FeatureMap {
        h,
        w,
        f,
        descriptor,
        data,
        gray,
    })
}

/// Warps reference pixel `(u, v)` hypothesized at spherical depth `t_i`
/// into the source view: back-project along the reference ray, then
/// spherical projection into the source panorama.
pub fn sphere_sweep_warp(
    ref_pose: &CameraPose,
    src_pose: &CameraPose,
    u: f64,
    v: f64,
    t_i: f64,
    h: usize,
    w: usize,
) -> Result<PixelCoord, GeomError> {
    let ray = cast_ray(PixelCoord::new(u, v), ref_pose, h, w);
    let (pixel, _) = project_point(ray.at(t_i), src_pose, h, w)?;
    Ok(pixel)
}

/// Per-reference-pixel, per-candidate matching costs (lower = better).
#[derive(Debug, Clone)]
pub struct CostVolume {
    h: usize,
    w: usize,
    d: usize,
    costs: Vec<f32>,
    candidates: Arc<CandidateGrid>,
}

impl CostVolume {
    pub fn height(&self) -> usize {
        self.h
    }
    pub fn width(&self) -> usize {
        self.w
    }
    pub fn depth_count(&self) -> usize {
        self.d
    }
    pub fn candidates(&self) -> &CandidateGrid {
        &self.candidates
    }
    pub fn costs(&self) -> &[f32] {
        &self.costs
    }

    pub fn cost_slice(&self, col: usize, row: usize) -> &[f32] {
        let off = (row * self.w + col) * self.d;
        &self.costs[off..off + self.d]
    }

    fn same_layout(&self, other: &CostVolume) -> bool {
        self.h == other.h
            && self.w == other.w
            && self.d == other.d
            && (Arc::ptr_eq(&self.candidates, &other.candidates)
                || candidate_grids_equal(&self.candidates, &other.candidates))
    }
}

fn candidate_grids_equal(a: &CandidateGrid, b: &CandidateGrid) -> bool {
    if a.h != b.h || a.w != b.w || a.d != b.d {
        return false;
    }
    for row in 0..a.h {
        for col in 0..a.w {
            if a.depths(col, row) != b.depths(col, row) {
                return false;
            }
        }
    }
    true
}

/// Builds one sphere-sweep cost volume of the reference against a single
/// source view. `cost(u, v, i)` is the mean |f_ref - f_src| at the warped
/// position of candidate i; fully occluded warps cannot occur (full FoV),
/// so every entry is defined.
pub fn build_cost_volume(
    ref_features: &FeatureMap,
    src_features: &FeatureMap,
    ref_pose: &CameraPose,
    src_pose: &CameraPose,
    candidates: Arc<CandidateGrid>,
) -> Result<CostVolume, MvsError> {
    if ref_features.descriptor != src_features.descriptor {
        return Err(MvsError::DescriptorMismatch);
    }
    if ref_features.h != src_features.h
        || ref_features.w != src_features.w
        || candidates.h != ref_features.h
        || candidates.w != ref_features.w
    {
        return Err(MvsError::ShapeMismatch);
    }
    let (h, w, d) = (ref_features.h, ref_features.w, candidates.d);
    let f = ref_features.f;
    let descriptor = ref_features.descriptor;
    let mut costs = vec![0.0f32; h * w * d];

    costs
        .par_chunks_mut(w * d)
        .enumerate()
        .for_each(|(row, row_costs)| {
            let mut sampled = vec![0.0f64; f];
            let mut rays = Vec::new();
            for col in 0..w {
                let f_ref = ref_features.feature(col, row);
                let depths = candidates.depths(col, row);
                match descriptor {
                    Descriptor::Rgb => {
                        let ray = cast_ray(PixelCoord::center(col, row), ref_pose, h, w);
                        for (i, &t) in depths.iter().enumerate() {
                            // a candidate can in principle land on the source
                            // camera center; that hypothesis carries no evidence
                            let cost = match project_point(ray.at(t), src_pose, h, w) {
                                Ok((pix, _)) => {
                                    src_features.sample(pix.u, pix.v, &mut sampled);
                                    let mut acc = 0.0f64;
                                    for k in 0..f {
                                        acc += (f_ref[k] as f64 - sampled[k]).abs();
                                    }
                                    (acc / f as f64) as f32
                                }
                                Err(_) => 1e9,
                            };
                            row_costs[col * d + i] = cost;
                        }
                    }
                    Descriptor::ZnccPatch | Descriptor::Census => {
                        // patch taps are swept through the candidate shell
                        // individually: the source window then covers the same
                        // surface region as the reference window, which a
                        // single warped descriptor lookup cannot guarantee
                        let src_gray = src_features
                            .gray
                            .as_ref()
                            .expect("patch descriptors carry their gray plane");
                        rays.clear();
                        for dy in -2i64..=2 {
                            let r = (row as i64 + dy).clamp(0, h as i64 - 1);
                            for dx in -2i64..=2 {
                                let tap = PixelCoord::new(
                                    col as f64 + 0.5 + dx as f64,
                                    r as f64 + 0.5,
                                );
                                rays.push(cast_ray(tap, ref_pose, h, w));
                            }
                        }
                        for (i, &t) in depths.iter().enumerate() {
                            let mut patch = [0.0f64; 25];
                            let mut degenerate = false;
                            for (k, ray) in rays.iter().enumerate() {
                                match project_point(ray.at(t), src_pose, h, w) {
                                    Ok((pix, _)) => {
                                        patch[k] = src_gray.sample_scalar(pix.u, pix.v);
                                    }
                                    Err(_) => degenerate = true,
                                }
                            }
                            if degenerate {
                                row_costs[col * d + i] = 1e9;
                                continue;
                            }
                            let cost = match descriptor {
                                Descriptor::ZnccPatch => {
                                    zncc_normalize(&mut patch);
                                    let mut acc = 0.0f64;
                                    for k in 0..25 {
                                        acc += (f_ref[k] as f64 - patch[k]).abs();
                                    }
                                    acc / 25.0
                                }
                                Descriptor::Census => {
                                    let center = patch[12];
                                    let mut acc = 0.0f64;
                                    let mut k_out = 0;
                                    for (k, &tap) in patch.iter().enumerate() {
                                        if k == 12 {
                                            continue;
                                        }
                                        let bit = (tap > center) as u8 as f64;
                                        acc += (f_ref[k_out] as f64 - bit).abs();
                                        k_out += 1;
                                    }
                                    acc / 24.0
                                }
                                Descriptor::Rgb => unreachable!(),
                            };
                            row_costs[col * d + i] = cost as f32;
                        }
                    }
                }
            }
        });

    Ok(CostVolume {
        h,
        w,
        d,
        costs,
        candidates,
    })
}

/// Element-wise arithmetic mean of cost volumes from several source views.
pub fn fuse_cost_volumes(volumes: &[CostVolume]) -> Result<CostVolume, MvsError> {
    let first = volumes.first().ok_or(MvsError::ShapeMismatch)?;
    if volumes.iter().any(|v| !first.same_layout(v)) {
        return Err(MvsError::ShapeMismatch);
    }
    let n = volumes.len() as f64;
    let mut costs = vec![0.0f32; first.costs.len()];
    for (i, out) in costs.iter_mut().enumerate() {
        let sum: f64 = volumes.iter().map(|v| v.costs[i] as f64).sum();
        *out = (sum / n) as f32;
    }
    Ok(CostVolume {
        h: first.h,
        w: first.w,
        d: first.d,
        costs,
        candidates: first.candidates.clone(),
    })
}

/// Separable spatial box filter of half-width `radius` applied per depth
/// slab (horizontal wrap, vertical clamp). Radius 0 returns the volume
/// unchanged.
pub fn aggregate_cost(vol: &CostVolume, radius: usize) -> CostVolume {
    if radius == 0 {
        return vol.clone();
    }
    let (h, w, d) = (vol.h, vol.w, vol.d);
    let win = (2 * radius + 1) as f64;

    // horizontal pass (wrap)
    let mut horiz = vec![0.0f32; vol.costs.len()];
    horiz
        .par_chunks_mut(w * d)
        .enumerate()
        .for_each(|(row, out_row)| {
            for col in 0..w {
                for i in 0..d {
                    let mut acc = 0.0f64;
                    for dx in -(radius as i64)..=radius as i64 {
                        let c = (col as i64 + dx).rem_euclid(w as i64) as usize;
                        acc += vol.costs[(row * w + c) * d + i] as f64;
                    }
                    out_row[col * d + i] = (acc / win) as f32;
                }
            }
        });

    // vertical pass (clamp)
    let mut costs = vec![0.0f32; vol.costs.len()];
    costs
        .par_chunks_mut(w * d)
        .enumerate()
        .for_each(|(row, out_row)| {
            for col in 0..w {
                for i in 0..d {
                    let mut acc = 0.0f64;
                    for dy in -(radius as i64)..=radius as i64 {
                        let r = (row as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        acc += horiz[(r * w + col) * d + i] as f64;
                    }
                    out_row[col * d + i] = (acc / win) as f32;
                }
            }
        });

    CostVolume {
        h,
        w,
        d,
        costs,
        candidates: vol.candidates.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    /// Argmin candidate per pixel.
    WinnerTakeAll,
    /// Softmin-weighted mean of the candidate depths; `tau` is the
    /// temperature on the (mean-L1) costs.
    Soft { tau: f64 },
}

/// Decodes the cost volume into a spherical depth map at the volume's
/// resolution.
pub fn decode_depth(vol: &CostVolume, mode: DecodeMode) -> EquirectImage {
    let (h, w, d) = (vol.h, vol.w, vol.d);
    let mut depth = EquirectImage::new(h, w, 1).expect("volumes keep the 2:1 grid");
    let rows: Vec<_> = depth.data_mut().chunks_mut(w).collect();
    rows.into_par_iter().enumerate().for_each(|(row, out)| {
        for col in 0..w {
            let costs = vol.cost_slice(col, row);
            let depths = vol.candidates.depths(col, row);
            out[col] = match mode {
                DecodeMode::WinnerTakeAll => {
                    let mut best = 0;
                    for i in 1..d {
                        if costs[i] < costs[best] {
                            best = i;
                        }
                    }
                    depths[best] as f32
                }
                DecodeMode::Soft { tau } => {
                    let min = costs.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
                    let mut wsum = 0.0f64;
                    let mut tsum = 0.0f64;
                    for i in 0..d {
                        let wgt = (-(costs[i] as f64 - min) / tau).exp();
                        wsum += wgt;
                        tsum += wgt * depths[i];
                    }
                    (tsum / wsum) as f32
                }
            };
        }
    });
    depth
}

/// Writes the raw little-endian f32 costs plus a JSON sidecar with the
/// dimensions; when every pixel shares the same candidate list (uniform-only
/// sweeps) the candidates are embedded in the sidecar, otherwise they are
/// written alongside as a second raw file of f64 depths.
pub fn dump_cost_volume(vol: &CostVolume, path: &std::path::Path) -> Result<(), crate::io::IoError> {
    let mut raw = Vec::with_capacity(vol.costs.len() * 4);
    for &c in &vol.costs {
        raw.extend_from_slice(&c.to_le_bytes());
    }
    crate::io::write_atomic(path, &raw)?;

    let first = vol.candidates.depths(0, 0).to_vec();
    let shared = (0..vol.h)
        .all(|row| (0..vol.w).all(|col| vol.candidates.depths(col, row) == &first[..]));
    let mut sidecar = serde_json::json!({
        "height": vol.h,
        "width": vol.w,
        "depth_candidates": vol.d,
        "dtype": "f32le",
        "layout": "row-major [v][u][d]",
    });
    if shared {
        sidecar["candidates"] = serde_json::json!(first);
    } else {
        let cand_path = path.with_extension("candidates.raw");
        let mut craw = Vec::with_capacity(vol.h * vol.w * vol.d * 8);
        for row in 0..vol.h {
            for col in 0..vol.w {
                for &t in vol.candidates.depths(col, row) {
                    craw.extend_from_slice(&t.to_le_bytes());
                }
            }
        }
        crate::io::write_atomic(&cand_path, &craw)?;
        sidecar["candidates_file"] = serde_json::json!(cand_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned()));
        sidecar["candidates_dtype"] = serde_json::json!("f64le");
    }
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    crate::io::write_atomic(&path.with_extension("json"), &json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth_sampler::{candidate_grid, DepthSpacing, SweepConfig};
    use crate::math::{vec3, Vec3};
    use crate::panorama::EquirectImage;
    use crate::scene_oracle::{render_gt, sphere_room};

    fn uniform_grid(h: usize, w: usize, n: usize) -> Arc<CandidateGrid> {
        let cfg = SweepConfig {
            n_uni: n,
            n_mono: 0,
            spacing: DepthSpacing::Linear,
            ..SweepConfig::default()
        };
        Arc::new(candidate_grid(&cfg, None, h, w).unwrap())
    }

    #[test]
    fn descriptor_parsing() {
        assert_eq!("zncc_patch".parse::<Descriptor>(), Ok(Descriptor::ZnccPatch));
        assert_eq!("rgb".parse::<Descriptor>(), Ok(Descriptor::Rgb));
        assert!("sift".parse::<Descriptor>().is_err());
    }

    #[test]
    fn rgb_features_are_the_pixels() {
        let img = crate::panorama::direction_field_panorama(8);
        let fm = extract_features(&img, Descriptor::Rgb, false).unwrap();
        assert_eq!(fm.feature_len(), 3);
        assert_eq!(fm.feature(5, 3), img.pixel(5, 3));
    }

    #[test]
    fn zncc_of_constant_image_is_zero() {
        let img = EquirectImage::from_data(8, 16, 1, vec![0.7; 8 * 16]).unwrap();
        let fm = extract_features(&img, Descriptor::ZnccPatch, false).unwrap();
        assert!(fm.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zncc_is_unit_norm_on_textured_input() {
        let img = crate::panorama::direction_field_panorama(16);
        let fm = extract_features(&img, Descriptor::ZnccPatch, false).unwrap();
        let f = fm.feature(10, 8);
        let norm: f64 = f.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5, "norm {norm}");
    }

    #[test]
    fn census_of_horizontal_gradient_is_row_constant() {
        // gray increases with column; inside a row every pixel sees the
        // same comparison pattern (away from the wrap seam)
        let img = EquirectImage::from_fn(8, 16, 1, |col, _, out| {
            out[0] = col as f32 / 16.0;
        })
        .unwrap();
        let fm = extract_features(&img, Descriptor::Census, false).unwrap();
        for row in 0..8 {
            let want = fm.feature(5, row).to_vec();
            for col in 3..13 {
                assert_eq!(fm.feature(col, row), &want[..], "col {col} row {row}");
            }
        }
    }

    #[test]
    fn identity_warp_when_poses_match() {
        let pose = CameraPose::identity_at(vec3(0.3, -0.1, 0.9));
        for (u, v, t) in [(12.3, 6.1, 0.5), (0.4, 2.0, 3.0), (31.0, 9.9, 9.0)] {
            let p = sphere_sweep_warp(&pose, &pose, u, v, t, 16, 32).unwrap();
            assert!((p.u - u).abs() < 1e-9 && (p.v - v).abs() < 1e-9);
        }
    }

    #[test]
    fn baseline_point_warps_to_source_pole() {
        // source displaced straight up: points on the baseline axis sit at
        // the source view's poles (the epipole rows)
        let ref_pose = CameraPose::identity_at(Vec3::ZERO);
        let src_pose = CameraPose::identity_at(vec3(0.0, 0.4, 0.0));
        let (h, w) = (64, 128);
        // reference pixel looking straight up (phi ~ 0) at depth beyond the source
        let p = sphere_sweep_warp(&ref_pose, &src_pose, 40.0, 0.01, 2.0, h, w).unwrap();
        assert!(p.v < 1.0, "expected pole-adjacent row, got v = {}", p.v);
        // and looking down from above the source: lands near the south pole
        let p = sphere_sweep_warp(&ref_pose, &src_pose, 40.0, h as f64 - 0.01, 0.2, h, w)
            .unwrap();
        assert!(p.v > h as f64 - 1.0, "got v = {}", p.v);
    }

    #[test]
    fn identical_features_identity_warp_zero_cost() {
        let img = crate::panorama::direction_field_panorama(16);
        let fm = Arc::new(extract_features(&img, Descriptor::Rgb, false).unwrap());
        let pose = CameraPose::identity_at(Vec3::ZERO);
        let grid = uniform_grid(16, 32, 8);
        let vol = build_cost_volume(&fm, &fm, &pose, &pose, grid).unwrap();
        assert!(vol.costs.iter().all(|&c| c.abs() < 1e-6));
    }

    #[test]
    fn cost_volume_is_nonnegative_and_shaped() {
        let scene = sphere_room();
        let poses = crate::scene_oracle::baseline_poses(0.5, 2);
        let (img_a, _) = render_gt(&scene, &poses[0], 16, 32).unwrap();
        let (img_b, _) = render_gt(&scene, &poses[1], 16, 32).unwrap();
        let fa = extract_features(&img_a, Descriptor::ZnccPatch, false).unwrap();
        let fb = extract_features(&img_b, Descriptor::ZnccPatch, false).unwrap();
        let grid = uniform_grid(16, 32, 16);
        let vol = build_cost_volume(&fa, &fb, &poses[0], &poses[1], grid).unwrap();
        assert_eq!((vol.height(), vol.width(), vol.depth_count()), (16, 32, 16));
        assert!(vol.costs.iter().all(|&c| c >= 0.0));

        let rgb = extract_features(&img_b, Descriptor::Rgb, false).unwrap();
        assert_eq!(
            build_cost_volume(&fa, &rgb, &poses[0], &poses[1], uniform_grid(16, 32, 16))
                .unwrap_err(),
            MvsError::DescriptorMismatch
        );
    }

    #[test]
    fn fusion_identity_and_idempotence() {
        let img = crate::panorama::direction_field_panorama(8);
        let fm = Arc::new(extract_features(&img, Descriptor::Rgb, false).unwrap());
        let ref_pose = CameraPose::identity_at(Vec3::ZERO);
        let src_pose = CameraPose::identity_at(vec3(0.1, 0.0, 0.0));
        let grid = uniform_grid(8, 16, 4);
        let vol = build_cost_volume(&fm, &fm, &ref_pose, &src_pose, grid).unwrap();

        let single = fuse_cost_volumes(std::slice::from_ref(&vol)).unwrap();
        assert_eq!(single.costs, vol.costs);

        let twice = fuse_cost_volumes(&[vol.clone(), vol.clone()]).unwrap();
        assert_eq!(twice.costs, vol.costs);

        assert!(fuse_cost_volumes(&[]).is_err());
    }

    #[test]
    fn aggregate_radius_zero_is_identity_and_constants_unchanged() {
        let img = crate::panorama::direction_field_panorama(8);
        let fm = Arc::new(extract_features(&img, Descriptor::Rgb, false).unwrap());
        let ref_pose = CameraPose::identity_at(Vec3::ZERO);
        let src_pose = CameraPose::identity_at(vec3(0.1, 0.0, 0.0));
        let vol =
            build_cost_volume(&fm, &fm, &ref_pose, &src_pose, uniform_grid(8, 16, 4)).unwrap();
        let same = aggregate_cost(&vol, 0);
        assert_eq!(same.costs, vol.costs);

        let mut flat = vol.clone();
        flat.costs.fill(0.375);
        let smoothed = aggregate_cost(&flat, 2);
        assert!(smoothed.costs.iter().all(|&c| (c - 0.375).abs() < 1e-6));
    }

    #[test]
    fn decode_modes_agree_on_clear_minima() {
        let grid = uniform_grid(2, 4, 8);
        let mut costs = vec![1.0f32; 2 * 4 * 8];
        // plant a unique zero at candidate 5 for every pixel
        for px in 0..8 {
            costs[px * 8 + 5] = 0.0;
        }
        let vol = CostVolume {
            h: 2,
            w: 4,
            d: 8,
            costs,
            candidates: grid.clone(),
        };
        let expect = grid.depths(0, 0)[5] as f32;
        let wta = decode_depth(&vol, DecodeMode::WinnerTakeAll);
        assert!(wta.data().iter().all(|&d| d == expect));
        let soft = decode_depth(&vol, DecodeMode::Soft { tau: 0.02 });
        let bin = 9.9 / 8.0;
        assert!(soft
            .data()
            .iter()
            .all(|&d| (d - expect).abs() < bin as f32));

        // constant volume: soft mode returns the candidate mean
        let flat = CostVolume {
            h: 2,
            w: 4,
            d: 8,
            costs: vec![0.5; 2 * 4 * 8],
            candidates: grid.clone(),
        };
        let soft = decode_depth(&flat, DecodeMode::Soft { tau: 0.02 });
        let mean: f64 = grid.depths(0, 0).iter().sum::<f64>() / 8.0;
        assert!(soft.data().iter().all(|&d| (d as f64 - mean).abs() < 1e-5));
    }

    #[test]
    fn soft_decode_approaches_wta_as_tau_vanishes() {
        let mut rng = crate::rng::stream_rng(13, 0);
        use rand::Rng;
        let grid = uniform_grid(2, 4, 16);
        let costs: Vec<f32> = (0..2 * 4 * 16).map(|_| rng.gen_range(0.1..1.0)).collect();
        let vol = CostVolume {
            h: 2,
            w: 4,
            d: 16,
            costs,
            candidates: grid,
        };
        let wta = decode_depth(&vol, DecodeMode::WinnerTakeAll);
        let soft = decode_depth(&vol, DecodeMode::Soft { tau: 1e-4 });
        for (a, b) in wta.data().iter().zip(soft.data()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn dump_writes_raw_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let img = crate::panorama::direction_field_panorama(8);
        let fm = Arc::new(extract_features(&img, Descriptor::Rgb, false).unwrap());
        let pose = CameraPose::identity_at(Vec3::ZERO);
        let vol = build_cost_volume(
            &fm,
            &fm,
            &pose,
            &CameraPose::identity_at(vec3(0.1, 0.0, 0.0)),
            uniform_grid(8, 16, 4),
        )
        .unwrap();
        let path = dir.path().join("cost.raw");
        dump_cost_volume(&vol, &path).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(raw.len(), vol.costs.len() * 4);
        let sidecar: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("cost.json")).unwrap()).unwrap();
        assert_eq!(sidecar["height"], 8);
        assert_eq!(sidecar["candidates"].as_array().unwrap().len(), 4);
    }
}
