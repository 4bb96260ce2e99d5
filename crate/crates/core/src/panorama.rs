//! Equirectangular image container, wrap-aware bilinear resampling and
//! cube-map conversion.
//!
//! Pixel centers sit at integer+0.5 in both axes. Horizontally the image
//! wraps (column 0 neighbors column W-1); vertically it clamps at the
//! poles. Storage is `f32`, interpolation arithmetic `f64`.

use crate::math::Vec3;
use crate::sphere_geom::{
    cartesian_to_spherical, pixel_to_spherical, spherical_to_cartesian, spherical_to_pixel,
    PixelCoord,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ImageError {
    #[error("panoramas must be 2:1 (got {h}x{w})")]
    BadAspect { h: usize, w: usize },
    #[error("channel count must be 1 or 3 (got {0})")]
    BadChannels(usize),
    #[error("data length {got} does not match {h}x{w}x{c}")]
    BadLength { got: usize, h: usize, w: usize, c: usize },
    #[error("image contains non-finite values")]
    NonFinite,
    #[error("images have different shapes")]
    ShapeMismatch,
    #[error("dimensions not divisible by {0}")]
    NotDivisible(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f32>,
}

impl EquirectImage {
    pub fn new(h: usize, w: usize, c: usize) -> Result<Self, ImageError> {
        if w != 2 * h || h == 0 {
            return Err(ImageError::BadAspect { h, w });
        }
        if c != 1 && c != 3 {
            return Err(ImageError::BadChannels(c));
        }
        Ok(EquirectImage {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        })
    }

    pub fn from_data(h: usize, w: usize, c: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        let mut img = EquirectImage::new(h, w, c)?;
        if data.len() != h * w * c {
            return Err(ImageError::BadLength { got: data.len(), h, w, c });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite);
        }
        img.data = data;
        Ok(img)
    }

    /// Fills pixel (col, row) from a per-pixel closure returning `c` values.
    pub fn from_fn<F>(h: usize, w: usize, c: usize, mut f: F) -> Result<Self, ImageError>
    where
        F: FnMut(usize, usize, &mut [f32]),
    {
        let mut img = EquirectImage::new(h, w, c)?;
        for row in 0..h {
            for col in 0..w {
                let off = (row * w + col) * c;
                f(col, row, &mut img.data[off..off + c]);
            }
        }
        Ok(img)
    }

    pub fn height(&self) -> usize {
        self.h
    }
    pub fn width(&self) -> usize {
        self.w
    }
    pub fn channels(&self) -> usize {
        self.c
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &EquirectImage) -> bool {
        self.h == other.h && self.w == other.w && self.c == other.c
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let off = (row * self.w + col) * self.c;
        &self.data[off..off + self.c]
    }

    pub fn pixel_mut(&mut self, col: usize, row: usize) -> &mut [f32] {
        let off = (row * self.w + col) * self.c;
        &mut self.data[off..off + self.c]
    }

    /// Bilinear interpolation at continuous `(u, v)`: `u` wraps modulo W,
    /// `v` clamps to `[0.5, H-0.5]`. Writes one value per channel into `out`.
    pub fn sample_bilinear_wrapped(&self, u: f64, v: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.c);
        let w = self.w as f64;
        let x = (u.rem_euclid(w)) - 0.5;
        let y = v.clamp(0.5, self.h as f64 - 0.5) - 0.5;

        let x0 = x.floor();
        let fx = x - x0;
        let c0 = (x0.rem_euclid(w)) as usize % self.w;
        let c1 = (c0 + 1) % self.w;

        let y0 = y.floor();
        let fy = y - y0;
        let r0 = (y0.max(0.0) as usize).min(self.h - 1);
        let r1 = (r0 + 1).min(self.h - 1);

        let w00 = (1.0 - fx) * (1.0 - fy);
        let w10 = fx * (1.0 - fy);
        let w01 = (1.0 - fx) * fy;
        let w11 = fx * fy;

        let p00 = self.pixel(c0, r0);
        let p10 = self.pixel(c1, r0);
        let p01 = self.pixel(c0, r1);
        let p11 = self.pixel(c1, r1);
        for k in 0..self.c {
            out[k] = w00 * p00[k] as f64
                + w10 * p10[k] as f64
                + w01 * p01[k] as f64
                + w11 * p11[k] as f64;
        }
    }

    pub fn sample_rgb(&self, u: f64, v: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        self.sample_bilinear_wrapped(u, v, &mut out);
        out
    }

    pub fn sample_scalar(&self, u: f64, v: f64) -> f64 {
        let mut out = [0.0; 1];
        self.sample_bilinear_wrapped(u, v, &mut out);
        out[0]
    }

    /// Box-average downsample by an integer factor (both dimensions must
    /// divide evenly).
    pub fn downsample(&self, factor: usize) -> Result<EquirectImage, ImageError> {
        if factor == 0 || self.h % factor != 0 || self.w % factor != 0 {
            return Err(ImageError::NotDivisible(factor));
        }
        let (nh, nw) = (self.h / factor, self.w / factor);
        EquirectImage::from_fn(nh, nw, self.c, |col, row, out| {
            let mut acc = vec![0.0f64; self.c];
            for dy in 0..factor {
                for dx in 0..factor {
                    let p = self.pixel(col * factor + dx, row * factor + dy);
                    for k in 0..self.c {
                        acc[k] += p[k] as f64;
                    }
                }
            }
            let n = (factor * factor) as f64;
            for k in 0..self.c {
                out[k] = (acc[k] / n) as f32;
            }
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// One square 90-degree-FoV cube face. Sampling clamps at the borders
/// (faces do not wrap).
#[derive(Debug, Clone, PartialEq)]
pub struct CubeFace {
    size: usize,
    channels: usize,
    data: Vec<f32>,
}

impl CubeFace {
    fn new(size: usize, channels: usize) -> Self {
        CubeFace {
            size,
            channels,
            data: vec![0.0; size * size * channels],
        }
    }

    pub fn from_data(size: usize, channels: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::BadChannels(channels));
        }
        if data.len() != size * size * channels || size == 0 {
            return Err(ImageError::BadLength {
                got: data.len(),
                h: size,
                w: size,
                c: channels,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite);
        }
        Ok(CubeFace {
            size,
            channels,
            data,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, col: usize, row: usize) -> &[f32] {
        let off = (row * self.size + col) * self.channels;
        &self.data[off..off + self.channels]
    }

    pub fn sample_bilinear_clamped(&self, x: f64, y: f64, out: &mut [f64]) {
        let n = self.size as f64;
        let xc = x.clamp(0.5, n - 0.5) - 0.5;
        let yc = y.clamp(0.5, n - 0.5) - 0.5;
        let x0 = xc.floor();
        let y0 = yc.floor();
        let fx = xc - x0;
        let fy = yc - y0;
        let c0 = (x0 as usize).min(self.size - 1);
        let c1 = (c0 + 1).min(self.size - 1);
        let r0 = (y0 as usize).min(self.size - 1);
        let r1 = (r0 + 1).min(self.size - 1);
        for k in 0..self.channels {
            let g = |col: usize, row: usize| self.pixel(col, row)[k] as f64;
            out[k] = (1.0 - fx) * (1.0 - fy) * g(c0, r0)
                + fx * (1.0 - fy) * g(c1, r0)
                + (1.0 - fx) * fy * g(c0, r1)
                + fx * fy * g(c1, r1);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceId {
    Front = 0,
    Right = 1,
    Back = 2,
    Left = 3,
    Up = 4,
    Down = 5,
}

pub const FACE_IDS: [FaceId; 6] = [
    FaceId::Front,
    FaceId::Right,
    FaceId::Back,
    FaceId::Left,
    FaceId::Up,
    FaceId::Down,
];

impl FaceId {
    pub fn name(self) -> &'static str {
        match self {
            FaceId::Front => "front",
            FaceId::Right => "right",
            FaceId::Back => "back",
            FaceId::Left => "left",
            FaceId::Up => "up",
            FaceId::Down => "down",
        }
    }

    /// (forward, right, down) basis of the face; `dir = f + a*r + b*d` with
    /// `a, b` in [-1, 1]. Lateral faces keep image-down = -y; up/down faces
    /// continue the front face across its horizontal edges.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        match self {
            FaceId::Front => (Vec3::X, Vec3::Z, -Vec3::Y),
            FaceId::Right => (Vec3::Z, -Vec3::X, -Vec3::Y),
            FaceId::Back => (-Vec3::X, -Vec3::Z, -Vec3::Y),
            FaceId::Left => (-Vec3::Z, Vec3::X, -Vec3::Y),
            FaceId::Up => (Vec3::Y, Vec3::Z, Vec3::X),
            FaceId::Down => (-Vec3::Y, Vec3::Z, -Vec3::X),
        }
    }

    /// Face whose forward axis dominates `dir`.
    pub fn for_direction(dir: Vec3) -> FaceId {
        let (axis, value) = dir.dominant_axis();
        match (axis, value >= 0.0) {
            (0, true) => FaceId::Front,
            (0, false) => FaceId::Back,
            (1, true) => FaceId::Up,
            (1, false) => FaceId::Down,
            (2, true) => FaceId::Right,
            (2, false) => FaceId::Left,
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeMap {
    faces: [CubeFace; 6],
}

impl CubeMap {
    pub fn face(&self, id: FaceId) -> &CubeFace {
        &self.faces[id as usize]
    }
    pub fn size(&self) -> usize {
        self.faces[0].size
    }
    pub fn channels(&self) -> usize {
        self.faces[0].channels
    }

    /// Assembles a cube map from six faces in [`FACE_IDS`] order; all must
    /// share edge length and channel count.
    pub fn from_faces(faces: [CubeFace; 6]) -> Result<CubeMap, ImageError> {
        let (size, channels) = (faces[0].size, faces[0].channels);
        if faces
            .iter()
            .any(|f| f.size != size || f.channels != channels)
        {
            return Err(ImageError::ShapeMismatch);
        }
        Ok(CubeMap { faces })
    }
}

/// Resamples a panorama into six cube faces of edge length `f_size`.
pub fn equirect_to_cubemap(img: &EquirectImage, f_size: usize) -> CubeMap {
    assert!(f_size > 0);
    let c = img.channels();
    let mut faces: [CubeFace; 6] = std::array::from_fn(|_| CubeFace::new(f_size, c));
    let mut sample = vec![0.0f64; c];
    for (fi, face) in faces.iter_mut().enumerate() {
        let (fwd, right, down) = FACE_IDS[fi].basis();
        for j in 0..f_size {
            let b = 2.0 * (j as f64 + 0.5) / f_size as f64 - 1.0;
            for i in 0..f_size {
                let a = 2.0 * (i as f64 + 0.5) / f_size as f64 - 1.0;
                let dir = fwd + a * right + b * down;
                let s = cartesian_to_spherical(dir).expect("face directions are nonzero");
                let p = spherical_to_pixel(s, img.height(), img.width());
                img.sample_bilinear_wrapped(p.u, p.v, &mut sample);
                let off = (j * f_size + i) * c;
                for k in 0..c {
                    face.data[off + k] = sample[k] as f32;
                }
            }
        }
    }
    CubeMap { faces }
}

/// Stitches a cube map back into an `h x 2h` panorama. Each output pixel's
/// direction selects the face with the largest |axis component| and samples
/// it bilinearly.
pub fn cubemap_to_equirect(cm: &CubeMap, h: usize) -> EquirectImage {
    assert!(h > 0);
    let w = 2 * h;
    let c = cm.channels();
    let f_size = cm.size() as f64;
    let mut sample = vec![0.0f64; c];
    EquirectImage::from_fn(h, w, c, |col, row, out| {
        let (theta, phi) = pixel_to_spherical(PixelCoord::center(col, row), h, w);
        let dir = spherical_to_cartesian(theta, phi);
        let id = FaceId::for_direction(dir);
        let (fwd, right, down) = id.basis();
        let denom = dir.dot(fwd);
        let a = dir.dot(right) / denom;
        let b = dir.dot(down) / denom;
        let x = (a + 1.0) * 0.5 * f_size;
        let y = (b + 1.0) * 0.5 * f_size;
        cm.face(id).sample_bilinear_clamped(x, y, &mut sample);
        for k in 0..c {
            out[k] = sample[k] as f32;
        }
    })
    .expect("2:1 by construction")
}

/// RGB = dir/2 + 0.5 test pattern; every pixel encodes its own direction.
pub fn direction_field_panorama(h: usize) -> EquirectImage {
    let w = 2 * h;
    EquirectImage::from_fn(h, w, 3, |col, row, out| {
        let (theta, phi) = pixel_to_spherical(PixelCoord::center(col, row), h, w);
        let d = spherical_to_cartesian(theta, phi);
        out[0] = (d.x * 0.5 + 0.5) as f32;
        out[1] = (d.y * 0.5 + 0.5) as f32;
        out[2] = (d.z * 0.5 + 0.5) as f32;
    })
    .expect("2:1 by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_image(h: usize, seed: u64) -> EquirectImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EquirectImage::from_fn(h, 2 * h, 3, |_, _, out| {
            for v in out.iter_mut() {
                *v = rng.gen_range(0.0..1.0);
            }
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(EquirectImage::new(4, 9, 3).is_err());
        assert!(EquirectImage::new(4, 8, 2).is_err());
        assert!(EquirectImage::from_data(4, 8, 1, vec![0.0; 31]).is_err());
        assert!(EquirectImage::from_data(1, 2, 1, vec![f32::NAN, 0.0]).is_err());
    }

    #[test]
    fn sampling_at_pixel_centers_is_exact() {
        let img = noise_image(8, 1);
        for row in 0..8 {
            for col in 0..16 {
                let got = img.sample_rgb(col as f64 + 0.5, row as f64 + 0.5);
                let want = img.pixel(col, row);
                for k in 0..3 {
                    assert!((got[k] - want[k] as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_image_samples_constant() {
        let img = EquirectImage::from_data(4, 8, 1, vec![0.625; 32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let u = rng.gen_range(-20.0..20.0);
            let v = rng.gen_range(-3.0..7.0);
            assert!((img.sample_scalar(u, v) - 0.625).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_blends_last_and_first_column() {
        // one row band (h=1 disallowed, use h=2) with distinct columns
        let mut img = EquirectImage::new(2, 4, 1).unwrap();
        for row in 0..2 {
            for col in 0..4 {
                img.pixel_mut(col, row)[0] = col as f32;
            }
        }
        // u = W - 0.25 sits a quarter pixel past column 3's center, toward
        // the wrapped column 0
        let got = img.sample_scalar(4.0 - 0.25, 1.0);
        let want = 0.75 * 3.0 + 0.25 * 0.0;
        assert!((got - want).abs() < 1e-12, "{got}");
    }

    #[test]
    fn seam_is_continuous() {
        let img = noise_image(8, 3);
        // dyadic epsilon so W + eps is exactly representable
        let eps = 2.0f64.powi(-20);
        for v in [0.7, 3.3, 7.9] {
            let a = img.sample_rgb(eps, v);
            let b = img.sample_rgb(16.0 + eps, v);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn samples_stay_within_source_range() {
        let img = noise_image(8, 4);
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for &v in img.data() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let s = img.sample_rgb(rng.gen_range(-5.0..25.0), rng.gen_range(-1.0..9.0));
            for k in 0..3 {
                assert!(s[k] >= lo as f64 - 1e-9 && s[k] <= hi as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn constant_panorama_gives_constant_faces_and_back() {
        let img = EquirectImage::from_data(8, 16, 3, vec![0.25; 8 * 16 * 3]).unwrap();
        let cm = equirect_to_cubemap(&img, 8);
        for id in FACE_IDS {
            assert!(cm.face(id).data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
        }
        let back = cubemap_to_equirect(&cm, 8);
        assert!(back.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn direction_field_face_centers_encode_their_axis() {
        let img = direction_field_panorama(256);
        let cm = equirect_to_cubemap(&img, 256);
        let mut out = [0.0f64; 3];
        for id in FACE_IDS {
            let (fwd, _, _) = id.basis();
            cm.face(id).sample_bilinear_clamped(128.0, 128.0, &mut out);
            for (k, axis) in [fwd.x, fwd.y, fwd.z].into_iter().enumerate() {
                let want = axis * 0.5 + 0.5;
                assert!(
                    (out[k] - want).abs() <= 1.0 / 255.0,
                    "{:?} ch{k}: {} vs {want}",
                    id.name(),
                    out[k]
                );
            }
        }
    }

    #[test]
    fn direction_field_round_trip_max_error() {
        let img = direction_field_panorama(128);
        let cm = equirect_to_cubemap(&img, 128);
        let back = cubemap_to_equirect(&cm, 128);
        let mut max_err = 0.0f32;
        for (a, b) in img.data().iter().zip(back.data()) {
            max_err = max_err.max((a - b).abs());
        }
        assert!(max_err <= 2.0 / 255.0, "max err {max_err}");
    }

    #[test]
    fn downsample_box_average() {
        let mut img = EquirectImage::new(4, 8, 1).unwrap();
        for row in 0..4 {
            for col in 0..8 {
                img.pixel_mut(col, row)[0] = (row * 8 + col) as f32;
            }
        }
        let d = img.downsample(2).unwrap();
        assert_eq!((d.height(), d.width()), (2, 4));
        // top-left 2x2 block: 0,1,8,9 -> 4.5
        assert!((d.pixel(0, 0)[0] - 4.5).abs() < 1e-6);
        assert!(img.downsample(3).is_err());
    }
}
