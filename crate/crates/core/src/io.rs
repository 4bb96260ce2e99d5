//! Image file IO: 8-bit sRGB PNG for color panoramas and little-endian PFM
//! for float/depth maps. All writes go through a temp file + rename so a
//! crashed run never leaves a truncated output behind.

use crate::panorama::EquirectImage;
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Image(#[from] crate::panorama::ImageError),
}

fn format_err<T>(msg: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Format(msg.into()))
}

/// Exact sRGB transfer function (linear -> encoded), both sides in [0, 1].
pub fn srgb_encode(linear: f64) -> f64 {
    let l = linear.clamp(0.0, 1.0);
    if l <= 0.0031308 {
        12.92 * l
    } else {
        1.055 * l.powf(1.0 / 2.4) - 0.055
    }
}

/// Exact sRGB transfer function (encoded -> linear).
pub fn srgb_decode(encoded: f64) -> f64 {
    let s = encoded.clamp(0.0, 1.0);
    if s <= 0.04045 {
        s / 12.92
    } else {
        ((s + 0.055) / 1.055).powf(2.4)
    }
}

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Saves a linear-light image as 8-bit PNG (sRGB-encoded). C=3 writes RGB,
/// C=1 grayscale.
pub fn save_png(img: &EquirectImage, path: &Path) -> Result<(), IoError> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let pixels: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (srgb_encode(v as f64) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let color = match c {
        1 => image::ColorType::L8,
        3 => image::ColorType::Rgb8,
        _ => return format_err(format!("cannot write {c}-channel png")),
    };
    let mut bytes = Vec::new();
    use image::ImageEncoder;
    image::codecs::png::PngEncoder::new(&mut bytes).write_image(
        &pixels,
        w as u32,
        h as u32,
        color,
    )?;
    write_atomic(path, &bytes)
}

/// Loads an 8-bit PNG, decoding sRGB to linear floats in [0, 1].
pub fn load_png(path: &Path) -> Result<EquirectImage, IoError> {
    let dyn_img = image::open(path)?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    match dyn_img {
        image::DynamicImage::ImageLuma8(gray) => {
            let data: Vec<f32> = gray
                .as_raw()
                .iter()
                .map(|&b| srgb_decode(b as f64 / 255.0) as f32)
                .collect();
            Ok(EquirectImage::from_data(h, w, 1, data)?)
        }
        other => {
            let rgb = other.to_rgb8();
            let data: Vec<f32> = rgb
                .as_raw()
                .iter()
                .map(|&b| srgb_decode(b as f64 / 255.0) as f32)
                .collect();
            Ok(EquirectImage::from_data(h, w, 3, data)?)
        }
    }
}

/// Saves one cube face as 8-bit sRGB PNG.
pub fn save_face_png(face: &crate::panorama::CubeFace, path: &Path) -> Result<(), IoError> {
    let pixels: Vec<u8> = face
        .data()
        .iter()
        .map(|&v| (srgb_encode(v as f64) * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let color = match face.channels() {
        1 => image::ColorType::L8,
        3 => image::ColorType::Rgb8,
        c => return format_err(format!("cannot write {c}-channel png")),
    };
    let mut bytes = Vec::new();
    use image::ImageEncoder;
    image::codecs::png::PngEncoder::new(&mut bytes).write_image(
        &pixels,
        face.size() as u32,
        face.size() as u32,
        color,
    )?;
    write_atomic(path, &bytes)
}

/// Loads a square 8-bit PNG as a linear-light cube face.
pub fn load_face_png(path: &Path) -> Result<crate::panorama::CubeFace, IoError> {
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w != h {
        return format_err(format!("cube faces must be square, got {w}x{h}"));
    }
    let data: Vec<f32> = rgb
        .as_raw()
        .iter()
        .map(|&b| srgb_decode(b as f64 / 255.0) as f32)
        .collect();
    Ok(crate::panorama::CubeFace::from_data(h, 3, data)?)
}

/// Writes a PFM (`PF` color / `Pf` grayscale, scale -1.0 = little endian,
/// scanlines bottom-to-top). The float bits survive a round trip exactly.
pub fn save_pfm(img: &EquirectImage, path: &Path) -> Result<(), IoError> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let magic = match c {
        1 => "Pf",
        3 => "PF",
        _ => return format_err(format!("cannot write {c}-channel pfm")),
    };
    let mut bytes = Vec::with_capacity(32 + h * w * c * 4);
    bytes.extend_from_slice(format!("{magic}\n{w} {h}\n-1.0\n").as_bytes());
    for row in (0..h).rev() {
        let off = row * w * c;
        for &v in &img.data()[off..off + w * c] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

pub fn load_pfm(path: &Path) -> Result<EquirectImage, IoError> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;
    let mut token = || -> Result<String, IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return format_err("truncated pfm header");
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token()?;
    let c = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return format_err(format!("not a pfm file (magic {other:?})")),
    };
    let w: usize = token()?
        .parse()
        .map_err(|_| IoError::Format("bad width".into()))?;
    let h: usize = token()?
        .parse()
        .map_err(|_| IoError::Format("bad height".into()))?;
    let scale: f64 = token()?
        .parse()
        .map_err(|_| IoError::Format("bad scale".into()))?;
    if scale >= 0.0 {
        return format_err("big-endian pfm not supported");
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let need = h * w * c * 4;
    if bytes.len() < pos + need {
        return format_err("pfm raster truncated");
    }
    let mut data = vec![0.0f32; h * w * c];
    for row in 0..h {
        let src_row = h - 1 - row;
        let src = pos + src_row * w * c * 4;
        for i in 0..w * c {
            let b = &bytes[src + i * 4..src + i * 4 + 4];
            data[row * w * c + i] = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
    }
    Ok(EquirectImage::from_data(h, w, c, data)?)
}
