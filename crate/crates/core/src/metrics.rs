//! Image and depth quality metrics: PSNR, latitude-weighted WS-PSNR, SSIM
//! and the depth error family (L1/L2/RMSE plus their WS variants) over the
//! [0.1, 10] m valid range.
//!
//! LPIPS is excluded (it requires a learned network); report headers say so.

use crate::io::srgb_encode;
use crate::panorama::{EquirectImage, ImageError};
use serde::Serialize;

pub const PSNR_CAP_DB: f64 = 99.0;
pub const DEPTH_VALID_MIN: f64 = 0.1;
pub const DEPTH_VALID_MAX: f64 = 10.0;

/// Cosine latitude weight of row `v` (continuous) in an image of height
/// `h`: ~1 at the equator, ->0 at the poles.
pub fn latitude_weight(v: f64, h: usize) -> f64 {
    ((v + 0.5 - h as f64 / 2.0) * std::f64::consts::PI / h as f64).cos()
}

fn check_shape(a: &EquirectImage, b: &EquirectImage) -> Result<(), ImageError> {
    if !a.same_shape(b) {
        return Err(ImageError::ShapeMismatch);
    }
    Ok(())
}

fn mse_to_db(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// PSNR in dB over all channels, peak 1.0, capped at 99 dB.
pub fn psnr(a: &EquirectImage, b: &EquirectImage) -> Result<f64, ImageError> {
    check_shape(a, b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    Ok(mse_to_db(mse))
}

/// PSNR with per-row cosine latitude weights (normalized), compensating the
/// equirectangular oversampling of the poles.
pub fn ws_psnr(a: &EquirectImage, b: &EquirectImage) -> Result<f64, ImageError> {
    check_shape(a, b)?;
    let (h, w, c) = (a.height(), a.width(), a.channels());
    let mut num = 0.0;
    let mut den = 0.0;
    for row in 0..h {
        let wgt = latitude_weight(row as f64, h);
        let off = row * w * c;
        for i in 0..w * c {
            let d = (a.data()[off + i] - b.data()[off + i]) as f64;
            num += wgt * d * d;
            den += wgt;
        }
    }
    Ok(mse_to_db(num / den))
}

fn to_gray(img: &EquirectImage) -> Vec<f64> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    let mut out = Vec::with_capacity(h * w);
    for row in 0..h {
        for col in 0..w {
            let p = img.pixel(col, row);
            out.push(if c == 1 {
                p[0] as f64
            } else {
                0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
            });
        }
    }
    out
}

/// 11-tap Gaussian (sigma 1.5), horizontal wrap / vertical clamp, separable.
fn gaussian_filter(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut kernel = [0.0f64; 11];
    let sigma = 1.5;
    let mut sum = 0.0;
    for (i, k) in kernel.iter_mut().enumerate() {
        let x = i as f64 - 5.0;
        *k = (-x * x / (2.0 * sigma * sigma)).exp();
        sum += *k;
    }
    kernel.iter_mut().for_each(|k| *k /= sum);

    let mut horiz = vec![0.0; src.len()];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let c = (col as i64 + i as i64 - 5).rem_euclid(w as i64) as usize;
                acc += k * src[row * w + c];
            }
            horiz[row * w + col] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for row in 0..h {
        for col in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let r = (row as i64 + i as i64 - 5).clamp(0, h as i64 - 1) as usize;
                acc += k * horiz[r * w + col];
            }
            out[row * w + col] = acc;
        }
    }
    out
}

/// Mean local SSIM (Rec.601 grayscale, 11x11 Gaussian window, K1 = 0.01,
/// K2 = 0.03, data range 1). The raw value in [-1, 1] is reported.
pub fn ssim(a: &EquirectImage, b: &EquirectImage) -> Result<f64, ImageError> {
    check_shape(a, b)?;
    let (h, w) = (a.height(), a.width());
    let x = to_gray(a);
    let y = to_gray(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();

    let mu_x = gaussian_filter(&x, h, w);
    let mu_y = gaussian_filter(&y, h, w);
    let s_xx = gaussian_filter(&xx, h, w);
    let s_yy = gaussian_filter(&yy, h, w);
    let s_xy = gaussian_filter(&xy, h, w);

    const C1: f64 = 0.01 * 0.01;
    const C2: f64 = 0.03 * 0.03;
    let mut acc = 0.0;
    for i in 0..x.len() {
        let var_x = s_xx[i] - mu_x[i] * mu_x[i];
        let var_y = s_yy[i] - mu_y[i] * mu_y[i];
        let cov = s_xy[i] - mu_x[i] * mu_y[i];
        let num = (2.0 * mu_x[i] * mu_y[i] + C1) * (2.0 * cov + C2);
        let den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + C1) * (var_x + var_y + C2);
        acc += num / den;
    }
    Ok(acc / x.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthReport {
    pub l1: f64,
    pub l2: f64,
    pub rmse: f64,
    pub ws_l1: f64,
    pub ws_l2: f64,
    pub ws_rmse: f64,
    /// Fraction of pixels whose ground truth lies in the valid range.
    pub valid_fraction: f64,
}

/// Depth errors over the pixels whose ground-truth depth lies in
/// [0.1, 10] m; WS variants use the cosine latitude weights.
pub fn depth_metrics(pred: &EquirectImage, gt: &EquirectImage) -> Result<DepthReport, ImageError> {
    check_shape(pred, gt)?;
    if pred.channels() != 1 {
        return Err(ImageError::BadChannels(pred.channels()));
    }
    let (h, w) = (gt.height(), gt.width());
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    let mut ws_l1 = 0.0;
    let mut ws_l2 = 0.0;
    let mut count = 0usize;
    let mut wsum = 0.0;
    for row in 0..h {
        let wgt = latitude_weight(row as f64, h);
        for col in 0..w {
            let g = gt.pixel(col, row)[0] as f64;
            if !(DEPTH_VALID_MIN..=DEPTH_VALID_MAX).contains(&g) {
                continue;
            }
            let d = (pred.pixel(col, row)[0] as f64 - g).abs();
            l1 += d;
            l2 += d * d;
            ws_l1 += wgt * d;
            ws_l2 += wgt * d * d;
            count += 1;
            wsum += wgt;
        }
    }
    let n = count.max(1) as f64;
    let wn = if wsum > 0.0 { wsum } else { 1.0 };
    Ok(DepthReport {
        l1: l1 / n,
        l2: l2 / n,
        rmse: (l2 / n).sqrt(),
        ws_l1: ws_l1 / wn,
        ws_l2: ws_l2 / wn,
        ws_rmse: (ws_l2 / wn).sqrt(),
        valid_fraction: count as f64 / (h * w) as f64,
    })
}

/// Same depth metrics restricted to an explicit pixel mask (and the valid
/// range); used for region-of-interest evaluation like occlusion masks.
pub fn depth_metrics_masked(
    pred: &EquirectImage,
    gt: &EquirectImage,
    mask: &[bool],
) -> Result<DepthReport, ImageError> {
    check_shape(pred, gt)?;
    if mask.len() != gt.height() * gt.width() {
        return Err(ImageError::ShapeMismatch);
    }
    let mut masked_pred = pred.clone();
    let mut masked_gt = gt.clone();
    for (i, &keep) in mask.iter().enumerate() {
        if !keep {
            // pushing gt outside the valid range drops the pixel
            masked_gt.data_mut()[i] = 0.0;
            masked_pred.data_mut()[i] = 0.0;
        }
    }
    let mut report = depth_metrics(&masked_pred, &masked_gt)?;
    report.valid_fraction = mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;
    Ok(report)
}

/// Maps a linear-light image into the quantized 8-bit sRGB domain
/// (values k/255 after the sRGB transfer), which is where PSNR/SSIM are
/// evaluated so that results match comparisons of saved PNG files.
pub fn srgb8_view(img: &EquirectImage) -> EquirectImage {
    let data: Vec<f32> = img
        .data()
        .iter()
        .map(|&v| ((srgb_encode(v as f64) * 255.0).round() / 255.0) as f32)
        .collect();
    EquirectImage::from_data(img.height(), img.width(), img.channels(), data)
        .expect("shape is unchanged")
}

/// Full evaluation report; `None` fields were not applicable to the run.
#[derive(Debug, Clone, Serialize, Default)]
pub struct MetricReport {
    pub psnr_db: Option<f64>,
    pub ws_psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub depth: Option<DepthReport>,
    /// Fraction of rows excluded near each pole (0 disables the mask).
    pub pole_mask_fraction: f64,
}

impl MetricReport {
    /// Color metrics in the 8-bit sRGB domain.
    pub fn color(rendered: &EquirectImage, reference: &EquirectImage) -> Result<Self, ImageError> {
        let a = srgb8_view(rendered);
        let b = srgb8_view(reference);
        Ok(MetricReport {
            psnr_db: Some(psnr(&a, &b)?),
            ws_psnr_db: Some(ws_psnr(&a, &b)?),
            ssim: Some(ssim(&a, &b)?),
            depth: None,
            pole_mask_fraction: 0.0,
        })
    }

    /// Aligned plain-text rendering of the report.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("metric       value\n");
        out.push_str("--------------------------\n");
        let mut row = |name: &str, v: Option<f64>| {
            if let Some(v) = v {
                out.push_str(&format!("{name:<12} {v:>12.6}\n"));
            }
        };
        row("psnr_db", self.psnr_db);
        row("ws_psnr_db", self.ws_psnr_db);
        row("ssim", self.ssim);
        if let Some(d) = &self.depth {
            row("l1_m", Some(d.l1));
            row("l2_m2", Some(d.l2));
            row("rmse_m", Some(d.rmse));
            row("ws_l1_m", Some(d.ws_l1));
            row("ws_l2_m2", Some(d.ws_l2));
            row("ws_rmse_m", Some(d.ws_rmse));
            row("valid_frac", Some(d.valid_fraction));
        }
        if self.pole_mask_fraction > 0.0 {
            row("pole_mask", Some(self.pole_mask_fraction));
        }
        format!("note: LPIPS excluded (learned metric)\n{out}")
    }
}

/// Rows excluded by a symmetric pole mask of the given per-pole fraction.
pub fn pole_mask(h: usize, w: usize, fraction: f64) -> Vec<bool> {
    let cut = ((h as f64) * fraction).round() as usize;
    let mut mask = vec![true; h * w];
    for row in 0..h {
        if row < cut || row >= h - cut {
            for col in 0..w {
                mask[row * w + col] = false;
            }
        }
    }
    mask
}
