//! The generalizable spherical radiance-field renderer: per-ray coarse/fine
//! sampling, per-view color and visibility fetch via spherical projection,
//! analytic visibility-weighted aggregation and compositing.
//!
//! Aggregation replaces the learned networks: colors are blended with
//! visibility weights, and each sample's opacity comes from the occlusion
//! mass its interval covers, divided by the remaining mean visibility
//! (capped by `kappa`). Compositing then reproduces each view's occlusion
//! CDF independent of how finely the ray is sampled.

use crate::panorama::EquirectImage;
use crate::rng::stream_rng;
use crate::sphere_geom::{cast_ray, project_point, CameraPose, PixelCoord};
use crate::visibility::mixture_from_depth;
use crate::volume_render::{
    composite, importance_resample, merge_sorted, sample_deltas, stratified_sample, RaySamples,
    RenderError, RenderResult,
};
use rayon::prelude::*;

/// One input panorama with its pose and per-pixel spherical depth (from the
/// depth estimator or an oracle). `visibility_bandwidth` is the floor on
/// the logistic scale; the effective per-pixel bandwidth is
/// `max(0.02 * depth, visibility_bandwidth)`.
#[derive(Debug, Clone)]
pub struct SourceView {
    pub image: EquirectImage,
    pub pose: CameraPose,
    pub depth: EquirectImage,
    pub visibility_bandwidth: f64,
}

impl SourceView {
    pub fn new(
        image: EquirectImage,
        pose: CameraPose,
        depth: EquirectImage,
        visibility_bandwidth: f64,
    ) -> Result<Self, RenderError> {
        if image.height() != depth.height()
            || image.width() != depth.width()
            || image.channels() != 3
            || depth.channels() != 1
        {
            return Err(RenderError::LengthMismatch);
        }
        Ok(SourceView {
            image,
            pose,
            depth,
            visibility_bandwidth,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RenderConfig {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub near: f64,
    pub far: f64,
    /// Ceiling on the per-sample density (1/m) the aggregator may emit.
    pub kappa: f64,
    /// Logistic components per view mixture (1 or 2).
    pub n_l: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            n_coarse: 64,
            n_fine: 64,
            near: 0.1,
            far: 10.0,
            kappa: 50.0,
            n_l: 2,
            height: 128,
            width: 256,
        }
    }
}

/// What one source view contributes to one ray sample.
#[derive(Debug, Clone, Copy)]
pub struct ViewSample {
    pub color: [f64; 3],
    /// Visibility at the sample itself (weights the color).
    pub visibility: f64,
    /// Visibility at the front edge of the sample's interval.
    pub visibility_start: f64,
    /// Occlusion mass the sample's interval covers in this view.
    pub hit_mass: f64,
}

/// Blends per-view colors by visibility and converts the mean interval hit
/// mass into a density.
///
/// The alpha is the covered occlusion mass over the remaining mean
/// visibility, so compositing with `alpha = 1 - exp(-sigma * delta)`
/// reproduces the views' occlusion CDFs exactly at any sampling
/// resolution. `kappa` bounds the returned density (units 1/m): the
/// mixture hazard stays well under it for ordinary bandwidths, but noisy
/// or interpolated depth can produce needle-thin mixtures whose opacity
/// spike it caps.
pub fn aggregate_sample(
    views: &[ViewSample],
    kappa: f64,
    delta: f64,
) -> Result<([f64; 3], f64), RenderError> {
    if views.is_empty() {
        return Err(RenderError::NoSources);
    }
    const WEIGHT_FLOOR: f64 = 1e-6;
    let mut color = [0.0; 3];
    let mut w_sum = 0.0;
    let mut mass = 0.0;
    let mut vis_start = 0.0;
    for vs in views {
        let w = vs.visibility + WEIGHT_FLOOR;
        for k in 0..3 {
            color[k] += w * vs.color[k];
        }
        w_sum += w;
        mass += vs.hit_mass;
        vis_start += vs.visibility_start;
    }
    for c in color.iter_mut() {
        *c /= w_sum;
    }
    let n = views.len() as f64;
    let mean_mass = mass / n;
    let mean_vis = vis_start / n;
    let alpha = (mean_mass / mean_vis.max(1e-12)).clamp(0.0, 1.0 - 1e-12);
    let sigma = (-(-alpha).ln_1p() / delta.max(1e-12)).min(kappa);
    Ok((color, sigma))
}

fn eval_samples(
    ray: &crate::sphere_geom::Ray,
    ts: Vec<f64>,
    sources: &[SourceView],
    cfg: &RenderConfig,
) -> Result<RaySamples, RenderError> {
    let n = ts.len();
    let deltas = sample_deltas(&ts, cfg.far);
    // interval edges at sample midpoints tile the ray exactly, so the
    // per-interval occlusion masses telescope instead of leaking in gaps
    let first_half = if n > 1 { 0.5 * (ts[1] - ts[0]) } else { 0.0 };
    let mut edges = Vec::with_capacity(n + 1);
    edges.push((ts[0] - first_half).max(0.0));
    for i in 1..n {
        edges.push(0.5 * (ts[i - 1] + ts[i]));
    }
    edges.push(cfg.far.max(ts[n - 1]));

    let mut sigma = Vec::with_capacity(n);
    let mut color = Vec::with_capacity(n);
    let mut views = Vec::with_capacity(sources.len());
    for (i, &t) in ts.iter().enumerate() {
        let half_lo = t - edges[i];
        let half_hi = edges[i + 1] - t;
        views.clear();
        for src in sources {
            let (h, w) = (src.image.height(), src.image.width());
            // samples never coincide with a source center for t > 0 rays
            // except in degenerate configs; treat those as unseen
            let Ok((pix, t_src)) = project_point(ray.at(t), &src.pose, h, w) else {
                views.push(ViewSample {
                    color: [0.0; 3],
                    visibility: 0.0,
                    visibility_start: 0.0,
                    hit_mass: 0.0,
                });
                continue;
            };
            let rgb = src.image.sample_rgb(pix.u, pix.v);
            let depth_px = src.depth.sample_scalar(pix.u, pix.v).max(1e-3);
            let bandwidth = (0.02 * depth_px).max(src.visibility_bandwidth);
            let mix = mixture_from_depth(depth_px, bandwidth, cfg.n_l)
                .expect("positive depth and bandwidth");
            let o_lo = mix.occlusion_prob((t_src - half_lo).max(0.0));
            let o_hi = mix.occlusion_prob(t_src + half_hi);
            views.push(ViewSample {
                color: rgb,
                visibility: mix.visibility(t_src),
                visibility_start: 1.0 - o_lo,
                hit_mass: (o_hi - o_lo).max(0.0),
            });
        }
        let (c, s) = aggregate_sample(&views, cfg.kappa, deltas[i])?;
        color.push(c);
        sigma.push(s);
    }
    RaySamples::new(ts, sigma, color)
}

/// Renders a single ray with the coarse-to-fine scheme: stratified coarse
/// pass, importance resampling of the blending weights, fine pass over the
/// merged samples.
pub fn render_ray(
    pixel: PixelCoord,
    target_pose: &CameraPose,
    sources: &[SourceView],
    cfg: &RenderConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<RenderResult, RenderError> {
    if sources.is_empty() {
        return Err(RenderError::NoSources);
    }
    let ray = cast_ray(pixel, target_pose, cfg.height, cfg.width);
    let coarse_t = stratified_sample(cfg.near, cfg.far, cfg.n_coarse, Some(rng))?;
    let coarse = eval_samples(&ray, coarse_t, sources, cfg)?;
    let coarse_result = composite(&coarse, cfg.far);

    let fine_t = importance_resample(
        &coarse.t,
        &coarse_result.weights,
        cfg.n_fine,
        cfg.far,
        rng,
    );
    let merged = merge_sorted(&coarse.t, &fine_t);
    let fine = eval_samples(&ray, merged, sources, cfg)?;
    Ok(composite(&fine, cfg.far))
}

/// Renders a full panorama at `target_pose`, returning the color image and
/// the composited expected-depth map. Per-pixel RNG streams keep the output
/// bit-identical for a given seed regardless of thread count.
pub fn render_panorama(
    target_pose: &CameraPose,
    sources: &[SourceView],
    cfg: &RenderConfig,
    seed: u64,
) -> Result<(EquirectImage, EquirectImage), RenderError> {
    if sources.is_empty() {
        return Err(RenderError::NoSources);
    }
    let (h, w) = (cfg.height, cfg.width);
    let mut color = EquirectImage::new(h, w, 3).map_err(|_| RenderError::LengthMismatch)?;
    let mut depth = EquirectImage::new(h, w, 1).map_err(|_| RenderError::LengthMismatch)?;

    let color_rows: Vec<_> = color.data_mut().chunks_mut(w * 3).collect();
    let depth_rows: Vec<_> = depth.data_mut().chunks_mut(w).collect();
    let failure = std::sync::Mutex::new(None::<RenderError>);

    color_rows
        .into_par_iter()
        .zip(depth_rows)
        .enumerate()
        .for_each(|(row, (crow, drow))| {
            for col in 0..w {
                let idx = (row * w + col) as u64;
                let mut rng = stream_rng(seed, idx);
                match render_ray(PixelCoord::center(col, row), target_pose, sources, cfg, &mut rng)
                {
                    Ok(result) => {
                        for k in 0..3 {
                            crow[col * 3 + k] = result.color[k] as f32;
                        }
                        drow[col] = result.depth as f32;
                    }
                    Err(e) => {
                        *failure.lock().unwrap() = Some(e);
                    }
                }
            }
        });

    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok((color, depth))
}
