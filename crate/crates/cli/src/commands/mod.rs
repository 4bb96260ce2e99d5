mod convert;
mod depth;
mod render;
mod synth;

pub use convert::{cmd_convert, ConvertArgs};
pub use depth::cmd_depth;
pub use render::cmd_render;
pub use synth::cmd_synth;

use crate::config::RunConfig;
use crate::error::CliError;
use panosynth_core::depth_sampler::{candidate_grid, GaussianPrior};
use panosynth_core::math::vec3;
use panosynth_core::mvs::{
    aggregate_cost, build_cost_volume, decode_depth, dump_cost_volume, extract_features,
};
use panosynth_core::panorama::EquirectImage;
use panosynth_core::scene_oracle::{
    baseline_poses, make_occlusion_scene, noisy_prior, render_gt, sphere_room, Scene,
};
use panosynth_core::sphere_geom::CameraPose;
use std::path::Path;
use std::sync::Arc;

/// Resolves the scene (builtin name or JSON path) and the camera poses.
pub fn load_scene(cfg: &RunConfig) -> Result<(Scene, Vec<CameraPose>), CliError> {
    let scene = match cfg.scene.as_str() {
        "sphere-room" => sphere_room(),
        "occlusion-room" => make_occlusion_scene().0,
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read scene {path}: {e}")))?;
            Scene::from_json(&text)
                .map_err(|e| CliError::Config(format!("invalid scene {path}: {e}")))?
        }
    };
    let poses = match cfg.layout.as_str() {
        "square" => {
            // four corners of a horizontal square; `baseline` is the diagonal
            let half = cfg.baseline / 2.0 / std::f64::consts::SQRT_2;
            vec![
                CameraPose::identity_at(vec3(-half, 0.0, -half)),
                CameraPose::identity_at(vec3(half, 0.0, -half)),
                CameraPose::identity_at(vec3(half, 0.0, half)),
                CameraPose::identity_at(vec3(-half, 0.0, half)),
            ]
        }
        _ => baseline_poses(cfg.baseline, cfg.views),
    };
    Ok((scene, poses))
}

/// Ground-truth color and depth for every pose, rendered in memory (no
/// quantization on the matching path).
pub fn render_views(
    scene: &Scene,
    poses: &[CameraPose],
    cfg: &RunConfig,
) -> Result<Vec<(EquirectImage, EquirectImage)>, CliError> {
    poses
        .iter()
        .map(|pose| Ok(render_gt(scene, pose, cfg.height, cfg.width)?))
        .collect()
}

/// The depth prior for mono-guided sweeps: the view's ground truth,
/// optionally corrupted per config.
pub fn build_prior(
    gt_depth: &EquirectImage,
    cfg: &RunConfig,
) -> Result<Option<GaussianPrior>, CliError> {
    if cfg.n_mono == 0 {
        return Ok(None);
    }
    let mu = match cfg.prior.as_str() {
        "gt" => gt_depth.clone(),
        _ => noisy_prior(
            gt_depth,
            cfg.prior_relative_sigma,
            cfg.prior_additive_sigma,
            cfg.seed,
        ),
    };
    Ok(Some(GaussianPrior::new(mu, cfg.sigma, cfg.beta)?))
}

/// Full sphere-sweep pipeline for one reference view against the given
/// sources: features, per-source cost volumes, fusion, aggregation, decode.
pub fn estimate_depth(
    views: &[(EquirectImage, EquirectImage)],
    poses: &[CameraPose],
    ref_idx: usize,
    src_indices: &[usize],
    cfg: &RunConfig,
    dump_to: Option<&Path>,
) -> Result<EquirectImage, CliError> {
    let descriptor = cfg.parsed_descriptor()?;
    let ref_feat = extract_features(&views[ref_idx].0, descriptor, cfg.downsample4)?;
    let (h, w) = (ref_feat.height(), ref_feat.width());

    let prior_src = if cfg.downsample4 {
        views[ref_idx].1.downsample(4)?
    } else {
        views[ref_idx].1.clone()
    };
    let prior = build_prior(&prior_src, cfg)?;
    let grid = Arc::new(candidate_grid(&cfg.sweep(), prior.as_ref(), h, w)?);

    let mut volumes = Vec::with_capacity(src_indices.len());
    for &si in src_indices {
        let src_feat = extract_features(&views[si].0, descriptor, cfg.downsample4)?;
        volumes.push(build_cost_volume(
            &ref_feat,
            &src_feat,
            &poses[ref_idx],
            &poses[si],
            grid.clone(),
        )?);
    }
    let fused = panosynth_core::mvs::fuse_cost_volumes(&volumes)?;
    let aggregated = aggregate_cost(&fused, cfg.aggregate_radius);
    if let Some(path) = dump_to {
        dump_cost_volume(&aggregated, path)?;
    }
    Ok(decode_depth(&aggregated, cfg.parsed_decode()?))
}
