//! `panosynth render`: novel-view synthesis from the first/last source
//! views (identity, middle, or above-midpoint target), evaluated against
//! the oracle's ground truth at the target pose.

use super::{estimate_depth, load_scene, render_views};
use crate::config::RunConfig;
use crate::error::{ensure_finite, CliError};
use crate::manifest::Manifest;
use panosynth_core::io::{save_pfm, save_png, write_atomic};
use panosynth_core::metrics::{depth_metrics, MetricReport};
use panosynth_core::renderer::{render_panorama, SourceView};
use panosynth_core::scene_oracle::render_gt;
use panosynth_core::sphere_geom::CameraPose;
use std::path::Path;

pub fn cmd_render(cfg: &RunConfig) -> Result<(), CliError> {
    let (scene, poses) = load_scene(cfg)?;
    let views = render_views(&scene, &poses, cfg)?;
    let out = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;

    // sources: the identity check uses the first view alone; otherwise the
    // first and last views bracket the target (any number in between is
    // also accepted as a source when views > 3 is configured with layout
    // "square", where all views feed the renderer)
    let source_indices: Vec<usize> = match (cfg.target.as_str(), cfg.layout.as_str()) {
        ("identity", _) => vec![0],
        (_, "square") => (0..poses.len()).collect(),
        _ => vec![0, poses.len() - 1],
    };

    let mut sources = Vec::with_capacity(source_indices.len());
    for &i in &source_indices {
        let depth = match cfg.depth_source.as_str() {
            "gt" => views[i].1.clone(),
            _ => {
                let others: Vec<usize> =
                    (0..poses.len()).filter(|&j| j != i).collect();
                let mut sweep_cfg = cfg.clone();
                sweep_cfg.downsample4 = false; // renderer wants full-res depth
                estimate_depth(&views, &poses, i, &others, &sweep_cfg, None)?
            }
        };
        sources.push(SourceView::new(
            views[i].0.clone(),
            poses[i],
            depth,
            cfg.visibility_bandwidth,
        )?);
    }

    // midpoint of the first/last views on a line, centroid of the square
    let midpoint = source_indices
        .iter()
        .fold(panosynth_core::math::Vec3::ZERO, |acc, &i| acc + poses[i].center)
        / source_indices.len() as f64;
    let target_pose = match cfg.target.as_str() {
        "identity" => poses[0],
        "middle" => CameraPose::identity_at(midpoint),
        _ => CameraPose::identity_at(
            midpoint + panosynth_core::math::vec3(0.0, cfg.above_offset, 0.0),
        ),
    };

    let render_cfg = cfg.render_config();
    let (color, depth) = render_panorama(&target_pose, &sources, &render_cfg, cfg.seed)?;
    ensure_finite(&color, "rendered color")?;
    ensure_finite(&depth, "rendered depth")?;

    let (gt_color, gt_depth) = render_gt(&scene, &target_pose, cfg.height, cfg.width)?;

    let mut report = MetricReport::color(&color, &gt_color)?;
    report.depth = Some(depth_metrics(&depth, &gt_depth)?);
    report.pole_mask_fraction = cfg.pole_mask;

    let render_png = out.join("render.png");
    let render_pfm = out.join("render_depth.pfm");
    let gt_png = out.join("gt.png");
    save_png(&color, &render_png)?;
    save_pfm(&depth, &render_pfm)?;
    save_png(&gt_color, &gt_png)?;

    let report_path = out.join("report.json");
    write_atomic(
        &report_path,
        &serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    let table_path = out.join("report.txt");
    write_atomic(&table_path, report.to_table().as_bytes())?;

    let mut manifest = Manifest::new("render", cfg, &poses);
    for p in [&render_png, &render_pfm, &gt_png, &report_path, &table_path] {
        manifest.add_output(p)?;
    }
    manifest.write(out)?;

    println!(
        "render ({} target, {} depth, {} sources): psnr {:.2} dB, ws-psnr {:.2} dB, ssim {:.4} -> {}",
        cfg.target,
        cfg.depth_source,
        sources.len(),
        report.psnr_db.unwrap_or(f64::NAN),
        report.ws_psnr_db.unwrap_or(f64::NAN),
        report.ssim.unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}
