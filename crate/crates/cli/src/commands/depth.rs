//! `panosynth depth`: mono-guided sphere-sweep depth estimation of the
//! reference view (view 0) against all other views, evaluated against the
//! oracle ground truth.

use super::{estimate_depth, load_scene, render_views};
use crate::config::RunConfig;
use crate::error::{ensure_finite, CliError};
use crate::manifest::Manifest;
use panosynth_core::io::{save_pfm, write_atomic};
use panosynth_core::metrics::{depth_metrics, depth_metrics_masked, pole_mask};
use std::path::Path;

pub fn cmd_depth(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.views < 2 {
        return Err(CliError::Config("depth estimation needs >= 2 views".into()));
    }
    let (scene, poses) = load_scene(cfg)?;
    let views = render_views(&scene, &poses, cfg)?;
    let out = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;

    let src_indices: Vec<usize> = (1..poses.len()).collect();
    let dump = cfg.dump_cost_volume.then(|| out.join("cost_volume.raw"));
    let pred = estimate_depth(&views, &poses, 0, &src_indices, cfg, dump.as_deref())?;
    ensure_finite(&pred, "predicted depth")?;

    // ground truth at the resolution the sweep actually ran at
    let gt = if cfg.downsample4 {
        views[0].1.downsample(4)?
    } else {
        views[0].1.clone()
    };

    let all = depth_metrics(&pred, &gt)?;
    let mask = pole_mask(gt.height(), gt.width(), cfg.pole_mask);
    let valid_masked: Vec<bool> = mask.clone();
    let masked = depth_metrics_masked(&pred, &gt, &valid_masked)?;

    let pred_path = out.join("pred_depth.pfm");
    let gt_path = out.join("gt_depth.pfm");
    save_pfm(&pred, &pred_path)?;
    save_pfm(&gt, &gt_path)?;

    let report = serde_json::json!({
        "note": "LPIPS excluded (learned metric)",
        "depth": all,
        "depth_pole_masked": masked,
        "pole_mask_fraction": cfg.pole_mask,
        "sources": src_indices,
        "candidates": { "n_uni": cfg.n_uni, "n_mono": cfg.n_mono, "total": cfg.n_uni + cfg.n_mono },
    });
    let report_path = out.join("report.json");
    write_atomic(
        &report_path,
        &serde_json::to_vec_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    let table = format!(
        "note: LPIPS excluded (learned metric)\npole mask: {:.2} per pole\n\
         metric       all          pole-masked\n\
         -----------------------------------------\n\
         l1_m         {:>12.6} {:>12.6}\n\
         rmse_m       {:>12.6} {:>12.6}\n\
         ws_l1_m      {:>12.6} {:>12.6}\n\
         ws_rmse_m    {:>12.6} {:>12.6}\n\
         valid_frac   {:>12.6} {:>12.6}\n",
        cfg.pole_mask,
        all.l1, masked.l1, all.rmse, masked.rmse, all.ws_l1, masked.ws_l1,
        all.ws_rmse, masked.ws_rmse, all.valid_fraction, masked.valid_fraction,
    );
    let table_path = out.join("report.txt");
    write_atomic(&table_path, table.as_bytes())?;

    let mut manifest = Manifest::new("depth", cfg, &poses);
    manifest.add_output(&pred_path)?;
    manifest.add_output(&gt_path)?;
    manifest.add_output(&report_path)?;
    manifest.add_output(&table_path)?;
    if let Some(d) = &dump {
        manifest.add_output(d)?;
    }
    manifest.write(out)?;

    println!(
        "depth: ws_rmse {:.4} m (pole-masked {:.4}) over {} sources -> {}",
        all.ws_rmse,
        masked.ws_rmse,
        src_indices.len(),
        out.display()
    );
    Ok(())
}
