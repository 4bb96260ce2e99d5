//! `panosynth synth`: ground-truth panoramas + spherical depth maps for
//! every configured pose, plus the run manifest.

use super::{load_scene, render_views};
use crate::config::RunConfig;
use crate::error::{ensure_finite, CliError};
use crate::manifest::Manifest;
use panosynth_core::io::{save_pfm, save_png};
use std::path::Path;

pub fn cmd_synth(cfg: &RunConfig) -> Result<(), CliError> {
    let (scene, poses) = load_scene(cfg)?;
    let views = render_views(&scene, &poses, cfg)?;
    let out = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;

    let mut manifest = Manifest::new("synth", cfg, &poses);
    for (i, (color, depth)) in views.iter().enumerate() {
        ensure_finite(color, "color view")?;
        ensure_finite(depth, "depth view")?;
        let png = out.join(format!("view_{i:02}.png"));
        let pfm = out.join(format!("view_{i:02}_depth.pfm"));
        save_png(color, &png)?;
        save_pfm(depth, &pfm)?;
        manifest.add_output(&png)?;
        manifest.add_output(&pfm)?;
    }
    manifest.write(out)?;
    println!(
        "synth: wrote {} views of {} at {}x{} to {}",
        views.len(),
        cfg.scene,
        cfg.height,
        cfg.width,
        out.display()
    );
    Ok(())
}
