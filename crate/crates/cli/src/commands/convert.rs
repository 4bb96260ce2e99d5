//! `panosynth convert`: equirectangular panorama <-> cube map faces.

use crate::config::RunConfig;
use crate::error::{ensure_finite, CliError};
use crate::manifest::Manifest;
use panosynth_core::io::{load_face_png, load_png, save_face_png, save_png};
use panosynth_core::panorama::{cubemap_to_equirect, equirect_to_cubemap, CubeMap, FACE_IDS};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, clap::Args)]
pub struct ConvertArgs {
    /// Panorama PNG (to-cubemap) or directory with face_*.png (to-equirect).
    #[arg(long)]
    pub input: PathBuf,
    /// Conversion direction.
    #[arg(long, value_parser = ["to-cubemap", "to-equirect"])]
    pub direction: String,
    /// Cube face edge length (to-cubemap).
    #[arg(long, default_value_t = 256)]
    pub face_size: usize,
    /// Output panorama height (to-equirect).
    #[arg(long, default_value_t = 256)]
    pub out_height: usize,
}

pub fn cmd_convert(cfg: &RunConfig, args: &ConvertArgs) -> Result<(), CliError> {
    let out = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(e.to_string()))?;
    let mut manifest = Manifest::new("convert", cfg, &[]);

    match args.direction.as_str() {
        "to-cubemap" => {
            if args.face_size == 0 {
                return Err(CliError::Config("face size must be positive".into()));
            }
            let pano = load_png(&args.input)?;
            let cm = equirect_to_cubemap(&pano, args.face_size);
            for id in FACE_IDS {
                let path = out.join(format!("face_{}.png", id.name()));
                save_face_png(cm.face(id), &path)?;
                manifest.add_output(&path)?;
            }
            println!(
                "convert: {} -> 6 faces of {}px in {}",
                args.input.display(),
                args.face_size,
                out.display()
            );
        }
        _ => {
            if args.out_height == 0 {
                return Err(CliError::Config("output height must be positive".into()));
            }
            let faces = FACE_IDS.map(|id| {
                let path = args.input.join(format!("face_{}.png", id.name()));
                load_face_png(&path)
            });
            let mut loaded = Vec::with_capacity(6);
            for face in faces {
                loaded.push(face?);
            }
            let cm = CubeMap::from_faces(loaded.try_into().expect("six faces"))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let pano = cubemap_to_equirect(&cm, args.out_height);
            ensure_finite(&pano, "stitched panorama")?;
            let path = out.join("pano.png");
            save_png(&pano, &path)?;
            manifest.add_output(&path)?;
            println!(
                "convert: {}px faces -> {}x{} panorama {}",
                cm.size(),
                args.out_height,
                2 * args.out_height,
                path.display()
            );
        }
    }
    manifest.write(out)?;
    Ok(())
}
