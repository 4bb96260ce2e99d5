//! Oracle-driven integration tests: photo-consistency of the synthetic
//! scenes, warp cycles, cost-volume behavior and small-scale depth
//! estimation, exercised end to end without the CLI.

use panosynth_core::depth_sampler::{candidate_grid, DepthSpacing, GaussianPrior, SweepConfig};
use panosynth_core::metrics;
use panosynth_core::mvs::{
    aggregate_cost, build_cost_volume, decode_depth, extract_features, sphere_sweep_warp,
    DecodeMode, Descriptor,
};
use panosynth_core::panorama::{cubemap_to_equirect, equirect_to_cubemap};
use panosynth_core::scene_oracle::{
    baseline_poses, make_occlusion_scene, render_gt, sphere_room,
};
use panosynth_core::sphere_geom::{cast_ray, project_point, PixelCoord};
use panosynth_core::visibility::mixture_from_depth;
use std::sync::Arc;

const H: usize = 128;
const W: usize = 256;

#[test]
fn gt_views_are_photo_consistent() {
    let scene = sphere_room();
    let poses = baseline_poses(0.5, 2);
    let (img_a, depth_a) = render_gt(&scene, &poses[0], H, W).unwrap();
    let (img_b, depth_b) = render_gt(&scene, &poses[1], H, W).unwrap();

    let mut max_err = 0.0f64;
    let mut checked = 0usize;
    for row in 0..H {
        for col in 0..W {
            let ray = cast_ray(PixelCoord::center(col, row), &poses[0], H, W);
            let t = depth_a.pixel(col, row)[0] as f64;
            let (pix, t_src) = project_point(ray.at(t), &poses[1], H, W).unwrap();
            // skip warps landing in the source's pole band, where the
            // equirectangular grid is too anisotropic to resample reliably
            // (the same pathology the depth-metric pole mask addresses)
            if pix.v < 0.05 * H as f64 || pix.v > 0.95 * H as f64 {
                continue;
            }
            // mutual visibility at footprint precision: the source depth
            // across the whole bilinear support must agree with the point's
            // distance, otherwise the taps straddle an occlusion edge
            let clean = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0), (0.0, 0.0)]
                .iter()
                .all(|&(du, dv)| {
                    let d = depth_b.sample_scalar(pix.u + du, pix.v + dv);
                    (d - t_src).abs() <= 0.02 * t_src
                });
            if !clean {
                continue;
            }
            let warped = img_b.sample_rgb(pix.u, pix.v);
            let own = img_a.pixel(col, row);
            for k in 0..3 {
                max_err = max_err.max((warped[k] - own[k] as f64).abs());
            }
            checked += 1;
        }
    }
    assert!(checked as f64 >= 0.8 * (H * W) as f64, "only {checked} checked");
    assert!(max_err <= 2.0 / 255.0, "photo-consistency err {max_err}");
}

#[test]
fn warp_cycle_returns_to_the_source_pixel() {
    let scene = sphere_room();
    let poses = baseline_poses(0.5, 2);
    let (_, depth_a) = render_gt(&scene, &poses[0], H, W).unwrap();
    let (_, depth_b) = render_gt(&scene, &poses[1], H, W).unwrap();

    let mut worst = 0.0f64;
    let mut cycles = 0usize;
    for row in (2..H - 2).step_by(5) {
        for col in (0..W).step_by(7) {
            let u = col as f64 + 0.5;
            let v = row as f64 + 0.5;
            let t = depth_a.pixel(col, row)[0] as f64;
            // forward warp at the reference's own GT depth
            let pb = sphere_sweep_warp(&poses[0], &poses[1], u, v, t, H, W).unwrap();
            // depth of the same surface point in the source view
            let ray = cast_ray(PixelCoord::new(u, v), &poses[0], H, W);
            let (_, t_src) = project_point(ray.at(t), &poses[1], H, W).unwrap();
            // the surface point must be mutually visible for a clean cycle
            let sampled = depth_b.sample_scalar(pb.u, pb.v);
            if (sampled - t_src).abs() > 0.02 {
                continue;
            }
            let back = sphere_sweep_warp(&poses[1], &poses[0], pb.u, pb.v, t_src, H, W).unwrap();
            let du = (back.u - u).rem_euclid(W as f64);
            let du = du.min(W as f64 - du);
            worst = worst.max(du).max((back.v - v).abs());
            cycles += 1;
        }
    }
    assert!(cycles > 400);
    assert!(worst < 1e-6, "cycle error {worst} px");
}

#[test]
fn gt_candidate_wins_cost_minimum_on_textured_pixels() {
    let scene = sphere_room();
    let poses = baseline_poses(0.5, 2);
    let (img_a, depth_a) = render_gt(&scene, &poses[0], H, W).unwrap();
    let (img_b, _) = render_gt(&scene, &poses[1], H, W).unwrap();
    let fa = extract_features(&img_a, Descriptor::ZnccPatch, false).unwrap();
    let fb = extract_features(&img_b, Descriptor::ZnccPatch, false).unwrap();

    // the GT depth against decoys displaced by >= 15% (all of them at least
    // a pixel away in warp space, so ties cannot decide the outcome)
    let ratios = [0.60, 0.72, 0.85, 1.0, 1.15, 1.3, 1.45];
    let gt_index = 3;
    let d = ratios.len();
    let mut depths = Vec::with_capacity(H * W * d);
    for row in 0..H {
        for col in 0..W {
            let gt = depth_a.pixel(col, row)[0] as f64;
            for &r in &ratios {
                depths.push((gt * r).clamp(0.1, 10.0));
            }
        }
    }
    let grid =
        Arc::new(panosynth_core::depth_sampler::CandidateGrid::from_depths(H, W, d, depths).unwrap());
    let vol = build_cost_volume(&fa, &fb, &poses[0], &poses[1], grid.clone()).unwrap();

    let pole_rows = (H as f64 * 0.05).round() as usize;
    let mut wins = 0usize;
    let mut total = 0usize;
    for row in pole_rows..H - pole_rows {
        for col in 0..W {
            let costs = vol.cost_slice(col, row);
            let mut best = 0;
            for i in 1..costs.len() {
                if costs[i] < costs[best] {
                    best = i;
                }
            }
            total += 1;
            if best == gt_index {
                wins += 1;
            }
        }
    }
    let rate = wins as f64 / total as f64;
    assert!(rate >= 0.95, "GT candidate win rate {rate:.4}");
}

#[test]
fn small_scale_depth_estimation_hits_bin_accuracy() {
    let scene = sphere_room();
    let poses = baseline_poses(0.5, 2);
    let (img_a, depth_a) = render_gt(&scene, &poses[0], H, W).unwrap();
    let (img_b, _) = render_gt(&scene, &poses[1], H, W).unwrap();
    let fa = extract_features(&img_a, Descriptor::ZnccPatch, false).unwrap();
    let fb = extract_features(&img_b, Descriptor::ZnccPatch, false).unwrap();

    let cfg = SweepConfig {
        n_uni: 64,
        n_mono: 0,
        ..SweepConfig::default()
    };
    let grid = Arc::new(candidate_grid(&cfg, None, H, W).unwrap());
    let vol = build_cost_volume(&fa, &fb, &poses[0], &poses[1], grid).unwrap();
    let vol = aggregate_cost(&vol, 2);
    let pred = decode_depth(&vol, DecodeMode::Soft { tau: 0.002 });

    let pole_rows = (H as f64 * 0.05).round() as usize;
    let mut errs: Vec<f64> = Vec::new();
    for row in pole_rows..H - pole_rows {
        for col in 0..W {
            errs.push((pred.pixel(col, row)[0] - depth_a.pixel(col, row)[0]).abs() as f64);
        }
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errs[errs.len() / 2];
    let bin = 9.9 / 64.0;
    assert!(median <= bin, "median depth error {median:.4} (bin {bin:.4})");
}

#[test]
fn aggregation_reduces_wta_outliers() {
    let (scene, poses) = make_occlusion_scene();
    let (img_a, depth_a) = render_gt(&scene, &poses[0], H, W).unwrap();
    let (img_b, _) = render_gt(&scene, &poses[1], H, W).unwrap();
    let fa = extract_features(&img_a, Descriptor::ZnccPatch, false).unwrap();
    let fb = extract_features(&img_b, Descriptor::ZnccPatch, false).unwrap();
    let cfg = SweepConfig {
        n_uni: 64,
        n_mono: 0,
        ..SweepConfig::default()
    };
    let grid = Arc::new(candidate_grid(&cfg, None, H, W).unwrap());
    let vol = build_cost_volume(&fa, &fb, &poses[0], &poses[1], grid).unwrap();

    let outlier_rate = |pred: &panosynth_core::panorama::EquirectImage| {
        let bin = 9.9 / 64.0;
        let mut outliers = 0usize;
        for (p, g) in pred.data().iter().zip(depth_a.data()) {
            if (p - g).abs() as f64 > 3.0 * bin {
                outliers += 1;
            }
        }
        outliers as f64 / pred.data().len() as f64
    };

    let raw = outlier_rate(&decode_depth(&vol, DecodeMode::WinnerTakeAll));
    let smoothed = outlier_rate(&decode_depth(&aggregate_cost(&vol, 2), DecodeMode::WinnerTakeAll));
    println!("wta outlier rate: raw {raw:.4}, aggregated {smoothed:.4}");
    assert!(smoothed < raw, "aggregation should reduce outliers");
}

#[test]
fn visibility_calibrated_against_oracle_depth() {
    let scene = sphere_room();
    let pose = baseline_poses(0.5, 2)[0];
    let (_, depth) = render_gt(&scene, &pose, 64, 128).unwrap();
    for row in (4..60).step_by(3) {
        for col in (0..128).step_by(5) {
            let d = depth.pixel(col, row)[0] as f64;
            let bw = (0.02 * d).max(0.02);
            // single-logistic construction puts its median on the depth
            let single = mixture_from_depth(d, bw, 1).unwrap();
            let v = single.visibility(d);
            assert!((0.4..=0.6).contains(&v), "v(GT) = {v}");
            assert!(single.visibility(0.5 * d) >= 0.95);

            // the two-component surface+tail construction keeps its median
            // within a few bandwidths in front of the depth
            let mix = mixture_from_depth(d, bw, 2).unwrap();
            assert!(mix.visibility(0.5 * d) >= 0.95);
            let mut lo = 0.0;
            let mut hi = 2.0 * d;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mix.occlusion_prob(mid) < 0.5 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let median = 0.5 * (lo + hi);
            assert!(
                (d - median).abs() <= 0.08 * d,
                "median {median} vs depth {d}"
            );
        }
    }
}

#[test]
fn cubemap_conversion_preserves_mean_radiance() {
    // pixel-count means of different projections are incomparable; the
    // meaningful conservation check weights each pixel by its solid angle
    let scene = sphere_room();
    let pose = baseline_poses(0.5, 2)[0];
    let (img, _) = render_gt(&scene, &pose, 128, 256).unwrap();

    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for row in 0..128 {
        let wgt = ((row as f64 + 0.5) / 128.0 * std::f64::consts::PI).sin();
        for col in 0..256 {
            let p = img.pixel(col, row);
            num += wgt * (p[0] + p[1] + p[2]) as f64 / 3.0;
            den += wgt;
        }
    }
    let erp_mean = num / den;

    let cm = equirect_to_cubemap(&img, 128);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for id in panosynth_core::panorama::FACE_IDS {
        let f = cm.face(id);
        let n = f.size();
        for row in 0..n {
            let b = 2.0 * (row as f64 + 0.5) / n as f64 - 1.0;
            for col in 0..n {
                let a = 2.0 * (col as f64 + 0.5) / n as f64 - 1.0;
                let wgt = (1.0 + a * a + b * b).powf(-1.5);
                let p = f.pixel(col, row);
                num += wgt * (p[0] + p[1] + p[2]) as f64 / 3.0;
                den += wgt;
            }
        }
    }
    let cube_mean = num / den;

    let rel = (cube_mean - erp_mean).abs() / erp_mean;
    assert!(rel < 0.01, "mean radiance drift {rel:.5}");
}

#[test]
fn cubemap_round_trip_psnr_on_smooth_panorama() {
    let scene = sphere_room();
    let pose = baseline_poses(0.5, 2)[0];
    let (img, _) = render_gt(&scene, &pose, 256, 512).unwrap();
    let cm = equirect_to_cubemap(&img, 256);
    let back = cubemap_to_equirect(&cm, 256);
    let p = metrics::psnr(&img, &back).unwrap();
    assert!(p >= 35.0, "round trip psnr {p:.2}");
}
