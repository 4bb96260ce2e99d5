//! Hot-kernel benchmarks: projection algebra, wrapped bilinear sampling,
//! compositing, cost-volume construction and single-ray rendering.

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use panosynth_core::depth_sampler::{candidate_grid, quantile_offsets, SweepConfig};
use panosynth_core::math::vec3;
use panosynth_core::mvs::{build_cost_volume, extract_features, Descriptor};
use panosynth_core::renderer::{render_ray, RenderConfig, SourceView};
use panosynth_core::rng::stream_rng;
use panosynth_core::scene_oracle::{baseline_poses, render_gt, sphere_room};
use panosynth_core::sphere_geom::{cast_ray, project_point, CameraPose, PixelCoord};
use panosynth_core::volume_render::{composite, RaySamples};
use rand::Rng;
use std::sync::Arc;

fn bench_projection(c: &mut Criterion) {
    let pose = CameraPose::identity_at(vec3(0.3, -0.2, 0.5));
    c.bench_function("cast_ray_project_point", |b| {
        let mut rng = stream_rng(1, 0);
        b.iter(|| {
            let p = PixelCoord::new(rng.gen_range(0.0..256.0), rng.gen_range(0.0..128.0));
            let ray = cast_ray(p, &pose, 128, 256);
            black_box(project_point(ray.at(2.0), &pose, 128, 256).unwrap())
        })
    });
}

fn bench_bilinear(c: &mut Criterion) {
    let img = panosynth_core::panorama::direction_field_panorama(128);
    c.bench_function("sample_bilinear_wrapped_rgb", |b| {
        let mut rng = stream_rng(2, 0);
        b.iter(|| {
            black_box(img.sample_rgb(rng.gen_range(-10.0..300.0), rng.gen_range(0.0..128.0)))
        })
    });
}

fn bench_composite(c: &mut Criterion) {
    let mut rng = stream_rng(3, 0);
    let t: Vec<f64> = (0..128).map(|i| 0.1 + i as f64 * 0.077).collect();
    let sigma: Vec<f64> = (0..128).map(|_| rng.gen_range(0.0..5.0)).collect();
    let color = vec![[0.5; 3]; 128];
    let samples = RaySamples::new(t, sigma, color).unwrap();
    c.bench_function("composite_128_samples", |b| {
        b.iter(|| black_box(composite(&samples, 10.0)))
    });
}

fn bench_quantiles(c: &mut Criterion) {
    c.bench_function("quantile_offsets_n5", |b| {
        b.iter(|| black_box(quantile_offsets(black_box(5), black_box(3.0))))
    });
}

fn bench_cost_volume(c: &mut Criterion) {
    let scene = sphere_room();
    let poses = baseline_poses(0.5, 2);
    let (img_a, _) = render_gt(&scene, &poses[0], 32, 64).unwrap();
    let (img_b, _) = render_gt(&scene, &poses[1], 32, 64).unwrap();
    let fa = extract_features(&img_a, Descriptor::ZnccPatch, false).unwrap();
    let fb = extract_features(&img_b, Descriptor::ZnccPatch, false).unwrap();
    let cfg = SweepConfig {
        n_uni: 16,
        n_mono: 0,
        ..SweepConfig::default()
    };
    let grid = Arc::new(candidate_grid(&cfg, None, 32, 64).unwrap());
    c.bench_function("cost_volume_32x64_d16_zncc", |b| {
        b.iter(|| {
            black_box(
                build_cost_volume(&fa, &fb, &poses[0], &poses[1], grid.clone()).unwrap(),
            )
        })
    });
}

fn bench_render_ray(c: &mut Criterion) {
    let scene = sphere_room();
    let poses = baseline_poses(1.0, 2);
    let views: Vec<_> = poses
        .iter()
        .map(|p| render_gt(&scene, p, 64, 128).unwrap())
        .collect();
    let sources: Vec<SourceView> = (0..2)
        .map(|i| {
            SourceView::new(views[i].0.clone(), poses[i], views[i].1.clone(), 0.077).unwrap()
        })
        .collect();
    let cfg = RenderConfig {
        height: 64,
        width: 128,
        ..RenderConfig::default()
    };
    let target = CameraPose::identity_at(vec3(0.0, 0.0, 0.0));
    c.bench_function("render_ray_two_sources", |b| {
        b.iter_batched(
            || stream_rng(9, 42),
            |mut rng| {
                black_box(
                    render_ray(
                        PixelCoord::new(37.5, 30.5),
                        &target,
                        &sources,
                        &cfg,
                        &mut rng,
                    )
                    .unwrap(),
                )
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_projection,
    bench_bilinear,
    bench_composite,
    bench_quantiles,
    bench_cost_volume,
    bench_render_ray
);
criterion_main!(benches);
