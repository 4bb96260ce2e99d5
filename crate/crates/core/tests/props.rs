//! Property tests for the geometric and sampling invariants.

use panosynth_core::depth_sampler::{
    merge_candidates, quantile_offsets, std_normal_cdf, std_normal_quantile,
};
use panosynth_core::math::{vec3, Mat3};
use panosynth_core::panorama::EquirectImage;
use panosynth_core::sphere_geom::{
    cartesian_to_spherical, cast_ray, pixel_to_spherical, project_point, spherical_to_cartesian,
    spherical_to_pixel, CameraPose, PixelCoord, SphericalCoord,
};
use panosynth_core::visibility::LogisticMixture;
use panosynth_core::volume_render::{composite, RaySamples};
use proptest::prelude::*;

proptest! {
    #[test]
    fn pixel_round_trip(u in 0.0..1024.0f64, v in 0.0..512.0f64) {
        let (theta, phi) = pixel_to_spherical(PixelCoord::new(u, v), 512, 1024);
        let p = spherical_to_pixel(SphericalCoord { theta, phi, t: 1.0 }, 512, 1024);
        prop_assert!((p.u - u).abs() < 1e-9);
        prop_assert!((p.v - v).abs() < 1e-9);
    }

    #[test]
    fn cartesian_round_trip(x in -1.0..1.0f64, y in -0.999..0.999f64, z in -1.0..1.0f64) {
        let v = vec3(x, y, z);
        prop_assume!(v.norm() > 1e-3);
        let unit = v.normalized();
        let s = cartesian_to_spherical(unit).unwrap();
        let back = spherical_to_cartesian(s.theta, s.phi);
        prop_assert!((back - unit).norm() < 1e-12);
    }

    #[test]
    fn cast_project_inverse(
        qw in -1.0..1.0f64, qx in -1.0..1.0f64, qy in -1.0..1.0f64, qz in -1.0..1.0f64,
        cx in -5.0..5.0f64, cy in -5.0..5.0f64, cz in -5.0..5.0f64,
        u in 0.0..512.0f64, v in 0.5..255.5f64, t in 0.1..10.0f64,
    ) {
        prop_assume!(qw*qw + qx*qx + qy*qy + qz*qz > 1e-3);
        let pose = CameraPose::new(Mat3::from_quaternion(qw, qx, qy, qz), vec3(cx, cy, cz)).unwrap();
        let ray = cast_ray(PixelCoord::new(u, v), &pose, 256, 512);
        let (p, t_back) = project_point(ray.at(t), &pose, 256, 512).unwrap();
        let du = (p.u - u).rem_euclid(512.0);
        prop_assert!(du.min(512.0 - du) < 1e-9);
        prop_assert!((p.v - v).abs() < 1e-9);
        prop_assert!((t_back - t).abs() < 1e-9);
    }

    #[test]
    fn full_fov_totality(
        px in -8.0..8.0f64, py in -8.0..8.0f64, pz in -8.0..8.0f64,
    ) {
        // every world point except the camera center projects somewhere
        let pose = CameraPose::identity_at(vec3(0.25, -0.5, 1.0));
        let pt = vec3(px, py, pz);
        prop_assume!((pt - pose.center).norm() > 1e-6);
        let (p, t) = project_point(pt, &pose, 128, 256).unwrap();
        prop_assert!(p.u >= 0.0 && p.u < 256.0);
        prop_assert!(p.v >= 0.0 && p.v <= 128.0);
        prop_assert!(t > 0.0);
    }

    #[test]
    fn weight_conservation(
        seeds in prop::collection::vec((0.01..9.0f64, 0.0..4.0f64), 1..24),
    ) {
        let mut t: Vec<f64> = seeds.iter().map(|s| s.0).collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let sigma: Vec<f64> = seeds[..t.len()].iter().map(|s| s.1).collect();
        let color = vec![[0.5; 3]; t.len()];
        let samples = RaySamples::new(t, sigma, color).unwrap();
        let r = composite(&samples, 10.0);
        let sum: f64 = r.weights.iter().sum();
        prop_assert!((sum + r.transmittance_residual - 1.0).abs() < 1e-12);
        prop_assert!(r.weights.iter().all(|&w| w >= 0.0));
        prop_assert!(sum <= 1.0 + 1e-12);
    }

    #[test]
    fn mixture_monotone(
        mu1 in 0.5..8.0f64, mu2 in 0.5..8.0f64,
        s1 in 0.01..1.5f64, s2 in 0.01..1.5f64,
        m1 in 0.05..0.95f64,
        ta in 0.01..12.0f64, tb in 0.01..12.0f64,
    ) {
        let mix = LogisticMixture::new(vec![mu1, mu2], vec![s1, s2], vec![m1, 1.0 - m1]).unwrap();
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        prop_assert!(mix.occlusion_prob(hi) >= mix.occlusion_prob(lo));
        prop_assert!(mix.visibility(hi) <= mix.visibility(lo));
        prop_assert!(mix.visibility(lo) + mix.occlusion_prob(lo) == 1.0);
    }

    #[test]
    fn merge_strictly_ascending(
        uniform in prop::collection::vec(0.1..10.0f64, 0..40),
        mono in prop::collection::vec(0.1..10.0f64, 0..10),
    ) {
        let merged = merge_candidates(&uniform, &mono);
        prop_assert_eq!(merged.len(), uniform.len() + mono.len());
        prop_assert!(merged.t.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn quantile_cdf_inverse(p in 1e-7..0.9999999f64) {
        let z = std_normal_quantile(p).unwrap();
        prop_assert!((std_normal_cdf(z) - p).abs() < 1e-9);
    }

    #[test]
    fn offsets_antisymmetric(n in 1usize..12, beta in 0.5..5.0f64) {
        let b = quantile_offsets(n, beta);
        for k in 0..n {
            prop_assert!((b[k] + b[n - 1 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_convexity(
        seed in 0u64..1000,
        u in -20.0..40.0f64,
        v in -5.0..15.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = EquirectImage::from_fn(8, 16, 1, |_, _, out| {
            out[0] = rng.gen_range(0.0..1.0);
        }).unwrap();
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for &x in img.data() {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let s = img.sample_scalar(u, v);
        prop_assert!(s >= lo as f64 - 1e-9 && s <= hi as f64 + 1e-9);
    }
}
