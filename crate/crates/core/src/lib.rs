//! Geometric and rendering machinery for wide-baseline panoramas:
//! spherical projection algebra, mono-guided sphere-sweep 360° depth
//! estimation, logistic-mixture visibility and visibility-aware volume
//! rendering, verified against analytic synthetic scenes.

pub mod depth_sampler;
pub mod io;
pub mod math;
pub mod metrics;
pub mod mvs;
pub mod panorama;
pub mod renderer;
pub mod rng;
pub mod scene_oracle;
pub mod sphere_geom;
pub mod visibility;
pub mod volume_render;

pub use math::{vec3, Mat3, Vec3};
pub use panorama::{CubeMap, EquirectImage};
pub use sphere_geom::{CameraPose, PixelCoord, Ray, SphericalCoord};
