//! Synthetic benchmarks: procedural ground-truth assets, the noise protocol
//! that corrupts them, scan synthesis, metrics, and directory storage.

mod generate;
mod metrics;
mod noise;
mod shapes;
mod store;
mod textures;
mod views;

pub use generate::{generate_benchmark, Benchmark, BenchmarkModel, CAMERA_RADIUS};
pub use metrics::{hausdorff_avg, point_triangle_distance, psnr, ssim};
pub use noise::{corrupt_texture, perturb_geometry, perturb_poses, NoiseSpec};
pub use shapes::{cube, icosphere, uv_sphere};
pub use store::{
    load_benchmark_spec, load_model_dir, load_scanset_dir, save_benchmark_dir, save_model_dir,
    save_scanset_dir, ModelDir,
};
pub use textures::{checkerboard, perlin_like};
pub use views::{look_at, sample_sphere_views};
