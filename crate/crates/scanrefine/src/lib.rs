//! Joint refinement of camera poses, mesh geometry, and texture maps for
//! RGB-D reconstructions, built around a differentiable soft rasterizer.
//!
//! The pipeline renders the current model into each scanned view, measures
//! color / depth / silhouette consistency against the inputs (and against
//! color frames re-projected from neighboring views), and walks gradients
//! back through the renderer to correct poses, vertices, and texels. An
//! adaptive schedule interleaves the three parameter groups.
//!
//! See the `book/` guide at the repository root for a walkthrough of each
//! subsystem, or start with [`bench::generate_benchmark`] and
//! [`optim::joint_optimize`].

pub mod bench;
pub mod diff;
pub mod eval;
pub mod io;
pub mod losses;
pub mod math;
pub mod optim;
pub mod render;
pub mod reproject;
pub mod scene;
