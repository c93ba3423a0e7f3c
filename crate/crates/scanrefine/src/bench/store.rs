//! Benchmark, scan-set, and model directory layouts.
//!
//! A benchmark directory holds `gt/` and `init/` model directories, a
//! `frames/` directory (color PNG, depth PFM, silhouette PNG per view),
//! scan-level `poses.json` and `intrinsics.json`, and `spec.json` recording
//! the noise spec and seed. A model directory holds `mesh.obj`,
//! `texture.png`, `poses.json`, and `intrinsics.json`.

use super::generate::{Benchmark, BenchmarkModel};
use super::noise::NoiseSpec;
use crate::io::{
    read_color_png, read_intrinsics_json, read_obj, read_pfm, read_poses_json,
    read_silhouette_png, read_texture_png, write_color_png, write_intrinsics_json, write_obj,
    write_pfm, write_poses_json, write_silhouette_png, write_texture_png, IoError,
};
use crate::scene::{Intrinsics, Pose, RgbdFrame, ScanSet, Texture, TriMesh};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    degree: f64,
    seed: u64,
    translation_bound: f64,
    rotation_bound_deg: f64,
    geometry_bound: f64,
    corrupt_texture: bool,
}

pub fn save_model_dir(
    dir: &Path,
    mesh: &TriMesh,
    texture: &Texture,
    poses: &[(u32, Pose)],
    intr: &Intrinsics,
) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    write_obj(&dir.join("mesh.obj"), mesh)?;
    write_texture_png(&dir.join("texture.png"), texture)?;
    write_poses_json(&dir.join("poses.json"), poses)?;
    write_intrinsics_json(&dir.join("intrinsics.json"), intr)
}

#[derive(Debug, Clone)]
pub struct ModelDir {
    pub mesh: TriMesh,
    pub texture: Texture,
    pub poses: Vec<(u32, Pose)>,
    pub intrinsics: Intrinsics,
}

pub fn load_model_dir(dir: &Path) -> Result<ModelDir, IoError> {
    Ok(ModelDir {
        mesh: read_obj(&dir.join("mesh.obj"))?,
        texture: read_texture_png(&dir.join("texture.png"))?,
        poses: read_poses_json(&dir.join("poses.json"))?,
        intrinsics: read_intrinsics_json(&dir.join("intrinsics.json"))?,
    })
}

pub fn save_scanset_dir(dir: &Path, scanset: &ScanSet) -> Result<(), IoError> {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| IoError::file(&frames_dir, e))?;
    write_intrinsics_json(&dir.join("intrinsics.json"), &scanset.intrinsics)?;
    let poses: Vec<(u32, Pose)> = scanset.frames.iter().map(|f| (f.id, f.pose)).collect();
    write_poses_json(&dir.join("poses.json"), &poses)?;
    for f in &scanset.frames {
        write_color_png(&frames_dir.join(format!("color_{:03}.png", f.id)), &f.color)?;
        write_pfm(&frames_dir.join(format!("depth_{:03}.pfm", f.id)), &f.depth)?;
        write_silhouette_png(
            &frames_dir.join(format!("silhouette_{:03}.png", f.id)),
            &f.silhouette,
        )?;
    }
    Ok(())
}

pub fn load_scanset_dir(dir: &Path) -> Result<ScanSet, IoError> {
    let intrinsics = read_intrinsics_json(&dir.join("intrinsics.json"))?;
    let poses = read_poses_json(&dir.join("poses.json"))?;
    let frames_dir = dir.join("frames");
    let mut frames = Vec::with_capacity(poses.len());
    for (id, pose) in poses {
        frames.push(RgbdFrame {
            id,
            color: read_color_png(&frames_dir.join(format!("color_{id:03}.png")))?,
            depth: read_pfm(&frames_dir.join(format!("depth_{id:03}.pfm")))?,
            silhouette: read_silhouette_png(
                &frames_dir.join(format!("silhouette_{id:03}.png")),
            )?,
            pose,
        });
    }
    ScanSet::new(frames, intrinsics).map_err(|e| IoError::Parse {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn model_poses(model: &BenchmarkModel) -> Vec<(u32, Pose)> {
    model
        .poses
        .iter()
        .enumerate()
        .map(|(i, p)| (i as u32, *p))
        .collect()
}

/// Write the full benchmark directory layout.
pub fn save_benchmark_dir(dir: &Path, bench: &Benchmark) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    let intr = &bench.scanset.intrinsics;
    save_model_dir(
        &dir.join("gt"),
        &bench.ground_truth.mesh,
        &bench.ground_truth.texture,
        &model_poses(&bench.ground_truth),
        intr,
    )?;
    save_model_dir(
        &dir.join("init"),
        &bench.initial.mesh,
        &bench.initial.texture,
        &model_poses(&bench.initial),
        intr,
    )?;
    save_scanset_dir(dir, &bench.scanset)?;
    let spec = SpecFile {
        degree: bench.spec.degree,
        seed: bench.spec.seed,
        translation_bound: bench.spec.translation_bound(),
        rotation_bound_deg: bench.spec.rotation_bound_deg(),
        geometry_bound: bench.spec.geometry_bound(),
        corrupt_texture: bench.spec.corrupt_texture,
    };
    let path = dir.join("spec.json");
    let text = serde_json::to_string_pretty(&spec).expect("spec serialization cannot fail");
    std::fs::write(&path, text).map_err(|e| IoError::file(&path, e))
}

/// Reconstruct the noise spec recorded in a benchmark directory.
pub fn load_benchmark_spec(dir: &Path) -> Result<NoiseSpec, IoError> {
    let path = dir.join("spec.json");
    let text = std::fs::read_to_string(&path).map_err(|e| IoError::file(&path, e))?;
    let file: SpecFile =
        serde_json::from_str(&text).map_err(|e| IoError::parse(&path, e.to_string()))?;
    Ok(NoiseSpec {
        degree: file.degree,
        seed: file.seed,
        override_translation: Some(file.translation_bound),
        override_rotation_deg: Some(file.rotation_bound_deg),
        override_geometry: Some(file.geometry_bound),
        corrupt_texture: file.corrupt_texture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate::generate_benchmark;
    use crate::bench::shapes::icosphere;
    use crate::bench::textures::checkerboard;
    use tempfile::tempdir;

    #[test]
    fn benchmark_directory_round_trips() {
        let mesh = icosphere(1);
        let tex = checkerboard(32, 32, 4, [0.8, 0.2, 0.2], [0.9, 0.9, 0.9]);
        let bench =
            generate_benchmark(&mesh, &tex, &NoiseSpec::new(1.0, 5), 3, 48).unwrap();
        let dir = tempdir().unwrap();
        save_benchmark_dir(dir.path(), &bench).unwrap();

        let scanset = load_scanset_dir(dir.path()).unwrap();
        assert_eq!(scanset.len(), 3);
        for (a, b) in scanset.frames.iter().zip(&bench.scanset.frames) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.color.data, b.color.data); // quantized at generation
            assert_eq!(a.silhouette.data, b.silhouette.data);
            assert_eq!(a.depth.data, b.depth.data); // f32-rounded at generation
            assert_eq!(a.pose.translation, b.pose.translation);
        }

        let init = load_model_dir(&dir.path().join("init")).unwrap();
        assert_eq!(init.mesh.face_count(), mesh.face_count());
        assert_eq!(init.poses.len(), 3);
        let spec = load_benchmark_spec(dir.path()).unwrap();
        assert_eq!(spec.seed, 5);
        assert!((spec.translation_bound() - 0.015).abs() < 1e-12);
    }
}
