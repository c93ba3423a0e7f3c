//! Wavefront OBJ with `v`, `vt`, and `f v/vt` records.

use super::{fmt_sig6, IoError};
use crate::math::{Vec2, Vec3};
use crate::scene::TriMesh;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Write a mesh as OBJ. Positions and UVs are emitted with 6 significant
/// digits; per-corner UVs are deduplicated exactly.
pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(w, "v {} {} {}", fmt_sig6(v.x), fmt_sig6(v.y), fmt_sig6(v.z))?;
        }
        // Deduplicate identical UVs to keep files small.
        let mut uv_index: std::collections::HashMap<(u64, u64), usize> =
            std::collections::HashMap::new();
        let mut uv_list: Vec<Vec2> = Vec::new();
        let mut face_uv_ids: Vec<[usize; 3]> = Vec::with_capacity(mesh.faces.len());
        for corners in &mesh.uvs {
            let mut ids = [0usize; 3];
            for (k, uv) in corners.iter().enumerate() {
                let key = (uv.x.to_bits(), uv.y.to_bits());
                let id = *uv_index.entry(key).or_insert_with(|| {
                    uv_list.push(*uv);
                    uv_list.len() - 1
                });
                ids[k] = id;
            }
            face_uv_ids.push(ids);
        }
        for uv in &uv_list {
            writeln!(w, "vt {} {}", fmt_sig6(uv.x), fmt_sig6(uv.y))?;
        }
        for (face, uv_ids) in mesh.faces.iter().zip(&face_uv_ids) {
            writeln!(
                w,
                "f {}/{} {}/{} {}/{}",
                face[0] + 1,
                uv_ids[0] + 1,
                face[1] + 1,
                uv_ids[1] + 1,
                face[2] + 1,
                uv_ids[2] + 1
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| IoError::file(path, e))
}

/// Read an OBJ containing triangular `f v/vt` faces.
pub fn read_obj(path: &Path) -> Result<TriMesh, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::file(path, e))?;
    let reader = BufReader::new(file);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut uv_list: Vec<Vec2> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut uvs: Vec<[Vec2; 3]> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::file(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap();
        let bad = |msg: &str| IoError::parse(path, format!("line {}: {msg}", lineno + 1));
        match tag {
            "v" => {
                let coords: Vec<f64> = parts.filter_map(|p| p.parse().ok()).collect();
                if coords.len() < 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            "vt" => {
                let coords: Vec<f64> = parts.filter_map(|p| p.parse().ok()).collect();
                if coords.len() < 2 {
                    return Err(bad("uv needs 2 coordinates"));
                }
                uv_list.push(Vec2::new(coords[0], coords[1]));
            }
            "f" => {
                let corners: Vec<&str> = parts.collect();
                if corners.len() != 3 {
                    return Err(bad("only triangular faces are supported"));
                }
                let mut vidx = [0usize; 3];
                let mut cuv = [Vec2::ZERO; 3];
                for (k, corner) in corners.iter().enumerate() {
                    let mut it = corner.split('/');
                    let v: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad face vertex index"))?;
                    let t: usize = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("face corner lacks a uv index (expected v/vt)"))?;
                    if v == 0 || v > vertices.len() {
                        return Err(bad("vertex index out of range"));
                    }
                    if t == 0 || t > uv_list.len() {
                        return Err(bad("uv index out of range"));
                    }
                    vidx[k] = v - 1;
                    cuv[k] = uv_list[t - 1];
                }
                faces.push(vidx);
                uvs.push(cuv);
            }
            // normals, materials, groups: ignored
            _ => {}
        }
    }
    Ok(TriMesh {
        vertices,
        faces,
        uvs,
    })
}
