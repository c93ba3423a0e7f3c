//! Triangle meshes with per-corner UVs, textures, and the uniform graph
//! Laplacian.

use crate::math::{Vec2, Vec3};
use std::collections::BTreeSet;

/// Indexed triangle mesh. UVs are stored per face corner (wedge UVs) so that
/// closed surfaces can carry texture seams.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    /// Vertex positions in meters, world frame.
    pub vertices: Vec<Vec3>,
    /// Vertex index triples.
    pub faces: Vec<[usize; 3]>,
    /// One UV per face corner, components in [0, 1].
    pub uvs: Vec<[Vec2; 3]>,
}

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Diagonal of the axis-aligned bounding box (used to scale learning rates).
    pub fn bbox_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            lo.z = lo.z.min(v.z);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
            hi.z = hi.z.max(v.z);
        }
        (hi - lo).norm()
    }

    /// Flatten vertex positions into an xyz buffer (parameter-group layout).
    pub fn vertex_buffer(&self) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.vertices.len() * 3);
        for v in &self.vertices {
            buf.extend_from_slice(&v.to_array());
        }
        buf
    }

    pub fn set_vertices_from_buffer(&mut self, buf: &[f64]) {
        assert_eq!(buf.len(), self.vertices.len() * 3);
        for (i, v) in self.vertices.iter_mut().enumerate() {
            *v = Vec3::new(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
        }
    }
}

/// RGB texel grid with channels in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub width: usize,
    pub height: usize,
    /// Row-major, 3 floats per texel.
    pub texels: Vec<f64>,
}

impl Texture {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 2 && height >= 2, "texture must be at least 2x2");
        Texture {
            width,
            height,
            texels: vec![0.0; width * height * 3],
        }
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * 3
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        let i = self.idx(x, y);
        [self.texels[i], self.texels[i + 1], self.texels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = self.idx(x, y);
        self.texels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn mean_color(&self) -> [f64; 3] {
        let n = (self.width * self.height) as f64;
        let mut sum = [0.0; 3];
        for px in self.texels.chunks_exact(3) {
            sum[0] += px[0];
            sum[1] += px[1];
            sum[2] += px[2];
        }
        [sum[0] / n, sum[1] / n, sum[2] / n]
    }
}

/// Checks every `TriMesh` invariant and reports each violation as text.
/// Diagnostic only: an empty result means the mesh is valid.
pub fn validate_mesh(mesh: &TriMesh) -> Vec<String> {
    let mut violations = Vec::new();
    if mesh.faces.is_empty() {
        violations.push("mesh has no faces".to_string());
    }
    if mesh.uvs.len() != mesh.faces.len() {
        violations.push(format!(
            "uv count {} does not match face count {}",
            mesh.uvs.len(),
            mesh.faces.len()
        ));
    }
    let n = mesh.vertices.len();
    for (fi, face) in mesh.faces.iter().enumerate() {
        for &vi in face {
            if vi >= n {
                violations.push(format!(
                    "face {fi} references vertex {vi} but there are only {n} vertices"
                ));
            }
        }
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
            let repeated = if face[0] == face[1] || face[0] == face[2] {
                face[0]
            } else {
                face[1]
            };
            violations.push(format!("face {fi} repeats vertex {repeated}"));
        }
    }
    for (fi, corners) in mesh.uvs.iter().enumerate() {
        for (ci, uv) in corners.iter().enumerate() {
            if !(0.0..=1.0).contains(&uv.x) || !(0.0..=1.0).contains(&uv.y) {
                violations.push(format!(
                    "face {fi} corner {ci} uv ({}, {}) out of [0,1]",
                    uv.x, uv.y
                ));
            }
        }
    }
    for (vi, v) in mesh.vertices.iter().enumerate() {
        if !v.is_finite() {
            violations.push(format!("vertex {vi} is not finite"));
        }
    }
    violations
}

/// Sparse row-compressed matrix; only what the Laplacian needs.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub size: usize,
    /// Per row: (column, value) pairs sorted by column.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    /// y = A x for a single scalar field x (length `size`).
    pub fn mul_field(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size);
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }

    /// y = A V where V is size x 3 (flattened xyz buffer).
    pub fn mul_vec3_buffer(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size * 3);
        let mut out = vec![0.0; v.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = [0.0; 3];
            for &(j, w) in row {
                acc[0] += w * v[3 * j];
                acc[1] += w * v[3 * j + 1];
                acc[2] += w * v[3 * j + 2];
            }
            out[3 * i..3 * i + 3].copy_from_slice(&acc);
        }
        out
    }

    /// y = A^T x accumulated into `out` (xyz buffer variant), scaled by `scale`.
    pub fn transpose_mul_vec3_into(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        assert_eq!(x.len(), self.size * 3);
        assert_eq!(out.len(), self.size * 3);
        for (i, row) in self.rows.iter().enumerate() {
            let xi = [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
            for &(j, w) in row {
                out[3 * j] += scale * w * xi[0];
                out[3 * j + 1] += scale * w * xi[1];
                out[3 * j + 2] += scale * w * xi[2];
            }
        }
    }
}

/// Uniform graph Laplacian: row i has 1 on the diagonal and -1/deg(i) for
/// every edge neighbor; rows of isolated vertices are zero.
pub fn uniform_laplacian(mesh: &TriMesh) -> SparseMatrix {
    let n = mesh.vertex_count();
    let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for face in &mesh.faces {
        for k in 0..3 {
            let a = face[k];
            let b = face[(k + 1) % 3];
            if a != b && a < n && b < n {
                neighbors[a].insert(b);
                neighbors[b].insert(a);
            }
        }
    }
    let rows = neighbors
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            if nbrs.is_empty() {
                return Vec::new();
            }
            let w = -1.0 / nbrs.len() as f64;
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(nbrs.len() + 1);
            let mut pushed_diag = false;
            for &j in nbrs {
                if !pushed_diag && j > i {
                    row.push((i, 1.0));
                    pushed_diag = true;
                }
                row.push((j, w));
            }
            if !pushed_diag {
                row.push((i, 1.0));
            }
            row
        })
        .collect();
    SparseMatrix { size: n, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle() -> TriMesh {
        TriMesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            uvs: vec![[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]],
        }
    }

    #[test]
    fn minimal_valid_mesh_passes() {
        assert!(validate_mesh(&single_triangle()).is_empty());
    }

    #[test]
    fn repeated_vertex_is_reported() {
        let mut mesh = single_triangle();
        mesh.faces[0] = [0, 0, 1];
        let violations = validate_mesh(&mesh);
        assert_eq!(violations, vec!["face 0 repeats vertex 0".to_string()]);
    }

    #[test]
    fn out_of_range_uv_is_reported() {
        let mut mesh = single_triangle();
        mesh.uvs[0][1] = Vec2::new(1.2, 0.5);
        let violations = validate_mesh(&mesh);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("uv (1.2, 0.5) out of [0,1]"));
    }

    #[test]
    fn laplacian_of_triangle() {
        let w = uniform_laplacian(&single_triangle());
        for i in 0..3 {
            let row = &w.rows[i];
            assert_eq!(row.len(), 3);
            for &(j, val) in row {
                if j == i {
                    assert_eq!(val, 1.0);
                } else {
                    assert_eq!(val, -0.5);
                }
            }
        }
    }

    #[test]
    fn laplacian_of_tetrahedron() {
        let mesh = TriMesh {
            vertices: vec![
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(1.0, -1.0, -1.0),
                Vec3::new(-1.0, 1.0, -1.0),
                Vec3::new(-1.0, -1.0, 1.0),
            ],
            faces: vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
            uvs: vec![[Vec2::ZERO; 3]; 4],
        };
        let w = uniform_laplacian(&mesh);
        for i in 0..4 {
            let row = &w.rows[i];
            assert_eq!(row.len(), 4);
            for &(j, val) in row {
                if j == i {
                    assert_eq!(val, 1.0);
                } else {
                    assert!((val + 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn isolated_vertex_row_is_zero() {
        let mut mesh = single_triangle();
        mesh.vertices.push(Vec3::new(5.0, 5.0, 5.0));
        let w = uniform_laplacian(&mesh);
        assert!(w.rows[3].is_empty());
    }
}
