//! Procedural ground-truth assets: icospheres, UV spheres, and cubes, all
//! with per-corner UVs in [0, 1].

use crate::math::{Vec2, Vec3};
use crate::scene::TriMesh;
use std::collections::BTreeMap;

/// Spherical UV of a unit direction: u from the azimuth, v from the polar
/// angle (v = 0 at the north pole).
fn sphere_uv(p: Vec3) -> Vec2 {
    let u = p.z.atan2(p.x) / (2.0 * std::f64::consts::PI) + 0.5;
    let v = p.y.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    Vec2::new(u, v)
}

/// Per-face spherical UVs with seam handling: corners on the wrapping side
/// of the azimuth seam are shifted by one period and clamped into [0, 1]
/// (sub-texel distortion on seam faces); pole corners take the mean azimuth
/// of their neighbors.
fn spherical_face_uvs(corners: [Vec3; 3]) -> [Vec2; 3] {
    let mut uv = [Vec2::ZERO; 3];
    let mut pole = [false; 3];
    for k in 0..3 {
        uv[k] = sphere_uv(corners[k]);
        pole[k] = corners[k].y.abs() > 1.0 - 1e-12;
    }
    // unwrap the azimuth across the seam
    let us: Vec<f64> = (0..3).filter(|k| !pole[*k]).map(|k| uv[k].x).collect();
    if let (Some(&max), Some(&min)) = (
        us.iter().max_by(|a, b| a.total_cmp(b)),
        us.iter().min_by(|a, b| a.total_cmp(b)),
    ) {
        if max - min > 0.5 {
            for k in 0..3 {
                if !pole[k] && uv[k].x < 0.5 {
                    uv[k].x = (uv[k].x + 1.0).min(1.0);
                }
            }
        }
    }
    let mean_u = {
        let (mut sum, mut n) = (0.0, 0);
        for k in 0..3 {
            if !pole[k] {
                sum += uv[k].x;
                n += 1;
            }
        }
        if n > 0 {
            sum / n as f64
        } else {
            0.5
        }
    };
    for k in 0..3 {
        if pole[k] {
            uv[k].x = mean_u;
        }
        uv[k].x = uv[k].x.clamp(0.0, 1.0);
        uv[k].y = uv[k].y.clamp(0.0, 1.0);
    }
    uv
}

/// Unit icosphere: subdivided icosahedron with vertices renormalized to the
/// sphere. Subdivision 0 has 12 vertices; each level quadruples the faces
/// (level 1: 42 vertices, level 2: 162, level 3: 642).
pub fn icosphere(subdivisions: usize) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a] + vertices[b]) * 0.5).normalized());
                    vertices.len() - 1
                });
            }
            next_faces.push([f[0], mid[0], mid[2]]);
            next_faces.push([f[1], mid[1], mid[0]]);
            next_faces.push([f[2], mid[2], mid[1]]);
            next_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = next_faces;
    }
    let uvs = faces
        .iter()
        .map(|f| spherical_face_uvs([vertices[f[0]], vertices[f[1]], vertices[f[2]]]))
        .collect();
    TriMesh {
        vertices,
        faces,
        uvs,
    }
}

/// Unit lat-long sphere: `rings` latitude bands and `segments` longitude
/// steps, poles triangulated as fans. UVs are exact per corner, including at
/// the seam column (u = 1 on one side, u = 0 on the other).
pub fn uv_sphere(rings: usize, segments: usize) -> TriMesh {
    assert!(rings >= 3 && segments >= 3);
    let mut vertices = Vec::new();
    let pos = |ring: usize, seg: usize| {
        let theta = std::f64::consts::PI * ring as f64 / rings as f64;
        let phi = 2.0 * std::f64::consts::PI * (seg % segments) as f64 / segments as f64;
        Vec3::new(
            theta.sin() * phi.cos(),
            theta.cos(),
            theta.sin() * phi.sin(),
        )
    };
    vertices.push(Vec3::new(0.0, 1.0, 0.0)); // north pole
    for ring in 1..rings {
        for seg in 0..segments {
            vertices.push(pos(ring, seg));
        }
    }
    vertices.push(Vec3::new(0.0, -1.0, 0.0)); // south pole
    let south = vertices.len() - 1;
    let vid = |ring: usize, seg: usize| 1 + (ring - 1) * segments + (seg % segments);
    let uv = |ring: usize, seg: usize| {
        Vec2::new(seg as f64 / segments as f64, ring as f64 / rings as f64)
    };

    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    for seg in 0..segments {
        // north cap
        faces.push([0, vid(1, seg + 1), vid(1, seg)]);
        uvs.push([
            Vec2::new((seg as f64 + 0.5) / segments as f64, 0.0),
            uv(1, seg + 1),
            uv(1, seg),
        ]);
        // south cap
        faces.push([south, vid(rings - 1, seg), vid(rings - 1, seg + 1)]);
        uvs.push([
            Vec2::new((seg as f64 + 0.5) / segments as f64, 1.0),
            uv(rings - 1, seg),
            uv(rings - 1, seg + 1),
        ]);
    }
    for ring in 1..rings - 1 {
        for seg in 0..segments {
            let (a, b) = (vid(ring, seg), vid(ring, seg + 1));
            let (c, d) = (vid(ring + 1, seg), vid(ring + 1, seg + 1));
            faces.push([a, b, d]);
            uvs.push([uv(ring, seg), uv(ring, seg + 1), uv(ring + 1, seg + 1)]);
            faces.push([a, d, c]);
            uvs.push([uv(ring, seg), uv(ring + 1, seg + 1), uv(ring + 1, seg)]);
        }
    }
    TriMesh {
        vertices,
        faces,
        uvs,
    }
}

/// Axis-aligned cube scaled to fit the unit sphere, each face a grid x grid
/// patch mapped to its own tile of a 3x2 UV atlas. Shared edge vertices are
/// welded so the mesh is closed; seams live only in UV space.
pub fn cube(grid: usize) -> TriMesh {
    assert!(grid >= 1);
    let s = 1.0 / 3.0f64.sqrt(); // half-extent so the diagonal is 1
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut weld: BTreeMap<(i64, i64, i64), usize> = BTreeMap::new();
    let mut faces = Vec::new();
    let mut uvs = Vec::new();
    // (origin, du, dv) per face
    let axes = [
        (Vec3::new(-s, -s, s), Vec3::new(2.0 * s, 0.0, 0.0), Vec3::new(0.0, 2.0 * s, 0.0)),
        (Vec3::new(s, -s, -s), Vec3::new(-2.0 * s, 0.0, 0.0), Vec3::new(0.0, 2.0 * s, 0.0)),
        (Vec3::new(s, -s, s), Vec3::new(0.0, 0.0, -2.0 * s), Vec3::new(0.0, 2.0 * s, 0.0)),
        (Vec3::new(-s, -s, -s), Vec3::new(0.0, 0.0, 2.0 * s), Vec3::new(0.0, 2.0 * s, 0.0)),
        (Vec3::new(-s, s, s), Vec3::new(2.0 * s, 0.0, 0.0), Vec3::new(0.0, 0.0, -2.0 * s)),
        (Vec3::new(-s, -s, -s), Vec3::new(2.0 * s, 0.0, 0.0), Vec3::new(0.0, 0.0, 2.0 * s)),
    ];
    let mut vertex_id = |p: Vec3| -> usize {
        let key = (
            (p.x * 1e9).round() as i64,
            (p.y * 1e9).round() as i64,
            (p.z * 1e9).round() as i64,
        );
        *weld.entry(key).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };
    for (face_idx, (origin, du, dv)) in axes.iter().enumerate() {
        let tile = (face_idx % 3, face_idx / 3);
        // inset the tile slightly to avoid atlas bleeding
        let inset = 0.01;
        let tile_uv = |fu: f64, fv: f64| {
            Vec2::new(
                (tile.0 as f64 + inset + fu * (1.0 - 2.0 * inset)) / 3.0,
                (tile.1 as f64 + inset + fv * (1.0 - 2.0 * inset)) / 2.0,
            )
        };
        for gy in 0..grid {
            for gx in 0..grid {
                let f = |ix: usize, iy: usize| {
                    let fu = ix as f64 / grid as f64;
                    let fv = iy as f64 / grid as f64;
                    (*origin + *du * fu + *dv * fv, tile_uv(fu, fv))
                };
                let (p00, t00) = f(gx, gy);
                let (p10, t10) = f(gx + 1, gy);
                let (p01, t01) = f(gx, gy + 1);
                let (p11, t11) = f(gx + 1, gy + 1);
                let (v00, v10, v01, v11) =
                    (vertex_id(p00), vertex_id(p10), vertex_id(p01), vertex_id(p11));
                faces.push([v00, v10, v11]);
                uvs.push([t00, t10, t11]);
                faces.push([v00, v11, v01]);
                uvs.push([t00, t11, t01]);
            }
        }
    }
    TriMesh {
        vertices,
        faces,
        uvs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{uniform_laplacian, validate_mesh};

    #[test]
    fn icosphere_counts_match_subdivision() {
        assert_eq!(icosphere(0).vertex_count(), 12);
        assert_eq!(icosphere(1).vertex_count(), 42);
        assert_eq!(icosphere(2).vertex_count(), 162);
        assert_eq!(icosphere(2).face_count(), 320);
    }

    #[test]
    fn generated_meshes_are_valid() {
        for mesh in [icosphere(1), uv_sphere(8, 12), cube(3)] {
            let violations = validate_mesh(&mesh);
            assert!(violations.is_empty(), "{violations:?}");
        }
    }

    #[test]
    fn icosphere_vertices_lie_on_the_unit_sphere() {
        for v in &icosphere(2).vertices {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_row_sums_vanish_on_closed_meshes() {
        // brute-force adjacency oracle: row sums must be 0 for every
        // non-isolated vertex of a closed mesh
        for mesh in [icosphere(1), cube(2)] {
            let w = uniform_laplacian(&mesh);
            for row in &w.rows {
                assert!(!row.is_empty());
                let sum: f64 = row.iter().map(|(_, v)| v).sum();
                assert!(sum.abs() < 1e-12, "row sum {sum}");
            }
        }
    }

    #[test]
    fn cube_is_welded_watertight() {
        let mesh = cube(2);
        // Euler characteristic of a sphere-topology mesh: V - E + F = 2.
        let mut edges = std::collections::BTreeSet::new();
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let euler =
            mesh.vertex_count() as i64 - edges.len() as i64 + mesh.face_count() as i64;
        assert_eq!(euler, 2);
    }
}
