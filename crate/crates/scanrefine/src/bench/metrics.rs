//! Evaluation metrics: PSNR, single-scale SSIM, and the symmetric average
//! Hausdorff distance via uniform area sampling and exact point-to-triangle
//! distances.

use crate::math::Vec3;
use crate::scene::{ImageRgb, TriMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// PSNR in dB over all pixels and channels, capped at 99 dB when the MSE
/// falls below 1e-10 (identical images).
pub fn psnr(a: &ImageRgb, b: &ImageRgb) -> f64 {
    assert!(a.same_size(b), "image shape mismatch");
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data.len() as f64;
    if mse < 1e-10 {
        99.0
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn to_luma(img: &ImageRgb) -> Vec<f64> {
    img.data
        .chunks_exact(3)
        .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
        .collect()
}

/// Standard single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over window centers that fit fully
/// inside the image. Inputs convert to luma via 0.299 R + 0.587 G + 0.114 B.
pub fn ssim(a: &ImageRgb, b: &ImageRgb) -> f64 {
    assert!(a.same_size(b), "image shape mismatch");
    assert!(
        a.width >= SSIM_WINDOW && a.height >= SSIM_WINDOW,
        "image smaller than the SSIM window"
    );
    let la = to_luma(a);
    let lb = to_luma(b);
    let r = SSIM_WINDOW / 2;
    // normalized Gaussian window
    let mut win = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let mut total = 0.0;
    for y in 0..SSIM_WINDOW {
        for x in 0..SSIM_WINDOW {
            let dx = x as f64 - r as f64;
            let dy = y as f64 - r as f64;
            let w = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            win[y * SSIM_WINDOW + x] = w;
            total += w;
        }
    }
    for w in &mut win {
        *w /= total;
    }

    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let (w, h) = (a.width, a.height);
    let mut sum = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            for wy in 0..SSIM_WINDOW {
                for wx in 0..SSIM_WINDOW {
                    let idx = (cy + wy - r) * w + (cx + wx - r);
                    let wt = win[wy * SSIM_WINDOW + wx];
                    mu_a += wt * la[idx];
                    mu_b += wt * lb[idx];
                }
            }
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for wy in 0..SSIM_WINDOW {
                for wx in 0..SSIM_WINDOW {
                    let idx = (cy + wy - r) * w + (cx + wx - r);
                    let wt = win[wy * SSIM_WINDOW + wx];
                    let da = la[idx] - mu_a;
                    let db = lb[idx] - mu_b;
                    var_a += wt * da * da;
                    var_b += wt * db * db;
                    cov += wt * da * db;
                }
            }
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            sum += num / den;
            count += 1;
        }
    }
    sum / count as f64
}

/// Exact distance from a point to a triangle (closest-point region walk).
pub fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm(); // vertex a
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm(); // vertex b
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm(); // edge ab
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm(); // vertex c
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm(); // edge ac
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm(); // edge bc
    }
    // interior: project onto the plane
    let denom = va + vb + vc;
    let v = vb / denom;
    let w = vc / denom;
    (ap - (ab * v + ac * w)).norm()
}

fn face_areas(mesh: &TriMesh) -> Vec<f64> {
    mesh.faces
        .iter()
        .map(|f| {
            let a = mesh.vertices[f[0]];
            let b = mesh.vertices[f[1]];
            let c = mesh.vertices[f[2]];
            (b - a).cross(c - a).norm() * 0.5
        })
        .collect()
}

/// Uniform area sampling: faces drawn from the area CDF, positions by the
/// square-root barycentric trick.
fn sample_points(mesh: &TriMesh, samples: usize, seed: u64) -> Vec<Vec3> {
    let areas = face_areas(mesh);
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cdf.push(acc);
    }
    let total = acc;
    assert!(total > 0.0, "mesh has zero area");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let t = rng.gen_range(0.0..total);
            let fi = cdf.partition_point(|c| *c < t).min(cdf.len() - 1);
            let f = mesh.faces[fi];
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let sr1 = r1.sqrt();
            let (u, v) = (1.0 - sr1, sr1 * (1.0 - r2));
            let w = 1.0 - u - v;
            mesh.vertices[f[0]] * u + mesh.vertices[f[1]] * v + mesh.vertices[f[2]] * w
        })
        .collect()
}

fn directed_mean_distance(points: &[Vec3], target: &TriMesh) -> f64 {
    let total: f64 = points
        .par_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for f in &target.faces {
                let d = point_triangle_distance(
                    *p,
                    target.vertices[f[0]],
                    target.vertices[f[1]],
                    target.vertices[f[2]],
                );
                if d < best {
                    best = d;
                }
            }
            best
        })
        .sum();
    total / points.len() as f64
}

/// Symmetric average Hausdorff distance: the mean of the two directed means
/// over `samples` uniform surface points per mesh. Sampling is deterministic.
pub fn hausdorff_avg(mesh_a: &TriMesh, mesh_b: &TriMesh, samples: usize) -> f64 {
    assert!(mesh_a.face_count() > 0 && mesh_b.face_count() > 0);
    let pa = sample_points(mesh_a, samples, 0x6d657368);
    let pb = sample_points(mesh_b, samples, 0x6d657368);
    let ab = directed_mean_distance(&pa, mesh_b);
    let ba = directed_mean_distance(&pb, mesh_a);
    0.5 * (ab + ba)
}
