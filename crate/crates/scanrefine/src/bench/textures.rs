//! Procedural textures: checkerboards and a smooth value-noise pattern.

use crate::scene::Texture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn checkerboard(
    width: usize,
    height: usize,
    cells: usize,
    color_a: [f64; 3],
    color_b: [f64; 3],
) -> Texture {
    let mut tex = Texture::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let cx = x * cells / width;
            let cy = y * cells / height;
            let c = if (cx + cy) % 2 == 0 { color_a } else { color_b };
            tex.set(x, y, c);
        }
    }
    tex
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise mapped through a warm/cool color ramp; stands in
/// for photographic texture content.
pub fn perlin_like(width: usize, height: usize, seed: u64) -> Texture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = 4usize;
    let octaves = 4;
    // lattice values per octave
    let mut lattices: Vec<(usize, Vec<f64>)> = Vec::new();
    for o in 0..octaves {
        let n = base << o;
        let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        lattices.push((n, values));
    }
    let sample = |lat: &(usize, Vec<f64>), u: f64, v: f64| -> f64 {
        let (n, values) = lat;
        let x = u * *n as f64;
        let y = v * *n as f64;
        let x0 = x.floor() as usize % n;
        let y0 = y.floor() as usize % n;
        let x1 = (x0 + 1) % n;
        let y1 = (y0 + 1) % n;
        let fx = smoothstep(x - x.floor());
        let fy = smoothstep(y - y.floor());
        let g = |xx: usize, yy: usize| values[yy * n + xx];
        g(x0, y0) * (1.0 - fx) * (1.0 - fy)
            + g(x1, y0) * fx * (1.0 - fy)
            + g(x0, y1) * (1.0 - fx) * fy
            + g(x1, y1) * fx * fy
    };
    let mut tex = Texture::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let u = x as f64 / width as f64;
            let v = y as f64 / height as f64;
            let mut value = 0.0;
            let mut amp = 1.0;
            let mut total = 0.0;
            for lat in &lattices {
                value += amp * sample(lat, u, v);
                total += amp;
                amp *= 0.5;
            }
            value /= total;
            // ramp: deep blue-grey to warm sand
            let lo = [0.18, 0.22, 0.35];
            let hi = [0.92, 0.78, 0.55];
            let rgbv = [
                lo[0] + (hi[0] - lo[0]) * value,
                lo[1] + (hi[1] - lo[1]) * value,
                lo[2] + (hi[2] - lo[2]) * value,
            ];
            tex.set(x, y, rgbv);
        }
    }
    tex
}
