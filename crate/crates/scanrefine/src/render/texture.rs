//! Bilinear texture sampling, differentiable with respect to the four
//! surrounding texels and the UV coordinate.

use crate::math::Vec2;
use crate::scene::Texture;

/// The four texel taps of one bilinear lookup.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TexTaps {
    /// Linear texel indices (x, y) pairs, already clamped to the grid.
    pub idx: [usize; 4],
    /// Bilinear weights, in the same order: (x0,y0) (x1,y0) (x0,y1) (x1,y1).
    pub w: [f64; 4],
    /// Fractional positions and whether the uv was clamped per axis.
    pub fx: f64,
    pub fy: f64,
    pub u_clamped: bool,
    pub v_clamped: bool,
}

/// Core lookup: uv in [0,1] maps to texel centers; outside values clamp.
pub(crate) fn sample_with_taps(tex: &Texture, uv: Vec2) -> ([f64; 3], TexTaps) {
    let u_clamped = !(0.0..=1.0).contains(&uv.x);
    let v_clamped = !(0.0..=1.0).contains(&uv.y);
    let u = uv.x.clamp(0.0, 1.0);
    let v = uv.y.clamp(0.0, 1.0);
    let x = u * tex.width as f64 - 0.5;
    let y = v * tex.height as f64 - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let ix0 = (x0 as isize).clamp(0, tex.width as isize - 1) as usize;
    let ix1 = (x0 as isize + 1).clamp(0, tex.width as isize - 1) as usize;
    let iy0 = (y0 as isize).clamp(0, tex.height as isize - 1) as usize;
    let iy1 = (y0 as isize + 1).clamp(0, tex.height as isize - 1) as usize;
    let idx = [
        iy0 * tex.width + ix0,
        iy0 * tex.width + ix1,
        iy1 * tex.width + ix0,
        iy1 * tex.width + ix1,
    ];
    let w = [
        (1.0 - fx) * (1.0 - fy),
        fx * (1.0 - fy),
        (1.0 - fx) * fy,
        fx * fy,
    ];
    let mut rgb = [0.0; 3];
    for k in 0..4 {
        let t = &tex.texels[idx[k] * 3..idx[k] * 3 + 3];
        for c in 0..3 {
            rgb[c] += w[k] * t[c];
        }
    }
    (
        rgb,
        TexTaps {
            idx,
            w,
            fx,
            fy,
            u_clamped,
            v_clamped,
        },
    )
}

impl TexTaps {
    /// Accumulate d(loss)/d(texels) into `texel_grad` and return
    /// d(loss)/d(uv) given the upstream color gradient.
    pub(crate) fn backward(
        &self,
        tex: &Texture,
        g_rgb: [f64; 3],
        texel_grad: Option<&mut [f64]>,
    ) -> Vec2 {
        if let Some(grad) = texel_grad {
            for k in 0..4 {
                let base = self.idx[k] * 3;
                for c in 0..3 {
                    grad[base + c] += self.w[k] * g_rgb[c];
                }
            }
        }
        // d rgb / d fx and / d fy from the weight products.
        let mut g_fx = 0.0;
        let mut g_fy = 0.0;
        for c in 0..3 {
            let t = |k: usize| tex.texels[self.idx[k] * 3 + c];
            let dfx = (1.0 - self.fy) * (t(1) - t(0)) + self.fy * (t(3) - t(2));
            let dfy = (1.0 - self.fx) * (t(2) - t(0)) + self.fx * (t(3) - t(1));
            g_fx += g_rgb[c] * dfx;
            g_fy += g_rgb[c] * dfy;
        }
        Vec2::new(
            if self.u_clamped { 0.0 } else { g_fx * tex.width as f64 },
            if self.v_clamped { 0.0 } else { g_fy * tex.height as f64 },
        )
    }
}

/// Bilinear interpolation of the four texels surrounding `uv`, with `uv`
/// mapped to texel centers and clamped to [0,1]^2.
pub fn sample_texture(tex: &Texture, uv: Vec2) -> [f64; 3] {
    sample_with_taps(tex, uv).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tex2x2() -> Texture {
        let mut t = Texture::new(2, 2);
        t.set(0, 0, [1.0, 0.0, 0.0]);
        t.set(1, 0, [0.0, 1.0, 0.0]);
        t.set(0, 1, [0.0, 0.0, 1.0]);
        t.set(1, 1, [1.0, 1.0, 0.0]);
        t
    }

    #[test]
    fn texel_center_returns_exact_color() {
        let t = tex2x2();
        // center of texel (1, 0) is uv = (0.75, 0.25)
        assert_eq!(sample_texture(&t, Vec2::new(0.75, 0.25)), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn horizontal_midpoint_blends_evenly() {
        let mut t = Texture::new(2, 2);
        t.set(0, 0, [0.0; 3]);
        t.set(1, 0, [1.0; 3]);
        t.set(0, 1, [0.0; 3]);
        t.set(1, 1, [1.0; 3]);
        let c = sample_texture(&t, Vec2::new(0.5, 0.5));
        assert_eq!(c, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn quarter_point_matches_hand_bilinear() {
        let t = tex2x2();
        // uv = (0.25, 0.75): x = 0, y = 1 exactly => texel (0, 1) corner...
        // x = 0.25*2-0.5 = 0, fx = 0; y = 0.75*2-0.5 = 1, fy = 0.
        // Hand computation: weights (1,0,0,0) at (x0=0, y0=1) -> pure texel (0,1).
        let c = sample_texture(&t, Vec2::new(0.25, 0.75));
        assert_eq!(c, [0.0, 0.0, 1.0]);
        // And an interior blend: uv = (0.4, 0.6) -> x = 0.3, y = 0.7.
        // w00=0.7*0.3, w10=0.3*0.3, w01=0.7*0.7, w11=0.3*0.7 over corners
        // (0,0)=(1,0,0),(1,0)=(0,1,0),(0,1)=(0,0,1),(1,1)=(1,1,0).
        let c = sample_texture(&t, Vec2::new(0.4, 0.6));
        let w = [0.7 * 0.3, 0.3 * 0.3, 0.7 * 0.7, 0.3 * 0.7];
        let expect = [w[0] + w[3], w[1] + w[3], w[2]];
        for k in 0..3 {
            assert_abs_diff_eq!(c[k], expect[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn out_of_range_uv_clamps_without_error() {
        let t = tex2x2();
        assert_eq!(
            sample_texture(&t, Vec2::new(-3.0, 0.25)),
            sample_texture(&t, Vec2::new(0.0, 0.25))
        );
        assert_eq!(
            sample_texture(&t, Vec2::new(0.75, 9.0)),
            sample_texture(&t, Vec2::new(0.75, 1.0))
        );
    }

    #[test]
    fn uv_gradient_matches_finite_differences() {
        let t = tex2x2();
        let uv = Vec2::new(0.4, 0.6);
        let (_, taps) = sample_with_taps(&t, uv);
        // scalar loss = dot(rgb, s)
        let s = [0.3, -1.0, 0.8];
        let g_uv = taps.backward(&t, s, None);
        let loss = |uv: Vec2| {
            let c = sample_texture(&t, uv);
            c[0] * s[0] + c[1] * s[1] + c[2] * s[2]
        };
        let eps = 1e-6;
        let fd_u = (loss(Vec2::new(uv.x + eps, uv.y)) - loss(Vec2::new(uv.x - eps, uv.y)))
            / (2.0 * eps);
        let fd_v = (loss(Vec2::new(uv.x, uv.y + eps)) - loss(Vec2::new(uv.x, uv.y - eps)))
            / (2.0 * eps);
        assert_abs_diff_eq!(g_uv.x, fd_u, epsilon = 1e-8);
        assert_abs_diff_eq!(g_uv.y, fd_v, epsilon = 1e-8);
    }

    #[test]
    fn texel_gradient_matches_weights() {
        let t = tex2x2();
        let uv = Vec2::new(0.4, 0.6);
        let (_, taps) = sample_with_taps(&t, uv);
        let mut grad = vec![0.0; t.texels.len()];
        taps.backward(&t, [1.0, 0.0, 0.0], Some(&mut grad));
        let total: f64 = grad.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14); // partition of unity
        assert_abs_diff_eq!(grad[t.idx(0, 0)], 0.7 * 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(grad[t.idx(1, 1)], 0.3 * 0.7, epsilon = 1e-14);
    }
}
