//! Soft rasterization core: forward rendering and the hand-derived adjoint.
//!
//! Screen geometry lives in normalized device coordinates (NDC): pixel
//! coordinate p maps to (2 p.x / W - 1, 2 p.y / H - 1). Per pixel and
//! candidate face, coverage is `sigmoid(sign * dist^2 / sigma)` where `dist`
//! is the NDC distance from the pixel to the face's boundary and `sign` is +1
//! inside / -1 outside. Color blends candidate faces with softmax weights
//! `d_j * exp((zbar_j - max)/gamma)` plus a background term; depth uses the
//! same weights without the background, renormalized; the silhouette is
//! `1 - prod(1 - d_j)`.
//!
//! The backward pass re-evaluates the same per-pixel geometry (the forward
//! stores nothing per pixel) and chains gradients to vertices, texels, and
//! the pose increment.

use super::texture::{sample_with_taps, TexTaps};
use super::SoftParams;
use crate::math::{so3_exp, so3_right_jacobian, Mat3, Vec2, Vec3};
use crate::scene::{ImageGray, ImageRgb, Intrinsics, Pose, Texture};
use rayon::prelude::*;

/// Faces closer than this to the camera plane are dropped entirely.
const MIN_FACE_DEPTH: f64 = 1e-6;
/// Degenerate projected triangles (|2 x area| below this, NDC units) are
/// skipped: zero coverage, zero gradient.
const MIN_PROJECTED_AREA2: f64 = 1e-14;
/// Candidate cutoff in units of sqrt(sigma). Coverage at the cutoff is
/// sigmoid(-CUTOFF_SIGMAS^2) ~ 7e-14, far below double-precision noise in the
/// finite-difference gradient checks.
const CUTOFF_SIGMAS: f64 = 5.5;
/// Background depth score (the far-plane end of the normalized range).
const BACKGROUND_ZBAR: f64 = 0.0;

pub(crate) struct RasterScene<'a> {
    pub vertices: &'a [f64],
    pub faces: &'a [[usize; 3]],
    pub uvs: &'a [[Vec2; 3]],
    pub texture: &'a Texture,
    pub base_pose: Pose,
    /// Pose increment; the effective rotation is exp(omega) * base rotation.
    pub omega: Vec3,
    pub tau: Vec3,
    pub intr: Intrinsics,
    pub soft: SoftParams,
}

pub(crate) struct GradRequest {
    pub vertices: bool,
    pub texels: bool,
    pub pose: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct RasterGrads {
    pub vertices: Option<Vec<f64>>,
    pub texels: Option<Vec<f64>>,
    /// (omega.x, omega.y, omega.z, tau.x, tau.y, tau.z)
    pub pose: Option<[f64; 6]>,
}

struct ProjVert {
    ndc: Vec2,
    cam: Vec3,
    ok: bool,
}

struct ProjFace {
    face_idx: usize,
    s: [Vec2; 3],
    z: [f64; 3],
    min: Vec2,
    max: Vec2,
}

struct Prepared {
    faces: Vec<ProjFace>,
    /// Face indices (into `faces`) per pixel row, sorted.
    rows: Vec<Vec<u32>>,
    rotation: Mat3,
}

fn prepare(scene: &RasterScene) -> Prepared {
    let rotation = so3_exp(scene.omega).mul_mat(&scene.base_pose.rotation);
    let translation = scene.base_pose.translation + scene.tau;
    let (w, h) = (scene.intr.width as f64, scene.intr.height as f64);
    let n = scene.vertices.len() / 3;
    let mut proj = Vec::with_capacity(n);
    for i in 0..n {
        let v = Vec3::new(
            scene.vertices[3 * i],
            scene.vertices[3 * i + 1],
            scene.vertices[3 * i + 2],
        );
        let cam = rotation.mul_vec(v) + translation;
        if cam.z <= MIN_FACE_DEPTH {
            proj.push(ProjVert {
                ndc: Vec2::ZERO,
                cam,
                ok: false,
            });
            continue;
        }
        let px = scene.intr.fx * cam.x / cam.z + scene.intr.cx;
        let py = scene.intr.fy * cam.y / cam.z + scene.intr.cy;
        proj.push(ProjVert {
            ndc: Vec2::new(2.0 * px / w - 1.0, 2.0 * py / h - 1.0),
            cam,
            ok: true,
        });
    }

    let cut = CUTOFF_SIGMAS * scene.soft.sigma.sqrt();
    let mut faces = Vec::new();
    for (fi, f) in scene.faces.iter().enumerate() {
        let (a, b, c) = (&proj[f[0]], &proj[f[1]], &proj[f[2]]);
        if !(a.ok && b.ok && c.ok) {
            continue;
        }
        let area2 = (b.ndc - a.ndc).cross(c.ndc - a.ndc);
        if area2.abs() < MIN_PROJECTED_AREA2 {
            continue;
        }
        let min = Vec2::new(
            a.ndc.x.min(b.ndc.x).min(c.ndc.x) - cut,
            a.ndc.y.min(b.ndc.y).min(c.ndc.y) - cut,
        );
        let max = Vec2::new(
            a.ndc.x.max(b.ndc.x).max(c.ndc.x) + cut,
            a.ndc.y.max(b.ndc.y).max(c.ndc.y) + cut,
        );
        faces.push(ProjFace {
            face_idx: fi,
            s: [a.ndc, b.ndc, c.ndc],
            z: [a.cam.z, b.cam.z, c.cam.z],
            min,
            max,
        });
    }

    // Bucket candidate faces per pixel row.
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); scene.intr.height];
    for (k, pf) in faces.iter().enumerate() {
        // ndc y -> pixel y: py = (y + 1) * h / 2, pixel centers at +0.5
        let y0 = (((pf.min.y + 1.0) * h / 2.0 - 0.5).floor().max(0.0)) as usize;
        let y1 = (((pf.max.y + 1.0) * h / 2.0 - 0.5).ceil()) as isize;
        let y1 = y1.clamp(0, scene.intr.height as isize - 1) as usize;
        if y0 < scene.intr.height {
            for row in rows.iter_mut().take(y1 + 1).skip(y0) {
                row.push(k as u32);
            }
        }
    }
    Prepared { faces, rows, rotation }
}

/// Everything the forward and backward passes need about one
/// (pixel, face) interaction.
struct FaceSample {
    inside: bool,
    /// coverage
    d: f64,
    /// nearest boundary edge and its clamped parameter
    edge: usize,
    t: f64,
    t_lo: bool,
    t_hi: bool,
    /// attribute sample barycentric (pixel bary inside, edge point outside)
    bary: [f64; 3],
    /// perspective-correct interpolation state
    w_sum: f64,
    beta: [f64; 3],
    z_surf: f64,
    zbar: f64,
    zbar_clamped: bool,
    rgb: [f64; 3],
    taps: TexTaps,
    den: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Evaluate one face at one NDC point; `None` when coverage is negligible.
fn eval_face(
    pf: &ProjFace,
    uvs: &[Vec2; 3],
    q: Vec2,
    soft: &SoftParams,
    texture: &Texture,
    cut_sq: f64,
) -> Option<FaceSample> {
    let [s0, s1, s2] = pf.s;
    let e1 = s1 - s0;
    let e2 = s2 - s0;
    let den = e1.cross(e2);
    let r = q - s0;
    let b1 = r.cross(e2) / den;
    let b2 = e1.cross(r) / den;
    let b0 = 1.0 - b1 - b2;
    let inside = b0 >= 0.0 && b1 >= 0.0 && b2 >= 0.0;

    // Nearest point on the triangle boundary over the three edges.
    let mut best = f64::INFINITY;
    let mut edge = 0;
    let mut best_t = 0.0;
    for k in 0..3 {
        let a = pf.s[k];
        let b = pf.s[(k + 1) % 3];
        let u = b - a;
        let len_sq = u.norm_sq();
        let t = ((q - a).dot(u) / len_sq).clamp(0.0, 1.0);
        let cpt = a + u * t;
        let dist = (q - cpt).norm_sq();
        if dist < best {
            best = dist;
            edge = k;
            best_t = t;
        }
    }
    if !inside && best > cut_sq {
        return None;
    }

    let bary = if inside {
        [b0, b1, b2]
    } else {
        let mut bb = [0.0; 3];
        bb[edge] = 1.0 - best_t;
        bb[(edge + 1) % 3] = best_t;
        bb
    };

    let sign = if inside { 1.0 } else { -1.0 };
    let d = sigmoid(sign * best / soft.sigma);

    let w = [bary[0] / pf.z[0], bary[1] / pf.z[1], bary[2] / pf.z[2]];
    let w_sum = w[0] + w[1] + w[2];
    let beta = [w[0] / w_sum, w[1] / w_sum, w[2] / w_sum];
    let z_surf = 1.0 / w_sum;
    let zbar_raw = (soft.z_far - z_surf) / (soft.z_far - soft.z_near);
    let zbar_clamped = !(0.0..=1.0).contains(&zbar_raw);
    let zbar = zbar_raw.clamp(0.0, 1.0);

    let uv = Vec2::new(
        beta[0] * uvs[0].x + beta[1] * uvs[1].x + beta[2] * uvs[2].x,
        beta[0] * uvs[0].y + beta[1] * uvs[1].y + beta[2] * uvs[2].y,
    );
    let (rgb, taps) = sample_with_taps(texture, uv);

    Some(FaceSample {
        inside,
        d,
        edge,
        t: best_t,
        t_lo: best_t <= 0.0,
        t_hi: best_t >= 1.0,
        bary,
        w_sum,
        beta,
        z_surf,
        zbar,
        zbar_clamped,
        rgb,
        taps,
        den,
    })
}

/// Aggregated per-pixel state shared by forward and backward.
struct PixelAgg {
    samples: Vec<(u32, FaceSample)>,
    exps: Vec<f64>,
    denom_color: f64,
    denom_depth: f64,
    color: [f64; 3],
    depth: f64,
    silhouette: f64,
}

fn aggregate_pixel(
    prep: &Prepared,
    scene: &RasterScene,
    px: usize,
    py: usize,
    cut_sq: f64,
) -> PixelAgg {
    let (w, h) = (scene.intr.width as f64, scene.intr.height as f64);
    let q = Vec2::new(
        2.0 * (px as f64 + 0.5) / w - 1.0,
        2.0 * (py as f64 + 0.5) / h - 1.0,
    );
    let mut samples = Vec::new();
    for &k in &prep.rows[py] {
        let pf = &prep.faces[k as usize];
        if q.x < pf.min.x || q.x > pf.max.x || q.y < pf.min.y || q.y > pf.max.y {
            continue;
        }
        if let Some(fs) = eval_face(
            pf,
            &scene.uvs[pf.face_idx],
            q,
            &scene.soft,
            scene.texture,
            cut_sq,
        ) {
            samples.push((k, fs));
        }
    }
    if samples.is_empty() {
        return PixelAgg {
            samples,
            exps: Vec::new(),
            denom_color: 0.0,
            denom_depth: 0.0,
            color: scene.soft.background_color,
            depth: 0.0,
            silhouette: 0.0,
        };
    }
    let zbar_max = samples
        .iter()
        .map(|(_, fs)| fs.zbar)
        .fold(f64::NEG_INFINITY, f64::max);
    let gamma = scene.soft.gamma;
    let exps: Vec<f64> = samples
        .iter()
        .map(|(_, fs)| ((fs.zbar - zbar_max) / gamma).exp())
        .collect();
    let n_bg = ((BACKGROUND_ZBAR - zbar_max) / gamma).exp();
    let mut denom_color = n_bg;
    let mut denom_depth = 0.0;
    let mut color_num = [
        n_bg * scene.soft.background_color[0],
        n_bg * scene.soft.background_color[1],
        n_bg * scene.soft.background_color[2],
    ];
    let mut depth_num = 0.0;
    let mut one_minus_prod = 1.0;
    for ((_, fs), e) in samples.iter().zip(&exps) {
        let n = fs.d * e;
        denom_color += n;
        denom_depth += n;
        for c in 0..3 {
            color_num[c] += n * fs.rgb[c];
        }
        depth_num += n * fs.z_surf;
        one_minus_prod *= 1.0 - fs.d;
    }
    let color = [
        color_num[0] / denom_color,
        color_num[1] / denom_color,
        color_num[2] / denom_color,
    ];
    let depth = if denom_depth > 0.0 {
        depth_num / denom_depth
    } else {
        0.0
    };
    PixelAgg {
        samples,
        exps,
        denom_color,
        denom_depth,
        color,
        depth,
        silhouette: 1.0 - one_minus_prod,
    }
}

pub(crate) fn forward(scene: &RasterScene) -> (ImageRgb, ImageGray, ImageGray) {
    let prep = prepare(scene);
    let (w, h) = (scene.intr.width, scene.intr.height);
    let cut_sq = (CUTOFF_SIGMAS * scene.soft.sigma.sqrt()).powi(2);
    let mut color = ImageRgb::new(w, h);
    let mut depth = ImageGray::new(w, h);
    let mut sil = ImageGray::new(w, h);

    let rows: Vec<(usize, &mut [f64], &mut [f64], &mut [f64])> = {
        let mut out = Vec::with_capacity(h);
        let mut c_rows = color.data.chunks_mut(w * 3);
        let mut d_rows = depth.data.chunks_mut(w);
        let mut s_rows = sil.data.chunks_mut(w);
        for py in 0..h {
            out.push((
                py,
                c_rows.next().unwrap(),
                d_rows.next().unwrap(),
                s_rows.next().unwrap(),
            ));
        }
        out
    };
    rows.into_par_iter().for_each(|(py, c_row, d_row, s_row)| {
        for px in 0..w {
            let agg = aggregate_pixel(&prep, scene, px, py, cut_sq);
            c_row[px * 3..px * 3 + 3].copy_from_slice(&agg.color);
            d_row[px] = agg.depth;
            s_row[px] = agg.silhouette;
        }
    });
    (color, depth, sil)
}

#[derive(Default, Clone)]
struct GradAccum {
    vertices: Vec<f64>,
    texels: Vec<f64>,
    pose: [f64; 6],
}

impl GradAccum {
    fn new(scene: &RasterScene, want: &GradRequest) -> Self {
        GradAccum {
            vertices: if want.vertices {
                vec![0.0; scene.vertices.len()]
            } else {
                Vec::new()
            },
            texels: if want.texels {
                vec![0.0; scene.texture.texels.len()]
            } else {
                Vec::new()
            },
            pose: [0.0; 6],
        }
    }

    fn merge(&mut self, other: &GradAccum) {
        for (a, b) in self.vertices.iter_mut().zip(&other.vertices) {
            *a += b;
        }
        for (a, b) in self.texels.iter_mut().zip(&other.texels) {
            *a += b;
        }
        for (a, b) in self.pose.iter_mut().zip(&other.pose) {
            *a += b;
        }
    }
}

/// Adjoint of cross2: d(a x b) flowing into both arguments.
#[inline]
fn cross_adjoint(a: Vec2, b: Vec2, g: f64) -> (Vec2, Vec2) {
    (Vec2::new(g * b.y, -g * b.x), Vec2::new(-g * a.y, g * a.x))
}

pub(crate) fn backward(
    scene: &RasterScene,
    g_color: Option<&[f64]>,
    g_depth: Option<&[f64]>,
    g_sil: Option<&[f64]>,
    want: &GradRequest,
    deterministic: bool,
) -> RasterGrads {
    let prep = prepare(scene);
    let (w, h) = (scene.intr.width, scene.intr.height);
    let cut_sq = (CUTOFF_SIGMAS * scene.soft.sigma.sqrt()).powi(2);

    // One accumulator per row band; merged in band order for determinism.
    // The band count is fixed so results do not depend on the thread pool.
    let bands: usize = 8.clamp(1, h.max(1));
    let rows_per_band = h.div_ceil(bands);
    let band_ids: Vec<usize> = (0..bands).collect();
    let mut partials: Vec<GradAccum> = band_ids
        .into_par_iter()
        .map(|band| {
            let mut acc = GradAccum::new(scene, want);
            let y0 = band * rows_per_band;
            let y1 = ((band + 1) * rows_per_band).min(h);
            for py in y0..y1 {
                for px in 0..w {
                    let pix = py * w + px;
                    let gc = g_color.map(|g| [g[pix * 3], g[pix * 3 + 1], g[pix * 3 + 2]]);
                    let gd = g_depth.map(|g| g[pix]);
                    let gs = g_sil.map(|g| g[pix]);
                    let any = gc.map_or(false, |g| g.iter().any(|v| *v != 0.0))
                        || gd.is_some_and(|v| v != 0.0)
                        || gs.is_some_and(|v| v != 0.0);
                    if !any {
                        continue;
                    }
                    backward_pixel(scene, &prep, px, py, cut_sq, gc, gd, gs, want, &mut acc);
                }
            }
            acc
        })
        .collect();
    let mut total = GradAccum::new(scene, want);
    if deterministic {
        for p in &partials {
            total.merge(p);
        }
    } else {
        // unordered tree reduction
        total = partials
            .par_drain(..)
            .reduce(|| GradAccum::new(scene, want), |mut a, b| {
                a.merge(&b);
                a
            });
    }
    RasterGrads {
        vertices: want.vertices.then_some(total.vertices),
        texels: want.texels.then_some(total.texels),
        pose: want.pose.then_some(total.pose),
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_pixel(
    scene: &RasterScene,
    prep: &Prepared,
    px: usize,
    py: usize,
    cut_sq: f64,
    g_color: Option<[f64; 3]>,
    g_depth: Option<f64>,
    g_sil: Option<f64>,
    want: &GradRequest,
    acc: &mut GradAccum,
) {
    let agg = aggregate_pixel(prep, scene, px, py, cut_sq);
    if agg.samples.is_empty() {
        return;
    }
    let (w, h) = (scene.intr.width as f64, scene.intr.height as f64);
    let q = Vec2::new(
        2.0 * (px as f64 + 0.5) / w - 1.0,
        2.0 * (py as f64 + 0.5) / h - 1.0,
    );
    let m = agg.samples.len();

    // Leave-one-out products of (1 - d_j) for the silhouette adjoint.
    let mut prefix = vec![1.0; m + 1];
    for (i, (_, fs)) in agg.samples.iter().enumerate() {
        prefix[i + 1] = prefix[i] * (1.0 - fs.d);
    }
    let mut suffix = vec![1.0; m + 1];
    for (i, (_, fs)) in agg.samples.iter().enumerate().rev() {
        suffix[i] = suffix[i + 1] * (1.0 - fs.d);
    }

    let gamma = scene.soft.gamma;
    let zrange = scene.soft.z_far - scene.soft.z_near;
    for (i, (k, fs)) in agg.samples.iter().enumerate() {
        let e = agg.exps[i];
        let n = fs.d * e;
        let mut g_n = 0.0;
        let mut g_rgb = [0.0; 3];
        let mut g_zsurf = 0.0;
        if let Some(gc) = g_color {
            for c in 0..3 {
                g_n += gc[c] * (fs.rgb[c] - agg.color[c]) / agg.denom_color;
                g_rgb[c] = gc[c] * n / agg.denom_color;
            }
        }
        if let Some(gd) = g_depth {
            if agg.denom_depth > 0.0 {
                g_n += gd * (fs.z_surf - agg.depth) / agg.denom_depth;
                g_zsurf += gd * n / agg.denom_depth;
            }
        }
        let mut g_d = g_n * e;
        if let Some(gs) = g_sil {
            g_d += gs * prefix[i] * suffix[i + 1];
        }
        let g_e = g_n * fs.d;
        let g_zbar = g_e * e / gamma;
        if !fs.zbar_clamped {
            g_zsurf += g_zbar * (-1.0 / zrange);
        }

        backward_face_sample(
            scene,
            &prep.faces[*k as usize],
            fs,
            q,
            g_rgb,
            g_zsurf,
            g_d,
            want,
            acc,
            &prep.rotation,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn backward_face_sample(
    scene: &RasterScene,
    pf: &ProjFace,
    fs: &FaceSample,
    q: Vec2,
    g_rgb: [f64; 3],
    g_zsurf_in: f64,
    g_d: f64,
    want: &GradRequest,
    acc: &mut GradAccum,
    rotation: &Mat3,
) {
    let uvs = &scene.uvs[pf.face_idx];

    // texture sample -> uv and texels
    let texel_grad = if want.texels {
        Some(&mut acc.texels[..])
    } else {
        None
    };
    let g_uv = fs.taps.backward(scene.texture, g_rgb, texel_grad);
    if !(want.vertices || want.pose) {
        return;
    }

    // uv = sum beta_i uv_i
    let g_beta = [
        g_uv.x * uvs[0].x + g_uv.y * uvs[0].y,
        g_uv.x * uvs[1].x + g_uv.y * uvs[1].y,
        g_uv.x * uvs[2].x + g_uv.y * uvs[2].y,
    ];

    // beta_i = w_i / W, z_surf = 1 / W
    let dot = g_beta[0] * fs.beta[0] + g_beta[1] * fs.beta[1] + g_beta[2] * fs.beta[2];
    let mut g_w = [0.0; 3];
    let g_zsurf = g_zsurf_in;
    for i in 0..3 {
        g_w[i] = (g_beta[i] - dot) / fs.w_sum - g_zsurf * fs.z_surf * fs.z_surf;
    }

    // w_i = bary_i / z_i
    let mut g_bary = [0.0; 3];
    let mut g_z = [0.0; 3];
    for i in 0..3 {
        g_bary[i] = g_w[i] / pf.z[i];
        g_z[i] = -g_w[i] * fs.bary[i] / (pf.z[i] * pf.z[i]);
    }

    // coverage: d = sigmoid(sign * dist2 / sigma)
    let sign = if fs.inside { 1.0 } else { -1.0 };
    let g_dist2 = g_d * fs.d * (1.0 - fs.d) * sign / scene.soft.sigma;

    let mut g_s = [Vec2::ZERO; 3];

    // Boundary-distance path through the nearest edge.
    {
        let ia = fs.edge;
        let ib = (fs.edge + 1) % 3;
        let a = pf.s[ia];
        let b = pf.s[ib];
        let u = b - a;
        let cpt = a + u * fs.t;
        let diff = q - cpt; // dist2 = |diff|^2
        let g_cpt = diff * (-2.0 * g_dist2);
        g_s[ia] += g_cpt * (1.0 - fs.t);
        g_s[ib] += g_cpt * fs.t;

        // t also feeds the outside-sample barycentric.
        let mut g_t = g_cpt.dot(u);
        if !fs.inside {
            g_t += g_bary[ib] - g_bary[ia];
        }
        if !(fs.t_lo || fs.t_hi) {
            // t = (q - a).u / |u|^2
            let m_len = u.norm_sq();
            let qa = q - a;
            let ga = (u * -1.0 - qa + u * (2.0 * fs.t)) * (g_t / m_len);
            let gb = (qa - u * (2.0 * fs.t)) * (g_t / m_len);
            g_s[ia] += ga;
            g_s[ib] += gb;
        }
    }

    // Inside pixels: attribute barycentric from the 2x2 solve.
    if fs.inside {
        let s0 = pf.s[0];
        let e1 = pf.s[1] - s0;
        let e2 = pf.s[2] - s0;
        let r = q - s0;
        let g_b1 = g_bary[1] - g_bary[0];
        let g_b2 = g_bary[2] - g_bary[0];
        let g_n1 = g_b1 / fs.den;
        let g_n2 = g_b2 / fs.den;
        let g_den = -(g_b1 * fs.bary[1] + g_b2 * fs.bary[2]) / fs.den;
        // n1 = r x e2 ; n2 = e1 x r ; den = e1 x e2
        let (g_r_1, g_e2_1) = cross_adjoint(r, e2, g_n1);
        let (g_e1_2, g_r_2) = cross_adjoint(e1, r, g_n2);
        let (g_e1_d, g_e2_d) = cross_adjoint(e1, e2, g_den);
        let g_r = g_r_1 + g_r_2;
        let g_e1 = g_e1_2 + g_e1_d;
        let g_e2 = g_e2_1 + g_e2_d;
        g_s[1] += g_e1;
        g_s[2] += g_e2;
        g_s[0] += (g_e1 + g_e2 + g_r) * -1.0;
    }

    // NDC -> camera space, then to vertices / pose.
    let ax = 2.0 * scene.intr.fx / scene.intr.width as f64;
    let ay = 2.0 * scene.intr.fy / scene.intr.height as f64;
    for i in 0..3 {
        let vi = scene.faces[pf.face_idx][i];
        let v = Vec3::new(
            scene.vertices[3 * vi],
            scene.vertices[3 * vi + 1],
            scene.vertices[3 * vi + 2],
        );
        let cam = rotation.mul_vec(v) + scene.base_pose.translation + scene.tau;
        let z = cam.z;
        let g_cam = Vec3::new(
            g_s[i].x * ax / z,
            g_s[i].y * ay / z,
            -g_s[i].x * ax * cam.x / (z * z) - g_s[i].y * ay * cam.y / (z * z) + g_z[i],
        );
        if want.vertices {
            let gv = rotation.transpose_mul_vec(g_cam);
            acc.vertices[3 * vi] += gv.x;
            acc.vertices[3 * vi + 1] += gv.y;
            acc.vertices[3 * vi + 2] += gv.z;
        }
        if want.pose {
            acc.pose[3] += g_cam.x;
            acc.pose[4] += g_cam.y;
            acc.pose[5] += g_cam.z;
            // d(exp(w) q)/dw = -R [q]_x J_r(w); adjoint below.
            let q_base = scene.base_pose.rotation.mul_vec(v);
            let r_omega = so3_exp(scene.omega);
            let jr = so3_right_jacobian(scene.omega);
            let tmp = q_base.cross(r_omega.transpose_mul_vec(g_cam));
            let g_omega = jr.transpose_mul_vec(tmp);
            acc.pose[0] += g_omega.x;
            acc.pose[1] += g_omega.y;
            acc.pose[2] += g_omega.z;
        }
    }
}
