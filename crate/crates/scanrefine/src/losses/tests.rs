use super::*;
use crate::diff::{finite_diff_check, finite_diff_check_sampled, Graph, GroupKind, ParamGroup};
use crate::math::{Vec2, Vec3};
use crate::scene::{uniform_laplacian, TriMesh};
use approx::assert_abs_diff_eq;

fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ImageGray {
    let mut img = ImageGray::new(w, h);
    for y in 0..h {
        for x in 0..w {
            img.set(x, y, f(x, y));
        }
    }
    img
}

fn rgb(w: usize, h: usize, f: impl Fn(usize, usize, usize) -> f64) -> ImageRgb {
    let mut img = ImageRgb::new(w, h);
    for y in 0..h {
        for x in 0..w {
            img.set(x, y, [f(x, y, 0), f(x, y, 1), f(x, y, 2)]);
        }
    }
    img
}

fn reproj_of(color: ImageRgb, validity: ImageGray) -> ReprojectedImage {
    ReprojectedImage { color, validity }
}

#[test]
fn rgb_loss_basic_cases() {
    let a = rgb(4, 4, |x, y, c| (x + y + c) as f64 / 10.0);
    let full = ImageGray::filled(4, 4, 1.0);
    let (l, n) = rgb_loss(&reproj_of(a.clone(), full.clone()), &a);
    assert_eq!(l, 0.0);
    assert_eq!(n, 16);

    let mut shifted = a.clone();
    for v in &mut shifted.data {
        *v += 0.1;
    }
    let (l, _) = rgb_loss(&reproj_of(a.clone(), full), &shifted);
    assert_abs_diff_eq!(l, 0.1, epsilon = 1e-12);
}

#[test]
fn rgb_loss_masks_invalid_pixels() {
    // half the pixels valid with |diff| = 0.2, rest invalid with |diff| = 0.9
    let reference = rgb(4, 2, |_, _, _| 0.0);
    let rendered = rgb(4, 2, |x, _, _| if x < 2 { 0.2 } else { 0.9 });
    let validity = gray(4, 2, |x, _| if x < 2 { 1.0 } else { 0.0 });
    let (l, n) = rgb_loss(&reproj_of(reference, validity), &rendered);
    assert_abs_diff_eq!(l, 0.2, epsilon = 1e-12);
    assert_eq!(n, 4);
}

#[test]
fn rgb_loss_empty_validity_flags_zero() {
    let a = rgb(2, 2, |_, _, _| 0.5);
    let (l, n) = rgb_loss(&reproj_of(a.clone(), ImageGray::new(2, 2)), &a);
    assert_eq!((l, n), (0.0, 0));
}

#[test]
fn depth_loss_masked_mean() {
    let scan = gray(4, 1, |x, _| if x < 2 { 1.0 } else { 0.0 });
    let rendered = gray(4, 1, |_, _| 1.05);
    let sil = ImageGray::filled(4, 1, 1.0);
    assert_abs_diff_eq!(depth_loss(&scan, &rendered, &sil), 0.05, epsilon = 1e-12);
    // identical maps -> 0
    assert_eq!(depth_loss(&scan, &scan, &sil), 0.0);
}

#[test]
fn iou_loss_cases() {
    let ones = ImageGray::filled(10, 10, 1.0);
    assert_eq!(iou_loss(&ones, &ones), 0.0);

    let left = gray(10, 10, |x, _| if x < 5 { 1.0 } else { 0.0 });
    let right = gray(10, 10, |x, _| if x >= 5 { 1.0 } else { 0.0 });
    assert_eq!(iou_loss(&left, &right), 1.0);

    // hand count: intersection 50, union 100
    assert_abs_diff_eq!(iou_loss(&ones, &left), 0.5, epsilon = 1e-12);
}

#[test]
fn common_loss_weights_match_defaults() {
    let w = LossWeights::default();
    assert_abs_diff_eq!(common_loss(1.0, 1.0, 1.0, &w, false), 2.1, epsilon = 1e-15);
    assert_eq!(common_loss(0.0, 0.0, 0.0, &w, false), 0.0);
    assert_abs_diff_eq!(common_loss(1.0, 1.0, 1.0, &w, true), 1.1, epsilon = 1e-15);
}

fn tetrahedron() -> TriMesh {
    TriMesh {
        vertices: vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ],
        faces: vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        uvs: vec![[Vec2::ZERO; 3]; 4],
    }
}

#[test]
fn laplacian_loss_matches_dense_oracle() {
    let mesh = tetrahedron();
    let w = uniform_laplacian(&mesh);
    let v = mesh.vertex_buffer();
    // dense oracle
    let n = mesh.vertex_count();
    let mut dense = vec![vec![0.0; n]; n];
    for (i, row) in w.rows.iter().enumerate() {
        for &(j, val) in row {
            dense[i][j] = val;
        }
    }
    let mut acc = 0.0;
    for d in 0..3 {
        for i in 0..n {
            let mut y = 0.0;
            for j in 0..n {
                y += dense[i][j] * v[3 * j + d];
            }
            acc += y * y;
        }
    }
    let expect = acc.sqrt();
    assert_abs_diff_eq!(laplacian_loss(&w, &v), expect, epsilon = 1e-10);
}

#[test]
fn laplacian_loss_is_homogeneous_and_zero_on_constants() {
    let mesh = tetrahedron();
    let w = uniform_laplacian(&mesh);
    let v = mesh.vertex_buffer();
    let l1 = laplacian_loss(&w, &v);
    let doubled: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
    assert_abs_diff_eq!(laplacian_loss(&w, &doubled), 2.0 * l1, epsilon = 1e-10);
    // all vertices coincident
    let coincident = vec![0.7; v.len()];
    assert_abs_diff_eq!(laplacian_loss(&w, &coincident), 0.0, epsilon = 1e-12);
}

#[test]
fn laplacian_gradient_matches_finite_differences() {
    let mesh = tetrahedron();
    let w = uniform_laplacian(&mesh);
    let group = ParamGroup::new(GroupKind::Vertices, mesh.vertex_buffer(), 1e-3);
    let mut graph = Graph::new(true);
    let loss = record_laplacian_loss(&mut graph, &w, &group);
    let analytic = graph.gradients(loss, &[&group]).unwrap().remove(0);
    let err = finite_diff_check(
        |p| laplacian_loss(&w, p),
        &group.values,
        &analytic,
        1e-6,
    );
    assert!(err < 1e-3, "laplacian FD error {err}");
}

#[test]
fn rgb_and_iou_gradients_match_finite_differences() {
    // random-ish fixed images, no zero diffs
    let rendered = rgb(6, 5, |x, y, c| {
        0.17 + 0.61 * ((x * 7 + y * 3 + c * 5) % 11) as f64 / 11.0
    });
    let reference = rgb(6, 5, |x, y, c| {
        0.23 + 0.53 * ((x * 5 + y * 11 + c * 7) % 13) as f64 / 13.0
    });
    let validity = gray(6, 5, |x, y| if (x + y) % 3 == 0 { 0.0 } else { 1.0 });
    let reproj = reproj_of(reference, validity);

    let build = |img: &[f64]| {
        let mut graph = Graph::new(true);
        let node = graph.leaf_rgb(ImageRgb {
            width: 6,
            height: 5,
            data: img.to_vec(),
        });
        let loss = record_rgb_loss(&mut graph, &reproj, node);
        (graph, node, loss)
    };
    let (graph, node, loss) = build(&rendered.data);
    let store = graph.backward(loss);
    let analytic = store.buffer_grad(node).unwrap().to_vec();
    let err = finite_diff_check(
        |p| {
            let (g, _, l) = build(p);
            g.scalar(l)
        },
        &rendered.data,
        &analytic,
        1e-5,
    );
    assert!(err < 1e-3, "rgb loss FD error {err}");

    // IoU against a binary ground truth, soft rendered silhouette
    let gt = gray(6, 5, |x, _| if x < 3 { 1.0 } else { 0.0 });
    let soft = gray(6, 5, |x, y| 0.1 + 0.8 * ((x * 3 + y) % 7) as f64 / 7.0);
    let build = |img: &[f64]| {
        let mut graph = Graph::new(true);
        let node = graph.leaf_gray(ImageGray {
            width: 6,
            height: 5,
            data: img.to_vec(),
        });
        let loss = record_iou_loss(&mut graph, &gt, node);
        (graph, node, loss)
    };
    let (graph, node, loss) = build(&soft.data);
    let store = graph.backward(loss);
    let analytic = store.buffer_grad(node).unwrap().to_vec();
    let err = finite_diff_check(
        |p| {
            let (g, _, l) = build(p);
            g.scalar(l)
        },
        &soft.data,
        &analytic,
        1e-6,
    );
    assert!(err < 1e-3, "iou loss FD error {err}");
}

#[test]
fn zeroed_final_layer_outputs_exactly_half() {
    let disc = PatchDiscriminator::new();
    let weights = disc.init_weights(7);
    let cond = rgb(16, 16, |x, y, c| ((x + y + c) % 5) as f64 / 5.0);
    let img = rgb(16, 16, |x, y, c| ((x * y + c) % 7) as f64 / 7.0);
    let fwd = disc.forward(&weights, &cond, &img).unwrap();
    let map = disc.patch_map(&fwd);
    assert_eq!(map.width, 1);
    assert_eq!(map.height, 1);
    for v in &map.data {
        assert_eq!(*v, 0.5);
    }
    let (d, g) = adversarial_losses(&disc, &weights, &cond, &img, &cond).unwrap();
    assert_abs_diff_eq!(d, 2.0 * (2.0f64).ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(g, (2.0f64).ln(), epsilon = 1e-12);
}

#[test]
fn conditioning_is_order_sensitive() {
    let disc = PatchDiscriminator::new();
    let mut weights = disc.init_weights(3);
    // randomize the final layer too, otherwise outputs collapse to 0.5
    let n = disc.weight_count();
    for (i, wv) in weights.iter_mut().enumerate().skip(n - 2049) {
        *wv = ((i * 2654435761) % 1000) as f64 / 5000.0 - 0.1;
    }
    let a = rgb(16, 16, |x, y, c| ((x * 3 + y + c) % 9) as f64 / 9.0);
    let b = rgb(16, 16, |x, y, c| ((x + y * 5 + c * 2) % 11) as f64 / 11.0);
    let ab = disc.forward(&weights, &a, &b).unwrap();
    let ba = disc.forward(&weights, &b, &a).unwrap();
    let pa = disc.patch_map(&ab);
    let pb = disc.patch_map(&ba);
    assert!(pa
        .data
        .iter()
        .zip(&pb.data)
        .any(|(x, y)| (x - y).abs() > 1e-9));
}

#[test]
fn undersized_input_is_rejected() {
    let disc = PatchDiscriminator::new();
    let weights = disc.init_weights(0);
    let small = rgb(8, 8, |_, _, _| 0.5);
    assert!(disc.forward(&weights, &small, &small).is_err());
}

#[test]
fn adversarial_gradients_match_finite_differences() {
    let disc = PatchDiscriminator::new();
    let mut weights = disc.init_weights(11);
    // non-degenerate final layer
    let n = disc.weight_count();
    for (i, wv) in weights.iter_mut().enumerate().skip(n - 2049) {
        *wv = (((i * 1103515245 + 12345) % 2000) as f64 / 1000.0 - 1.0) * 0.05;
    }
    let cond = rgb(16, 16, |x, y, c| 0.2 + ((x * 7 + y * 3 + c) % 10) as f64 / 20.0);
    let real = rgb(16, 16, |x, y, c| 0.3 + ((x + y * 9 + c * 4) % 8) as f64 / 16.0);
    let fake = rgb(16, 16, |x, y, c| 0.25 + ((x * 5 + y + c * 2) % 12) as f64 / 24.0);

    let build = |w: &[f64], fake_data: &[f64]| {
        let group = ParamGroup::new(GroupKind::DiscriminatorWeights, w.to_vec(), 1e-4);
        let mut graph = Graph::new(true);
        let fake_node = graph.leaf_rgb(ImageRgb {
            width: 16,
            height: 16,
            data: fake_data.to_vec(),
        });
        let nodes =
            record_adversarial_pair(&mut graph, &disc, &group, &cond, &real, fake_node).unwrap();
        (graph, group, fake_node, nodes)
    };

    // d_loss wrt weights, spot-checked across layers
    let (graph, group, _, nodes) = build(&weights, &fake.data);
    let analytic = graph.gradients(nodes.d_loss, &[&group]).unwrap().remove(0);
    let mut indices = Vec::new();
    let mut k = 3;
    while k < weights.len() {
        indices.push(k);
        k += weights.len() / 96;
    }
    let mut f = |w: &[f64]| {
        let (g, _, _, n) = build(w, &fake.data);
        g.scalar(n.d_loss)
    };
    let err = finite_diff_check_sampled(&mut f, &weights, &analytic, 1e-4, &indices);
    assert!(err < 1e-3, "d_loss weight FD error {err}");

    // g_loss wrt the rendered image (all pixels)
    let (graph, _, fake_node, nodes) = build(&weights, &fake.data);
    let store = graph.backward(nodes.g_loss);
    let analytic = store.buffer_grad(fake_node).unwrap().to_vec();
    let err = finite_diff_check(
        |p| {
            let (g, _, _, n) = build(&weights, p);
            g.scalar(n.g_loss)
        },
        &fake.data,
        &analytic,
        1e-4,
    );
    assert!(err < 1e-2, "g_loss image FD error {err}");
}
