//! Integration tests of the stage machinery on small synthetic benchmarks.

use scanrefine::bench::{checkerboard, generate_benchmark, icosphere, NoiseSpec};
use scanrefine::eval::evaluate_model;
use scanrefine::math::{so3_exp, Vec3};
use scanrefine::optim::{
    joint_optimize, JointModel, JointOptimizer, RunParams, Schedule, Stage, StageLimit,
};
use scanrefine::scene::{rotation_angle_deg, Pose};

fn small_params() -> RunParams {
    RunParams {
        // 8 views on the full sphere sit ~60 degrees apart
        max_neighbor_angle: 75.0,
        patience: 12,
        t_max: 120,
        batch_size: 4,
        seed: 7,
        ..RunParams::default()
    }
}

fn small_benchmark(spec: &NoiseSpec) -> scanrefine::bench::Benchmark {
    let mesh = icosphere(1);
    let tex = checkerboard(64, 64, 6, [0.9, 0.25, 0.2], [0.95, 0.95, 0.9]);
    generate_benchmark(&mesh, &tex, spec, 8, 64).unwrap()
}

fn initial_model(bench: &scanrefine::bench::Benchmark) -> JointModel {
    JointModel {
        mesh: bench.initial.mesh.clone(),
        texture: bench.initial.texture.clone(),
        poses: bench.initial.poses.clone(),
    }
}

#[test]
fn converged_start_terminates_within_patience() {
    let bench = small_benchmark(&NoiseSpec::noiseless(3));
    let params = small_params();
    let mut opt = JointOptimizer::new(&bench.scanset, initial_model(&bench), params.clone())
        .unwrap();
    let before = opt.current_model();
    let outcome = opt
        .run_stage(Stage::Pose, 1, StageLimit::Adaptive, None)
        .unwrap();
    assert!(
        outcome.steps <= params.patience + 1,
        "converged stage ran {} steps",
        outcome.steps
    );
    // parameters essentially unchanged
    let after = opt.current_model();
    let diag = before.mesh.bbox_diagonal();
    for (a, b) in before.poses.iter().zip(&after.poses) {
        assert!((a.translation - b.translation).norm() < 1e-3 * diag);
        assert!(rotation_angle_deg(&a.rotation, &b.rotation) < 0.1);
    }
}

#[test]
fn pose_stage_reduces_a_known_rotation_error() {
    let bench = small_benchmark(&NoiseSpec::noiseless(5));
    let mut model = initial_model(&bench);
    // corrupt exactly one view by a 2-degree rotation
    let bad = 3usize;
    let true_pose = model.poses[bad];
    model.poses[bad] = Pose::new(
        so3_exp(Vec3::new(0.0, 2f64.to_radians(), 0.0)).mul_mat(&true_pose.rotation),
        true_pose.translation,
    );
    let initial_err = rotation_angle_deg(&model.poses[bad].rotation, &true_pose.rotation);
    let mut params = small_params();
    params.t_max = 60;
    let mut opt = JointOptimizer::new(&bench.scanset, model, params).unwrap();
    opt.run_stage(Stage::Pose, 1, StageLimit::Adaptive, None).unwrap();
    let refined = opt.current_model();
    let final_err = rotation_angle_deg(&refined.poses[bad].rotation, &true_pose.rotation);
    assert!(
        final_err < initial_err,
        "rotation error did not decrease: {initial_err} -> {final_err}"
    );
    assert!(final_err < 1.5, "rotation error only reached {final_err}");
}

#[test]
fn stages_touch_only_their_own_parameters() {
    let bench = small_benchmark(&NoiseSpec::new(0.5, 9));
    let params = small_params();
    let mut opt =
        JointOptimizer::new(&bench.scanset, initial_model(&bench), params).unwrap();

    let before = opt.current_model();
    opt.run_stage(Stage::Pose, 1, StageLimit::Fixed(3), None).unwrap();
    let after = opt.current_model();
    assert_eq!(before.mesh.vertices, after.mesh.vertices, "pose stage moved vertices");
    assert_eq!(before.texture.texels, after.texture.texels, "pose stage moved texels");

    let before = after;
    opt.run_stage(Stage::Geometry, 1, StageLimit::Fixed(3), None).unwrap();
    let after = opt.current_model();
    assert_eq!(before.texture.texels, after.texture.texels, "geometry stage moved texels");
    for (a, b) in before.poses.iter().zip(&after.poses) {
        assert_eq!(a.rotation, b.rotation, "geometry stage moved poses");
        assert_eq!(a.translation, b.translation);
    }

    let before = after;
    opt.run_stage(Stage::Texture, 1, StageLimit::Fixed(3), None).unwrap();
    let after = opt.current_model();
    assert_eq!(before.mesh.vertices, after.mesh.vertices, "texture stage moved vertices");
    for (a, b) in before.poses.iter().zip(&after.poses) {
        assert_eq!(a.rotation, b.rotation, "texture stage moved poses");
    }
}

#[test]
fn schedule_produces_stage_segments_in_order() {
    let bench = small_benchmark(&NoiseSpec::new(0.25, 4));
    let mut params = small_params();
    params.patience = 3;
    params.t_max = 6;
    let schedule = Schedule::full(3);
    let (_, trace) = joint_optimize(&bench.scanset, initial_model(&bench), &params, &schedule)
        .unwrap();
    // compress the trace into stage segments
    let mut segments: Vec<&str> = Vec::new();
    for row in &trace {
        if segments.last() != Some(&row.stage) {
            segments.push(row.stage);
        }
    }
    assert_eq!(
        segments,
        vec![
            "pose", "geometry", "texture", "pose", "geometry", "texture", "pose", "geometry",
            "texture"
        ]
    );
    // steps are globally numbered and every stage obeys the cap
    for (i, row) in trace.iter().enumerate() {
        assert_eq!(row.step, i + 1);
    }
    assert!(trace.len() <= 9 * params.t_max);
    // geometry rows carry the Laplacian column, texture rows the GAN columns
    assert!(trace
        .iter()
        .filter(|r| r.stage == "geometry")
        .all(|r| r.l_lap.is_some()));
    assert!(trace
        .iter()
        .filter(|r| r.stage == "texture")
        .all(|r| r.d_loss.is_some() && r.g_loss.is_some()));
    assert!(trace
        .iter()
        .filter(|r| r.stage == "pose")
        .all(|r| r.l_lap.is_none() && r.d_loss.is_none()));
}

#[test]
fn fixed_limit_runs_exactly_k_steps_per_stage() {
    let bench = small_benchmark(&NoiseSpec::new(0.25, 8));
    let params = small_params();
    let mut opt =
        JointOptimizer::new(&bench.scanset, initial_model(&bench), params).unwrap();
    let schedule = Schedule::full(3);
    opt.run_schedule(&schedule, StageLimit::Fixed(3), None).unwrap();
    assert_eq!(opt.trace().len(), 27);
}

#[test]
fn small_end_to_end_run_improves_psnr() {
    let bench = small_benchmark(&NoiseSpec::new(0.5, 13));
    let mut params = small_params();
    params.t_max = 80;
    let model = initial_model(&bench);
    let before = evaluate_model(&bench.scanset, &model, Some(&bench.ground_truth.mesh)).unwrap();
    let schedule = Schedule::full(2);
    let (refined, trace) = joint_optimize(&bench.scanset, model, &params, &schedule).unwrap();
    let after =
        evaluate_model(&bench.scanset, &refined, Some(&bench.ground_truth.mesh)).unwrap();
    println!(
        "psnr {:.2} -> {:.2} dB, ssim {:.4} -> {:.4}, hausdorff {:.5} -> {:.5}, {} steps",
        before.mean_psnr,
        after.mean_psnr,
        before.mean_ssim,
        after.mean_ssim,
        before.hausdorff.unwrap(),
        after.hausdorff.unwrap(),
        trace.len()
    );
    assert!(
        after.mean_psnr > before.mean_psnr + 2.0,
        "PSNR {:.2} -> {:.2}",
        before.mean_psnr,
        after.mean_psnr
    );
}

#[test]
fn seeded_runs_are_bit_identical() {
    let bench = small_benchmark(&NoiseSpec::new(0.5, 2));
    let mut params = small_params();
    params.patience = 4;
    params.t_max = 10;
    let schedule = Schedule::full(1);
    let run = || {
        let (model, trace) =
            joint_optimize(&bench.scanset, initial_model(&bench), &params, &schedule).unwrap();
        (model, scanrefine::optim::trace_to_csv(&trace))
    };
    let (m1, t1) = run();
    let (m2, t2) = run();
    assert_eq!(t1, t2);
    assert_eq!(m1.mesh.vertices, m2.mesh.vertices);
    assert_eq!(m1.texture.texels, m2.texture.texels);
    for (a, b) in m1.poses.iter().zip(&m2.poses) {
        assert_eq!(a.rotation, b.rotation);
        assert_eq!(a.translation, b.translation);
    }
}
