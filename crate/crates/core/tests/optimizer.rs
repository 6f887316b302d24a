use nalgebra::{DMatrix, DVector, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plslam::geometry::{orthonormal_from_plucker, transform_line, CameraIntrinsics, PlueckerLine, Pose, Side};
use plslam::measurement::ImageLineSegment;
use plslam::optimizer::{
    assemble_normal_equations, local_ba, motion_only_ba, solve_lm, FactorGraph, LineEdge, PointEdge,
    PointMeasurement, SolveOptions, Termination,
};
use plslam::simulator::{build_graph_from_sim, FeatureMode, InitMode, SimConfig, Simulation};

fn noisy(rng: &mut ChaCha8Rng, p: Vector2<f64>, sigma: f64) -> Vector2<f64> {
    p + Vector2::new(rng.gen_range(-sigma..sigma), rng.gen_range(-sigma..sigma))
}

/// Three poses (the first fixed), five points and five lines, observed with
/// noise so the residuals are non-zero. No robust kernels.
fn small_graph(seed: u64) -> FactorGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = CameraIntrinsics::default();
    let mut g = FactorGraph::new(k);
    let poses: Vec<Pose> = (0..3)
        .map(|i| {
            if i == 0 {
                Pose::identity()
            } else {
                let r = Vector3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
                Pose::new(Rotation3::new(r), Vector3::new(0.3 * i as f64, rng.gen_range(-0.1..0.1), 0.0))
            }
        })
        .collect();
    for (i, p) in poses.iter().enumerate() {
        g.add_pose(i, *p, i == 0);
    }
    let in_front = |rng: &mut ChaCha8Rng| {
        let z = rng.gen_range(4.0..8.0);
        Vector3::new(rng.gen_range(-0.3..0.3) * z, rng.gen_range(-0.2..0.2) * z, z)
    };
    for id in 0..5 {
        let x = in_front(&mut rng);
        g.add_point(id, x + Vector3::new(0.05, -0.03, 0.04), false);
        for (pi, p) in poses.iter().enumerate() {
            let xc = p.transform_point(&x);
            let left = noisy(&mut rng, k.project(&xc), 1.5);
            let measurement = if id == 4 && pi == 2 {
                PointMeasurement::mono(Side::Right, noisy(&mut rng, k.project(&(xc - Vector3::new(k.baseline, 0.0, 0.0))), 1.5))
            } else {
                let ur = k.fu * (xc.x - k.baseline) / xc.z + k.cu + rng.gen_range(-1.5..1.5);
                PointMeasurement::stereo(Vector3::new(left.x, left.y, ur))
            };
            g.add_point_edge(PointEdge {
                pose: pi,
                point: id,
                measurement,
                kernel: None,
            })
            .unwrap();
        }
    }
    for id in 0..5 {
        let (a, b) = (in_front(&mut rng), in_front(&mut rng));
        let shifted = PlueckerLine::from_endpoints(&(a + Vector3::new(0.04, 0.0, 0.0)), &(b - Vector3::new(0.0, 0.05, 0.0))).unwrap();
        g.add_line(100 + id, orthonormal_from_plucker(&shifted).unwrap(), false);
        for (pi, p) in poses.iter().enumerate() {
            for side in [Side::Left, Side::Right] {
                let cam = k.side_pose(p, side);
                let seg = ImageLineSegment::new(
                    noisy(&mut rng, k.project(&cam.transform_point(&a)), 1.0),
                    noisy(&mut rng, k.project(&cam.transform_point(&b)), 1.0),
                );
                g.add_line_edge(LineEdge {
                    pose: pi,
                    line: 100 + id,
                    side,
                    segment: seg,
                    information: nalgebra::Matrix2::identity(),
                    kernel: None,
                })
                .unwrap();
            }
        }
    }
    g
}

/// Finite-difference Jacobian of the whitened residual vector with respect
/// to the layout-ordered tangent increment.
fn fd_jacobian(g: &FactorGraph) -> DMatrix<f64> {
    let n = g.layout().dim();
    let m = g.whitened_residuals().len();
    let h = 1e-6;
    let mut j = DMatrix::zeros(m, n);
    for c in 0..n {
        let mut step = DVector::zeros(n);
        step[c] = h;
        let mut plus = g.clone();
        plus.retract(&step);
        let mut minus = g.clone();
        minus.retract(&(-step));
        j.set_column(c, &((plus.whitened_residuals() - minus.whitened_residuals()) / (2.0 * h)));
    }
    j
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

#[test]
fn normal_equations_match_finite_difference_oracle() {
    for seed in 0..5 {
        let g = small_graph(seed);
        let ne = assemble_normal_equations(&g);
        assert_eq!(ne.layout.poses.len(), 2);
        assert_eq!(ne.layout.landmarks.len(), 10);
        let (h, grad) = ne.to_dense();
        let j = fd_jacobian(&g);
        let r = g.whitened_residuals();
        let h_fd = j.transpose() * &j;
        let g_fd = j.transpose() * r;
        let g_fd = DMatrix::from_column_slice(g_fd.len(), 1, g_fd.as_slice());
        let grad = DMatrix::from_column_slice(grad.len(), 1, grad.as_slice());
        assert!(rel(&h, &h_fd) < 1e-5, "seed {seed}: H rel err {}", rel(&h, &h_fd));
        assert!(rel(&grad, &g_fd) < 1e-5, "seed {seed}: g rel err {}", rel(&grad, &g_fd));
    }
}

#[test]
fn schur_and_dense_steps_agree() {
    let g = small_graph(7);
    let ne = assemble_normal_equations(&g);
    for lambda in [0.0, 1e-3, 10.0] {
        let a = ne.solve_dense(lambda).unwrap();
        let b = ne.solve_schur(lambda).unwrap();
        assert!((&a - &b).norm() <= 1e-8 * a.norm().max(1.0), "lambda {lambda}");
    }
}

#[test]
fn accepted_steps_never_increase_cost() {
    for seed in 0..4 {
        let mut g = small_graph(seed);
        let r = solve_lm(&mut g, &SolveOptions::default()).unwrap();
        assert_eq!(r.cost_trace.len(), r.accepted.len() + 1);
        for (i, ok) in r.accepted.iter().enumerate() {
            if *ok {
                assert!(r.cost_trace[i + 1] <= r.cost_trace[i]);
            } else {
                assert_eq!(r.cost_trace[i + 1], r.cost_trace[i]);
            }
        }
        assert_eq!(r.final_cost, *r.cost_trace.last().unwrap());
        assert!(r.final_cost < r.initial_cost);
    }
}

fn house(n_frames: usize, noise: f64, seed: u64) -> Simulation {
    let mut cfg = SimConfig {
        n_points: 60,
        noise_sigma: noise,
        seed,
        ..SimConfig::default()
    };
    cfg.trajectory.n_frames = n_frames;
    Simulation::run(&cfg).unwrap()
}

fn tight() -> SolveOptions {
    SolveOptions {
        max_iters: 200,
        gradient_tol: 0.0,
        rel_cost_tol: 0.0,
        ..SolveOptions::default()
    }
}

#[test]
fn rigid_change_of_initial_guess_reaches_the_same_cost() {
    let sim = house(20, 1.0, 11);
    let base = build_graph_from_sim(&sim, InitMode::GroundTruth, FeatureMode::PointsAndLines).unwrap();
    let t = Pose::new(Rotation3::from_euler_angles(0.02, -0.03, 0.01), Vector3::new(0.05, -0.04, 0.03));
    let t_inv = t.inverse();
    let mut moved = base.clone();
    for v in moved.poses.values_mut().filter(|v| !v.fixed) {
        v.pose = v.pose.compose(&t_inv);
    }
    for v in moved.points.values_mut() {
        v.position = t.transform_point(&v.position);
    }
    for v in moved.lines.values_mut() {
        let l = transform_line(&t, &v.line.to_plucker());
        v.line = orthonormal_from_plucker(&l).unwrap();
    }
    let mut a = base;
    let ra = solve_lm(&mut a, &tight()).unwrap();
    let rb = solve_lm(&mut moved, &tight()).unwrap();
    assert!(
        (ra.final_cost - rb.final_cost).abs() <= 1e-9 * ra.final_cost,
        "{} vs {}",
        ra.final_cost,
        rb.final_cost
    );
    for (id, v) in &a.poses {
        let w = moved.poses[id].pose;
        assert!(v.pose.compose(&w.inverse()).log().0.norm() < 1e-6);
    }
}

#[test]
fn motion_only_recovers_a_perturbed_pose_and_keeps_landmarks() {
    let sim = house(10, 0.0, 3);
    let mut g = build_graph_from_sim(&sim, InitMode::GroundTruth, FeatureMode::PointsAndLines).unwrap();
    let truth = g.poses[&5].pose;
    g.poses.get_mut(&5).unwrap().pose = truth.update(&plslam::geometry::PoseUpdate::new(
        Vector3::new(0.05, -0.03, 0.02),
        Vector3::new(0.01, 0.02, -0.015),
    ));
    let before = g.clone();
    let r = motion_only_ba(&mut g, 5, &SolveOptions::default()).unwrap();
    assert!(r.final_cost < 1e-12, "{}", r.final_cost);
    assert!(g.poses[&5].pose.compose(&truth.inverse()).log().0.norm() < 1e-8);
    assert_eq!(g.points, before.points);
    assert_eq!(g.lines, before.lines);
    for (id, v) in &g.poses {
        assert_eq!(v.fixed, before.poses[id].fixed);
        if *id != 5 {
            assert_eq!(v.pose, before.poses[id].pose);
        }
    }
    assert!(motion_only_ba(&mut g, 999, &SolveOptions::default()).is_err());
}

#[test]
fn local_ba_window_semantics() {
    let sim = house(12, 1.0, 4);
    let init = InitMode::Perturbed {
        pose_sigma: 0.01,
        seed: 4,
    };
    let g0 = build_graph_from_sim(&sim, init, FeatureMode::PointsAndLines).unwrap();
    let all: Vec<usize> = g0.poses.keys().copied().collect();

    let mut full = g0.clone();
    let mut windowed = g0.clone();
    let rf = solve_lm(&mut full, &SolveOptions::default()).unwrap();
    let rw = local_ba(&mut windowed, &all, &SolveOptions::default()).unwrap();
    assert_eq!(rf.cost_trace, rw.cost_trace);
    assert_eq!(full.poses, windowed.poses);

    let mut none = g0.clone();
    let r = local_ba(&mut none, &[0], &SolveOptions::default()).unwrap();
    assert_eq!(r.termination, Termination::NothingToOptimize);
    assert_eq!(none.poses, g0.poses);
    assert_eq!(none.points, g0.points);

    let mut mid = g0.clone();
    let window = [4, 5, 6, 7];
    let r = local_ba(&mut mid, &window, &SolveOptions::default()).unwrap();
    assert!(r.final_cost < r.initial_cost);
    assert!(mid.total_cost() < g0.total_cost());
    for (id, v) in &mid.poses {
        assert_eq!(v.fixed, g0.poses[id].fixed);
        if !window.contains(id) {
            assert_eq!(v.pose, g0.poses[id].pose);
        }
    }
}

#[test]
fn empty_graph_is_an_error() {
    let mut g = FactorGraph::new(CameraIntrinsics::default());
    g.add_pose(0, Pose::identity(), true);
    assert!(solve_lm(&mut g, &SolveOptions::default()).is_err());
}
