//! Randomized checks of the simulator, Parareal and optimizer invariants.

use parapush::experiments::{canonical_controls, canonical_scene, push_scene, PushSide, Shape};
use parapush::fine::slider_kinetic_energy;
use parapush::{
    fine_rollout, fine_step, optimize, parareal_predict, penetration, Control, ControlSequence,
    CostWeights, ModelChoice, ModelParams, OptimizerConfig, PararealConfig, PhysicsParams, Pose,
    RolloutSettings, SceneF, State, Twist, Vec2,
};
use proptest::prelude::*;

fn shape(is_box: bool) -> Shape {
    if is_box {
        Shape::Box
    } else {
        Shape::Disc
    }
}

fn push_controls(speed: f64, angle_deg: f64, n: usize) -> ControlSequence<f64> {
    let a = angle_deg.to_radians();
    ControlSequence::constant(Vec2::new(speed * a.cos(), speed * a.sin()), n, 1.0)
}

fn max_channel_diff(a: &State<f64>, b: &State<f64>) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn free_sliding_is_passive(
        vx in -200.0f64..200.0, vy in -200.0f64..200.0, w in -3.0f64..3.0,
        theta in -3.1f64..3.1, is_box in any::<bool>(), coupled in any::<bool>(),
    ) {
        let mut scene: SceneF = push_scene(shape(is_box), 0.0);
        // Pusher parked far from the slider.
        scene.start_state.pusher_pos = Vec2::new(-300.0, -300.0);
        let mut params = PhysicsParams::<f64>::default();
        if !coupled {
            params.support_friction = parapush::SupportFriction::Independent;
        }
        let mut s = scene.start_state;
        s.slider_pose = Pose::new(0.0, 0.0, theta);
        s.slider_vel = Twist::new(vx, vy, w);
        let tick = Control::new(Vec2::zero(), params.substep);
        let mut energy = slider_kinetic_energy(&s, &scene);
        for _ in 0..300 {
            s = fine_step(&s, &tick, &params, &scene).unwrap();
            let e = slider_kinetic_energy(&s, &scene);
            prop_assert!(e <= energy, "{e} > {energy}");
            energy = e;
        }
    }

    #[test]
    fn steady_pushes_keep_penetration_small(
        offset in -25.0f64..25.0, speed in 5.0f64..100.0, is_box in any::<bool>(),
    ) {
        let scene: SceneF = push_scene(shape(is_box), offset);
        let params = PhysicsParams::<f64>::default();
        let tick = Control::new(Vec2::new(speed, 0.0), params.substep);
        let mut s = scene.start_state;
        for _ in 0..(100.0 / speed * 1000.0) as usize {
            s = fine_step(&s, &tick, &params, &scene).unwrap();
            let q = penetration(s.pusher_pos, scene.pusher_radius, &scene.slider_shape, &s.slider_pose).unwrap();
            prop_assert!(q.penetration_depth < 1.0, "{}", q.penetration_depth);
        }
    }

    #[test]
    fn prefix_exactness_without_projection(
        offset in -25.0f64..25.0, angle in -20.0f64..20.0, speed in 10.0f64..60.0,
        is_box in any::<bool>(),
    ) {
        let scene: SceneF = push_scene(shape(is_box), offset);
        let controls = push_controls(speed, angle, 4);
        let params = ModelParams::default();
        let fine = fine_rollout(&scene.start_state, &controls, &params.fine, &scene).unwrap();
        let config = PararealConfig::new(4, 1).without_projection();
        let all = parareal_predict(&scene.start_state, &controls, &config, &params, &scene).unwrap();
        for (k, iterate) in all.per_iteration.iter().enumerate() {
            for n in 1..=k {
                let d = max_channel_diff(&iterate.states[n], &fine.states[n]);
                prop_assert!(d <= 1e-9, "k={k} n={n} diff {d}");
            }
        }
    }

    #[test]
    fn projected_iterates_are_feasible_and_schedule_independent(
        offset in -25.0f64..25.0, angle in -20.0f64..20.0, speed in 10.0f64..60.0,
        is_box in any::<bool>(), k in 0usize..=4,
    ) {
        let scene: SceneF = push_scene(shape(is_box), offset);
        let controls = push_controls(speed, angle, 4);
        let params = ModelParams::default();
        let runs: Vec<_> = [1, 2, 4]
            .iter()
            .map(|&w| parareal_predict(&scene.start_state, &controls, &PararealConfig::new(k, w), &params, &scene).unwrap())
            .collect();
        for r in &runs[1..] {
            prop_assert_eq!(&r.trajectory.states, &runs[0].trajectory.states);
        }
        for iterate in &runs[0].per_iteration {
            for s in &iterate.states {
                let q = penetration(s.pusher_pos, scene.pusher_radius, &scene.slider_shape, &s.slider_pose).unwrap();
                prop_assert!(q.penetration_depth <= 0.1 + 1e-6);
            }
        }
        prop_assert_eq!(runs[0].fine_eval_count, 4 * k);
        prop_assert_eq!(runs[0].coarse_eval_count, 4 + 2 * 4 * k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimizer_cost_never_increases(seed in any::<u64>(), model in 0usize..3, angle in -40.0f64..40.0) {
        let model = [ModelChoice::Coarse, ModelChoice::Parareal(1), ModelChoice::Fine][model];
        let scene = parapush::benchmark_scene::<f64>(seed % 7);
        let s0 = scene.start_state;
        let d = scene.goal.center - s0.slider_pose.position();
        let dir = d * d.norm().recip();
        let a = angle.to_radians();
        let vel = Vec2::new(dir.x * a.cos() - dir.y * a.sin(), dir.x * a.sin() + dir.y * a.cos()) * 25.0;
        let init = ControlSequence::constant(vel, 4, 1.0);
        let config = OptimizerConfig { samples_per_iteration: 6, opt_iterations: 3, rng_seed: seed, ..OptimizerConfig::default() };
        let out = optimize(&s0, &init, RolloutSettings::new(model, 1), &CostWeights::default(), &config, &ModelParams::default(), &scene).unwrap();
        let mut prev = out.initial_cost;
        for &c in &out.cost_history {
            prop_assert!(c <= prev, "{c} > {prev}");
            prev = c;
        }
        prop_assert_eq!(out.final_cost, prev);
        let again = optimize(&s0, &init, RolloutSettings::new(model, 2), &CostWeights::default(), &config, &ModelParams::default(), &scene).unwrap();
        prop_assert_eq!(again.controls, out.controls);
    }
}

#[test]
fn center_push_has_no_lateral_motion() {
    for is_box in [true, false] {
        let scene: SceneF = canonical_scene(PushSide::Center, shape(is_box));
        let traj = fine_rollout(&scene.start_state, &canonical_controls(), &PhysicsParams::default(), &scene).unwrap();
        for s in &traj.states {
            assert!(s.slider_vel.vy.abs() <= 1e-6);
            assert_eq!(s.slider_pose.theta, 0.0);
        }
    }
}

#[test]
fn fine_rollouts_agree_across_threads() {
    let scene: SceneF = canonical_scene(PushSide::Side, Shape::Box);
    let controls = canonical_controls();
    let reference = fine_rollout(&scene.start_state, &controls, &PhysicsParams::default(), &scene).unwrap();
    let others: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|_| s.spawn(|| fine_rollout(&scene.start_state, &controls, &PhysicsParams::default(), &scene).unwrap()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for t in others {
        assert_eq!(t.states, reference.states);
    }
}
