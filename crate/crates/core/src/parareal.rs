//! Parareal iteration combining the coarse and fine models, with the fine
//! sweep of each iteration evaluated in parallel across time slices.

use serde::{Deserialize, Serialize};

use crate::coarse::{coarse_rollout, coarse_step, CoarseParams};
use crate::error::{Error, Result};
use crate::fine::{fine_rollout, fine_step, PhysicsParams};
use crate::geometry::project_feasible;
use crate::metrics::{trajectory_error, ErrorReport};
use crate::scalar::Scalar;
use crate::scene::SceneSpec;
use crate::state::{wrap, ControlSequence, ModelTag, State, Trajectory};

/// Parameters of both propagators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct ModelParams<T> {
    pub fine: PhysicsParams<T>,
    pub coarse: CoarseParams<T>,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        ModelParams {
            fine: PhysicsParams::default(),
            coarse: CoarseParams::default(),
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        self.fine.validate()?;
        self.coarse.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PararealConfig {
    /// Number of refinement iterations K.
    pub iterations: usize,
    /// Threads used for the fine sweep.
    pub workers: usize,
    /// Project each new iterate out of pusher/slider penetration.
    pub project_iterates: bool,
}

impl Default for PararealConfig {
    fn default() -> Self {
        PararealConfig {
            iterations: 1,
            workers: default_workers(usize::MAX),
            project_iterates: true,
        }
    }
}

impl PararealConfig {
    pub fn new(iterations: usize, workers: usize) -> Self {
        PararealConfig {
            iterations,
            workers: workers.max(1),
            project_iterates: true,
        }
    }

    pub fn without_projection(mut self) -> Self {
        self.project_iterates = false;
        self
    }
}

/// `min(n, available cores)`.
pub fn default_workers(n: usize) -> usize {
    std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(n)
        .max(1)
}

#[derive(Clone, Debug)]
pub struct PararealResult<T> {
    /// Iterate K.
    pub trajectory: Trajectory<T>,
    /// Iterates 0..=K; entry 0 is the coarse rollout.
    pub per_iteration: Vec<Trajectory<T>>,
    /// K * N.
    pub fine_eval_count: usize,
    /// N + 2 K N: the initial coarse rollout, then per iteration one serial
    /// sweep and one recomputed correction term per slice.
    pub coarse_eval_count: usize,
}

/// Fine correction plus the coarse change between iterates.
///
/// Grouped as `F(x^k) + (C(x^{k+1}) - C(x^k))` so that a slice whose input is
/// unchanged reproduces the fine state bit for bit. Headings combine through
/// the wrapped coarse difference.
pub(crate) fn combine<T: Scalar>(fine: &State<T>, c_new: &State<T>, c_old: &State<T>) -> State<T> {
    let f = fine.to_array();
    let a = c_new.to_array();
    let b = c_old.to_array();
    let mut out = [T::zero(); 10];
    for i in 0..10 {
        out[i] = f[i] + (a[i] - b[i]);
    }
    out[4] = wrap(f[4] + wrap(a[4] - b[4]));
    State::from_array(out)
}

/// Evaluates the fine model on every slice start, spread over `workers`
/// threads. Each slice is independent, so the result does not depend on the
/// schedule.
fn fine_sweep<T: Scalar>(
    starts: &[State<T>],
    controls: &ControlSequence<T>,
    params: &PhysicsParams<T>,
    scene: &SceneSpec<T>,
    workers: usize,
) -> Result<Vec<State<T>>> {
    let n = controls.len();
    let eval = |i: usize| fine_step(&starts[i], &controls.control(i), params, scene).map_err(|e| e.at_step(i));
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(eval).collect();
    }
    let mut slots: Vec<Option<Result<State<T>>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (1..workers)
            .map(|w| {
                let eval = &eval;
                scope.spawn(move || {
                    (w..n)
                        .step_by(workers)
                        .map(|i| (i, eval(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for i in (0..n).step_by(workers) {
            slots[i] = Some(eval(i));
        }
        for h in handles {
            match h.join() {
                Ok(done) => {
                    for (i, r) in done {
                        slots[i] = Some(r);
                    }
                }
                Err(_) => return Err(Error::WorkerPanicked),
            }
        }
        Ok(())
    })?;
    slots
        .into_iter()
        .map(|s| s.unwrap_or(Err(Error::WorkerPanicked)))
        .collect()
}

/// Runs `config.iterations` Parareal iterations over `controls` from `state0`.
pub fn parareal_predict<T: Scalar>(
    state0: &State<T>,
    controls: &ControlSequence<T>,
    config: &PararealConfig,
    params: &ModelParams<T>,
    scene: &SceneSpec<T>,
) -> Result<PararealResult<T>> {
    let n = controls.len();
    if n == 0 {
        return Err(Error::invalid("parareal needs at least one control"));
    }
    if config.iterations > n {
        return Err(Error::invalid(format!(
            "parareal iterations {} exceed the number of controls {n}",
            config.iterations
        )));
    }
    state0.ensure_finite()?;

    let mut coarse_evals = n;
    let mut fine_evals = 0;
    let mut current = if config.project_iterates {
        // The initial guess is an iterate too: keep infeasible coarse states
        // away from the fine model.
        let mut states = Vec::with_capacity(n + 1);
        states.push(*state0);
        for (i, u) in controls.iter().enumerate() {
            let x = coarse_step(&states[i], &u, &params.coarse, scene).map_err(|e| e.at_step(i))?;
            states.push(project_feasible(&x, scene));
        }
        Trajectory::new(states, ModelTag::Parareal(0), controls)
    } else {
        coarse_rollout(state0, controls, &params.coarse, scene)?
    };
    current.model_tag = ModelTag::Parareal(0);
    let mut per_iteration = Vec::with_capacity(config.iterations + 1);
    per_iteration.push(current.clone());

    for k in 0..config.iterations {
        let fine = fine_sweep(&current.states, controls, &params.fine, scene, config.workers)?;
        fine_evals += n;

        let mut next = Vec::with_capacity(n + 1);
        next.push(*state0);
        for (i, u) in controls.iter().enumerate() {
            let c_new = coarse_step(&next[i], &u, &params.coarse, scene).map_err(|e| e.at_step(i))?;
            let c_old =
                coarse_step(&current.states[i], &u, &params.coarse, scene).map_err(|e| e.at_step(i))?;
            coarse_evals += 2;
            let mut x = combine(&fine[i], &c_new, &c_old);
            if config.project_iterates {
                x = project_feasible(&x, scene);
            }
            next.push(x);
        }
        current = Trajectory::new(next, ModelTag::Parareal(k + 1), controls);
        per_iteration.push(current.clone());
    }

    Ok(PararealResult {
        trajectory: current,
        per_iteration,
        fine_eval_count: fine_evals,
        coarse_eval_count: coarse_evals,
    })
}

/// Theoretical speedup of K Parareal iterations over the serial fine model
/// on N slices, given per-slice coarse and fine costs.
pub fn predicted_speedup(c_c: f64, c_f: f64, n: usize, k: usize) -> Result<f64> {
    if !(c_f > 0.0) || !(c_c >= 0.0) || !c_f.is_finite() || !c_c.is_finite() {
        return Err(Error::invalid(format!(
            "need c_f > 0 and c_c >= 0, got c_c={c_c}, c_f={c_f}"
        )));
    }
    if n == 0 || k == 0 {
        return Err(Error::invalid(format!("need N >= 1 and K >= 1, got N={n}, K={k}")));
    }
    let (n, k) = (n as f64, k as f64);
    Ok(1.0 / ((1.0 + k) * (c_c / c_f) + k / n))
}

/// Error of every iterate `0..=k_max` against the serial fine rollout.
pub fn convergence_report<T: Scalar>(
    state0: &State<T>,
    controls: &ControlSequence<T>,
    k_max: usize,
    config: &PararealConfig,
    params: &ModelParams<T>,
    scene: &SceneSpec<T>,
) -> Result<Vec<(usize, ErrorReport)>> {
    let config = PararealConfig {
        iterations: k_max,
        ..*config
    };
    let result = parareal_predict(state0, controls, &config, params, scene)?;
    let fine = fine_rollout(state0, controls, &params.fine, scene)?;
    result
        .per_iteration
        .iter()
        .enumerate()
        .map(|(k, it)| Ok((k, trajectory_error(it, &fine)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Circle, Rect, SliderShape};
    use crate::state::Pose;
    use crate::vec2::Vec2;

    fn scene() -> SceneSpec<f64> {
        SceneSpec {
            slider_shape: SliderShape::Box {
                half_extents: Vec2::new(50.0, 30.0),
            },
            slider_mass: 0.5,
            slider_inertia: None,
            pusher_radius: 10.0,
            support_friction_mu: 0.35,
            contact_friction_mu: 0.3,
            table_bounds: Rect::new(Vec2::new(-500.0, -500.0), Vec2::new(500.0, 500.0)),
            obstacle: Circle::new(Vec2::new(0.0, 300.0), 40.0),
            goal: Circle::new(Vec2::new(300.0, 0.0), 30.0),
            start_state: State::at_rest(Vec2::new(-65.0, 15.0), Pose::new(0.0, 0.0, 0.0)),
            max_push_speed: 100.0,
        }
    }

    fn controls() -> ControlSequence<f64> {
        ControlSequence::constant(Vec2::new(25.0, 0.0), 4, 1.0)
    }

    #[test]
    fn speedup_examples() {
        assert_eq!(predicted_speedup(0.0, 1.0, 4, 1).unwrap(), 4.0);
        assert!((predicted_speedup(0.01, 1.0, 4, 1).unwrap() - 1.0 / 0.27).abs() < 1e-12);
        assert!((predicted_speedup(0.01, 1.0, 4, 1).unwrap() - 3.7037).abs() < 1e-4);
        assert_eq!(predicted_speedup(0.0, 2.0, 4, 4).unwrap(), 1.0);
        assert!(predicted_speedup(0.0, 0.0, 4, 1).is_err());
        assert!(predicted_speedup(-1.0, 1.0, 4, 1).is_err());
        assert!(predicted_speedup(0.0, 1.0, 0, 1).is_err());
        assert!(predicted_speedup(0.0, 1.0, 4, 0).is_err());
    }

    #[test]
    fn zero_iterations_is_coarse() {
        let sc = scene();
        let config = PararealConfig::new(0, 1).without_projection();
        let r = parareal_predict(&sc.start_state, &controls(), &config, &ModelParams::default(), &sc).unwrap();
        let c = coarse_rollout(&sc.start_state, &controls(), &CoarseParams::default(), &sc).unwrap();
        assert_eq!(r.trajectory.states, c.states);
        assert_eq!(r.fine_eval_count, 0);
        assert_eq!(r.coarse_eval_count, 4);
    }

    #[test]
    fn counts_and_prefix() {
        let sc = scene();
        let p = ModelParams::default();
        let fine = fine_rollout(&sc.start_state, &controls(), &p.fine, &sc).unwrap();
        for k in 1..=4 {
            let r = parareal_predict(&sc.start_state, &controls(), &PararealConfig::new(k, 2), &p, &sc).unwrap();
            assert_eq!(r.fine_eval_count, k * 4);
            assert_eq!(r.coarse_eval_count, 4 + 2 * k * 4);
            assert_eq!(r.per_iteration.len(), k + 1);
            assert_eq!(r.trajectory.model_tag, ModelTag::Parareal(k));
            for n in 0..=k {
                assert_eq!(r.trajectory.states[n], fine.states[n], "k={k} n={n}");
            }
        }
    }

    #[test]
    fn too_many_iterations_rejected() {
        let sc = scene();
        let e = parareal_predict(&sc.start_state, &controls(), &PararealConfig::new(5, 1), &ModelParams::default(), &sc);
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
        let empty = ControlSequence::new(vec![], 1.0);
        assert!(parareal_predict(&sc.start_state, &empty, &PararealConfig::new(0, 1), &ModelParams::default(), &sc).is_err());
    }

    #[test]
    fn fine_errors_carry_step_index() {
        let sc = scene();
        let bad = ControlSequence::constant(Vec2::new(25.0, 0.0), 4, 0.0015);
        let err = parareal_predict(&sc.start_state, &bad, &PararealConfig::new(1, 3), &ModelParams::default(), &sc)
            .unwrap_err();
        assert!(matches!(err, Error::Step { step: 0, .. }), "{err}");
    }

    #[test]
    fn fixed_point_on_fine_trajectory() {
        let sc = scene();
        let p = ModelParams::default();
        let c = controls();
        let fine = fine_rollout(&sc.start_state, &c, &p.fine, &sc).unwrap();
        let f: Vec<_> = (0..4).map(|i| fine_step(&fine.states[i], &c.control(i), &p.fine, &sc).unwrap()).collect();
        let mut next = vec![sc.start_state];
        for i in 0..4 {
            let cn = coarse_step(&next[i], &c.control(i), &p.coarse, &sc).unwrap();
            let co = coarse_step(&fine.states[i], &c.control(i), &p.coarse, &sc).unwrap();
            next.push(combine(&f[i], &cn, &co));
        }
        assert_eq!(next, fine.states);
    }

    #[test]
    fn combine_handles_heading_wrap() {
        let mut f = State::<f64>::default();
        f.slider_pose.theta = 3.1;
        let mut a = State::default();
        a.slider_pose.theta = -3.1;
        let mut b = State::default();
        b.slider_pose.theta = 3.1;
        let out = combine(&f, &a, &b);
        let expected = wrap(3.1 + (2.0 * std::f64::consts::PI - 6.2));
        assert!((out.slider_pose.theta - expected).abs() < 1e-12);
        assert!(out.slider_pose.theta < 0.0);
    }
}
