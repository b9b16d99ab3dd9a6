//! Push-planning cost and the sampling-based trajectory optimizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelChoice;
use crate::parareal::ModelParams;
use crate::scalar::Scalar;
use crate::scene::SceneSpec;
use crate::state::{Control, ControlSequence, State, Trajectory};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct CostWeights<T> {
    /// Slider obstacle proximity, mm^2.
    pub w_s: T,
    /// Pusher obstacle proximity, mm^2.
    pub w_p: T,
    /// Control smoothness, s^2/mm^2.
    pub w_u: T,
    /// Added while the slider centre is off the table.
    pub w_e: T,
    /// Terminal goal-distance weight.
    pub w: T,
}

impl<T: Scalar> Default for CostWeights<T> {
    fn default() -> Self {
        CostWeights {
            w_s: T::lit(1e7),
            w_p: T::lit(5e6),
            w_u: T::lit(1e-2),
            w_e: T::lit(1e4),
            w: T::lit(0.1),
        }
    }
}

impl<T: Scalar> CostWeights<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_s", self.w_s),
            ("w_p", self.w_p),
            ("w_u", self.w_u),
            ("w_e", self.w_e),
            ("w", self.w),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("cost.{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: T) -> Self {
        CostWeights {
            w_s: self.w_s * factor,
            w_p: self.w_p * factor,
            w_u: self.w_u * factor,
            w_e: self.w_e * factor,
            w: self.w * factor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub samples_per_iteration: usize,
    /// mm/s, per velocity component.
    pub exploration_std: f64,
    pub opt_iterations: usize,
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            samples_per_iteration: 20,
            exploration_std: 10.0,
            opt_iterations: 5,
            temperature: 1.0,
            rng_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_iteration == 0 {
            return Err(Error::invalid("optimizer.samples_per_iteration must be >= 1"));
        }
        if !(self.exploration_std > 0.0) || !self.exploration_std.is_finite() {
            return Err(Error::invalid("optimizer.exploration_std must be positive"));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid("optimizer.temperature must be positive"));
        }
        Ok(())
    }
}

fn inverse_square<T: Scalar>(weight: T, a: Vec2<T>, b: Vec2<T>) -> T {
    let d2 = (a - b).norm_squared();
    if d2 > T::zero() {
        weight / d2
    } else {
        T::infinity()
    }
}

/// Obstacle proximity for slider and pusher, control smoothness, and the
/// off-table penalty. `+inf` when a body sits exactly on the obstacle centre.
pub fn running_cost<T: Scalar>(
    state: &State<T>,
    u_prev: &Control<T>,
    u: &Control<T>,
    weights: &CostWeights<T>,
    scene: &SceneSpec<T>,
) -> T {
    let obs = scene.obstacle.center;
    let slider = state.slider_pose.position();
    let mut cost = inverse_square(weights.w_s, slider, obs)
        + inverse_square(weights.w_p, state.pusher_pos, obs)
        + weights.w_u * (u.vel - u_prev.vel).norm_squared();
    if !scene.table_bounds.contains(slider) {
        cost = cost + weights.w_e;
    }
    cost
}

/// Squared distance from the slider centre to the goal centre, mm^2.
pub fn final_cost<T: Scalar>(state: &State<T>, scene: &SceneSpec<T>) -> T {
    (state.slider_pose.position() - scene.goal.center).norm_squared()
}

/// Running costs over states `1..N-1` plus the weighted terminal cost.
pub fn trajectory_cost<T: Scalar>(
    traj: &Trajectory<T>,
    controls: &ControlSequence<T>,
    weights: &CostWeights<T>,
    scene: &SceneSpec<T>,
) -> Result<T> {
    if traj.states.len() != controls.len() + 1 {
        return Err(Error::invalid(format!(
            "trajectory has {} states for {} controls",
            traj.states.len(),
            controls.len()
        )));
    }
    let n = controls.len();
    let mut cost = T::zero();
    for i in 1..n {
        cost = cost
            + running_cost(
                &traj.states[i],
                &controls.control(i - 1),
                &controls.control(i),
                weights,
                scene,
            );
    }
    Ok(cost + weights.w * final_cost(traj.last(), scene))
}

/// How the optimizer rolls out candidates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutSettings {
    pub model: ModelChoice,
    /// Parareal fine-sweep threads.
    pub workers: usize,
    pub project_iterates: bool,
}

impl RolloutSettings {
    pub fn new(model: ModelChoice, workers: usize) -> Self {
        RolloutSettings {
            model,
            workers: workers.max(1),
            project_iterates: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimized<T> {
    pub controls: ControlSequence<T>,
    /// Rolled-out cost of the initial sequence.
    pub initial_cost: T,
    /// Rolled-out cost of the returned sequence.
    pub final_cost: T,
    /// Nominal cost after each optimization iteration.
    pub cost_history: Vec<T>,
    /// Updates that passed the acceptance guard.
    pub accepted: usize,
}

fn clamp_speed<T: Scalar>(v: Vec2<T>, max: T) -> Vec2<T> {
    let s = v.norm();
    if s > max {
        v * (max / s)
    } else {
        v
    }
}

/// Per-sample noise stream: independent of evaluation order.
fn sample_rng(seed: u64, iteration: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | sample as u64);
    rng
}

struct Evaluator<'a, T: Scalar> {
    state0: &'a State<T>,
    weights: &'a CostWeights<T>,
    params: &'a ModelParams<T>,
    scene: &'a SceneSpec<T>,
    settings: RolloutSettings,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn cost(&self, controls: &ControlSequence<T>) -> Result<T> {
        let traj = self.settings.model.rollout(
            self.state0,
            controls,
            self.params,
            self.scene,
            self.settings.workers,
            self.settings.project_iterates,
        )?;
        let c = trajectory_cost(&traj, controls, self.weights, self.scene)?;
        Ok(if c.is_nan() { T::infinity() } else { c })
    }
}

/// Stochastic sampling optimization of `init` from `state0`.
///
/// Each iteration perturbs every control of the nominal sequence with
/// Gaussian noise, rolls the samples out, and moves the nominal to the
/// exponentiated-cost weighted mean of the samples. The move is kept only
/// when its own rolled-out cost is no worse than the nominal's.
#[allow(clippy::too_many_arguments)]
pub fn optimize<T: Scalar>(
    state0: &State<T>,
    init: &ControlSequence<T>,
    settings: RolloutSettings,
    weights: &CostWeights<T>,
    config: &OptimizerConfig,
    params: &ModelParams<T>,
    scene: &SceneSpec<T>,
) -> Result<Optimized<T>> {
    if init.is_empty() {
        return Err(Error::invalid("optimize needs at least one control"));
    }
    config.validate()?;
    let eval = Evaluator {
        state0,
        weights,
        params,
        scene,
        settings,
    };
    let max_speed = scene.max_push_speed;
    let std = config.exploration_std;
    let temperature = T::lit(config.temperature);

    let mut nominal = init.clone();
    let mut nominal_cost = eval.cost(&nominal).unwrap_or(T::infinity());
    let initial_cost = nominal_cost;
    let mut history = Vec::with_capacity(config.opt_iterations);
    let mut accepted = 0;

    for it in 0..config.opt_iterations {
        let mut deltas = Vec::with_capacity(config.samples_per_iteration);
        let mut costs = Vec::with_capacity(config.samples_per_iteration);
        let mut last_err = None;
        for s in 0..config.samples_per_iteration {
            let mut rng = sample_rng(config.rng_seed, it, s);
            let vels: Vec<Vec2<T>> = nominal
                .vels
                .iter()
                .map(|&v| {
                    let ex: f64 = StandardNormal.sample(&mut rng);
                    let ey: f64 = StandardNormal.sample(&mut rng);
                    clamp_speed(v + Vec2::new(T::lit(ex * std), T::lit(ey * std)), max_speed)
                })
                .collect();
            let sample = ControlSequence::new(vels, nominal.duration);
            match eval.cost(&sample) {
                Ok(c) => costs.push(c),
                Err(e) => {
                    costs.push(T::infinity());
                    last_err = Some(e);
                }
            }
            deltas.push(sample.vels.iter().zip(&nominal.vels).map(|(&a, &b)| a - b).collect::<Vec<_>>());
        }

        let best = costs.iter().copied().fold(T::infinity(), T::min);
        if !best.is_finite() {
            if let Some(e) = last_err {
                if costs.iter().all(|c| c.is_infinite()) && !nominal_cost.is_finite() {
                    return Err(Error::OptimizationFailed { last: Box::new(e) });
                }
            }
            history.push(nominal_cost);
            continue;
        }
        let mut total = T::zero();
        let mut step = vec![Vec2::<T>::zero(); nominal.len()];
        for (c, d) in costs.iter().zip(&deltas) {
            if !c.is_finite() {
                continue;
            }
            let w = (-(*c - best) / temperature).exp();
            total = total + w;
            for (acc, &dv) in step.iter_mut().zip(d) {
                *acc += dv * w;
            }
        }
        let candidate = ControlSequence::new(
            nominal
                .vels
                .iter()
                .zip(&step)
                .map(|(&v, &dv)| clamp_speed(v + dv * total.recip(), max_speed))
                .collect(),
            nominal.duration,
        );
        if let Ok(c) = eval.cost(&candidate) {
            if c <= nominal_cost {
                nominal = candidate;
                nominal_cost = c;
                accepted += 1;
            }
        }
        history.push(nominal_cost);
    }

    Ok(Optimized {
        controls: nominal,
        initial_cost,
        final_cost: nominal_cost,
        cost_history: history,
        accepted,
    })
}
