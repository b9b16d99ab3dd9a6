//! Receding-horizon push planning against a simulated world.
//!
//! Each step optimizes a short control sequence, executes its first control
//! in the world (always the fine simulator), and warm-starts the next
//! optimization with the remainder of the sequence.

use std::fmt;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fine::fine_step;
use crate::geometry::{penetration, project_feasible};
use crate::model::ModelChoice;
use crate::optimizer::{optimize, CostWeights, OptimizerConfig, RolloutSettings};
use crate::parareal::ModelParams;
use crate::scalar::Scalar;
use crate::scene::{Circle, Rect, SceneSpec, SliderShape};
use crate::state::{Control, ControlSequence, ModelTag, Pose, State, Trajectory};
use crate::vec2::Vec2;

/// What to append after shifting the warm start left by one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartTail {
    #[default]
    Duplicate,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MPCConfig {
    pub horizon: usize,
    /// s
    pub control_duration: f64,
    pub max_actions: usize,
    /// mm, Gaussian noise on the observed slider position.
    pub world_noise_std: f64,
    /// mm/s, speed of the initial straight-line candidate.
    pub initial_speed: f64,
    pub warm_start_tail: WarmStartTail,
}

impl Default for MPCConfig {
    fn default() -> Self {
        MPCConfig {
            horizon: 4,
            control_duration: 1.0,
            max_actions: 20,
            world_noise_std: 0.0,
            initial_speed: 25.0,
            warm_start_tail: WarmStartTail::Duplicate,
        }
    }
}

impl MPCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("mpc.horizon must be >= 1"));
        }
        if self.max_actions == 0 {
            return Err(Error::invalid("mpc.max_actions must be >= 1"));
        }
        if !(self.control_duration > 0.0) || !self.control_duration.is_finite() {
            return Err(Error::invalid("mpc.control_duration must be positive"));
        }
        if !(self.world_noise_std >= 0.0) || !self.world_noise_std.is_finite() {
            return Err(Error::invalid("mpc.world_noise_std must be >= 0"));
        }
        if !(self.initial_speed >= 0.0) || !self.initial_speed.is_finite() {
            return Err(Error::invalid("mpc.initial_speed must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    HitObstacle,
    FellOffTable,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::HitObstacle => "hit_obstacle",
            Outcome::FellOffTable => "fell_off_table",
            Outcome::Timeout => "timeout",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult<T> {
    pub outcome: Outcome,
    pub actions_executed: usize,
    /// Seconds spent inside the optimizer.
    pub wall_clock_planning: f64,
    pub state_log: Vec<State<T>>,
    pub action_log: Vec<Control<T>>,
}

impl<T: Scalar> EpisodeResult<T> {
    /// The executed actions as one sequence, for trajectory export.
    pub fn executed_controls(&self, duration: T) -> ControlSequence<T> {
        ControlSequence::new(self.action_log.iter().map(|c| c.vel).collect(), duration)
    }
}

/// Everything an episode needs besides the scene and model.
#[derive(Clone, Debug)]
pub struct EpisodeSetup<T> {
    pub mpc: MPCConfig,
    pub optimizer: OptimizerConfig,
    pub weights: CostWeights<T>,
    pub params: ModelParams<T>,
    /// Parareal fine-sweep threads.
    pub workers: usize,
}

impl<T: Scalar> Default for EpisodeSetup<T> {
    fn default() -> Self {
        EpisodeSetup {
            mpc: MPCConfig::default(),
            optimizer: OptimizerConfig::default(),
            weights: CostWeights::default(),
            params: ModelParams::default(),
            workers: 1,
        }
    }
}

/// True when the slider footprint overlaps the obstacle disc.
pub fn hits_obstacle<T: Scalar>(state: &State<T>, scene: &SceneSpec<T>) -> Result<bool> {
    let q = penetration(
        scene.obstacle.center,
        scene.obstacle.radius,
        &scene.slider_shape,
        &state.slider_pose,
    )?;
    Ok(q.penetration_depth > T::zero())
}

/// Termination checks in fixed order: obstacle, table edge, goal, budget.
pub fn check_termination<T: Scalar>(
    state: &State<T>,
    actions: usize,
    max_actions: usize,
    scene: &SceneSpec<T>,
) -> Result<Option<Outcome>> {
    let slider = state.slider_pose.position();
    Ok(if hits_obstacle(state, scene)? {
        Some(Outcome::HitObstacle)
    } else if !scene.table_bounds.contains(slider) {
        Some(Outcome::FellOffTable)
    } else if scene.goal.contains(slider) {
        Some(Outcome::Success)
    } else if actions >= max_actions {
        Some(Outcome::Timeout)
    } else {
        None
    })
}

/// `horizon` copies of a push from the slider towards the goal.
pub fn straight_line_candidate<T: Scalar>(
    state: &State<T>,
    scene: &SceneSpec<T>,
    config: &MPCConfig,
) -> ControlSequence<T> {
    let to_goal = scene.goal.center - state.slider_pose.position();
    let dist = to_goal.norm();
    let vel = if dist > T::zero() {
        to_goal * (T::lit(config.initial_speed) / dist)
    } else {
        Vec2::zero()
    };
    ControlSequence::constant(vel, config.horizon, T::lit(config.control_duration))
}

/// Drops the executed control and refills the tail.
pub fn shift_warm_start<T: Scalar>(
    controls: &ControlSequence<T>,
    tail: WarmStartTail,
) -> ControlSequence<T> {
    let mut vels: Vec<Vec2<T>> = controls.vels.iter().skip(1).copied().collect();
    let last = match tail {
        WarmStartTail::Duplicate => *controls.vels.last().expect("non-empty sequence"),
        WarmStartTail::Zero => Vec2::zero(),
    };
    vels.push(last);
    ControlSequence::new(vels, controls.duration)
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const NOISE_STREAM: u64 = 1 << 63;

/// Runs one closed-loop episode. `seed` drives the optimizer and any world noise.
pub fn run_episode<T: Scalar>(
    scene: &SceneSpec<T>,
    model: ModelChoice,
    setup: &EpisodeSetup<T>,
    seed: u64,
) -> Result<EpisodeResult<T>> {
    run_episode_with_probe(scene, model, setup, seed, &mut |_| {})
}

/// Observation hook for [`run_episode_with_probe`].
#[derive(Debug)]
pub enum ProbeEvent<'a, T> {
    /// The candidate about to be optimized at `step`.
    Candidate { step: usize, controls: &'a ControlSequence<T> },
    /// The optimizer's output at `step`.
    Planned { step: usize, controls: &'a ControlSequence<T> },
}

/// As [`run_episode`], reporting every warm start and every plan to `probe`.
pub fn run_episode_with_probe<T: Scalar>(
    scene: &SceneSpec<T>,
    model: ModelChoice,
    setup: &EpisodeSetup<T>,
    seed: u64,
    probe: &mut dyn FnMut(ProbeEvent<'_, T>),
) -> Result<EpisodeResult<T>> {
    let cfg = &setup.mpc;
    cfg.validate()?;
    setup.optimizer.validate()?;
    setup.weights.validate()?;
    setup.params.validate()?;

    let mut state = scene.start_state;
    let mut result = EpisodeResult {
        outcome: Outcome::Timeout,
        actions_executed: 0,
        wall_clock_planning: 0.0,
        state_log: vec![state],
        action_log: Vec::new(),
    };
    if scene.goal.contains(state.slider_pose.position()) {
        result.outcome = Outcome::Success;
        return Ok(result);
    }

    let settings = RolloutSettings::new(model, setup.workers);
    let mut seeds = substream(seed, 0);
    let noise_std = cfg.world_noise_std;
    let mut candidate = straight_line_candidate(&state, scene, cfg);

    for step in 0..cfg.max_actions {
        probe(ProbeEvent::Candidate {
            step,
            controls: &candidate,
        });
        let opt_cfg = OptimizerConfig {
            rng_seed: seeds.next_u64(),
            ..setup.optimizer
        };
        let started = Instant::now();
        let planned = optimize(
            &state,
            &candidate,
            settings,
            &setup.weights,
            &opt_cfg,
            &setup.params,
            scene,
        )
        .map_err(|e| e.at_step(step))?;
        result.wall_clock_planning += started.elapsed().as_secs_f64();
        probe(ProbeEvent::Planned {
            step,
            controls: &planned.controls,
        });

        let action = planned.controls.control(0);
        let mut next = fine_step(&state, &action, &setup.params.fine, scene)
            .map_err(|e| e.at_step(step))?;
        if noise_std > 0.0 {
            let mut rng = substream(seed, NOISE_STREAM | step as u64);
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            next.slider_pose.x = next.slider_pose.x + T::lit(nx * noise_std);
            next.slider_pose.y = next.slider_pose.y + T::lit(ny * noise_std);
            next = project_feasible(&next, scene);
        }
        state = next;
        result.actions_executed += 1;
        result.state_log.push(state);
        result.action_log.push(action);

        if let Some(outcome) =
            check_termination(&state, result.actions_executed, cfg.max_actions, scene)?
        {
            result.outcome = outcome;
            return Ok(result);
        }
        candidate = shift_warm_start(&planned.controls, cfg.warm_start_tail);
    }
    Ok(result)
}

/// One benchmark episode. `outcome` is `None` when the episode aborted.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub scene: usize,
    pub model: ModelChoice,
    pub seed: u64,
    pub outcome: Option<Outcome>,
    pub actions: usize,
    pub planning_seconds: f64,
    pub abort_reason: Option<String>,
    /// Executed states and actions, widened to `f64`.
    pub trajectory: Option<Trajectory<f64>>,
}

impl EpisodeRow {
    pub fn outcome_label(&self) -> String {
        self.outcome.map_or_else(|| "aborted".to_string(), |o| o.to_string())
    }
}

/// Aggregates over the seeds of one (scene, model) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scene: usize,
    pub model: ModelChoice,
    pub episodes: usize,
    pub successes: usize,
    pub aborted: usize,
    pub success_rate: f64,
    pub mean_planning_seconds: f64,
    pub std_planning_seconds: f64,
    pub mean_actions: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkTable {
    pub episodes: Vec<EpisodeRow>,
    pub summary: Vec<SummaryRow>,
}

pub const BENCHMARK_CSV_HEADER: &str = "scene,model,seed,outcome,actions,planning_seconds";

impl BenchmarkTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BENCHMARK_CSV_HEADER);
        out.push('\n');
        for r in &self.episodes {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.scene,
                r.model,
                r.seed,
                r.outcome_label(),
                r.actions,
                r.planning_seconds
            ));
        }
        out
    }

    /// Mean planning time of `model` over all its episodes.
    pub fn mean_planning(&self, model: ModelChoice) -> f64 {
        let times: Vec<f64> = self
            .episodes
            .iter()
            .filter(|r| r.model == model && r.outcome.is_some())
            .map(|r| r.planning_seconds)
            .collect();
        times.iter().sum::<f64>() / times.len().max(1) as f64
    }

    pub fn successes(&self, model: ModelChoice) -> usize {
        self.episodes
            .iter()
            .filter(|r| r.model == model && r.outcome == Some(Outcome::Success))
            .count()
    }
}

fn summarize(scene: usize, model: ModelChoice, rows: &[EpisodeRow]) -> SummaryRow {
    let n = rows.len();
    let done: Vec<&EpisodeRow> = rows.iter().filter(|r| r.outcome.is_some()).collect();
    let m = done.len().max(1) as f64;
    let mean_t = done.iter().map(|r| r.planning_seconds).sum::<f64>() / m;
    let var_t = if done.len() > 1 {
        done.iter()
            .map(|r| (r.planning_seconds - mean_t).powi(2))
            .sum::<f64>()
            / (done.len() - 1) as f64
    } else {
        0.0
    };
    let successes = rows
        .iter()
        .filter(|r| r.outcome == Some(Outcome::Success))
        .count();
    SummaryRow {
        scene,
        model,
        episodes: n,
        successes,
        aborted: n - done.len(),
        success_rate: successes as f64 / n.max(1) as f64,
        mean_planning_seconds: mean_t,
        std_planning_seconds: var_t.sqrt(),
        mean_actions: done.iter().map(|r| r.actions as f64).sum::<f64>() / m,
    }
}

fn widen<T: Scalar>(ep: &EpisodeResult<T>, model: ModelChoice, duration: f64) -> Trajectory<f64> {
    let states = ep
        .state_log
        .iter()
        .map(|s| State::from_array(s.to_array().map(|v| v.as_f64())))
        .collect();
    let controls = ControlSequence::new(
        ep.action_log.iter().map(|c| Vec2::new(c.vel.x.as_f64(), c.vel.y.as_f64())).collect(),
        duration,
    );
    let tag = match model {
        ModelChoice::Coarse => ModelTag::Coarse,
        ModelChoice::Fine => ModelTag::Fine,
        ModelChoice::Parareal(k) => ModelTag::Parareal(k),
    };
    Trajectory::new(states, tag, &controls)
}

/// Runs every (scene, model, seed) episode. `episode_threads` episodes run
/// concurrently, each with `setup.workers` Parareal threads.
pub fn run_benchmark<T: Scalar>(
    scenes: &[SceneSpec<T>],
    models: &[ModelChoice],
    seeds: &[u64],
    setup: &EpisodeSetup<T>,
    episode_threads: usize,
) -> Result<BenchmarkTable> {
    if scenes.is_empty() || models.is_empty() || seeds.is_empty() {
        return Err(Error::invalid(
            "benchmark needs at least one scene, model and seed",
        ));
    }
    let mut jobs = Vec::new();
    for (si, _) in scenes.iter().enumerate() {
        for &model in models {
            for &seed in seeds {
                jobs.push((si, model, seed));
            }
        }
    }
    let run = |&(si, model, seed): &(usize, ModelChoice, u64)| {
        let res = run_episode(&scenes[si], model, setup, seed);
        match res {
            Ok(ep) => EpisodeRow {
                scene: si,
                model,
                seed,
                outcome: Some(ep.outcome),
                actions: ep.actions_executed,
                planning_seconds: ep.wall_clock_planning,
                abort_reason: None,
                trajectory: Some(widen(&ep, model, setup.mpc.control_duration)),
            },
            Err(e) => EpisodeRow {
                scene: si,
                model,
                seed,
                outcome: None,
                actions: 0,
                planning_seconds: 0.0,
                abort_reason: Some(e.to_string()),
                trajectory: None,
            },
        }
    };

    let threads = episode_threads.clamp(1, jobs.len());
    let mut rows: Vec<Option<EpisodeRow>> = vec![None; jobs.len()];
    if threads == 1 {
        for (slot, job) in rows.iter_mut().zip(&jobs) {
            *slot = Some(run(job));
        }
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let jobs = &jobs;
                    let run = &run;
                    s.spawn(move || {
                        (t..jobs.len())
                            .step_by(threads)
                            .map(|i| (i, run(&jobs[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, row) in h.join().map_err(|_| Error::WorkerPanicked)? {
                    rows[i] = Some(row);
                }
            }
            Ok::<_, Error>(())
        })?;
    }
    let episodes: Vec<EpisodeRow> = rows.into_iter().map(|r| r.expect("every job ran")).collect();

    let mut summary = Vec::new();
    for (si, _) in scenes.iter().enumerate() {
        for &model in models {
            let cell: Vec<EpisodeRow> = episodes
                .iter()
                .filter(|r| r.scene == si && r.model == model)
                .cloned()
                .collect();
            summary.push(summarize(si, model, &cell));
        }
    }
    Ok(BenchmarkTable { episodes, summary })
}

/// Shape of the seeded benchmark scenes. Distances in mm, speeds in mm/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneGenerator {
    pub table_half_size: f64,
    /// Box half extents; a disc of `slider_radius` when absent.
    pub box_half_extents: Option<[f64; 2]>,
    pub slider_radius: f64,
    pub obstacle_radius: f64,
    pub goal_radius: f64,
    pub pusher_radius: f64,
    /// Pusher-to-slider clearance at the start.
    pub pusher_gap: f64,
    /// Range of start and goal distances from the obstacle centre.
    pub min_distance: f64,
    pub max_distance: f64,
    /// Largest sideways offset of the goal from the line through the obstacle.
    pub max_lateral: f64,
    pub max_push_speed: f64,
}

impl Default for SceneGenerator {
    fn default() -> Self {
        SceneGenerator {
            table_half_size: 350.0,
            box_half_extents: None,
            slider_radius: 40.0,
            obstacle_radius: 40.0,
            goal_radius: 30.0,
            pusher_radius: 10.0,
            pusher_gap: 5.0,
            min_distance: 250.0,
            max_distance: 280.0,
            max_lateral: 60.0,
            max_push_speed: 75.0,
        }
    }
}

impl SceneGenerator {
    /// A disc slider and a goal on opposite sides of an obstacle at the
    /// table centre, with the straight line between them blocked.
    pub fn generate<T: Scalar>(&self, seed: u64) -> SceneSpec<T> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let start_dist: f64 = rng.gen_range(self.min_distance..=self.max_distance);
        let goal_dist: f64 = rng.gen_range(self.min_distance..=self.max_distance);
        let lateral: f64 = rng.gen_range(-self.max_lateral..=self.max_lateral);
        let (sp, cp) = phi.sin_cos();
        let start = [start_dist * cp, start_dist * sp];
        let goal = [-goal_dist * cp - lateral * sp, -goal_dist * sp + lateral * cp];

        let dx = goal[0] - start[0];
        let dy = goal[1] - start[1];
        let len = dx.hypot(dy);
        let (ux, uy) = (dx / len, dy / len);
        let (shape, back, theta) = match self.box_half_extents {
            // Box turned so that its long side faces the push.
            Some([a, b]) => (
                SliderShape::Box {
                    half_extents: Vec2::new(T::lit(a), T::lit(b)),
                },
                b,
                uy.atan2(ux) + std::f64::consts::FRAC_PI_2,
            ),
            None => (
                SliderShape::Disc {
                    radius: T::lit(self.slider_radius),
                },
                self.slider_radius,
                0.0,
            ),
        };
        let back = back + self.pusher_radius + self.pusher_gap;
        let pusher = [start[0] - ux * back, start[1] - uy * back];

        let v = |x: f64, y: f64| Vec2::new(T::lit(x), T::lit(y));
        let h = self.table_half_size;
        SceneSpec {
            slider_shape: shape,
            slider_mass: T::lit(0.5),
            slider_inertia: None,
            pusher_radius: T::lit(self.pusher_radius),
            support_friction_mu: T::lit(0.35),
            contact_friction_mu: T::lit(0.3),
            table_bounds: Rect::new(v(-h, -h), v(h, h)),
            obstacle: Circle::new(v(0.0, 0.0), T::lit(self.obstacle_radius)),
            goal: Circle::new(v(goal[0], goal[1]), T::lit(self.goal_radius)),
            start_state: State::at_rest(
                v(pusher[0], pusher[1]),
                Pose::new(T::lit(start[0]), T::lit(start[1]), crate::state::wrap(T::lit(theta))),
            ),
            max_push_speed: T::lit(self.max_push_speed),
        }
    }
}

/// Benchmark scene from the default generator.
pub fn benchmark_scene<T: Scalar>(seed: u64) -> SceneSpec<T> {
    SceneGenerator::default().generate(seed)
}

/// `count` benchmark scenes drawn from consecutive seeds.
pub fn benchmark_scenes<T: Scalar>(count: usize, seed: u64) -> Vec<SceneSpec<T>> {
    (0..count as u64)
        .map(|i| benchmark_scene(seed.wrapping_add(i)))
        .collect()
}
