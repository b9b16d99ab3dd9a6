//! Canonical scenes and the experiment runners behind the CLI.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarse::coarse_rollout;
use crate::error::{Error, Result};
use crate::fine::fine_rollout;
use crate::metrics::{trajectory_error, ErrorReport};
use crate::model::ModelChoice;
use crate::parareal::{convergence_report, parareal_predict, predicted_speedup, ModelParams, PararealConfig};
use crate::scalar::Scalar;
use crate::scene::{Circle, Rect, SceneSpec, SliderShape};
use crate::state::{wrap, ControlSequence, Pose, State};
use crate::vec2::Vec2;

/// Box slider footprint, mm.
pub const BOX_HALF_EXTENTS: [f64; 2] = [50.0, 30.0];
pub const DISC_RADIUS: f64 = 40.0;
pub const PUSHER_RADIUS: f64 = 10.0;
pub const SLIDER_MASS: f64 = 0.5;
/// Pusher clearance before the canonical pushes, mm.
pub const PUSH_GAP: f64 = 5.0;
/// Lateral pusher offset of the side pushes, mm.
pub const SIDE_OFFSET: f64 = 20.0;
/// Slider-only error channels are compared in these pushes.
pub const PUSH_SPEED: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Box,
    Disc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PushSide {
    Center,
    Side,
}

/// The four canonical (side, shape) pushes.
pub const CANONICAL_PUSHES: [(PushSide, Shape); 4] = [
    (PushSide::Center, Shape::Disc),
    (PushSide::Side, Shape::Disc),
    (PushSide::Center, Shape::Box),
    (PushSide::Side, Shape::Box),
];

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Shape::Box),
            "disc" => Ok(Shape::Disc),
            _ => Err(Error::invalid(format!("unknown shape '{s}', expected box or disc"))),
        }
    }
}

impl std::str::FromStr for PushSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(PushSide::Center),
            "side" => Ok(PushSide::Side),
            _ => Err(Error::invalid(format!("unknown push '{s}', expected center or side"))),
        }
    }
}

fn slider_shape<T: Scalar>(shape: Shape) -> SliderShape<T> {
    match shape {
        Shape::Box => SliderShape::Box {
            half_extents: Vec2::new(T::lit(BOX_HALF_EXTENTS[0]), T::lit(BOX_HALF_EXTENTS[1])),
        },
        Shape::Disc => SliderShape::Disc {
            radius: T::lit(DISC_RADIUS),
        },
    }
}

/// Slider at the origin, pusher `PUSH_GAP` behind its -x face at lateral
/// offset `offset`. Obstacle and goal are placed out of the way.
pub fn push_scene<T: Scalar>(shape: Shape, offset: f64) -> SceneSpec<T> {
    let back = match shape {
        Shape::Box => BOX_HALF_EXTENTS[0],
        // Keep the gap along the push direction for off-centre disc pushes.
        Shape::Disc => {
            let reach = DISC_RADIUS + PUSHER_RADIUS;
            (reach * reach - offset * offset).max(0.0).sqrt() - PUSHER_RADIUS
        }
    };
    let v = |x: f64, y: f64| Vec2::new(T::lit(x), T::lit(y));
    SceneSpec {
        slider_shape: slider_shape(shape),
        slider_mass: T::lit(SLIDER_MASS),
        slider_inertia: None,
        pusher_radius: T::lit(PUSHER_RADIUS),
        support_friction_mu: T::lit(0.35),
        contact_friction_mu: T::lit(0.3),
        table_bounds: Rect::new(v(-500.0, -500.0), v(500.0, 500.0)),
        obstacle: Circle::new(v(0.0, 400.0), T::lit(40.0)),
        goal: Circle::new(v(300.0, 0.0), T::lit(30.0)),
        start_state: State::at_rest(
            v(-(back + PUSHER_RADIUS + PUSH_GAP), offset),
            Pose::new(T::zero(), T::zero(), T::zero()),
        ),
        max_push_speed: T::lit(100.0),
    }
}

pub fn canonical_scene<T: Scalar>(side: PushSide, shape: Shape) -> SceneSpec<T> {
    let offset = match side {
        PushSide::Center => 0.0,
        PushSide::Side => SIDE_OFFSET,
    };
    push_scene(shape, offset)
}

/// `[25, 0]` mm/s for four 1 s controls: 100 mm of pusher travel.
pub fn canonical_controls<T: Scalar>() -> ControlSequence<T> {
    ControlSequence::constant(Vec2::new(T::lit(PUSH_SPEED), T::zero()), 4, T::one())
}

/// `(k, error of iterate k against fine)` for `k = 0..=controls.len()`.
pub fn run_converge<T: Scalar>(
    scene: &SceneSpec<T>,
    controls: &ControlSequence<T>,
    params: &ModelParams<T>,
    workers: usize,
) -> Result<Vec<(usize, ErrorReport)>> {
    convergence_report(
        &scene.start_state,
        controls,
        controls.len(),
        &PararealConfig::new(controls.len(), workers),
        params,
        scene,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpenLoopRow {
    pub model: String,
    pub mean_trans_diff_mm: f64,
    pub mean_rot_diff_deg: f64,
}

/// Standard deviations of repeated real-world 150 mm box pushes.
pub const PUSH_DATASET_STD: (f64, f64) = (8.10, 4.20);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpenLoopProtocol {
    pub starts: usize,
    /// Push directions, degrees.
    pub angles_deg: [f64; 3],
    pub speed: f64,
    pub steps: usize,
    pub duration: f64,
}

impl Default for OpenLoopProtocol {
    fn default() -> Self {
        OpenLoopProtocol {
            starts: 100,
            angles_deg: [0.0, 15.0, -15.0],
            speed: PUSH_SPEED,
            steps: 4,
            duration: 1.5,
        }
    }
}

/// Seeded lateral pusher offsets, uniform within the slider's pushed face.
pub fn openloop_offsets(shape: Shape, starts: usize, seed: u64) -> Vec<f64> {
    let half = match shape {
        Shape::Box => BOX_HALF_EXTENTS[1],
        Shape::Disc => DISC_RADIUS,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..starts).map(|_| rng.gen_range(-half..=half)).collect()
}

/// Mean final-state differences against fine for coarse and Parareal
/// iterates `1..=steps`, over every (start, direction) pair. The start
/// offsets are evaluated on `threads` threads; results do not depend on it.
pub fn run_openloop<T: Scalar>(
    shape: Shape,
    protocol: &OpenLoopProtocol,
    params: &ModelParams<T>,
    seed: u64,
    threads: usize,
) -> Result<Vec<OpenLoopRow>> {
    let offsets = openloop_offsets(shape, protocol.starts, seed);
    let n = protocol.steps;
    let per_start = |offset: f64| -> Result<Vec<[f64; 2]>> {
        let scene = push_scene::<T>(shape, offset);
        // Per model: coarse, then parareal 1..=n.
        let mut sums = vec![[0.0; 2]; n + 1];
        for alpha in protocol.angles_deg {
            let a = alpha.to_radians();
            let vel = Vec2::new(T::lit(protocol.speed * a.cos()), T::lit(protocol.speed * a.sin()));
            let controls = ControlSequence::constant(vel, n, T::lit(protocol.duration));
            let fine = fine_rollout(&scene.start_state, &controls, &params.fine, &scene)?;
            let all = parareal_predict(
                &scene.start_state,
                &controls,
                &PararealConfig::new(n, 1),
                params,
                &scene,
            )?;
            let target = fine.last();
            for (k, traj) in all.per_iteration.iter().enumerate() {
                let s = traj.last();
                let dt = (s.slider_pose.position() - target.slider_pose.position()).norm();
                let dr = wrap(s.slider_pose.theta - target.slider_pose.theta).abs();
                sums[k][0] += dt.as_f64();
                sums[k][1] += dr.as_f64().to_degrees();
            }
        }
        Ok(sums)
    };

    let threads = threads.clamp(1, offsets.len().max(1));
    let mut partial: Vec<Option<Result<Vec<[f64; 2]>>>> = (0..offsets.len()).map(|_| None).collect();
    if threads == 1 {
        for (slot, &o) in partial.iter_mut().zip(&offsets) {
            *slot = Some(per_start(o));
        }
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let offsets = &offsets;
                    let per_start = &per_start;
                    s.spawn(move || {
                        (t..offsets.len())
                            .step_by(threads)
                            .map(|i| (i, per_start(offsets[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().map_err(|_| Error::WorkerPanicked)? {
                    partial[i] = Some(r);
                }
            }
            Ok::<_, Error>(())
        })?;
    }

    // Summed in start order so the thread count cannot change the result.
    let mut totals = vec![[0.0; 2]; n + 1];
    for p in partial {
        let p = p.expect("every start evaluated")?;
        for (t, v) in totals.iter_mut().zip(p) {
            t[0] += v[0];
            t[1] += v[1];
        }
    }
    let count = (offsets.len() * protocol.angles_deg.len()).max(1) as f64;
    Ok(totals
        .iter()
        .enumerate()
        .map(|(k, t)| OpenLoopRow {
            model: if k == 0 {
                ModelChoice::Coarse.to_string()
            } else {
                ModelChoice::Parareal(k).to_string()
            },
            mean_trans_diff_mm: t[0] / count,
            mean_rot_diff_deg: t[1] / count,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub mean_seconds: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Serial fine time over this row's time.
    pub measured_speedup: f64,
    /// From the measured per-slice coarse and fine costs; 1 for serial fine,
    /// NaN where the model does not apply.
    pub predicted_speedup: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Per-slice coarse cost, s.
    pub c_c: f64,
    /// Per-slice fine cost, s.
    pub c_f: f64,
}

impl BenchReport {
    pub fn row(&self, model: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

fn time_runs(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<Vec<f64>> {
    // One untimed warm-up run.
    f()?;
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f()?;
            Ok(t.elapsed().as_secs_f64())
        })
        .collect()
}

fn mean_ci(samples: &[f64]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Times serial fine, coarse, and Parareal at each `k` with `workers` threads.
pub fn run_bench<T: Scalar>(
    scene: &SceneSpec<T>,
    controls: &ControlSequence<T>,
    ks: &[usize],
    reps: usize,
    params: &ModelParams<T>,
    workers: usize,
) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::invalid("bench needs at least one repetition"));
    }
    let s0 = &scene.start_state;
    let n = controls.len();
    let fine = time_runs(reps, || fine_rollout(s0, controls, &params.fine, scene).map(|_| ()))?;
    let coarse = time_runs(reps, || {
        coarse_rollout(s0, controls, &params.coarse, scene).map(|_| ())
    })?;
    let (fine_mean, fl, fh) = mean_ci(&fine);
    let (coarse_mean, cl, ch) = mean_ci(&coarse);
    let c_f = fine_mean / n as f64;
    let c_c = coarse_mean / n as f64;

    let mut rows = vec![
        BenchRow {
            model: ModelChoice::Fine.to_string(),
            mean_seconds: fine_mean,
            ci95_low: fl,
            ci95_high: fh,
            measured_speedup: 1.0,
            predicted_speedup: 1.0,
        },
        BenchRow {
            model: ModelChoice::Coarse.to_string(),
            mean_seconds: coarse_mean,
            ci95_low: cl,
            ci95_high: ch,
            measured_speedup: fine_mean / coarse_mean,
            predicted_speedup: f64::NAN,
        },
    ];
    for &k in ks {
        let config = PararealConfig::new(k, workers);
        let t = time_runs(reps, || parareal_predict(s0, controls, &config, params, scene).map(|_| ()))?;
        let (mean, lo, hi) = mean_ci(&t);
        rows.push(BenchRow {
            model: ModelChoice::Parareal(k).to_string(),
            mean_seconds: mean,
            ci95_low: lo,
            ci95_high: hi,
            measured_speedup: fine_mean / mean,
            predicted_speedup: if k >= 1 {
                predicted_speedup(c_c, c_f, n, k)?
            } else {
                f64::NAN
            },
        });
    }
    Ok(BenchReport { rows, c_c, c_f })
}

/// Trajectories of a model against fine, for one canonical push.
pub fn model_error<T: Scalar>(
    model: ModelChoice,
    scene: &SceneSpec<T>,
    controls: &ControlSequence<T>,
    params: &ModelParams<T>,
    workers: usize,
) -> Result<ErrorReport> {
    let a = model.rollout(&scene.start_state, controls, params, scene, workers, true)?;
    let b = fine_rollout(&scene.start_state, controls, &params.fine, scene)?;
    trajectory_error(&a, &b)
}
