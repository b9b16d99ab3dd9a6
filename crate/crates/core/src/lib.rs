//! Hybrid coarse/fine physics prediction for planar pushing.
//!
//! A kinematic pushing model ([`coarse`]) and a small-substep penalty
//! simulator ([`fine`]) are combined by Parareal ([`parareal`]) into a family
//! of predictors that trade accuracy for wall-clock time. The predictors
//! drive a sampling-based trajectory optimizer ([`optimizer`]) inside a
//! receding-horizon controller ([`mpc`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coarse;
pub mod error;
pub mod experiments;
pub mod fine;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod model;
pub mod mpc;
pub mod optimizer;
pub mod parareal;
pub mod scalar;
pub mod scene;
pub mod state;
pub mod vec2;

pub use coarse::{coarse_rollout, coarse_step, CoarseParams};
pub use error::{Error, Result, SceneViolation};
pub use fine::{fine_rollout, fine_step, PhysicsParams, SupportFriction};
pub use geometry::{
    penetration, project_feasible, project_feasible_with_tolerance, sweep_contact, ContactQuery,
    SweepResult, PENETRATION_TOLERANCE,
};
pub use metrics::{trajectory_error, trajectory_error_with, ErrorOptions, ErrorReport};
pub use model::ModelChoice;
pub use mpc::{
    benchmark_scene, benchmark_scenes, run_benchmark, run_episode, BenchmarkTable, EpisodeResult,
    EpisodeSetup, MPCConfig, Outcome,
};
pub use optimizer::{
    final_cost, optimize, running_cost, trajectory_cost, CostWeights, OptimizerConfig, Optimized,
    RolloutSettings,
};
pub use parareal::{
    convergence_report, parareal_predict, predicted_speedup, ModelParams, PararealConfig,
    PararealResult,
};
pub use scalar::Scalar;
pub use scene::{validate_scene, Circle, Rect, SceneSpec, SliderShape};
pub use state::{wrap_angle, Control, ControlSequence, ModelTag, Pose, State, Trajectory, Twist};
pub use vec2::Vec2;

pub type Vec2F = Vec2<f64>;
pub type PoseF = Pose<f64>;
pub type StateF = State<f64>;
pub type ControlF = Control<f64>;
pub type ControlsF = ControlSequence<f64>;
pub type TrajectoryF = Trajectory<f64>;
pub type SceneF = SceneSpec<f64>;
pub type PhysicsParamsF = PhysicsParams<f64>;
pub type CoarseParamsF = CoarseParams<f64>;
pub type ModelParamsF = ModelParams<f64>;
pub type CostWeightsF = CostWeights<f64>;
