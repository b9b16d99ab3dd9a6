//! Scene files and the CSV formats written by the experiment runners.
//!
//! Floats are printed with Rust's shortest round-trip formatting, so every
//! CSV parses back to the exact values that were written.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coarse::CoarseParams;
use crate::error::Result;
use crate::experiments::{BenchReport, OpenLoopRow, PUSH_DATASET_STD};
use crate::fine::PhysicsParams;
use crate::metrics::ErrorReport;
use crate::mpc::{EpisodeSetup, MPCConfig, SummaryRow};
use crate::optimizer::{CostWeights, OptimizerConfig};
use crate::parareal::{ModelParams, PararealConfig};
use crate::scalar::Scalar;
use crate::scene::{validate_scene, SceneSpec};
use crate::state::Trajectory;

pub const TRAJECTORY_CSV_HEADER: &str = "step,t,pusher_x,pusher_y,slider_x,slider_y,slider_theta,pusher_vx,pusher_vy,slider_vx,slider_vy,slider_omega";
pub const CONVERGE_CSV_HEADER: &str = "k,trans_rms,rot_rms,vel_rms,angvel_rms";
pub const BENCH_CSV_HEADER: &str =
    "model,mean_seconds,ci95_low,ci95_high,measured_speedup,predicted_speedup";
pub const OPENLOOP_CSV_HEADER: &str = "model,mean_trans_diff_mm,mean_rot_diff_deg";
pub const SUMMARY_CSV_HEADER: &str = "scene,model,episodes,successes,aborted,success_rate,mean_planning_seconds,std_planning_seconds,mean_actions";

/// Model label of the reference row in the open-loop CSV.
pub const PUSH_DATASET_ROW: &str = "push_dataset_std";

/// A scene document: the [`SceneSpec`] fields at the top level, plus
/// optional solver sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SceneFile<T> {
    #[serde(flatten)]
    pub scene: SceneSpec<T>,
    #[serde(default)]
    pub physics: PhysicsParams<T>,
    #[serde(default)]
    pub coarse: CoarseParams<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parareal: Option<PararealConfig>,
    #[serde(default)]
    pub cost: CostWeights<T>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub mpc: MPCConfig,
}

impl<T: Scalar> SceneFile<T> {
    /// Default solver sections around `scene`.
    pub fn new(scene: SceneSpec<T>) -> Self {
        SceneFile {
            scene,
            physics: PhysicsParams::default(),
            coarse: CoarseParams::default(),
            parareal: None,
            cost: CostWeights::default(),
            optimizer: OptimizerConfig::default(),
            mpc: MPCConfig::default(),
        }
    }

    /// Parses and validates every section. A missing inertia is filled in.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: SceneFile<T> = serde_json::from_str(text)?;
        raw.validated()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validated(mut self) -> Result<Self> {
        self.scene = validate_scene(self.scene)?;
        self.model_params().validate()?;
        self.cost.validate()?;
        self.optimizer.validate()?;
        self.mpc.validate()?;
        Ok(self)
    }

    pub fn model_params(&self) -> ModelParams<T> {
        ModelParams {
            fine: self.physics,
            coarse: self.coarse,
        }
    }

    pub fn episode_setup(&self, workers: usize) -> EpisodeSetup<T> {
        EpisodeSetup {
            mpc: self.mpc,
            optimizer: self.optimizer,
            weights: self.cost,
            params: self.model_params(),
            workers,
        }
    }
}

/// One row per state; `t` is the step index times the control duration.
pub fn trajectory_csv<T: Scalar>(traj: &Trajectory<T>) -> String {
    let mut out = format!("{TRAJECTORY_CSV_HEADER}\n");
    let dt = traj.duration.as_f64();
    for (i, s) in traj.states.iter().enumerate() {
        let _ = write!(out, "{i},{}", i as f64 * dt);
        for v in [
            s.pusher_pos.x,
            s.pusher_pos.y,
            s.slider_pose.x,
            s.slider_pose.y,
            s.slider_pose.theta,
            s.pusher_vel.x,
            s.pusher_vel.y,
            s.slider_vel.vx,
            s.slider_vel.vy,
            s.slider_vel.omega,
        ] {
            let _ = write!(out, ",{}", v.as_f64());
        }
        out.push('\n');
    }
    out
}

/// Row `k` holds iterate `k`'s error against fine.
pub fn converge_csv(reports: &[ErrorReport]) -> String {
    let mut out = format!("{CONVERGE_CSV_HEADER}\n");
    for (k, r) in reports.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{}",
            r.trans_rms, r.rot_rms, r.vel_rms, r.angvel_rms
        );
    }
    out
}

pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.model,
            r.mean_seconds,
            r.ci95_low,
            r.ci95_high,
            r.measured_speedup,
            r.predicted_speedup
        );
    }
    out
}

/// The model rows followed by the real-world dataset's published standard
/// deviations.
pub fn openloop_csv(rows: &[OpenLoopRow]) -> String {
    let mut out = format!("{OPENLOOP_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.model, r.mean_trans_diff_mm, r.mean_rot_diff_deg);
    }
    let _ = writeln!(
        out,
        "{PUSH_DATASET_ROW},{},{}",
        PUSH_DATASET_STD.0, PUSH_DATASET_STD.1
    );
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.scene,
            r.model,
            r.episodes,
            r.successes,
            r.aborted,
            r.success_rate,
            r.mean_planning_seconds,
            r.std_planning_seconds,
            r.mean_actions
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{canonical_controls, canonical_scene, PushSide, Shape};
    use crate::fine::fine_rollout;

    #[test]
    fn scene_file_round_trips() {
        let file = SceneFile::new(canonical_scene::<f64>(PushSide::Center, Shape::Box));
        let text = file.to_json().unwrap();
        let back = SceneFile::<f64>::from_json(&text).unwrap();
        assert_eq!(back.scene.slider_shape, file.scene.slider_shape);
        assert_eq!(back.scene.start_state, file.scene.start_state);
        assert_eq!(back.physics, file.physics);
        assert_eq!(back.cost, file.cost);
        assert!(back.scene.slider_inertia.is_some());
    }

    #[test]
    fn sections_are_optional_and_partial() {
        let mut v = serde_json::to_value(canonical_scene::<f64>(PushSide::Side, Shape::Disc)).unwrap();
        v["physics"] = serde_json::json!({ "contact_stiffness": 80.0 });
        v["optimizer"] = serde_json::json!({ "rng_seed": 9 });
        let file = SceneFile::<f64>::from_json(&v.to_string()).unwrap();
        assert_eq!(file.physics.contact_stiffness, 80.0);
        assert_eq!(file.physics.substep, PhysicsParams::<f64>::default().substep);
        assert_eq!(file.optimizer.rng_seed, 9);
        assert_eq!(file.mpc, MPCConfig::default());
    }

    #[test]
    fn invalid_scene_is_rejected() {
        let mut v = serde_json::to_value(canonical_scene::<f64>(PushSide::Center, Shape::Disc)).unwrap();
        v["obstacle"]["radius"] = serde_json::json!(0.0);
        let err = SceneFile::<f64>::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("obstacle.radius"), "{err}");
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let scene = canonical_scene::<f64>(PushSide::Side, Shape::Box);
        let traj = fine_rollout(&scene.start_state, &canonical_controls(), &Default::default(), &scene).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_CSV_HEADER));
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 5);
        for (row, s) in rows.iter().zip(&traj.states) {
            assert_eq!(row[4], s.slider_pose.x);
            assert_eq!(row[6], s.slider_pose.theta);
            assert_eq!(row[11], s.slider_vel.omega);
        }
        assert_eq!(rows[4][1], 4.0);
    }

    #[test]
    fn openloop_csv_ends_with_reference_row() {
        let csv = openloop_csv(&[]);
        assert_eq!(csv, format!("{OPENLOOP_CSV_HEADER}\npush_dataset_std,8.1,4.2\n"));
    }
}
