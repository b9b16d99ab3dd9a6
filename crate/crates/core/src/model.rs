//! Selects which predictor rolls out a control sequence.

use std::fmt;
use std::str::FromStr;

use crate::coarse::coarse_rollout;
use crate::error::{Error, Result};
use crate::fine::fine_rollout;
use crate::parareal::{parareal_predict, ModelParams, PararealConfig};
use crate::scalar::Scalar;
use crate::scene::SceneSpec;
use crate::state::{ControlSequence, State, Trajectory};

/// `coarse`, `fine`, or `parareal:K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelChoice {
    Coarse,
    Fine,
    Parareal(usize),
}

impl ModelChoice {
    /// Rolls out `controls` from `state0`. `workers` only matters for Parareal.
    pub fn rollout<T: Scalar>(
        &self,
        state0: &State<T>,
        controls: &ControlSequence<T>,
        params: &ModelParams<T>,
        scene: &SceneSpec<T>,
        workers: usize,
        project_iterates: bool,
    ) -> Result<Trajectory<T>> {
        match *self {
            ModelChoice::Coarse => coarse_rollout(state0, controls, &params.coarse, scene),
            ModelChoice::Fine => fine_rollout(state0, controls, &params.fine, scene),
            ModelChoice::Parareal(k) => {
                let config = PararealConfig {
                    iterations: k,
                    workers,
                    project_iterates,
                };
                Ok(parareal_predict(state0, controls, &config, params, scene)?.trajectory)
            }
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelChoice::Coarse => f.write_str("coarse"),
            ModelChoice::Fine => f.write_str("fine"),
            ModelChoice::Parareal(k) => write!(f, "parareal:{k}"),
        }
    }
}

impl FromStr for ModelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "coarse" => Ok(ModelChoice::Coarse),
            "fine" => Ok(ModelChoice::Fine),
            other => other
                .strip_prefix("parareal:")
                .and_then(|k| k.parse().ok())
                .map(ModelChoice::Parareal)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "unknown model '{other}', expected coarse, fine or parareal:K"
                    ))
                }),
        }
    }
}
