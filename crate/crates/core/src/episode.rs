//! Closed-loop execution shared by every planner: apply the chosen control
//! under `q_{t+1} = q_t + dt * u`, then check collision, goal and stall.

use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::path_length;
use crate::cdf::CdfField;
use crate::error::{Error, Result};
use crate::mppi::Control;
use crate::robot::{in_collision, Configuration, Scene};

pub type PlannerRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Reached,
    Collided,
    MaxSteps { stalled: bool },
    InContactStart,
    JointLimit,
}

impl PlanStatus {
    pub fn is_success(self) -> bool {
        self == PlanStatus::Reached
    }

    /// Failure bucket used in reports; `None` for success.
    pub fn failure_cause(self) -> Option<&'static str> {
        match self {
            PlanStatus::Reached => None,
            PlanStatus::Collided => Some("collided"),
            PlanStatus::MaxSteps { .. } => Some("max_steps"),
            PlanStatus::InContactStart => Some("in_contact_start"),
            PlanStatus::JointLimit => Some("joint_limit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Executed configurations `q_0 ..= q_T`; empty when the start was rejected.
    pub trajectory: Vec<Configuration>,
    pub status: PlanStatus,
    pub steps: usize,
    pub path_length: f64,
    /// Wall time of each planner decision.
    pub decision_times: Vec<Duration>,
}

impl PlanResult {
    pub fn rejected_start() -> Self {
        PlanResult {
            trajectory: Vec::new(),
            status: PlanStatus::InContactStart,
            steps: 0,
            path_length: 0.0,
            decision_times: Vec::new(),
        }
    }

    /// Trajectory comparison ignoring timings.
    pub fn same_motion(&self, other: &PlanResult) -> bool {
        self.status == other.status
            && self.steps == other.steps
            && self.trajectory == other.trajectory
    }
}

/// One receding-horizon controller.
pub trait StepPlanner {
    /// Control to execute from `q_t`. It must keep `q_t + dt * u` inside the
    /// joint limits unless the planner deliberately skips projection.
    fn decide(&mut self, q_t: &Configuration, rng: &mut PlannerRng) -> Result<Control>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StallRule {
    pub window: usize,
    pub min_motion: f64,
}

impl Default for StallRule {
    fn default() -> Self {
        StallRule {
            window: 50,
            min_motion: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode<'a> {
    pub scene: &'a Scene,
    pub field: &'a CdfField,
    pub start: Configuration,
    pub goal: Configuration,
    pub dt: f64,
    pub max_steps: usize,
    pub allow_range: f64,
    pub stall: Option<StallRule>,
}

impl Episode<'_> {
    /// Starts that collide or sit on the contact set are refused outright.
    pub fn start_rejected(&self) -> bool {
        in_collision(self.scene, self.start.as_slice())
            || self.field.value(self.start.as_slice()) <= self.field.refine_tol()
    }

    pub fn run(&self, planner: &mut dyn StepPlanner, rng: &mut PlannerRng) -> Result<PlanResult> {
        if self.start_rejected() {
            return Ok(PlanResult::rejected_start());
        }
        let limits = self.scene.limits();
        let mut trajectory = vec![self.start.clone()];
        let mut decision_times = Vec::new();
        let mut status = PlanStatus::MaxSteps { stalled: false };

        for t in 0..self.max_steps {
            let q_t = &trajectory[t];
            let clock = Instant::now();
            let decision = planner.decide(q_t, rng);
            decision_times.push(clock.elapsed());
            let u = match decision {
                Ok(u) => u,
                Err(Error::GradientUndefined { .. }) => {
                    status = PlanStatus::Collided;
                    break;
                }
                Err(e) => return Err(e),
            };
            let q_next: Configuration = q_t + &u * self.dt;
            trajectory.push(q_next);
            let q_next = &trajectory[t + 1];

            if !limits.contains(q_next.as_slice()) {
                status = PlanStatus::JointLimit;
                break;
            }
            if in_collision(self.scene, q_next.as_slice()) {
                status = PlanStatus::Collided;
                break;
            }
            if (q_next - &self.goal).norm() < self.allow_range {
                status = PlanStatus::Reached;
                break;
            }
            if let Some(rule) = self.stall {
                let stalled = t + 1 >= rule.window
                    && (q_next - &trajectory[t + 1 - rule.window]).norm() < rule.min_motion;
                if stalled {
                    status = PlanStatus::MaxSteps { stalled: true };
                    break;
                }
            }
        }

        Ok(PlanResult {
            steps: trajectory.len() - 1,
            path_length: path_length(&trajectory),
            trajectory,
            status,
            decision_times,
        })
    }
}
