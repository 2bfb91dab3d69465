//! One-step MPPI in configuration space.
//!
//! Every decision samples `N` single-step joint velocities, scores each
//! predicted configuration with the angle cost `alpha1 * theta1 + alpha2 * theta2`
//! and filters the Gaussian policy toward the low-cost samples. The executed
//! control is the updated mean, clipped so the next configuration stays inside
//! the joint box.
//!
//! `theta2` is the angle between the motion and the goal direction. `theta1` is
//! the angle between the motion and the CDF escape direction, counted only when
//! the motion heads into the obstacle (`theta1 >= pi/2`), the obstacle is closer
//! than `d_act`, and the obstacle is closer than the goal.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cdf::CdfField;
use crate::episode::{Episode, PlanResult, PlannerRng, StepPlanner};
use crate::error::{check_dim, Error, Result};
use crate::mppi::{
    clip_controls, mppi_weights, project_control, sample_controls, update_policy, Control,
    GaussianPolicy,
};
use crate::robot::{Configuration, JointLimits, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleCostParams {
    pub alpha1: f64,
    pub alpha2: f64,
    /// CDF value (radians) above which the obstacle angle is ignored.
    pub d_act: f64,
}

impl Default for AngleCostParams {
    fn default() -> Self {
        AngleCostParams {
            alpha1: 20.0,
            alpha2: 10.0,
            d_act: 0.5,
        }
    }
}

impl AngleCostParams {
    pub fn validate(&self) -> Result<()> {
        positive("alpha1", self.alpha1)?;
        positive("alpha2", self.alpha2)?;
        positive("d_act", self.d_act)
    }

    /// Cost assigned to samples whose motion vector is zero.
    pub fn max_cost(&self) -> f64 {
        self.alpha1 * PI + self.alpha2 * PI
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MppiParams {
    pub num_samples: usize,
    pub beta: f64,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    /// Seconds.
    pub dt: f64,
    pub max_steps: usize,
    /// Goal tolerance, radians.
    pub allow_range: f64,
    /// Lower bound on the policy standard deviation, rad/s.
    pub sigma_floor: f64,
    /// Initial isotropic standard deviation, rad/s.
    pub sigma_init: f64,
    /// Bound on the norm of every sampled control, rad/s.
    pub u_max: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        MppiParams {
            num_samples: 200,
            beta: 1.0,
            alpha_mu: 0.5,
            alpha_sigma: 0.5,
            dt: 0.01,
            max_steps: 5000,
            allow_range: 0.05,
            sigma_floor: 0.2,
            sigma_init: 1.0,
            u_max: 3.0,
        }
    }
}

impl MppiParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "N must be at least 2 (got {})",
                self.num_samples
            )));
        }
        positive("beta", self.beta)?;
        unit_interval("alpha_mu", self.alpha_mu)?;
        unit_interval("alpha_sigma", self.alpha_sigma)?;
        positive("dt", self.dt)?;
        positive("allow_range", self.allow_range)?;
        positive("sigma_init", self.sigma_init)?;
        positive("u_max", self.u_max)?;
        if !(self.sigma_floor.is_finite() && self.sigma_floor >= 0.0) {
            return Err(Error::InvalidParameter(
                "sigma_floor must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive (got {v})"
        )))
    }
}

pub(crate) fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1] (got {v})"
        )))
    }
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

/// Angle in `[0, pi]` between the motion `q_next - q_t` and the goal direction `q_f - q_t`.
pub fn theta2(q_t: &[f64], q_next: &[f64], q_f: &[f64]) -> Result<f64> {
    let motion = difference(q_next, q_t);
    let goal = difference(q_f, q_t);
    if is_zero(&motion) {
        return Err(Error::Degenerate("zero-length motion vector"));
    }
    if is_zero(&goal) {
        return Err(Error::Degenerate("zero-length goal vector"));
    }
    Ok(angle_between(&motion, &goal))
}

/// Obstacle angle with its three zeroing conditions applied.
pub fn theta1(
    q_t: &[f64],
    q_next: &[f64],
    q_f: &[f64],
    field: &CdfField,
    d_act: f64,
) -> Result<f64> {
    let ctx = AngleContext::prepare(field, q_t, q_f, d_act)?;
    let motion = difference(q_next, q_t);
    if is_zero(&motion) {
        return Err(Error::Degenerate("zero-length motion vector"));
    }
    Ok(ctx.obstacle_angle(&motion))
}

pub fn angle_cost(theta1: f64, theta2: f64, params: &AngleCostParams) -> f64 {
    params.alpha1 * theta1 + params.alpha2 * theta2
}

/// Per-step quantities of the angle cost that depend only on `q_t`: the CDF
/// value, the escape direction (when the obstacle term is live) and the goal vector.
#[derive(Debug, Clone)]
pub struct AngleContext {
    pub distance: f64,
    pub escape: Option<Vec<f64>>,
    pub goal_vec: Vec<f64>,
}

impl AngleContext {
    pub fn prepare(field: &CdfField, q_t: &[f64], q_f: &[f64], d_act: f64) -> Result<Self> {
        check_dim(field.dim(), q_t.len())?;
        let hit = field.query(q_t);
        let goal_vec = difference(q_f, q_t);
        let goal_dist = goal_vec.iter().map(|x| x * x).sum::<f64>().sqrt();
        let live = hit.value < d_act && hit.value < goal_dist;
        let escape = if live {
            Some(field.gradient_from(q_t, &hit)?)
        } else {
            None
        };
        Ok(AngleContext {
            distance: hit.value,
            escape,
            goal_vec,
        })
    }

    fn obstacle_angle(&self, motion: &[f64]) -> f64 {
        match &self.escape {
            Some(g) => {
                let a = angle_between(motion, g);
                if a < PI / 2.0 {
                    0.0
                } else {
                    a
                }
            }
            None => 0.0,
        }
    }

    /// Angle cost of moving from `q_t` to `q_next`.
    pub fn cost(&self, q_t: &[f64], q_next: &[f64], params: &AngleCostParams) -> f64 {
        let motion = difference(q_next, q_t);
        if is_zero(&motion) || is_zero(&self.goal_vec) {
            return params.max_cost();
        }
        let t2 = angle_between(&motion, &self.goal_vec);
        let t1 = self.obstacle_angle(&motion);
        angle_cost(t1, t2, params)
    }
}

/// Stateful one-step MPPI controller for a fixed goal.
#[derive(Debug, Clone)]
pub struct OneStepPlanner<'a> {
    field: &'a CdfField,
    limits: &'a JointLimits,
    goal: Configuration,
    cost: AngleCostParams,
    params: MppiParams,
    policy: GaussianPolicy,
}

impl<'a> OneStepPlanner<'a> {
    pub fn new(
        field: &'a CdfField,
        limits: &'a JointLimits,
        goal: Configuration,
        cost: AngleCostParams,
        params: MppiParams,
    ) -> Result<Self> {
        cost.validate()?;
        params.validate()?;
        check_dim(field.dim(), goal.len())?;
        Ok(OneStepPlanner {
            field,
            limits,
            policy: GaussianPolicy::isotropic(goal.len(), params.sigma_init),
            goal,
            cost,
            params,
        })
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.policy
    }
}

impl StepPlanner for OneStepPlanner<'_> {
    fn decide(&mut self, q_t: &Configuration, rng: &mut PlannerRng) -> Result<Control> {
        let p = &self.params;
        let ctx = AngleContext::prepare(
            self.field,
            q_t.as_slice(),
            self.goal.as_slice(),
            self.cost.d_act,
        )?;
        let mut controls = sample_controls(&self.policy, p.num_samples, rng)?;
        clip_controls(&mut controls, p.u_max);
        let costs: Vec<f64> = controls
            .iter()
            .map(|u| {
                let q_next = q_t + u * p.dt;
                ctx.cost(q_t.as_slice(), q_next.as_slice(), &self.cost)
            })
            .collect();
        let weights = mppi_weights(&costs, p.beta);
        self.policy = update_policy(
            &self.policy,
            &controls,
            &weights,
            p.alpha_mu,
            p.alpha_sigma,
            p.sigma_floor,
        );
        Ok(project_control(
            &self.policy.mean,
            q_t.as_slice(),
            self.limits,
            p.dt,
        ))
    }
}

pub(crate) fn check_endpoints(scene: &Scene, start: &[f64], goal: &[f64]) -> Result<()> {
    check_dim(scene.dim(), start.len())?;
    check_dim(scene.dim(), goal.len())?;
    for (name, q) in [("start", start), ("goal", goal)] {
        if !scene.limits().contains(q) {
            return Err(Error::InvalidParameter(format!(
                "{name} {q:?} lies outside the joint limits"
            )));
        }
    }
    Ok(())
}

/// Runs the one-step planner from `start` to `goal` until the goal tolerance,
/// a collision, or `max_steps`.
pub fn plan(
    start: &Configuration,
    goal: &Configuration,
    field: &CdfField,
    scene: &Scene,
    cost: &AngleCostParams,
    params: &MppiParams,
    rng: &mut PlannerRng,
) -> Result<PlanResult> {
    check_endpoints(scene, start.as_slice(), goal.as_slice())?;
    field.ensure_compatible(scene)?;
    let mut planner = OneStepPlanner::new(field, scene.limits(), goal.clone(), *cost, *params)?;
    let episode = Episode {
        scene,
        field,
        start: start.clone(),
        goal: goal.clone(),
        dt: params.dt,
        max_steps: params.max_steps,
        allow_range: params.allow_range,
        stall: None,
    };
    episode.run(&mut planner, rng)
}

pub fn configuration(values: &[f64]) -> Configuration {
    DVector::from_column_slice(values)
}
