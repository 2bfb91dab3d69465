//! Long-horizon MPPI with one Gaussian policy slice per horizon step.
//!
//! Each decision samples `N` control sequences, rolls them out under
//! `q_{h+1} = q_h + dt * u_h`, scores them with a [`RolloutCost`], filters every
//! slice toward the weighted samples and executes the projected first mean.
//! Slices then shift left; the last slice is duplicated as the warm start.

use serde::{Deserialize, Serialize};

use crate::cdf::CdfField;
use crate::episode::{Episode, PlanResult, PlannerRng, StepPlanner};
use crate::error::{check_dim, Error, Result};
use crate::mppi::{
    clip_norm, draw_into, filter_update, mppi_weights, project_control, Control, GaussianPolicy,
};
use crate::planner::{check_endpoints, positive, unit_interval, AngleContext, AngleCostParams};
use crate::robot::{in_collision, Configuration, JointLimits, Scene};

/// Scores one rolled-out sequence.
pub trait RolloutCost {
    /// Called once per decision, before any rollout from `q_t` is scored.
    fn prepare(&mut self, q_t: &[f64]) -> Result<()>;

    /// `states` holds `q_1 ..= q_H` row-major, `dim` values each.
    fn rollout_cost(&self, q_t: &[f64], states: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageWeights {
    pub alpha_g: f64,
    pub alpha_c: f64,
    pub alpha_j: f64,
    pub alpha_s: f64,
}

impl Default for StageWeights {
    fn default() -> Self {
        StageWeights {
            alpha_g: 10.0,
            alpha_c: 100.0,
            alpha_j: 100.0,
            alpha_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonMppiParams {
    pub num_samples: usize,
    pub horizon: usize,
    pub beta: f64,
    /// Discount factor.
    pub gamma: f64,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub weights: StageWeights,
    pub dt: f64,
    pub max_steps: usize,
    pub allow_range: f64,
    /// Regularizer of the stay cost `1 / (|q_H - q_0| + epsilon)`.
    pub epsilon: f64,
    pub sigma_floor: f64,
    pub sigma_init: f64,
    pub u_max: f64,
}

impl Default for HorizonMppiParams {
    fn default() -> Self {
        HorizonMppiParams {
            num_samples: 200,
            horizon: 50,
            beta: 2.0,
            gamma: 1.0,
            alpha_mu: 0.5,
            alpha_sigma: 0.3,
            weights: StageWeights::default(),
            dt: 0.01,
            max_steps: 5000,
            allow_range: 0.05,
            epsilon: 1.0,
            sigma_floor: 0.5,
            sigma_init: 1.0,
            u_max: 3.0,
        }
    }
}

impl HorizonMppiParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidParameter(format!(
                "H must be at least 2 (got {})",
                self.horizon
            )));
        }
        self.engine().validate()?;
        unit_interval("gamma", self.gamma)?;
        positive("allow_range", self.allow_range)?;
        positive("epsilon", self.epsilon)?;
        let w = &self.weights;
        for (name, v) in [
            ("alpha_g", w.alpha_g),
            ("alpha_c", w.alpha_c),
            ("alpha_j", w.alpha_j),
            ("alpha_s", w.alpha_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative (got {v})"
                )));
            }
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineSettings {
        EngineSettings {
            num_samples: self.num_samples,
            horizon: self.horizon,
            beta: self.beta,
            alpha_mu: self.alpha_mu,
            alpha_sigma: self.alpha_sigma,
            dt: self.dt,
            sigma_floor: self.sigma_floor,
            sigma_init: self.sigma_init,
            u_max: self.u_max,
        }
    }
}

/// Sampling and filter settings of [`HorizonMppi`]; `horizon = 1` is allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineSettings {
    pub num_samples: usize,
    pub horizon: usize,
    pub beta: f64,
    pub alpha_mu: f64,
    pub alpha_sigma: f64,
    pub dt: f64,
    pub sigma_floor: f64,
    pub sigma_init: f64,
    pub u_max: f64,
}

impl EngineSettings {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(Error::InvalidParameter(format!(
                "N must be at least 2 (got {})",
                self.num_samples
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("H must be positive".into()));
        }
        positive("beta", self.beta)?;
        unit_interval("alpha_mu", self.alpha_mu)?;
        unit_interval("alpha_sigma", self.alpha_sigma)?;
        positive("dt", self.dt)?;
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

pub struct HorizonMppi<'a, C> {
    limits: &'a JointLimits,
    cost: C,
    settings: EngineSettings,
    slices: Vec<GaussianPolicy>,
    /// `N * H * dim` controls, sample-major.
    controls: Vec<f64>,
    states: Vec<f64>,
    costs: Vec<f64>,
}

impl<'a, C: RolloutCost> HorizonMppi<'a, C> {
    pub fn new(limits: &'a JointLimits, cost: C, settings: EngineSettings) -> Result<Self> {
        settings.validate()?;
        let dim = limits.dim();
        let (n, h) = (settings.num_samples, settings.horizon);
        Ok(HorizonMppi {
            limits,
            cost,
            slices: vec![GaussianPolicy::isotropic(dim, settings.sigma_init); h],
            controls: vec![0.0; n * h * dim],
            states: vec![0.0; h * dim],
            costs: vec![0.0; n],
            settings,
        })
    }

    pub fn slices(&self) -> &[GaussianPolicy] {
        &self.slices
    }

    pub fn cost(&self) -> &C {
        &self.cost
    }
}

impl<C: RolloutCost> StepPlanner for HorizonMppi<'_, C> {
    fn decide(&mut self, q_t: &Configuration, rng: &mut PlannerRng) -> Result<Control> {
        let s = self.settings;
        let dim = self.limits.dim();
        check_dim(dim, q_t.len())?;
        let (n, h_len) = (s.num_samples, s.horizon);
        self.cost.prepare(q_t.as_slice())?;

        let factors = self
            .slices
            .iter()
            .map(GaussianPolicy::factor)
            .collect::<Result<Vec<_>>>()?;
        let mut z = vec![0.0; dim];
        for i in 0..n {
            for (h, (slice, factor)) in self.slices.iter().zip(&factors).enumerate() {
                let at = (i * h_len + h) * dim;
                let u = &mut self.controls[at..at + dim];
                draw_into(&slice.mean, factor, rng, &mut z, u);
                clip_norm(u, s.u_max);
            }
        }

        for i in 0..n {
            let seq = &self.controls[i * h_len * dim..(i + 1) * h_len * dim];
            for h in 0..h_len {
                for k in 0..dim {
                    let prev = if h == 0 {
                        q_t[k]
                    } else {
                        self.states[(h - 1) * dim + k]
                    };
                    self.states[h * dim + k] = prev + seq[h * dim + k] * s.dt;
                }
            }
            self.costs[i] = self.cost.rollout_cost(q_t.as_slice(), &self.states);
        }

        let weights = mppi_weights(&self.costs, s.beta);
        for h in 0..h_len {
            let column = (0..n).map(|i| {
                let at = (i * h_len + h) * dim;
                &self.controls[at..at + dim]
            });
            self.slices[h] = filter_update(
                &self.slices[h],
                column,
                &weights,
                s.alpha_mu,
                s.alpha_sigma,
                s.sigma_floor,
            );
        }

        let u = project_control(&self.slices[0].mean, q_t.as_slice(), self.limits, s.dt);
        let warm = self.slices[h_len - 1].clone();
        self.slices.remove(0);
        self.slices.push(warm);
        Ok(u)
    }
}

/// `sum_h gamma^h c_h`; the last entry is expected to carry the terminal cost.
pub fn discounted_sum(costs: impl IntoIterator<Item = f64>, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for c in costs {
        total += discount * c;
        discount *= gamma;
    }
    total
}

/// Per-term breakdown of the composite rollout cost (unweighted terms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms {
    pub goal: f64,
    pub collision: f64,
    pub joint: f64,
    pub stay: f64,
}

/// Signed CDF value: `+f_c` when collision-free, `-f_c` in collision.
/// The field is only consulted in collision.
fn penetration(scene: &Scene, field: &CdfField, q: &[f64]) -> f64 {
    if in_collision(scene, q) {
        field.value(q)
    } else {
        0.0
    }
}

fn joint_violation(limits: &JointLimits, q: &[f64]) -> f64 {
    q.iter()
        .enumerate()
        .map(|(k, &x)| {
            let v = (limits.min[k] - x).max(0.0) + (x - limits.max[k]).max(0.0);
            v * v
        })
        .sum()
}

/// Collision and joint-limit part of the cost at one rollout state:
/// `alpha_c * max(0, -d_h) + alpha_j * |limit violation|^2`.
pub fn stage_cost(q_h: &[f64], scene: &Scene, field: &CdfField, weights: &StageWeights) -> f64 {
    weights.alpha_c * penetration(scene, field, q_h)
        + weights.alpha_j * joint_violation(scene.limits(), q_h)
}

/// Goal, collision, joint and stay costs of the rollout `q_0, states`.
pub fn cost_terms(
    q_0: &[f64],
    states: &[f64],
    scene: &Scene,
    field: &CdfField,
    goal: &[f64],
    epsilon: f64,
) -> CostTerms {
    let dim = q_0.len();
    assert!(!states.is_empty() && states.len().is_multiple_of(dim));
    let q_h = &states[states.len() - dim..];
    let (mut collision, mut joint) = (0.0, 0.0);
    for q in states.chunks(dim) {
        collision += penetration(scene, field, q);
        joint += joint_violation(scene.limits(), q);
    }
    CostTerms {
        goal: distance(q_h, goal),
        collision,
        joint,
        stay: 1.0 / (distance(q_h, q_0) + epsilon),
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Discounted sum of `stage_cost` over the rollout, with the goal and stay
/// terms added to the last stage.
#[derive(Debug, Clone)]
pub struct CompositeCost<'a> {
    pub scene: &'a Scene,
    pub field: &'a CdfField,
    pub goal: Configuration,
    pub weights: StageWeights,
    pub gamma: f64,
    pub epsilon: f64,
}

impl RolloutCost for CompositeCost<'_> {
    fn prepare(&mut self, _q_t: &[f64]) -> Result<()> {
        Ok(())
    }

    fn rollout_cost(&self, q_t: &[f64], states: &[f64]) -> f64 {
        let dim = q_t.len();
        let last = states.len() / dim - 1;
        let stages = states.chunks(dim).enumerate().map(|(h, q)| {
            let mut c = stage_cost(q, self.scene, self.field, &self.weights);
            if h == last {
                let w = &self.weights;
                c += w.alpha_g * distance(q, self.goal.as_slice())
                    + w.alpha_s / (distance(q, q_t) + self.epsilon);
            }
            c
        });
        discounted_sum(stages, self.gamma)
    }
}

/// Angle cost of the final rollout state relative to `q_t`.
#[derive(Debug, Clone)]
pub struct AngleTerminalCost<'a> {
    pub field: &'a CdfField,
    pub goal: Configuration,
    pub params: AngleCostParams,
    context: Option<AngleContext>,
}

impl<'a> AngleTerminalCost<'a> {
    pub fn new(field: &'a CdfField, goal: Configuration, params: AngleCostParams) -> Self {
        AngleTerminalCost {
            field,
            goal,
            params,
            context: None,
        }
    }
}

impl RolloutCost for AngleTerminalCost<'_> {
    fn prepare(&mut self, q_t: &[f64]) -> Result<()> {
        self.context = Some(AngleContext::prepare(
            self.field,
            q_t,
            self.goal.as_slice(),
            self.params.d_act,
        )?);
        Ok(())
    }

    fn rollout_cost(&self, q_t: &[f64], states: &[f64]) -> f64 {
        let ctx = self
            .context
            .as_ref()
            .expect("prepare must run before scoring");
        ctx.cost(q_t, &states[states.len() - q_t.len()..], &self.params)
    }
}

pub fn horizon_mppi_plan(
    start: &Configuration,
    goal: &Configuration,
    field: &CdfField,
    scene: &Scene,
    params: &HorizonMppiParams,
    rng: &mut PlannerRng,
) -> Result<PlanResult> {
    params.validate()?;
    check_endpoints(scene, start.as_slice(), goal.as_slice())?;
    field.ensure_compatible(scene)?;
    let cost = CompositeCost {
        scene,
        field,
        goal: goal.clone(),
        weights: params.weights,
        gamma: params.gamma,
        epsilon: params.epsilon,
    };
    let mut planner = HorizonMppi::new(scene.limits(), cost, params.engine())?;
    Episode {
        scene,
        field,
        start: start.clone(),
        goal: goal.clone(),
        dt: params.dt,
        max_steps: params.max_steps,
        allow_range: params.allow_range,
        stall: None,
    }
    .run(&mut planner, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::configuration;
    use crate::robot::TwoLinkRobot;
    use approx::assert_abs_diff_eq;

    struct Constant(f64);

    impl RolloutCost for Constant {
        fn prepare(&mut self, _: &[f64]) -> Result<()> {
            Ok(())
        }
        fn rollout_cost(&self, _: &[f64], states: &[f64]) -> f64 {
            self.0 * (states.len() / 2) as f64
        }
    }

    fn empty_field() -> (Scene, CdfField) {
        let scene = Scene::empty(TwoLinkRobot::planar_default());
        let field = CdfField::build(&scene, 32, 1e-4).unwrap();
        (scene, field)
    }

    #[test]
    fn discount_arithmetic() {
        assert_eq!(discounted_sum([2.5; 50], 1.0), 125.0);
        assert_abs_diff_eq!(discounted_sum([1.0, 1.0, 1.0], 0.5), 1.75);
        assert_eq!(discounted_sum([], 0.9), 0.0);
    }

    #[test]
    fn undiscounted_cost_is_plain_sum() {
        let (scene, field) = empty_field();
        // Two states beyond the upper limit of joint 0.
        let states = [3.5, 0.0, 3.3, 0.0];
        let q0 = [3.0, 0.0];
        let goal = configuration(&[3.0, 0.0]);
        let w = StageWeights::default();
        let cost = CompositeCost {
            scene: &scene,
            field: &field,
            goal: goal.clone(),
            weights: w,
            gamma: 1.0,
            epsilon: 0.01,
        };
        let t = cost_terms(&q0, &states, &scene, &field, goal.as_slice(), 0.01);
        let expected =
            w.alpha_g * t.goal + w.alpha_c * t.collision + w.alpha_j * t.joint + w.alpha_s * t.stay;
        assert_abs_diff_eq!(cost.rollout_cost(&q0, &states), expected, epsilon = 1e-12);
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(
            t.joint,
            (3.5 - pi).powi(2) + (3.3 - pi).powi(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn only_stay_term_survives_at_goal() {
        let (scene, field) = empty_field();
        let q0 = [0.0, 0.0];
        let states = [0.1, 0.0, 0.2, 0.1];
        let t = cost_terms(&q0, &states, &scene, &field, &[0.2, 0.1], 0.01);
        assert_eq!((t.goal, t.collision, t.joint), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(t.stay, 1.0 / (0.05f64.sqrt() + 0.01), epsilon = 1e-12);
    }

    #[test]
    fn stationary_rollout_stay_cost() {
        let (scene, field) = empty_field();
        let t = cost_terms(
            &[0.3, 0.3],
            &[0.3, 0.3, 0.3, 0.3],
            &scene,
            &field,
            &[1.0, 1.0],
            0.01,
        );
        assert_abs_diff_eq!(t.stay, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_engine_keeps_mean_and_shifts() {
        let limits = JointLimits::symmetric(2, 3.0);
        let settings = EngineSettings {
            num_samples: 50,
            horizon: 4,
            beta: 1.0,
            alpha_mu: 0.5,
            alpha_sigma: 0.5,
            dt: 0.01,
            sigma_floor: 0.05,
            sigma_init: 0.5,
            u_max: 3.0,
        };
        let mut engine = HorizonMppi::new(&limits, Constant(1.0), settings).unwrap();
        let mut rng = <PlannerRng as rand::SeedableRng>::seed_from_u64(2);
        engine
            .decide(&configuration(&[0.0, 0.0]), &mut rng)
            .unwrap();
        assert_eq!(engine.slices().len(), 4);
        assert_eq!(engine.slices()[2], engine.slices()[3]);
    }

    #[test]
    fn short_horizon_is_rejected_by_composite_params() {
        let p = HorizonMppiParams {
            horizon: 1,
            ..HorizonMppiParams::default()
        };
        assert!(p.validate().is_err());
        let p = HorizonMppiParams {
            gamma: 0.0,
            ..HorizonMppiParams::default()
        };
        assert!(p.validate().is_err());
    }
}
