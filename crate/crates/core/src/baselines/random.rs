//! Memoryless sampling: every step draws from the same zero-mean Gaussian and
//! executes the single lowest-cost sample.

use crate::cdf::CdfField;
use crate::episode::{Episode, PlanResult, PlannerRng, StepPlanner};
use crate::error::{check_dim, Result};
use crate::mppi::{clip_controls, project_control, sample_controls, Control, GaussianPolicy};
use crate::planner::{check_endpoints, AngleContext, AngleCostParams, MppiParams};
use crate::robot::{Configuration, JointLimits, Scene};

/// Uses `num_samples`, `sigma_init`, `u_max`, `dt`, `max_steps` and
/// `allow_range` from [`MppiParams`]; the filter settings are ignored.
#[derive(Debug, Clone)]
pub struct RandomSamplingPlanner<'a> {
    field: &'a CdfField,
    limits: &'a JointLimits,
    goal: Configuration,
    cost: AngleCostParams,
    params: MppiParams,
    policy: GaussianPolicy,
}

impl<'a> RandomSamplingPlanner<'a> {
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
        Ok(RandomSamplingPlanner {
            field,
            limits,
            policy: GaussianPolicy::isotropic(goal.len(), params.sigma_init),
            goal,
            cost,
            params,
        })
    }
}

impl StepPlanner for RandomSamplingPlanner<'_> {
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
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for (i, u) in controls.iter().enumerate() {
            let q_next = q_t + u * p.dt;
            let c = ctx.cost(q_t.as_slice(), q_next.as_slice(), &self.cost);
            if c < best_cost {
                best = i;
                best_cost = c;
            }
        }
        Ok(project_control(
            &controls[best],
            q_t.as_slice(),
            self.limits,
            p.dt,
        ))
    }
}

pub fn random_sampling_plan(
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
    let mut planner =
        RandomSamplingPlanner::new(field, scene.limits(), goal.clone(), *cost, *params)?;
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
    use crate::episode::PlanStatus;
    use crate::planner::configuration;
    use crate::robot::TwoLinkRobot;
    use rand::SeedableRng;

    #[test]
    fn empty_scene_reaches_nearby_goal() {
        let scene = Scene::empty(TwoLinkRobot::planar_default());
        let field = CdfField::build(&scene, 32, 1e-4).unwrap();
        let mut rng = PlannerRng::seed_from_u64(5);
        let res = random_sampling_plan(
            &configuration(&[0.2, 0.4]),
            &configuration(&[-0.3, 0.6]),
            &field,
            &scene,
            &AngleCostParams::default(),
            &MppiParams::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(res.status, PlanStatus::Reached);
    }

    #[test]
    fn seeded_runs_repeat() {
        let scene = Scene::two_link_benchmark();
        let field = CdfField::build(&scene, 64, 1e-4).unwrap();
        let params = MppiParams {
            max_steps: 300,
            ..MppiParams::default()
        };
        let run = |seed| {
            random_sampling_plan(
                &configuration(&[2.1, 1.2]),
                &configuration(&[-2.1, -0.9]),
                &field,
                &scene,
                &AngleCostParams::default(),
                &params,
                &mut PlannerRng::seed_from_u64(seed),
            )
            .unwrap()
        };
        assert!(run(3).same_motion(&run(3)));
    }
}
