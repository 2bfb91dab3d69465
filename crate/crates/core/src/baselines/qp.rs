//! Reactive QP tracking controller with a CDF log-barrier constraint.
//!
//! Per step it solves
//!
//! ```text
//! min_u  (e + dt u)^T H (e + dt u) + u^T R u,    e = q_t - q_f
//! s.t.   lo <= u <= hi                            (control box and joint limits)
//!        -dt grad f(q_t)^T u <= ln(f(q_t) + gamma)
//! ```
//!
//! by enumerating every active set of the box faces and the barrier. With
//! `n <= 7` joints that is at most `3^7 * 2` small linear solves.

use nalgebra::{DMatrix, DVector};

use crate::cdf::CdfField;
use crate::episode::{Episode, PlanResult, PlannerRng, StallRule, StepPlanner};
use crate::error::{check_dim, Error, Result};
use crate::mppi::{project_control, Control};
use crate::planner::{check_endpoints, positive};
use crate::robot::{Configuration, JointLimits, Scene};

const MAX_DIM: usize = 7;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpParams {
    /// Tracking weight, SPD.
    pub h_matrix: DMatrix<f64>,
    /// Control weight, SPD.
    pub r_matrix: DMatrix<f64>,
    /// Per-joint control bounds `[min, max]`, rad/s.
    pub u_bounds: [f64; 2],
    pub gamma_qp: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub allow_range: f64,
}

impl Default for QpParams {
    fn default() -> Self {
        QpParams::diagonal(&[100.0, 35.0], &[0.01, 0.01])
    }
}

impl QpParams {
    pub fn diagonal(h: &[f64], r: &[f64]) -> Self {
        QpParams {
            h_matrix: DMatrix::from_diagonal(&DVector::from_column_slice(h)),
            r_matrix: DMatrix::from_diagonal(&DVector::from_column_slice(r)),
            u_bounds: [-3.0, 3.0],
            gamma_qp: 0.6,
            dt: 0.01,
            max_steps: 5000,
            allow_range: 0.05,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        for (name, m) in [("H", &self.h_matrix), ("R", &self.r_matrix)] {
            check_dim(dim, m.nrows())?;
            check_dim(dim, m.ncols())?;
            let symmetric = (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
            if !symmetric || m.clone().cholesky().is_none() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be symmetric positive definite"
                )));
            }
        }
        if dim > MAX_DIM {
            return Err(Error::UnsupportedDimension(dim));
        }
        let [lo, hi] = self.u_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "U = [{lo}, {hi}] is not an interval"
            )));
        }
        positive("gamma_qp", self.gamma_qp)?;
        positive("dt", self.dt)?;
        positive("allow_range", self.allow_range)
    }
}

/// One QP instance in the form `min 1/2 u^T P u + c^T u + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// `a^T u <= b`; absent when no obstacle is in range of the field.
    pub barrier: Option<(DVector<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: Control,
    pub objective: f64,
    /// The barrier was dropped because no control in the box satisfies it.
    pub relaxed: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Face {
    Free,
    Lower,
    Upper,
}

impl QpProblem {
    pub fn build(
        q_t: &[f64],
        q_f: &[f64],
        field: &CdfField,
        limits: &JointLimits,
        params: &QpParams,
    ) -> Result<Self> {
        let n = q_t.len();
        check_dim(n, q_f.len())?;
        check_dim(n, limits.dim())?;
        params.validate(n)?;
        let dt = params.dt;
        let e = DVector::from_fn(n, |i, _| q_t[i] - q_f[i]);
        let he = &params.h_matrix * &e;
        let hessian = (&params.h_matrix * (dt * dt) + &params.r_matrix) * 2.0;
        let linear = &he * (2.0 * dt);
        let constant = e.dot(&he);
        let [u_lo, u_hi] = params.u_bounds;
        let lower = DVector::from_fn(n, |i, _| u_lo.max((limits.min[i] - q_t[i]) / dt));
        let upper = DVector::from_fn(n, |i, _| u_hi.min((limits.max[i] - q_t[i]) / dt));
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidParameter(
                "control box and joint limits leave no admissible control".into(),
            ));
        }
        let hit = field.query(q_t);
        let barrier = if hit.value.is_finite() {
            let grad = field.gradient_from(q_t, &hit)?;
            let a = DVector::from_iterator(n, grad.iter().map(|g| -dt * g));
            Some((a, (hit.value + params.gamma_qp).ln()))
        } else {
            None
        };
        Ok(QpProblem {
            hessian,
            linear,
            constant,
            lower,
            upper,
            barrier,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.hessian * u)) + self.linear.dot(u) + self.constant
    }

    pub fn barrier_slack(&self, u: &DVector<f64>) -> Option<f64> {
        self.barrier.as_ref().map(|(a, b)| b - a.dot(u))
    }

    pub fn in_box(&self, u: &DVector<f64>, tol: f64) -> bool {
        (0..self.dim()).all(|i| u[i] >= self.lower[i] - tol && u[i] <= self.upper[i] + tol)
    }

    pub fn solve(&self) -> QpSolution {
        if let Some(u) = self.best_over_active_sets(true) {
            return self.finish(u, false);
        }
        let u = self
            .best_over_active_sets(false)
            .expect("a nonempty box always holds the box-only optimum");
        self.finish(u, true)
    }

    fn finish(&self, mut u: DVector<f64>, relaxed: bool) -> QpSolution {
        for i in 0..self.dim() {
            u[i] = u[i].clamp(self.lower[i], self.upper[i]);
        }
        QpSolution {
            objective: self.objective(&u),
            u,
            relaxed,
        }
    }

    fn best_over_active_sets(&self, with_barrier: bool) -> Option<DVector<f64>> {
        let n = self.dim();
        let barrier = if with_barrier {
            self.barrier.as_ref()
        } else {
            None
        };
        let mut faces = vec![Face::Free; n];
        let mut best: Option<(f64, DVector<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            for f in faces.iter_mut() {
                *f = [Face::Free, Face::Lower, Face::Upper][c % 3];
                c /= 3;
            }
            let barrier_options: &[bool] = if barrier.is_some() {
                &[false, true]
            } else {
                &[false]
            };
            for &active in barrier_options {
                let Some(u) = self.solve_equality(&faces, if active { barrier } else { None })
                else {
                    continue;
                };
                if !self.in_box(&u, FEAS_TOL) {
                    continue;
                }
                if let Some((a, b)) = barrier {
                    if a.dot(&u) > b + FEAS_TOL {
                        continue;
                    }
                }
                let obj = self.objective(&u);
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, u));
                }
            }
        }
        best.map(|(_, u)| u)
    }

    /// Minimizer with the given box faces fixed and, optionally, the barrier
    /// held with equality. `None` when that system is singular.
    fn solve_equality(
        &self,
        faces: &[Face],
        barrier: Option<&(DVector<f64>, f64)>,
    ) -> Option<DVector<f64>> {
        let n = self.dim();
        let mut u = DVector::zeros(n);
        let mut free = Vec::with_capacity(n);
        for (i, f) in faces.iter().enumerate() {
            match f {
                Face::Free => free.push(i),
                Face::Lower => u[i] = self.lower[i],
                Face::Upper => u[i] = self.upper[i],
            }
        }
        let m = free.len();
        let extra = usize::from(barrier.is_some());
        if m == 0 {
            return if extra == 0 { Some(u) } else { None };
        }
        let size = m + extra;
        let mut kkt = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        for (r, &i) in free.iter().enumerate() {
            let mut acc = -self.linear[i];
            for j in 0..n {
                if faces[j] != Face::Free {
                    acc -= self.hessian[(i, j)] * u[j];
                }
            }
            rhs[r] = acc;
            for (c, &j) in free.iter().enumerate() {
                kkt[(r, c)] = self.hessian[(i, j)];
            }
        }
        if let Some((a, b)) = barrier {
            let scale = free.iter().map(|&i| a[i].abs()).fold(0.0, f64::max);
            if scale <= 1e-14 * a.amax().max(f64::MIN_POSITIVE) {
                return None;
            }
            let mut fixed = 0.0;
            for j in 0..n {
                if faces[j] != Face::Free {
                    fixed += a[j] * u[j];
                }
            }
            for (r, &i) in free.iter().enumerate() {
                kkt[(r, m)] = a[i];
                kkt[(m, r)] = a[i];
            }
            rhs[m] = b - fixed;
        }
        let sol = kkt.lu().solve(&rhs)?;
        for (r, &i) in free.iter().enumerate() {
            u[i] = sol[r];
        }
        Some(u)
    }
}

/// Smallest `|grad + sum lambda_j n_j|` over nonnegative multipliers of the
/// constraints active at `u` (within `active_tol`), where `n_j` are the
/// outward normals. Zero means `u` is a KKT point.
pub fn kkt_residual(problem: &QpProblem, u: &DVector<f64>, active_tol: f64) -> f64 {
    let n = problem.dim();
    let grad = &problem.hessian * u + &problem.linear;
    let mut normals: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        if (u[i] - problem.lower[i]).abs() <= active_tol {
            normals.push(-DVector::from_fn(n, |k, _| f64::from(k == i)));
        }
        if (problem.upper[i] - u[i]).abs() <= active_tol {
            normals.push(DVector::from_fn(n, |k, _| f64::from(k == i)));
        }
    }
    if let Some((a, b)) = &problem.barrier {
        if (b - a.dot(u)).abs() <= active_tol {
            normals.push(a.clone());
        }
    }
    let mut best = grad.norm();
    for mask in 1..(1usize << normals.len()) {
        let chosen: Vec<&DVector<f64>> = (0..normals.len())
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| &normals[j])
            .collect();
        let basis = DMatrix::from_columns(&chosen.iter().map(|v| (*v).clone()).collect::<Vec<_>>());
        let Ok(lambda) = basis.clone().svd(true, true).solve(&(-&grad), 1e-12) else {
            continue;
        };
        if lambda.iter().any(|&l| l < -1e-9) {
            continue;
        }
        best = best.min((&grad + &basis * &lambda).norm());
    }
    best
}

pub fn qp_step(
    q_t: &[f64],
    q_f: &[f64],
    field: &CdfField,
    limits: &JointLimits,
    params: &QpParams,
) -> Result<QpSolution> {
    Ok(QpProblem::build(q_t, q_f, field, limits, params)?.solve())
}

#[derive(Debug, Clone)]
pub struct QpPlanner<'a> {
    field: &'a CdfField,
    limits: &'a JointLimits,
    goal: Configuration,
    params: QpParams,
    /// Number of decisions that dropped the barrier.
    pub relaxed_steps: usize,
}

impl<'a> QpPlanner<'a> {
    pub fn new(
        field: &'a CdfField,
        limits: &'a JointLimits,
        goal: Configuration,
        params: QpParams,
    ) -> Result<Self> {
        params.validate(goal.len())?;
        Ok(QpPlanner {
            field,
            limits,
            goal,
            params,
            relaxed_steps: 0,
        })
    }
}

impl StepPlanner for QpPlanner<'_> {
    fn decide(&mut self, q_t: &Configuration, _rng: &mut PlannerRng) -> Result<Control> {
        let sol = qp_step(
            q_t.as_slice(),
            self.goal.as_slice(),
            self.field,
            self.limits,
            &self.params,
        )?;
        if sol.relaxed {
            self.relaxed_steps += 1;
        }
        Ok(project_control(
            &sol.u,
            q_t.as_slice(),
            self.limits,
            self.params.dt,
        ))
    }
}

/// Runs the QP controller with stall detection. The controller is
/// deterministic; `rng` is accepted only for a uniform planner interface.
pub fn qp_plan(
    start: &Configuration,
    goal: &Configuration,
    field: &CdfField,
    scene: &Scene,
    params: &QpParams,
    rng: &mut PlannerRng,
) -> Result<PlanResult> {
    check_endpoints(scene, start.as_slice(), goal.as_slice())?;
    field.ensure_compatible(scene)?;
    let mut planner = QpPlanner::new(field, scene.limits(), goal.clone(), params.clone())?;
    Episode {
        scene,
        field,
        start: start.clone(),
        goal: goal.clone(),
        dt: params.dt,
        max_steps: params.max_steps,
        allow_range: params.allow_range,
        stall: Some(StallRule::default()),
    }
    .run(&mut planner, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::ContactSet;
    use crate::episode::PlanStatus;
    use crate::planner::configuration;
    use crate::robot::TwoLinkRobot;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn point_field(p: [f64; 2]) -> CdfField {
        let set = ContactSet::from_points(2, p.to_vec(), vec![0], 1e-4).unwrap();
        CdfField::new(set, JointLimits::symmetric(2, PI)).unwrap()
    }

    fn empty_field() -> CdfField {
        CdfField::build(&Scene::empty(TwoLinkRobot::planar_default()), 32, 1e-4).unwrap()
    }

    #[test]
    fn at_goal_the_control_is_zero() {
        let field = point_field([2.0, 2.0]);
        let limits = JointLimits::symmetric(2, PI);
        let sol = qp_step(
            &[0.5, 0.5],
            &[0.5, 0.5],
            &field,
            &limits,
            &QpParams::default(),
        )
        .unwrap();
        assert!(!sol.relaxed);
        assert_eq!(sol.u, DVector::zeros(2));
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn pure_tracking_without_obstacles() {
        // R -> 0 and H = I: the optimum is the clipped one-step jump to the goal.
        let field = empty_field();
        let limits = JointLimits::symmetric(2, PI);
        let params = QpParams::diagonal(&[1.0, 1.0], &[1e-12, 1e-12]);
        let q = [0.0, 0.0];
        for goal in [[0.01, -0.02], [1.0, 0.005]] {
            let sol = qp_step(&q, &goal, &field, &limits, &params).unwrap();
            for i in 0..2 {
                let want = ((goal[i] - q[i]) / params.dt).clamp(-3.0, 3.0);
                assert_abs_diff_eq!(sol.u[i], want, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn barrier_binds_when_heading_at_a_contact() {
        // Contact at the origin, robot at distance 0.41 heading straight in.
        let field = point_field([0.0, 0.0]);
        let limits = JointLimits::symmetric(2, PI);
        let params = QpParams::default();
        let q = [0.41, 0.0];
        let problem = QpProblem::build(&q, &[-2.0, 0.0], &field, &limits, &params).unwrap();
        let sol = problem.solve();
        assert!(!sol.relaxed);
        let slack = problem.barrier_slack(&sol.u).unwrap();
        assert_abs_diff_eq!(slack, 0.0, epsilon = 1e-9);
        // -dt * (1, 0) . u <= ln(1.01)
        assert_abs_diff_eq!(sol.u[0], -(1.01f64).ln() / params.dt, epsilon = 1e-7);
        assert!(kkt_residual(&problem, &sol.u, 1e-9) < 1e-6);
    }

    #[test]
    fn infeasible_barrier_is_relaxed() {
        let field = point_field([0.0, 0.0]);
        let limits = JointLimits::symmetric(2, PI);
        let params = QpParams::default();
        // ln(0.1 + 0.6) needs dt * grad.u >= 0.357, beyond the 3 rad/s box.
        let problem =
            QpProblem::build(&[0.1, 0.0], &[-2.0, 0.0], &field, &limits, &params).unwrap();
        let sol = problem.solve();
        assert!(sol.relaxed);
        assert!(problem.in_box(&sol.u, 0.0));
    }

    #[test]
    fn joint_limits_shrink_the_box() {
        let field = empty_field();
        let limits = JointLimits::symmetric(2, PI);
        let q = [PI - 0.005, 0.0];
        let sol = qp_step(&q, &[PI, 0.0], &field, &limits, &QpParams::default()).unwrap();
        assert!(q[0] + sol.u[0] * 0.01 <= PI + 1e-12);
    }

    #[test]
    fn empty_scene_reaches_goal() {
        let scene = Scene::empty(TwoLinkRobot::planar_default());
        let field = CdfField::build(&scene, 32, 1e-4).unwrap();
        let res = qp_plan(
            &configuration(&[1.0, -2.0]),
            &configuration(&[-1.5, 2.5]),
            &field,
            &scene,
            &QpParams::default(),
            &mut PlannerRng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(res.status, PlanStatus::Reached);
    }

    #[test]
    fn bad_params_are_rejected() {
        let mut p = QpParams::default();
        p.h_matrix[(0, 0)] = -1.0;
        assert!(p.validate(2).is_err());
        let p = QpParams {
            u_bounds: [1.0, -1.0],
            ..QpParams::default()
        };
        assert!(p.validate(2).is_err());
        assert!(QpParams::default().validate(3).is_err());
    }
}
