//! Randomized check of the QP step against KKT conditions and grid search.

use cdf_mppi::baselines::qp::{kkt_residual, QpParams, QpProblem};
use cdf_mppi::{CdfField, Scene};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Default)]
pub struct QpAudit {
    /// Instances whose barrier was satisfiable; all checks apply to these.
    pub instances: usize,
    pub barrier_active: usize,
    /// Instances with an unsatisfiable barrier, checked separately.
    pub relaxed: usize,
    pub worst_kkt: f64,
    pub worst_violation: f64,
}

/// Exhaustive search over a `k x k` grid of the box, restricted to the
/// barrier half-plane.
fn grid_search(
    p: &QpProblem,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    k: usize,
) -> Option<DVector<f64>> {
    let mut best: Option<(f64, DVector<f64>)> = None;
    for i in 0..=k {
        for j in 0..=k {
            let u = DVector::from_vec(vec![
                lo[0] + (hi[0] - lo[0]) * i as f64 / k as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / k as f64,
            ]);
            if p.barrier_slack(&u).is_some_and(|s| s < 0.0) {
                continue;
            }
            let f = p.objective(&u);
            if best.as_ref().is_none_or(|(b, _)| f < *b) {
                best = Some((f, u));
            }
        }
    }
    best.map(|(_, u)| u)
}

/// Solves `n` random feasible instances (random state, goal, weights and
/// barrier offset) and returns the first problem found, if any.
pub fn audit_qp(
    scene: &Scene,
    field: &CdfField,
    n: usize,
    seed: u64,
    tol: f64,
) -> Result<QpAudit, String> {
    let limits = scene.limits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = std::f64::consts::PI;
    let mut audit = QpAudit::default();
    while audit.instances < n {
        let q = [rng.random_range(-pi..=pi), rng.random_range(-pi..=pi)];
        if field.value(&q) <= 1e-3 {
            continue;
        }
        let goal = [rng.random_range(-pi..=pi), rng.random_range(-pi..=pi)];
        let mut params = QpParams::diagonal(
            &[rng.random_range(1.0..200.0), rng.random_range(1.0..200.0)],
            &[rng.random_range(0.005..0.05), rng.random_range(0.005..0.05)],
        );
        params.gamma_qp = rng.random_range(0.05..1.0);
        let p = QpProblem::build(&q, &goal, field, limits, &params).map_err(|e| e.to_string())?;
        let sol = p.solve();

        if !p.in_box(&sol.u, tol) {
            return Err(format!("{q:?}: {} outside the box", sol.u));
        }
        if (p.objective(&sol.u) - sol.objective).abs() > 1e-9 * sol.objective.abs().max(1.0) {
            return Err(format!("{q:?}: reported objective is stale"));
        }
        if sol.relaxed {
            // Dropping the barrier is only allowed when no box point meets it.
            let (a, b) = p.barrier.as_ref().ok_or("relaxed without a barrier")?;
            let best = (0..2)
                .map(|i| (a[i] * p.lower[i]).min(a[i] * p.upper[i]))
                .sum::<f64>();
            if best <= *b {
                return Err(format!("{q:?}: barrier was satisfiable but dropped"));
            }
            audit.relaxed += 1;
            continue;
        }
        audit.instances += 1;
        let slack = p.barrier_slack(&sol.u).unwrap_or(f64::INFINITY);
        audit.worst_violation = audit.worst_violation.max(-slack);
        if slack < -tol {
            return Err(format!("{q:?}: barrier violated by {}", -slack));
        }
        audit.barrier_active += (slack.abs() <= tol) as usize;
        let r = kkt_residual(&p, &sol.u, tol);
        audit.worst_kkt = audit.worst_kkt.max(r);
        if r > tol {
            return Err(format!("{q:?} -> {goal:?}: stationarity residual {r}"));
        }

        // Coarse pass over the box, then a fine pass around its winner.
        let coarse = 60;
        let pitch = DVector::from_fn(2, |i, _| (p.upper[i] - p.lower[i]) / coarse as f64);
        let g = grid_search(&p, &p.lower, &p.upper, coarse)
            .ok_or("the grid holds no feasible point")?;
        let lo = DVector::from_fn(2, |i, _| (g[i] - 2.0 * pitch[i]).max(p.lower[i]));
        let hi = DVector::from_fn(2, |i, _| (g[i] + 2.0 * pitch[i]).min(p.upper[i]));
        let fine = 200;
        let g = grid_search(&p, &lo, &hi, fine).unwrap_or(g);
        let (fu, fg) = (p.objective(&sol.u), p.objective(&g));
        if fu > fg + 1e-9 {
            return Err(format!("{q:?}: grid point {g} beats {}", sol.u));
        }
        // Some feasible grid point lies within two cell diagonals of the
        // optimum, which caps how much better than the grid it can be.
        let reach = 2.0 * DVector::from_fn(2, |i, _| (hi[i] - lo[i]) / fine as f64).norm();
        let grad = (&p.hessian * &sol.u + &p.linear).norm();
        let curvature = p.hessian.symmetric_eigenvalues().max();
        if fg - fu > grad * reach + 0.5 * curvature * reach * reach {
            return Err(format!("{q:?}: grid optimum {fg} is far above {fu}"));
        }
    }
    Ok(audit)
}
