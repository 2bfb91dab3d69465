//! Gaussian control policy and the MPPI update primitives shared by the
//! one-step planner and the horizon baselines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::robot::JointLimits;

/// Joint-velocity control, rad/s.
pub type Control = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), covariance.nrows())?;
        check_dim(mean.len(), covariance.ncols())?;
        Ok(GaussianPolicy { mean, covariance })
    }

    /// Zero mean, `sigma^2 I` covariance.
    pub fn isotropic(dim: usize, sigma: f64) -> Self {
        GaussianPolicy {
            mean: DVector::zeros(dim),
            covariance: DMatrix::identity(dim, dim) * (sigma * sigma),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower-triangular factor `L` with `L L^T = covariance`.
    ///
    /// Falls back to an eigen square root for semidefinite matrices; fails if
    /// the covariance has a clearly negative eigenvalue.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        if let Some(chol) = self.covariance.clone().cholesky() {
            return Ok(chol.l());
        }
        let eig = SymmetricEigen::new(self.covariance.clone());
        let scale = self.covariance.amax().max(1.0);
        if eig.eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
            return Err(Error::InvalidParameter(
                "policy covariance is not positive semidefinite".into(),
            ));
        }
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
    }
}

/// Draws `n` controls `mean + L z`, `z ~ N(0, I)`, consuming `dim` normals per draw.
pub fn sample_controls<R: Rng + ?Sized>(
    policy: &GaussianPolicy,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Control>> {
    let factor = policy.factor()?;
    Ok((0..n).map(|_| draw(&policy.mean, &factor, rng)).collect())
}

pub(crate) fn draw<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    rng: &mut R,
) -> Control {
    let mut z = vec![0.0; mean.len()];
    let mut out = DVector::zeros(mean.len());
    draw_into(mean, factor, rng, &mut z, out.as_mut_slice());
    out
}

/// Writes `mean + factor * z` into `out`; `z` is scratch of length `dim`.
pub(crate) fn draw_into<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    factor: &DMatrix<f64>,
    rng: &mut R,
    z: &mut [f64],
    out: &mut [f64],
) {
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = mean[r];
        for (c, zc) in z.iter().enumerate() {
            acc += factor[(r, c)] * zc;
        }
        *o = acc;
    }
}

/// Rescales every control whose Euclidean norm exceeds `bound` back onto the
/// sphere of that radius, keeping its direction.
pub fn clip_controls(controls: &mut [Control], bound: f64) {
    for u in controls {
        clip_norm(u.as_mut_slice(), bound);
    }
}

pub(crate) fn clip_norm(u: &mut [f64], bound: f64) {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > bound {
        let scale = bound / norm;
        for x in u {
            *x *= scale;
        }
    }
}

/// `w_i = exp(-(c_i - min c) / beta)`.
///
/// The shift by the minimum leaves weight ratios unchanged and guarantees the
/// best sample has weight one.
pub fn mppi_weights(costs: &[f64], beta: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    costs.iter().map(|c| (-(c - min) / beta).exp()).collect()
}

/// Filtered weighted mean and covariance update.
///
/// The covariance uses deviations from the *old* mean. The result is
/// symmetrized and its eigenvalues floored at `sigma_floor^2`.
pub fn update_policy(
    policy: &GaussianPolicy,
    controls: &[Control],
    weights: &[f64],
    alpha_mu: f64,
    alpha_sigma: f64,
    sigma_floor: f64,
) -> GaussianPolicy {
    assert_eq!(controls.len(), weights.len());
    filter_update(
        policy,
        controls.iter().map(|u| u.as_slice()),
        weights,
        alpha_mu,
        alpha_sigma,
        sigma_floor,
    )
}

pub(crate) fn filter_update<'c>(
    policy: &GaussianPolicy,
    controls: impl Iterator<Item = &'c [f64]>,
    weights: &[f64],
    alpha_mu: f64,
    alpha_sigma: f64,
    sigma_floor: f64,
) -> GaussianPolicy {
    let dim = policy.dim();
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "update_policy needs a positive weight sum");

    let mut weighted_mean = DVector::zeros(dim);
    let mut weighted_cov = DMatrix::zeros(dim, dim);
    let mut dev = vec![0.0; dim];
    for (u, &w) in controls.zip(weights) {
        for k in 0..dim {
            weighted_mean[k] += w * u[k];
            dev[k] = u[k] - policy.mean[k];
        }
        for c in 0..dim {
            for r in 0..dim {
                weighted_cov[(r, c)] += w * dev[r] * dev[c];
            }
        }
    }
    weighted_mean /= total;
    weighted_cov /= total;

    let mean = &policy.mean * (1.0 - alpha_mu) + weighted_mean * alpha_mu;
    let cov = &policy.covariance * (1.0 - alpha_sigma) + weighted_cov * alpha_sigma;
    GaussianPolicy {
        mean,
        covariance: floor_covariance(cov, sigma_floor),
    }
}

fn floor_covariance(cov: DMatrix<f64>, sigma_floor: f64) -> DMatrix<f64> {
    let sym = (&cov + cov.transpose()) * 0.5;
    let floor = sigma_floor * sigma_floor;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    (&rebuilt + rebuilt.transpose()) * 0.5
}

/// Clips `u` so that `q + dt * u` stays inside the joint box.
///
/// The bounds are `(q_min - q) / dt` and `(q_max - q) / dt`; a final
/// ulp-level correction makes `q + dt * u` land inside the box exactly in
/// floating point.
pub fn project_control(u: &Control, q: &[f64], limits: &JointLimits, dt: f64) -> Control {
    assert_eq!(u.len(), q.len());
    assert!(
        limits.contains(q),
        "project_control: configuration outside joint limits"
    );
    let mut out = u.clone();
    for i in 0..q.len() {
        let (lo, hi) = (limits.min[i], limits.max[i]);
        let mut v = u[i].clamp((lo - q[i]) / dt, (hi - q[i]) / dt);
        while q[i] + dt * v > hi {
            v = v.next_down();
        }
        while q[i] + dt * v < lo {
            v = v.next_up();
        }
        out[i] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn zero_covariance_samples_the_mean() {
        let policy = GaussianPolicy::new(dv(&[0.3, -1.0]), DMatrix::zeros(2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for u in sample_controls(&policy, 10, &mut rng).unwrap() {
            assert_eq!(u, policy.mean);
        }
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let policy = GaussianPolicy::new(dv(&[0.0, 0.0]), cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_controls(&policy, 3, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let policy = GaussianPolicy::isotropic(2, 1.0);
        let a = sample_controls(&policy, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_controls(&policy, 50, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_within_standard_error() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let policy = GaussianPolicy::new(dv(&[1.0, -2.0]), cov.clone()).unwrap();
        let n = 100_000;
        let draws = sample_controls(&policy, n, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let mean = draws.iter().fold(DVector::zeros(2), |acc, u| acc + u) / n as f64;
        for i in 0..2 {
            let se = (cov[(i, i)] / n as f64).sqrt();
            assert!(
                (mean[i] - policy.mean[i]).abs() < 4.0 * se,
                "coord {i}: {}",
                mean[i]
            );
        }
    }

    #[test]
    fn weight_examples() {
        assert_eq!(mppi_weights(&[3.0, 3.0, 3.0], 0.7), vec![1.0; 3]);
        let w = mppi_weights(&[0.0, 2.0], 2.0);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (-1.0f64).exp()).abs() < 1e-15);

        let costs = [1.0, 2.0, 5.0];
        let hot = mppi_weights(&costs, 1e9);
        assert!(hot.iter().all(|w| (w - 1.0).abs() < 1e-8));
        let cold = mppi_weights(&costs, 1e-3);
        assert_eq!(cold[0], 1.0);
        assert!(cold[1] < 1e-300 && cold[2] < 1e-300);
    }

    #[test]
    fn zero_filter_leaves_policy_unchanged() {
        let policy = GaussianPolicy::isotropic(2, 0.8);
        let controls = vec![dv(&[1.0, 2.0]), dv(&[-3.0, 0.5])];
        let out = update_policy(&policy, &controls, &[1.0, 0.2], 0.0, 0.0, 0.05);
        assert_eq!(out, policy);
    }

    #[test]
    fn full_mean_filter_single_sample() {
        let policy = GaussianPolicy::isotropic(2, 1.0);
        let out = update_policy(&policy, &[dv(&[0.4, -0.9])], &[0.3], 1.0, 0.5, 0.05);
        approx::assert_abs_diff_eq!(out.mean, dv(&[0.4, -0.9]), epsilon = 1e-15);
    }

    #[test]
    fn uniform_weights_give_sample_average() {
        let policy = GaussianPolicy::isotropic(3, 1.0);
        let controls: Vec<Control> = (0..7)
            .map(|i| dv(&[i as f64, (i * i) as f64 * 0.1, -(i as f64)]))
            .collect();
        let out = update_policy(&policy, &controls, &[1.0; 7], 1.0, 0.0, 0.0);
        for d in 0..3 {
            let avg: f64 = controls.iter().map(|u| u[d]).sum::<f64>() / 7.0;
            assert!((out.mean[d] - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_floor_holds() {
        let policy = GaussianPolicy::isotropic(2, 1.0);
        // Identical samples at the mean collapse the weighted covariance to zero.
        let controls = vec![dv(&[0.0, 0.0]); 5];
        let out = update_policy(&policy, &controls, &[1.0; 5], 0.5, 1.0, 0.05);
        let eig = SymmetricEigen::new(out.covariance.clone());
        assert!(eig.eigenvalues.iter().all(|&l| l >= 0.05 * 0.05 - 1e-15));
        assert_eq!(out.covariance, out.covariance.transpose());
    }

    #[test]
    fn projection_examples() {
        let limits = JointLimits::symmetric(2, PI);
        let u = dv(&[0.5, -0.2]);
        assert_eq!(project_control(&u, &[0.0, 0.0], &limits, 0.01), u);

        let pinned = project_control(&dv(&[2.0, 1.0]), &[PI, 0.0], &limits, 0.01);
        assert_eq!(pinned[0], 0.0);
        assert_eq!(pinned[1], 1.0);

        let p = project_control(&dv(&[20.0, 0.0]), &[3.0, 0.0], &limits, 0.01);
        let expected = (PI - 3.0) / 0.01;
        assert!((p[0] - expected).abs() < 1e-9, "{}", p[0]);
        assert!((p[0] - 14.159_265_358_979).abs() < 1e-9);
        assert_eq!(p[1], 0.0);
        // Interval-membership oracle: the projected step is inside the box and
        // pushing it any further outward leaves the box.
        assert!(3.0 + 0.01 * p[0] <= PI);
        assert!(3.0 + 0.01 * (p[0] + 1e-6) > PI);
    }

    proptest! {
        #[test]
        fn projection_lands_inside_limits(
            q0 in -PI..=PI, q1 in -PI..=PI,
            u0 in -1e3..1e3f64, u1 in -1e3..1e3f64,
            dt in 1e-4..0.5f64,
        ) {
            let limits = JointLimits::symmetric(2, PI);
            let q = [q0, q1];
            let p = project_control(&dv(&[u0, u1]), &q, &limits, dt);
            for i in 0..2 {
                let next = q[i] + dt * p[i];
                prop_assert!((-PI..=PI).contains(&next));
                let raw = [u0, u1][i];
                // Interior controls pass through untouched.
                let inside = q[i] + dt * raw;
                if inside > -PI + 1e-9 && inside < PI - 1e-9 {
                    prop_assert_eq!(p[i], raw);
                }
            }
        }

        #[test]
        fn shifting_costs_leaves_update_unchanged(
            costs in prop::collection::vec(0.0..50.0f64, 4..12),
            shift in -100.0..100.0f64,
        ) {
            let policy = GaussianPolicy::isotropic(2, 1.0);
            let controls = sample_controls(&policy, costs.len(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
            let a = update_policy(&policy, &controls, &mppi_weights(&costs, 1.0), 0.5, 0.5, 0.05);
            let b = update_policy(&policy, &controls, &mppi_weights(&shifted, 1.0), 0.5, 0.5, 0.05);
            prop_assert!((a.mean - b.mean).amax() < 1e-9);
            prop_assert!((a.covariance - b.covariance).amax() < 1e-9);
        }

        #[test]
        fn scaling_costs_and_temperature_together_is_invariant(
            costs in prop::collection::vec(0.0..50.0f64, 2..12),
            k in 0.1..10.0f64,
        ) {
            let scaled: Vec<f64> = costs.iter().map(|c| c * k).collect();
            let a = mppi_weights(&costs, 2.0);
            let b = mppi_weights(&scaled, 2.0 * k);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
