//! Numerical audit of a distance field against its scene: Lipschitz bound,
//! unit gradient norm, and agreement with a finer brute-force contact scan.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cdf::{build_contact_set, CdfField, ContactSet};
use crate::error::Result;
use crate::robot::{in_collision, JointLimits, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    /// Random pairs for the Lipschitz check and target count for the eikonal check.
    pub samples: usize,
    pub seed: u64,
    pub fd_step: f64,
    pub eikonal_tol: f64,
    /// Fraction of screened samples that must pass the eikonal check.
    pub eikonal_fraction: f64,
    /// Grid the field was built with; the oracle scans `oracle_factor` times finer.
    pub grid_resolution: usize,
    pub oracle_factor: usize,
    pub oracle_samples: usize,
    /// Allowed oracle error in base-grid cell diagonals.
    pub oracle_cells: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            samples: 500,
            seed: 0,
            fd_step: 1e-4,
            eikonal_tol: 0.05,
            eikonal_fraction: 0.95,
            grid_resolution: 200,
            oracle_factor: 4,
            oracle_samples: 200,
            oracle_cells: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzCheck {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `|f(a) - f(b)| / |a - b|` seen.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EikonalCheck {
    /// Collision-free samples whose nearest contact is unambiguous.
    pub screened: usize,
    pub within_tol: usize,
    pub fraction: f64,
    /// Same statistic over every collision-free sample, without screening.
    pub unscreened_fraction: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub samples: usize,
    pub oracle_contacts: usize,
    pub worst_error: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub lipschitz: LipschitzCheck,
    pub eikonal: EikonalCheck,
    pub oracle: OracleCheck,
    pub eikonal_tol: f64,
    pub eikonal_fraction_required: f64,
}

impl AuditReport {
    pub fn lipschitz_ok(&self) -> bool {
        self.lipschitz.violations == 0
    }

    pub fn eikonal_ok(&self) -> bool {
        self.eikonal.screened > 0 && self.eikonal.fraction >= self.eikonal_fraction_required
    }

    pub fn oracle_ok(&self) -> bool {
        self.oracle.worst_error <= self.oracle.bound
    }

    pub fn passed(&self) -> bool {
        self.lipschitz_ok() && self.eikonal_ok() && self.oracle_ok()
    }

    pub fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "ok" } else { "VIOLATION" };
        let l = &self.lipschitz;
        let e = &self.eikonal;
        let o = &self.oracle;
        format!(
            "lipschitz: {} ({} pairs, {} violations, worst ratio {:.6})\n\
             eikonal: {} ({}/{} screened samples within 1 +/- {}, fraction {:.4}, required {}; unscreened fraction {:.4})\n\
             oracle: {} ({} samples against {} contacts, worst error {:.3e}, bound {:.3e})\n",
            verdict(self.lipschitz_ok()),
            l.pairs,
            l.violations,
            l.worst_ratio,
            verdict(self.eikonal_ok()),
            e.within_tol,
            e.screened,
            self.eikonal_tol,
            e.fraction,
            self.eikonal_fraction_required,
            e.unscreened_fraction,
            verdict(self.oracle_ok()),
            o.samples,
            o.oracle_contacts,
            o.worst_error,
            o.bound,
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng, limits: &JointLimits) -> Vec<f64> {
    (0..limits.dim())
        .map(|k| rng.random_range(limits.min[k]..=limits.max[k]))
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Norm of the central-difference gradient of the field at `q`.
pub fn fd_gradient_norm(field: &CdfField, q: &[f64], h: f64) -> f64 {
    let mut p = q.to_vec();
    let mut sq = 0.0;
    for k in 0..q.len() {
        p[k] = q[k] + h;
        let up = field.value(&p);
        p[k] = q[k] - h;
        let down = field.value(&p);
        p[k] = q[k];
        let g = (up - down) / (2.0 * h);
        sq += g * g;
    }
    sq.sqrt()
}

/// Distance from `q` to the closest point of `contacts`, by exhaustive scan.
pub fn brute_force_distance(contacts: &ContactSet, q: &[f64]) -> f64 {
    contacts
        .iter()
        .map(|(c, _)| distance(c, q))
        .fold(f64::INFINITY, f64::min)
}

/// Diagonal of one cell of a `resolution`-per-joint grid over `limits`.
pub fn cell_diagonal(limits: &JointLimits, resolution: usize) -> f64 {
    (0..limits.dim())
        .map(|k| ((limits.max[k] - limits.min[k]) / resolution as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn lipschitz_check(field: &CdfField, pairs: usize, rng: &mut ChaCha8Rng) -> LipschitzCheck {
    let limits = field.bounds();
    let (mut violations, mut worst) = (0, 0.0f64);
    for _ in 0..pairs {
        let a = uniform(rng, limits);
        let b = uniform(rng, limits);
        let gap = distance(&a, &b);
        let diff = (field.value(&a) - field.value(&b)).abs();
        if diff > gap * (1.0 + 1e-12) + 1e-12 {
            violations += 1;
        }
        if gap > 0.0 {
            worst = worst.max(diff / gap);
        }
    }
    LipschitzCheck {
        pairs,
        violations,
        worst_ratio: worst,
    }
}

/// Draws collision-free configurations until `target` pass the screen
/// (two nearest contacts differ in distance by more than 10 FD steps, and
/// the nearest is further than that), giving up after `100 * target` draws.
pub fn eikonal_check(
    field: &CdfField,
    scene: &Scene,
    target: usize,
    h: f64,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> EikonalCheck {
    let limits = field.bounds();
    let margin = 10.0 * h;
    let (mut screened, mut within, mut free, mut free_within, mut draws) = (0, 0, 0, 0, 0);
    while screened < target && draws < 100 * target {
        draws += 1;
        let q = uniform(rng, limits);
        if in_collision(scene, &q) {
            continue;
        }
        let norm_ok = (fd_gradient_norm(field, &q, h) - 1.0).abs() <= tol;
        free += 1;
        free_within += norm_ok as usize;
        let Some((d1, d2)) = field.two_nearest(&q) else {
            continue;
        };
        if d1 > margin && d2 - d1 > margin {
            screened += 1;
            within += norm_ok as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    EikonalCheck {
        screened,
        within_tol: within,
        fraction: ratio(within, screened),
        unscreened_fraction: ratio(free_within, free),
        draws,
    }
}

/// Compares the field with a brute-force scan of a contact set extracted on
/// a `factor`-times finer grid, at uniformly drawn configurations.
pub fn oracle_check(
    field: &CdfField,
    scene: &Scene,
    grid_resolution: usize,
    factor: usize,
    samples: usize,
    cells: f64,
    rng: &mut ChaCha8Rng,
) -> Result<OracleCheck> {
    let fine = build_contact_set(scene, grid_resolution * factor, field.refine_tol())?;
    let limits = field.bounds();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let q = uniform(rng, limits);
        let err = (field.value(&q) - brute_force_distance(&fine, &q)).abs();
        if err.is_finite() {
            worst = worst.max(err);
        } else if field.value(&q) != brute_force_distance(&fine, &q) {
            worst = f64::INFINITY;
        }
    }
    Ok(OracleCheck {
        samples,
        oracle_contacts: fine.len(),
        worst_error: worst,
        bound: cells * cell_diagonal(limits, grid_resolution),
    })
}

pub fn audit_field(field: &CdfField, scene: &Scene, opts: &AuditOptions) -> Result<AuditReport> {
    field.ensure_compatible(scene)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let lipschitz = lipschitz_check(field, opts.samples, &mut rng);
    let eikonal = eikonal_check(
        field,
        scene,
        opts.samples,
        opts.fd_step,
        opts.eikonal_tol,
        &mut rng,
    );
    let oracle = oracle_check(
        field,
        scene,
        opts.grid_resolution,
        opts.oracle_factor,
        opts.oracle_samples,
        opts.oracle_cells,
        &mut rng,
    )?;
    Ok(AuditReport {
        lipschitz,
        eikonal,
        oracle,
        eikonal_tol: opts.eikonal_tol,
        eikonal_fraction_required: opts.eikonal_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::JointLimits;

    #[test]
    fn cell_diagonal_of_square_grid() {
        let l = JointLimits::symmetric(2, 1.0);
        assert!((cell_diagonal(&l, 4) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_point_field_has_unit_gradient() {
        let contacts = ContactSet::from_points(2, vec![0.0, 0.0], vec![0], 1e-4).unwrap();
        let field = CdfField::new(contacts, JointLimits::symmetric(2, 3.0)).unwrap();
        let n = fd_gradient_norm(&field, &[1.0, -2.0], 1e-4);
        assert!((n - 1.0).abs() < 1e-6, "{n}");
    }

    #[test]
    fn midpoint_of_two_contacts_is_flagged_by_fd() {
        // On the bisector of two contacts the field has a kink across it.
        let contacts =
            ContactSet::from_points(2, vec![-1.0, 0.0, 1.0, 0.0], vec![0, 0], 1e-4).unwrap();
        let field = CdfField::new(contacts, JointLimits::symmetric(2, 3.0)).unwrap();
        let n = fd_gradient_norm(&field, &[0.0, 0.0], 1e-4);
        assert!(n < 0.5, "{n}");
    }

    #[test]
    fn benchmark_field_passes_small_audit() {
        let scene = Scene::two_link_benchmark();
        let field = CdfField::build(&scene, 64, 1e-4).unwrap();
        let opts = AuditOptions {
            samples: 100,
            grid_resolution: 64,
            oracle_factor: 2,
            oracle_samples: 30,
            ..AuditOptions::default()
        };
        let report = audit_field(&field, &scene, &opts).unwrap();
        assert!(report.passed(), "{}", report.summary());
    }
}
