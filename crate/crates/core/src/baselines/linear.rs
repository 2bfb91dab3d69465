//! Straight-line motion between two configurations.

use crate::robot::{in_collision, Scene};

/// True if any of `step_count` evenly spaced configurations on the segment
/// `q_s -> q_f` (endpoints included) is in collision.
pub fn linear_path_collides(q_s: &[f64], q_f: &[f64], scene: &Scene, step_count: usize) -> bool {
    assert_eq!(q_s.len(), q_f.len());
    let last = step_count.max(2) - 1;
    let mut q = vec![0.0; q_s.len()];
    (0..=last).any(|k| {
        let t = k as f64 / last as f64;
        for (i, v) in q.iter_mut().enumerate() {
            *v = q_s[i] + t * (q_f[i] - q_s[i]);
        }
        in_collision(scene, &q)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::TwoLinkRobot;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn identical_endpoints() {
        let scene = Scene::two_link_benchmark();
        assert!(!linear_path_collides(
            &[2.1, 1.2],
            &[2.1, 1.2],
            &scene,
            1000
        ));
    }

    #[test]
    fn empty_scene_never_collides() {
        let scene = Scene::empty(TwoLinkRobot::planar_default());
        assert!(!linear_path_collides(
            &[-3.0, -3.0],
            &[3.0, 3.0],
            &scene,
            500
        ));
    }

    proptest! {
        #[test]
        fn refinement_keeps_collisions(
            a in prop::collection::vec(-PI..PI, 2),
            b in prop::collection::vec(-PI..PI, 2),
            r in 2usize..40,
            k in 2usize..6,
        ) {
            let scene = Scene::two_link_benchmark();
            // (r - 1) * k + 1 points contain every point of the r-point grid.
            if linear_path_collides(&a, &b, &scene, r) {
                prop_assert!(linear_path_collides(&a, &b, &scene, (r - 1) * k + 1));
            }
        }
    }
}
