mod common;

use std::sync::OnceLock;

use cdf_mppi::robot::{scene_clearance, CircleObstacle, TwoLinkRobot};
use cdf_mppi::{CdfField, Scene};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: usize = 64;

fn bench() -> &'static (Scene, CdfField) {
    static CELL: OnceLock<(Scene, CdfField)> = OnceLock::new();
    CELL.get_or_init(|| {
        let scene = Scene::two_link_benchmark();
        let field = CdfField::build(&scene, GRID, 1e-4).unwrap();
        (scene, field)
    })
}

fn draw(rng: &mut ChaCha8Rng) -> [f64; 2] {
    use std::f64::consts::PI;
    [rng.random_range(-PI..=PI), rng.random_range(-PI..=PI)]
}

fn cell_diagonal(res: usize) -> f64 {
    std::f64::consts::TAU / res as f64 * 2f64.sqrt()
}

#[test]
fn matches_a_four_times_finer_scan() {
    let (scene, field) = bench();
    let oracle = common::scan_contacts(scene, 4 * GRID);
    assert!(oracle.len() > 100);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let q = draw(&mut rng);
        worst = worst.max((field.value(&q) - common::nearest(&oracle, q)).abs());
    }
    assert!(worst <= 2.0 * cell_diagonal(GRID), "worst error {worst}");
}

#[test]
fn contacts_sit_on_the_obstacle_boundary() {
    let (scene, field) = bench();
    for (p, _) in field.contacts().iter() {
        assert!(common::clearance(scene, [p[0], p[1]]).abs() <= 1e-4 + 1e-12);
    }
}

#[test]
fn gradient_norm_is_one_off_the_cut_locus() {
    let (scene, field) = bench();
    let contacts: Vec<[f64; 2]> = field.contacts().iter().map(|(p, _)| [p[0], p[1]]).collect();
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut screened, mut good) = (0, 0);
    while screened < 300 {
        let q = draw(&mut rng);
        if common::clearance(scene, q) < 0.0 {
            continue;
        }
        let (d1, d2) = common::two_nearest(&contacts, q);
        if d1 <= 10.0 * h || d2 - d1 <= 10.0 * h {
            continue;
        }
        screened += 1;
        let n = common::fd_norm(|p| field.value(&p), q, h);
        good += ((n - 1.0).abs() <= 0.05) as usize;
    }
    assert!(good as f64 >= 0.95 * screened as f64, "{good}/{screened}");
}

#[test]
fn tiny_obstacle_is_localized() {
    // Only the forearm reaches a disc this far out.
    let obstacle = CircleObstacle::new([3.2, 0.7], 0.04).unwrap();
    let scene = Scene::new(TwoLinkRobot::planar_default(), vec![obstacle]);
    let field = CdfField::build(&scene, 200, 1e-4).unwrap();
    assert!(!field.contacts().is_empty());
    let res = 800;
    let step = std::f64::consts::TAU / res as f64;
    let mut hits = 0;
    for i in 0..=res {
        for j in 0..=res {
            let q = [
                -std::f64::consts::PI + i as f64 * step,
                -std::f64::consts::PI + j as f64 * step,
            ];
            if common::clearance(&scene, q) < 0.0 {
                hits += 1;
                assert!(
                    field.value(&q) <= cell_diagonal(200),
                    "{q:?} -> {}",
                    field.value(&q)
                );
            }
        }
    }
    assert!(hits > 0, "scan never touched the disc");
}

proptest! {
    #[test]
    fn clearance_agrees_with_scene_model(a in -3.2f64..3.2, b in -3.2f64..3.2) {
        let (scene, _) = bench();
        prop_assert!((scene_clearance(scene, &[a, b]) - common::clearance(scene, [a, b])).abs() < 1e-12);
    }

    #[test]
    fn field_is_one_lipschitz(a in prop::array::uniform2(-3.1f64..3.1), b in prop::array::uniform2(-3.1f64..3.1)) {
        let (_, field) = bench();
        let gap = (a[0] - b[0]).hypot(a[1] - b[1]);
        prop_assert!((field.value(&a) - field.value(&b)).abs() <= gap * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn value_is_distance_to_some_contact(q in prop::array::uniform2(-3.1f64..3.1)) {
        let (_, field) = bench();
        let v = field.value(&q);
        let brute = field.contacts().iter().map(|(p, _)| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min);
        prop_assert!((v - brute).abs() <= 1e-12);
    }
}
