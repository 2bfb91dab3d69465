//! Oracles shared by the integration tests. The arm geometry here is
//! written from scratch rather than borrowed from the library.

#![allow(dead_code)]

pub mod qp;

use cdf_mppi::Scene;

/// Distance from `p` to the segment `a`-`b`.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    cx.hypot(cy)
}

/// Signed clearance of the arm: negative when a link cuts a disc.
pub fn clearance(scene: &Scene, q: [f64; 2]) -> f64 {
    let [l1, l2] = scene.robot.link_lengths;
    let elbow = [l1 * q[0].cos(), l1 * q[0].sin()];
    let tip = [
        elbow[0] + l2 * (q[0] + q[1]).cos(),
        elbow[1] + l2 * (q[0] + q[1]).sin(),
    ];
    scene
        .obstacles
        .iter()
        .map(|o| {
            let c = [o.center.x, o.center.y];
            segment_distance(c, [0.0, 0.0], elbow).min(segment_distance(c, elbow, tip)) - o.radius
        })
        .fold(f64::INFINITY, f64::min)
}

/// Contact points from a brute-force sign scan of `clearance` on a
/// `res`-per-joint grid: the midpoint of every edge whose ends disagree.
pub fn scan_contacts(scene: &Scene, res: usize) -> Vec<[f64; 2]> {
    let lim = scene.limits();
    let coord = |axis: usize, k: usize| {
        lim.min[axis] + (lim.max[axis] - lim.min[axis]) * k as f64 / res as f64
    };
    let n = res + 1;
    let grid: Vec<f64> = (0..n * n)
        .map(|k| clearance(scene, [coord(0, k / n), coord(1, k % n)]))
        .collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = grid[i * n + j] < 0.0;
            if i + 1 < n && a != (grid[(i + 1) * n + j] < 0.0) {
                out.push([0.5 * (coord(0, i) + coord(0, i + 1)), coord(1, j)]);
            }
            if j + 1 < n && a != (grid[i * n + j + 1] < 0.0) {
                out.push([coord(0, i), 0.5 * (coord(1, j) + coord(1, j + 1))]);
            }
        }
    }
    out
}

pub fn nearest(points: &[[f64; 2]], q: [f64; 2]) -> f64 {
    points
        .iter()
        .map(|p| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(f64::INFINITY, f64::min)
}

/// The two smallest distances from `q` to `points`.
pub fn two_nearest(points: &[[f64; 2]], q: [f64; 2]) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::INFINITY);
    for p in points {
        let d = (p[0] - q[0]).hypot(p[1] - q[1]);
        if d < best.0 {
            best = (d, best.0);
        } else if d < best.1 {
            best.1 = d;
        }
    }
    best
}

pub fn path_length(rows: &[Vec<f64>]) -> f64 {
    rows.windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Central-difference gradient norm of `f` at `q`.
pub fn fd_norm(f: impl Fn([f64; 2]) -> f64, q: [f64; 2], h: f64) -> f64 {
    let gx = (f([q[0] + h, q[1]]) - f([q[0] - h, q[1]])) / (2.0 * h);
    let gy = (f([q[0], q[1] + h]) - f([q[0], q[1] - h])) / (2.0 * h);
    gx.hypot(gy)
}
