//! Exact nearest-neighbour index over a fixed point set.
//!
//! Implicit balanced k-d tree: points are permuted so that every subrange
//! `[lo, hi)` stores its splitting point at `(lo + hi) / 2`. Distances are
//! compared as `(squared distance, original index)` so equidistant points
//! resolve to the lowest index, independent of tree layout.

use std::cmp::Ordering;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Coordinates in tree order, `dim` values per point.
    coords: Vec<f64>,
    /// Original index of each point in tree order.
    ids: Vec<u32>,
    /// Split axis for each internal node, keyed by tree position.
    axes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Neighbor) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    /// Builds from `points.len() / dim` points stored row-major.
    pub fn build(dim: usize, points: &[f64]) -> Self {
        assert!(dim > 0 && dim <= u8::MAX as usize);
        assert_eq!(points.len() % dim, 0);
        let n = points.len() / dim;
        assert!(n <= u32::MAX as usize);
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut axes = vec![0u8; n];
        build_range(dim, points, &mut order, &mut axes, 0, n);
        let mut coords = Vec::with_capacity(points.len());
        for &i in &order {
            let i = i as usize;
            coords.extend_from_slice(&points[i * dim..(i + 1) * dim]);
        }
        KdTree {
            dim,
            coords,
            ids: order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        self.nearest_k(query, 1).into_iter().next()
    }

    /// The `k` closest points sorted by (distance, index).
    pub fn nearest_k(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim);
        let mut best = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(query, k, 0, self.len(), &mut best);
        }
        best
    }

    fn point(&self, pos: usize) -> &[f64] {
        &self.coords[pos * self.dim..(pos + 1) * self.dim]
    }

    fn consider(&self, query: &[f64], pos: usize, k: usize, best: &mut Vec<Neighbor>) {
        let dist_sq = self
            .point(pos)
            .iter()
            .zip(query)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let cand = Neighbor {
            index: self.ids[pos] as usize,
            dist_sq,
        };
        if best.len() == k {
            if cand.key_cmp(best.last().unwrap()) != Ordering::Less {
                return;
            }
            best.pop();
        }
        let at = best.partition_point(|b| b.key_cmp(&cand) == Ordering::Less);
        best.insert(at, cand);
    }

    fn search(&self, query: &[f64], k: usize, lo: usize, hi: usize, best: &mut Vec<Neighbor>) {
        if hi - lo <= LEAF_SIZE {
            for pos in lo..hi {
                self.consider(query, pos, k, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let diff = query[axis] - self.point(mid)[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(query, k, near.0, near.1, best);
        self.consider(query, mid, k, best);
        // `<=` keeps equidistant points on the far side eligible for the index tie-break.
        if best.len() < k || diff * diff <= best.last().unwrap().dist_sq {
            self.search(query, k, far.0, far.1, best);
        }
    }
}

fn build_range(
    dim: usize,
    points: &[f64],
    order: &mut [u32],
    axes: &mut [u8],
    lo: usize,
    hi: usize,
) {
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let coord = |i: u32, a: usize| points[i as usize * dim + a];
    let axis = (0..dim)
        .max_by(|&a, &b| {
            let spread = |ax: usize| {
                let (mn, mx) = order[lo..hi].iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(mn, mx), &i| {
                        let v = coord(i, ax);
                        (mn.min(v), mx.max(v))
                    },
                );
                mx - mn
            };
            spread(a).total_cmp(&spread(b)).then(b.cmp(&a))
        })
        .unwrap();
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&i, &j| {
        coord(i, axis).total_cmp(&coord(j, axis)).then(i.cmp(&j))
    });
    axes[mid] = axis as u8;
    build_range(dim, points, order, axes, lo, mid);
    build_range(dim, points, order, axes, mid + 1, hi);
}
