//! Configuration-space distance field.
//!
//! The contact set (configurations where the arm touches an obstacle) is
//! extracted on an axis-aligned grid over the joint box: every grid edge whose
//! endpoints straddle zero clearance is bisected down to the contact. The field
//! value is the exact Euclidean distance to the nearest stored contact, so it is
//! 1-Lipschitz everywhere and has unit gradient away from the cut locus.

use std::io::Write;
use std::path::Path;

use crate::error::{check_dim, Error, Result};
use crate::kdtree::KdTree;
use crate::robot::{scene_clearance, scene_clearance_with_index, JointLimits, Scene};

pub const MIN_GRID_RESOLUTION: usize = 32;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    dim: usize,
    /// Row-major contact configurations, canonically sorted.
    points: Vec<f64>,
    obstacle_ids: Vec<u32>,
    /// `None` when the set was read back from a field file.
    pub grid_resolution: Option<usize>,
    pub refine_tol: f64,
    /// Obstacles were given but no contact was found.
    pub unreachable: bool,
}

impl ContactSet {
    pub fn from_points(
        dim: usize,
        points: Vec<f64>,
        obstacle_ids: Vec<u32>,
        refine_tol: f64,
    ) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) || points.len() / dim != obstacle_ids.len()
        {
            return Err(Error::InvalidParameter(
                "contact coordinates and obstacle indices disagree in length".into(),
            ));
        }
        let mut set = ContactSet {
            dim,
            points,
            obstacle_ids,
            grid_resolution: None,
            refine_tol,
            unreachable: false,
        };
        set.canonicalize();
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.obstacle_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacle_ids.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn obstacle_of(&self, i: usize) -> usize {
        self.obstacle_ids[i] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.points
            .chunks(self.dim)
            .zip(&self.obstacle_ids)
            .map(|(p, &o)| (p, o as usize))
    }

    /// Lexicographic order on coordinates, then obstacle index; exact duplicates removed.
    fn canonicalize(&mut self) {
        let dim = self.dim;
        let mut order: Vec<usize> = (0..self.len()).collect();
        let key = |i: usize| (&self.points[i * dim..(i + 1) * dim], self.obstacle_ids[i]);
        order.sort_by(|&a, &b| {
            let (pa, oa) = key(a);
            let (pb, ob) = key(b);
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(oa.cmp(&ob))
        });
        order.dedup_by(|a, b| key(*a) == key(*b));
        let points = order
            .iter()
            .flat_map(|&i| key(i).0.iter().copied())
            .collect();
        let ids = order.iter().map(|&i| self.obstacle_ids[i]).collect();
        self.points = points;
        self.obstacle_ids = ids;
    }
}

/// Extracts contact configurations of a two-link scene.
///
/// `grid_resolution` is the number of cells per joint (at least 32). Every
/// returned configuration satisfies `|scene_clearance| <= refine_tol`.
pub fn build_contact_set(
    scene: &Scene,
    grid_resolution: usize,
    refine_tol: f64,
) -> Result<ContactSet> {
    if grid_resolution < MIN_GRID_RESOLUTION {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be at least {MIN_GRID_RESOLUTION} (got {grid_resolution})"
        )));
    }
    if !(refine_tol.is_finite() && refine_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "refine_tol must be positive (got {refine_tol})"
        )));
    }
    let limits = scene.limits();
    let dim = scene.dim();
    let mut points = Vec::new();
    let mut ids = Vec::new();

    if !scene.obstacles.is_empty() {
        let res = grid_resolution;
        let vertex = |i: usize, j: usize| -> [f64; 2] {
            [grid_coord(limits, 0, i, res), grid_coord(limits, 1, j, res)]
        };
        let stride = res + 1;
        let values: Vec<f64> = (0..stride * stride)
            .map(|k| scene_clearance(scene, &vertex(k / stride, k % stride)))
            .collect();
        let value = |i: usize, j: usize| values[i * stride + j];

        let mut push = |q: [f64; 2]| {
            let (_, idx) = scene_clearance_with_index(scene, &q);
            points.extend_from_slice(&q);
            ids.push(idx.expect("nonempty scene") as u32);
        };

        for i in 0..=res {
            for j in 0..=res {
                let a = value(i, j);
                if a.abs() <= refine_tol {
                    push(vertex(i, j));
                    continue;
                }
                for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                    if ni > res || nj > res {
                        continue;
                    }
                    let b = value(ni, nj);
                    if b.abs() > refine_tol && (a < 0.0) != (b < 0.0) {
                        push(bisect_edge(
                            scene,
                            vertex(i, j),
                            a,
                            vertex(ni, nj),
                            refine_tol,
                        ));
                    }
                }
            }
        }
    }

    let mut set = ContactSet::from_points(dim, points, ids, refine_tol)?;
    set.grid_resolution = Some(grid_resolution);
    set.unreachable = !scene.obstacles.is_empty() && set.is_empty();
    if set.unreachable {
        log::warn!("no contact configuration found: obstacles are out of the arm's reach");
    }
    Ok(set)
}

fn grid_coord(limits: &JointLimits, axis: usize, k: usize, res: usize) -> f64 {
    let (lo, hi) = (limits.min[axis], limits.max[axis]);
    if k == res {
        hi
    } else {
        lo + (hi - lo) * k as f64 / res as f64
    }
}

fn bisect_edge(scene: &Scene, mut a: [f64; 2], fa: f64, mut b: [f64; 2], tol: f64) -> [f64; 2] {
    let neg_a = fa < 0.0;
    let mut mid = a;
    for _ in 0..MAX_BISECTIONS {
        mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let fm = scene_clearance(scene, &mid);
        let width = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
        if fm.abs() <= tol && width <= tol {
            break;
        }
        if (fm < 0.0) == neg_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    mid
}

/// Nearest-contact answer for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfQuery {
    pub value: f64,
    /// Index into the contact set; `None` for an empty field.
    pub nearest: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CdfField {
    contacts: ContactSet,
    tree: KdTree,
    bounds: JointLimits,
}

impl CdfField {
    pub fn new(contacts: ContactSet, bounds: JointLimits) -> Result<Self> {
        check_dim(contacts.dim(), bounds.dim())?;
        let tree = KdTree::build(contacts.dim(), &contacts.points);
        Ok(CdfField {
            contacts,
            tree,
            bounds,
        })
    }

    pub fn build(scene: &Scene, grid_resolution: usize, refine_tol: f64) -> Result<Self> {
        let contacts = build_contact_set(scene, grid_resolution, refine_tol)?;
        Self::new(contacts, scene.limits().clone())
    }

    pub fn dim(&self) -> usize {
        self.contacts.dim()
    }

    pub fn contacts(&self) -> &ContactSet {
        &self.contacts
    }

    pub fn bounds(&self) -> &JointLimits {
        &self.bounds
    }

    pub fn refine_tol(&self) -> f64 {
        self.contacts.refine_tol
    }

    pub fn ensure_compatible(&self, scene: &Scene) -> Result<()> {
        check_dim(scene.dim(), self.dim())
    }

    /// Panics if `q` has the wrong dimension.
    pub fn query(&self, q: &[f64]) -> CdfQuery {
        assert_eq!(q.len(), self.dim(), "CDF query dimension mismatch");
        match self.tree.nearest(q) {
            Some(n) => CdfQuery {
                value: n.dist_sq.sqrt(),
                nearest: Some(n.index),
            },
            None => CdfQuery {
                value: f64::INFINITY,
                nearest: None,
            },
        }
    }

    /// Distance in radians to the nearest contact configuration, `+inf` if there is none.
    pub fn value(&self, q: &[f64]) -> f64 {
        self.query(q).value
    }

    /// Unit escape direction `(q - q*) / |q - q*|` away from the nearest contact `q*`.
    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        let hit = self.query(q);
        self.gradient_from(q, &hit)
    }

    /// Gradient for a query that has already been answered.
    pub fn gradient_from(&self, q: &[f64], hit: &CdfQuery) -> Result<Vec<f64>> {
        let Some(nearest) = hit.nearest else {
            return Err(Error::Degenerate("field has no contact configurations"));
        };
        if hit.value <= self.refine_tol() {
            return Err(Error::GradientUndefined {
                distance: hit.value,
                tolerance: self.refine_tol(),
            });
        }
        let contact = self.contacts.point(nearest);
        Ok(q.iter()
            .zip(contact)
            .map(|(a, b)| (a - b) / hit.value)
            .collect())
    }

    /// Distances to the two closest contacts (for cut-locus screening).
    pub fn two_nearest(&self, q: &[f64]) -> Option<(f64, f64)> {
        let two = self.tree.nearest_k(q, 2);
        match two.as_slice() {
            [a, b] => Some((a.dist_sq.sqrt(), b.dist_sq.sqrt())),
            _ => None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dim = self.dim();
        let n = self.contacts.len();
        let mut out = Vec::with_capacity(24 + 16 * dim + n * (8 * dim + 4));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&self.refine_tol().to_le_bytes());
        for v in self.bounds.min.iter().chain(&self.bounds.max) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.contacts.points {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for id in &self.contacts.obstacle_ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
        if &magic != MAGIC {
            return Err(Error::FieldVersion { found: magic });
        }
        let dim = r.u32("dimension")? as usize;
        if dim == 0 {
            return Err(Error::FieldMalformed("dimension must be positive".into()));
        }
        let n = r.u64("point count")?;
        let refine_tol = r.f64("refine_tol")?;
        if !(refine_tol.is_finite() && refine_tol > 0.0) {
            return Err(Error::FieldMalformed(format!(
                "refine_tol must be positive (got {refine_tol})"
            )));
        }
        let min = (0..dim)
            .map(|_| r.f64("joint bounds"))
            .collect::<Result<Vec<_>>>()?;
        let max = (0..dim)
            .map(|_| r.f64("joint bounds"))
            .collect::<Result<Vec<_>>>()?;
        let bounds =
            JointLimits::new(min, max).map_err(|e| Error::FieldMalformed(e.to_string()))?;

        let remaining = (bytes.len() - r.pos) as u64;
        let coord_bytes = n
            .checked_mul(8 * dim as u64)
            .ok_or_else(|| Error::FieldMalformed(format!("point count {n} overflows")))?;
        if coord_bytes > remaining {
            return Err(Error::FieldTruncated {
                section: "contact coordinates",
            });
        }
        let n = n as usize;
        let points = (0..n * dim)
            .map(|_| r.f64("contact coordinates"))
            .collect::<Result<Vec<_>>>()?;
        let ids = (0..n)
            .map(|_| r.u32("obstacle indices"))
            .collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::FieldMalformed(format!(
                "{} trailing bytes after obstacle indices",
                bytes.len() - r.pos
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldMalformed(
                "non-finite contact coordinate".into(),
            ));
        }
        let contacts = ContactSet::from_points(dim, points, ids, refine_tol)?;
        Self::new(contacts, bounds)
    }
}

const MAGIC: &[u8; 4] = b"CDF1";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(Error::FieldTruncated { section })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, section)?.try_into().unwrap(),
        ))
    }

    fn u64(&mut self, section: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, section)?.try_into().unwrap(),
        ))
    }

    fn f64(&mut self, section: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, section)?.try_into().unwrap(),
        ))
    }
}

pub fn save_field(field: &CdfField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&field.to_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<CdfField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    CdfField::from_bytes(&bytes)
}

/// Loads a field and checks it matches the scene's configuration space.
pub fn load_field_for_scene(path: impl AsRef<Path>, scene: &Scene) -> Result<CdfField> {
    let field = load_field(path)?;
    field.ensure_compatible(scene)?;
    Ok(field)
}
