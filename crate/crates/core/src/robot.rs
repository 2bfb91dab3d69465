//! Planar two-link arm, circular workspace obstacles and the clearance
//! queries that ground the workspace distance field.
//!
//! The arm is modelled as two zero-width segments, so the robot distance is
//! unsigned. Penetration is detected through the obstacle discs instead:
//! [`scene_clearance`] goes negative as soon as a segment enters a disc.

use std::path::Path;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint angles in radians.
pub type Configuration = DVector<f64>;

pub type Point2 = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl JointLimits {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        let limits = JointLimits { min, max };
        limits.validate()?;
        Ok(limits)
    }

    /// `[-bound, bound]` on every joint.
    pub fn symmetric(dim: usize, bound: f64) -> Self {
        JointLimits {
            min: vec![-bound; dim],
            max: vec![bound; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim()
            && q.iter()
                .zip(self.min.iter().zip(&self.max))
                .all(|(&x, (&lo, &hi))| lo <= x && x <= hi)
    }

    fn validate(&self) -> Result<()> {
        if self.min.len() != self.max.len() {
            return Err(Error::InvalidScene(format!(
                "joint limit vectors differ in length ({} vs {})",
                self.min.len(),
                self.max.len()
            )));
        }
        for (i, (lo, hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidScene(format!(
                    "joint {i}: limits must be finite with min < max (got [{lo}, {hi}])"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkRobot {
    pub link_lengths: [f64; 2],
    pub joint_limits: JointLimits,
}

impl TwoLinkRobot {
    pub fn new(link_lengths: [f64; 2], joint_limits: JointLimits) -> Result<Self> {
        let robot = TwoLinkRobot {
            link_lengths,
            joint_limits,
        };
        robot.validate()?;
        Ok(robot)
    }

    /// The arm used in the two-link experiments: `l1 = l2 = 2`, joints in `[-pi, pi]`.
    pub fn planar_default() -> Self {
        TwoLinkRobot {
            link_lengths: [2.0, 2.0],
            joint_limits: JointLimits::symmetric(2, std::f64::consts::PI),
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths[0] + self.link_lengths[1]
    }

    fn validate(&self) -> Result<()> {
        for (i, l) in self.link_lengths.iter().enumerate() {
            if !(l.is_finite() && *l > 0.0) {
                return Err(Error::InvalidScene(format!(
                    "link {i} length must be positive (got {l})"
                )));
            }
        }
        self.joint_limits.validate()?;
        if self.joint_limits.dim() != 2 {
            return Err(Error::InvalidScene(format!(
                "two-link robot needs 2 joint limits (got {})",
                self.joint_limits.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleObstacle {
    pub center: Point2,
    pub radius: f64,
}

impl CircleObstacle {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidScene(format!(
                "obstacle radius must be positive (got {radius})"
            )));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidScene("obstacle center must be finite".into()));
        }
        Ok(CircleObstacle {
            center: Point2::new(center[0], center[1]),
            radius,
        })
    }
}

/// Robot plus obstacles. Obstacle indices are stable identities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub robot: TwoLinkRobot,
    pub obstacles: Vec<CircleObstacle>,
}

impl Scene {
    pub fn new(robot: TwoLinkRobot, obstacles: Vec<CircleObstacle>) -> Self {
        Scene { robot, obstacles }
    }

    /// Two discs of radius 0.3 at `(2.3, -2.3)` and `(0, 2.45)` in front of the default arm.
    pub fn two_link_benchmark() -> Self {
        Scene {
            robot: TwoLinkRobot::planar_default(),
            obstacles: vec![
                CircleObstacle {
                    center: Point2::new(2.3, -2.3),
                    radius: 0.3,
                },
                CircleObstacle {
                    center: Point2::new(0.0, 2.45),
                    radius: 0.3,
                },
            ],
        }
    }

    pub fn empty(robot: TwoLinkRobot) -> Self {
        Scene {
            robot,
            obstacles: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.robot.dim()
    }

    pub fn limits(&self) -> &JointLimits {
        &self.robot.joint_limits
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SceneDoc = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let doc = SceneDoc::from(self);
        serde_json::to_string_pretty(&doc).expect("scene serialization cannot fail")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    link_lengths: [f64; 2],
    joint_limits: JointLimits,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleDoc {
    center: [f64; 2],
    radius: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    robot: RobotDoc,
    obstacles: Vec<ObstacleDoc>,
}

impl TryFrom<SceneDoc> for Scene {
    type Error = Error;

    fn try_from(doc: SceneDoc) -> Result<Self> {
        let robot = TwoLinkRobot::new(doc.robot.link_lengths, doc.robot.joint_limits)?;
        let obstacles = doc
            .obstacles
            .into_iter()
            .enumerate()
            .map(|(i, o)| {
                CircleObstacle::new(o.center, o.radius)
                    .map_err(|e| Error::InvalidScene(format!("obstacle {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene { robot, obstacles })
    }
}

impl From<&Scene> for SceneDoc {
    fn from(scene: &Scene) -> Self {
        SceneDoc {
            robot: RobotDoc {
                link_lengths: scene.robot.link_lengths,
                joint_limits: scene.robot.joint_limits.clone(),
            },
            obstacles: scene
                .obstacles
                .iter()
                .map(|o| ObstacleDoc {
                    center: [o.center.x, o.center.y],
                    radius: o.radius,
                })
                .collect(),
        }
    }
}

/// Link segments of the arm at `q`: `[(shoulder, elbow), (elbow, tip)]`.
///
/// Panics if `q` is not two-dimensional.
pub fn forward_kinematics(robot: &TwoLinkRobot, q: &[f64]) -> [(Point2, Point2); 2] {
    assert_eq!(
        q.len(),
        2,
        "two-link forward kinematics needs a 2D configuration"
    );
    let [l1, l2] = robot.link_lengths;
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    let shoulder = Point2::zeros();
    let elbow = Point2::new(l1 * c1, l1 * s1);
    let tip = elbow + Point2::new(l2 * c12, l2 * s12);
    [(shoulder, elbow), (elbow, tip)]
}

fn point_segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + ab * t)).norm()
}

/// Unsigned distance from a workspace point to the arm at `q`.
pub fn point_to_robot_distance(robot: &TwoLinkRobot, q: &[f64], p: &Point2) -> f64 {
    forward_kinematics(robot, q)
        .iter()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest obstacle clearance and the index of the obstacle attaining it.
/// Ties go to the lowest index; an empty scene yields `(+inf, None)`.
pub fn scene_clearance_with_index(scene: &Scene, q: &[f64]) -> (f64, Option<usize>) {
    let links = forward_kinematics(&scene.robot, q);
    let mut best = (f64::INFINITY, None);
    for (i, obstacle) in scene.obstacles.iter().enumerate() {
        let d = links
            .iter()
            .map(|(a, b)| point_segment_distance(&obstacle.center, a, b))
            .fold(f64::INFINITY, f64::min)
            - obstacle.radius;
        if d < best.0 {
            best = (d, Some(i));
        }
    }
    best
}

/// Minimum over obstacles of (distance from center to arm) − radius.
///
/// Negative iff a link penetrates a disc. Returns `+inf` for an empty scene.
pub fn scene_clearance(scene: &Scene, q: &[f64]) -> f64 {
    scene_clearance_with_index(scene, q).0
}

pub fn in_collision(scene: &Scene, q: &[f64]) -> bool {
    scene_clearance(scene, q) < 0.0
}
