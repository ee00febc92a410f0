//! Obstacle course model: geometry, persistence, editing and contact queries.
//!
//! Coordinates are meters in a right-handed frame with the origin at the
//! course's lower-left corner; `x` runs across the course and `y` runs
//! toward the finish line. Angles are radians, counterclockwise from `+x`.

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radius of the disc used as the robot footprint.
pub const ROBOT_RADIUS: f64 = 0.12;

/// Pseudo obstacle id reported when the footprint crosses the course edge.
pub const WALL_ID: &str = "wall";

// Slack for the bounds check so that edits which round-trip through
// floating-point offsets do not spuriously leave the course.
const BOUNDS_EPS: f64 = 1e-9;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let t = (a + PI).rem_euclid(TAU) - PI;
    if t <= -PI {
        t + TAU
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned rectangle with lower-left corner `(x, y)`.
    Rect { x: f64, y: f64, w: f64, h: f64 },
    Circle { cx: f64, cy: f64, r: f64 },
}

impl Shape {
    /// Euclidean distance from `p` to the closed shape; zero inside.
    pub fn distance_to(&self, p: Point) -> f64 {
        match *self {
            Shape::Rect { x, y, w, h } => {
                let dx = (x - p.x).max(p.x - (x + w)).max(0.0);
                let dy = (y - p.y).max(p.y - (y + h)).max(0.0);
                dx.hypot(dy)
            }
            Shape::Circle { cx, cy, r } => (p.distance(Point::new(cx, cy)) - r).max(0.0),
        }
    }

    /// Distance from the segment `a`–`b` to the closed shape; zero when they
    /// intersect.
    pub fn distance_to_segment(&self, a: Point, b: Point) -> f64 {
        match *self {
            Shape::Circle { cx, cy, r } => (segment_point_distance(a, b, Point::new(cx, cy)) - r).max(0.0),
            Shape::Rect { x, y, w, h } => {
                if segment_hits_box(a, b, x, y, x + w, y + h) {
                    return 0.0;
                }
                // Disjoint convex sets: the closest pair involves an endpoint
                // of the segment or a corner of the box.
                let corners = [
                    Point::new(x, y),
                    Point::new(x + w, y),
                    Point::new(x, y + h),
                    Point::new(x + w, y + h),
                ];
                corners
                    .into_iter()
                    .map(|c| segment_point_distance(a, b, c))
                    .chain([self.distance_to(a), self.distance_to(b)])
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Shape {
        match *self {
            Shape::Rect { x, y, w, h } => Shape::Rect {
                x: x + dx,
                y: y + dy,
                w,
                h,
            },
            Shape::Circle { cx, cy, r } => Shape::Circle {
                cx: cx + dx,
                cy: cy + dy,
                r,
            },
        }
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Rect { x, y, w, h } => (x, y, x + w, y + h),
            Shape::Circle { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
        }
    }

    fn dims_valid(&self) -> bool {
        let vals: &[f64] = match self {
            Shape::Rect { x, y, w, h } => &[*x, *y, *w, *h],
            Shape::Circle { cx, cy, r } => &[*cx, *cy, *r],
        };
        let positive = match *self {
            Shape::Rect { w, h, .. } => w > 0.0 && h > 0.0,
            Shape::Circle { r, .. } => r > 0.0,
        };
        positive && vals.iter().all(|v| v.is_finite())
    }
}

fn segment_point_distance(a: Point, b: Point, p: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a.distance(p);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    Point::new(a.x + t * dx, a.y + t * dy).distance(p)
}

// Liang-Barsky clip of the segment against the closed box.
fn segment_hits_box(a: Point, b: Point, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    for (p, q) in [(-dx, a.x - x0), (dx, x1 - a.x), (-dy, a.y - y0), (dy, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
            continue;
        }
        let r = q / p;
        if p < 0.0 {
            if r > t1 {
                return false;
            }
            t0 = t0.max(r);
        } else {
            if r < t0 {
                return false;
            }
            t1 = t1.min(r);
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    #[serde(flatten)]
    pub shape: Shape,
}

impl Obstacle {
    pub fn rect(id: impl Into<String>, x: f64, y: f64, w: f64, h: f64) -> Self {
        Obstacle {
            id: id.into(),
            shape: Shape::Rect { x, y, w, h },
        }
    }

    pub fn circle(id: impl Into<String>, cx: f64, cy: f64, r: f64) -> Self {
        Obstacle {
            id: id.into(),
            shape: Shape::Circle { cx, cy, r },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("ParseError: {0}")]
    Parse(String),
    #[error("InvalidGeometry: {0}")]
    InvalidGeometry(String),
    #[error("DuplicateId: {0:?}")]
    DuplicateId(String),
    #[error("UnknownId: {0:?}")]
    UnknownId(String),
}

/// The obstacle course. Values handed out by this module always satisfy
/// [`CourseMap::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseMap {
    pub width: f64,
    pub height: f64,
    pub start: Pose2D,
    pub finish_y: f64,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl Default for CourseMap {
    /// Empty 3 m × 6 m course, start near the bottom edge facing the finish.
    fn default() -> Self {
        CourseMap {
            width: 3.0,
            height: 6.0,
            start: Pose2D::new(1.5, 0.3, PI / 2.0),
            finish_y: 5.5,
            obstacles: Vec::new(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> WorldError {
    WorldError::InvalidGeometry(msg.into())
}

impl CourseMap {
    /// Checks every invariant and reports the first one violated.
    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(invalid("width must be a positive number"));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(invalid("height must be a positive number"));
        }
        if !(self.finish_y > 0.0 && self.finish_y <= self.height) {
            return Err(invalid("finish_y must lie in (0, height]"));
        }
        let mut ids = BTreeSet::new();
        for o in &self.obstacles {
            if o.id.is_empty() || o.id == WALL_ID {
                return Err(invalid(format!("obstacle id {:?} is reserved or empty", o.id)));
            }
            if !ids.insert(o.id.as_str()) {
                return Err(WorldError::DuplicateId(o.id.clone()));
            }
            if !o.shape.dims_valid() {
                return Err(invalid(format!(
                    "obstacle {:?} needs finite coordinates and positive size",
                    o.id
                )));
            }
            let (x0, y0, x1, y1) = o.shape.bounds();
            if x0 < -BOUNDS_EPS
                || y0 < -BOUNDS_EPS
                || x1 > self.width + BOUNDS_EPS
                || y1 > self.height + BOUNDS_EPS
            {
                return Err(invalid(format!("obstacle {:?} is outside the course bounds", o.id)));
            }
        }
        let s = self.start;
        if !s.is_finite() || s.theta != normalize_angle(s.theta) {
            return Err(invalid("start pose must be finite with normalized heading"));
        }
        if !(0.0..=self.width).contains(&s.x) || !(0.0..=self.height).contains(&s.y) {
            return Err(invalid("start pose is outside the course bounds"));
        }
        let contacts = self.check_contact(s.position(), ROBOT_RADIUS);
        if !contacts.is_empty() {
            return Err(invalid(format!(
                "start pose is in contact with {}",
                contacts.join(", ")
            )));
        }
        if self.finish_y <= s.y {
            return Err(invalid("finish_y must be beyond the start pose"));
        }
        Ok(())
    }

    pub fn obstacle(&self, id: &str) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    fn validated(self) -> Result<CourseMap, WorldError> {
        self.validate().map(|()| self)
    }

    pub fn place_obstacle(&self, o: Obstacle) -> Result<CourseMap, WorldError> {
        if self.obstacle(&o.id).is_some() {
            return Err(WorldError::DuplicateId(o.id));
        }
        let mut next = self.clone();
        next.obstacles.push(o);
        next.validated()
    }

    pub fn move_obstacle(&self, id: &str, dx: f64, dy: f64) -> Result<CourseMap, WorldError> {
        let mut next = self.clone();
        let o = next
            .obstacles
            .iter_mut()
            .find(|o| o.id == id)
            .ok_or_else(|| WorldError::UnknownId(id.to_string()))?;
        o.shape = o.shape.translated(dx, dy);
        next.validated()
    }

    pub fn remove_obstacle(&self, id: &str) -> Result<CourseMap, WorldError> {
        let idx = self
            .obstacles
            .iter()
            .position(|o| o.id == id)
            .ok_or_else(|| WorldError::UnknownId(id.to_string()))?;
        let mut next = self.clone();
        next.obstacles.remove(idx);
        next.validated()
    }

    pub fn set_start_pose(&self, p: Pose2D) -> Result<CourseMap, WorldError> {
        let mut next = self.clone();
        next.start = Pose2D::new(p.x, p.y, p.theta);
        next.validated()
    }

    /// Ids of every obstacle the open disc overlaps, plus [`WALL_ID`] when the
    /// disc pokes outside the course. Sorted, so the result does not depend
    /// on obstacle order. Touching without overlap is not contact.
    pub fn check_contact(&self, center: Point, radius: f64) -> Vec<String> {
        self.sweep_contact(center, center, radius)
    }

    /// Contacts of a disc swept along the segment `from`–`to`.
    pub fn sweep_contact(&self, from: Point, to: Point, radius: f64) -> Vec<String> {
        // Fixed endpoint order keeps the result exactly symmetric.
        let (a, b) = if (to.x, to.y) < (from.x, from.y) {
            (to, from)
        } else {
            (from, to)
        };
        let mut hits: BTreeSet<String> = self
            .obstacles
            .iter()
            .filter(|o| o.shape.distance_to_segment(a, b) < radius)
            .map(|o| o.id.clone())
            .collect();
        // The course is convex, so the swept disc leaves it only if one of
        // the end discs does.
        if self.disc_crosses_wall(a, radius) || self.disc_crosses_wall(b, radius) {
            hits.insert(WALL_ID.to_string());
        }
        hits.into_iter().collect()
    }

    fn disc_crosses_wall(&self, c: Point, radius: f64) -> bool {
        c.x - radius < 0.0
            || c.y - radius < 0.0
            || c.x + radius > self.width
            || c.y + radius > self.height
    }

    pub fn reached_finish(&self, p: &Pose2D) -> bool {
        p.y >= self.finish_y
    }

    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// Parses and validates a course file.
pub fn load_course(bytes: &[u8]) -> Result<CourseMap, WorldError> {
    let mut map: CourseMap =
        serde_json::from_slice(bytes).map_err(|e| WorldError::Parse(e.to_string()))?;
    map.start.theta = normalize_angle(map.start.theta);
    map.validated()
}

pub fn save_course(m: &CourseMap) -> Vec<u8> {
    serde_json::to_vec_pretty(m).expect("course serialization is infallible")
}
