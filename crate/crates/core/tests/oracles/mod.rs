//! Brute-force reference models used to check the analytic code paths.
//!
//! Nothing here calls into the geometry, kinematics or routing code under
//! test; only plain data types are shared.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use huro_teleop::protocol::{CoefficientSet, Command};
use huro_teleop::sim::Posture;
use huro_teleop::world::{CourseMap, Point, Shape};

pub const SAMPLE_STEP: f64 = 1e-3;
pub const MARCH_STEP: f64 = 5e-4;

fn inside(shape: &Shape, p: Point) -> bool {
    match *shape {
        Shape::Rect { x, y, w, h } => p.x >= x && p.x <= x + w && p.y >= y && p.y <= y + h,
        Shape::Circle { cx, cy, r } => (p.x - cx).powi(2) + (p.y - cy).powi(2) <= r * r,
    }
}

/// Points along the outline of a shape, no more than `SAMPLE_STEP` apart.
fn outline(shape: &Shape) -> Vec<Point> {
    match *shape {
        Shape::Rect { x, y, w, h } => {
            let corners = [(x, y), (x + w, y), (x + w, y + h), (x, y + h), (x, y)];
            polyline(&corners)
        }
        Shape::Circle { cx, cy, r } => {
            let n = ((2.0 * PI * r) / SAMPLE_STEP).ceil().max(8.0) as usize;
            (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n as f64;
                    Point::new(cx + r * a.cos(), cy + r * a.sin())
                })
                .collect()
        }
    }
}

fn polyline(pts: &[(f64, f64)]) -> Vec<Point> {
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
        let n = (len / SAMPLE_STEP).ceil().max(1.0) as usize;
        for i in 0..n {
            let t = i as f64 / n as f64;
            out.push(Point::new(x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
        }
    }
    out
}

fn min_distance(samples: &[Point], p: Point) -> f64 {
    samples
        .iter()
        .map(|q| ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Sampled verdict for one disc query: ids in contact, plus the ids whose
/// boundary lies within `tol` of the disc edge (where sampling cannot
/// decide).
#[derive(Debug, Default)]
pub struct SampledContact {
    pub hits: BTreeSet<String>,
    pub ambiguous: BTreeSet<String>,
}

pub struct SampledCourse {
    obstacles: Vec<(String, Shape, Vec<Point>)>,
    walls: Vec<Point>,
    width: f64,
    height: f64,
}

impl SampledCourse {
    pub fn new(m: &CourseMap) -> Self {
        SampledCourse {
            obstacles: m
                .obstacles
                .iter()
                .map(|o| (o.id.clone(), o.shape, outline(&o.shape)))
                .collect(),
            walls: polyline(&[
                (0.0, 0.0),
                (m.width, 0.0),
                (m.width, m.height),
                (0.0, m.height),
                (0.0, 0.0),
            ]),
            width: m.width,
            height: m.height,
        }
    }

    pub fn disc(&self, c: Point, r: f64, tol: f64) -> SampledContact {
        let mut out = SampledContact::default();
        let mut judge = |id: &str, is_inside: bool, d: f64| {
            if is_inside || d < r {
                out.hits.insert(id.to_string());
            }
            if !is_inside && (d - r).abs() <= tol {
                out.ambiguous.insert(id.to_string());
            }
        };
        for (id, shape, samples) in &self.obstacles {
            judge(id, inside(shape, c), min_distance(samples, c));
        }
        let outside = c.x < 0.0 || c.y < 0.0 || c.x > self.width || c.y > self.height;
        judge("wall", outside, min_distance(&self.walls, c));
        out
    }

    /// Disc swept from `a` to `b`, sampled every millimetre along the path.
    /// Point distances are evaluated exactly at each sample.
    pub fn sweep(&self, a: Point, b: Point, r: f64) -> BTreeSet<String> {
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        let n = (len / SAMPLE_STEP).ceil() as usize;
        let mut hits = BTreeSet::new();
        for i in 0..=n {
            let t = if n == 0 { 0.0 } else { i as f64 / n as f64 };
            let p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            for (id, shape, _) in &self.obstacles {
                if point_shape_distance(shape, p) < r {
                    hits.insert(id.clone());
                }
            }
            if p.x < r || p.y < r || p.x > self.width - r || p.y > self.height - r {
                hits.insert("wall".to_string());
            }
        }
        hits
    }
}

fn point_shape_distance(shape: &Shape, p: Point) -> f64 {
    if inside(shape, p) {
        return 0.0;
    }
    match *shape {
        Shape::Circle { cx, cy, r } => ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt() - r,
        Shape::Rect { x, y, w, h } => {
            // Nearest point on each edge, then the smallest.
            let edges = [
                ((x, y), (x + w, y)),
                ((x + w, y), (x + w, y + h)),
                ((x + w, y + h), (x, y + h)),
                ((x, y + h), (x, y)),
            ];
            edges
                .iter()
                .map(|&((x0, y0), (x1, y1))| {
                    let (dx, dy) = (x1 - x0, y1 - y0);
                    let t = (((p.x - x0) * dx + (p.y - y0) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                    ((x0 + t * dx - p.x).powi(2) + (y0 + t * dy - p.y).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Ray marching in `MARCH_STEP` increments until the probe enters an
/// obstacle or leaves the course.
pub fn march_ray(m: &CourseMap, origin: Point, direction: f64) -> f64 {
    let (dx, dy) = (direction.cos(), direction.sin());
    let mut t = 0.0;
    loop {
        let p = Point::new(origin.x + t * dx, origin.y + t * dy);
        let out = p.x < 0.0 || p.y < 0.0 || p.x > m.width || p.y > m.height;
        if out || m.obstacles.iter().any(|o| inside(&o.shape, p)) {
            return t;
        }
        t += MARCH_STEP;
    }
}

/// Steps in a randomized command script.
#[derive(Debug, Clone, Copy)]
pub enum ScriptStep {
    Cmd(Command),
    Force(Posture),
}

#[derive(Debug, Clone)]
pub struct ReferenceRobot {
    pub x: f64,
    pub y: f64,
    /// Accumulated heading, never wrapped.
    pub heading: f64,
    pub posture: Posture,
    pub pan: f64,
    pub tilt: f64,
    pub coefficients: CoefficientSet,
    pub contact_count: u64,
    pub finished: bool,
    /// Every translation segment the robot performed.
    pub segments: Vec<(Point, Point)>,
}

impl ReferenceRobot {
    pub fn new(m: &CourseMap) -> Self {
        ReferenceRobot {
            x: m.start.x,
            y: m.start.y,
            heading: m.start.theta,
            posture: Posture::Standing,
            pan: 0.0,
            tilt: 0.0,
            coefficients: CoefficientSet::default(),
            contact_count: 0,
            finished: false,
            segments: Vec::new(),
        }
    }

    pub fn wrapped_heading(&self) -> f64 {
        let mut t = self.heading % (2.0 * PI);
        if t > PI {
            t -= 2.0 * PI;
        } else if t <= -PI {
            t += 2.0 * PI;
        }
        t
    }

    fn slide(&mut self, dist: f64, angle: f64, m: &CourseMap, sampler: &SampledCourse, radius: f64) {
        let a = Point::new(self.x, self.y);
        self.x += dist * angle.cos();
        self.y += dist * angle.sin();
        let b = Point::new(self.x, self.y);
        self.segments.push((a, b));
        if !sampler.sweep(a, b, radius).is_empty() {
            self.contact_count += 1;
        }
        if self.y >= m.finish_y {
            self.finished = true;
        }
    }

    /// Folds one step into the reference state.
    pub fn apply(&mut self, step: ScriptStep, m: &CourseMap, sampler: &SampledCourse, radius: f64) {
        use Posture::*;
        let cmd = match step {
            ScriptStep::Force(p) => {
                self.posture = p;
                return;
            }
            ScriptStep::Cmd(c) => c,
        };
        let mobile = matches!(self.posture, Standing | Crawling);
        let stride = if self.posture == Crawling {
            self.coefficients.step_m / 2.0
        } else {
            self.coefficients.step_m
        };
        match cmd {
            Command::WalkForward if mobile => self.slide(stride, self.heading, m, sampler, radius),
            Command::WalkBackward if mobile => self.slide(-stride, self.heading, m, sampler, radius),
            Command::TurnLeft if mobile => self.heading += self.coefficients.turn_rad,
            Command::TurnRight if mobile => self.heading -= self.coefficients.turn_rad,
            Command::ShiftLeft if self.posture == Standing => {
                self.slide(self.coefficients.shift_m, self.heading + PI / 2.0, m, sampler, radius)
            }
            Command::ShiftRight if self.posture == Standing => {
                self.slide(-self.coefficients.shift_m, self.heading + PI / 2.0, m, sampler, radius)
            }
            Command::CrawlForward if mobile => {
                self.posture = Crawling;
                self.slide(self.coefficients.step_m / 2.0, self.heading, m, sampler, radius)
            }
            Command::GetUp if matches!(self.posture, Fallen | Crawling) => self.posture = Standing,
            Command::StartPose => {
                self.posture = StartPose;
                self.x = m.start.x;
                self.y = m.start.y;
                self.heading = m.start.theta;
                self.pan = 0.0;
                self.tilt = 0.0;
            }
            Command::ResetPose => {
                self.posture = Standing;
                self.pan = 0.0;
                self.tilt = 0.0;
            }
            Command::HeadPan(v) => self.pan = (self.pan + v).clamp(-1.2, 1.2),
            Command::HeadTilt(v) => self.tilt = (self.tilt + v).clamp(-0.6, 0.6),
            Command::HeadReset => {
                self.pan = 0.0;
                self.tilt = 0.0;
            }
            Command::SetCoefficients(c) => {
                self.coefficients = CoefficientSet {
                    step_m: c.step_m.clamp(0.01, 0.50),
                    turn_rad: c.turn_rad.clamp(0.01, 1.57),
                    shift_m: c.shift_m.clamp(0.01, 0.30),
                }
            }
            _ => {} // rejected
        }
    }
}

/// Smallest signed difference between two angles.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Pub/sub bookkeeping model: who should hear what, in which order.
#[derive(Debug, Default)]
pub struct FanoutModel {
    counts: BTreeMap<(u64, String), u32>,
    pub expected: BTreeMap<u64, Vec<(String, u64)>>,
}

impl FanoutModel {
    pub fn subscribe(&mut self, s: u64, topic: &str) {
        *self.counts.entry((s, topic.to_string())).or_default() += 1;
    }

    pub fn unsubscribe(&mut self, s: u64, topic: &str) {
        if let Some(c) = self.counts.get_mut(&(s, topic.to_string())) {
            *c -= 1;
            if *c == 0 {
                self.counts.remove(&(s, topic.to_string()));
            }
        }
    }

    pub fn drop_session(&mut self, s: u64) {
        self.counts.retain(|(sess, _), _| *sess != s);
    }

    pub fn publish(&mut self, topic: &str, seq: u64) {
        let listeners: Vec<u64> = self
            .counts
            .keys()
            .filter(|(_, t)| t == topic)
            .map(|(s, _)| *s)
            .collect();
        for s in listeners {
            self.expected.entry(s).or_default().push((topic.to_string(), seq));
        }
    }
}

pub mod gen {
    //! Random inputs for the oracle comparisons.

    use huro_teleop::protocol::{CoefficientSet, Command};
    use huro_teleop::sim::Posture;
    use huro_teleop::world::{CourseMap, Obstacle, Pose2D};
    use rand::Rng;

    use super::ScriptStep;

    /// A valid course with up to `max_obstacles` random rects and circles.
    pub fn course<R: Rng>(rng: &mut R, max_obstacles: usize) -> CourseMap {
        loop {
            let width = rng.random_range(2.0..5.0);
            let height = rng.random_range(3.0..8.0);
            let start = Pose2D::new(
                rng.random_range(0.2..width - 0.2),
                rng.random_range(0.2..0.6),
                rng.random_range(-3.2..3.2),
            );
            let mut m = CourseMap {
                width,
                height,
                start,
                finish_y: rng.random_range(height * 0.7..=height),
                obstacles: Vec::new(),
            };
            let n = rng.random_range(0..=max_obstacles);
            for i in 0..n * 4 {
                if m.obstacles.len() == n {
                    break;
                }
                let o = if rng.random_bool(0.5) {
                    let w = rng.random_range(0.02..1.2_f64.min(width));
                    let h = rng.random_range(0.02..1.0);
                    Obstacle::rect(
                        format!("r{i}"),
                        rng.random_range(0.0..width - w),
                        rng.random_range(0.0..height - h),
                        w,
                        h,
                    )
                } else {
                    let r = rng.random_range(0.02..0.5);
                    Obstacle::circle(
                        format!("c{i}"),
                        rng.random_range(r..width - r),
                        rng.random_range(r..height - r),
                        r,
                    )
                };
                if let Ok(next) = m.place_obstacle(o) {
                    m = next;
                }
            }
            if m.validate().is_ok() {
                return m;
            }
        }
    }

    pub fn command<R: Rng>(rng: &mut R) -> Command {
        match rng.random_range(0..20) {
            0..=4 => Command::WalkForward,
            5 => Command::WalkBackward,
            6 | 7 => Command::TurnLeft,
            8 | 9 => Command::TurnRight,
            10 => Command::ShiftLeft,
            11 => Command::ShiftRight,
            12 => Command::CrawlForward,
            13 => Command::GetUp,
            14 => Command::StartPose,
            15 => Command::ResetPose,
            16 => Command::HeadPan(rng.random_range(-0.8..0.8)),
            17 => Command::HeadTilt(rng.random_range(-0.5..0.5)),
            18 => Command::HeadReset,
            _ => Command::SetCoefficients(CoefficientSet {
                step_m: rng.random_range(-0.1..0.7),
                turn_rad: rng.random_range(-0.1..2.0),
                shift_m: rng.random_range(-0.1..0.4),
            }),
        }
    }

    pub fn script<R: Rng>(rng: &mut R, max_len: usize) -> Vec<ScriptStep> {
        let len = rng.random_range(1..=max_len);
        (0..len)
            .map(|_| {
                if rng.random_range(0..50) == 0 {
                    ScriptStep::Force(Posture::ALL[rng.random_range(0..4)])
                } else {
                    ScriptStep::Cmd(command(rng))
                }
            })
            .collect()
    }
}
