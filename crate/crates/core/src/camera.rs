//! First-person camera: column raycaster over the course plus JPEG encoding.
//!
//! Rendering constants:
//! * column wall height is `height * WALL_SCALE_M / distance`, clamped to the
//!   frame height (`WALL_SCALE_M` = 1.0 m);
//! * full head tilt shifts the horizon by a third of the frame height;
//! * crawling lowers the horizon by a quarter of the frame height.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::ExtendedColorType;
use serde::{Deserialize, Serialize};

use crate::sim::{Posture, RobotState, HEAD_TILT_LIMIT};
use crate::world::{CourseMap, Point, Shape};

pub const WALL_SCALE_M: f64 = 1.0;

const SKY: [u8; 3] = [142, 192, 230];
const FLOOR: [u8; 3] = [52, 118, 64];
const WALL: [u8; 3] = [205, 205, 198];
/// The far wall behind the finish line.
const FINISH_WALL: [u8; 3] = [240, 140, 30];
const OBSTACLE_PALETTE: [[u8; 3]; 6] = [
    [30, 90, 200],
    [230, 120, 20],
    [200, 40, 50],
    [120, 60, 170],
    [20, 150, 160],
    [220, 200, 40],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub fps: u32,
    pub jpeg_quality: u8,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 320,
            height: 240,
            fov: 1.047,
            fps: 15,
            jpeg_quality: 70,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.width < 32 {
            return Err(format!("camera width {} is below 32 px", self.width));
        }
        if self.height < 24 {
            return Err(format!("camera height {} is below 24 px", self.height));
        }
        if !(self.fov > 0.0 && self.fov < std::f64::consts::PI) {
            return Err(format!("field of view {} must lie in (0, pi)", self.fov));
        }
        if !(1..=30).contains(&self.fps) {
            return Err(format!("camera fps {} must lie in [1, 30]", self.fps));
        }
        if !(1..=100).contains(&self.jpeg_quality) {
            return Err(format!("jpeg quality {} must lie in [1, 100]", self.jpeg_quality));
        }
        Ok(())
    }
}

/// Row-major RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        FrameBuffer {
            width,
            height,
            pixels: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitTarget {
    /// Index into `CourseMap::obstacles`.
    Obstacle(usize),
    WallSouth,
    WallNorth,
    WallWest,
    WallEast,
    /// The ray started outside the course.
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub target: HitTarget,
}

fn ray_box(o: Point, (dx, dy): (f64, f64), (x0, y0, x1, y1): (f64, f64, f64, f64)) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for (origin, d, lo, hi) in [(o.x, dx, x0, x1), (o.y, dy, y0, y1)] {
        if d == 0.0 {
            if origin < lo || origin > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - origin) / d, (hi - origin) / d);
        t_enter = t_enter.max(a.min(b));
        t_exit = t_exit.min(a.max(b));
    }
    if t_exit < t_enter || t_exit < 0.0 {
        return None;
    }
    Some(t_enter.max(0.0))
}

fn ray_circle(o: Point, (dx, dy): (f64, f64), c: Point, r: f64) -> Option<f64> {
    let (ox, oy) = (o.x - c.x, o.y - c.y);
    let b = dx * ox + dy * oy;
    let cc = ox * ox + oy * oy - r * r;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

/// Casts a ray and reports what it hits first. Rays starting inside an
/// obstacle hit it at distance zero; rays starting outside the course report
/// [`HitTarget::Outside`] at distance zero.
pub fn cast_ray_hit(m: &CourseMap, origin: Point, direction: f64) -> RayHit {
    if !m.contains(origin) {
        return RayHit {
            distance: 0.0,
            target: HitTarget::Outside,
        };
    }
    let dir = (direction.cos(), direction.sin());

    let (tx, wall_x) = if dir.0 > 0.0 {
        ((m.width - origin.x) / dir.0, HitTarget::WallEast)
    } else if dir.0 < 0.0 {
        (-origin.x / dir.0, HitTarget::WallWest)
    } else {
        (f64::INFINITY, HitTarget::WallEast)
    };
    let (ty, wall_y) = if dir.1 > 0.0 {
        ((m.height - origin.y) / dir.1, HitTarget::WallNorth)
    } else if dir.1 < 0.0 {
        (-origin.y / dir.1, HitTarget::WallSouth)
    } else {
        (f64::INFINITY, HitTarget::WallNorth)
    };
    let mut best = if tx < ty {
        RayHit { distance: tx, target: wall_x }
    } else {
        RayHit { distance: ty, target: wall_y }
    };

    for (i, o) in m.obstacles.iter().enumerate() {
        let t = match o.shape {
            Shape::Rect { x, y, w, h } => ray_box(origin, dir, (x, y, x + w, y + h)),
            Shape::Circle { cx, cy, r } => ray_circle(origin, dir, Point::new(cx, cy), r),
        };
        if let Some(t) = t.filter(|t| *t < best.distance) {
            best = RayHit {
                distance: t,
                target: HitTarget::Obstacle(i),
            };
        }
    }
    best
}

/// Distance along the ray to the nearest obstacle or wall.
pub fn cast_ray(m: &CourseMap, origin: Point, direction: f64) -> f64 {
    cast_ray_hit(m, origin, direction).distance
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn base_color(m: &CourseMap, target: HitTarget) -> [u8; 3] {
    match target {
        HitTarget::Obstacle(i) => {
            OBSTACLE_PALETTE[(fnv1a(&m.obstacles[i].id) % OBSTACLE_PALETTE.len() as u64) as usize]
        }
        HitTarget::WallNorth => FINISH_WALL,
        HitTarget::WallEast | HitTarget::WallWest => [
            WALL[0] - 25,
            WALL[1] - 25,
            WALL[2] - 25,
        ],
        HitTarget::WallSouth | HitTarget::Outside => WALL,
    }
}

fn shade(rgb: [u8; 3], distance: f64) -> [u8; 3] {
    let f = (1.0 / (1.0 + 0.15 * distance)).clamp(0.35, 1.0);
    rgb.map(|c| (c as f64 * f).round() as u8)
}

/// Renders the robot's view. Column `j` looks along
/// `theta + head_pan - fov * (j / (width - 1) - 1/2)`, so the left edge of the
/// image is the counterclockwise side, as with a real camera.
pub fn render_frame(m: &CourseMap, s: &RobotState, cfg: &RenderConfig) -> FrameBuffer {
    let (w, h) = (cfg.width.max(2), cfg.height.max(1));
    let mut frame = FrameBuffer::new(w, h);
    let hf = h as f64;

    let mut horizon = hf / 2.0 + (s.head_tilt / HEAD_TILT_LIMIT).clamp(-1.0, 1.0) * hf / 3.0;
    if s.posture == Posture::Crawling {
        horizon += hf / 4.0;
    }
    let heading = s.pose.theta + s.head_pan;
    let origin = s.pose.position();

    for j in 0..w {
        let offset = cfg.fov * (j as f64 / (w - 1) as f64 - 0.5);
        let hit = cast_ray_hit(m, origin, heading - offset);
        let wall_h = if hit.distance > 0.0 {
            (hf * WALL_SCALE_M / hit.distance).min(hf)
        } else {
            hf
        };
        let top = horizon - wall_h / 2.0;
        let bottom = horizon + wall_h / 2.0;
        let wall = shade(base_color(m, hit.target), hit.distance);
        for i in 0..h {
            let yc = i as f64 + 0.5;
            let rgb = if yc < top {
                SKY
            } else if yc > bottom {
                FLOOR
            } else {
                wall
            };
            frame.put(j, i, rgb);
        }
    }
    frame
}

/// Baseline JPEG encoding. `quality` is clamped into 1..=100.
pub fn encode_jpeg(f: &FrameBuffer, quality: u8) -> Vec<u8> {
    let mut out = Cursor::new(Vec::with_capacity(f.pixels.len() / 8));
    JpegEncoder::new_with_quality(&mut out, quality.clamp(1, 100))
        .encode(&f.pixels, f.width, f.height, ExtendedColorType::Rgb8)
        .expect("RGB8 frame with consistent dimensions always encodes");
    out.into_inner()
}
