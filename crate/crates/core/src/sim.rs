//! Discrete-step kinematic model of the humanoid.
//!
//! One command is one atomic step: there is no notion of time inside a
//! step, only the resulting displacement. Battery drain is the only
//! time-dependent quantity and is advanced by [`RobotState::tick`].

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::protocol::{CoefficientSet, Command, StateMsg};
use crate::world::{CourseMap, Pose2D, ROBOT_RADIUS};

pub const HEAD_PAN_LIMIT: f64 = 1.2;
pub const HEAD_TILT_LIMIT: f64 = 0.6;
pub const FULL_BATTERY_V: f64 = 12.6;
/// Volts per second.
pub const DEFAULT_DRAIN_RATE: f64 = 0.0005;
/// Crawling covers this fraction of the walking step length.
pub const CRAWL_STEP_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Posture {
    Standing,
    Crawling,
    Fallen,
    StartPose,
}

impl Posture {
    pub const ALL: [Posture; 4] = [
        Posture::Standing,
        Posture::Crawling,
        Posture::Fallen,
        Posture::StartPose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Posture::Standing => "standing",
            Posture::Crawling => "crawling",
            Posture::Fallen => "fallen",
            Posture::StartPose => "start_pose",
        }
    }

    pub fn parse(s: &str) -> Option<Posture> {
        Posture::ALL.into_iter().find(|p| p.as_str() == s)
    }

    fn can_walk(self) -> bool {
        matches!(self, Posture::Standing | Posture::Crawling)
    }
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepEvent {
    /// Obstacle ids touched during the step, sorted.
    Contact(Vec<String>),
    Finished,
    Rejected(String),
    PostureChanged(Posture),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: RobotState,
    pub events: Vec<StepEvent>,
}

impl StepResult {
    pub fn rejected(&self) -> bool {
        self.events.iter().any(|e| matches!(e, StepEvent::Rejected(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pose: Pose2D,
    pub head_pan: f64,
    pub head_tilt: f64,
    pub posture: Posture,
    pub battery_v: f64,
    pub coefficients: CoefficientSet,
    pub contact_count: u64,
    pub finished: bool,
}

impl RobotState {
    /// Fresh robot standing on the course's start pose with a full battery.
    pub fn new(map: &CourseMap) -> Self {
        RobotState {
            pose: map.start,
            head_pan: 0.0,
            head_tilt: 0.0,
            posture: Posture::Standing,
            battery_v: FULL_BATTERY_V,
            coefficients: CoefficientSet::default(),
            contact_count: 0,
            finished: false,
        }
    }

    /// Applies one operator command. Commands that are not allowed in the
    /// current posture come back as a [`StepEvent::Rejected`] with the state
    /// untouched; contact is reported and counted but never blocks motion.
    pub fn apply_command(&self, cmd: &Command, map: &CourseMap) -> StepResult {
        let mut next = self.clone();
        let mut events = Vec::new();
        if let Err(reason) = next.step(cmd, map, &mut events) {
            return StepResult {
                state: self.clone(),
                events: vec![StepEvent::Rejected(reason)],
            };
        }
        StepResult { state: next, events }
    }

    fn step(&mut self, cmd: &Command, map: &CourseMap, events: &mut Vec<StepEvent>) -> Result<(), String> {
        let c = self.coefficients;
        let heading = self.pose.theta;
        match *cmd {
            Command::WalkForward | Command::WalkBackward => {
                self.require_mobile(cmd)?;
                let sign = if *cmd == Command::WalkForward { 1.0 } else { -1.0 };
                self.translate(sign * self.stride(), heading, map, events);
            }
            Command::TurnLeft | Command::TurnRight => {
                self.require_mobile(cmd)?;
                let sign = if *cmd == Command::TurnLeft { 1.0 } else { -1.0 };
                self.pose = Pose2D::new(self.pose.x, self.pose.y, heading + sign * c.turn_rad);
            }
            Command::ShiftLeft | Command::ShiftRight => {
                if self.posture != Posture::Standing {
                    return Err(format!("{} requires a standing posture (current: {})", cmd.action(), self.posture));
                }
                let sign = if *cmd == Command::ShiftLeft { 1.0 } else { -1.0 };
                self.translate(sign * c.shift_m, heading + FRAC_PI_2, map, events);
            }
            Command::CrawlForward => {
                self.require_mobile(cmd)?;
                self.set_posture(Posture::Crawling, events);
                self.translate(self.stride(), heading, map, events);
            }
            Command::GetUp => {
                if !matches!(self.posture, Posture::Fallen | Posture::Crawling) {
                    return Err(format!("get_up needs a fallen or crawling robot (current: {})", self.posture));
                }
                self.set_posture(Posture::Standing, events);
            }
            Command::StartPose => {
                self.set_posture(Posture::StartPose, events);
                self.pose = map.start;
                self.head_pan = 0.0;
                self.head_tilt = 0.0;
            }
            Command::ResetPose => {
                self.set_posture(Posture::Standing, events);
                self.head_pan = 0.0;
                self.head_tilt = 0.0;
            }
            Command::HeadPan(delta) => {
                self.head_pan = (self.head_pan + delta).clamp(-HEAD_PAN_LIMIT, HEAD_PAN_LIMIT);
            }
            Command::HeadTilt(delta) => {
                self.head_tilt = (self.head_tilt + delta).clamp(-HEAD_TILT_LIMIT, HEAD_TILT_LIMIT);
            }
            Command::HeadReset => {
                self.head_pan = 0.0;
                self.head_tilt = 0.0;
            }
            Command::SetCoefficients(set) => self.coefficients = set.clamped(),
        }
        Ok(())
    }

    fn require_mobile(&self, cmd: &Command) -> Result<(), String> {
        if self.posture.can_walk() {
            Ok(())
        } else {
            Err(format!(
                "{} requires a standing or crawling posture (current: {})",
                cmd.action(),
                self.posture
            ))
        }
    }

    fn stride(&self) -> f64 {
        match self.posture {
            Posture::Crawling => CRAWL_STEP_FACTOR * self.coefficients.step_m,
            _ => self.coefficients.step_m,
        }
    }

    fn set_posture(&mut self, p: Posture, events: &mut Vec<StepEvent>) {
        if self.posture != p {
            self.posture = p;
            events.push(StepEvent::PostureChanged(p));
        }
    }

    fn translate(&mut self, distance: f64, direction: f64, map: &CourseMap, events: &mut Vec<StepEvent>) {
        let from = self.pose.position();
        self.pose.x += distance * direction.cos();
        self.pose.y += distance * direction.sin();
        let contacts = map.sweep_contact(from, self.pose.position(), ROBOT_RADIUS);
        if !contacts.is_empty() {
            self.contact_count += 1;
            events.push(StepEvent::Contact(contacts));
        }
        if !self.finished && map.reached_finish(&self.pose) {
            self.finished = true;
            events.push(StepEvent::Finished);
        }
    }

    /// Advances simulated time by `dt` seconds at the default drain rate.
    pub fn tick(&self, dt: f64) -> RobotState {
        self.tick_with_drain(dt, DEFAULT_DRAIN_RATE)
    }

    pub fn tick_with_drain(&self, dt: f64, drain_v_per_s: f64) -> RobotState {
        let mut next = self.clone();
        if dt > 0.0 && dt.is_finite() {
            next.battery_v = (self.battery_v - drain_v_per_s * dt).max(0.0);
        }
        next
    }

    pub fn snapshot(&self) -> StateMsg {
        StateMsg {
            x: self.pose.x,
            y: self.pose.y,
            theta: self.pose.theta,
            head_pan: self.head_pan,
            head_tilt: self.head_tilt,
            posture: self.posture,
            coefficients: self.coefficients,
            contact_count: self.contact_count,
            finished: self.finished,
        }
    }

    /// Test hook: the simulated robot never falls on its own.
    pub fn force_posture(&self, p: Posture) -> RobotState {
        RobotState {
            posture: p,
            ..self.clone()
        }
    }
}
