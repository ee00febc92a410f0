//! The remote-control node: turns `/teleop/cmd` traffic into simulator steps
//! and produces the feedback topics.

use std::collections::VecDeque;
use std::time::Duration;

use serde::Serialize;

use crate::protocol::{
    topics, validate_command, Command, CommandError, Envelope, LogLevel, LogMsg, MapEdit, MapMsg,
    Op, TelemetryMsg,
};
use crate::sim::{Posture, RobotState, StepEvent, DEFAULT_DRAIN_RATE};
use crate::world::{CourseMap, WorldError};

/// Entries retained by the in-memory log.
pub const LOG_CAPACITY: usize = 500;

const TELEMETRY_PERIOD: Duration = Duration::from_secs(1);

fn publish<T: Serialize>(topic: &str, msg: &T) -> Envelope {
    Envelope::publish(topic, serde_json::to_value(msg).expect("payload serializes"))
}

#[derive(Debug, Clone)]
pub struct TeleopNode {
    map: CourseMap,
    state: RobotState,
    queue: VecDeque<Command>,
    log: VecDeque<LogMsg>,
    uptime: Duration,
    next_telemetry: Duration,
    last_telemetry: Duration,
    frames_since_telemetry: u64,
    drain_rate: f64,
}

impl TeleopNode {
    pub fn new(map: CourseMap) -> Self {
        let state = RobotState::new(&map);
        TeleopNode {
            map,
            state,
            queue: VecDeque::new(),
            log: VecDeque::with_capacity(LOG_CAPACITY),
            uptime: Duration::ZERO,
            next_telemetry: TELEMETRY_PERIOD,
            last_telemetry: Duration::ZERO,
            frames_since_telemetry: 0,
            drain_rate: DEFAULT_DRAIN_RATE,
        }
    }

    pub fn with_drain_rate(mut self, volts_per_s: f64) -> Self {
        self.drain_rate = volts_per_s;
        self
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn map(&self) -> &CourseMap {
        &self.map
    }

    pub fn map_msg(&self) -> MapMsg {
        MapMsg {
            course: self.map.clone(),
            robot: self.state.pose,
        }
    }

    pub fn uptime(&self) -> Duration {
        self.uptime
    }

    /// Commands accepted but not yet applied.
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn log(&self) -> impl ExactSizeIterator<Item = &LogMsg> {
        self.log.iter()
    }

    /// Topics whose publishes the node consumes.
    pub fn consumes(topic: &str) -> bool {
        topic == topics::CMD || topic == topics::MAP
    }

    /// Test hook: replaces the robot posture directly.
    pub fn force_posture(&mut self, p: Posture) {
        self.state = self.state.force_posture(p);
    }

    /// Counts camera frames rendered since the previous call; reported as
    /// FPS in the next telemetry message.
    pub fn record_frames(&mut self, n: u64) {
        self.frames_since_telemetry += n;
    }

    /// Timestamps and retains a log line. The returned message is what gets
    /// published on `/teleop/log`.
    pub fn append_log(&mut self, level: LogLevel, text: impl Into<String>) -> LogMsg {
        let entry = LogMsg {
            level,
            text: text.into(),
            t: self.uptime.as_secs_f64(),
        };
        if self.log.len() == LOG_CAPACITY {
            self.log.pop_front();
        }
        self.log.push_back(entry.clone());
        entry
    }

    fn log_envelope(&mut self, level: LogLevel, text: impl Into<String>) -> Envelope {
        let entry = self.append_log(level, text);
        publish(topics::LOG, &entry)
    }

    /// Handles a client publish. Valid commands are queued for the next tick;
    /// invalid ones and failed map edits produce a log message instead.
    pub fn handle_publish(&mut self, e: &Envelope) -> Vec<Envelope> {
        let Some(msg) = e.msg.as_ref().filter(|_| e.op == Op::Publish) else {
            return Vec::new();
        };
        match e.topic.as_str() {
            topics::CMD => match validate_command(msg) {
                Ok(cmd) => {
                    self.queue.push_back(cmd);
                    Vec::new()
                }
                Err(err) => {
                    // An unknown action is an operator slip, anything else is
                    // a broken client.
                    let level = match err {
                        CommandError::UnknownAction(_) => LogLevel::Warn,
                        _ => LogLevel::Error,
                    };
                    vec![self.log_envelope(level, format!("command refused: {err}"))]
                }
            },
            topics::MAP => match MapEdit::from_payload(msg) {
                None => Vec::new(),
                Some(Err(reason)) => {
                    vec![self.log_envelope(LogLevel::Error, format!("map edit refused: Malformed: {reason}"))]
                }
                Some(Ok(edit)) => match self.apply_edit(edit) {
                    Ok(()) => vec![publish(topics::MAP, &self.map_msg())],
                    Err(err) => vec![self.log_envelope(LogLevel::Warn, format!("map edit refused: {err}"))],
                },
            },
            _ => Vec::new(),
        }
    }

    fn apply_edit(&mut self, edit: MapEdit) -> Result<(), WorldError> {
        self.map = match edit {
            MapEdit::PlaceObstacle { obstacle } => self.map.place_obstacle(obstacle)?,
            MapEdit::MoveObstacle { id, dx, dy } => self.map.move_obstacle(&id, dx, dy)?,
            MapEdit::RemoveObstacle { id } => self.map.remove_obstacle(&id)?,
            MapEdit::SetStartPose { pose } => self.map.set_start_pose(pose)?,
        };
        Ok(())
    }

    /// Applies queued commands in arrival order, advances the battery, and
    /// emits log lines, one state message, and (once per simulated second)
    /// a telemetry message.
    pub fn run_tick(&mut self, dt: Duration) -> Vec<Envelope> {
        let mut out = Vec::new();
        while let Some(cmd) = self.queue.pop_front() {
            let step = self.state.apply_command(&cmd, &self.map);
            self.state = step.state;
            for event in step.events {
                let (level, text) = match event {
                    StepEvent::Rejected(reason) => (LogLevel::Warn, format!("rejected {}: {reason}", cmd.action())),
                    StepEvent::Contact(ids) => (LogLevel::Warn, format!("contact with {}", ids.join(", "))),
                    StepEvent::Finished => (LogLevel::Info, "finish line reached".to_string()),
                    StepEvent::PostureChanged(p) => (LogLevel::Info, format!("posture changed to {p}")),
                };
                out.push(self.log_envelope(level, text));
            }
        }

        self.state = self
            .state
            .tick_with_drain(dt.as_secs_f64(), self.drain_rate);
        self.uptime += dt;
        out.push(publish(topics::STATE, &self.state.snapshot()));

        if self.uptime >= self.next_telemetry {
            let window = (self.uptime - self.last_telemetry).as_secs_f64();
            let fps = if window > 0.0 {
                self.frames_since_telemetry as f64 / window
            } else {
                0.0
            };
            out.push(publish(
                topics::TELEMETRY,
                &TelemetryMsg {
                    fps,
                    battery_v: self.state.battery_v,
                    uptime_s: self.uptime.as_secs_f64(),
                },
            ));
            self.frames_since_telemetry = 0;
            self.last_telemetry = self.uptime;
            let whole = self.uptime.as_secs() + 1;
            self.next_telemetry = Duration::from_secs(whole);
        }
        out
    }
}
