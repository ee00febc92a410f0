//! JSON pub/sub envelope and topic payload schemas.
//!
//! The wire format is a subset of the rosbridge v2 protocol: one JSON object
//! per WebSocket text frame with an `op` discriminator. Only topic traffic is
//! supported (`advertise`, `unadvertise`, `publish`, `subscribe`,
//! `unsubscribe`) plus `status` replies from the gateway.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::sim::Posture;
use crate::world::{CourseMap, Obstacle, Pose2D};

/// Fixed topic names used by the console and the teleop node.
pub mod topics {
    pub const CMD: &str = "/teleop/cmd";
    pub const STATE: &str = "/teleop/state";
    pub const TELEMETRY: &str = "/teleop/telemetry";
    pub const LOG: &str = "/teleop/log";
    pub const MAP: &str = "/teleop/map";
    /// Topic stamped on gateway `status` replies.
    pub const STATUS: &str = "/status";

    pub const ALL: [&str; 5] = [CMD, STATE, TELEMETRY, LOG, MAP];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Advertise,
    Unadvertise,
    Publish,
    Subscribe,
    Unsubscribe,
    Status,
}

impl Op {
    pub const ALL: [Op; 6] = [
        Op::Advertise,
        Op::Unadvertise,
        Op::Publish,
        Op::Subscribe,
        Op::Unsubscribe,
        Op::Status,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Advertise => "advertise",
            Op::Unadvertise => "unadvertise",
            Op::Publish => "publish",
            Op::Subscribe => "subscribe",
            Op::Unsubscribe => "unsubscribe",
            Op::Status => "status",
        }
    }

    pub fn parse(s: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.as_str() == s)
    }

    /// Whether envelopes with this op carry a `msg` payload.
    pub fn carries_msg(self) -> bool {
        matches!(self, Op::Publish | Op::Status)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One protocol message.
///
/// Construct through the helper constructors or [`decode_envelope`]; both
/// guarantee that `msg` is present exactly when the op carries one and that
/// the topic starts with `/`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub op: Op,
    pub topic: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msg: Option<Value>,
}

impl Envelope {
    fn bare(op: Op, topic: impl Into<String>) -> Self {
        Envelope {
            op,
            topic: topic.into(),
            id: None,
            msg: None,
        }
    }

    pub fn publish(topic: impl Into<String>, msg: Value) -> Self {
        Envelope {
            msg: Some(msg),
            ..Envelope::bare(Op::Publish, topic)
        }
    }

    pub fn subscribe(topic: impl Into<String>) -> Self {
        Envelope::bare(Op::Subscribe, topic)
    }

    pub fn unsubscribe(topic: impl Into<String>) -> Self {
        Envelope::bare(Op::Unsubscribe, topic)
    }

    pub fn advertise(topic: impl Into<String>) -> Self {
        Envelope::bare(Op::Advertise, topic)
    }

    pub fn unadvertise(topic: impl Into<String>) -> Self {
        Envelope::bare(Op::Unadvertise, topic)
    }

    /// Gateway reply describing a problem with a client frame.
    pub fn status(level: LogLevel, text: impl Into<String>) -> Self {
        let mut msg = Map::new();
        msg.insert("level".into(), Value::String(level.as_str().into()));
        msg.insert("msg".into(), Value::String(text.into()));
        Envelope {
            msg: Some(Value::Object(msg)),
            ..Envelope::bare(Op::Status, topics::STATUS)
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    /// Deserializes the payload into a typed message.
    pub fn payload<T: for<'de> Deserialize<'de>>(&self) -> Option<T> {
        self.msg
            .as_ref()
            .and_then(|m| serde_json::from_value(m.clone()).ok())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown op {0:?}")]
    UnknownOp(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid field `{field}`: {reason}")]
    InvalidField {
        field: &'static str,
        reason: &'static str,
    },
}

impl DecodeError {
    /// Stable name of the failure class, used in status replies.
    pub fn kind(&self) -> &'static str {
        match self {
            DecodeError::MalformedJson(_) => "MalformedJson",
            DecodeError::UnknownOp(_) => "UnknownOp",
            DecodeError::MissingField(_) => "MissingField",
            DecodeError::InvalidField { .. } => "InvalidField",
        }
    }
}

/// Encodes an envelope as single-line JSON with keys in the order
/// `op`, `topic`, `id`, `msg`. Object keys inside `msg` are sorted, which
/// makes the encoding canonical.
pub fn encode_envelope(e: &Envelope) -> String {
    serde_json::to_string(e).expect("envelope serialization is infallible")
}

/// Parses one wire frame. Never panics, whatever the input bytes.
pub fn decode_envelope(text: &[u8]) -> Result<Envelope, DecodeError> {
    let value: Value =
        serde_json::from_slice(text).map_err(|e| DecodeError::MalformedJson(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::MalformedJson(
            "top-level value is not an object".into(),
        ));
    };

    let op = match obj.get("op") {
        None | Some(Value::Null) => return Err(DecodeError::MissingField("op")),
        Some(Value::String(s)) => Op::parse(s).ok_or_else(|| DecodeError::UnknownOp(s.clone()))?,
        Some(other) => return Err(DecodeError::UnknownOp(other.to_string())),
    };

    let topic = match obj.remove("topic") {
        None | Some(Value::Null) => return Err(DecodeError::MissingField("topic")),
        Some(Value::String(s)) if s.starts_with('/') => s,
        Some(Value::String(_)) => {
            return Err(DecodeError::InvalidField {
                field: "topic",
                reason: "must start with '/'",
            })
        }
        Some(_) => {
            return Err(DecodeError::InvalidField {
                field: "topic",
                reason: "must be a string",
            })
        }
    };

    let id = match obj.remove("id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => {
            return Err(DecodeError::InvalidField {
                field: "id",
                reason: "must be a string",
            })
        }
    };

    let msg = match obj.remove("msg") {
        None | Some(Value::Null) if op.carries_msg() => return Err(DecodeError::MissingField("msg")),
        None | Some(Value::Null) => None,
        Some(m) if op.carries_msg() => Some(m),
        Some(_) => {
            return Err(DecodeError::InvalidField {
                field: "msg",
                reason: "only publish and status carry a payload",
            })
        }
    };

    // Other rosbridge fields (`type`, `queue_length`, `compression`, ...) are
    // accepted and dropped.
    Ok(Envelope { op, topic, id, msg })
}

/// Operator-tunable per-press movement magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub step_m: f64,
    pub turn_rad: f64,
    pub shift_m: f64,
}

impl CoefficientSet {
    pub const STEP_RANGE: (f64, f64) = (0.01, 0.50);
    pub const TURN_RANGE: (f64, f64) = (0.01, 1.57);
    pub const SHIFT_RANGE: (f64, f64) = (0.01, 0.30);

    /// Clamps every field into its closed interval. Inputs must be finite.
    pub fn clamped(self) -> Self {
        let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
        CoefficientSet {
            step_m: clamp(self.step_m, Self::STEP_RANGE),
            turn_rad: clamp(self.turn_rad, Self::TURN_RANGE),
            shift_m: clamp(self.shift_m, Self::SHIFT_RANGE),
        }
    }

    pub fn is_in_range(&self) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        within(self.step_m, Self::STEP_RANGE)
            && within(self.turn_rad, Self::TURN_RANGE)
            && within(self.shift_m, Self::SHIFT_RANGE)
    }
}

impl Default for CoefficientSet {
    fn default() -> Self {
        CoefficientSet {
            step_m: 0.10,
            turn_rad: 0.30,
            shift_m: 0.05,
        }
    }
}

/// A validated `/teleop/cmd` payload. Head deltas are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    WalkForward,
    WalkBackward,
    TurnLeft,
    TurnRight,
    ShiftLeft,
    ShiftRight,
    CrawlForward,
    GetUp,
    StartPose,
    ResetPose,
    HeadPan(f64),
    HeadTilt(f64),
    HeadReset,
    SetCoefficients(CoefficientSet),
}

impl Command {
    pub const ACTIONS: [&'static str; 14] = [
        "walk_forward",
        "walk_backward",
        "turn_left",
        "turn_right",
        "shift_left",
        "shift_right",
        "crawl_forward",
        "get_up",
        "start_pose",
        "reset_pose",
        "head_pan",
        "head_tilt",
        "head_reset",
        "set_coefficients",
    ];

    pub fn action(&self) -> &'static str {
        match self {
            Command::WalkForward => "walk_forward",
            Command::WalkBackward => "walk_backward",
            Command::TurnLeft => "turn_left",
            Command::TurnRight => "turn_right",
            Command::ShiftLeft => "shift_left",
            Command::ShiftRight => "shift_right",
            Command::CrawlForward => "crawl_forward",
            Command::GetUp => "get_up",
            Command::StartPose => "start_pose",
            Command::ResetPose => "reset_pose",
            Command::HeadPan(_) => "head_pan",
            Command::HeadTilt(_) => "head_tilt",
            Command::HeadReset => "head_reset",
            Command::SetCoefficients(_) => "set_coefficients",
        }
    }

    /// Wire form: `{"action": ..., "value"?: ..., "coefficients"?: ...}`.
    pub fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("action".into(), Value::String(self.action().into()));
        match self {
            Command::HeadPan(v) | Command::HeadTilt(v) => {
                obj.insert("value".into(), Value::from(*v));
            }
            Command::SetCoefficients(c) => {
                obj.insert(
                    "coefficients".into(),
                    serde_json::to_value(c).expect("coefficients serialize"),
                );
            }
            _ => {}
        }
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("UnknownAction: {0:?}")]
    UnknownAction(String),
    #[error("NonFiniteValue: `{0}` must be a finite number")]
    NonFiniteValue(&'static str),
    #[error("MissingCoefficients: set_coefficients requires `coefficients`")]
    MissingCoefficients,
    #[error("MissingField: `{0}`")]
    MissingField(&'static str),
    #[error("Malformed: {0}")]
    Malformed(String),
}

impl CommandError {
    pub fn kind(&self) -> &'static str {
        match self {
            CommandError::UnknownAction(_) => "UnknownAction",
            CommandError::NonFiniteValue(_) => "NonFiniteValue",
            CommandError::MissingCoefficients => "MissingCoefficients",
            CommandError::MissingField(_) => "MissingField",
            CommandError::Malformed(_) => "Malformed",
        }
    }
}

// Browsers serialize NaN and infinities as `null`; Python emits bare
// `NaN`/`Infinity`, which only survives as a string after JSON parsing.
fn finite_number(field: &'static str, v: &Value) -> Result<f64, CommandError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or(CommandError::NonFiniteValue(field)),
        Value::Null => Err(CommandError::NonFiniteValue(field)),
        Value::String(s) if matches!(s.as_str(), "NaN" | "Infinity" | "-Infinity" | "inf" | "-inf" | "nan") => {
            Err(CommandError::NonFiniteValue(field))
        }
        _ => Err(CommandError::Malformed(format!("`{field}` must be a number"))),
    }
}

fn coefficient_set(v: &Value) -> Result<CoefficientSet, CommandError> {
    let Value::Object(obj) = v else {
        return Err(CommandError::Malformed("`coefficients` must be an object".into()));
    };
    let field = |name: &'static str| -> Result<f64, CommandError> {
        match obj.get(name) {
            Some(v) => finite_number(name, v),
            None => Err(CommandError::Malformed(format!("`coefficients.{name}` missing"))),
        }
    };
    Ok(CoefficientSet {
        step_m: field("step_m")?,
        turn_rad: field("turn_rad")?,
        shift_m: field("shift_m")?,
    }
    .clamped())
}

/// Validates a raw `/teleop/cmd` payload, dropping fields the action does
/// not use and clamping coefficients into range.
pub fn validate_command(raw: &Value) -> Result<Command, CommandError> {
    let Value::Object(obj) = raw else {
        return Err(CommandError::Malformed("command must be a JSON object".into()));
    };
    let action = match obj.get("action") {
        None | Some(Value::Null) => return Err(CommandError::MissingField("action")),
        Some(Value::String(s)) => s.as_str(),
        Some(other) => return Err(CommandError::UnknownAction(other.to_string())),
    };
    if !Command::ACTIONS.contains(&action) {
        return Err(CommandError::UnknownAction(action.to_string()));
    }

    let value = obj.get("value").map(|v| finite_number("value", v)).transpose()?;
    let required_value = || value.ok_or(CommandError::MissingField("value"));

    Ok(match action {
        "walk_forward" => Command::WalkForward,
        "walk_backward" => Command::WalkBackward,
        "turn_left" => Command::TurnLeft,
        "turn_right" => Command::TurnRight,
        "shift_left" => Command::ShiftLeft,
        "shift_right" => Command::ShiftRight,
        "crawl_forward" => Command::CrawlForward,
        "get_up" => Command::GetUp,
        "start_pose" => Command::StartPose,
        "reset_pose" => Command::ResetPose,
        "head_pan" => Command::HeadPan(required_value()?),
        "head_tilt" => Command::HeadTilt(required_value()?),
        "head_reset" => Command::HeadReset,
        "set_coefficients" => match obj.get("coefficients") {
            None | Some(Value::Null) => return Err(CommandError::MissingCoefficients),
            Some(c) => Command::SetCoefficients(coefficient_set(c)?),
        },
        _ => unreachable!("action checked against Command::ACTIONS"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Info,
    Warn,
    Error,
}

impl LogLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            LogLevel::Info => "info",
            LogLevel::Warn => "warn",
            LogLevel::Error => "error",
        }
    }
}

/// Payload of `/teleop/state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMsg {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub head_pan: f64,
    pub head_tilt: f64,
    pub posture: Posture,
    pub coefficients: CoefficientSet,
    pub contact_count: u64,
    pub finished: bool,
}

/// Payload of `/teleop/telemetry`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryMsg {
    pub fps: f64,
    pub battery_v: f64,
    pub uptime_s: f64,
}

/// Payload of `/teleop/log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMsg {
    pub level: LogLevel,
    pub text: String,
    pub t: f64,
}

/// Payload the node publishes on `/teleop/map`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMsg {
    pub course: CourseMap,
    pub robot: Pose2D,
}

/// Course edit a client publishes on `/teleop/map`. Distinguished from
/// [`MapMsg`] by the `edit` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "snake_case")]
pub enum MapEdit {
    PlaceObstacle { obstacle: Obstacle },
    MoveObstacle { id: String, dx: f64, dy: f64 },
    RemoveObstacle { id: String },
    SetStartPose { pose: Pose2D },
}

impl MapEdit {
    /// Returns `None` when the payload is not an edit at all (for example a
    /// `MapMsg` echoed back by a client).
    pub fn from_payload(v: &Value) -> Option<Result<MapEdit, String>> {
        v.get("edit")?;
        Some(serde_json::from_value(v.clone()).map_err(|e| e.to_string()))
    }
}
