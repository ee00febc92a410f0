//! Core of the humanoid teleoperation stack.
//!
//! Everything in this crate is synchronous and free of I/O: the JSON pub/sub
//! protocol, the obstacle course model, the kinematic robot simulator, the
//! raycast camera, the teleop node that ties them together, and the topic
//! hub the network gateway drives.

pub mod camera;
pub mod hub;
pub mod node;
pub mod protocol;
pub mod sim;
pub mod world;

pub use camera::{cast_ray, encode_jpeg, render_frame, FrameBuffer, RenderConfig};
pub use hub::{mjpeg_part, Delivery, Hub, SessionId, TopicRegistry};
pub use node::TeleopNode;
pub use protocol::{
    decode_envelope, encode_envelope, validate_command, Command, CoefficientSet, DecodeError,
    Envelope, Op,
};
pub use sim::{Posture, RobotState, StepEvent, StepResult};
pub use world::{CourseMap, Obstacle, Point, Pose2D, Shape};
