//! Python bindings: wire codec, course geometry, robot simulator, camera and
//! the pub/sub hub, with JSON-shaped values crossing as plain dicts.

use std::time::Duration;

use huro_teleop::camera::{self, RenderConfig};
use huro_teleop::hub::{self, Delivery, Hub as CoreHub};
use huro_teleop::node::TeleopNode;
use huro_teleop::protocol::{self, Envelope};
use huro_teleop::sim::{Posture, RobotState, StepEvent};
use huro_teleop::world::{self, CourseMap, Obstacle, Point, Pose2D};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};
use serde_json::Value;

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Canonical text encoding of an envelope given as a dict.
#[pyfunction]
fn encode_envelope(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    let text = from_py(obj)?.to_string();
    let e = protocol::decode_envelope(text.as_bytes()).map_err(value_err)?;
    Ok(protocol::encode_envelope(&e))
}

/// Decodes a frame into a dict; raises ValueError naming the error class.
#[pyfunction]
fn decode_envelope<'py>(py: Python<'py>, frame: &[u8]) -> PyResult<Bound<'py, PyAny>> {
    let e = protocol::decode_envelope(frame).map_err(|e| PyValueError::new_err(format!("{}: {e}", e.kind())))?;
    to_py(py, &envelope_value(&e))
}

fn envelope_value(e: &Envelope) -> Value {
    serde_json::from_str(&protocol::encode_envelope(e)).expect("encoded envelope is JSON")
}

/// Validates a command payload and returns its normalized form.
#[pyfunction]
fn validate_command<'py>(py: Python<'py>, obj: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cmd = protocol::validate_command(&from_py(obj)?).map_err(value_err)?;
    to_py(py, &cmd.to_value())
}

#[pyfunction]
fn mjpeg_part<'py>(py: Python<'py>, jpeg: &[u8]) -> Bound<'py, PyBytes> {
    PyBytes::new(py, &hub::mjpeg_part(jpeg))
}

#[pyclass(name = "Course", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCourse {
    inner: CourseMap,
}

#[pymethods]
impl PyCourse {
    /// The built-in empty 3 m x 6 m course.
    #[new]
    fn new() -> Self {
        PyCourse { inner: CourseMap::default() }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        world::load_course(text.as_bytes()).map(|inner| PyCourse { inner }).map_err(value_err)
    }

    fn to_json(&self) -> String {
        String::from_utf8(world::save_course(&self.inner)).expect("course JSON is UTF-8")
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> f64 {
        self.inner.height
    }

    #[getter]
    fn finish_y(&self) -> f64 {
        self.inner.finish_y
    }

    #[getter]
    fn start(&self) -> (f64, f64, f64) {
        let s = self.inner.start;
        (s.x, s.y, s.theta)
    }

    #[getter]
    fn obstacles<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(&self.inner.obstacles).expect("obstacles serialize"))
    }

    fn place_obstacle(&self, obstacle: &Bound<'_, PyAny>) -> PyResult<Self> {
        let o: Obstacle = serde_json::from_value(from_py(obstacle)?).map_err(value_err)?;
        self.edit(self.inner.place_obstacle(o))
    }

    fn move_obstacle(&self, id: &str, dx: f64, dy: f64) -> PyResult<Self> {
        self.edit(self.inner.move_obstacle(id, dx, dy))
    }

    fn remove_obstacle(&self, id: &str) -> PyResult<Self> {
        self.edit(self.inner.remove_obstacle(id))
    }

    fn set_start_pose(&self, x: f64, y: f64, theta: f64) -> PyResult<Self> {
        self.edit(self.inner.set_start_pose(Pose2D::new(x, y, theta)))
    }

    fn check_contact(&self, x: f64, y: f64, radius: f64) -> Vec<String> {
        self.inner.check_contact(Point::new(x, y), radius)
    }

    fn sweep_contact(&self, ax: f64, ay: f64, bx: f64, by: f64, radius: f64) -> Vec<String> {
        self.inner.sweep_contact(Point::new(ax, ay), Point::new(bx, by), radius)
    }

    fn cast_ray(&self, x: f64, y: f64, direction: f64) -> f64 {
        camera::cast_ray(&self.inner, Point::new(x, y), direction)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Course({}x{}, {} obstacles, finish_y={})",
            self.inner.width,
            self.inner.height,
            self.inner.obstacles.len(),
            self.inner.finish_y
        )
    }
}

impl PyCourse {
    fn edit(&self, r: Result<CourseMap, world::WorldError>) -> PyResult<Self> {
        r.map(|inner| PyCourse { inner }).map_err(value_err)
    }
}

fn event_value(e: &StepEvent) -> Value {
    match e {
        StepEvent::Contact(ids) => serde_json::json!({"event": "contact", "ids": ids}),
        StepEvent::Finished => serde_json::json!({"event": "finished"}),
        StepEvent::Rejected(why) => serde_json::json!({"event": "rejected", "reason": why}),
        StepEvent::PostureChanged(p) => serde_json::json!({"event": "posture", "posture": p.as_str()}),
    }
}

/// The simulated robot on a fixed course.
#[pyclass(name = "Robot")]
struct PyRobot {
    course: CourseMap,
    state: RobotState,
}

#[pymethods]
impl PyRobot {
    #[new]
    fn new(course: &PyCourse) -> Self {
        PyRobot {
            course: course.inner.clone(),
            state: RobotState::new(&course.inner),
        }
    }

    /// Applies one command dict; returns the step events as dicts.
    fn apply<'py>(&mut self, py: Python<'py>, command: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let cmd = protocol::validate_command(&from_py(command)?).map_err(value_err)?;
        let r = self.state.apply_command(&cmd, &self.course);
        self.state = r.state;
        to_py(py, &Value::Array(r.events.iter().map(event_value).collect()))
    }

    fn tick(&mut self, dt: f64) {
        self.state = self.state.tick(dt);
    }

    fn force_posture(&mut self, posture: &str) -> PyResult<()> {
        let p = Posture::parse(posture).ok_or_else(|| value_err(format!("unknown posture {posture}")))?;
        self.state = self.state.force_posture(p);
        Ok(())
    }

    fn snapshot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(self.state.snapshot()).expect("state serializes"))
    }

    #[getter]
    fn pose(&self) -> (f64, f64, f64) {
        let p = self.state.pose;
        (p.x, p.y, p.theta)
    }

    #[getter]
    fn battery_v(&self) -> f64 {
        self.state.battery_v
    }

    /// Renders the camera view; returns JPEG bytes.
    #[pyo3(signature = (width=320, height=240, fov=1.047, quality=70))]
    fn render_jpeg<'py>(&self, py: Python<'py>, width: u32, height: u32, fov: f64, quality: u8) -> PyResult<Bound<'py, PyBytes>> {
        let cfg = RenderConfig {
            width,
            height,
            fov,
            jpeg_quality: quality,
            ..RenderConfig::default()
        };
        cfg.validate().map_err(value_err)?;
        let frame = camera::render_frame(&self.course, &self.state, &cfg);
        Ok(PyBytes::new(py, &camera::encode_jpeg(&frame, quality)))
    }
}

/// Pub/sub hub with the teleop node behind it. Frames in, `(session, frame)`
/// pairs out.
#[pyclass(name = "Hub")]
struct PyHub {
    inner: CoreHub,
}

fn deliveries<'py>(py: Python<'py>, ds: Vec<Delivery>) -> PyResult<Bound<'py, PyList>> {
    PyList::new(
        py,
        ds.into_iter().map(|d| (d.session, protocol::encode_envelope(&d.envelope))),
    )
}

#[pymethods]
impl PyHub {
    #[new]
    #[pyo3(signature = (course=None))]
    fn new(course: Option<&PyCourse>) -> Self {
        let map = course.map(|c| c.inner.clone()).unwrap_or_default();
        PyHub { inner: CoreHub::new(TeleopNode::new(map)) }
    }

    fn connect(&mut self) -> u64 {
        self.inner.connect()
    }

    fn disconnect(&mut self, session: u64) {
        self.inner.disconnect(session);
    }

    fn handle_frame<'py>(&mut self, py: Python<'py>, session: u64, frame: &[u8]) -> PyResult<Bound<'py, PyList>> {
        deliveries(py, self.inner.handle_frame(session, frame))
    }

    fn tick<'py>(&mut self, py: Python<'py>, dt: f64) -> PyResult<Bound<'py, PyList>> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(value_err("dt must be a non-negative number of seconds"));
        }
        deliveries(py, self.inner.tick(Duration::from_secs_f64(dt)))
    }

    fn pending(&self) -> usize {
        self.inner.node().pending()
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &serde_json::to_value(self.inner.node().state().snapshot()).expect("state serializes"))
    }
}

#[pymodule]
#[pyo3(name = "huro_teleop")]
fn huro_teleop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(encode_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(decode_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(validate_command, m)?)?;
    m.add_function(wrap_pyfunction!(mjpeg_part, m)?)?;
    m.add_class::<PyCourse>()?;
    m.add_class::<PyRobot>()?;
    m.add_class::<PyHub>()?;
    m.add("ROBOT_RADIUS", world::ROBOT_RADIUS)?;
    let topics = PyDict::new(m.py());
    for (k, v) in [
        ("cmd", protocol::topics::CMD),
        ("state", protocol::topics::STATE),
        ("telemetry", protocol::topics::TELEMETRY),
        ("log", protocol::topics::LOG),
        ("map", protocol::topics::MAP),
        ("status", protocol::topics::STATUS),
    ] {
        topics.set_item(k, v)?;
    }
    m.add("TOPICS", topics)?;
    Ok(())
}
