//! Async runtime around [`Hub`]: one actor task owns the hub and the
//! simulator, WebSocket connections feed it through a channel, and every
//! `/stream` viewer gets its own paced render loop.

use std::collections::HashMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{FromRequestParts, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use bytes::Bytes;
use futures::{SinkExt, StreamExt};
use huro_teleop::camera::{encode_jpeg, render_frame, RenderConfig};
use huro_teleop::hub::{mjpeg_part, Delivery, Hub, SessionId, MJPEG_CONTENT_TYPE};
use huro_teleop::node::TeleopNode;
use huro_teleop::protocol::{encode_envelope, Envelope, LogLevel};
use huro_teleop::sim::{Posture, RobotState};
use huro_teleop::world::CourseMap;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;
use tracing::{debug, info, warn};

use crate::config::Config;

/// Outbound frames buffered per WebSocket session before it is dropped as
/// unresponsive.
const SESSION_BUFFER: usize = 1024;

/// How the simulation clock advances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ticking {
    /// A timer ticks the node at the given rate.
    Realtime { hz: u32 },
    /// Only [`GatewayHandle::step`] advances the simulation.
    Manual,
}

/// What the camera needs to render a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub map: CourseMap,
    pub robot: RobotState,
}

enum HubCmd {
    Connect {
        out: mpsc::Sender<String>,
        reply: oneshot::Sender<SessionId>,
    },
    Frame {
        session: SessionId,
        text: String,
    },
    Disconnect(SessionId),
    Tick {
        dt: Duration,
        done: Option<oneshot::Sender<()>>,
    },
    Pending(oneshot::Sender<usize>),
    ForcePosture(Posture),
}

/// Cheap cloneable access to a running gateway.
#[derive(Clone)]
pub struct GatewayHandle {
    tx: mpsc::Sender<HubCmd>,
    scene: watch::Receiver<Arc<Scene>>,
    frames: Arc<AtomicU64>,
    render: RenderConfig,
    static_dir: Arc<PathBuf>,
}

impl GatewayHandle {
    /// Advances the simulation by one tick and waits until its output has
    /// been queued to every session.
    pub async fn step(&self, dt: Duration) {
        let (done, wait) = oneshot::channel();
        if self.tx.send(HubCmd::Tick { dt, done: Some(done) }).await.is_ok() {
            let _ = wait.await;
        }
    }

    /// Commands received but not yet applied by a tick.
    pub async fn pending_commands(&self) -> usize {
        let (reply, wait) = oneshot::channel();
        if self.tx.send(HubCmd::Pending(reply)).await.is_err() {
            return 0;
        }
        wait.await.unwrap_or(0)
    }

    pub async fn force_posture(&self, p: Posture) {
        let _ = self.tx.send(HubCmd::ForcePosture(p)).await;
    }

    pub fn scene(&self) -> Arc<Scene> {
        self.scene.borrow().clone()
    }

    /// Router serving `/`, `/static/*`, `/stream`, `/health` and `/ws`.
    pub fn router(&self) -> Router {
        Router::new()
            .route("/", get(index))
            .route("/ws", get(ws_upgrade))
            .route("/stream", get(stream))
            .route("/health", get(health))
            .nest_service("/static", ServeDir::new(self.static_dir.as_ref()))
            .with_state(self.clone())
    }
}

/// Spawns the hub actor (and the tick timer in realtime mode) on the current
/// tokio runtime.
pub fn spawn(config: &Config, map: CourseMap, ticking: Ticking) -> GatewayHandle {
    let mut hub = Hub::new(TeleopNode::new(map));
    hub.set_self_echo(config.self_echo);
    let (tx, rx) = mpsc::channel(4096);
    let (scene_tx, scene_rx) = watch::channel(Arc::new(scene_of(&hub)));
    let frames = Arc::new(AtomicU64::new(0));
    tokio::spawn(run_hub(hub, rx, scene_tx, frames.clone()));

    if let Ticking::Realtime { hz } = ticking {
        let tx = tx.clone();
        tokio::spawn(async move {
            let dt = Duration::from_secs_f64(1.0 / hz.max(1) as f64);
            let mut interval = tokio::time::interval(dt);
            interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
            loop {
                interval.tick().await;
                if tx.send(HubCmd::Tick { dt, done: None }).await.is_err() {
                    break;
                }
            }
        });
    }

    GatewayHandle {
        tx,
        scene: scene_rx,
        frames,
        render: config.render,
        static_dir: Arc::new(config.static_dir.clone()),
    }
}

/// Serves the gateway on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    handle: GatewayHandle,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    info!(addr = %listener.local_addr()?, "gateway listening");
    axum::serve(listener, handle.router())
        .with_graceful_shutdown(shutdown)
        .await
}

fn scene_of(hub: &Hub) -> Scene {
    Scene {
        map: hub.node().map().clone(),
        robot: hub.node().state().clone(),
    }
}

async fn run_hub(
    mut hub: Hub,
    mut rx: mpsc::Receiver<HubCmd>,
    scene_tx: watch::Sender<Arc<Scene>>,
    frames: Arc<AtomicU64>,
) {
    let mut outboxes: HashMap<SessionId, mpsc::Sender<String>> = HashMap::new();
    while let Some(cmd) = rx.recv().await {
        let deliveries = match cmd {
            HubCmd::Connect { out, reply } => {
                let id = hub.connect();
                outboxes.insert(id, out);
                let _ = reply.send(id);
                debug!(session = id, "session connected");
                continue;
            }
            HubCmd::Disconnect(id) => {
                hub.disconnect(id);
                outboxes.remove(&id);
                debug!(session = id, "session closed");
                continue;
            }
            HubCmd::Pending(reply) => {
                let _ = reply.send(hub.node().pending());
                continue;
            }
            HubCmd::ForcePosture(p) => {
                hub.node_mut().force_posture(p);
                Vec::new()
            }
            HubCmd::Frame { session, text } => hub.handle_frame(session, text.as_bytes()),
            HubCmd::Tick { dt, done } => {
                hub.node_mut().record_frames(frames.swap(0, Ordering::Relaxed));
                let out = hub.tick(dt);
                deliver(&mut hub, &mut outboxes, out);
                publish_scene(&hub, &scene_tx);
                if let Some(done) = done {
                    let _ = done.send(());
                }
                continue;
            }
        };
        deliver(&mut hub, &mut outboxes, deliveries);
        publish_scene(&hub, &scene_tx);
    }
}

fn publish_scene(hub: &Hub, scene_tx: &watch::Sender<Arc<Scene>>) {
    scene_tx.send_if_modified(|current| {
        let node = hub.node();
        if current.robot == *node.state() && current.map == *node.map() {
            return false;
        }
        *current = Arc::new(scene_of(hub));
        true
    });
}

fn deliver(hub: &mut Hub, outboxes: &mut HashMap<SessionId, mpsc::Sender<String>>, deliveries: Vec<Delivery>) {
    for d in deliveries {
        let Some(out) = outboxes.get(&d.session) else {
            continue;
        };
        if out.try_send(encode_envelope(&d.envelope)).is_err() {
            // Closed, or so far behind that it would buffer without bound.
            warn!(session = d.session, "dropping unresponsive session");
            outboxes.remove(&d.session);
            hub.disconnect(d.session);
        }
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

const FALLBACK_INDEX: &str = r#"<!doctype html>
<html><head><meta charset="utf-8"><title>huro-teleop</title></head>
<body>
<h1>huro-teleop gateway</h1>
<p>No operator console found in the static directory.</p>
<ul>
<li><a href="/stream">/stream</a>: MJPEG camera feed</li>
<li><code>/ws</code>: JSON pub/sub WebSocket</li>
<li><a href="/health">/health</a></li>
</ul>
<img src="/stream" alt="camera">
</body></html>
"#;

/// `GET /`: the console page, or a WebSocket upgrade for clients that
/// connect to the bare `ws://host:port` URL as roslib does.
async fn index(State(gw): State<GatewayHandle>, req: Request) -> Response {
    let (mut parts, _body) = req.into_parts();
    if let Ok(ws) = WebSocketUpgrade::from_request_parts(&mut parts, &gw).await {
        return ws.on_upgrade(move |socket| session(socket, gw));
    }
    match tokio::fs::read_to_string(gw.static_dir.join("index.html")).await {
        Ok(html) => Html(html).into_response(),
        Err(_) => Html(FALLBACK_INDEX).into_response(),
    }
}

async fn ws_upgrade(State(gw): State<GatewayHandle>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| session(socket, gw))
}

async fn session(socket: WebSocket, gw: GatewayHandle) {
    let (out_tx, mut out_rx) = mpsc::channel::<String>(SESSION_BUFFER);
    let (reply, wait) = oneshot::channel();
    if gw
        .tx
        .send(HubCmd::Connect {
            out: out_tx.clone(),
            reply,
        })
        .await
        .is_err()
    {
        return;
    }
    let Ok(id) = wait.await else { return };

    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => {
                let cmd = HubCmd::Frame {
                    session: id,
                    text: text.as_str().to_owned(),
                };
                if gw.tx.send(cmd).await.is_err() {
                    break;
                }
            }
            Message::Binary(_) => {
                let status = Envelope::status(LogLevel::Error, "binary frames are not supported");
                let _ = out_tx.try_send(encode_envelope(&status));
            }
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => {}
        }
    }

    let _ = gw.tx.send(HubCmd::Disconnect(id)).await;
    drop(out_tx);
    let _ = writer.await;
}

/// `GET /stream`: multipart/x-mixed-replace JPEG feed, paced at the
/// configured fps. A viewer that cannot keep up skips to the latest scene
/// instead of queueing old frames.
async fn stream(State(gw): State<GatewayHandle>) -> Response {
    let (tx, rx) = mpsc::channel::<Bytes>(1);
    let cfg = gw.render;
    let mut scene = gw.scene.clone();
    let frames = gw.frames.clone();
    tokio::spawn(async move {
        let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / cfg.fps.max(1) as f64));
        interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
        loop {
            interval.tick().await;
            let current = scene.borrow_and_update().clone();
            let rendered = tokio::task::spawn_blocking(move || {
                let frame = render_frame(&current.map, &current.robot, &cfg);
                mjpeg_part(&encode_jpeg(&frame, cfg.jpeg_quality))
            })
            .await;
            let Ok(part) = rendered else { break };
            frames.fetch_add(1, Ordering::Relaxed);
            if tx.send(Bytes::from(part)).await.is_err() {
                break;
            }
        }
    });

    let body = futures::stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|b| (Ok::<_, Infallible>(b), rx))
    });
    Response::builder()
        .status(StatusCode::OK)
        .header(header::CONTENT_TYPE, MJPEG_CONTENT_TYPE)
        .header(header::CACHE_CONTROL, "no-cache, no-store")
        .header(header::CONNECTION, "close")
        .body(Body::from_stream(body))
        .expect("static response parts are valid")
}
