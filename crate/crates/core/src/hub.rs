//! Topic routing between client sessions and the teleop node.
//!
//! [`Hub`] is the single serialized authority the network layer drives: every
//! inbound frame, connect, disconnect and tick passes through it and comes
//! back as an ordered list of [`Delivery`] values to write to sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use crate::node::TeleopNode;
use crate::protocol::{decode_envelope, topics, Envelope, LogLevel, Op};

pub type SessionId = u64;

/// MJPEG multipart boundary.
pub const MJPEG_BOUNDARY: &str = "frame";
pub const MJPEG_CONTENT_TYPE: &str = "multipart/x-mixed-replace; boundary=frame";

/// One multipart body part carrying a JPEG frame.
pub fn mjpeg_part(jpeg: &[u8]) -> Vec<u8> {
    let header = format!(
        "--{MJPEG_BOUNDARY}\r\nContent-Type: image/jpeg\r\nContent-Length: {}\r\n\r\n",
        jpeg.len()
    );
    let mut part = Vec::with_capacity(header.len() + jpeg.len() + 2);
    part.extend_from_slice(header.as_bytes());
    part.extend_from_slice(jpeg);
    part.extend_from_slice(b"\r\n");
    part
}

/// Subscriptions and advertisements, counted per session so that each
/// `unsubscribe` undoes exactly one `subscribe`.
#[derive(Debug, Clone, Default)]
pub struct TopicRegistry {
    subscribers: BTreeMap<String, BTreeMap<SessionId, u32>>,
    advertisers: BTreeMap<String, BTreeMap<SessionId, u32>>,
}

fn add(table: &mut BTreeMap<String, BTreeMap<SessionId, u32>>, s: SessionId, topic: &str) {
    *table.entry(topic.to_string()).or_default().entry(s).or_default() += 1;
}

fn remove(table: &mut BTreeMap<String, BTreeMap<SessionId, u32>>, s: SessionId, topic: &str) -> bool {
    let Some(sessions) = table.get_mut(topic) else {
        return false;
    };
    let Some(count) = sessions.get_mut(&s) else {
        return false;
    };
    *count -= 1;
    if *count == 0 {
        sessions.remove(&s);
    }
    if sessions.is_empty() {
        table.remove(topic);
    }
    true
}

impl TopicRegistry {
    pub fn subscribe(&mut self, s: SessionId, topic: &str) {
        add(&mut self.subscribers, s, topic);
    }

    /// Returns false when there was no registration to remove.
    pub fn unsubscribe(&mut self, s: SessionId, topic: &str) -> bool {
        remove(&mut self.subscribers, s, topic)
    }

    pub fn advertise(&mut self, s: SessionId, topic: &str) {
        add(&mut self.advertisers, s, topic);
    }

    pub fn unadvertise(&mut self, s: SessionId, topic: &str) -> bool {
        remove(&mut self.advertisers, s, topic)
    }

    /// Sessions subscribed to `topic`, in ascending id order.
    pub fn subscribers(&self, topic: &str) -> Vec<SessionId> {
        self.subscribers
            .get(topic)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn advertisers(&self, topic: &str) -> Vec<SessionId> {
        self.advertisers
            .get(topic)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    /// Drops every registration held by `s`.
    pub fn disconnect(&mut self, s: SessionId) {
        for table in [&mut self.subscribers, &mut self.advertisers] {
            table.retain(|_, sessions| {
                sessions.remove(&s);
                !sessions.is_empty()
            });
        }
    }

    /// Whether any registration still names `s`.
    pub fn references(&self, s: SessionId) -> bool {
        self.subscribers
            .values()
            .chain(self.advertisers.values())
            .any(|m| m.contains_key(&s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub session: SessionId,
    pub envelope: Envelope,
}

#[derive(Debug, Clone)]
pub struct Hub {
    registry: TopicRegistry,
    node: TeleopNode,
    sessions: BTreeSet<SessionId>,
    next_session: SessionId,
    self_echo: bool,
}

impl Hub {
    pub fn new(node: TeleopNode) -> Self {
        Hub {
            registry: TopicRegistry::default(),
            node,
            sessions: BTreeSet::new(),
            next_session: 1,
            self_echo: true,
        }
    }

    /// Whether a publisher subscribed to its own topic hears its publishes.
    pub fn set_self_echo(&mut self, on: bool) {
        self.self_echo = on;
    }

    pub fn node(&self) -> &TeleopNode {
        &self.node
    }

    pub fn node_mut(&mut self) -> &mut TeleopNode {
        &mut self.node
    }

    pub fn registry(&self) -> &TopicRegistry {
        &self.registry
    }

    pub fn connect(&mut self) -> SessionId {
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(id);
        id
    }

    pub fn disconnect(&mut self, s: SessionId) {
        self.sessions.remove(&s);
        self.registry.disconnect(s);
    }

    pub fn sessions(&self) -> impl Iterator<Item = SessionId> + '_ {
        self.sessions.iter().copied()
    }

    /// Decodes and routes one text frame. Undecodable frames are answered
    /// with a status envelope to the sender only.
    pub fn handle_frame(&mut self, s: SessionId, frame: &[u8]) -> Vec<Delivery> {
        match decode_envelope(frame) {
            Ok(e) => self.route_envelope(s, e),
            Err(err) => vec![Delivery {
                session: s,
                envelope: Envelope::status(LogLevel::Error, format!("{}: {err}", err.kind())),
            }],
        }
    }

    pub fn route_envelope(&mut self, s: SessionId, e: Envelope) -> Vec<Delivery> {
        let mut out = Vec::new();
        match e.op {
            Op::Subscribe => {
                self.registry.subscribe(s, &e.topic);
                // The map is latched: a new subscriber gets the current course.
                if e.topic == topics::MAP {
                    let msg = serde_json::to_value(self.node.map_msg()).expect("map serializes");
                    out.push(Delivery {
                        session: s,
                        envelope: Envelope::publish(topics::MAP, msg),
                    });
                }
            }
            Op::Unsubscribe => {
                self.registry.unsubscribe(s, &e.topic);
            }
            Op::Advertise => self.registry.advertise(s, &e.topic),
            Op::Unadvertise => {
                self.registry.unadvertise(s, &e.topic);
            }
            Op::Publish => {
                self.fan_out(&e, Some(s), &mut out);
                if TeleopNode::consumes(&e.topic) {
                    for reply in self.node.handle_publish(&e) {
                        self.fan_out(&reply, None, &mut out);
                    }
                }
            }
            // Status frames are gateway-to-client only.
            Op::Status => {}
        }
        out
    }

    /// Runs one node tick and fans its output out to subscribers.
    pub fn tick(&mut self, dt: Duration) -> Vec<Delivery> {
        let mut out = Vec::new();
        for e in self.node.run_tick(dt) {
            self.fan_out(&e, None, &mut out);
        }
        out
    }

    fn fan_out(&self, e: &Envelope, sender: Option<SessionId>, out: &mut Vec<Delivery>) {
        for session in self.registry.subscribers(&e.topic) {
            if !self.self_echo && Some(session) == sender {
                continue;
            }
            out.push(Delivery {
                session,
                envelope: e.clone(),
            });
        }
    }
}
