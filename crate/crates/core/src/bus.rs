//! Deterministic typed publish/subscribe bus.
//!
//! Topics are registered with a payload [`MessageKind`] before use. Every
//! accepted publish becomes an [`Envelope`] with a per-topic sequence number,
//! is appended to the trace (if one is attached) and waits in a single global
//! queue. [`Bus::dispatch_cycle`] drains whatever was queued when it started,
//! in global publish order, handing each envelope to the topic's subscribers
//! in the order they subscribed. Anything a handler publishes lands in the
//! queue for the *next* cycle.
//!
//! The bus itself is driven from one thread. Other threads publish through an
//! [`Injector`], whose messages enter the bus on the next
//! [`Bus::drain_injected`].

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::Write;
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::messages::{topics, Message, MessageKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BusError {
    #[error("topic name must not be empty")]
    EmptyTopic,
    #[error("topic `{0}` is not registered")]
    Unregistered(String),
    #[error("topic `{topic}` carries {expected:?}, got {found:?}")]
    TypeMismatch {
        topic: String,
        expected: MessageKind,
        found: MessageKind,
    },
    #[error("topic `{topic}` already registered as {existing:?}")]
    Conflict {
        topic: String,
        existing: MessageKind,
    },
    #[error("sim_time {time} on `{topic}` is earlier than the last publish at {last}")]
    TimeReversal { topic: String, time: f64, last: f64 },
    #[error("sim_time must be finite and non-negative, got {0}")]
    InvalidTime(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TopicName(String);

impl TopicName {
    pub fn new(path: impl Into<String>) -> Result<Self, BusError> {
        let path = path.into();
        if path.is_empty() {
            return Err(BusError::EmptyTopic);
        }
        Ok(Self(path))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TopicName {
    type Error = BusError;

    fn try_from(s: String) -> Result<Self, BusError> {
        TopicName::new(s)
    }
}

impl From<TopicName> for String {
    fn from(t: TopicName) -> String {
        t.0
    }
}

impl fmt::Display for TopicName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unit of delivery, and one line of the trace log.
///
/// Field order is the trace record layout: `seq, sim_time, topic, payload`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub sim_time: f64,
    pub topic: TopicName,
    pub payload: Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubscriptionId(usize);

#[derive(Debug, Clone, Copy)]
struct TopicInfo {
    kind: MessageKind,
    latched: bool,
}

#[derive(Debug, Default)]
struct TopicState {
    next_seq: u64,
    last_time: f64,
    last: Option<Envelope>,
}

/// Publishing context handed to handlers. Publishes are validated at once and
/// enqueued for the next dispatch cycle when the handler returns.
pub struct Outbox<'a> {
    registry: &'a HashMap<String, TopicInfo>,
    now: f64,
    cycle: u64,
    staged: Vec<(TopicName, Message)>,
    rejected: u64,
}

impl Outbox<'_> {
    pub fn publish(&mut self, topic: &str, payload: impl Into<Message>) -> Result<(), BusError> {
        let payload = payload.into();
        if let Err(e) = check_type(self.registry, topic, &payload) {
            self.rejected += 1;
            return Err(e);
        }
        self.staged.push((TopicName(topic.to_string()), payload));
        Ok(())
    }

    /// Current simulation time.
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Index of the dispatch cycle this handler runs in (0 outside dispatch).
    pub fn cycle(&self) -> u64 {
        self.cycle
    }
}

fn check_type(
    registry: &HashMap<String, TopicInfo>,
    topic: &str,
    payload: &Message,
) -> Result<TopicInfo, BusError> {
    let info = registry
        .get(topic)
        .ok_or_else(|| BusError::Unregistered(topic.to_string()))?;
    if info.kind != payload.kind() {
        return Err(BusError::TypeMismatch {
            topic: topic.to_string(),
            expected: info.kind,
            found: payload.kind(),
        });
    }
    Ok(*info)
}

pub type Handler = Box<dyn FnMut(&Envelope, &mut Outbox<'_>)>;

struct SubEntry {
    topic: String,
    /// First sequence number this subscription may see from the queue.
    start_seq: u64,
    handler: Option<Handler>,
    active: bool,
}

/// Cloneable, `Send` handle for publishing from other threads.
#[derive(Clone)]
pub struct Injector {
    tx: mpsc::Sender<(String, Message)>,
}

impl Injector {
    /// Queue a publish; it is type-checked when the bus drains it.
    /// Returns false if the bus is gone.
    pub fn publish(&self, topic: &str, payload: impl Into<Message>) -> bool {
        self.tx.send((topic.to_string(), payload.into())).is_ok()
    }
}

pub struct Bus {
    registry: HashMap<String, TopicInfo>,
    topics: HashMap<String, TopicState>,
    subs: Vec<SubEntry>,
    by_topic: HashMap<String, Vec<usize>>,
    queue: VecDeque<Envelope>,
    now: f64,
    cycle: u64,
    trace: Option<Box<dyn Write>>,
    trace_error: Option<String>,
    high_water: usize,
    above_high_water: bool,
    injected_rx: mpsc::Receiver<(String, Message)>,
    injected_tx: mpsc::Sender<(String, Message)>,
    rejected: u64,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        let (injected_tx, injected_rx) = mpsc::channel();
        Self {
            registry: HashMap::new(),
            topics: HashMap::new(),
            subs: Vec::new(),
            by_topic: HashMap::new(),
            queue: VecDeque::new(),
            now: 0.0,
            cycle: 0,
            trace: None,
            trace_error: None,
            high_water: 10_000,
            above_high_water: false,
            injected_rx,
            injected_tx,
            rejected: 0,
        }
    }

    /// A bus with every topic of the vehicle graph registered.
    pub fn with_vehicle_topics() -> Self {
        let mut bus = Self::new();
        for (name, kind, latched) in topics::REGISTRY {
            bus.register(name, *kind, *latched)
                .expect("static registry is consistent");
        }
        bus
    }

    pub fn register(
        &mut self,
        topic: &str,
        kind: MessageKind,
        latched: bool,
    ) -> Result<(), BusError> {
        let name = TopicName::new(topic)?;
        if let Some(existing) = self.registry.get(name.as_str()) {
            if existing.kind != kind {
                return Err(BusError::Conflict {
                    topic: topic.to_string(),
                    existing: existing.kind,
                });
            }
        }
        self.registry
            .insert(name.0.clone(), TopicInfo { kind, latched });
        self.topics.entry(name.0).or_default();
        Ok(())
    }

    pub fn is_latched(&self, topic: &str) -> bool {
        self.registry.get(topic).is_some_and(|i| i.latched)
    }

    pub fn set_high_water(&mut self, n: usize) {
        self.high_water = n;
    }

    /// Attach a trace sink; every subsequent publish is written as one JSON line.
    pub fn set_trace(&mut self, sink: Box<dyn Write>) {
        self.trace = Some(sink);
    }

    pub fn flush_trace(&mut self) -> Result<(), String> {
        if let Some(t) = self.trace.as_mut() {
            t.flush().map_err(|e| e.to_string())?;
        }
        match &self.trace_error {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Advance the bus clock. Time never moves backwards.
    pub fn set_time(&mut self, now: f64) {
        if now > self.now {
            self.now = now;
        }
    }

    pub fn cycles(&self) -> u64 {
        self.cycle
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Handler publishes that failed validation. Always zero in a healthy graph.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn injector(&self) -> Injector {
        Injector {
            tx: self.injected_tx.clone(),
        }
    }

    /// Publish everything queued by injectors, stamped with the current time.
    pub fn drain_injected(&mut self) -> Vec<Result<Envelope, BusError>> {
        let mut results = Vec::new();
        while let Ok((topic, payload)) = self.injected_rx.try_recv() {
            results.push(self.publish(&topic, payload, self.now));
        }
        results
    }

    pub fn publish(
        &mut self,
        topic: &str,
        payload: impl Into<Message>,
        sim_time: f64,
    ) -> Result<Envelope, BusError> {
        let payload = payload.into();
        if !sim_time.is_finite() || sim_time < 0.0 {
            return Err(BusError::InvalidTime(sim_time));
        }
        check_type(&self.registry, topic, &payload)?;
        let state = self
            .topics
            .get(topic)
            .expect("registered topics have state");
        if state.next_seq > 0 && sim_time < state.last_time {
            return Err(BusError::TimeReversal {
                topic: topic.to_string(),
                time: sim_time,
                last: state.last_time,
            });
        }
        self.set_time(sim_time);
        Ok(self.enqueue(TopicName(topic.to_string()), payload, sim_time))
    }

    fn enqueue(&mut self, topic: TopicName, payload: Message, sim_time: f64) -> Envelope {
        let state = self.topics.get_mut(topic.as_str()).expect("checked");
        let env = Envelope {
            seq: state.next_seq,
            sim_time,
            topic,
            payload,
        };
        state.next_seq += 1;
        state.last_time = sim_time;
        state.last = Some(env.clone());

        if let Some(sink) = self.trace.as_mut() {
            let line = serde_json::to_string(&env).expect("messages serialize");
            if let Err(e) = writeln!(sink, "{line}") {
                self.trace_error.get_or_insert_with(|| e.to_string());
                self.trace = None;
            }
        }

        self.queue.push_back(env.clone());
        if self.queue.len() > self.high_water {
            if !self.above_high_water {
                tracing::warn!(queued = self.queue.len(), "bus queue above high-water mark");
                self.above_high_water = true;
            }
        } else {
            self.above_high_water = false;
        }
        env
    }

    pub fn subscribe(
        &mut self,
        topic: &str,
        latched: bool,
        handler: impl FnMut(&Envelope, &mut Outbox<'_>) + 'static,
    ) -> Result<SubscriptionId, BusError> {
        if !self.registry.contains_key(topic) {
            return Err(BusError::Unregistered(topic.to_string()));
        }
        let state = &self.topics[topic];
        let start_seq = state.next_seq;
        let last = if latched { state.last.clone() } else { None };

        let id = self.subs.len();
        self.subs.push(SubEntry {
            topic: topic.to_string(),
            start_seq,
            handler: Some(Box::new(handler)),
            active: true,
        });
        self.by_topic.entry(topic.to_string()).or_default().push(id);

        if let Some(env) = last {
            self.invoke(id, &env);
        }
        Ok(SubscriptionId(id))
    }

    /// Cancel a subscription; it receives nothing afterwards.
    pub fn cancel(&mut self, id: SubscriptionId) {
        if let Some(sub) = self.subs.get_mut(id.0) {
            sub.active = false;
            sub.handler = None;
        }
    }

    fn invoke(&mut self, sub: usize, env: &Envelope) {
        let Some(mut handler) = self.subs[sub].handler.take() else {
            return;
        };
        let mut outbox = Outbox {
            registry: &self.registry,
            now: self.now,
            cycle: self.cycle,
            staged: Vec::new(),
            rejected: 0,
        };
        handler(env, &mut outbox);
        let staged = outbox.staged;
        self.rejected += outbox.rejected;
        // put back unless cancelled meanwhile
        if self.subs[sub].active {
            self.subs[sub].handler = Some(handler);
        }
        for (topic, payload) in staged {
            let now = self.now;
            self.enqueue(topic, payload, now);
        }
    }

    /// Deliver everything queued before this call. Returns the number of
    /// handler invocations.
    pub fn dispatch_cycle(&mut self) -> usize {
        self.cycle += 1;
        let batch = std::mem::take(&mut self.queue);
        let mut delivered = 0;
        for env in &batch {
            let Some(ids) = self.by_topic.get(env.topic.as_str()) else {
                continue;
            };
            let ids = ids.clone();
            for id in ids {
                let sub = &self.subs[id];
                if !sub.active || env.seq < sub.start_seq {
                    continue;
                }
                debug_assert_eq!(sub.topic, env.topic.as_str());
                self.invoke(id, env);
                delivered += 1;
            }
        }
        delivered
    }

    /// Dispatch until the queue is empty or `max_cycles` ran. Returns the
    /// number of cycles used.
    pub fn run_until_idle(&mut self, max_cycles: usize) -> usize {
        let mut n = 0;
        while !self.queue.is_empty() && n < max_cycles {
            self.dispatch_cycle();
            n += 1;
        }
        if !self.queue.is_empty() {
            tracing::warn!(pending = self.queue.len(), "bus did not settle");
        }
        n
    }

    pub fn last(&self, topic: &str) -> Option<&Envelope> {
        self.topics.get(topic).and_then(|s| s.last.as_ref())
    }
}

/// Publish from a handler, logging instead of failing. Used by nodes whose
/// topics are all statically registered.
pub(crate) fn emit(out: &mut Outbox<'_>, topic: &str, payload: impl Into<Message>) {
    if let Err(e) = out.publish(topic, payload) {
        tracing::error!(%e, "dropped publish");
    }
}
