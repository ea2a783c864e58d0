//! Monitoring: an in-process topic bus plus periodic observers that turn
//! raw telemetry into normalized quality-attribute measurements published
//! on `/diagnostics`.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

pub const TOPIC_POWER_LOAD: &str = "/power_load";
pub const TOPIC_SCAN_MIN_DISTANCE: &str = "/scan_min_distance";
pub const TOPIC_DIAGNOSTICS: &str = "/diagnostics";

/// Distance below which the robot is considered collided; also the zero of
/// the safety attribute.
pub const SAFETY_DIST_CRITICAL_M: f64 = 0.5;
/// Distance at which safety saturates at 1.0.
pub const SAFETY_DIST_SAFE_M: f64 = 2.0;

const POWER_LOAD_MIN: f64 = 0.2;
const POWER_LOAD_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticLevel {
    Ok,
    Warn,
    Error,
}

impl std::fmt::Display for DiagnosticLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DiagnosticLevel::Ok => "OK",
            DiagnosticLevel::Warn => "WARN",
            DiagnosticLevel::Error => "ERROR",
        })
    }
}

/// Key-value monitoring message, one per observer emission or component
/// fault report.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticStatus {
    pub level: DiagnosticLevel,
    pub name: String,
    pub message: String,
    /// Ordered, keys unique within one message.
    pub values: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Telemetry(f64),
    Diagnostic(DiagnosticStatus),
}

impl Payload {
    fn kind(&self) -> PayloadKind {
        match self {
            Payload::Telemetry(_) => PayloadKind::Telemetry,
            Payload::Diagnostic(_) => PayloadKind::Diagnostic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PayloadKind {
    Telemetry,
    Diagnostic,
}

#[derive(Debug, Error, PartialEq)]
pub enum BusError {
    #[error("payload kind does not match topic `{0}`")]
    KindMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubscriberId(usize);

#[derive(Debug, Default)]
struct TopicState {
    kind: Option<PayloadKind>,
    latest: Option<(Payload, f64)>,
    subscribers: Vec<SubscriberId>,
}

/// Single-threaded FIFO topic bus with latest-sample retention: a late
/// subscriber immediately sees the most recent sample on its topic.
#[derive(Debug, Default)]
pub struct Bus {
    topics: BTreeMap<String, TopicState>,
    queues: Vec<VecDeque<(Payload, f64)>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, topic: &str) -> SubscriberId {
        let id = SubscriberId(self.queues.len());
        self.queues.push(VecDeque::new());
        let state = self.topics.entry(topic.to_string()).or_default();
        state.subscribers.push(id);
        if let Some((payload, t)) = &state.latest {
            self.queues[id.0].push_back((payload.clone(), *t));
        }
        id
    }

    pub fn publish(&mut self, topic: &str, payload: Payload, t: f64) -> Result<(), BusError> {
        let state = self.topics.entry(topic.to_string()).or_default();
        match state.kind {
            None => state.kind = Some(payload.kind()),
            Some(kind) if kind == payload.kind() => {}
            Some(_) => return Err(BusError::KindMismatch(topic.to_string())),
        }
        state.latest = Some((payload.clone(), t));
        for sub in &state.subscribers {
            self.queues[sub.0].push_back((payload.clone(), t));
        }
        Ok(())
    }

    pub fn publish_telemetry(&mut self, topic: &str, value: f64, t: f64) -> Result<(), BusError> {
        self.publish(topic, Payload::Telemetry(value), t)
    }

    pub fn publish_diagnostic(
        &mut self,
        status: DiagnosticStatus,
        t: f64,
    ) -> Result<(), BusError> {
        self.publish(TOPIC_DIAGNOSTICS, Payload::Diagnostic(status), t)
    }

    pub fn drain(&mut self, sub: SubscriberId) -> Vec<(Payload, f64)> {
        self.queues[sub.0].drain(..).collect()
    }

    /// Latest retained telemetry sample on a topic, if any.
    pub fn latest_telemetry(&self, topic: &str) -> Option<(f64, f64)> {
        match self.topics.get(topic)?.latest.as_ref()? {
            (Payload::Telemetry(v), t) => Some((*v, *t)),
            _ => None,
        }
    }
}

/// Normalized instantaneous power load: 0 at idle (0.2), 1 at peak (5.0),
/// clamped outside that range.
pub fn energy_attr(power_load: f64) -> f64 {
    ((power_load - 0.2) / (5.0 - 0.2)).clamp(0.0, 1.0)
}

/// Normalized clearance to the nearest obstacle: 0 at the critical
/// distance, 1 from the safe distance outward.
pub fn safety_attr(min_obstacle_distance: f64) -> f64 {
    ((min_obstacle_distance - SAFETY_DIST_CRITICAL_M)
        / (SAFETY_DIST_SAFE_M - SAFETY_DIST_CRITICAL_M))
        .clamp(0.0, 1.0)
}

/// Maps the latest input samples to one diagnostic message.
pub type ComputeFn = Box<dyn Fn(&[f64]) -> DiagnosticStatus>;

/// Periodic observer: reads the latest sample of each input topic, maps
/// them to a diagnostic message, publishes it on `/diagnostics`. Emits at
/// most once per period and nothing before every input has a sample.
pub struct Observer {
    pub id: String,
    pub period_s: f64,
    pub input_topics: Vec<String>,
    compute: ComputeFn,
    last_emit: Option<f64>,
}

impl Observer {
    pub fn new(
        id: &str,
        period_s: f64,
        input_topics: &[&str],
        compute: impl Fn(&[f64]) -> DiagnosticStatus + 'static,
    ) -> Self {
        assert!(period_s > 0.0, "observer period must be positive");
        Self {
            id: id.to_string(),
            period_s,
            input_topics: input_topics.iter().map(|s| s.to_string()).collect(),
            compute: Box::new(compute),
            last_emit: None,
        }
    }

    pub fn tick(&mut self, bus: &mut Bus, now: f64) -> Option<DiagnosticStatus> {
        if let Some(last) = self.last_emit {
            // Small slack so 5 * 0.1 counts as one period of 0.5.
            if now + 1e-9 < last + self.period_s {
                return None;
            }
        }
        let mut samples = Vec::with_capacity(self.input_topics.len());
        for topic in &self.input_topics {
            samples.push(bus.latest_telemetry(topic)?.0);
        }
        let status = (self.compute)(&samples);
        bus.publish_diagnostic(status.clone(), now)
            .expect("/diagnostics carries diagnostic payloads");
        self.last_emit = Some(now);
        Some(status)
    }
}

fn qa_status(observer_id: &str, qa: &str, value: f64) -> DiagnosticStatus {
    DiagnosticStatus {
        level: DiagnosticLevel::Ok,
        name: observer_id.to_string(),
        message: "QA status".to_string(),
        values: vec![(qa.to_string(), format!("{value}"))],
    }
}

pub fn energy_quality_observer(period_s: f64) -> Observer {
    Observer::new(
        "energy_quality_observer",
        period_s,
        &[TOPIC_POWER_LOAD],
        |samples| qa_status("energy_quality_observer", "energy", energy_attr(samples[0])),
    )
}

pub fn safety_quality_observer(period_s: f64) -> Observer {
    Observer::new(
        "safety_quality_observer",
        period_s,
        &[TOPIC_SCAN_MIN_DISTANCE],
        |samples| qa_status("safety_quality_observer", "safety", safety_attr(samples[0])),
    )
}

/// CSV export of a drained `/diagnostics` stream: one row per key-value.
pub fn diagnostics_csv(rows: &[(DiagnosticStatus, f64)]) -> String {
    let mut out = String::from("t,observer,level,key,value\n");
    for (status, t) in rows {
        for (key, value) in &status.values {
            out.push_str(&format!(
                "{t},{},{},{key},{value}\n",
                crate::csv::escape(&status.name),
                status.level
            ));
        }
    }
    out
}

/// Idle and peak power loads; the normalization constants of `energy_attr`.
pub fn power_load_range() -> (f64, f64) {
    (POWER_LOAD_MIN, POWER_LOAD_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn publish_delivers_in_order() {
        let mut bus = Bus::new();
        let sub = bus.subscribe(TOPIC_POWER_LOAD);
        bus.publish_telemetry(TOPIC_POWER_LOAD, 4.2, 1.0).unwrap();
        bus.publish_telemetry(TOPIC_POWER_LOAD, 4.4, 1.1).unwrap();
        let got = bus.drain(sub);
        assert_eq!(
            got,
            vec![
                (Payload::Telemetry(4.2), 1.0),
                (Payload::Telemetry(4.4), 1.1)
            ]
        );
    }

    #[test]
    fn kind_mismatch_rejected() {
        let mut bus = Bus::new();
        bus.publish_telemetry(TOPIC_POWER_LOAD, 4.2, 1.0).unwrap();
        let status = DiagnosticStatus {
            level: DiagnosticLevel::Ok,
            name: "x".into(),
            message: String::new(),
            values: vec![],
        };
        assert_eq!(
            bus.publish(TOPIC_POWER_LOAD, Payload::Diagnostic(status), 2.0),
            Err(BusError::KindMismatch(TOPIC_POWER_LOAD.into()))
        );
    }

    #[test]
    fn late_subscriber_sees_latest_retained() {
        let mut bus = Bus::new();
        bus.publish_telemetry(TOPIC_POWER_LOAD, 1.0, 0.0).unwrap();
        bus.publish_telemetry(TOPIC_POWER_LOAD, 2.0, 0.1).unwrap();
        let sub = bus.subscribe(TOPIC_POWER_LOAD);
        assert_eq!(bus.drain(sub), vec![(Payload::Telemetry(2.0), 0.1)]);
    }

    #[test]
    fn energy_attr_matches_printed_constants() {
        assert_eq!(energy_attr(5.0), 1.0);
        assert_eq!(energy_attr(0.2), 0.0);
        assert_eq!(energy_attr(2.6), 0.5);
    }

    #[test]
    fn safety_attr_boundaries_and_midpoint() {
        assert_eq!(safety_attr(2.0), 1.0);
        assert_eq!(safety_attr(0.5), 0.0);
        // Affine map evaluated at the midpoint of [0.5, 2.0].
        assert_eq!(safety_attr(1.25), 0.5);
        assert_eq!(safety_attr(10.0), 1.0);
    }

    #[test]
    fn observer_respects_period() {
        let mut bus = Bus::new();
        let mut obs = energy_quality_observer(0.5);
        bus.publish_telemetry(TOPIC_POWER_LOAD, 2.6, 0.0).unwrap();
        assert!(obs.tick(&mut bus, 0.0).is_some());
        assert!(obs.tick(&mut bus, 0.2).is_none());
        assert!(obs.tick(&mut bus, 0.5).is_some());
    }

    #[test]
    fn observer_silent_without_input() {
        let mut bus = Bus::new();
        let mut obs = energy_quality_observer(0.5);
        assert!(obs.tick(&mut bus, 0.0).is_none());
    }

    #[test]
    fn energy_observer_message_shape() {
        let mut bus = Bus::new();
        let mut obs = energy_quality_observer(0.5);
        bus.publish_telemetry(TOPIC_POWER_LOAD, 2.6, 0.0).unwrap();
        let msg = obs.tick(&mut bus, 0.0).unwrap();
        assert_eq!(msg.level, DiagnosticLevel::Ok);
        assert_eq!(msg.message, "QA status");
        assert_eq!(msg.values, vec![("energy".to_string(), "0.5".to_string())]);
    }

    #[test]
    fn diagnostic_values_round_trip_through_text() {
        for v in [0.1, 0.3333333333333333, 1.0 / 3.0, 0.7e-3] {
            let rendered = format!("{}", energy_attr(v * 4.8 + 0.2));
            let parsed: f64 = rendered.parse().unwrap();
            assert_eq!(parsed, energy_attr(v * 4.8 + 0.2));
        }
    }
}
