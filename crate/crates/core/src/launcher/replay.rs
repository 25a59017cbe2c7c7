//! Offline verification of a trace log.
//!
//! Each line is parsed back into an [`Envelope`] and fed, in order, to a set
//! of pure checkers. None of them depends on wall time or hash order, so the
//! report for a given file is always the same.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::bus::Envelope;
use crate::messages::{topics, Message, MobilityMode};

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("cannot read trace: {0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub line: usize,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: [{}] {}", self.line, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayReport {
    pub envelopes: usize,
    pub per_topic: BTreeMap<String, u64>,
    pub violations: Vec<Violation>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, topic: &str) -> u64 {
        self.per_topic.get(topic).copied().unwrap_or(0)
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} envelopes on {} topics",
            self.envelopes,
            self.per_topic.len()
        )?;
        for (topic, n) in &self.per_topic {
            writeln!(f, "  {topic}: {n}")?;
        }
        if self.violations.is_empty() {
            writeln!(f, "no violations")
        } else {
            writeln!(f, "{} violations", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Default)]
struct Checker {
    next_seq: BTreeMap<String, u64>,
    last_time: Option<f64>,
    estopped: bool,
    /// Commands stamped with the estop time were already in flight.
    estop_since: f64,
    reset_pending: bool,
    arrived: bool,
    arrivals_since_goal: u32,
    violations: Vec<Violation>,
}

impl Checker {
    fn flag(&mut self, line: usize, rule: &'static str, detail: String) {
        self.violations.push(Violation { line, rule, detail });
    }

    fn observe(&mut self, line: usize, env: &Envelope) {
        let topic = env.topic.as_str();

        let expected = self.next_seq.entry(topic.to_string()).or_insert(0);
        if env.seq != *expected {
            let detail = format!("`{topic}` seq {} where {} was expected", env.seq, *expected);
            *expected = env.seq + 1;
            self.flag(line, "fifo", detail);
        } else {
            *expected += 1;
        }

        if let Some(last) = self.last_time {
            if env.sim_time < last {
                self.flag(
                    line,
                    "time",
                    format!("sim_time {} after {last}", env.sim_time),
                );
            }
        }
        self.last_time = Some(self.last_time.map_or(env.sim_time, |t| t.max(env.sim_time)));

        match topics::kind_of(topic) {
            None => self.flag(line, "type", format!("unknown topic `{topic}`")),
            Some(k) if k != env.payload.kind() => self.flag(
                line,
                "type",
                format!("`{topic}` carries {k:?}, found {:?}", env.payload.kind()),
            ),
            Some(_) => {}
        }

        match (&env.payload, topic) {
            (Message::Bool(on), topics::ESTOP_SENSE) => {
                if *on {
                    if !self.estopped {
                        self.estop_since = env.sim_time;
                    }
                    self.estopped = true;
                } else if self.reset_pending {
                    self.estopped = false;
                    self.reset_pending = false;
                }
            }
            (Message::Empty, topics::ESTOP_RESET) => self.reset_pending = true,
            (Message::Twist(t), topics::CMD_VEL) => {
                if !(t.linear_x.is_finite() && t.angular_z.is_finite()) {
                    self.flag(line, "twist", format!("non-finite command {t:?}"));
                }
                if self.estopped && t.linear_x > 0.0 && env.sim_time > self.estop_since {
                    self.flag(
                        line,
                        "zero-speed",
                        format!("cmd_vel linear_x {} while estopped", t.linear_x),
                    );
                }
            }
            (Message::Odometry(o), _) => {
                if !(0.0..std::f64::consts::TAU).contains(&o.yaw) {
                    self.flag(line, "odometry", format!("yaw {} outside [0, 2π)", o.yaw));
                }
                if !(o.position_sigma > 0.0) {
                    self.flag(line, "odometry", format!("sigma {}", o.position_sigma));
                }
            }
            (Message::SafetyStatus(s), _) => {
                if s.estop_active && s.ok {
                    self.flag(line, "safety", "estop_active with ok set".into());
                }
            }
            (Message::MobilityMode(m), _) => {
                if m.mobility_mode != MobilityMode::WAYPOINT {
                    self.flag(
                        line,
                        "mode",
                        format!("undefined mobility mode {}", m.mobility_mode),
                    );
                }
            }
            (Message::Waypoint(_), _) => {
                self.arrived = false;
                self.arrivals_since_goal = 0;
            }
            (Message::PlannerStatus(s), _) => {
                if s.arrived && !self.arrived {
                    self.arrivals_since_goal += 1;
                    if self.arrivals_since_goal > 1 {
                        self.flag(line, "arrival", "second arrival for one goal".into());
                    }
                }
                self.arrived = s.arrived;
            }
            _ => {}
        }
    }
}

/// Verify a trace read from `reader`.
pub fn replay_reader(reader: impl BufRead) -> Result<ReplayReport, ReplayError> {
    let mut checker = Checker::default();
    let mut report = ReplayReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| ReplayError::Io(e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let env: Envelope = serde_json::from_str(&text).map_err(|e| ReplayError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        checker.observe(line_no, &env);
        report.envelopes += 1;
        *report.per_topic.entry(env.topic.to_string()).or_insert(0) += 1;
    }

    let near = report.count(topics::NEAR_FIELD_ODOM);
    let far = report.count(topics::FAR_FIELD_ODOM);
    if near != far {
        checker.flag(
            0,
            "republish",
            format!("{near} near-field vs {far} far-field odometry"),
        );
    }
    let utm = report.count(topics::UTM_ODOM);
    if utm > 0 && utm != near {
        checker.flag(
            0,
            "republish",
            format!("{utm} utm vs {near} near-field odometry"),
        );
    }
    report.violations = checker.violations;
    Ok(report)
}

pub fn replay_file(path: &Path) -> Result<ReplayReport, ReplayError> {
    let f = File::open(path).map_err(|e| ReplayError::Io(format!("{}: {e}", path.display())))?;
    replay_reader(BufReader::new(f))
}
