//! Newline-delimited trace records.
//!
//! ```text
//! {"type":"header","schema":"covdrive.trace.v1","scenario":"s1","dt":0.1,"agents":[{"id":"ego","kind":"ego","length":4.5,"width":1.8}]}
//! {"type":"agent","t":0.0,"agent_id":"ego","x":1.0,"y":-1.75,"heading":0.0,"speed":0.0,"accel":0.0,"lane":"road_main:1","offset":40.0,"lat":0.0}
//! {"type":"signal","t":0.0,"junction":"J_1","road":"road_41","state":"green"}
//! {"type":"end","reason":"destination-reached","route_progress":1.0,"destination_reached":true,"arrival_time":17.3,"frames":174}
//! ```
//!
//! Each frame contributes one `agent` line per agent, in header order,
//! followed by its `signal` lines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentInfo, AgentState, Frame, SignalRecord, TimedTrace, TraceEnd};
use crate::concretize::SignalState;

pub const TRACE_SCHEMA: &str = "covdrive.trace.v1";

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("trace has no header")]
    MissingHeader,
    #[error("unsupported trace schema `{0}`")]
    Schema(String),
    #[error("trace has no end record")]
    MissingEnd,
    #[error("line {line}: {message}")]
    Inconsistent { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Header {
        schema: String,
        scenario: String,
        dt: f64,
        agents: Vec<AgentInfo>,
    },
    Agent {
        t: f64,
        agent_id: String,
        x: f64,
        y: f64,
        heading: f64,
        speed: f64,
        accel: f64,
        lane: String,
        offset: f64,
        lat: f64,
    },
    Signal {
        t: f64,
        junction: String,
        road: String,
        state: SignalState,
    },
    End(TraceEnd),
}

fn line(r: &Record) -> String {
    serde_json::to_string(r).expect("trace record serializes")
}

impl TimedTrace {
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        out.push_str(&line(&Record::Header {
            schema: TRACE_SCHEMA.into(),
            scenario: self.scenario.clone(),
            dt: self.dt,
            agents: self.agents.clone(),
        }));
        out.push('\n');
        for f in &self.frames {
            for (info, a) in self.agents.iter().zip(&f.agents) {
                out.push_str(&line(&Record::Agent {
                    t: f.t,
                    agent_id: info.id.clone(),
                    x: a.x,
                    y: a.y,
                    heading: a.heading,
                    speed: a.speed,
                    accel: a.accel,
                    lane: a.lane.clone(),
                    offset: a.offset,
                    lat: a.lat,
                }));
                out.push('\n');
            }
            for s in &f.signals {
                out.push_str(&line(&Record::Signal {
                    t: f.t,
                    junction: s.junction.clone(),
                    road: s.road.clone(),
                    state: s.state,
                }));
                out.push('\n');
            }
        }
        out.push_str(&line(&Record::End(self.end.clone())));
        out.push('\n');
        out
    }

    pub fn from_ndjson(text: &str) -> Result<TimedTrace, TraceParseError> {
        let mut trace: Option<TimedTrace> = None;
        let mut end = None;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(raw).map_err(|e| TraceParseError::Syntax {
                line: lineno,
                message: e.to_string(),
            })?;
            let bad = |message: String| TraceParseError::Inconsistent { line: lineno, message };
            match rec {
                Record::Header { schema, scenario, dt, agents } => {
                    if schema != TRACE_SCHEMA {
                        return Err(TraceParseError::Schema(schema));
                    }
                    if trace.is_some() {
                        return Err(bad("second header".into()));
                    }
                    trace = Some(TimedTrace {
                        scenario,
                        dt,
                        agents,
                        frames: Vec::new(),
                        end: TraceEnd {
                            reason: super::Termination::Budget,
                            message: None,
                            route_progress: 0.0,
                            destination_reached: false,
                            arrival_time: None,
                            frames: 0,
                        },
                    });
                }
                Record::Agent { t, agent_id, x, y, heading, speed, accel, lane, offset, lat } => {
                    let tr = trace.as_mut().ok_or(TraceParseError::MissingHeader)?;
                    let state = AgentState { x, y, heading, speed, accel, lane, offset, lat };
                    let n = tr.agents.len();
                    let new_frame = tr.frames.last().map_or(true, |f| f.agents.len() == n && f.t != t);
                    if new_frame {
                        if let Some(f) = tr.frames.last() {
                            if t <= f.t {
                                return Err(bad(format!("time {t} does not increase")));
                            }
                        }
                        tr.frames.push(Frame { t, agents: Vec::with_capacity(n), signals: Vec::new() });
                    }
                    let f = tr.frames.last_mut().unwrap();
                    if f.t != t || !f.signals.is_empty() {
                        return Err(bad(format!("agent record at {t} outside its frame")));
                    }
                    let expected = tr.agents.get(f.agents.len()).map(|a| a.id.as_str());
                    if expected != Some(agent_id.as_str()) {
                        return Err(bad(format!("unexpected agent `{agent_id}`")));
                    }
                    f.agents.push(state);
                }
                Record::Signal { t, junction, road, state } => {
                    let tr = trace.as_mut().ok_or(TraceParseError::MissingHeader)?;
                    let f = tr.frames.last_mut().filter(|f| f.t == t).ok_or_else(|| bad(format!("signal record at {t} without frame")))?;
                    f.signals.push(SignalRecord { junction, road, state });
                }
                Record::End(e) => {
                    if trace.is_none() {
                        return Err(TraceParseError::MissingHeader);
                    }
                    end = Some(e);
                }
            }
        }
        let mut tr = trace.ok_or(TraceParseError::MissingHeader)?;
        tr.end = end.ok_or(TraceParseError::MissingEnd)?;
        if let Some(f) = tr.frames.iter().position(|f| f.agents.len() != tr.agents.len()) {
            return Err(TraceParseError::Inconsistent {
                line: 0,
                message: format!("frame {f} is missing agents"),
            });
        }
        Ok(tr)
    }
}
