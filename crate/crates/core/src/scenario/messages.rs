//! Wire formats of the scenario's own messages (sensor batches, alarms,
//! location queries, alerts, feedback rounds).
//!
//! The training protocol has fixed frame texts; these scenario payloads
//! only have prose descriptions, so their shapes are defined here, in
//! one place, as plain keyword lists. Builders return canonical SL text;
//! parsers take a parsed node and return `None` on any shape mismatch —
//! a behavior that cannot parse a payload simply does not claim it.

use crate::sl::SlNode;

use super::env::SensorReading;

/// `(sensorBatch :tick T (readings (r :station S :var V :x X)…))`
pub fn sensor_batch(tick: u64, readings: &[SensorReading]) -> String {
    let mut rs = vec![SlNode::atom("readings")];
    for r in readings {
        rs.push(SlNode::list(vec![
            SlNode::atom("r"),
            SlNode::keyword("station"),
            SlNode::atom(&r.station),
            SlNode::keyword("var"),
            SlNode::atom(&r.variable),
            SlNode::keyword("x"),
            SlNode::atom(r.value.to_string()),
        ]));
    }
    SlNode::list(vec![
        SlNode::atom("sensorBatch"),
        SlNode::keyword("tick"),
        SlNode::atom(tick.to_string()),
        SlNode::list(rs),
    ])
    .to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReading {
    pub station: String,
    pub variable: String,
    pub value: f64,
}

pub fn parse_sensor_batch(node: &SlNode) -> Option<(u64, Vec<BatchReading>)> {
    if node.head() != Some("sensorBatch") {
        return None;
    }
    let tick = parse_u64(node.keyword_value("tick")?)?;
    let mut readings = Vec::new();
    for r in child_list(node, "readings")?.iter().skip(1) {
        if r.head() != Some("r") {
            return None;
        }
        readings.push(BatchReading {
            station: atom(r.keyword_value("station")?)?,
            variable: atom(r.keyword_value("var")?)?,
            value: parse_f64(r.keyword_value("x")?)?,
        });
    }
    Some((tick, readings))
}

/// One variable inside a significant-change report: name, raw value,
/// category.
pub type ChangedValue = (String, f64, String);

#[derive(Debug, Clone, PartialEq)]
pub struct SignificantChange {
    pub station: String,
    pub location: String,
    pub tick: u64,
    pub values: Vec<ChangedValue>,
}

/// `(significantChange :station S :location L :tick T (values (v :var V :x X :cat C)…))`
pub fn significant_change(sc: &SignificantChange) -> String {
    let mut vs = vec![SlNode::atom("values")];
    for (variable, value, category) in &sc.values {
        vs.push(SlNode::list(vec![
            SlNode::atom("v"),
            SlNode::keyword("var"),
            SlNode::atom(variable),
            SlNode::keyword("x"),
            SlNode::atom(value.to_string()),
            SlNode::keyword("cat"),
            SlNode::atom(category),
        ]));
    }
    SlNode::list(vec![
        SlNode::atom("significantChange"),
        SlNode::keyword("station"),
        SlNode::atom(&sc.station),
        SlNode::keyword("location"),
        SlNode::atom(&sc.location),
        SlNode::keyword("tick"),
        SlNode::atom(sc.tick.to_string()),
        SlNode::list(vs),
    ])
    .to_string()
}

pub fn parse_significant_change(node: &SlNode) -> Option<SignificantChange> {
    if node.head() != Some("significantChange") {
        return None;
    }
    let mut values = Vec::new();
    for v in child_list(node, "values")?.iter().skip(1) {
        if v.head() != Some("v") {
            return None;
        }
        values.push((
            atom(v.keyword_value("var")?)?,
            parse_f64(v.keyword_value("x")?)?,
            atom(v.keyword_value("cat")?)?,
        ));
    }
    Some(SignificantChange {
        station: atom(node.keyword_value("station")?)?,
        location: atom(node.keyword_value("location")?)?,
        tick: parse_u64(node.keyword_value("tick")?)?,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alarm {
    pub event: u64,
    pub code: u8,
    pub location: String,
    pub tick: u64,
}

/// `(alarm :event I :type C :location L :tick T)`
pub fn alarm(a: &Alarm) -> String {
    SlNode::list(vec![
        SlNode::atom("alarm"),
        SlNode::keyword("event"),
        SlNode::atom(a.event.to_string()),
        SlNode::keyword("type"),
        SlNode::atom(a.code.to_string()),
        SlNode::keyword("location"),
        SlNode::atom(&a.location),
        SlNode::keyword("tick"),
        SlNode::atom(a.tick.to_string()),
    ])
    .to_string()
}

pub fn parse_alarm(node: &SlNode) -> Option<Alarm> {
    if node.head() != Some("alarm") {
        return None;
    }
    Some(Alarm {
        event: parse_u64(node.keyword_value("event")?)?,
        code: parse_code(node.keyword_value("type")?)?,
        location: atom(node.keyword_value("location")?)?,
        tick: parse_u64(node.keyword_value("tick")?)?,
    })
}

/// `(whereIs :event I :user U)` — the event id is echoed back so the
/// asker can match the answer to the alarm that prompted it.
pub fn where_is(event: u64, user: &str) -> String {
    SlNode::list(vec![
        SlNode::atom("whereIs"),
        SlNode::keyword("event"),
        SlNode::atom(event.to_string()),
        SlNode::keyword("user"),
        SlNode::atom(user),
    ])
    .to_string()
}

pub fn parse_where_is(node: &SlNode) -> Option<(u64, String)> {
    if node.head() != Some("whereIs") {
        return None;
    }
    Some((parse_u64(node.keyword_value("event")?)?, atom(node.keyword_value("user")?)?))
}

/// `(userLocation :event I :user U :location L)`
pub fn user_location(event: u64, user: &str, location: &str) -> String {
    SlNode::list(vec![
        SlNode::atom("userLocation"),
        SlNode::keyword("event"),
        SlNode::atom(event.to_string()),
        SlNode::keyword("user"),
        SlNode::atom(user),
        SlNode::keyword("location"),
        SlNode::atom(location),
    ])
    .to_string()
}

pub fn parse_user_location(node: &SlNode) -> Option<(u64, String, String)> {
    if node.head() != Some("userLocation") {
        return None;
    }
    Some((
        parse_u64(node.keyword_value("event")?)?,
        atom(node.keyword_value("user")?)?,
        atom(node.keyword_value("location")?)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alert {
    pub event: u64,
    pub code: u8,
    pub location: String,
    pub channel: String,
    pub tick: u64,
}

/// `(alert :event I :type C :location L :channel CH :tick T)`
pub fn alert(a: &Alert) -> String {
    SlNode::list(vec![
        SlNode::atom("alert"),
        SlNode::keyword("event"),
        SlNode::atom(a.event.to_string()),
        SlNode::keyword("type"),
        SlNode::atom(a.code.to_string()),
        SlNode::keyword("location"),
        SlNode::atom(&a.location),
        SlNode::keyword("channel"),
        SlNode::atom(&a.channel),
        SlNode::keyword("tick"),
        SlNode::atom(a.tick.to_string()),
    ])
    .to_string()
}

pub fn parse_alert(node: &SlNode) -> Option<Alert> {
    if node.head() != Some("alert") {
        return None;
    }
    Some(Alert {
        event: parse_u64(node.keyword_value("event")?)?,
        code: parse_code(node.keyword_value("type")?)?,
        location: atom(node.keyword_value("location")?)?,
        channel: atom(node.keyword_value("channel")?)?,
        tick: parse_u64(node.keyword_value("tick")?)?,
    })
}

/// `(received :event I :user U :type C)` — a user acknowledging an
/// alert to the feedback agent.
pub fn received(event: u64, user: &str, code: u8) -> String {
    SlNode::list(vec![
        SlNode::atom("received"),
        SlNode::keyword("event"),
        SlNode::atom(event.to_string()),
        SlNode::keyword("user"),
        SlNode::atom(user),
        SlNode::keyword("type"),
        SlNode::atom(code.to_string()),
    ])
    .to_string()
}

pub fn parse_received(node: &SlNode) -> Option<(u64, String)> {
    if node.head() != Some("received") {
        return None;
    }
    Some((parse_u64(node.keyword_value("event")?)?, atom(node.keyword_value("user")?)?))
}

/// `(feedbackRound :tick T)` — the end-of-tick cue to collect verdicts.
pub fn feedback_round(tick: u64) -> String {
    SlNode::list(vec![
        SlNode::atom("feedbackRound"),
        SlNode::keyword("tick"),
        SlNode::atom(tick.to_string()),
    ])
    .to_string()
}

pub fn parse_feedback_round(node: &SlNode) -> Option<u64> {
    if node.head() != Some("feedbackRound") {
        return None;
    }
    parse_u64(node.keyword_value("tick")?)
}

fn child_list<'a>(node: &'a SlNode, head: &str) -> Option<&'a [SlNode]> {
    node.as_list()?.iter().find(|item| item.head() == Some(head))?.as_list()
}

fn atom(node: &SlNode) -> Option<String> {
    node.as_atom().map(str::to_string)
}

fn parse_u64(node: &SlNode) -> Option<u64> {
    node.as_atom()?.parse().ok()
}

fn parse_code(node: &SlNode) -> Option<u8> {
    let code: u8 = node.as_atom()?.parse().ok()?;
    (code <= 3).then_some(code)
}

fn parse_f64(node: &SlNode) -> Option<f64> {
    let value: f64 = node.as_atom()?.parse().ok()?;
    value.is_finite().then_some(value)
}
