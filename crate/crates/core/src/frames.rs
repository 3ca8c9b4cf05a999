//! Typed views of the five framework message frames.
//!
//! Frames are the control vocabulary of the platform: enrolling agents for
//! training, swapping behavior classes, installing rule sets, and the two
//! ontology-service messages. [`decode`] turns a parsed [`SlNode`] into a
//! [`Frame`], validating the whole shape; [`encode`] is its inverse and
//! emits exactly the canonical wire structure, so
//! `encode(&decode(&n)?) == n` for every well-formed frame.

use thiserror::Error;

use crate::sl::SlNode;

/// Name/type pair announcing one agent to the training manager.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentDescriptor {
    pub name: String,
    pub agent_type: String,
}

/// A decoded framework message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    /// Announces newly created agents to the training manager.
    AgentsToBeTrained(Vec<AgentDescriptor>),
    /// Orders the receiver to replace its behavior set with the named
    /// classes.
    LoadClass(Vec<String>),
    /// Orders the receiver to replace its rulebase with these rules, each
    /// the text of one `(defrule …)` expression.
    AddRule(Vec<String>),
    /// Asks an ontology service to map `term` from the message ontology
    /// into the receiver's ontology.
    OntologyQuery {
        message_ontology: String,
        my_ontology: String,
        term: String,
    },
    /// The service's answer to an [`Frame::OntologyQuery`].
    TermMapping { from_term: String, to_term: String },
}

/// Why a node failed to decode as a frame.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    /// The head atom is not one of the five frame names.
    #[error("unknown frame head {0:?}")]
    UnknownFrame(String),
    /// The head was recognized but the body deviates from the frame's
    /// shape; the payload names the offending position, dotted from the
    /// frame head (e.g. `agentsToBeTrained.agents.set.agent.name`).
    #[error("malformed frame at {0}")]
    MalformedFrame(String),
}

fn malformed<T>(path: &str) -> Result<T, FrameError> {
    Err(FrameError::MalformedFrame(path.to_string()))
}

/// Decodes a parsed expression into a typed frame, validating the whole
/// structure.
pub fn decode(node: &SlNode) -> Result<Frame, FrameError> {
    let items = match node.as_list() {
        Some(items) => items,
        None => return malformed("frame"),
    };
    let head = match items.first().and_then(SlNode::as_atom) {
        Some(head) => head,
        None => return malformed("frame.head"),
    };
    match head {
        "agentsToBeTrained" => decode_agents_to_be_trained(items),
        "loadClass" => decode_load_class(items),
        "addRule" => decode_add_rule(items),
        "ontologyQuery" => decode_ontology_query(items),
        "Mapping" => decode_mapping(items),
        other => Err(FrameError::UnknownFrame(other.to_string())),
    }
}

/// Renders a frame in its canonical wire structure.
pub fn encode(frame: &Frame) -> SlNode {
    match frame {
        Frame::AgentsToBeTrained(agents) => {
            let entries = agents
                .iter()
                .map(|a| {
                    SlNode::list(vec![
                        SlNode::atom("agent"),
                        SlNode::keyword("name"),
                        SlNode::atom(&a.name),
                        SlNode::keyword("type"),
                        SlNode::atom(&a.agent_type),
                    ])
                })
                .collect();
            SlNode::list(vec![
                SlNode::atom("agentsToBeTrained"),
                SlNode::list(vec![SlNode::atom("agents"), set(entries)]),
            ])
        }
        Frame::LoadClass(classes) => {
            let entries = classes
                .iter()
                .map(|c| {
                    SlNode::list(vec![
                        SlNode::atom("behavior"),
                        SlNode::keyword("classname"),
                        SlNode::atom(c),
                    ])
                })
                .collect();
            SlNode::list(vec![
                SlNode::atom("loadClass"),
                SlNode::list(vec![SlNode::atom("behaviors"), set(entries)]),
            ])
        }
        Frame::AddRule(rules) => {
            let entries = rules
                .iter()
                .map(|r| {
                    SlNode::list(vec![
                        SlNode::atom("jessRule"),
                        SlNode::keyword("rule"),
                        SlNode::string(r),
                    ])
                })
                .collect();
            SlNode::list(vec![
                SlNode::atom("addRule"),
                SlNode::list(vec![SlNode::atom("jessRules"), set(entries)]),
            ])
        }
        Frame::OntologyQuery { message_ontology, my_ontology, term } => SlNode::list(vec![
            SlNode::atom("ontologyQuery"),
            SlNode::list(vec![
                SlNode::atom("map"),
                SlNode::keyword("MessageOntology"),
                SlNode::atom(message_ontology),
                SlNode::keyword("MyOntology"),
                SlNode::atom(my_ontology),
                SlNode::keyword("term"),
                SlNode::atom(term),
            ]),
        ]),
        Frame::TermMapping { from_term, to_term } => SlNode::list(vec![
            SlNode::atom("Mapping"),
            SlNode::list(vec![
                SlNode::atom("From"),
                SlNode::keyword("term"),
                SlNode::string(from_term),
            ]),
            SlNode::list(vec![SlNode::atom("To"), SlNode::keyword("term"), SlNode::string(to_term)]),
        ]),
    }
}

fn set(entries: Vec<SlNode>) -> SlNode {
    let mut items = vec![SlNode::atom("set")];
    items.extend(entries);
    SlNode::List(items)
}

/// Expects `items` to be `[head, (WRAPPER (set ENTRY*))]` and returns the
/// entries of the set.
fn unwrap_set<'a>(
    items: &'a [SlNode],
    head: &str,
    wrapper: &str,
) -> Result<&'a [SlNode], FrameError> {
    if items.len() != 2 {
        return malformed(head);
    }
    let body = match items[1].as_list() {
        Some(body) => body,
        None => return malformed(&format!("{head}.{wrapper}")),
    };
    if body.len() != 2 || body[0].as_atom() != Some(wrapper) {
        return malformed(&format!("{head}.{wrapper}"));
    }
    let set_items = match body[1].as_list() {
        Some(set_items) => set_items,
        None => return malformed(&format!("{head}.{wrapper}.set")),
    };
    if set_items.first().and_then(SlNode::as_atom) != Some("set") {
        return malformed(&format!("{head}.{wrapper}.set"));
    }
    Ok(&set_items[1..])
}

fn decode_agents_to_be_trained(items: &[SlNode]) -> Result<Frame, FrameError> {
    let entries = unwrap_set(items, "agentsToBeTrained", "agents")?;
    let mut agents = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = "agentsToBeTrained.agents.set.agent";
        let fields = match entry.as_list() {
            Some(fields) if fields.len() == 5 && fields[0].as_atom() == Some("agent") => fields,
            _ => return malformed(path),
        };
        if fields[1] != SlNode::keyword("name") || fields[3] != SlNode::keyword("type") {
            return malformed(path);
        }
        let name = match fields[2].as_atom() {
            Some(name) => name.to_string(),
            None => return malformed(&format!("{path}.name")),
        };
        let agent_type = match fields[4].as_atom() {
            Some(t) => t.to_string(),
            None => return malformed(&format!("{path}.type")),
        };
        agents.push(AgentDescriptor { name, agent_type });
    }
    Ok(Frame::AgentsToBeTrained(agents))
}

fn decode_load_class(items: &[SlNode]) -> Result<Frame, FrameError> {
    let entries = unwrap_set(items, "loadClass", "behaviors")?;
    let mut classes = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = "loadClass.behaviors.set.behavior";
        let fields = match entry.as_list() {
            Some(fields) if fields.len() == 3 && fields[0].as_atom() == Some("behavior") => fields,
            _ => return malformed(path),
        };
        if fields[1] != SlNode::keyword("classname") {
            return malformed(path);
        }
        match fields[2].as_atom() {
            Some(class) => classes.push(class.to_string()),
            None => return malformed(&format!("{path}.classname")),
        }
    }
    Ok(Frame::LoadClass(classes))
}

fn decode_add_rule(items: &[SlNode]) -> Result<Frame, FrameError> {
    let entries = unwrap_set(items, "addRule", "jessRules")?;
    if entries.is_empty() {
        return malformed("addRule.jessRules.set");
    }
    let mut rules = Vec::with_capacity(entries.len());
    for entry in entries {
        let path = "addRule.jessRules.set.jessRule";
        let fields = match entry.as_list() {
            Some(fields) if fields.len() == 3 && fields[0].as_atom() == Some("jessRule") => fields,
            _ => return malformed(path),
        };
        if fields[1] != SlNode::keyword("rule") {
            return malformed(path);
        }
        let text = match fields[2].as_str() {
            Some(text) => text,
            None => return malformed(&format!("{path}.rule")),
        };
        if !text.starts_with("(defrule") {
            return malformed(&format!("{path}.rule"));
        }
        rules.push(text.to_string());
    }
    Ok(Frame::AddRule(rules))
}

fn decode_ontology_query(items: &[SlNode]) -> Result<Frame, FrameError> {
    if items.len() != 2 {
        return malformed("ontologyQuery");
    }
    let map = &items[1];
    if map.head() != Some("map") || map.as_list().map(|l| l.len()) != Some(7) {
        return malformed("ontologyQuery.map");
    }
    let field = |name: &str, path: &str| -> Result<String, FrameError> {
        match map.keyword_value(name).and_then(SlNode::as_atom) {
            Some(value) => Ok(value.to_string()),
            None => malformed(path),
        }
    };
    Ok(Frame::OntologyQuery {
        message_ontology: field("MessageOntology", "ontologyQuery.map.MessageOntology")?,
        my_ontology: field("MyOntology", "ontologyQuery.map.MyOntology")?,
        term: field("term", "ontologyQuery.map.term")?,
    })
}

fn decode_mapping(items: &[SlNode]) -> Result<Frame, FrameError> {
    if items.len() != 3 {
        return malformed("Mapping");
    }
    let side = |node: &SlNode, tag: &str, path: &str| -> Result<String, FrameError> {
        let fields = match node.as_list() {
            Some(fields) if fields.len() == 3 && fields[0].as_atom() == Some(tag) => fields,
            _ => return malformed(path),
        };
        if fields[1] != SlNode::keyword("term") {
            return malformed(path);
        }
        match fields[2].as_str() {
            Some(term) => Ok(term.to_string()),
            None => malformed(&format!("{path}.term")),
        }
    };
    Ok(Frame::TermMapping {
        from_term: side(&items[1], "From", "Mapping.From")?,
        to_term: side(&items[2], "To", "Mapping.To")?,
    })
}
