//! Agent lifecycle and messaging: directory, mailboxes, scheduler, and
//! the training-module protocol (agent announcement, behavior loading,
//! rule installation, retraining).
//!
//! Everything is one process. Each agent owns a FIFO mailbox; a scheduler
//! picks the next (agent, message) pair and the agent processes that
//! message to completion — sends staged during handling are flushed
//! afterwards, so transcripts are deterministic. The deterministic
//! scheduler dequeues in global arrival order; the seeded randomized one
//! picks a random nonempty mailbox per step, which still preserves
//! per-pair FIFO because mailboxes only pop from the front.
//!
//! Two message kinds are handled by the platform itself, before any
//! behavior sees them: `loadClass` requests replace the agent's behavior
//! set with fresh instances from the behavior registry (a closed registry
//! stands in for dynamic code loading — same protocol, verifiable), and
//! `addRule` requests replace the agent's rulebase wholesale. Both are
//! atomic: any resolution or parse failure leaves the agent untouched and
//! sends a failure reply.
//!
//! The training manager (`atm`) is a built-in agent: it answers agent
//! announcements by sending each named agent the behavior classes
//! configured for its type, and answers `(retrain :location L)` requests
//! by mining a fresh dataset into rules and sending them back as an
//! `addRule` request.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::frames::{self, AgentDescriptor, Frame};
use crate::mining::{induce_tree, tree_to_rules, Dataset};
use crate::rules::{RuleBase, RuleError};
use crate::sl::{self, SlNode};

/// Platform management pseudo-agent: source of synthesized failure
/// notices (e.g. undeliverable messages).
pub const AMS: &str = "ams";
/// The agent factory identity; agent announcements are sent from it.
pub const AF: &str = "af";
/// The training manager agent.
pub const ATM: &str = "atm";
/// Ontology tag on framework (training-protocol) messages.
pub const TRAINING_ONTOLOGY: &str = "training";

/// Agent name, unique within a platform.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        AgentId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(name: &str) -> Self {
        AgentId(name.to_string())
    }
}

impl From<String> for AgentId {
    fn from(name: String) -> Self {
        AgentId(name)
    }
}

/// FIPA-subset speech acts: ask, tell, and report failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Performative {
    Request,
    Inform,
    Failure,
}

impl Performative {
    pub fn as_str(&self) -> &'static str {
        match self {
            Performative::Request => "request",
            Performative::Inform => "inform",
            Performative::Failure => "failure",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "request" => Some(Performative::Request),
            "inform" => Some(Performative::Inform),
            "failure" => Some(Performative::Failure),
            _ => None,
        }
    }
}

impl fmt::Display for Performative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One message. Content is canonical SL text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub performative: Performative,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub ontology: String,
    pub content: String,
}

impl Envelope {
    pub fn new(
        performative: Performative,
        sender: impl Into<AgentId>,
        receiver: impl Into<AgentId>,
        ontology: impl Into<String>,
        content: impl Into<String>,
    ) -> Self {
        Envelope {
            performative,
            sender: sender.into(),
            receiver: receiver.into(),
            ontology: ontology.into(),
            content: content.into(),
        }
    }
}

/// Creation request for one agent.
#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub name: String,
    pub agent_type: String,
    /// Behavior classes requested for this agent's type; they reach the
    /// agent through the training protocol, not directly.
    pub behaviors: Vec<String>,
    /// The agent's own vocabulary tag, carried on scenario messages.
    pub ontology: String,
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("agent name {0:?} is already registered")]
    DuplicateName(String),
    #[error("behavior class {0:?} is not in the registry")]
    UnknownBehavior(String),
    #[error("behavior class {0:?} is already registered")]
    DuplicateBehavior(String),
    #[error("receiver {0:?} is not registered")]
    UnknownReceiver(String),
    #[error("sender {0:?} is not registered")]
    UnknownSender(String),
    #[error("agent {0:?} is not registered")]
    UnknownAgent(String),
    #[error("{0:?} cannot be used as an agent or ontology symbol")]
    InvalidName(String),
    #[error("message content is not well-formed: {0}")]
    BadContent(#[from] sl::ParseError),
    #[error("still messages pending after {0} steps")]
    StepLimitExceeded(u64),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// How an agent reacts to one message. Returning `true` claims the
/// message; later behaviors on the same agent do not see it.
pub trait Behavior: Send {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool;

    /// Called after the platform installs a new rulebase on this agent.
    fn on_rules_installed(&mut self, _rules: &RuleBase) {}
}

/// Construction function for a behavior class; receives the [`AgentSpec`]
/// of the agent being equipped.
pub type BehaviorCtor = Box<dyn Fn(&AgentSpec) -> Result<Box<dyn Behavior>, String> + Send>;

/// Closed name→constructor table standing in for dynamic class loading.
#[derive(Default)]
pub struct BehaviorRegistry {
    ctors: BTreeMap<String, BehaviorCtor>,
}

impl BehaviorRegistry {
    pub fn register(&mut self, class: &str, ctor: BehaviorCtor) -> Result<(), PlatformError> {
        if self.ctors.contains_key(class) {
            return Err(PlatformError::DuplicateBehavior(class.to_string()));
        }
        self.ctors.insert(class.to_string(), ctor);
        Ok(())
    }

    pub fn contains(&self, class: &str) -> bool {
        self.ctors.contains_key(class)
    }

    fn construct(&self, class: &str, spec: &AgentSpec) -> Result<Box<dyn Behavior>, String> {
        match self.ctors.get(class) {
            Some(ctor) => ctor(spec).map_err(|e| format!("constructing {class}: {e}")),
            None => Err(format!("unknown behavior class {class:?}")),
        }
    }
}

/// Handler-side view of the platform: identity, clock, rulebase, and a
/// staging outbox flushed after the handler returns.
pub struct AgentCtx<'a> {
    agent: &'a AgentId,
    ontology: &'a str,
    tick: u64,
    rulebase: &'a RuleBase,
    outbox: &'a mut Vec<Outgoing>,
}

struct Outgoing {
    at_tick: Option<u64>,
    envelope: Envelope,
}

impl AgentCtx<'_> {
    pub fn agent(&self) -> &AgentId {
        self.agent
    }

    /// The agent's own vocabulary tag (from its spec).
    pub fn agent_ontology(&self) -> &str {
        self.ontology
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// The agent's installed prediction rulebase.
    pub fn rulebase(&self) -> &RuleBase {
        self.rulebase
    }

    /// Stages a message; it is delivered after the current handler
    /// finishes.
    pub fn send(
        &mut self,
        receiver: impl Into<AgentId>,
        performative: Performative,
        ontology: &str,
        content: String,
    ) {
        self.outbox.push(Outgoing {
            at_tick: None,
            envelope: Envelope::new(
                performative,
                self.agent.clone(),
                receiver,
                ontology,
                content,
            ),
        });
    }

    /// Stages a message for delivery when the platform clock reaches
    /// `tick` (delivered immediately if that tick has passed).
    pub fn send_at(
        &mut self,
        tick: u64,
        receiver: impl Into<AgentId>,
        performative: Performative,
        ontology: &str,
        content: String,
    ) {
        self.outbox.push(Outgoing {
            at_tick: Some(tick),
            envelope: Envelope::new(
                performative,
                self.agent.clone(),
                receiver,
                ontology,
                content,
            ),
        });
    }

    /// Stages the standard failure reply to `env`.
    pub fn reply_failure(&mut self, env: &Envelope, op: &str, reason: &str) {
        let content = failure_content(op, reason);
        self.send(env.sender.clone(), Performative::Failure, &env.ontology, content);
    }
}

/// Canonical failure payload: `(failure :op OP :reason "…")`.
pub fn failure_content(op: &str, reason: &str) -> String {
    sl::print(&SlNode::list(vec![
        SlNode::atom("failure"),
        SlNode::keyword("op"),
        SlNode::atom(op),
        SlNode::keyword("reason"),
        SlNode::string(reason),
    ]))
}

/// Extracts (op, reason) from a failure payload.
pub fn parse_failure(node: &SlNode) -> Option<(String, String)> {
    if node.head() != Some("failure") {
        return None;
    }
    let op = node.keyword_value("op")?.as_atom()?.to_string();
    let reason = node.keyword_value("reason")?.as_str()?.to_string();
    Some((op, reason))
}

/// Retraining request payload: `(retrain :location L)`.
pub fn retrain_content(location: &str) -> String {
    sl::print(&SlNode::list(vec![
        SlNode::atom("retrain"),
        SlNode::keyword("location"),
        SlNode::atom(location),
    ]))
}

/// Produces the training dataset for a location; installed by the
/// scenario so the training manager can mine.
pub type TrainingSource = Box<dyn FnMut(&str) -> Result<Dataset, String> + Send>;

type TrainingTable = Arc<Mutex<BTreeMap<String, Vec<String>>>>;
type SharedSource = Arc<Mutex<Option<TrainingSource>>>;

/// A rulebase installation that completed, for the driving loop to
/// observe (retraining epochs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallEvent {
    pub agent: AgentId,
    pub tick: u64,
}

/// Message-ordering policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    /// Global arrival order; required for golden-file transcripts.
    Deterministic,
    /// Seeded random choice among nonempty mailboxes each step.
    Randomized(u64),
}

struct Agent {
    id: AgentId,
    agent_type: String,
    ontology: String,
    behaviors: Vec<Box<dyn Behavior>>,
    rulebase: RuleBase,
    mailbox: VecDeque<(u64, Envelope)>,
}

/// The running platform: directory, mailboxes, clock, registry, and the
/// built-in management agents.
pub struct Platform {
    rng: Option<ChaCha8Rng>,
    tick: u64,
    seq: u64,
    agents: BTreeMap<String, Agent>,
    registry: BehaviorRegistry,
    training_table: TrainingTable,
    training_source: SharedSource,
    transcript: Vec<String>,
    timers: BTreeMap<u64, Vec<Envelope>>,
    install_events: Vec<InstallEvent>,
}

impl Platform {
    pub fn new(scheduler: Scheduler) -> Self {
        let rng = match scheduler {
            Scheduler::Deterministic => None,
            Scheduler::Randomized(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let training_table: TrainingTable = Arc::default();
        let training_source: SharedSource = Arc::default();
        let mut platform = Platform {
            rng,
            tick: 0,
            seq: 0,
            agents: BTreeMap::new(),
            registry: BehaviorRegistry::default(),
            training_table: training_table.clone(),
            training_source: training_source.clone(),
            transcript: Vec::new(),
            timers: BTreeMap::new(),
            install_events: Vec::new(),
        };
        let atm = AtmBehavior { table: training_table, source: training_source };
        platform
            .register_internal(AMS, "management", TRAINING_ONTOLOGY, vec![])
            .expect("fresh platform");
        platform
            .register_internal(AF, "management", TRAINING_ONTOLOGY, vec![])
            .expect("fresh platform");
        platform
            .register_internal(ATM, "management", TRAINING_ONTOLOGY, vec![Box::new(atm)])
            .expect("fresh platform");
        platform
    }

    /// Registers a behavior class constructor.
    pub fn register_behavior(
        &mut self,
        class: &str,
        ctor: impl Fn(&AgentSpec) -> Result<Box<dyn Behavior>, String> + Send + 'static,
    ) -> Result<(), PlatformError> {
        self.registry.register(class, Box::new(ctor))
    }

    /// Sets the behavior classes the training manager loads into agents
    /// of `agent_type`. Classes must already be registered; an empty
    /// list is allowed and loads nothing.
    pub fn configure_training(
        &mut self,
        agent_type: &str,
        classes: Vec<String>,
    ) -> Result<(), PlatformError> {
        for class in &classes {
            if !self.registry.contains(class) {
                return Err(PlatformError::UnknownBehavior(class.clone()));
            }
        }
        self.training_table.lock().unwrap().insert(agent_type.to_string(), classes);
        Ok(())
    }

    /// Installs the function the training manager mines datasets from.
    pub fn set_training_source(
        &mut self,
        source: impl FnMut(&str) -> Result<Dataset, String> + Send + 'static,
    ) {
        *self.training_source.lock().unwrap() = Some(Box::new(source));
    }

    /// Creates an agent with an empty behavior set and announces it to
    /// the training manager (the factory→manager frame), which equips it
    /// with the behaviors configured for its type. A nonempty
    /// `spec.behaviors` list seeds that configuration.
    pub fn create_agent(&mut self, spec: &AgentSpec) -> Result<AgentId, PlatformError> {
        for class in &spec.behaviors {
            if !self.registry.contains(class) {
                return Err(PlatformError::UnknownBehavior(class.clone()));
            }
        }
        let id = self.register_internal(&spec.name, &spec.agent_type, &spec.ontology, vec![])?;
        if !spec.behaviors.is_empty() {
            self.training_table
                .lock()
                .unwrap()
                .insert(spec.agent_type.clone(), spec.behaviors.clone());
        }
        let frame = Frame::AgentsToBeTrained(vec![AgentDescriptor {
            name: spec.name.clone(),
            agent_type: spec.agent_type.clone(),
        }]);
        let announce = Envelope::new(
            Performative::Request,
            AF,
            ATM,
            TRAINING_ONTOLOGY,
            sl::print(&frames::encode(&frame)),
        );
        self.deliver(announce).expect("management agents are registered");
        Ok(id)
    }

    /// Registers an agent with fixed behaviors and no announcement —
    /// for infrastructure that is not trained through the protocol.
    pub fn register_service(
        &mut self,
        name: &str,
        ontology: &str,
        behaviors: Vec<Box<dyn Behavior>>,
    ) -> Result<AgentId, PlatformError> {
        self.register_internal(name, "service", ontology, behaviors)
    }

    fn register_internal(
        &mut self,
        name: &str,
        agent_type: &str,
        ontology: &str,
        behaviors: Vec<Box<dyn Behavior>>,
    ) -> Result<AgentId, PlatformError> {
        if !sl::is_atom_text(name) {
            return Err(PlatformError::InvalidName(name.to_string()));
        }
        if !sl::is_atom_text(ontology) {
            return Err(PlatformError::InvalidName(ontology.to_string()));
        }
        if self.agents.contains_key(name) {
            return Err(PlatformError::DuplicateName(name.to_string()));
        }
        let id = AgentId::new(name);
        self.agents.insert(
            name.to_string(),
            Agent {
                id: id.clone(),
                agent_type: agent_type.to_string(),
                ontology: ontology.to_string(),
                behaviors,
                rulebase: RuleBase::default(),
                mailbox: VecDeque::new(),
            },
        );
        Ok(id)
    }

    pub fn is_registered(&self, name: &str) -> bool {
        self.agents.contains_key(name)
    }

    /// The installed rulebase of an agent, if registered.
    pub fn rulebase_of(&self, name: &str) -> Option<&RuleBase> {
        self.agents.get(name).map(|a| &a.rulebase)
    }

    /// Replaces an agent's rulebase directly (no messaging). Unlike the
    /// wire frame, which requires at least one rule, an empty source
    /// list is allowed here and installs an empty rulebase.
    pub fn install_rules(&mut self, name: &str, sources: &[String]) -> Result<(), PlatformError> {
        let rulebase = RuleBase::parse(sources)?;
        let tick = self.tick;
        let agent = self
            .agents
            .get_mut(name)
            .ok_or_else(|| PlatformError::UnknownAgent(name.to_string()))?;
        agent.rulebase = rulebase;
        for behavior in agent.behaviors.iter_mut() {
            behavior.on_rules_installed(&agent.rulebase);
        }
        self.install_events.push(InstallEvent { agent: agent.id.clone(), tick });
        Ok(())
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Advances the clock one tick and releases messages scheduled for
    /// it.
    pub fn advance_tick(&mut self) {
        self.tick += 1;
        let due: Vec<u64> = self.timers.range(..=self.tick).map(|(t, _)| *t).collect();
        for t in due {
            for envelope in self.timers.remove(&t).unwrap_or_default() {
                self.deliver_or_bounce(envelope);
            }
        }
    }

    /// Schedules `envelope` for delivery at `at_tick` (immediately if
    /// already reached).
    pub fn schedule_at(&mut self, at_tick: u64, envelope: Envelope) {
        if at_tick <= self.tick {
            self.deliver_or_bounce(envelope);
        } else {
            self.timers.entry(at_tick).or_default().push(envelope);
        }
    }

    /// Validates and enqueues one message; stamps it into the transcript
    /// at arrival.
    pub fn deliver(&mut self, envelope: Envelope) -> Result<(), PlatformError> {
        if !self.agents.contains_key(envelope.sender.as_str()) {
            return Err(PlatformError::UnknownSender(envelope.sender.as_str().to_string()));
        }
        if !self.agents.contains_key(envelope.receiver.as_str()) {
            return Err(PlatformError::UnknownReceiver(envelope.receiver.as_str().to_string()));
        }
        if !sl::is_atom_text(&envelope.ontology) {
            return Err(PlatformError::InvalidName(envelope.ontology.clone()));
        }
        sl::parse(&envelope.content)?;
        self.seq += 1;
        self.transcript.push(format!(
            "{} {} {} {} {} {}",
            self.tick,
            envelope.sender,
            envelope.receiver,
            envelope.performative,
            envelope.ontology,
            envelope.content
        ));
        let seq = self.seq;
        self.agents
            .get_mut(envelope.receiver.as_str())
            .expect("receiver checked above")
            .mailbox
            .push_back((seq, envelope));
        Ok(())
    }

    /// Delivers, converting an undeliverable message into a failure
    /// notice back to its sender.
    fn deliver_or_bounce(&mut self, envelope: Envelope) {
        let sender = envelope.sender.clone();
        let ontology = envelope.ontology.clone();
        if let Err(err) = self.deliver(envelope) {
            let notice = Envelope::new(
                Performative::Failure,
                AMS,
                sender,
                ontology,
                failure_content("deliver", &err.to_string()),
            );
            // the sender was just dispatched, so it is registered; if the
            // notice itself cannot be delivered there is nobody to tell
            let _ = self.deliver(notice);
        }
    }

    /// Processes one message if any is pending. Returns false when all
    /// mailboxes are empty.
    pub fn step(&mut self) -> bool {
        let Some(name) = self.next_target() else { return false };
        let (_, envelope) = self
            .agents
            .get_mut(&name)
            .expect("scheduler picked a live agent")
            .mailbox
            .pop_front()
            .expect("scheduler picked a nonempty mailbox");
        self.dispatch(&name, envelope);
        true
    }

    /// Runs until every mailbox is empty; errs if `max_steps` messages
    /// were processed without reaching quiescence.
    pub fn run_until_quiet(&mut self, max_steps: u64) -> Result<u64, PlatformError> {
        let mut steps = 0;
        while self.step() {
            steps += 1;
            if steps > max_steps {
                return Err(PlatformError::StepLimitExceeded(max_steps));
            }
        }
        Ok(steps)
    }

    /// Message lines in arrival order: `tick sender receiver
    /// performative ontology content`.
    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    /// Removes and returns the rule installations observed since the
    /// last call.
    pub fn take_install_events(&mut self) -> Vec<InstallEvent> {
        std::mem::take(&mut self.install_events)
    }

    fn next_target(&mut self) -> Option<String> {
        let nonempty: Vec<&String> = self
            .agents
            .iter()
            .filter(|(_, agent)| !agent.mailbox.is_empty())
            .map(|(name, _)| name)
            .collect();
        if nonempty.is_empty() {
            return None;
        }
        match &mut self.rng {
            None => nonempty
                .into_iter()
                .min_by_key(|name| {
                    self.agents[*name].mailbox.front().expect("mailbox nonempty").0
                })
                .cloned(),
            Some(rng) => {
                let i = rng.gen_range(0..nonempty.len());
                Some(nonempty[i].clone())
            }
        }
    }

    fn dispatch(&mut self, name: &str, envelope: Envelope) {
        let mut agent = self.agents.remove(name).expect("dispatch target exists");
        let node = sl::parse(&envelope.content).expect("content validated at deliver");
        let mut pending: Vec<Outgoing> = Vec::new();
        let mut handled = false;

        // platform-level handling: behavior loading and rule installation
        if envelope.performative == Performative::Request {
            match frames::decode(&node) {
                Ok(Frame::LoadClass(classes)) => {
                    handled = true;
                    match self.construct_behaviors(&agent, &classes) {
                        Ok(behaviors) => agent.behaviors = behaviors,
                        Err(reason) => pending.push(Outgoing {
                            at_tick: None,
                            envelope: Envelope::new(
                                Performative::Failure,
                                agent.id.clone(),
                                envelope.sender.clone(),
                                envelope.ontology.clone(),
                                failure_content("loadClass", &reason),
                            ),
                        }),
                    }
                }
                Ok(Frame::AddRule(sources)) => {
                    handled = true;
                    match RuleBase::parse(&sources) {
                        Ok(rulebase) => {
                            agent.rulebase = rulebase;
                            for behavior in agent.behaviors.iter_mut() {
                                behavior.on_rules_installed(&agent.rulebase);
                            }
                            self.install_events
                                .push(InstallEvent { agent: agent.id.clone(), tick: self.tick });
                        }
                        Err(err) => pending.push(Outgoing {
                            at_tick: None,
                            envelope: Envelope::new(
                                Performative::Failure,
                                agent.id.clone(),
                                envelope.sender.clone(),
                                envelope.ontology.clone(),
                                failure_content("addRule", &err.to_string()),
                            ),
                        }),
                    }
                }
                _ => {}
            }
        }

        if !handled {
            let mut behaviors = std::mem::take(&mut agent.behaviors);
            {
                let mut ctx = AgentCtx {
                    agent: &agent.id,
                    ontology: &agent.ontology,
                    tick: self.tick,
                    rulebase: &agent.rulebase,
                    outbox: &mut pending,
                };
                for behavior in behaviors.iter_mut() {
                    if behavior.handle(&mut ctx, &envelope) {
                        handled = true;
                        break;
                    }
                }
            }
            agent.behaviors = behaviors;
        }

        if !handled && envelope.performative == Performative::Request {
            // a request nobody understood gets an explicit failure;
            // unhandled informs and failures are dropped (replying to a
            // failure could loop)
            let op = node.head().unwrap_or("request");
            pending.push(Outgoing {
                at_tick: None,
                envelope: Envelope::new(
                    Performative::Failure,
                    agent.id.clone(),
                    envelope.sender.clone(),
                    envelope.ontology.clone(),
                    failure_content(op, "not-understood"),
                ),
            });
        }

        self.agents.insert(name.to_string(), agent);
        for outgoing in pending {
            match outgoing.at_tick {
                Some(t) => self.schedule_at(t, outgoing.envelope),
                None => self.deliver_or_bounce(outgoing.envelope),
            }
        }
    }

    fn construct_behaviors(
        &self,
        agent: &Agent,
        classes: &[String],
    ) -> Result<Vec<Box<dyn Behavior>>, String> {
        let spec = AgentSpec {
            name: agent.id.as_str().to_string(),
            agent_type: agent.agent_type.clone(),
            behaviors: classes.to_vec(),
            ontology: agent.ontology.clone(),
        };
        classes.iter().map(|class| self.registry.construct(class, &spec)).collect()
    }
}

/// The training manager: equips announced agents with their type's
/// behavior classes and turns retrain requests into freshly mined rule
/// installations.
struct AtmBehavior {
    table: TrainingTable,
    source: SharedSource,
}

impl Behavior for AtmBehavior {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        if env.performative != Performative::Request {
            return false;
        }
        let Ok(node) = sl::parse(&env.content) else { return false };
        match node.head() {
            Some("agentsToBeTrained") => {
                match frames::decode(&node) {
                    Ok(Frame::AgentsToBeTrained(descriptors)) => {
                        for descriptor in descriptors {
                            let classes =
                                self.table.lock().unwrap().get(&descriptor.agent_type).cloned();
                            match classes {
                                Some(classes) => {
                                    let frame = Frame::LoadClass(classes);
                                    ctx.send(
                                        descriptor.name.as_str(),
                                        Performative::Request,
                                        TRAINING_ONTOLOGY,
                                        sl::print(&frames::encode(&frame)),
                                    );
                                }
                                None => ctx.reply_failure(
                                    env,
                                    "agentsToBeTrained",
                                    &format!(
                                        "no behaviors configured for type {:?}",
                                        descriptor.agent_type
                                    ),
                                ),
                            }
                        }
                    }
                    _ => ctx.reply_failure(env, "agentsToBeTrained", "malformed frame"),
                }
                true
            }
            Some("retrain") => {
                let Some(location) = node.keyword_value("location").and_then(SlNode::as_atom)
                else {
                    ctx.reply_failure(env, "retrain", "missing :location");
                    return true;
                };
                let mut source = self.source.lock().unwrap();
                let Some(source) = source.as_mut() else {
                    ctx.reply_failure(env, "retrain", "no training source configured");
                    return true;
                };
                match source(location) {
                    Err(reason) => ctx.reply_failure(env, "retrain", &reason),
                    Ok(dataset) if dataset.is_empty() => ctx.reply_failure(
                        env,
                        "retrain",
                        &format!("no training examples for location {location:?}"),
                    ),
                    Ok(dataset) => match induce_tree(&dataset) {
                        Ok(tree) => {
                            let sources: Vec<String> =
                                tree_to_rules(&tree).iter().map(|r| r.to_string()).collect();
                            let frame = Frame::AddRule(sources);
                            ctx.send(
                                env.sender.clone(),
                                Performative::Request,
                                TRAINING_ONTOLOGY,
                                sl::print(&frames::encode(&frame)),
                            );
                        }
                        Err(err) => ctx.reply_failure(env, "retrain", &err.to_string()),
                    },
                }
                true
            }
            _ => false,
        }
    }
}
