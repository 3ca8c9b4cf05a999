//! Runtime retraining for multi-agent systems, demonstrated on an
//! environmental-alert scenario.
//!
//! Agents on the [`platform`] log their inputs and decisions into a
//! [`repo`]sitory; the [`mining`] module turns accumulated observations
//! into a decision tree and compiles it into production [`rules`]; the
//! platform's training manager installs those rules back into the running
//! agents over the agent-communication protocol, closing the learning
//! loop without a restart. Messages use the [`sl`] s-expression content
//! language with the typed [`frames`] of the training protocol, and the
//! [`ontology`] service translates vocabulary between agents that speak
//! different term sets. The [`scenario`] module assembles all of it into
//! the environmental-alert society and its simulation driver.

pub mod frames;
pub mod mining;
pub mod ontology;
pub mod platform;
pub mod repo;
pub mod rules;
pub mod scenario;
pub mod sl;

pub use frames::{AgentDescriptor, Frame, FrameError};
pub use mining::{
    classify, induce_tree, tree_to_rules, AlarmType, Dataset, DecisionTree, Discretizer,
    MiningError, TrainingExample,
};
pub use ontology::{Ontology, OntologyError, OntologyService};
pub use platform::{
    AgentCtx, AgentId, AgentSpec, Behavior, Envelope, InstallEvent, Performative, Platform,
    PlatformError, Scheduler,
};
pub use repo::{
    FeedbackRecord, FeedbackSource, LabelChange, LabelState, Observation, ObservationRecord,
    RepoError, Repository, Verdict,
};
pub use rules::{Fact, Rule, RuleBase, RuleError, StoreAction, WorkingMemory};
pub use scenario::{SimConfig, SimError, SimOutcome};
pub use sl::{parse, print, ParseError, SlNode};
