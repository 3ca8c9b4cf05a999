//! Simulation configuration: TOML sections for the environment, the
//! three monitored variables, policy constants, users, and ontologies.
//!
//! Every load path goes through [`SimConfig::validate`], which reports
//! the offending field by path (`variable[1].t_low`, `user[0].channels`)
//! so a misconfigured run fails before any agent is created.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mining::DecisionTree;
use crate::sl;

/// Category names every variable discretizes into, in domain order.
pub const CATEGORY_DOMAIN: [&str; 3] = ["low", "normal", "high"];

/// Delivery windows repeat with this period (a tick is an hour).
pub const HOURS_PER_DAY: u64 = 24;

#[derive(Debug, Clone, Error)]
#[error("config error at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn bad(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

/// Root of the simulation configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub simulation: Simulation,
    pub environment: Environment,
    #[serde(rename = "variable")]
    pub variables: Vec<Variable>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default)]
    pub feedback: Feedback,
    #[serde(default)]
    pub repository: RepositorySettings,
    pub hidden_truth: HiddenTruth,
    #[serde(rename = "user", default)]
    pub users: Vec<User>,
    #[serde(default)]
    pub ontology: OntologySettings,
    #[serde(default)]
    pub agents: AgentOntologies,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub seed: u64,
    pub ticks: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    /// Station count; stations are named `station_1..station_N` and
    /// assigned to `locations` round-robin.
    pub stations: u32,
    pub locations: Vec<String>,
    /// Probability a reading is replaced by an out-of-bounds spike.
    #[serde(default)]
    pub fault_prob: f64,
    /// Probability a latent regime repeats on the next tick.
    #[serde(default = "default_stay_prob")]
    pub regime_stay_prob: f64,
}

fn default_stay_prob() -> f64 {
    0.8
}

/// One monitored variable: physical bounds, discretization thresholds,
/// and the value range the generator draws from in each latent regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variable {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub t_low: f64,
    pub t_high: f64,
    pub regimes: RegimeRanges,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeRanges {
    pub low: [f64; 2],
    pub normal: [f64; 2],
    pub high: [f64; 2],
}

impl RegimeRanges {
    /// Ranges in domain order (low, normal, high).
    pub fn ordered(&self) -> [[f64; 2]; 3] {
        [self.low, self.normal, self.high]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Policy {
    /// Individual feedback votes needed to label an event.
    pub k: u32,
    /// Window length for the error-rate retraining trigger.
    pub window: u32,
    /// Labeled-error rate above which a completed window triggers
    /// retraining.
    pub epsilon: f64,
    /// Unconditional retraining period, in predictions.
    pub retrain_every: u32,
    /// Alarm codes at or above this always go out by sms immediately.
    pub urgent_threshold: u8,
    /// Enables the error-rate window trigger (the periodic trigger is
    /// always on).
    pub window_trigger: bool,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            k: 5,
            window: 50,
            epsilon: 0.1,
            retrain_every: 200,
            urgent_threshold: 3,
            window_trigger: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Feedback {
    /// Fraction of events the institutional authority reviews.
    pub institutional_fraction: f64,
    /// Probability an individual verdict is truthful.
    pub individual_accuracy: f64,
}

impl Default for Feedback {
    fn default() -> Self {
        Feedback { institutional_fraction: 0.2, individual_accuracy: 0.9 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepositorySettings {
    /// Log file for the usage repository; in-memory when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenTruth {
    /// Ground-truth alarm function as a nested s-expression,
    /// `(node VAR (CAT SUBTREE)…)` / `(leaf CODE)`.
    pub tree: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub id: String,
    /// Alarm codes this user wants to hear about.
    pub subscribes: Vec<u8>,
    pub location: String,
    #[serde(default)]
    pub mobile: bool,
    /// Preferred channels with their daily hour windows, most preferred
    /// first.
    pub channels: Vec<Channel>,
    /// Mobile movement plan: from each tick on, the user is at the given
    /// location.
    #[serde(default)]
    pub itinerary: Vec<ItineraryEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub channel: String,
    /// Window start hour (inclusive), 0–23.
    pub start: u64,
    /// Window end hour (exclusive), 1–24.
    pub end: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItineraryEntry {
    pub from_tick: u64,
    pub location: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OntologySettings {
    /// Vocabulary tag stamped on scenario messages when agents don't
    /// override it.
    pub default: String,
    pub ontologies: Vec<OntologyDef>,
    pub maps: Vec<MapDef>,
}

impl Default for OntologySettings {
    fn default() -> Self {
        OntologySettings { default: "O3RTAA".into(), ontologies: Vec::new(), maps: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyDef {
    pub name: String,
    pub terms: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDef {
    pub from: String,
    pub to: String,
    pub pairs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentOntologies {
    /// Vocabulary the diagnosis agent emits (defaults to
    /// `ontology.default`).
    pub diagnosis_ontology: Option<String>,
    /// Vocabulary predictors assert facts in; when it differs from the
    /// diagnosis vocabulary, incoming terms are translated through the
    /// ontology agent.
    pub predictor_ontology: Option<String>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<SimConfig, ConfigError> {
        let config: SimConfig =
            toml::from_str(text).map_err(|e| bad("(syntax)", e.to_string().trim()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| bad("(file)", format!("{}: {e}", path.as_ref().display())))?;
        SimConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config sections serialize")
    }

    /// Mining schema over the configured variables: each with the fixed
    /// low/normal/high domain, in file order.
    pub fn schema(&self) -> Vec<(String, Vec<String>)> {
        self.variables
            .iter()
            .map(|v| (v.name.clone(), CATEGORY_DOMAIN.iter().map(|c| c.to_string()).collect()))
            .collect()
    }

    /// The parsed ground-truth tree (valid after [`validate`]).
    pub fn hidden_tree(&self) -> Result<DecisionTree, ConfigError> {
        let node = sl::parse(&self.hidden_truth.tree)
            .map_err(|e| bad("hidden_truth.tree", e.to_string()))?;
        let tree =
            DecisionTree::from_sl(&node).map_err(|e| bad("hidden_truth.tree", e.to_string()))?;
        tree.validate(&self.schema()).map_err(|e| bad("hidden_truth.tree", e.to_string()))?;
        Ok(tree)
    }

    pub fn diagnosis_ontology(&self) -> &str {
        self.agents.diagnosis_ontology.as_deref().unwrap_or(&self.ontology.default)
    }

    pub fn predictor_ontology(&self) -> &str {
        self.agents.predictor_ontology.as_deref().unwrap_or(&self.ontology.default)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.environment.stations == 0 {
            return Err(bad("environment.stations", "at least one station is required"));
        }
        if self.environment.locations.is_empty() {
            return Err(bad("environment.locations", "at least one location is required"));
        }
        for (i, location) in self.environment.locations.iter().enumerate() {
            if !sl::is_atom_text(location) {
                return Err(bad(
                    format!("environment.locations[{i}]"),
                    "not usable as a message symbol",
                ));
            }
        }
        if !(0.0..1.0).contains(&self.environment.fault_prob) {
            return Err(bad("environment.fault_prob", "must be in [0, 1)"));
        }
        if !(self.environment.regime_stay_prob > 0.0 && self.environment.regime_stay_prob <= 1.0) {
            return Err(bad("environment.regime_stay_prob", "must be in (0, 1]"));
        }

        if self.variables.is_empty() {
            return Err(bad("variable", "at least one variable is required"));
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            let path = |field: &str| format!("variable[{i}].{field}");
            if !sl::is_atom_text(&v.name) {
                return Err(bad(path("name"), "not usable as a message symbol"));
            }
            if !names.insert(v.name.clone()) {
                return Err(bad(path("name"), format!("duplicate variable {:?}", v.name)));
            }
            // partial_cmp so that NaN bounds are rejected too
            if v.min.partial_cmp(&v.max) != Some(Ordering::Less) {
                return Err(bad(path("min"), "min must be below max"));
            }
            if v.t_low.partial_cmp(&v.t_high) != Some(Ordering::Less) {
                return Err(bad(path("t_low"), "t_low must be below t_high"));
            }
            if v.t_low < v.min || v.t_high > v.max {
                return Err(bad(path("t_low"), "thresholds must lie within [min, max]"));
            }
            for (regime, [lo, hi]) in
                ["low", "normal", "high"].iter().zip(v.regimes.ordered().iter())
            {
                if !matches!(lo.partial_cmp(hi), Some(Ordering::Less | Ordering::Equal)) {
                    return Err(bad(
                        path(&format!("regimes.{regime}")),
                        "range start must not exceed range end",
                    ));
                }
                if *lo < v.min || *hi > v.max {
                    return Err(bad(
                        path(&format!("regimes.{regime}")),
                        "range must lie within [min, max]",
                    ));
                }
            }
        }

        if self.policy.k == 0 {
            return Err(bad("policy.k", "threshold must be at least 1"));
        }
        if self.policy.window == 0 {
            return Err(bad("policy.window", "window must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.policy.epsilon) {
            return Err(bad("policy.epsilon", "must be in [0, 1]"));
        }
        if self.policy.retrain_every == 0 {
            return Err(bad("policy.retrain_every", "period must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.feedback.institutional_fraction) {
            return Err(bad("feedback.institutional_fraction", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.feedback.individual_accuracy) {
            return Err(bad("feedback.individual_accuracy", "must be in [0, 1]"));
        }

        self.hidden_tree()?;

        let mut user_ids = std::collections::BTreeSet::new();
        for (i, user) in self.users.iter().enumerate() {
            let path = |field: &str| format!("user[{i}].{field}");
            if !sl::is_atom_text(&user.id) {
                return Err(bad(path("id"), "not usable as a message symbol"));
            }
            if !user_ids.insert(user.id.clone()) {
                return Err(bad(path("id"), format!("duplicate user {:?}", user.id)));
            }
            if !sl::is_atom_text(&user.location) {
                return Err(bad(path("location"), "not usable as a message symbol"));
            }
            for code in &user.subscribes {
                if *code > 3 {
                    return Err(bad(path("subscribes"), "alarm codes are 0–3"));
                }
            }
            if user.channels.is_empty() {
                return Err(bad(path("channels"), "at least one channel is required"));
            }
            for (j, ch) in user.channels.iter().enumerate() {
                let path = |field: &str| format!("user[{i}].channels[{j}].{field}");
                if !matches!(ch.channel.as_str(), "email" | "sms" | "html") {
                    return Err(bad(path("channel"), "must be email, sms, or html"));
                }
                if !(ch.start < ch.end && ch.end <= HOURS_PER_DAY) {
                    return Err(bad(path("start"), "window must satisfy start < end <= 24"));
                }
            }
            let mut previous = None;
            for (j, entry) in user.itinerary.iter().enumerate() {
                let path = format!("user[{i}].itinerary[{j}]");
                if !sl::is_atom_text(&entry.location) {
                    return Err(bad(path, "location not usable as a message symbol"));
                }
                if previous.is_some_and(|p| p >= entry.from_tick) {
                    return Err(bad(path, "entries must be in increasing tick order"));
                }
                previous = Some(entry.from_tick);
            }
            if !user.itinerary.is_empty() && !user.mobile {
                return Err(bad(
                    format!("user[{i}].itinerary"),
                    "only mobile users have itineraries",
                ));
            }
        }

        if !sl::is_atom_text(&self.ontology.default) {
            return Err(bad("ontology.default", "not usable as a message symbol"));
        }
        let mut ontology_names = std::collections::BTreeSet::new();
        for (i, def) in self.ontology.ontologies.iter().enumerate() {
            let path = format!("ontology.ontologies[{i}]");
            if !sl::is_atom_text(&def.name) {
                return Err(bad(path, "name not usable as a message symbol"));
            }
            if def.terms.is_empty() {
                return Err(bad(path, "term set must be nonempty"));
            }
            if !ontology_names.insert(def.name.clone()) {
                return Err(bad(path, format!("duplicate ontology {:?}", def.name)));
            }
        }
        for (i, map) in self.ontology.maps.iter().enumerate() {
            let path = format!("ontology.maps[{i}]");
            for name in [&map.from, &map.to] {
                if !ontology_names.contains(name) {
                    return Err(bad(path.clone(), format!("unregistered ontology {name:?}")));
                }
            }
        }
        for (field, value) in [
            ("agents.diagnosis_ontology", &self.agents.diagnosis_ontology),
            ("agents.predictor_ontology", &self.agents.predictor_ontology),
        ] {
            if let Some(name) = value {
                if !ontology_names.contains(name) {
                    return Err(bad(field, format!("unregistered ontology {name:?}")));
                }
            }
        }
        Ok(())
    }

    /// The reference scenario: 25 stations around one region, the three
    /// standard variables, default policy constants, and a small user
    /// population.
    pub fn standard() -> SimConfig {
        SimConfig::from_toml_str(STANDARD_TOML).expect("reference config is valid")
    }

    /// TOML source of [`SimConfig::standard`], usable as a starting
    /// point for config files.
    pub fn standard_toml() -> &'static str {
        STANDARD_TOML
    }
}

const STANDARD_TOML: &str = r#"[simulation]
seed = 42
ticks = 120

[environment]
stations = 25
locations = ["valencia"]
fault_prob = 0.01
regime_stay_prob = 0.8

[[variable]]
name = "ozone"
min = 0.0
max = 300.0
t_low = 60.0
t_high = 180.0
regimes = { low = [0.0, 59.0], normal = [60.0, 180.0], high = [181.0, 300.0] }

[[variable]]
name = "NO2NO3"
min = 0.0
max = 200.0
t_low = 50.0
t_high = 140.0
regimes = { low = [0.0, 49.0], normal = [50.0, 140.0], high = [141.0, 200.0] }

[[variable]]
name = "pressure"
min = 900.0
max = 1100.0
t_low = 980.0
t_high = 1040.0
regimes = { low = [900.0, 979.0], normal = [980.0, 1040.0], high = [1041.0, 1100.0] }

[policy]
k = 5
window = 50
epsilon = 0.1
retrain_every = 200
urgent_threshold = 3
window_trigger = true

[feedback]
institutional_fraction = 0.2
individual_accuracy = 0.9

[hidden_truth]
tree = "(node ozone (low (node pressure (low (leaf 1)) (normal (leaf 0)) (high (leaf 0)))) (normal (node NO2NO3 (low (leaf 0)) (normal (leaf 2)) (high (leaf 2)))) (high (node NO2NO3 (low (leaf 2)) (normal (leaf 3)) (high (leaf 3)))))"

[[user]]
id = "user_1"
subscribes = [1, 2, 3]
location = "valencia"
channels = [
    { channel = "email", start = 8, end = 18 },
    { channel = "html", start = 18, end = 23 },
]

[[user]]
id = "user_2"
subscribes = [3]
location = "valencia"
channels = [{ channel = "email", start = 9, end = 17 }]

[[user]]
id = "user_3"
subscribes = [2, 3]
location = "valencia"
mobile = true
channels = [{ channel = "sms", start = 0, end = 24 }]

[[user.itinerary]]
from_tick = 0
location = "valencia"

[[user.itinerary]]
from_tick = 60
location = "madrid"
"#;
