//! The scenario's agents: diagnosis (screening), prediction (rule
//! engine + retraining triggers), distribution (profiles and channels),
//! users (location and acknowledgements), feedback (verdict simulation),
//! and the ontology query service.
//!
//! Each behavior is constructed by the society builder with shared
//! handles (repository, ground truth, delivery sink) and then lives
//! inside the platform, reacting only to messages.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::frames::{self, Frame};
use crate::mining::{AlarmType, DecisionTree, Discretizer};
use crate::ontology::OntologyService;
use crate::platform::{
    parse_failure, retrain_content, AgentCtx, Behavior, Envelope, Performative, ATM,
    TRAINING_ONTOLOGY,
};
use crate::repo::{FeedbackRecord, FeedbackSource, LabelState, Observation, Repository, Verdict};
use crate::rules::RuleBase;
use crate::sl;

use super::config::{self, HOURS_PER_DAY};
use super::messages::{self, Alarm, Alert, SignificantChange};
use super::metrics::{predict_alarm, truth_of};

/// Well-known agent names in the scenario society.
pub const DIAGNOSIS_AGENT: &str = "da";
pub const DISTRIBUTOR_AGENT: &str = "dist";
pub const FEEDBACK_AGENT: &str = "fb";
pub const ONTOLOGY_AGENT: &str = "oa";
/// Pseudo-agent the driver speaks as: sensor batches and feedback-round
/// cues come from the world, not from any agent in the society.
pub const ENVIRONMENT_AGENT: &str = "env";

/// The predictor responsible for one location.
pub fn predictor_name(location: &str) -> String {
    format!("predictor_{location}")
}

/// Location encoded in a predictor's agent name.
pub fn predictor_location(name: &str) -> Option<&str> {
    name.strip_prefix("predictor_").filter(|loc| !loc.is_empty())
}

type SharedRepo = Arc<Mutex<Repository>>;

// ---------------------------------------------------------------- diagnosis

/// Screens raw readings: logs everything, drops out-of-bounds values as
/// faulty, drops unchanged categories as redundant, and forwards one
/// significant-change report per station carrying the station's full
/// current category map.
pub struct DiagnosisBehavior {
    repo: SharedRepo,
    /// station id → location symbol.
    stations: Arc<BTreeMap<String, String>>,
    /// variable → (min, max) physical bounds.
    bounds: BTreeMap<String, (f64, f64)>,
    discretizer: Discretizer,
    /// Last forwarded (raw, category) per station and variable.
    last: BTreeMap<String, BTreeMap<String, (f64, String)>>,
}

impl DiagnosisBehavior {
    pub fn new(
        repo: SharedRepo,
        stations: Arc<BTreeMap<String, String>>,
        variables: &[config::Variable],
    ) -> Self {
        let mut discretizer = Discretizer::new();
        let mut bounds = BTreeMap::new();
        for v in variables {
            discretizer
                .set_thresholds(v.name.clone(), v.t_low, v.t_high)
                .expect("validated config thresholds");
            bounds.insert(v.name.clone(), (v.min, v.max));
        }
        DiagnosisBehavior { repo, stations, bounds, discretizer, last: BTreeMap::new() }
    }
}

impl Behavior for DiagnosisBehavior {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        if env.performative != Performative::Inform {
            return false;
        }
        let Ok(node) = sl::parse(&env.content) else { return false };
        let Some((tick, readings)) = messages::parse_sensor_batch(&node) else { return false };

        {
            let mut repo = self.repo.lock().unwrap();
            for r in &readings {
                // every reading is logged, the discarded ones included
                let _ = repo.log_sense(tick, &r.station, &r.variable, r.value);
            }
        }

        let mut changed: BTreeSet<String> = BTreeSet::new();
        for r in &readings {
            let Some(&(min, max)) = self.bounds.get(&r.variable) else { continue };
            if !(r.value >= min && r.value <= max) {
                continue; // faulty: never reaches a predictor
            }
            let Ok(category) = self.discretizer.discretize(&r.variable, r.value) else {
                continue;
            };
            let station = self.last.entry(r.station.clone()).or_default();
            match station.get(&r.variable) {
                Some((_, previous)) if previous == category => {} // redundant
                _ => {
                    station.insert(r.variable.clone(), (r.value, category.to_string()));
                    changed.insert(r.station.clone());
                }
            }
        }

        let ontology = ctx.agent_ontology().to_string();
        for station in changed {
            let Some(location) = self.stations.get(&station) else { continue };
            let values = self.last[&station]
                .iter()
                .map(|(variable, (raw, category))| (variable.clone(), *raw, category.clone()))
                .collect();
            let sc = SignificantChange {
                station,
                location: location.clone(),
                tick,
                values,
            };
            ctx.send(
                predictor_name(location).as_str(),
                Performative::Inform,
                &ontology,
                messages::significant_change(&sc),
            );
        }
        true
    }
}

// ---------------------------------------------------------------- predictor

/// Runs the installed rulebase over incoming category maps, records
/// every prediction, raises alarms, and asks for retraining periodically
/// or when the recent labeled-error rate is too high. Reports arriving
/// in a foreign vocabulary are translated through the ontology agent
/// (term by term, cached).
pub struct PredictorBehavior {
    location: String,
    repo: SharedRepo,
    window: u32,
    epsilon: f64,
    retrain_every: u32,
    window_trigger: bool,
    count: u64,
    /// Event ids of the last `window` predictions.
    recent: VecDeque<u64>,
    retrain_in_flight: bool,
    /// foreign term → own term, filled by Mapping replies.
    term_cache: BTreeMap<String, String>,
    awaiting: BTreeSet<String>,
    /// Reports waiting for term translations, oldest first.
    pending: VecDeque<SignificantChange>,
}

impl PredictorBehavior {
    pub fn new(location: impl Into<String>, repo: SharedRepo, policy: &config::Policy) -> Self {
        PredictorBehavior {
            location: location.into(),
            repo,
            window: policy.window,
            epsilon: policy.epsilon,
            retrain_every: policy.retrain_every,
            window_trigger: policy.window_trigger,
            count: 0,
            recent: VecDeque::new(),
            retrain_in_flight: false,
            term_cache: BTreeMap::new(),
            awaiting: BTreeSet::new(),
            pending: VecDeque::new(),
        }
    }

    fn process(&mut self, ctx: &mut AgentCtx<'_>, sc: &SignificantChange) {
        let mut categories = BTreeMap::new();
        let mut raw = BTreeMap::new();
        for (variable, value, category) in &sc.values {
            categories.insert(variable.clone(), category.clone());
            raw.insert(variable.clone(), *value);
        }
        let predicted = predict_alarm(ctx.rulebase(), &categories);
        let observation = Observation {
            tick: ctx.tick(),
            location: self.location.clone(),
            raw,
            categories,
            predicted,
        };
        let Ok(event) = self.repo.lock().unwrap().record_observation(observation) else {
            return; // unstorable symbols: drop the report
        };
        self.count += 1;
        if self.recent.len() == self.window as usize {
            self.recent.pop_front();
        }
        self.recent.push_back(event);

        let ontology = ctx.agent_ontology().to_string();
        if predicted.code() > 0 {
            let alarm = Alarm {
                event,
                code: predicted.code(),
                location: self.location.clone(),
                tick: ctx.tick(),
            };
            ctx.send(
                DISTRIBUTOR_AGENT,
                Performative::Inform,
                &ontology,
                messages::alarm(&alarm),
            );
        }

        if !self.retrain_in_flight {
            let periodic = self.count.is_multiple_of(u64::from(self.retrain_every));
            let windowed = self.window_trigger
                && self.count.is_multiple_of(u64::from(self.window))
                && self.window_error_rate() > self.epsilon;
            if periodic || windowed {
                self.retrain_in_flight = true;
                ctx.send(
                    ATM,
                    Performative::Request,
                    TRAINING_ONTOLOGY,
                    retrain_content(&self.location),
                );
            }
        }
    }

    /// Wrong fraction of the labeled predictions in the recent window
    /// (0 when none are labeled yet).
    fn window_error_rate(&self) -> f64 {
        let repo = self.repo.lock().unwrap();
        let mut labeled = 0u32;
        let mut wrong = 0u32;
        for id in &self.recent {
            let Some(rec) = repo.observation(*id) else { continue };
            if let LabelState::Labeled(label, _) = rec.label_state {
                labeled += 1;
                if label != rec.predicted {
                    wrong += 1;
                }
            }
        }
        if labeled == 0 {
            0.0
        } else {
            f64::from(wrong) / f64::from(labeled)
        }
    }

    /// Renames the report's variables through the term cache; `None`
    /// when some term has no cached translation yet.
    fn translate(&self, sc: &SignificantChange) -> Option<SignificantChange> {
        let mut translated = sc.clone();
        for (variable, _, _) in translated.values.iter_mut() {
            *variable = self.term_cache.get(variable)?.clone();
        }
        Some(translated)
    }

    fn drain_pending(&mut self, ctx: &mut AgentCtx<'_>) {
        while let Some(sc) = self.pending.front() {
            let Some(translated) = self.translate(sc) else { return };
            self.pending.pop_front();
            self.process(ctx, &translated);
        }
    }
}

impl Behavior for PredictorBehavior {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        match env.performative {
            Performative::Inform => {
                let Ok(node) = sl::parse(&env.content) else { return false };
                if let Some(sc) = messages::parse_significant_change(&node) {
                    if env.ontology == ctx.agent_ontology() {
                        self.process(ctx, &sc);
                    } else if let Some(translated) = self.translate(&sc) {
                        self.process(ctx, &translated);
                    } else {
                        // queue the report and ask for the missing terms
                        let my_ontology = ctx.agent_ontology().to_string();
                        for (variable, _, _) in &sc.values {
                            if self.term_cache.contains_key(variable)
                                || !self.awaiting.insert(variable.clone())
                            {
                                continue;
                            }
                            let query = Frame::OntologyQuery {
                                message_ontology: env.ontology.clone(),
                                my_ontology: my_ontology.clone(),
                                term: variable.clone(),
                            };
                            ctx.send(
                                ONTOLOGY_AGENT,
                                Performative::Request,
                                &env.ontology,
                                sl::print(&frames::encode(&query)),
                            );
                        }
                        self.pending.push_back(sc);
                    }
                    return true;
                }
                if let Ok(Frame::TermMapping { from_term, to_term }) = frames::decode(&node) {
                    self.awaiting.remove(&from_term);
                    self.term_cache.insert(from_term, to_term);
                    self.drain_pending(ctx);
                    return true;
                }
                false
            }
            Performative::Failure => {
                let Ok(node) = sl::parse(&env.content) else { return false };
                match parse_failure(&node) {
                    Some((op, _)) if op == "retrain" => {
                        // data not ready yet; allow the next trigger
                        self.retrain_in_flight = false;
                        true
                    }
                    Some((op, _)) if op == "ontologyQuery" => {
                        // untranslatable vocabulary: those reports can
                        // never be processed
                        self.pending.clear();
                        self.awaiting.clear();
                        true
                    }
                    _ => false,
                }
            }
            Performative::Request => false,
        }
    }

    fn on_rules_installed(&mut self, _rules: &RuleBase) {
        self.retrain_in_flight = false;
    }
}

// -------------------------------------------------------------- distributor

/// A user's delivery profile, resolved from configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub id: String,
    pub subscribes: BTreeSet<u8>,
    pub location: String,
    pub mobile: bool,
    pub channels: Vec<config::Channel>,
    /// (from_tick, location) steps, increasing; empty for static users.
    pub itinerary: Vec<(u64, String)>,
}

impl UserProfile {
    pub fn from_config(user: &config::User) -> Self {
        UserProfile {
            id: user.id.clone(),
            subscribes: user.subscribes.iter().copied().collect(),
            location: user.location.clone(),
            mobile: user.mobile,
            channels: user.channels.clone(),
            itinerary: user.itinerary.iter().map(|e| (e.from_tick, e.location.clone())).collect(),
        }
    }

    /// Where the user is at `tick`: the latest itinerary step reached,
    /// or the home location.
    pub fn location_at(&self, tick: u64) -> &str {
        self.itinerary
            .iter()
            .rev()
            .find(|(from, _)| *from <= tick)
            .map(|(_, location)| location.as_str())
            .unwrap_or(&self.location)
    }
}

/// How an alert goes out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    SendNow,
    DelayUntil(u64),
}

/// One delivery decision, as recorded for inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub event: u64,
    pub user: String,
    pub code: u8,
    pub channel: String,
    pub disposition: Disposition,
    pub decided_tick: u64,
}

type DeliverySink = Arc<Mutex<Vec<DeliveryRecord>>>;

/// Routes alarms to subscribed, co-located users over their preferred
/// channels; urgent codes cut through as immediate sms. Mobile users'
/// current locations are fetched from their agents first.
pub struct DistributorBehavior {
    profiles: Arc<BTreeMap<String, UserProfile>>,
    urgent_threshold: u8,
    deliveries: DeliverySink,
    /// Alarms parked while a mobile user's location is in flight.
    pending: BTreeMap<(u64, String), Alarm>,
}

impl DistributorBehavior {
    pub fn new(
        profiles: Arc<BTreeMap<String, UserProfile>>,
        urgent_threshold: u8,
        deliveries: DeliverySink,
    ) -> Self {
        DistributorBehavior { profiles, urgent_threshold, deliveries, pending: BTreeMap::new() }
    }

    fn decide(
        &self,
        ctx: &mut AgentCtx<'_>,
        ontology: &str,
        profile: &UserProfile,
        user_location: &str,
        alarm: &Alarm,
    ) {
        if user_location != alarm.location {
            return; // not affected
        }
        let now = ctx.tick();
        let (channel, disposition) = if alarm.code >= self.urgent_threshold {
            // urgent alarms ignore preferences and windows entirely
            ("sms".to_string(), Disposition::SendNow)
        } else {
            let hour = now % HOURS_PER_DAY;
            match profile.channels.iter().find(|c| c.start <= hour && hour < c.end) {
                Some(c) => (c.channel.clone(), Disposition::SendNow),
                None => {
                    let first = &profile.channels[0];
                    let mut at = now - hour + first.start;
                    if at <= now {
                        at += HOURS_PER_DAY;
                    }
                    (first.channel.clone(), Disposition::DelayUntil(at))
                }
            }
        };
        self.deliveries.lock().unwrap().push(DeliveryRecord {
            event: alarm.event,
            user: profile.id.clone(),
            code: alarm.code,
            channel: channel.clone(),
            disposition,
            decided_tick: now,
        });
        let alert_at = |tick| {
            messages::alert(&Alert {
                event: alarm.event,
                code: alarm.code,
                location: alarm.location.clone(),
                channel: channel.clone(),
                tick,
            })
        };
        match disposition {
            Disposition::SendNow => {
                ctx.send(profile.id.as_str(), Performative::Inform, ontology, alert_at(now));
            }
            Disposition::DelayUntil(at) => {
                ctx.send_at(at, profile.id.as_str(), Performative::Inform, ontology, alert_at(at));
            }
        }
    }
}

impl Behavior for DistributorBehavior {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        if env.performative != Performative::Inform {
            return false;
        }
        let Ok(node) = sl::parse(&env.content) else { return false };
        if let Some(alarm) = messages::parse_alarm(&node) {
            let ontology = ctx.agent_ontology().to_string();
            let profiles = Arc::clone(&self.profiles);
            for (id, profile) in profiles.iter() {
                if !profile.subscribes.contains(&alarm.code) {
                    continue;
                }
                if profile.mobile {
                    ctx.send(
                        id.as_str(),
                        Performative::Request,
                        &ontology,
                        messages::where_is(alarm.event, id),
                    );
                    self.pending.insert((alarm.event, id.clone()), alarm.clone());
                } else {
                    self.decide(ctx, &ontology, profile, &profile.location, &alarm);
                }
            }
            return true;
        }
        if let Some((event, user, location)) = messages::parse_user_location(&node) {
            let Some(alarm) = self.pending.remove(&(event, user.clone())) else { return true };
            let ontology = ctx.agent_ontology().to_string();
            let profiles = Arc::clone(&self.profiles);
            if let Some(profile) = profiles.get(&user) {
                self.decide(ctx, &ontology, profile, &location, &alarm);
            }
            return true;
        }
        false
    }
}

// -------------------------------------------------------------------- users

/// Answers location queries and acknowledges received alerts to the
/// feedback agent.
pub struct UserBehavior {
    profile: UserProfile,
}

impl UserBehavior {
    pub fn new(profile: UserProfile) -> Self {
        UserBehavior { profile }
    }
}

impl Behavior for UserBehavior {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        let Ok(node) = sl::parse(&env.content) else { return false };
        match env.performative {
            Performative::Request => {
                let Some((event, user)) = messages::parse_where_is(&node) else { return false };
                if user != self.profile.id {
                    return false;
                }
                let location = self.profile.location_at(ctx.tick()).to_string();
                ctx.send(
                    env.sender.clone(),
                    Performative::Inform,
                    &env.ontology,
                    messages::user_location(event, &user, &location),
                );
                true
            }
            Performative::Inform => {
                let Some(alert) = messages::parse_alert(&node) else { return false };
                ctx.send(
                    FEEDBACK_AGENT,
                    Performative::Inform,
                    &env.ontology,
                    messages::received(alert.event, &self.profile.id, alert.code),
                );
                true
            }
            Performative::Failure => false,
        }
    }
}

// ----------------------------------------------------------------- feedback

/// Simulates the verdict sources: an institutional authority reviewing a
/// fraction of all events, and alert recipients judging their alarms
/// with imperfect accuracy. Verdicts are applied through the repository,
/// whose policy decides what labels events.
pub struct FeedbackBehavior {
    repo: SharedRepo,
    hidden: Arc<DecisionTree>,
    /// Renames predictor vocabulary to the truth's, when they differ.
    back_map: Option<Arc<BTreeMap<String, String>>>,
    rng: ChaCha8Rng,
    institutional_fraction: f64,
    individual_accuracy: f64,
    /// Highest event id already offered for institutional review.
    watermark: u64,
    /// Alert acknowledgements not yet turned into verdicts.
    recipients: BTreeMap<u64, BTreeSet<String>>,
}

impl FeedbackBehavior {
    pub fn new(
        repo: SharedRepo,
        hidden: Arc<DecisionTree>,
        back_map: Option<Arc<BTreeMap<String, String>>>,
        feedback: &config::Feedback,
        seed: u64,
    ) -> Self {
        FeedbackBehavior {
            repo,
            hidden,
            back_map,
            rng: ChaCha8Rng::seed_from_u64(seed),
            institutional_fraction: feedback.institutional_fraction,
            individual_accuracy: feedback.individual_accuracy,
            watermark: 0,
            recipients: BTreeMap::new(),
        }
    }

    fn truth(&self, categories: &BTreeMap<String, String>) -> Option<AlarmType> {
        truth_of(&self.hidden, categories, self.back_map.as_deref())
    }

    fn round(&mut self, tick: u64) {
        // institutional pass: each event is considered exactly once
        let fresh: Vec<(u64, BTreeMap<String, String>, AlarmType)> = {
            let repo = self.repo.lock().unwrap();
            repo.observations_since(self.watermark)
                .map(|rec| (rec.event_id, rec.categories.clone(), rec.predicted))
                .collect()
        };
        for (event, categories, predicted) in fresh {
            self.watermark = event;
            if self.rng.gen::<f64>() >= self.institutional_fraction {
                continue;
            }
            let Some(truth) = self.truth(&categories) else { continue };
            let verdict =
                if truth == predicted { Verdict::Correct } else { Verdict::Incorrect(truth) };
            let _ = self.repo.lock().unwrap().record_feedback(FeedbackRecord {
                event_id: event,
                source: FeedbackSource::Institutional,
                who: "authority".into(),
                verdict,
                tick,
            });
        }

        // individual pass: everyone who acknowledged an alert votes once
        let batch = std::mem::take(&mut self.recipients);
        for (event, users) in batch {
            let looked_up = {
                let repo = self.repo.lock().unwrap();
                repo.observation(event).map(|rec| (rec.categories.clone(), rec.predicted))
            };
            let Some((categories, predicted)) = looked_up else { continue };
            let Some(truth) = self.truth(&categories) else { continue };
            for user in users {
                let accurate = self.rng.gen::<f64>() < self.individual_accuracy;
                let verdict = match (truth == predicted, accurate) {
                    (true, true) | (false, false) => Verdict::Correct,
                    (false, true) => Verdict::Incorrect(truth),
                    (true, false) => Verdict::Incorrect(wrong_code(truth)),
                };
                let _ = self.repo.lock().unwrap().record_feedback(FeedbackRecord {
                    event_id: event,
                    source: FeedbackSource::Individual,
                    who: user,
                    verdict,
                    tick,
                });
            }
        }
    }
}

/// A deterministic wrong answer distinct from the truth.
fn wrong_code(truth: AlarmType) -> AlarmType {
    AlarmType::new((truth.code() + 1) % 4).expect("codes wrap within range")
}

impl Behavior for FeedbackBehavior {
    fn handle(&mut self, _ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        let Ok(node) = sl::parse(&env.content) else { return false };
        match env.performative {
            Performative::Inform => {
                let Some((event, user)) = messages::parse_received(&node) else { return false };
                self.recipients.entry(event).or_default().insert(user);
                true
            }
            Performative::Request => {
                let Some(tick) = messages::parse_feedback_round(&node) else { return false };
                self.round(tick);
                true
            }
            Performative::Failure => false,
        }
    }
}

// ----------------------------------------------------------------- ontology

/// Message front end of the [`OntologyService`]: answers term queries
/// with Mapping replies, errors as failure envelopes.
pub struct OntologyAgentBehavior {
    service: Arc<OntologyService>,
}

impl OntologyAgentBehavior {
    pub fn new(service: Arc<OntologyService>) -> Self {
        OntologyAgentBehavior { service }
    }
}

impl Behavior for OntologyAgentBehavior {
    fn handle(&mut self, ctx: &mut AgentCtx<'_>, env: &Envelope) -> bool {
        if env.performative != Performative::Request {
            return false;
        }
        let Ok(node) = sl::parse(&env.content) else { return false };
        if node.head() != Some("ontologyQuery") {
            return false;
        }
        match frames::decode(&node) {
            Ok(query @ Frame::OntologyQuery { .. }) => match self.service.map_term(&query) {
                Ok(mapping) => ctx.send(
                    env.sender.clone(),
                    Performative::Inform,
                    &env.ontology,
                    sl::print(&frames::encode(&mapping)),
                ),
                Err(e) => ctx.reply_failure(env, "ontologyQuery", &e.to_string()),
            },
            Ok(_) => unreachable!("head checked above"),
            Err(e) => ctx.reply_failure(env, "ontologyQuery", &e.to_string()),
        }
        true
    }
}
