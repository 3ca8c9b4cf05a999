//! Society assembly and the closed-loop driver: sensors feed diagnosis,
//! predictions raise alarms, recipients and the authority feed verdicts
//! back, and the training manager periodically reinstalls freshly mined
//! rulebases — all inside one deterministic platform.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mining::{DecisionTree, MiningError};
use crate::ontology::{Ontology, OntologyError, OntologyService};
use crate::platform::{
    AgentSpec, Behavior, Envelope, Performative, Platform, PlatformError, Scheduler,
};
use crate::repo::{LabelState, RepoError, Repository};

use super::behaviors::{
    predictor_location, predictor_name, DeliveryRecord, DiagnosisBehavior, DistributorBehavior,
    FeedbackBehavior, OntologyAgentBehavior, PredictorBehavior, UserBehavior, UserProfile,
    DIAGNOSIS_AGENT, DISTRIBUTOR_AGENT, ENVIRONMENT_AGENT, FEEDBACK_AGENT, ONTOLOGY_AGENT,
};
use super::config::{ConfigError, SimConfig};
use super::env::EnvironmentModel;
use super::messages;
use super::metrics::{grid_agreement, render_report, truth_of, EpochMetrics};

/// Messages allowed per quiescence phase before the driver assumes a
/// routing loop.
const STEP_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// The assembled society, ready to run.
pub struct Society {
    pub config: SimConfig,
    pub platform: Platform,
    pub env: EnvironmentModel,
    pub repo: Arc<Mutex<Repository>>,
    pub deliveries: Arc<Mutex<Vec<DeliveryRecord>>>,
    pub hidden: Arc<DecisionTree>,
    /// Mining schema in the predictors' vocabulary.
    pub schema: Vec<(String, Vec<String>)>,
    /// predictor term → truth term, when the vocabularies differ.
    pub back_map: Option<Arc<BTreeMap<String, String>>>,
    /// Distinct locations, one predictor each.
    pub locations: Vec<String>,
}

/// Everything a finished run leaves behind.
pub struct SimOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub report: String,
    pub transcript: Vec<String>,
    pub deliveries: Vec<DeliveryRecord>,
    pub observations: u64,
    pub labeled: u64,
}

/// Wires the whole society onto a fresh platform. Sub-seeds are dealt
/// from the master seed in a fixed order (environment, then feedback) —
/// part of the reproducibility contract.
pub fn build_society(config: SimConfig) -> Result<Society, SimError> {
    config.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(config.simulation.seed);
    let env_seed: u64 = master.gen();
    let feedback_seed: u64 = master.gen();

    let env = EnvironmentModel::new(&config, env_seed);
    let repo = match &config.repository.path {
        Some(path) => Repository::create(path, config.policy.k)?,
        None => Repository::in_memory(config.policy.k)?,
    };
    let repo = Arc::new(Mutex::new(repo));
    let hidden = Arc::new(config.hidden_tree()?);

    let mut service = OntologyService::new();
    for def in &config.ontology.ontologies {
        service.register(Ontology::new(&def.name, def.terms.iter().cloned()))?;
    }
    for map in &config.ontology.maps {
        service.register_map(&map.from, &map.to, map.pairs.clone())?;
    }
    let service = Arc::new(service);

    let diagnosis_ontology = config.diagnosis_ontology().to_string();
    let predictor_ontology = config.predictor_ontology().to_string();

    // The ground truth speaks the diagnosis vocabulary. When predictors
    // use another one, mining runs on translated variable names and the
    // back map returns them for classification against the truth.
    let (schema, back_map) = if predictor_ontology == diagnosis_ontology {
        (config.schema(), None)
    } else {
        let mut translated_schema = Vec::new();
        let mut back = BTreeMap::new();
        for (variable, domain) in config.schema() {
            let translated =
                service.translate_term(&diagnosis_ontology, &predictor_ontology, &variable)?;
            back.insert(translated.clone(), variable);
            translated_schema.push((translated, domain));
        }
        (translated_schema, Some(Arc::new(back)))
    };

    let mut platform = Platform::new(Scheduler::Deterministic);
    platform.register_service(ENVIRONMENT_AGENT, &diagnosis_ontology, vec![])?;

    let stations: Arc<BTreeMap<String, String>> =
        Arc::new(env.stations().iter().cloned().collect());
    let deliveries: Arc<Mutex<Vec<DeliveryRecord>>> = Arc::default();
    let profiles: Arc<BTreeMap<String, UserProfile>> = Arc::new(
        config.users.iter().map(|u| (u.id.clone(), UserProfile::from_config(u))).collect(),
    );

    platform.register_service(
        DIAGNOSIS_AGENT,
        &diagnosis_ontology,
        vec![Box::new(DiagnosisBehavior::new(repo.clone(), stations, &config.variables))],
    )?;
    platform.register_service(
        ONTOLOGY_AGENT,
        &diagnosis_ontology,
        vec![Box::new(OntologyAgentBehavior::new(service))],
    )?;
    platform.register_service(
        DISTRIBUTOR_AGENT,
        &diagnosis_ontology,
        vec![Box::new(DistributorBehavior::new(
            profiles.clone(),
            config.policy.urgent_threshold,
            deliveries.clone(),
        ))],
    )?;
    platform.register_service(
        FEEDBACK_AGENT,
        &diagnosis_ontology,
        vec![Box::new(FeedbackBehavior::new(
            repo.clone(),
            hidden.clone(),
            back_map.clone(),
            &config.feedback,
            feedback_seed,
        ))],
    )?;
    for profile in profiles.values() {
        platform.register_service(
            &profile.id,
            &diagnosis_ontology,
            vec![Box::new(UserBehavior::new(profile.clone()))],
        )?;
    }

    // Predictors go through the training protocol: announced on
    // creation, equipped with their behavior class by the manager, and
    // retrained on request from then on.
    let policy = config.policy.clone();
    let ctor_repo = repo.clone();
    platform.register_behavior("predictor", move |spec: &AgentSpec| {
        let location = predictor_location(&spec.name)
            .ok_or_else(|| format!("agent {:?} has no location suffix", spec.name))?;
        Ok(Box::new(PredictorBehavior::new(location, ctor_repo.clone(), &policy))
            as Box<dyn Behavior>)
    })?;
    platform.configure_training("locationAgent", vec!["predictor".to_string()])?;

    let source_repo = repo.clone();
    let source_schema = schema.clone();
    platform.set_training_source(move |location: &str| {
        source_repo
            .lock()
            .unwrap()
            .query_examples(location, &source_schema)
            .map_err(|e| e.to_string())
    });

    let mut locations = config.environment.locations.clone();
    locations.sort();
    locations.dedup();
    for location in &locations {
        platform.create_agent(&AgentSpec {
            name: predictor_name(location),
            agent_type: "locationAgent".to_string(),
            behaviors: vec!["predictor".to_string()],
            ontology: predictor_ontology.clone(),
        })?;
    }
    platform.run_until_quiet(STEP_LIMIT)?; // drain the equip exchange

    Ok(Society {
        config,
        platform,
        env,
        repo,
        deliveries,
        hidden,
        schema,
        back_map,
        locations,
    })
}

/// Builds and runs the society described by `config`.
pub fn run_simulation(config: SimConfig) -> Result<SimOutcome, SimError> {
    run_society(build_society(config)?)
}

/// Drives an assembled society for its configured tick count. Each tick:
/// release due timers, deliver the sensor batch, quiesce, then cue a
/// feedback round and quiesce again. Every rulebase installation closes
/// a metrics epoch; epochs partition the global event stream in install
/// order.
pub fn run_society(society: Society) -> Result<SimOutcome, SimError> {
    let Society {
        config,
        mut platform,
        mut env,
        repo,
        deliveries,
        hidden,
        schema,
        back_map,
        locations,
    } = society;
    let diagnosis_ontology = config.diagnosis_ontology().to_string();
    let mut metrics: Vec<EpochMetrics> = Vec::new();
    let mut epoch = 0usize;
    let mut watermark = 0u64;

    for _ in 0..config.simulation.ticks {
        platform.advance_tick();
        platform.run_until_quiet(STEP_LIMIT)?;
        let tick = platform.tick();

        let readings = env.generate();
        platform.deliver(Envelope::new(
            Performative::Inform,
            ENVIRONMENT_AGENT,
            DIAGNOSIS_AGENT,
            &diagnosis_ontology,
            messages::sensor_batch(tick, &readings),
        ))?;
        platform.run_until_quiet(STEP_LIMIT)?;

        platform.deliver(Envelope::new(
            Performative::Request,
            ENVIRONMENT_AGENT,
            FEEDBACK_AGENT,
            &diagnosis_ontology,
            messages::feedback_round(tick),
        ))?;
        platform.run_until_quiet(STEP_LIMIT)?;

        for install in platform.take_install_events() {
            let agent = install.agent.as_str().to_string();
            if predictor_location(&agent).is_none() {
                continue;
            }
            epoch += 1;
            let (observations, labeled, confusion, last_event) = {
                let repo = repo.lock().unwrap();
                let mut confusion = [[0u64; 4]; 4];
                let mut observations = 0u64;
                let mut labeled = 0u64;
                for rec in repo.observations_since(watermark) {
                    observations += 1;
                    if matches!(rec.label_state, LabelState::Labeled(..)) {
                        labeled += 1;
                    }
                    if let Some(truth) = truth_of(&hidden, &rec.categories, back_map.as_deref()) {
                        confusion[truth.code() as usize][rec.predicted.code() as usize] += 1;
                    }
                }
                (observations, labeled, confusion, repo.last_event_id())
            };
            watermark = last_event;
            let rules = platform.rulebase_of(&agent).expect("installed agents are registered");
            let grid = grid_agreement(rules, &hidden, &schema, back_map.as_deref());
            metrics.push(EpochMetrics {
                epoch,
                tick: install.tick,
                agent,
                observations,
                labeled,
                confusion,
                grid,
            });
        }
    }

    let (observations, labeled) = {
        let repo = repo.lock().unwrap();
        (repo.observation_count() as u64, repo.labeled_count() as u64)
    };
    let mut final_grids = Vec::new();
    for location in &locations {
        let name = predictor_name(location);
        if let Some(rules) = platform.rulebase_of(&name) {
            final_grids.push((name, grid_agreement(rules, &hidden, &schema, back_map.as_deref())));
        }
    }
    let report = render_report(
        config.simulation.seed,
        config.simulation.ticks,
        config.environment.stations,
        observations,
        labeled,
        &metrics,
        &final_grids,
    );
    let deliveries = deliveries.lock().unwrap().clone();
    Ok(SimOutcome {
        metrics,
        report,
        transcript: platform.transcript().to_vec(),
        deliveries,
        observations,
        labeled,
    })
}

/// Serializes a run into a self-contained document: the configuration as
/// `;;` comment lines, then the message transcript. Replaying the
/// embedded configuration must reproduce the message lines exactly.
pub fn transcript_document(config: &SimConfig, transcript: &[String]) -> String {
    let mut out = String::new();
    out.push_str(";; transcript v1\n");
    out.push_str(";; config-begin\n");
    for line in config.to_toml_string().lines() {
        if line.is_empty() {
            out.push_str(";;\n");
        } else {
            out.push_str(";; ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(";; config-end\n");
    for line in transcript {
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Splits a transcript document into its embedded configuration and
/// message lines.
pub fn parse_transcript_document(text: &str) -> Result<(SimConfig, Vec<String>), ConfigError> {
    let corrupt = |message: &str| ConfigError {
        path: "(transcript)".to_string(),
        message: message.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some(";; transcript v1") {
        return Err(corrupt("missing version header"));
    }
    if lines.next() != Some(";; config-begin") {
        return Err(corrupt("missing embedded configuration"));
    }
    let mut toml_text = String::new();
    let mut closed = false;
    for line in lines.by_ref() {
        if line == ";; config-end" {
            closed = true;
            break;
        }
        let payload = line
            .strip_prefix(";; ")
            .or_else(|| line.strip_prefix(";;"))
            .ok_or_else(|| corrupt("unterminated embedded configuration"))?;
        toml_text.push_str(payload);
        toml_text.push('\n');
    }
    if !closed {
        return Err(corrupt("unterminated embedded configuration"));
    }
    let config = SimConfig::from_toml_str(&toml_text)?;
    Ok((config, lines.map(str::to_string).collect()))
}
