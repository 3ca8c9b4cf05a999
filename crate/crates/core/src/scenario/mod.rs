//! The environmental-alert scenario: a synthetic sensor field with
//! hidden alarm truth, the agent society that monitors it, and the
//! closed learning loop that retrains predictors from their own logged
//! behavior while they run.

pub mod behaviors;
pub mod config;
pub mod env;
pub mod messages;
pub mod metrics;
pub mod sim;

pub use behaviors::{
    predictor_location, predictor_name, DeliveryRecord, DiagnosisBehavior, Disposition,
    DistributorBehavior, FeedbackBehavior, OntologyAgentBehavior, PredictorBehavior, UserBehavior,
    UserProfile, DIAGNOSIS_AGENT, DISTRIBUTOR_AGENT, ENVIRONMENT_AGENT, FEEDBACK_AGENT,
    ONTOLOGY_AGENT,
};
pub use config::{ConfigError, SimConfig, CATEGORY_DOMAIN, HOURS_PER_DAY};
pub use env::{EnvironmentModel, SensorReading};
pub use metrics::{
    enumerate_grid, grid_agreement, predict_alarm, render_report, truth_of, EpochMetrics,
};
pub use sim::{
    build_society, parse_transcript_document, run_society, run_simulation, transcript_document,
    SimError, SimOutcome, Society,
};
