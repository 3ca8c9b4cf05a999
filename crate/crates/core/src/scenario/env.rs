//! Synthetic sensor field: per-(station, variable) latent regimes
//! driving hourly readings, with optional fault injection.
//!
//! Each (station, variable) pair carries its own Markov chain over the
//! low/normal/high regimes: stay with the configured probability, else
//! move to one of the other two uniformly. A reading is drawn uniformly
//! from the variable's value range for the current regime. Chains are
//! independent so the discretized input space is actually explored —
//! a single per-station regime would confine the scenario to the
//! all-variables-agree diagonal and starve the miner.
//!
//! Everything is seeded: the model deals one sub-seed per chain plus one
//! for the fault stream, in a fixed order, so a run is a pure function
//! of (config, seed).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::SimConfig;

/// One sensed value, before diagnosis sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub station: String,
    pub location: String,
    pub variable: String,
    pub value: f64,
    /// True when the fault stream replaced the value with an
    /// out-of-bounds spike. Diagnosis never sees this flag — it must
    /// catch the fault from the value alone; tests use it as the oracle.
    pub injected_fault: bool,
}

struct VariableModel {
    name: String,
    max: f64,
    /// Value ranges per regime, in domain order.
    regimes: [[f64; 2]; 3],
}

struct Chain {
    state: usize,
    rng: ChaCha8Rng,
}

impl Chain {
    fn step(&mut self, stay_prob: f64) {
        if self.rng.gen::<f64>() >= stay_prob {
            let other = self.rng.gen_range(0..2usize);
            // indexes of the two regimes that are not the current one
            self.state = (self.state + 1 + other) % 3;
        }
    }
}

/// Deterministic generator for the whole sensor field.
pub struct EnvironmentModel {
    stations: Vec<(String, String)>,
    variables: Vec<VariableModel>,
    stay_prob: f64,
    fault_prob: f64,
    chains: Vec<Chain>,
    fault_rng: ChaCha8Rng,
}

impl EnvironmentModel {
    pub fn new(config: &SimConfig, seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let locations = &config.environment.locations;
        let stations: Vec<(String, String)> = (1..=config.environment.stations)
            .map(|i| {
                (format!("station_{i}"), locations[(i as usize - 1) % locations.len()].clone())
            })
            .collect();
        let variables: Vec<VariableModel> = config
            .variables
            .iter()
            .map(|v| VariableModel {
                name: v.name.clone(),
                max: v.max,
                regimes: v.regimes.ordered(),
            })
            .collect();
        // sub-seeds are dealt station-major, variable-minor, then one
        // more for the fault stream; this order is part of the seed
        // contract and must not change
        let mut chains = Vec::with_capacity(stations.len() * variables.len());
        for _ in &stations {
            for _ in &variables {
                let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
                let state = rng.gen_range(0..3usize);
                chains.push(Chain { state, rng });
            }
        }
        let fault_rng = ChaCha8Rng::seed_from_u64(master.gen());
        EnvironmentModel {
            stations,
            variables,
            stay_prob: config.environment.regime_stay_prob,
            fault_prob: config.environment.fault_prob,
            chains,
            fault_rng,
        }
    }

    /// Station ids with their locations, in generation order.
    pub fn stations(&self) -> &[(String, String)] {
        &self.stations
    }

    /// Advances every chain one tick and returns one reading per
    /// (station, variable), station-major.
    pub fn generate(&mut self) -> Vec<SensorReading> {
        let mut out = Vec::with_capacity(self.stations.len() * self.variables.len());
        for (si, (station, location)) in self.stations.iter().enumerate() {
            for (vi, variable) in self.variables.iter().enumerate() {
                let chain = &mut self.chains[si * self.variables.len() + vi];
                chain.step(self.stay_prob);
                let [lo, hi] = variable.regimes[chain.state];
                let mut value = chain.rng.gen_range(lo..=hi);
                let injected_fault = self.fault_rng.gen::<f64>() < self.fault_prob;
                if injected_fault {
                    // far outside the physical bounds, unmistakably broken
                    value = variable.max + 1000.0 + self.fault_rng.gen_range(0.0..1000.0);
                }
                out.push(SensorReading {
                    station: station.clone(),
                    location: location.clone(),
                    variable: variable.name.clone(),
                    value,
                    injected_fault,
                });
            }
        }
        out
    }
}
