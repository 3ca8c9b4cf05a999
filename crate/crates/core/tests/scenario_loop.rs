//! End-to-end checks on the environmental-alert society: diagnosis
//! screening against an independent mirror, delivery policy compliance,
//! bilingual report translation, and the closed learning loop under
//! noisy feedback.

use std::collections::BTreeMap;

use o3rtaa_core::scenario::config::{MapDef, OntologyDef};
use o3rtaa_core::scenario::sim::run_simulation;
use o3rtaa_core::scenario::{
    predictor_name, Disposition, EnvironmentModel, SimConfig, HOURS_PER_DAY,
};
use o3rtaa_core::scenario::messages::{
    parse_alert, parse_sensor_batch, parse_significant_change, SignificantChange,
};
use o3rtaa_core::sl;

/// One transcript line split into its envelope fields.
struct Line<'a> {
    sender: &'a str,
    receiver: &'a str,
    content: &'a str,
}

fn split_line(line: &str) -> Line<'_> {
    let mut parts = line.splitn(6, ' ');
    let _tick = parts.next().unwrap();
    let sender = parts.next().unwrap();
    let receiver = parts.next().unwrap();
    let _performative = parts.next().unwrap();
    let _ontology = parts.next().unwrap();
    let content = parts.next().unwrap();
    Line { sender, receiver, content }
}

#[test]
fn diagnosis_forwards_exactly_the_significant_changes() {
    let mut config = SimConfig::standard();
    config.simulation.ticks = 120;
    config.environment.stations = 6;
    config.environment.fault_prob = 0.3;
    let outcome = run_simulation(config.clone()).unwrap();

    // mirror of the screening pass, rebuilt from the config alone
    let station_locations: BTreeMap<String, String> =
        EnvironmentModel::new(&config, 0).stations().iter().cloned().collect();
    let bounds: BTreeMap<&str, (f64, f64)> =
        config.variables.iter().map(|v| (v.name.as_str(), (v.min, v.max))).collect();
    let discretize = |variable: &str, value: f64| -> &'static str {
        let v = config.variables.iter().find(|v| v.name == variable).unwrap();
        if value < v.t_low {
            "low"
        } else if value <= v.t_high {
            "normal"
        } else {
            "high"
        }
    };

    let mut last: BTreeMap<String, BTreeMap<String, (f64, String)>> = BTreeMap::new();
    let mut expected: Vec<(String, SignificantChange)> = Vec::new();
    let mut actual: Vec<(String, SignificantChange)> = Vec::new();

    for raw_line in &outcome.transcript {
        let line = split_line(raw_line);
        if line.sender == "env" && line.receiver == "da" {
            let Some((tick, readings)) = parse_sensor_batch(&sl::parse(line.content).unwrap())
            else {
                continue;
            };
            let mut changed = std::collections::BTreeSet::new();
            for r in &readings {
                let (min, max) = bounds[r.variable.as_str()];
                if !(r.value >= min && r.value <= max) {
                    continue; // faulty reading: must be screened out
                }
                let category = discretize(&r.variable, r.value);
                let station = last.entry(r.station.clone()).or_default();
                match station.get(&r.variable) {
                    Some((_, previous)) if previous == category => {} // redundant
                    _ => {
                        station.insert(r.variable.clone(), (r.value, category.to_string()));
                        changed.insert(r.station.clone());
                    }
                }
            }
            for station in changed {
                let location = station_locations[&station].clone();
                let values = last[&station]
                    .iter()
                    .map(|(variable, (value, category))| {
                        (variable.clone(), *value, category.clone())
                    })
                    .collect();
                expected.push((
                    predictor_name(&location),
                    SignificantChange { station, location, tick, values },
                ));
            }
        } else if line.sender == "da" {
            if let Some(sc) = parse_significant_change(&sl::parse(line.content).unwrap()) {
                actual.push((line.receiver.to_string(), sc));
            }
        }
    }

    assert!(!actual.is_empty(), "the run must produce significant changes");
    assert_eq!(actual.len(), expected.len(), "forward count differs from the mirror");
    for (i, (actual, expected)) in actual.iter().zip(&expected).enumerate() {
        assert_eq!(actual, expected, "forward {i} differs from the mirror");
    }
}

#[test]
fn deliveries_respect_subscriptions_windows_and_urgency() {
    let mut config = SimConfig::standard();
    config.simulation.ticks = 200;
    let outcome = run_simulation(config.clone()).unwrap();
    assert!(!outcome.deliveries.is_empty(), "the run must deliver alerts");

    let urgent = config.policy.urgent_threshold;
    let mut send_now = 0;
    let mut delayed = 0;
    let mut urgent_count = 0;
    for record in &outcome.deliveries {
        let profile = config
            .users
            .iter()
            .find(|u| u.id == record.user)
            .unwrap_or_else(|| panic!("delivery for unknown user {:?}", record.user));
        assert!(
            profile.subscribes.contains(&record.code),
            "user {} never subscribed to code {}",
            record.user,
            record.code
        );
        if record.code >= urgent {
            urgent_count += 1;
            assert_eq!(record.channel, "sms", "urgent alerts go out by sms");
            assert_eq!(record.disposition, Disposition::SendNow, "urgent alerts never wait");
            continue;
        }
        let hour = record.decided_tick % HOURS_PER_DAY;
        let open = profile.channels.iter().find(|c| c.start <= hour && hour < c.end);
        match record.disposition {
            Disposition::SendNow => {
                send_now += 1;
                let channel = open.expect("immediate delivery requires an open window");
                assert_eq!(record.channel, channel.channel, "most preferred open channel wins");
            }
            Disposition::DelayUntil(at) => {
                delayed += 1;
                assert!(open.is_none(), "no delay while a window is open");
                let first = &profile.channels[0];
                assert_eq!(record.channel, first.channel, "delays use the preferred channel");
                assert!(at > record.decided_tick, "delay must point into the future");
                assert_eq!(at % HOURS_PER_DAY, first.start, "delays land on the window start");
                assert!(at - record.decided_tick <= HOURS_PER_DAY, "at most one day of delay");
            }
        }
    }
    assert!(send_now > 0, "expected some in-window deliveries");
    assert!(delayed > 0, "expected some after-hours deliveries");
    assert!(urgent_count > 0, "expected some urgent deliveries");

    // every alert on the wire traces back to its delivery decision
    let by_key: BTreeMap<(u64, &str), &o3rtaa_core::scenario::DeliveryRecord> =
        outcome.deliveries.iter().map(|d| ((d.event, d.user.as_str()), d)).collect();
    let mut alert_lines = 0;
    for raw_line in &outcome.transcript {
        let line = split_line(raw_line);
        if line.sender != "dist" {
            continue;
        }
        let Some(alert) = parse_alert(&sl::parse(line.content).unwrap_or(sl::SlNode::Atom(
            "x".into(),
        ))) else {
            continue;
        };
        alert_lines += 1;
        let record = by_key
            .get(&(alert.event, line.receiver))
            .unwrap_or_else(|| panic!("alert without a delivery record: {raw_line}"));
        assert_eq!(alert.channel, record.channel);
        assert_eq!(alert.code, record.code);
        match record.disposition {
            Disposition::SendNow => assert_eq!(alert.tick, record.decided_tick),
            Disposition::DelayUntil(at) => assert_eq!(alert.tick, at),
        }
    }
    assert!(alert_lines >= send_now + urgent_count, "every immediate decision must hit the wire");
}

#[test]
fn bilingual_societies_translate_terms_once_and_converge() {
    let mut config = SimConfig::standard();
    config.simulation.seed = 9;
    config.simulation.ticks = 300;
    config.environment.stations = 10;
    config.environment.fault_prob = 0.0;
    config.policy.retrain_every = 100;
    config.policy.window_trigger = false;
    config.feedback.institutional_fraction = 1.0;
    config.feedback.individual_accuracy = 1.0;
    config.ontology.default = "O3RTAAEnglish".into();
    config.ontology.ontologies = vec![
        OntologyDef {
            name: "O3RTAAEnglish".into(),
            terms: vec!["ozone".into(), "NO2NO3".into(), "pressure".into()],
        },
        OntologyDef {
            name: "O3RTAATurkish".into(),
            terms: vec!["ozon".into(), "azotoksit".into(), "basinc".into()],
        },
    ];
    config.ontology.maps = vec![MapDef {
        from: "O3RTAAEnglish".into(),
        to: "O3RTAATurkish".into(),
        pairs: [
            ("ozone".to_string(), "ozon".to_string()),
            ("NO2NO3".to_string(), "azotoksit".to_string()),
            ("pressure".to_string(), "basinc".to_string()),
        ]
        .into(),
    }];
    config.agents.predictor_ontology = Some("O3RTAATurkish".into());

    let outcome = run_simulation(config).unwrap();

    // one query per foreign term; afterwards the cache answers locally
    let queries = outcome.transcript.iter().filter(|l| l.contains("(ontologyQuery")).count();
    let mappings = outcome.transcript.iter().filter(|l| l.contains("(Mapping")).count();
    assert_eq!(queries, 3, "each variable is asked about exactly once");
    assert_eq!(mappings, 3, "each query gets exactly one mapping");

    // translation must not cost any learning quality
    assert!(outcome.metrics.len() >= 10, "expected repeated retraining epochs");
    for epoch in &outcome.metrics {
        assert_eq!(epoch.grid, (27, 27), "epoch {} lost grid agreement", epoch.epoch);
    }
    assert!(outcome.observations > 1000, "translation must not drop reports");
}

#[test]
fn institutional_fraction_drives_the_label_share() {
    for seed in [5u64, 6, 7] {
        let mut config = SimConfig::standard();
        config.simulation.seed = seed;
        config.simulation.ticks = 300;
        config.feedback.institutional_fraction = 0.3;
        // nobody to acknowledge alerts: every label is institutional
        config.users.clear();
        let outcome = run_simulation(config).unwrap();
        assert!(outcome.observations > 3000, "seed {seed}: expected a busy run");
        let share = outcome.labeled as f64 / outcome.observations as f64;
        assert!(
            (share - 0.3).abs() < 0.03,
            "seed {seed}: labeled share {share:.4} strays from the review fraction"
        );
    }
}

#[test]
fn the_loop_recovers_from_noisy_individual_feedback() {
    for seed in 1..=5u64 {
        let mut config = SimConfig::standard();
        config.simulation.seed = seed;
        config.simulation.ticks = 400;
        config.environment.fault_prob = 0.0;
        config.policy.retrain_every = 150;
        config.policy.k = 2; // two agreeing users are enough to label
        config.policy.window_trigger = false;
        config.feedback.institutional_fraction = 0.5;
        config.feedback.individual_accuracy = 0.8;
        let outcome = run_simulation(config).unwrap();
        assert!(outcome.metrics.len() >= 20, "seed {seed}: expected many epochs");
        for epoch in &outcome.metrics {
            assert!(
                epoch.grid.0 >= 25,
                "seed {seed}: epoch {} dropped to {}/27",
                epoch.epoch,
                epoch.grid.0
            );
        }
        let tail = &outcome.metrics[outcome.metrics.len() - 5..];
        for epoch in tail {
            assert_eq!(
                epoch.grid,
                (27, 27),
                "seed {seed}: epoch {} had not recovered",
                epoch.epoch
            );
        }
    }
}
