//! Per-epoch quality measures: confusion against hidden truth, grid
//! agreement of the installed rulebase, and the plain-text report.

use std::collections::BTreeMap;

use crate::mining::{classify, AlarmType, DecisionTree, ALARM_KEY, DEFAULT_ATTRIBUTE, DEFAULT_VALUE};
use crate::rules::{Fact, RuleBase, WorkingMemory};

/// Runs `rules` over one category map exactly the way a predictor does:
/// categories plus the always-true default fact go in, the stored alarm
/// code comes out, no store entry meaning no alarm.
pub fn predict_alarm(rules: &RuleBase, categories: &BTreeMap<String, String>) -> AlarmType {
    let mut wm = WorkingMemory::new();
    for (attribute, category) in categories {
        wm.assert_fact(Fact::new(attribute.clone(), category.clone()));
    }
    wm.assert_fact(Fact::new(DEFAULT_ATTRIBUTE, DEFAULT_VALUE));
    wm.run(rules);
    wm.store_value(ALARM_KEY).and_then(AlarmType::from_symbol).unwrap_or(AlarmType::NONE)
}

/// Every complete assignment of categories to the schema's variables,
/// first variable slowest.
pub fn enumerate_grid(schema: &[(String, Vec<String>)]) -> Vec<BTreeMap<String, String>> {
    let mut grid: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for (variable, domain) in schema {
        let mut next = Vec::with_capacity(grid.len() * domain.len());
        for cell in &grid {
            for category in domain {
                let mut extended = cell.clone();
                extended.insert(variable.clone(), category.clone());
                next.push(extended);
            }
        }
        grid = next;
    }
    grid
}

/// Fraction of the exhaustive discretized input space on which the
/// rulebase agrees with the ground-truth tree, as (matching, total).
/// `back_map` renames the rulebase's variables to the tree's vocabulary
/// when the two differ.
pub fn grid_agreement(
    rules: &RuleBase,
    hidden: &DecisionTree,
    schema: &[(String, Vec<String>)],
    back_map: Option<&BTreeMap<String, String>>,
) -> (u32, u32) {
    let grid = enumerate_grid(schema);
    let total = grid.len() as u32;
    let mut matching = 0;
    for cell in grid {
        let predicted = predict_alarm(rules, &cell);
        let truth_input = match back_map {
            None => cell,
            Some(map) => rename_keys(&cell, map),
        };
        let truth = classify(hidden, &truth_input).expect("grid cells are complete inputs");
        if predicted == truth {
            matching += 1;
        }
    }
    (matching, total)
}

/// The hidden-truth label for one observation's categories; `None` when
/// the category map is partial (a variable faulty since start-up).
pub fn truth_of(
    hidden: &DecisionTree,
    categories: &BTreeMap<String, String>,
    back_map: Option<&BTreeMap<String, String>>,
) -> Option<AlarmType> {
    let input = match back_map {
        None => categories.clone(),
        Some(map) => rename_keys(categories, map),
    };
    classify(hidden, &input).ok()
}

fn rename_keys(
    categories: &BTreeMap<String, String>,
    map: &BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    categories
        .iter()
        .map(|(k, v)| (map.get(k).cloned().unwrap_or_else(|| k.clone()), v.clone()))
        .collect()
}

/// Quality snapshot taken at one rulebase installation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub tick: u64,
    pub agent: String,
    /// Events recorded since the previous epoch.
    pub observations: u64,
    /// How many of them carry a label.
    pub labeled: u64,
    /// `confusion[truth][predicted]` over the epoch's events.
    pub confusion: [[u64; 4]; 4],
    /// Grid agreement of the rulebase installed at this epoch.
    pub grid: (u32, u32),
}

impl EpochMetrics {
    /// Diagonal mass over total, `None` with no events.
    pub fn accuracy(&self) -> Option<f64> {
        let total: u64 = self.confusion.iter().flatten().sum();
        if total == 0 {
            return None;
        }
        let diagonal: u64 = (0..4).map(|i| self.confusion[i][i]).sum();
        Some(diagonal as f64 / total as f64)
    }

    /// Of everything predicted as `code`, the fraction that truly was.
    pub fn precision(&self, code: u8) -> Option<f64> {
        let c = code as usize;
        let column: u64 = (0..4).map(|t| self.confusion[t][c]).sum();
        (column > 0).then(|| self.confusion[c][c] as f64 / column as f64)
    }

    /// Of everything truly `code`, the fraction predicted as such.
    pub fn recall(&self, code: u8) -> Option<f64> {
        let c = code as usize;
        let row: u64 = self.confusion[c].iter().sum();
        (row > 0).then(|| self.confusion[c][c] as f64 / row as f64)
    }
}

fn ratio(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.3}"),
        None => "-".into(),
    }
}

/// Renders the deterministic plain-text report: run header, one row per
/// epoch, and class totals over all epochs.
pub fn render_report(
    seed: u64,
    ticks: u64,
    stations: u32,
    observations: u64,
    labeled: u64,
    epochs: &[EpochMetrics],
    final_grids: &[(String, (u32, u32))],
) -> String {
    let mut out = String::new();
    out.push_str("simulation report\n");
    out.push_str(&format!(
        "seed {seed}  ticks {ticks}  stations {stations}  observations {observations}  labeled {labeled}\n\n"
    ));
    out.push_str("epoch  tick  agent                 obs  labeled  grid   accuracy\n");
    for m in epochs {
        out.push_str(&format!(
            "{:>5}  {:>4}  {:<20} {:>4}  {:>7}  {:>2}/{:<2}  {}\n",
            m.epoch,
            m.tick,
            m.agent,
            m.observations,
            m.labeled,
            m.grid.0,
            m.grid.1,
            ratio(m.accuracy()),
        ));
    }
    if epochs.is_empty() {
        out.push_str("(no retraining epochs)\n");
    }
    out.push('\n');
    let mut totals = [[0u64; 4]; 4];
    for m in epochs {
        for (row, counts) in totals.iter_mut().zip(&m.confusion) {
            for (cell, count) in row.iter_mut().zip(counts) {
                *cell += count;
            }
        }
    }
    let summary = EpochMetrics {
        epoch: 0,
        tick: 0,
        agent: String::new(),
        observations: 0,
        labeled: 0,
        confusion: totals,
        grid: (0, 0),
    };
    out.push_str("class  precision  recall\n");
    for code in 0..4u8 {
        out.push_str(&format!(
            "{code}      {:>9}  {:>6}\n",
            ratio(summary.precision(code)),
            ratio(summary.recall(code)),
        ));
    }
    out.push('\n');
    for (agent, (matching, total)) in final_grids {
        out.push_str(&format!("final grid agreement {agent}: {matching}/{total}\n"));
    }
    out
}
