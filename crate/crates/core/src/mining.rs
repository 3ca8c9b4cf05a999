//! Decision-tree induction over categorical training examples, plus the
//! compiler that turns an induced tree into production rules.
//!
//! The algorithm is plain ID3: split on the attribute with the highest
//! information gain, recurse, stop on pure labels or when nothing
//! discriminates. No pruning — training data here is desk-scale and
//! noise-controlled, and pruning would add an unverifiable free
//! parameter. Continuous sensor readings never reach the miner; a
//! [`Discretizer`] maps them to `{low, normal, high}` first.
//!
//! [`tree_to_rules`] emits one rule per root-to-leaf path so that running
//! the compiled rules over a complete fact assignment reproduces
//! [`classify`] exactly; that equivalence is the module's load-bearing
//! property.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rules::{Fact, Rule, StoreAction};
use crate::sl::SlNode;

/// Store key the compiled rules write their verdict under.
pub const ALARM_KEY: &str = "ALARM_TYPE";
/// Synthetic attribute used when a tree is a bare leaf: the rule tests
/// `(DEFAULT true)`, and every consumer asserts that fact unconditionally.
pub const DEFAULT_ATTRIBUTE: &str = "DEFAULT";
/// The value the synthetic attribute always carries.
pub const DEFAULT_VALUE: &str = "true";
/// Tolerance for comparing information gains: differences below this are
/// ties (broken lexicographically) and a best gain below it counts as
/// zero.
pub const GAIN_EPS: f64 = 1e-9;

/// Alarm severity code: 0 = none, 1 = informational, 2 = warning,
/// 3 = hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AlarmType(u8);

impl AlarmType {
    pub const NONE: AlarmType = AlarmType(0);
    pub const INFO: AlarmType = AlarmType(1);
    pub const WARNING: AlarmType = AlarmType(2);
    pub const HAZARD: AlarmType = AlarmType(3);

    /// All codes, ascending.
    pub const ALL: [AlarmType; 4] = [Self::NONE, Self::INFO, Self::WARNING, Self::HAZARD];

    pub fn new(code: u8) -> Option<AlarmType> {
        (code <= 3).then_some(AlarmType(code))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    /// Parses the symbol form: exactly `"0"` through `"3"`.
    pub fn from_symbol(s: &str) -> Option<AlarmType> {
        match s {
            "0" => Some(Self::NONE),
            "1" => Some(Self::INFO),
            "2" => Some(Self::WARNING),
            "3" => Some(Self::HAZARD),
            _ => None,
        }
    }
}

impl fmt::Display for AlarmType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One labeled observation: a complete attribute→category assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub attributes: BTreeMap<String, String>,
    pub label: AlarmType,
}

/// Anything that can go wrong while building datasets, inducing trees, or
/// classifying.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiningError {
    #[error("dataset has no examples")]
    EmptyDataset,
    #[error("attribute {0:?} is not in the schema")]
    UnknownAttribute(String),
    #[error("no thresholds registered for variable {0:?}")]
    UnknownVariable(String),
    #[error("thresholds for {0:?} must satisfy t_low < t_high")]
    InvalidThresholds(String),
    #[error("schema declares attribute {0:?} twice")]
    DuplicateAttribute(String),
    #[error("attribute {0:?} has an empty domain")]
    EmptyDomain(String),
    #[error("attribute {0:?} lists category {1:?} twice")]
    DuplicateCategory(String, String),
    #[error("example {0} lacks attribute {1:?}")]
    ExampleMissingAttribute(usize, String),
    #[error("example {0} assigns {1:?} the category {2:?}, outside its domain")]
    CategoryOutsideDomain(usize, String, String),
    #[error("input lacks attribute {0:?}")]
    MissingAttribute(String),
    #[error("attribute {0:?} has no branch for category {1:?}")]
    NoBranchForCategory(String, String),
    #[error("malformed tree expression: {0}")]
    TreeSyntax(String),
    #[error("attribute {0:?} repeats on a root-to-leaf path")]
    RepeatedAttributeOnPath(String),
    #[error("node on {0:?} does not cover its domain exactly")]
    BranchDomainMismatch(String),
}

/// Training examples plus the schema they conform to. The schema fixes
/// the attribute set and, crucially, each attribute's category order —
/// induced trees list branches in that order, which in turn fixes rule
/// numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Vec<(String, Vec<String>)>,
    examples: Vec<TrainingExample>,
}

impl Dataset {
    /// Builds a dataset, checking schema well-formedness and that every
    /// example conforms.
    pub fn new(
        schema: Vec<(String, Vec<String>)>,
        examples: Vec<TrainingExample>,
    ) -> Result<Self, MiningError> {
        let mut names = BTreeSet::new();
        for (attribute, domain) in &schema {
            if !names.insert(attribute.clone()) {
                return Err(MiningError::DuplicateAttribute(attribute.clone()));
            }
            if domain.is_empty() {
                return Err(MiningError::EmptyDomain(attribute.clone()));
            }
            let mut cats = BTreeSet::new();
            for category in domain {
                if !cats.insert(category.clone()) {
                    return Err(MiningError::DuplicateCategory(
                        attribute.clone(),
                        category.clone(),
                    ));
                }
            }
        }
        let mut ds = Dataset { schema, examples: Vec::new() };
        for example in examples {
            ds.push(example)?;
        }
        Ok(ds)
    }

    /// Appends one example after checking it against the schema.
    pub fn push(&mut self, example: TrainingExample) -> Result<(), MiningError> {
        let index = self.examples.len();
        for (attribute, domain) in &self.schema {
            match example.attributes.get(attribute) {
                None => {
                    return Err(MiningError::ExampleMissingAttribute(index, attribute.clone()))
                }
                Some(category) if !domain.contains(category) => {
                    return Err(MiningError::CategoryOutsideDomain(
                        index,
                        attribute.clone(),
                        category.clone(),
                    ))
                }
                Some(_) => {}
            }
        }
        self.examples.push(example);
        Ok(())
    }

    pub fn schema(&self) -> &[(String, Vec<String>)] {
        &self.schema
    }

    pub fn examples(&self) -> &[TrainingExample] {
        &self.examples
    }

    pub fn domain(&self, attribute: &str) -> Option<&[String]> {
        self.schema
            .iter()
            .find(|(name, _)| name == attribute)
            .map(|(_, domain)| domain.as_slice())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// A categorical decision tree over alarm codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecisionTree {
    Leaf(AlarmType),
    Node {
        attribute: String,
        /// One branch per category, in the attribute's domain order.
        branches: Vec<(String, DecisionTree)>,
    },
}

impl DecisionTree {
    /// Number of leaves, which is also the compiled rule count.
    pub fn leaf_count(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 1,
            DecisionTree::Node { branches, .. } => {
                branches.iter().map(|(_, t)| t.leaf_count()).sum()
            }
        }
    }

    /// Human-readable indented rendering, two spaces per level.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        match self {
            DecisionTree::Leaf(label) => {
                out.push_str(&format!("{pad}alarm {label}\n"));
            }
            DecisionTree::Node { attribute, branches } => {
                out.push_str(&format!("{pad}{attribute}\n"));
                for (category, subtree) in branches {
                    match subtree {
                        DecisionTree::Leaf(label) => {
                            out.push_str(&format!("{pad}  {category} -> alarm {label}\n"));
                        }
                        node => {
                            out.push_str(&format!("{pad}  {category} ->\n"));
                            node.render_into(out, indent + 2);
                        }
                    }
                }
            }
        }
    }

    /// Expression form: `(leaf CODE)` or `(node ATTR (CAT SUBTREE)+)`.
    pub fn to_sl(&self) -> SlNode {
        match self {
            DecisionTree::Leaf(label) => {
                SlNode::list(vec![SlNode::atom("leaf"), SlNode::atom(label.to_string())])
            }
            DecisionTree::Node { attribute, branches } => {
                let mut items = vec![SlNode::atom("node"), SlNode::atom(attribute)];
                for (category, subtree) in branches {
                    items.push(SlNode::list(vec![SlNode::atom(category), subtree.to_sl()]));
                }
                SlNode::List(items)
            }
        }
    }

    /// Parses the expression form produced by [`DecisionTree::to_sl`].
    pub fn from_sl(node: &SlNode) -> Result<DecisionTree, MiningError> {
        let syntax = || MiningError::TreeSyntax(crate::sl::print(node));
        let items = node.as_list().ok_or_else(syntax)?;
        match items.first().and_then(SlNode::as_atom) {
            Some("leaf") => {
                if items.len() != 2 {
                    return Err(syntax());
                }
                let code = items[1].as_atom().and_then(AlarmType::from_symbol).ok_or_else(syntax)?;
                Ok(DecisionTree::Leaf(code))
            }
            Some("node") => {
                if items.len() < 3 {
                    return Err(syntax());
                }
                let attribute = items[1].as_atom().ok_or_else(syntax)?.to_string();
                let mut branches = Vec::new();
                for branch in &items[2..] {
                    let pair = branch.as_list().ok_or_else(syntax)?;
                    if pair.len() != 2 {
                        return Err(syntax());
                    }
                    let category = pair[0].as_atom().ok_or_else(syntax)?.to_string();
                    branches.push((category, DecisionTree::from_sl(&pair[1])?));
                }
                Ok(DecisionTree::Node { attribute, branches })
            }
            _ => Err(syntax()),
        }
    }

    /// Checks the structural invariants against a schema: attributes
    /// exist, no attribute repeats on a path, and every node's branches
    /// are exactly its attribute's domain in order.
    pub fn validate(&self, schema: &[(String, Vec<String>)]) -> Result<(), MiningError> {
        self.validate_inner(schema, &mut BTreeSet::new())
    }

    fn validate_inner(
        &self,
        schema: &[(String, Vec<String>)],
        path: &mut BTreeSet<String>,
    ) -> Result<(), MiningError> {
        let DecisionTree::Node { attribute, branches } = self else {
            return Ok(());
        };
        let domain = schema
            .iter()
            .find(|(name, _)| name == attribute)
            .map(|(_, d)| d)
            .ok_or_else(|| MiningError::UnknownAttribute(attribute.clone()))?;
        if path.contains(attribute) {
            return Err(MiningError::RepeatedAttributeOnPath(attribute.clone()));
        }
        let listed: Vec<&String> = branches.iter().map(|(c, _)| c).collect();
        if listed.len() != domain.len() || listed.iter().zip(domain).any(|(a, b)| *a != b) {
            return Err(MiningError::BranchDomainMismatch(attribute.clone()));
        }
        path.insert(attribute.clone());
        for (_, subtree) in branches {
            subtree.validate_inner(schema, path)?;
        }
        path.remove(attribute);
        Ok(())
    }
}

/// Maps real readings onto `{low, normal, high}` via two per-variable
/// thresholds: `reading < t_low` is low, `reading ≤ t_high` is normal,
/// anything above is high.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Discretizer {
    thresholds: BTreeMap<String, (f64, f64)>,
}

impl Discretizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_thresholds(
        &mut self,
        variable: impl Into<String>,
        t_low: f64,
        t_high: f64,
    ) -> Result<(), MiningError> {
        let variable = variable.into();
        // partial_cmp so that NaN thresholds are rejected too
        if t_low.partial_cmp(&t_high) != Some(Ordering::Less) {
            return Err(MiningError::InvalidThresholds(variable));
        }
        self.thresholds.insert(variable, (t_low, t_high));
        Ok(())
    }

    pub fn discretize(&self, variable: &str, reading: f64) -> Result<&'static str, MiningError> {
        let (t_low, t_high) = self
            .thresholds
            .get(variable)
            .ok_or_else(|| MiningError::UnknownVariable(variable.to_string()))?;
        Ok(if reading < *t_low {
            "low"
        } else if reading <= *t_high {
            "normal"
        } else {
            "high"
        })
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.thresholds.keys().map(String::as_str)
    }
}

/// Shannon entropy of the label multiset, in bits.
pub fn entropy(labels: &[AlarmType]) -> Result<f64, MiningError> {
    if labels.is_empty() {
        return Err(MiningError::EmptyDataset);
    }
    let mut counts = [0usize; 4];
    for label in labels {
        counts[label.code() as usize] += 1;
    }
    let total = labels.len() as f64;
    let mut h = 0.0;
    for count in counts {
        if count > 0 {
            let p = count as f64 / total;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// Information gain of splitting the whole dataset on `attribute`.
pub fn information_gain(ds: &Dataset, attribute: &str) -> Result<f64, MiningError> {
    if ds.is_empty() {
        return Err(MiningError::EmptyDataset);
    }
    let domain =
        ds.domain(attribute).ok_or_else(|| MiningError::UnknownAttribute(attribute.to_string()))?;
    let all: Vec<usize> = (0..ds.len()).collect();
    Ok(gain_over(ds, &all, attribute, domain))
}

/// Gain of splitting the subset `rows` on `attribute`. Empty partitions
/// contribute nothing to the weighted term.
fn gain_over(ds: &Dataset, rows: &[usize], attribute: &str, domain: &[String]) -> f64 {
    let labels: Vec<AlarmType> = rows.iter().map(|&i| ds.examples()[i].label).collect();
    let base = entropy(&labels).expect("rows nonempty");
    let total = rows.len() as f64;
    let mut weighted = 0.0;
    for category in domain {
        let part: Vec<AlarmType> = rows
            .iter()
            .filter(|&&i| ds.examples()[i].attributes[attribute] == *category)
            .map(|&i| ds.examples()[i].label)
            .collect();
        if !part.is_empty() {
            weighted += (part.len() as f64 / total) * entropy(&part).expect("part nonempty");
        }
    }
    base - weighted
}

/// Majority label of `labels`, ties broken toward the higher code — in an
/// alert domain the safe mistake is the louder one.
fn majority(labels: &[AlarmType]) -> AlarmType {
    let mut counts = [0usize; 4];
    for label in labels {
        counts[label.code() as usize] += 1;
    }
    let mut best = AlarmType::NONE;
    let mut best_count = 0usize;
    for code in AlarmType::ALL {
        let count = counts[code.code() as usize];
        if count >= best_count && count > 0 {
            best = code;
            best_count = count;
        }
    }
    best
}

/// Induces a decision tree from the dataset by ID3.
///
/// Splits choose the attribute with the highest information gain on the
/// node's example subset, breaking ties toward the lexicographically
/// smallest name; attributes already used on the path are excluded.
/// Recursion stops at pure labels, at exhausted attributes, or when no
/// remaining attribute gains anything — the leaf then takes the majority
/// label. A branch whose partition is empty becomes a leaf of the parent
/// subset's majority label.
pub fn induce_tree(ds: &Dataset) -> Result<DecisionTree, MiningError> {
    if ds.is_empty() {
        return Err(MiningError::EmptyDataset);
    }
    let rows: Vec<usize> = (0..ds.len()).collect();
    let mut available: Vec<&str> =
        ds.schema().iter().map(|(name, _)| name.as_str()).collect();
    available.sort_unstable();
    Ok(induce(ds, &rows, &available))
}

fn induce(ds: &Dataset, rows: &[usize], available: &[&str]) -> DecisionTree {
    let labels: Vec<AlarmType> = rows.iter().map(|&i| ds.examples()[i].label).collect();
    if labels.iter().all(|l| *l == labels[0]) {
        return DecisionTree::Leaf(labels[0]);
    }
    // best-gain attribute; `available` is sorted, so strict improvement
    // beyond the tolerance keeps the lexicographically smallest on ties
    let mut best: Option<(&str, f64)> = None;
    for &attribute in available {
        let domain = ds.domain(attribute).expect("available attributes are in the schema");
        let gain = gain_over(ds, rows, attribute, domain);
        match best {
            None => best = Some((attribute, gain)),
            Some((_, best_gain)) if gain > best_gain + GAIN_EPS => best = Some((attribute, gain)),
            Some(_) => {}
        }
    }
    let majority_here = majority(&labels);
    let (attribute, best_gain) = match best {
        Some(found) => found,
        None => return DecisionTree::Leaf(majority_here),
    };
    if best_gain < GAIN_EPS {
        return DecisionTree::Leaf(majority_here);
    }

    let domain = ds.domain(attribute).expect("attribute is in the schema");
    let remaining: Vec<&str> = available.iter().copied().filter(|a| *a != attribute).collect();
    let mut branches = Vec::with_capacity(domain.len());
    for category in domain {
        let part: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&i| ds.examples()[i].attributes[attribute] == *category)
            .collect();
        let subtree = if part.is_empty() {
            DecisionTree::Leaf(majority_here)
        } else {
            induce(ds, &part, &remaining)
        };
        branches.push((category.clone(), subtree));
    }
    DecisionTree::Node { attribute: attribute.to_string(), branches }
}

/// Compiles a tree into one rule per root-to-leaf path.
///
/// Rules are named `rule_1`, `rule_2`, … in depth-first branch order;
/// conditions are the path's (attribute, category) tests and the action
/// stores the leaf's code under [`ALARM_KEY`]. A bare-leaf tree compiles
/// to a single rule testing the synthetic `(DEFAULT true)` fact.
pub fn tree_to_rules(tree: &DecisionTree) -> Vec<Rule> {
    let mut rules = Vec::new();
    let mut path = Vec::new();
    collect_rules(tree, &mut path, &mut rules);
    rules
}

fn collect_rules(tree: &DecisionTree, path: &mut Vec<Fact>, rules: &mut Vec<Rule>) {
    match tree {
        DecisionTree::Leaf(label) => {
            let conditions = if path.is_empty() {
                vec![Fact::new(DEFAULT_ATTRIBUTE, DEFAULT_VALUE)]
            } else {
                path.clone()
            };
            rules.push(Rule {
                name: format!("rule_{}", rules.len() + 1),
                conditions,
                actions: vec![StoreAction::new(ALARM_KEY, label.to_string())],
            });
        }
        DecisionTree::Node { attribute, branches } => {
            for (category, subtree) in branches {
                path.push(Fact::new(attribute.clone(), category.clone()));
                collect_rules(subtree, path, rules);
                path.pop();
            }
        }
    }
}

/// Label of the leaf reached by following `x` down the tree.
pub fn classify(
    tree: &DecisionTree,
    x: &BTreeMap<String, String>,
) -> Result<AlarmType, MiningError> {
    match tree {
        DecisionTree::Leaf(label) => Ok(*label),
        DecisionTree::Node { attribute, branches } => {
            let category =
                x.get(attribute).ok_or_else(|| MiningError::MissingAttribute(attribute.clone()))?;
            let subtree = branches
                .iter()
                .find(|(c, _)| c == category)
                .map(|(_, t)| t)
                .ok_or_else(|| {
                    MiningError::NoBranchForCategory(attribute.clone(), category.clone())
                })?;
            classify(subtree, x)
        }
    }
}
