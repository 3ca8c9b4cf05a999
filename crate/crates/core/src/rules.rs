//! Forward-chaining production rule engine over (attribute, value) facts.
//!
//! Rules arrive as defrule text — `(defrule <name> <cond> => <action>+)`
//! where the condition side is `(and <pattern>+)` or one bare pattern —
//! and actions are `(store <key> <value>)` writes into a separate output
//! store. Matching is exact symbol-text comparison; values like `3` are
//! symbols, never numbers.
//!
//! There is no Rete network. Rule bases stay small (a compiled decision
//! tree is at most a few hundred flat rules), so [`WorkingMemory::run`]
//! naively checks every rule per run, which is trivially correct and keeps
//! the engine a pure function of (facts, rule order). Conflict resolution:
//! descending condition count first (so deeper, more specific rules beat
//! fallbacks), definition order on ties, each rule firing at most once,
//! and the first store to a key winning.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::sl::{self, ParseError, SlNode};

/// One (attribute, value) pair: both a working-memory entry and a rule
/// condition pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub attribute: String,
    pub value: String,
}

impl Fact {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Fact { attribute: attribute.into(), value: value.into() }
    }
}

/// The single action kind: write `value` under `key` in the output store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreAction {
    pub key: String,
    pub value: String,
}

impl StoreAction {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        StoreAction { key: key.into(), value: value.into() }
    }
}

/// A named production: fire the actions when every condition matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    /// Conjunction of patterns; attributes are distinct within one rule.
    pub conditions: Vec<Fact>,
    pub actions: Vec<StoreAction>,
}

/// Why defrule text failed to become a [`Rule`], or a rule set failed to
/// become a [`RuleBase`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule text is not a well-formed s-expression: {0}")]
    Syntax(#[from] ParseError),
    #[error("expression is not a defrule")]
    NotADefrule,
    #[error("defrule has no name")]
    MissingName,
    #[error("expected => after the condition")]
    MissingArrow,
    #[error("defrule has no conditions")]
    EmptyConditions,
    #[error("defrule has no actions")]
    EmptyActions,
    #[error("attribute {0:?} appears in more than one condition")]
    DuplicateConditionAttribute(String),
    #[error("condition pattern must be (attribute value), got {0}")]
    MalformedCondition(String),
    #[error("action must be (store key value), got {0}")]
    MalformedAction(String),
    #[error("rule name {0:?} defined more than once")]
    DuplicateRuleName(String),
}

/// Parses one `(defrule …)` expression.
pub fn parse_defrule(source: &str) -> Result<Rule, RuleError> {
    let node = sl::parse(source)?;
    let items = match node.as_list() {
        Some(items) if items.first().and_then(SlNode::as_atom) == Some("defrule") => items,
        _ => return Err(RuleError::NotADefrule),
    };
    let name = match items.get(1).and_then(SlNode::as_atom) {
        Some(name) => name.to_string(),
        None => return Err(RuleError::MissingName),
    };
    let cond_node = items.get(2).ok_or(RuleError::EmptyConditions)?;
    let conditions = parse_conditions(cond_node)?;

    match items.get(3).and_then(SlNode::as_atom) {
        Some("=>") => {}
        _ => return Err(RuleError::MissingArrow),
    }
    let action_nodes = &items[4..];
    if action_nodes.is_empty() {
        return Err(RuleError::EmptyActions);
    }
    let actions = action_nodes.iter().map(parse_action).collect::<Result<Vec<_>, _>>()?;

    let mut seen = std::collections::BTreeSet::new();
    for cond in &conditions {
        if !seen.insert(cond.attribute.clone()) {
            return Err(RuleError::DuplicateConditionAttribute(cond.attribute.clone()));
        }
    }
    Ok(Rule { name, conditions, actions })
}

fn parse_conditions(node: &SlNode) -> Result<Vec<Fact>, RuleError> {
    match node.as_list() {
        Some(items) if items.first().and_then(SlNode::as_atom) == Some("and") => {
            if items.len() == 1 {
                return Err(RuleError::EmptyConditions);
            }
            items[1..].iter().map(parse_pattern).collect()
        }
        Some(_) => Ok(vec![parse_pattern(node)?]),
        None => Err(RuleError::MalformedCondition(sl::print(node))),
    }
}

fn parse_pattern(node: &SlNode) -> Result<Fact, RuleError> {
    let bad = || RuleError::MalformedCondition(sl::print(node));
    let items = node.as_list().ok_or_else(bad)?;
    match items {
        [a, v] => Ok(Fact::new(a.as_atom().ok_or_else(bad)?, v.as_atom().ok_or_else(bad)?)),
        _ => Err(bad()),
    }
}

fn parse_action(node: &SlNode) -> Result<StoreAction, RuleError> {
    let bad = || RuleError::MalformedAction(sl::print(node));
    let items = node.as_list().ok_or_else(bad)?;
    match items {
        [head, k, v] if head.as_atom() == Some("store") => {
            Ok(StoreAction::new(k.as_atom().ok_or_else(bad)?, v.as_atom().ok_or_else(bad)?))
        }
        _ => Err(bad()),
    }
}

/// Canonical defrule text for `rule`. The condition side always carries
/// the `(and …)` wrapper, even for one pattern, matching the shape rules
/// take on the wire; `parse_defrule(&rule.to_string())` reproduces `rule`.
impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut cond = vec![SlNode::atom("and")];
        cond.extend(
            self.conditions
                .iter()
                .map(|c| SlNode::list(vec![SlNode::atom(&c.attribute), SlNode::atom(&c.value)])),
        );
        let mut items =
            vec![SlNode::atom("defrule"), SlNode::atom(&self.name), SlNode::List(cond), SlNode::atom("=>")];
        items.extend(self.actions.iter().map(|a| {
            SlNode::list(vec![SlNode::atom("store"), SlNode::atom(&a.key), SlNode::atom(&a.value)])
        }));
        f.write_str(&sl::print(&SlNode::List(items)))
    }
}

/// An ordered rule set with unique names. Order is meaningful: it is the
/// tiebreak in conflict resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleBase {
    rules: Vec<Rule>,
}

impl RuleBase {
    /// Builds a rule base, rejecting duplicate rule names.
    pub fn new(rules: Vec<Rule>) -> Result<Self, RuleError> {
        let mut seen = std::collections::BTreeSet::new();
        for rule in &rules {
            if !seen.insert(rule.name.clone()) {
                return Err(RuleError::DuplicateRuleName(rule.name.clone()));
            }
        }
        Ok(RuleBase { rules })
    }

    /// Parses each source text and builds the base; any failure rejects
    /// the whole set.
    pub fn parse(sources: &[String]) -> Result<Self, RuleError> {
        let rules = sources.iter().map(|s| parse_defrule(s)).collect::<Result<Vec<_>, _>>()?;
        RuleBase::new(rules)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Fact map plus the output store rules write into.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkingMemory {
    facts: BTreeMap<String, String>,
    store: BTreeMap<String, String>,
}

impl WorkingMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Asserts a fact; an existing value for the attribute is replaced.
    pub fn assert_fact(&mut self, fact: Fact) {
        self.facts.insert(fact.attribute, fact.value);
    }

    /// Removes the fact for `attribute`; absent attributes are a no-op.
    pub fn retract_fact(&mut self, attribute: &str) {
        self.facts.remove(attribute);
    }

    pub fn fact(&self, attribute: &str) -> Option<&str> {
        self.facts.get(attribute).map(String::as_str)
    }

    pub fn facts(&self) -> &BTreeMap<String, String> {
        &self.facts
    }

    pub fn store(&self) -> &BTreeMap<String, String> {
        &self.store
    }

    pub fn store_value(&self, key: &str) -> Option<&str> {
        self.store.get(key).map(String::as_str)
    }

    /// Clears all facts and the store.
    pub fn clear(&mut self) {
        self.facts.clear();
        self.store.clear();
    }

    /// Runs the rule base to quiescence against the current facts.
    ///
    /// The store is cleared first, so the result depends only on the facts
    /// and the rule order. A rule fires when every condition matches a
    /// current fact exactly; firing order is descending condition count,
    /// then definition order. Each rule fires at most once, and the first
    /// store to a key wins.
    pub fn run(&mut self, rules: &RuleBase) {
        self.store.clear();
        let mut agenda: Vec<&Rule> = rules
            .rules()
            .iter()
            .filter(|rule| {
                rule.conditions
                    .iter()
                    .all(|c| self.facts.get(&c.attribute) == Some(&c.value))
            })
            .collect();
        // stable sort keeps definition order within equal specificity
        agenda.sort_by_key(|rule| std::cmp::Reverse(rule.conditions.len()));
        for rule in agenda {
            for action in &rule.actions {
                self.store.entry(action.key.clone()).or_insert_with(|| action.value.clone());
            }
        }
    }
}
