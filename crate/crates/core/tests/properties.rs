//! Property tests for the structural invariants of the content language,
//! the frame layer, the miner, and the repository — the guarantees the
//! rest of the platform leans on without rechecking.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use o3rtaa_core::frames::{self, AgentDescriptor, Frame};
use o3rtaa_core::mining::{
    entropy, induce_tree, information_gain, tree_to_rules, AlarmType, Dataset, DecisionTree,
    TrainingExample,
};
use o3rtaa_core::ontology::{Ontology, OntologyService};
use o3rtaa_core::repo::{Observation, Repository};
use o3rtaa_core::rules::{Fact, RuleBase};
use o3rtaa_core::sl::{self, SlNode};

// ------------------------------------------------------------ generators

fn atom_text() -> impl Strategy<Value = String> {
    prop_oneof![
        6 => prop::string::string_regex("[A-Za-z][A-Za-z0-9_.-]{0,11}").unwrap(),
        1 => Just("=>".to_string()),
        1 => Just("NO₂NO₃".to_string()),
        1 => Just(":".to_string()),
    ]
}

fn keyword_name() -> impl Strategy<Value = String> {
    prop::string::string_regex("[A-Za-z][A-Za-z0-9_-]{0,11}").unwrap()
}

fn string_content() -> impl Strategy<Value = String> {
    // arbitrary characters, emphatically including the two escapables
    prop::collection::vec(
        prop_oneof![
            4 => any::<char>(),
            1 => Just('"'),
            1 => Just('\\'),
            1 => Just('\n'),
        ],
        0..16,
    )
    .prop_map(|chars| chars.into_iter().collect())
}

fn sl_node() -> impl Strategy<Value = SlNode> {
    let leaf = prop_oneof![
        atom_text().prop_map(SlNode::Atom),
        keyword_name().prop_map(SlNode::Keyword),
        string_content().prop_map(SlNode::Str),
    ];
    leaf.prop_recursive(6, 64, 6, |inner| {
        prop::collection::vec(inner, 0..6).prop_map(SlNode::List)
    })
}

fn frame() -> impl Strategy<Value = Frame> {
    let descriptor = (atom_text(), atom_text())
        .prop_map(|(name, agent_type)| AgentDescriptor { name, agent_type });
    let rule_text = string_content().prop_map(|tail| format!("(defrule {tail}"));
    prop_oneof![
        prop::collection::vec(descriptor, 0..4).prop_map(Frame::AgentsToBeTrained),
        prop::collection::vec(atom_text(), 0..4).prop_map(Frame::LoadClass),
        prop::collection::vec(rule_text, 1..4).prop_map(Frame::AddRule),
        (atom_text(), atom_text(), atom_text()).prop_map(|(message_ontology, my_ontology, term)| {
            Frame::OntologyQuery { message_ontology, my_ontology, term }
        }),
        (string_content(), string_content())
            .prop_map(|(from_term, to_term)| Frame::TermMapping { from_term, to_term }),
    ]
}

const DOMAIN: [&str; 3] = ["low", "normal", "high"];

/// A dataset as raw parts: attribute count and rows of (category indexes,
/// label code). Kept primitive so shrinking stays useful.
fn dataset_parts() -> impl Strategy<Value = (usize, Vec<(Vec<usize>, u8)>)> {
    (1..=3usize).prop_flat_map(|nattrs| {
        let rows = prop::collection::vec(
            (prop::collection::vec(0..DOMAIN.len(), nattrs), 0..4u8),
            1..=60,
        );
        rows.prop_map(move |rows| (nattrs, rows))
    })
}

fn build_dataset(nattrs: usize, rows: &[(Vec<usize>, u8)]) -> Dataset {
    let schema: Vec<(String, Vec<String>)> = (0..nattrs)
        .map(|i| (format!("a{i}"), DOMAIN.iter().map(|c| c.to_string()).collect()))
        .collect();
    let examples = rows
        .iter()
        .map(|(cats, label)| TrainingExample {
            attributes: schema
                .iter()
                .zip(cats)
                .map(|((name, domain), &i)| (name.clone(), domain[i].clone()))
                .collect(),
            label: AlarmType::new(*label).expect("codes drawn from 0..4"),
        })
        .collect();
    Dataset::new(schema, examples).expect("generated rows conform to the schema")
}

/// Canonical print with randomized inter-token whitespace, the hand-written
/// variance the canonical printer removes.
fn render_loose(node: &SlNode, seed: &mut u64, out: &mut String) {
    fn ws(seed: &mut u64) -> &'static str {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        const CHOICES: [&str; 5] = [" ", "  ", "\n", "\t", " \n\t "];
        CHOICES[(*seed >> 33) as usize % CHOICES.len()]
    }
    match node {
        SlNode::List(items) => {
            out.push('(');
            out.push_str(ws(seed));
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(ws(seed));
                }
                render_loose(item, seed, out);
            }
            out.push_str(ws(seed));
            out.push(')');
        }
        other => out.push_str(&sl::print(other)),
    }
}

// ------------------------------------------------------------ properties

proptest! {
    #[test]
    fn printed_nodes_parse_back_to_themselves(node in sl_node()) {
        let printed = sl::print(&node);
        let reparsed = sl::parse(&printed)
            .unwrap_or_else(|e| panic!("canonical form must parse: {e}\n{printed}"));
        prop_assert_eq!(reparsed, node);
    }

    #[test]
    fn whitespace_never_changes_the_parse(node in sl_node(), seed in any::<u64>()) {
        let mut loose = String::new();
        let mut state = seed;
        render_loose(&node, &mut state, &mut loose);
        let reparsed = sl::parse(&loose)
            .unwrap_or_else(|e| panic!("loosely spaced form must parse: {e}\n{loose}"));
        prop_assert_eq!(reparsed, node);
    }

    #[test]
    fn frames_survive_encode_decode(frame in frame()) {
        let node = frames::encode(&frame);
        prop_assert_eq!(frames::decode(&node).unwrap(), frame.clone());
        // and the wire text carries the same frame
        let text = sl::print(&node);
        prop_assert_eq!(frames::decode(&sl::parse(&text).unwrap()).unwrap(), frame);
    }

    #[test]
    fn entropy_stays_within_two_bits(codes in prop::collection::vec(0..4u8, 1..200)) {
        let labels: Vec<AlarmType> =
            codes.iter().map(|&c| AlarmType::new(c).unwrap()).collect();
        let h = entropy(&labels).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&h), "entropy {h} out of range");
        if codes.iter().all(|&c| c == codes[0]) {
            prop_assert!(h.abs() < 1e-12, "pure labels must have zero entropy");
        }
    }

    #[test]
    fn information_gain_is_bounded_by_entropy((nattrs, rows) in dataset_parts()) {
        let ds = build_dataset(nattrs, &rows);
        let labels: Vec<AlarmType> = ds.examples().iter().map(|e| e.label).collect();
        let h = entropy(&labels).unwrap();
        for i in 0..nattrs {
            let gain = information_gain(&ds, &format!("a{i}")).unwrap();
            prop_assert!(gain >= -1e-12, "gain {gain} below zero on a{i}");
            prop_assert!(gain <= h + 1e-12, "gain {gain} exceeds entropy {h} on a{i}");
        }
    }

    #[test]
    fn induction_is_order_independent_and_well_formed(
        (nattrs, rows) in dataset_parts(),
        shuffle_seed in any::<u64>(),
    ) {
        let ds = build_dataset(nattrs, &rows);
        let tree = induce_tree(&ds).unwrap();

        // the induced tree is a function of the example multiset, not of
        // presentation order
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let tree_shuffled = induce_tree(&build_dataset(nattrs, &shuffled)).unwrap();
        prop_assert_eq!(&tree, &tree_shuffled);

        // structural soundness: no attribute reused on a path, branches
        // cover the domain exactly, leaf labels come from the data
        let label_set: BTreeSet<AlarmType> = ds.examples().iter().map(|e| e.label).collect();
        fn walk(
            tree: &DecisionTree,
            used: &mut BTreeSet<String>,
            labels: &BTreeSet<AlarmType>,
        ) -> Result<(), TestCaseError> {
            match tree {
                DecisionTree::Leaf(label) => {
                    prop_assert!(labels.contains(label), "leaf label absent from the data");
                }
                DecisionTree::Node { attribute, branches } => {
                    prop_assert!(used.insert(attribute.clone()), "attribute reused on a path");
                    let cats: Vec<&str> = branches.iter().map(|(c, _)| c.as_str()).collect();
                    prop_assert_eq!(&cats, &DOMAIN, "branches must cover the domain in order");
                    for (_, subtree) in branches {
                        walk(subtree, used, labels)?;
                    }
                    used.remove(attribute);
                }
            }
            Ok(())
        }
        walk(&tree, &mut BTreeSet::new(), &label_set)?;
    }

    #[test]
    fn compiled_rules_mirror_the_tree_shape((nattrs, rows) in dataset_parts()) {
        fn leaves(tree: &DecisionTree) -> usize {
            match tree {
                DecisionTree::Leaf(_) => 1,
                DecisionTree::Node { branches, .. } =>
                    branches.iter().map(|(_, t)| leaves(t)).sum(),
            }
        }
        let tree = induce_tree(&build_dataset(nattrs, &rows)).unwrap();
        let rules = tree_to_rules(&tree);
        prop_assert_eq!(rules.len(), leaves(&tree), "one rule per leaf");
        for (i, rule) in rules.iter().enumerate() {
            prop_assert_eq!(&rule.name, &format!("rule_{}", i + 1), "depth-first naming");
        }
        // and the rendered texts reload as a rulebase
        let sources: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
        prop_assert!(RuleBase::parse(&sources).is_ok());
    }

    #[test]
    fn event_ids_are_dense_and_monotonic(codes in prop::collection::vec(0..4u8, 1..50)) {
        let mut repo = Repository::in_memory(3).unwrap();
        for (i, &code) in codes.iter().enumerate() {
            let event = repo
                .record_observation(Observation {
                    tick: i as u64,
                    location: "valencia".into(),
                    raw: Default::default(),
                    categories: [("ozone".to_string(), "normal".to_string())].into(),
                    predicted: AlarmType::new(code).unwrap(),
                })
                .unwrap();
            prop_assert_eq!(event, i as u64 + 1, "ids count up from 1 without gaps");
        }
        prop_assert_eq!(repo.last_event_id(), codes.len() as u64);
        prop_assert_eq!(repo.observations().count(), codes.len());
    }

    #[test]
    fn fact_translation_round_trips_through_a_bijection(
        size in 1..10usize,
        perm_seed in any::<u64>(),
        picks in prop::collection::vec((0..10usize, atom_text()), 1..8),
    ) {
        let a: Vec<String> = (0..size).map(|i| format!("term_a{i}")).collect();
        let mut b: Vec<String> = (0..size).map(|i| format!("term_b{i}")).collect();
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let mut service = OntologyService::new();
        service.register(Ontology::new("A", a.clone())).unwrap();
        service.register(Ontology::new("B", b.clone())).unwrap();
        service
            .register_map("A", "B", a.iter().cloned().zip(b.iter().cloned()).collect())
            .unwrap();
        let facts: Vec<Fact> = picks
            .into_iter()
            .map(|(i, value)| Fact::new(a[i % size].clone(), value))
            .collect();
        let there = service.translate_facts(&facts, "A", "B").unwrap();
        let back = service.translate_facts(&there, "B", "A").unwrap();
        prop_assert_eq!(back, facts.clone());
        // values pass through untouched in both directions
        for (original, translated) in facts.iter().zip(&there) {
            prop_assert_eq!(&original.value, &translated.value);
        }
    }
}
