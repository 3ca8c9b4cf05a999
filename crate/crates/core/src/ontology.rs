//! Term translation between named ontologies.
//!
//! The service keeps a registry of ontologies (term sets) and bijective
//! term maps between them, and answers `ontologyQuery` frames with
//! `Mapping` frames. Maps are explicitly registered from configuration —
//! there is no discovery — and because every map is a bijection, a map
//! registered in one direction serves lookups in both.
//!
//! Only attribute terms are translated; fact values pass through
//! untouched, and a translation call fails as a whole if any term is
//! unmapped — partial translations would silently corrupt downstream
//! rule matching.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::frames::Frame;
use crate::rules::Fact;

/// A named term set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontology {
    pub name: String,
    pub terms: BTreeSet<String>,
}

impl Ontology {
    pub fn new(name: impl Into<String>, terms: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Ontology { name: name.into(), terms: terms.into_iter().map(Into::into).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("ontology {0:?} is already registered")]
    DuplicateOntology(String),
    #[error("ontology {0:?} has no terms")]
    EmptyOntology(String),
    #[error("ontology {0:?} is not registered")]
    UnknownOntology(String),
    #[error("no term map registered between {0:?} and {1:?}")]
    NoMapRegistered(String, String),
    #[error("term {0:?} has no mapping")]
    UnmappedTerm(String),
    #[error("map from {0:?} is not a bijection: {1:?} appears twice as a target")]
    NotBijective(String, String),
    #[error("term {term:?} is not in ontology {ontology:?}")]
    TermNotInOntology { ontology: String, term: String },
    #[error("expected an ontologyQuery frame")]
    NotAQuery,
}

/// Registry of ontologies and the bijective maps between them.
#[derive(Debug, Clone, Default)]
pub struct OntologyService {
    ontologies: BTreeMap<String, Ontology>,
    /// (from, to) → term map, stored in the direction it was registered.
    maps: BTreeMap<(String, String), BTreeMap<String, String>>,
}

impl OntologyService {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, ontology: Ontology) -> Result<(), OntologyError> {
        if ontology.terms.is_empty() {
            return Err(OntologyError::EmptyOntology(ontology.name));
        }
        if self.ontologies.contains_key(&ontology.name) {
            return Err(OntologyError::DuplicateOntology(ontology.name));
        }
        self.ontologies.insert(ontology.name.clone(), ontology);
        Ok(())
    }

    pub fn ontology(&self, name: &str) -> Option<&Ontology> {
        self.ontologies.get(name)
    }

    /// Registers a bijective term map between two registered ontologies.
    /// One registration serves both directions.
    pub fn register_map(
        &mut self,
        from: &str,
        to: &str,
        pairs: BTreeMap<String, String>,
    ) -> Result<(), OntologyError> {
        let from_terms = &self
            .ontologies
            .get(from)
            .ok_or_else(|| OntologyError::UnknownOntology(from.to_string()))?
            .terms;
        let to_terms = &self
            .ontologies
            .get(to)
            .ok_or_else(|| OntologyError::UnknownOntology(to.to_string()))?
            .terms;
        let mut seen_targets = BTreeSet::new();
        for (source, target) in &pairs {
            if !from_terms.contains(source) {
                return Err(OntologyError::TermNotInOntology {
                    ontology: from.to_string(),
                    term: source.clone(),
                });
            }
            if !to_terms.contains(target) {
                return Err(OntologyError::TermNotInOntology {
                    ontology: to.to_string(),
                    term: target.clone(),
                });
            }
            if !seen_targets.insert(target.clone()) {
                return Err(OntologyError::NotBijective(from.to_string(), target.clone()));
            }
        }
        self.maps.insert((from.to_string(), to.to_string()), pairs);
        Ok(())
    }

    /// Translates one term from ontology `from` into ontology `to`.
    pub fn translate_term(&self, from: &str, to: &str, term: &str) -> Result<String, OntologyError> {
        for name in [from, to] {
            if !self.ontologies.contains_key(name) {
                return Err(OntologyError::UnknownOntology(name.to_string()));
            }
        }
        if let Some(pairs) = self.maps.get(&(from.to_string(), to.to_string())) {
            return pairs
                .get(term)
                .cloned()
                .ok_or_else(|| OntologyError::UnmappedTerm(term.to_string()));
        }
        // a map registered the other way round is a bijection: invert it
        if let Some(pairs) = self.maps.get(&(to.to_string(), from.to_string())) {
            return pairs
                .iter()
                .find(|(_, target)| target.as_str() == term)
                .map(|(source, _)| source.clone())
                .ok_or_else(|| OntologyError::UnmappedTerm(term.to_string()));
        }
        Err(OntologyError::NoMapRegistered(from.to_string(), to.to_string()))
    }

    /// Answers an [`Frame::OntologyQuery`]: the term lives in the message
    /// ontology and is translated into the asker's own ontology.
    pub fn map_term(&self, query: &Frame) -> Result<Frame, OntologyError> {
        let Frame::OntologyQuery { message_ontology, my_ontology, term } = query else {
            return Err(OntologyError::NotAQuery);
        };
        let translated = self.translate_term(message_ontology, my_ontology, term)?;
        Ok(Frame::TermMapping { from_term: term.clone(), to_term: translated })
    }

    /// Translates every fact's attribute from `from` to `to`, preserving
    /// order and passing values through. Fails as a whole on the first
    /// unmapped attribute.
    pub fn translate_facts(
        &self,
        facts: &[Fact],
        from: &str,
        to: &str,
    ) -> Result<Vec<Fact>, OntologyError> {
        facts
            .iter()
            .map(|fact| {
                Ok(Fact {
                    attribute: self.translate_term(from, to, &fact.attribute)?,
                    value: fact.value.clone(),
                })
            })
            .collect()
    }
}
