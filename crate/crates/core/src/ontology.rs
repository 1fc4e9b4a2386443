//! Closed ontology of domains, slots and legal values.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::state::{BeliefState, SlotId, SlotIdError, SlotValue, StateIssue};

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("slot `{0}` references undeclared domain")]
    UnknownDomain(SlotId),
    #[error("slot `{0}` is declared twice")]
    DuplicateSlot(SlotId),
    #[error("slot `{0}` has no legal values")]
    EmptyValues(SlotId),
    #[error("slot `{slot}` lists value {value:?} twice")]
    DuplicateValue { slot: SlotId, value: String },
    #[error("slot `{slot}` has malformed value {value:?} (quote or surrounding whitespace)")]
    MalformedValue { slot: SlotId, value: String },
    #[error(transparent)]
    BadSlot(#[from] SlotIdError),
    #[error("domain `{0}` is declared twice")]
    DuplicateDomain(String),
    #[error("invalid ontology JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read ontology {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One slot with its value set, as stored in the ontology file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub domain: String,
    pub slot: String,
    pub values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct OntologyFile {
    domains: Vec<String>,
    slots: Vec<SlotSpec>,
}

/// Domains, slots, and the ordered set of legal values for each slot.
///
/// `dontcare` is legal for every slot and is never listed explicitly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OntologyFile", into = "OntologyFile")]
pub struct Ontology {
    domains: Vec<String>,
    slots: Vec<SlotId>,
    values: BTreeMap<SlotId, Vec<String>>,
}

impl TryFrom<OntologyFile> for Ontology {
    type Error = OntologyError;

    fn try_from(file: OntologyFile) -> Result<Self, Self::Error> {
        Ontology::new(file.domains, file.slots)
    }
}

impl From<Ontology> for OntologyFile {
    fn from(ontology: Ontology) -> Self {
        let slots = ontology
            .slots
            .iter()
            .map(|id| SlotSpec {
                domain: id.domain().to_string(),
                slot: id.slot().to_string(),
                values: ontology.values[id].clone(),
            })
            .collect();
        OntologyFile {
            domains: ontology.domains,
            slots,
        }
    }
}

impl Ontology {
    pub fn new(domains: Vec<String>, slots: Vec<SlotSpec>) -> Result<Self, OntologyError> {
        let domains: Vec<String> = domains.into_iter().map(|d| d.nfc().collect()).collect();
        let mut seen_domains = BTreeSet::new();
        for domain in &domains {
            if !seen_domains.insert(domain.as_str()) {
                return Err(OntologyError::DuplicateDomain(domain.clone()));
            }
        }
        let mut ids = Vec::with_capacity(slots.len());
        let mut values = BTreeMap::new();
        for spec in slots {
            let id = SlotId::new(spec.domain, spec.slot)?;
            if !seen_domains.contains(id.domain()) {
                return Err(OntologyError::UnknownDomain(id));
            }
            if values.contains_key(&id) {
                return Err(OntologyError::DuplicateSlot(id));
            }
            if spec.values.is_empty() {
                return Err(OntologyError::EmptyValues(id));
            }
            let mut seen = BTreeSet::new();
            let mut legal = Vec::with_capacity(spec.values.len());
            for raw in spec.values {
                let value: String = raw.nfc().collect();
                if value.is_empty() || value.contains('"') || value.trim() != value {
                    return Err(OntologyError::MalformedValue { slot: id, value });
                }
                if !seen.insert(value.clone()) {
                    return Err(OntologyError::DuplicateValue { slot: id, value });
                }
                legal.push(value);
            }
            ids.push(id.clone());
            values.insert(id, legal);
        }
        Ok(Ontology {
            domains,
            slots: ids,
            values,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, OntologyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| OntologyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ontology serializes")
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn slots(&self) -> &[SlotId] {
        &self.slots
    }

    /// Number of slots.
    pub fn n(&self) -> usize {
        self.slots.len()
    }

    pub fn values(&self, slot: &SlotId) -> Option<&[String]> {
        self.values.get(slot).map(Vec::as_slice)
    }

    pub fn contains_slot(&self, slot: &SlotId) -> bool {
        self.values.contains_key(slot)
    }

    pub fn is_legal(&self, slot: &SlotId, value: &SlotValue) -> bool {
        match (self.values.get(slot), value) {
            (None, _) => false,
            (Some(_), SlotValue::DontCare) => true,
            (Some(legal), SlotValue::Regular(text)) => legal.iter().any(|v| v == text),
        }
    }

    pub fn validate_state(&self, state: &BeliefState) -> Vec<StateIssue> {
        state
            .iter()
            .filter_map(|(slot, value)| {
                if !self.contains_slot(slot) {
                    Some(StateIssue::UnknownSlot { slot: slot.clone() })
                } else if !self.is_legal(slot, value) {
                    Some(StateIssue::IllegalValue {
                        slot: slot.clone(),
                        value: value.as_str().to_string(),
                    })
                } else {
                    None
                }
            })
            .collect()
    }

    /// Every `(slot, value)` pair, in declaration order.
    pub fn slot_values(&self) -> impl Iterator<Item = (&SlotId, &str)> {
        self.slots
            .iter()
            .flat_map(move |id| self.values[id].iter().map(move |v| (id, v.as_str())))
    }

    /// Copy without the listed domains and their slots.
    pub fn without_domains(&self, excluded: &[String]) -> Ontology {
        let keep = |d: &str| !excluded.iter().any(|e| e == d);
        let slots: Vec<SlotId> = self
            .slots
            .iter()
            .filter(|s| keep(s.domain()))
            .cloned()
            .collect();
        Ontology {
            domains: self.domains.iter().filter(|d| keep(d)).cloned().collect(),
            values: slots
                .iter()
                .map(|s| (s.clone(), self.values[s].clone()))
                .collect(),
            slots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(domain: &str, slot: &str, values: &[&str]) -> SlotSpec {
        SlotSpec {
            domain: domain.into(),
            slot: slot.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    #[test]
    fn parses_file_format() {
        let text = r#"{"domains":["hotel"],"slots":[{"domain":"hotel","slot":"price","values":["cheap","expensive"]}]}"#;
        let ontology = Ontology::from_json_str(text).unwrap();
        assert_eq!(ontology.n(), 1);
        let price = SlotId::new("hotel", "price").unwrap();
        assert!(ontology.is_legal(&price, &SlotValue::regular("cheap")));
        assert!(ontology.is_legal(&price, &SlotValue::DontCare));
        assert!(!ontology.is_legal(&price, &SlotValue::regular("free")));
        let back: Ontology = serde_json::from_str(&ontology.to_json_pretty()).unwrap();
        assert_eq!(back, ontology);
    }

    #[test]
    fn rejects_invariant_violations() {
        let d = vec!["hotel".to_string()];
        assert!(matches!(
            Ontology::new(d.clone(), vec![spec("taxi", "car", &["x"])]),
            Err(OntologyError::UnknownDomain(_))
        ));
        assert!(matches!(
            Ontology::new(d.clone(), vec![spec("hotel", "price", &[])]),
            Err(OntologyError::EmptyValues(_))
        ));
        assert!(matches!(
            Ontology::new(d.clone(), vec![spec("hotel", "price", &["a", "a"])]),
            Err(OntologyError::DuplicateValue { .. })
        ));
        assert!(matches!(
            Ontology::new(d.clone(), vec![spec("hotel", "price", &["a\"b"])]),
            Err(OntologyError::MalformedValue { .. })
        ));
        assert!(matches!(
            Ontology::new(d.clone(), vec![spec("hotel", "price", &[" a"])]),
            Err(OntologyError::MalformedValue { .. })
        ));
        assert!(matches!(
            Ontology::new(
                d,
                vec![spec("hotel", "price", &["a"]), spec("hotel", "price", &["b"])]
            ),
            Err(OntologyError::DuplicateSlot(_))
        ));
    }

    #[test]
    fn validates_states() {
        let ontology =
            Ontology::new(vec!["hotel".into()], vec![spec("hotel", "price", &["cheap"])]).unwrap();
        let mut state = BeliefState::new();
        state.insert(SlotId::new("hotel", "price").unwrap(), SlotValue::regular("dear"));
        state.insert(SlotId::new("hotel", "stars").unwrap(), SlotValue::regular("4"));
        let issues = ontology.validate_state(&state);
        assert_eq!(issues.len(), 2);
    }

    #[test]
    fn drops_domains() {
        let ontology = Ontology::new(
            vec!["hotel".into(), "police".into()],
            vec![spec("hotel", "price", &["cheap"]), spec("police", "name", &["x"])],
        )
        .unwrap();
        let filtered = ontology.without_domains(&["police".to_string()]);
        assert_eq!(filtered.domains(), ["hotel".to_string()]);
        assert_eq!(filtered.n(), 1);
    }
}
